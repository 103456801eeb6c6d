//! Genome documents and run histories.
//!
//! Both are UTF-8 JSON. Field and array order is fixed (nodes by id,
//! connections by innovation, stages by index) and floats are written in
//! their shortest round-tripping decimal form, so serializing the same value
//! twice gives identical bytes. The schemas under `schemas/` are the contract
//! with the visualizer; every exported history is checked against them.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use crate::evolution::{EvolutionConfig, GenerationReport};
use crate::genome::{Genome, GenomeError};

pub const GENOME_FORMAT_VERSION: u32 = 1;
pub const HISTORY_FORMAT_VERSION: u32 = 1;

/// JSON Schema of a standalone genome document.
pub const GENOME_SCHEMA: &str = include_str!("../../schemas/genome.schema.json");
/// JSON Schema of a history document.
pub const HISTORY_SCHEMA: &str = include_str!("../../schemas/history.schema.json");

#[derive(Debug, thiserror::Error)]
pub enum PersistenceError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("unsupported format_version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u64, supported: u32 },
    #[error("document violates the schema: {}", .0.join("; "))]
    Schema(Vec<String>),
    #[error("invalid genome: {0}")]
    Genome(#[from] GenomeError),
    #[error("inconsistent history: {0}")]
    History(String),
}

impl PersistenceError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        PersistenceError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskInfo {
    pub name: String,
    pub input_width: usize,
    pub input_height: usize,
    pub output_count: usize,
}

/// Per-generation record of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryArchive {
    pub format_version: u32,
    pub task: TaskInfo,
    pub config: EvolutionConfig,
    pub population_size: usize,
    /// Set when member genomes were left out because the run exceeded
    /// `archive_member_cap`; representatives and champions are always kept.
    pub members_truncated: bool,
    pub generations: Vec<GenerationReport>,
}

impl HistoryArchive {
    pub fn new(task: TaskInfo, config: EvolutionConfig, include_members: bool) -> Self {
        HistoryArchive {
            format_version: HISTORY_FORMAT_VERSION,
            task,
            population_size: config.population_size,
            config,
            members_truncated: !include_members,
            generations: Vec::new(),
        }
    }

    /// Structural checks the schema cannot express.
    pub fn validate(&self) -> Result<(), PersistenceError> {
        let fail = |msg: String| Err(PersistenceError::History(msg));
        let mut previous_best = f64::NEG_INFINITY;
        for (i, report) in self.generations.iter().enumerate() {
            if report.generation != i {
                return fail(format!(
                    "generation entries must be contiguous from 0, entry {i} is generation {}",
                    report.generation
                ));
            }
            let total: usize = report.species.iter().map(|s| s.size).sum();
            if total != self.population_size {
                return fail(format!(
                    "generation {i}: species sizes sum to {total}, population is {}",
                    self.population_size
                ));
            }
            if report.best_fitness_ever < previous_best {
                return fail(format!("generation {i}: best_fitness_ever decreased"));
            }
            previous_best = report.best_fitness_ever;
            for s in &report.species {
                if let Some(members) = &s.members {
                    if members.len() != s.size {
                        return fail(format!(
                            "generation {i}, species {}: {} members listed, size {}",
                            s.id,
                            members.len(),
                            s.size
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct GenomeDocument<'a> {
    format_version: u32,
    #[serde(flatten)]
    genome: &'a Genome,
}

fn schema_validator(which: &'static str) -> &'static jsonschema::Validator {
    static GENOME: OnceLock<jsonschema::Validator> = OnceLock::new();
    static HISTORY: OnceLock<jsonschema::Validator> = OnceLock::new();
    let (cell, text) = match which {
        "genome" => (&GENOME, GENOME_SCHEMA),
        _ => (&HISTORY, HISTORY_SCHEMA),
    };
    cell.get_or_init(|| {
        let schema: Value = serde_json::from_str(text).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

fn check_schema(which: &'static str, document: &Value) -> Result<(), PersistenceError> {
    let errors: Vec<String> = schema_validator(which)
        .iter_errors(document)
        .map(|e| format!("{}: {e}", display_pointer(&e.instance_path.to_string())))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(PersistenceError::Schema(errors))
    }
}

fn display_pointer(pointer: &str) -> String {
    if pointer.is_empty() {
        "/".into()
    } else {
        pointer.into()
    }
}

/// Validate a parsed genome document against the published schema.
pub fn validate_genome_document(document: &Value) -> Result<(), PersistenceError> {
    check_schema("genome", document)
}

/// Validate a parsed history document against the published schema.
pub fn validate_history_document(document: &Value) -> Result<(), PersistenceError> {
    check_schema("history", document)
}

fn parse_value(text: &str) -> Result<Value, PersistenceError> {
    serde_json::from_str(text).map_err(|e| PersistenceError::Parse {
        field: "<document>".into(),
        message: e.to_string(),
    })
}

fn check_version(document: &Value, supported: u32) -> Result<(), PersistenceError> {
    let found = document
        .get("format_version")
        .ok_or_else(|| PersistenceError::Parse {
            field: "format_version".into(),
            message: "missing field `format_version`".into(),
        })?
        .as_u64()
        .ok_or_else(|| PersistenceError::Parse {
            field: "format_version".into(),
            message: "expected a non-negative integer".into(),
        })?;
    if found > u64::from(supported) || found == 0 {
        return Err(PersistenceError::UnsupportedVersion { found, supported });
    }
    Ok(())
}

fn from_value_with_path<T: DeserializeOwned>(value: Value) -> Result<T, PersistenceError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        PersistenceError::Parse {
            field,
            message: e.into_inner().to_string(),
        }
    })
}

/// Canonical genome document text.
pub fn genome_to_string(genome: &Genome) -> String {
    let doc = GenomeDocument {
        format_version: GENOME_FORMAT_VERSION,
        genome,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("genomes always serialize");
    text.push('\n');
    text
}

pub fn genome_from_str(text: &str) -> Result<Genome, PersistenceError> {
    let mut document = parse_value(text)?;
    check_version(&document, GENOME_FORMAT_VERSION)?;
    if let Some(map) = document.as_object_mut() {
        map.remove("format_version");
    }
    from_value_with_path(document)
}

pub fn save_genome(genome: &Genome, path: impl AsRef<Path>) -> Result<(), PersistenceError> {
    genome.validate()?;
    write_atomic(path.as_ref(), genome_to_string(genome).as_bytes())
}

pub fn load_genome(path: impl AsRef<Path>) -> Result<Genome, PersistenceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PersistenceError::io(path, e))?;
    genome_from_str(&text)
}

/// History document text, checked against the published schema.
pub fn history_to_string(history: &HistoryArchive) -> Result<String, PersistenceError> {
    history.validate()?;
    let value = serde_json::to_value(history).map_err(|e| PersistenceError::Parse {
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    validate_history_document(&value)?;
    let mut text = serde_json::to_string(&value).expect("values always serialize");
    text.push('\n');
    Ok(text)
}

pub fn history_from_str(text: &str) -> Result<HistoryArchive, PersistenceError> {
    let document = parse_value(text)?;
    check_version(&document, HISTORY_FORMAT_VERSION)?;
    validate_history_document(&document)?;
    let history: HistoryArchive = from_value_with_path(document)?;
    history.validate()?;
    Ok(history)
}

pub fn export_history(
    history: &HistoryArchive,
    path: impl AsRef<Path>,
) -> Result<(), PersistenceError> {
    write_atomic(path.as_ref(), history_to_string(history)?.as_bytes())
}

pub fn import_history(path: impl AsRef<Path>) -> Result<HistoryArchive, PersistenceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PersistenceError::io(path, e))?;
    history_from_str(&text)
}

/// Write to a temp file next to `path`, then rename over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PersistenceError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).map_err(|e| PersistenceError::io(path, e))?;
    // Temp files are created 0600; keep the target's mode, or use 0644.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let perms = std::fs::metadata(path)
            .map(|m| m.permissions())
            .unwrap_or_else(|_| std::fs::Permissions::from_mode(0o644));
        tmp.as_file()
            .set_permissions(perms)
            .map_err(|e| PersistenceError::io(path, e))?;
    }
    tmp.write_all(bytes)
        .and_then(|()| tmp.as_file().sync_all())
        .map_err(|e| PersistenceError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| PersistenceError::io(path, e.error))?;
    Ok(())
}
