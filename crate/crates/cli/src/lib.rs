//! `neuroevo` command line: train, classify, export.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 fitness target not
//! reached, 4 runtime failure during evaluation or while writing results.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use neuroevo::evolution::{evolve_with, EvolutionError, GenerationReport};
use neuroevo::persistence::{self, PersistenceError};
use neuroevo::tasks::load_image;
use neuroevo::Phenotype;

pub use config::{RunConfig, TaskSelector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TARGET_MISSED: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

pub const CHAMPION_FILE: &str = "champion.json";
pub const HISTORY_FILE: &str = "history.json";

pub const DISCLAIMER: &str =
    "note: this probability is an advisory estimate and does not replace a professional diagnosis";

#[derive(Debug, Parser)]
#[command(
    name = "neuroevo",
    version,
    about = "NEAT neuroevolution with evolvable conv stages"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a network and write champion.json and history.json.
    Train {
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// xor, bars, or images:<manifest.csv>.
        #[arg(long)]
        task: TaskSelector,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Threads used for fitness evaluation (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the probability a genome assigns to one image.
    Classify { genome: PathBuf, image: PathBuf },
    /// Validate a history archive and write it back out.
    Export { history: PathBuf, out: PathBuf },
}

/// Verbosity from `NEUROEVO_LOG`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LogLevel {
    Quiet,
    Info,
    Debug,
}

impl LogLevel {
    pub fn from_env() -> Result<Self, String> {
        match std::env::var("NEUROEVO_LOG") {
            Err(_) => Ok(LogLevel::Info),
            Ok(v) => match v.as_str() {
                "" | "info" => Ok(LogLevel::Info),
                "quiet" => Ok(LogLevel::Quiet),
                "debug" => Ok(LogLevel::Debug),
                other => Err(format!(
                    "NEUROEVO_LOG must be quiet, info or debug, got `{other}`"
                )),
            },
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: message.to_string(),
        }
    }
}

/// Run the CLI with explicit arguments and output streams; returns the exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let level = match LogLevel::from_env() {
        Ok(level) => level,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Train {
            config,
            task,
            out: out_dir,
            seed,
            workers,
        } => train(
            config.as_deref(),
            &task,
            &out_dir,
            seed,
            workers,
            level,
            out,
            err,
        ),
        Command::Classify { genome, image } => classify(&genome, &image, out, err),
        Command::Export { history, out: path } => export(&history, &path, level, out),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            failure.code
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn train(
    config_path: Option<&Path>,
    task: &TaskSelector,
    out_dir: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    level: LogLevel,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
) -> Result<i32, Failure> {
    let mut config = match config_path {
        Some(path) => RunConfig::load(path).map_err(Failure::usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        config.evolution.seed = seed;
    }
    let task = task.build(&config).map_err(Failure::usage)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(Failure::runtime)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| Failure::usage(format!("{}: {e}", out_dir.display())))?;

    if level >= LogLevel::Debug {
        let _ = writeln!(
            err,
            "task={} input={}x{} outputs={} population={} seed={}",
            task.name(),
            task.input_shape().width,
            task.input_shape().height,
            task.output_count(),
            config.evolution.population_size,
            config.evolution.seed
        );
    }
    let on_generation = |report: &GenerationReport| {
        if level >= LogLevel::Info {
            let _ = writeln!(out, "{}", report.progress_line());
        }
        if level >= LogLevel::Debug {
            for s in &report.species {
                let _ = writeln!(
                    out,
                    "generation={} species_id={} size={} best={} stagnation={}",
                    report.generation, s.id, s.size, s.best_fitness, s.stagnation
                );
            }
        }
    };
    let outcome = pool
        .install(|| evolve_with(task.as_ref(), &config.evolution, on_generation))
        .map_err(|e| match e {
            e @ (EvolutionError::Config(_) | EvolutionError::Genome(_)) => Failure::usage(e),
            other => Failure::runtime(other),
        })?;

    let champion_path = out_dir.join(CHAMPION_FILE);
    let history_path = out_dir.join(HISTORY_FILE);
    persistence::save_genome(&outcome.champion, &champion_path).map_err(Failure::runtime)?;
    persistence::export_history(&outcome.history, &history_path).map_err(Failure::runtime)?;
    if level >= LogLevel::Info {
        let _ = writeln!(
            out,
            "done reached_target={} best={} champion={} history={}",
            outcome.reached_target,
            outcome.champion.fitness().unwrap_or(0.0),
            champion_path.display(),
            history_path.display()
        );
    }
    Ok(if outcome.reached_target {
        EXIT_OK
    } else {
        EXIT_TARGET_MISSED
    })
}

fn classify(
    genome_path: &Path,
    image_path: &Path,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
) -> Result<i32, Failure> {
    let genome = persistence::load_genome(genome_path)
        .map_err(|e| Failure::usage(format!("{}: {e}", genome_path.display())))?;
    let image = load_image(image_path).map_err(Failure::usage)?;
    if image.shape() != genome.input_shape() {
        return Err(Failure::usage(format!(
            "image {} is {}, genome expects {}",
            image_path.display(),
            image.shape(),
            genome.input_shape()
        )));
    }
    let phenotype = Phenotype::compile(&genome).map_err(Failure::usage)?;
    let raw = phenotype.forward(&image).map_err(Failure::usage)?[0];
    let output = genome
        .node(phenotype.output_ids()[0])
        .expect("output ids come from the genome");
    let probability = if output.activation.is_sigmoid() {
        raw
    } else {
        1.0 / (1.0 + (-raw).exp())
    };
    let _ = writeln!(out, "probability={probability}");
    let _ = writeln!(err, "{DISCLAIMER}");
    Ok(EXIT_OK)
}

fn export(
    history: &Path,
    path: &Path,
    level: LogLevel,
    out: &mut (dyn Write + Send),
) -> Result<i32, Failure> {
    let archive = persistence::import_history(history).map_err(|e| match e {
        PersistenceError::Io { .. } => Failure::usage(e),
        other => Failure::usage(format!("{}: {other}", history.display())),
    })?;
    persistence::export_history(&archive, path).map_err(Failure::runtime)?;
    if level >= LogLevel::Info {
        let _ = writeln!(
            out,
            "exported generations={} to {}",
            archive.generations.len(),
            path.display()
        );
    }
    Ok(EXIT_OK)
}
