//! Fitness tasks and image ingestion.

mod bars;
mod images;
mod xor;

pub use bars::{BarsTask, DEFAULT_BAR_NOISE};
pub use images::{
    load_image, load_manifest, parse_manifest, resample_nearest, DatasetManifest,
    ImageClassificationTask, ManifestRecord,
};
pub use xor::XorTask;

use std::path::PathBuf;

use crate::genome::{ConvStageGene, Shape, ShapeError};
use crate::phenotype::{ImageMatrix, Phenotype};

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("undecodable images: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    Undecodable(Vec<PathBuf>),
    #[error("invalid task parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// A fitness function together with the network shape it expects.
///
/// `evaluate` must be pure: the same phenotype always scores the same, and
/// it may be called from many threads at once.
pub trait FitnessTask: Send + Sync {
    fn name(&self) -> &str;

    /// Image size fed to the conv pipeline. Flat-input tasks use `n x 1`.
    fn input_shape(&self) -> Shape;

    fn output_count(&self) -> usize {
        1
    }

    /// Conv stages initial genomes start from.
    fn conv_seed(&self) -> Vec<ConvStageGene> {
        Vec::new()
    }

    fn fitness_target(&self) -> Option<f64>;

    /// Non-negative fitness of `phenotype`.
    fn evaluate(&self, phenotype: &Phenotype) -> Result<f64, TaskError>;
}

/// Share of `samples` whose thresholded first output (`>= 0.5` means class 1)
/// matches the label.
pub(crate) fn accuracy<'a>(
    phenotype: &Phenotype,
    samples: impl ExactSizeIterator<Item = (&'a ImageMatrix, u8)>,
) -> Result<f64, TaskError> {
    let total = samples.len();
    if total == 0 {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (image, label) in samples {
        let output = phenotype.forward(image)?[0];
        let predicted = u8::from(output >= 0.5);
        if predicted == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}
