use super::{FitnessTask, TaskError};
use crate::genome::Shape;
use crate::phenotype::Phenotype;

const CASES: [([f64; 2], f64); 4] = [
    ([0.0, 0.0], 0.0),
    ([0.0, 1.0], 1.0),
    ([1.0, 0.0], 1.0),
    ([1.0, 1.0], 0.0),
];

/// Two flat inputs, one output. Fitness is `(4 - Σ|output - expected|)²`,
/// so it lies in `[0, 16]`.
#[derive(Clone, Debug, Default)]
pub struct XorTask;

impl XorTask {
    pub const TARGET: f64 = 15.0;

    pub fn new() -> Self {
        XorTask
    }

    /// Fitness from the four outputs in case order (00, 01, 10, 11).
    pub fn score(outputs: [f64; 4]) -> f64 {
        let error: f64 = outputs
            .iter()
            .zip(CASES)
            .map(|(out, (_, expected))| (out - expected).abs())
            .sum();
        (4.0 - error).max(0.0).powi(2)
    }
}

impl FitnessTask for XorTask {
    fn name(&self) -> &str {
        "xor"
    }

    fn input_shape(&self) -> Shape {
        Shape::new(2, 1)
    }

    fn fitness_target(&self) -> Option<f64> {
        Some(Self::TARGET)
    }

    fn evaluate(&self, phenotype: &Phenotype) -> Result<f64, TaskError> {
        let mut outputs = [0.0; 4];
        for (out, (inputs, _)) in outputs.iter_mut().zip(CASES) {
            *out = phenotype
                .forward_inputs(&inputs)
                .map_err(|e| TaskError::Parameter(e.to_string()))?[0];
        }
        Ok(Self::score(outputs))
    }
}
