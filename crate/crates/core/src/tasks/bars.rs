//! Synthetic stand-in for image assessment: tell a horizontal bar from a
//! vertical one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{accuracy, FitnessTask, TaskError};
use crate::activation::ActivationKind;
use crate::genome::{ConvStageGene, Kernel, Pooler, Shape};
use crate::phenotype::{ImageMatrix, Phenotype};

/// Default amplitude of the per-pixel noise.
pub const DEFAULT_BAR_NOISE: f64 = 0.2;

/// Class 0 images hold one bright horizontal bar, class 1 one bright vertical
/// bar, each at a random position. Background pixels are drawn from
/// `[0, noise]` and bar pixels from `[1 - noise, 1]`.
#[derive(Clone, Debug)]
pub struct BarsTask {
    size: usize,
    samples: Vec<(ImageMatrix, u8)>,
}

impl BarsTask {
    pub const TARGET: f64 = 0.95;

    pub fn new(size: usize, samples_per_class: usize, seed: u64) -> Result<Self, TaskError> {
        Self::with_noise(size, samples_per_class, seed, DEFAULT_BAR_NOISE)
    }

    pub fn with_noise(
        size: usize,
        samples_per_class: usize,
        seed: u64,
        noise: f64,
    ) -> Result<Self, TaskError> {
        if size < 4 {
            return Err(TaskError::Parameter(format!(
                "bars size must be >= 4, got {size}"
            )));
        }
        if samples_per_class == 0 {
            return Err(TaskError::Parameter(
                "samples_per_class must be positive".into(),
            ));
        }
        if !(0.0..=0.5).contains(&noise) {
            return Err(TaskError::Parameter(format!(
                "noise must be in [0, 0.5], got {noise}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(2 * samples_per_class);
        for _ in 0..samples_per_class {
            for label in [0u8, 1] {
                let line = rng.random_range(0..size);
                let mut pixels = Vec::with_capacity(size * size);
                for row in 0..size {
                    for col in 0..size {
                        let on_bar = if label == 0 { row == line } else { col == line };
                        let jitter = if noise > 0.0 {
                            rng.random_range(0.0..=noise)
                        } else {
                            0.0
                        };
                        pixels.push(if on_bar { 1.0 - jitter } else { jitter });
                    }
                }
                let image = ImageMatrix::new(size, size, pixels).expect("pixels are in [0, 1]");
                samples.push((image, label));
            }
        }
        Ok(BarsTask { size, samples })
    }

    pub fn samples(&self) -> &[(ImageMatrix, u8)] {
        &self.samples
    }
}

impl FitnessTask for BarsTask {
    fn name(&self) -> &str {
        "bars"
    }

    fn input_shape(&self) -> Shape {
        Shape::new(self.size, self.size)
    }

    /// One 3x3 stage with ReLU. When the map is large enough it is max pooled
    /// down to 2x2 so the network sees one value per quadrant.
    fn conv_seed(&self) -> Vec<ConvStageGene> {
        let conv = self.size - 2;
        let (pooler, pool_window) = if conv >= 4 {
            (Pooler::Max, conv / 2)
        } else {
            (Pooler::None, 1)
        };
        vec![ConvStageGene {
            stage_index: 0,
            kernel: Kernel::filled(3, 3, 0.0),
            stride: 1,
            pooler,
            pool_window,
            activation: ActivationKind::Relu,
        }]
    }

    fn fitness_target(&self) -> Option<f64> {
        Some(Self::TARGET)
    }

    fn evaluate(&self, phenotype: &Phenotype) -> Result<f64, TaskError> {
        accuracy(
            phenotype,
            self.samples.iter().map(|(img, label)| (img, *label)),
        )
    }
}
