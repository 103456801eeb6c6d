//! Scalar activation functions shared by conv stages and network nodes.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Slope used by the steepened sigmoid of classic NEAT.
pub const STEEPENED_SLOPE: f64 = 4.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    SigmoidSteepened,
    Sigmoid,
    Relu,
    Tanh,
    Linear,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 5] = [
        ActivationKind::SigmoidSteepened,
        ActivationKind::Sigmoid,
        ActivationKind::Relu,
        ActivationKind::Tanh,
        ActivationKind::Linear,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::SigmoidSteepened => 1.0 / (1.0 + (-STEEPENED_SLOPE * x).exp()),
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Linear => x,
        }
    }

    /// True for the kinds whose range is the open unit interval.
    pub fn is_sigmoid(self) -> bool {
        matches!(
            self,
            ActivationKind::Sigmoid | ActivationKind::SigmoidSteepened
        )
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..Self::ALL.len())]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::SigmoidSteepened => "sigmoid_steepened",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Linear => "linear",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
