//! NEAT neuroevolution with evolvable convolutional preprocessing.
//!
//! A [`Genome`](genome::Genome) couples an ordered list of conv stage genes
//! with a NEAT node/connection graph. [`evolution::evolve`] runs the
//! generational loop against a [`FitnessTask`](tasks::FitnessTask) and returns
//! the champion together with a [`HistoryArchive`](persistence::HistoryArchive)
//! that the visualizer consumes.

pub mod activation;
pub mod evolution;
pub mod genome;
pub mod persistence;
pub mod phenotype;
pub mod tasks;

pub use activation::ActivationKind;
pub use evolution::{evolve, EvolutionConfig, EvolutionOutcome};
pub use genome::{Genome, InnovationRegistry, Shape};
pub use phenotype::{ImageMatrix, Phenotype};
pub use tasks::FitnessTask;
