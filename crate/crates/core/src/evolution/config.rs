use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::genome::{CompatibilityCoefficients, ConvStageGene, DEFAULT_DISABLE_PROB};

/// Every knob of a run. Field names double as config-file keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Stop once the best fitness reaches this. Falls back to the task's target.
    pub fitness_target: Option<f64>,
    pub seed: u64,

    pub compatibility: CompatibilityCoefficients,

    /// Chance an offspring goes through weight mutation at all.
    pub weight_mutation_rate: f64,
    /// Per-weight chance of Gaussian perturbation.
    pub weight_perturb_prob: f64,
    pub weight_perturb_sigma: f64,
    /// Per-weight chance of a fresh uniform draw.
    pub weight_reset_prob: f64,
    pub add_connection_rate: f64,
    pub add_node_rate: f64,
    /// Chance an offspring goes through conv-stage mutation at all.
    pub conv_mutation_rate: f64,
    pub kernel_sigma: f64,
    pub pooler_swap_prob: f64,
    pub activation_swap_prob: f64,
    pub crossover_disable_prob: f64,

    /// Per-species survivors copied unchanged.
    pub elitism_count: usize,
    /// Species smaller than this get no elites, except the one holding the
    /// population champion.
    pub elitism_min_species_size: usize,
    pub stagnation_limit: usize,
    pub interspecies_mating_prob: f64,
    /// Top fraction of each species (by raw fitness) eligible as parents.
    pub survival_fraction: f64,

    pub output_activation: ActivationKind,
    pub hidden_activation: ActivationKind,
    /// Conv stages of the initial genomes. Falls back to the task's seed.
    pub conv_seed: Option<Vec<ConvStageGene>>,
    /// Draw every kernel element of the initial population from `[-1, 1]`.
    pub randomize_initial_kernels: bool,

    /// Embed every member genome in the history while
    /// `population_size * (max_generations + 1)` stays within this cap.
    pub archive_member_cap: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 150,
            max_generations: 150,
            fitness_target: None,
            seed: 0,
            compatibility: CompatibilityCoefficients::default(),
            weight_mutation_rate: 0.8,
            weight_perturb_prob: 0.9,
            weight_perturb_sigma: 0.5,
            weight_reset_prob: 0.1,
            add_connection_rate: 0.05,
            add_node_rate: 0.03,
            conv_mutation_rate: 0.8,
            kernel_sigma: 0.05,
            pooler_swap_prob: 0.01,
            activation_swap_prob: 0.01,
            crossover_disable_prob: DEFAULT_DISABLE_PROB,
            elitism_count: 1,
            elitism_min_species_size: 5,
            stagnation_limit: 15,
            interspecies_mating_prob: 0.001,
            survival_fraction: 0.2,
            output_activation: ActivationKind::SigmoidSteepened,
            hidden_activation: ActivationKind::Tanh,
            conv_seed: None,
            randomize_initial_kernels: true,
            archive_member_cap: 50_000,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.population_size < 2 {
            return Err(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            ));
        }
        if !(self.survival_fraction > 0.0 && self.survival_fraction <= 1.0) {
            return Err(format!(
                "survival_fraction must be in (0, 1], got {}",
                self.survival_fraction
            ));
        }
        let probabilities = [
            ("weight_mutation_rate", self.weight_mutation_rate),
            ("weight_perturb_prob", self.weight_perturb_prob),
            ("weight_reset_prob", self.weight_reset_prob),
            ("add_connection_rate", self.add_connection_rate),
            ("add_node_rate", self.add_node_rate),
            ("conv_mutation_rate", self.conv_mutation_rate),
            ("pooler_swap_prob", self.pooler_swap_prob),
            ("activation_swap_prob", self.activation_swap_prob),
            ("crossover_disable_prob", self.crossover_disable_prob),
            ("interspecies_mating_prob", self.interspecies_mating_prob),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be a probability in [0, 1], got {p}"));
            }
        }
        for (name, sigma) in [
            ("weight_perturb_sigma", self.weight_perturb_sigma),
            ("kernel_sigma", self.kernel_sigma),
        ] {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(format!("{name} must be finite and >= 0, got {sigma}"));
            }
        }
        if let Some(target) = self.fitness_target {
            if !target.is_finite() {
                return Err(format!("fitness_target must be finite, got {target}"));
            }
        }
        self.compatibility
            .validate()
            .map_err(|e| format!("compatibility.{e}"))
    }

    /// Whether the history keeps every member genome.
    pub fn archive_includes_members(&self) -> bool {
        self.population_size
            .saturating_mul(self.max_generations.saturating_add(1))
            <= self.archive_member_cap
    }
}
