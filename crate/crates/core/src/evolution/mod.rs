//! The generational loop.
//!
//! Each generation: evaluate every genome (in parallel), speciate against the
//! previous generation's representatives, record a [`GenerationReport`], then
//! share fitness, allocate offspring and reproduce. All randomness comes from
//! one ChaCha stream seeded by [`EvolutionConfig::seed`] and is only consumed
//! by the serial phases, so a run is reproducible whatever the thread count.

mod config;
mod species;

pub use config::EvolutionConfig;
pub use species::{
    allocate_offspring, champion_index, share_fitness, speciate, update_stagnation, Species,
    UnevaluatedGenome,
};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::genome::{
    crossover, mutate_add_connection, mutate_add_node, mutate_conv, mutate_weights,
    new_minimal_genome, Genome, GenomeError, InnovationRegistry,
};
use crate::persistence::{HistoryArchive, TaskInfo};
use crate::phenotype::Phenotype;
use crate::tasks::FitnessTask;

#[derive(Debug, thiserror::Error)]
pub enum EvolutionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot build initial genomes: {0}")]
    Genome(#[from] GenomeError),
    #[error("generation {generation}, genome {index}: {message}")]
    Evaluation {
        generation: usize,
        index: usize,
        message: String,
    },
    #[error(transparent)]
    Unevaluated(#[from] UnevaluatedGenome),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitnessStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl FitnessStats {
    fn of(population: &[Genome]) -> Self {
        let values: Vec<f64> = population.iter().filter_map(Genome::fitness).collect();
        let n = values.len().max(1) as f64;
        FitnessStats {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean: values.iter().sum::<f64>() / n,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSnapshot {
    pub id: u32,
    pub size: usize,
    pub best_fitness: f64,
    pub best_fitness_ever: f64,
    pub stagnation: usize,
    pub representative: Genome,
    pub champion: Genome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<Genome>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationReport {
    pub generation: usize,
    pub species: Vec<SpeciesSnapshot>,
    /// Best genome of this generation.
    pub champion: Genome,
    pub fitness: FitnessStats,
    /// Best fitness seen in this or any earlier generation.
    pub best_fitness_ever: f64,
}

impl GenerationReport {
    /// `key=value` progress line.
    pub fn progress_line(&self) -> String {
        format!(
            "generation={} species={} best={} mean={} best_ever={}",
            self.generation,
            self.species.len(),
            self.fitness.max,
            self.fitness.mean,
            self.best_fitness_ever
        )
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionOutcome {
    /// Best genome across the whole run.
    pub champion: Genome,
    pub history: HistoryArchive,
    pub reached_target: bool,
}

/// Evolve against `task` until its fitness target is reached or the
/// generation budget runs out.
pub fn evolve<T: FitnessTask + ?Sized>(
    task: &T,
    config: &EvolutionConfig,
) -> Result<EvolutionOutcome, EvolutionError> {
    evolve_with(task, config, |_| {})
}

/// [`evolve`], calling `on_generation` after every recorded generation.
pub fn evolve_with<T, F>(
    task: &T,
    config: &EvolutionConfig,
    mut on_generation: F,
) -> Result<EvolutionOutcome, EvolutionError>
where
    T: FitnessTask + ?Sized,
    F: FnMut(&GenerationReport),
{
    config.validate().map_err(EvolutionError::Config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut registry = InnovationRegistry::new();
    let conv_seed = config.conv_seed.clone().unwrap_or_else(|| task.conv_seed());
    let target = config.fitness_target.or(task.fitness_target());
    let include_members = config.archive_includes_members();

    let mut population = (0..config.population_size)
        .map(|_| {
            let mut genome = new_minimal_genome(
                task.input_shape(),
                task.output_count(),
                &conv_seed,
                config.output_activation,
                &mut registry,
                &mut rng,
            )?;
            if config.randomize_initial_kernels {
                for stage in &mut genome.conv_stages {
                    for v in stage.kernel.values_mut() {
                        *v = rng.random_range(-1.0..=1.0);
                    }
                }
            }
            Ok(genome)
        })
        .collect::<Result<Vec<_>, GenomeError>>()?;

    let shape = task.input_shape();
    let mut history = HistoryArchive::new(
        TaskInfo {
            name: task.name().to_string(),
            input_width: shape.width,
            input_height: shape.height,
            output_count: task.output_count(),
        },
        config.clone(),
        include_members,
    );
    let mut species: Vec<Species> = Vec::new();
    let mut next_species_id = 1;
    let mut champion: Option<Genome> = None;
    let mut reached_target = false;

    for generation in 0.. {
        evaluate_population(task, &mut population, generation)?;

        species = speciate(
            &population,
            &species,
            &config.compatibility,
            &mut next_species_id,
        );
        update_stagnation(&mut species, &population);

        let best = champion_index(&population).expect("population is non-empty");
        let best_fitness = population[best].fitness().unwrap_or(0.0);
        if champion
            .as_ref()
            .is_none_or(|c| best_fitness > c.fitness().unwrap_or(f64::NEG_INFINITY))
        {
            champion = Some(population[best].clone());
        }
        let champion_ref = champion.as_ref().expect("set above");
        let report = build_report(
            generation,
            &population,
            &species,
            best,
            champion_ref.fitness().unwrap_or(0.0),
            include_members,
        );
        on_generation(&report);
        history.generations.push(report);

        if target.is_some_and(|t| best_fitness >= t) {
            reached_target = true;
            break;
        }
        if generation >= config.max_generations {
            break;
        }

        share_fitness(&species, &mut population)?;
        let allocation = allocate_offspring(
            &mut species,
            &population,
            config.population_size,
            config.stagnation_limit,
        );
        population = reproduce(
            &mut species,
            &population,
            &allocation,
            &mut registry,
            config,
            &mut rng,
        );
    }

    Ok(EvolutionOutcome {
        champion: champion.expect("at least one generation ran"),
        history,
        reached_target,
    })
}

fn evaluate_population<T: FitnessTask + ?Sized>(
    task: &T,
    population: &mut [Genome],
    generation: usize,
) -> Result<(), EvolutionError> {
    let scores: Vec<Result<f64, String>> = population
        .par_iter()
        .map(|genome| {
            let phenotype = Phenotype::compile(genome).map_err(|e| e.to_string())?;
            let fitness = task.evaluate(&phenotype).map_err(|e| e.to_string())?;
            if fitness.is_finite() && fitness >= 0.0 {
                Ok(fitness)
            } else {
                Err(format!(
                    "fitness {fitness} is not a finite non-negative number"
                ))
            }
        })
        .collect();
    for (index, (genome, score)) in population.iter_mut().zip(scores).enumerate() {
        let fitness = score.map_err(|message| EvolutionError::Evaluation {
            generation,
            index,
            message,
        })?;
        genome.set_fitness(fitness);
    }
    Ok(())
}

fn build_report(
    generation: usize,
    population: &[Genome],
    species: &[Species],
    best: usize,
    best_fitness_ever: f64,
    include_members: bool,
) -> GenerationReport {
    let snapshots = species
        .iter()
        .map(|s| {
            let top = s
                .members
                .iter()
                .copied()
                .reduce(|a, b| {
                    let (fa, fb) = (population[a].fitness(), population[b].fitness());
                    if fb > fa {
                        b
                    } else {
                        a
                    }
                })
                .expect("species are non-empty");
            SpeciesSnapshot {
                id: s.id,
                size: s.members.len(),
                best_fitness: population[top].fitness().unwrap_or(0.0),
                best_fitness_ever: s.best_fitness_ever,
                stagnation: s.stagnation,
                representative: s.representative.clone(),
                champion: population[top].clone(),
                members: include_members
                    .then(|| s.members.iter().map(|&i| population[i].clone()).collect()),
            }
        })
        .collect();
    GenerationReport {
        generation,
        species: snapshots,
        champion: population[best].clone(),
        fitness: FitnessStats::of(population),
        best_fitness_ever,
    }
}

fn by_fitness_desc(population: &[Genome], members: &[usize]) -> Vec<usize> {
    let mut ranked = members.to_vec();
    ranked.sort_by(|&a, &b| {
        let (fa, fb) = (population[a].fitness(), population[b].fitness());
        fb.partial_cmp(&fa)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    ranked
}

/// Build the next generation.
///
/// Per species: the top `elitism_count` members are copied unchanged (only in
/// species of at least `elitism_min_species_size`, but the population champion
/// is always kept when its species gets a slot). The rest are crossover
/// children of parents drawn from the top `survival_fraction`, with the second
/// parent occasionally taken from another species, then mutated.
///
/// Species that receive no offspring are dropped from `species`; survivors get
/// a fresh representative drawn uniformly from their current members.
pub fn reproduce<R: Rng + ?Sized>(
    species: &mut Vec<Species>,
    population: &[Genome],
    allocation: &[usize],
    registry: &mut InnovationRegistry,
    config: &EvolutionConfig,
    rng: &mut R,
) -> Vec<Genome> {
    let champion = champion_index(population);
    let pools: Vec<Vec<usize>> = species
        .iter()
        .map(|s| {
            let ranked = by_fitness_desc(population, &s.members);
            let keep = ((ranked.len() as f64 * config.survival_fraction).ceil() as usize)
                .clamp(1, ranked.len());
            ranked[..keep].to_vec()
        })
        .collect();

    let mut next = Vec::with_capacity(config.population_size);
    for (si, s) in species.iter().enumerate() {
        let slots = allocation.get(si).copied().unwrap_or(0);
        if slots == 0 {
            continue;
        }
        let ranked = by_fitness_desc(population, &s.members);
        let mut elites = if s.members.len() >= config.elitism_min_species_size {
            config.elitism_count.min(ranked.len())
        } else {
            0
        };
        let holds_champion = champion.is_some_and(|c| s.members.contains(&c));
        if holds_champion && config.elitism_count >= 1 {
            elites = elites.max(1);
        }
        let elites = elites.min(slots);
        for &i in &ranked[..elites] {
            let mut elite = population[i].clone();
            elite.clear_fitness();
            next.push(elite);
        }

        for _ in elites..slots {
            let first = *pools[si].choose(rng).expect("pool is non-empty");
            let second = if species.len() > 1 && rng.random_bool(config.interspecies_mating_prob) {
                let mut other = rng.random_range(0..species.len() - 1);
                if other >= si {
                    other += 1;
                }
                *pools[other].choose(rng).expect("pool is non-empty")
            } else {
                *pools[si].choose(rng).expect("pool is non-empty")
            };
            let (a, b) = (&population[first], &population[second]);
            let (fitter, other) = order_parents(a, b, rng);
            let child = crossover(fitter, other, config.crossover_disable_prob, rng);
            next.push(mutate(child, registry, config, rng));
        }
    }

    let mut kept = Vec::with_capacity(species.len());
    for (si, mut s) in std::mem::take(species).into_iter().enumerate() {
        if allocation.get(si).copied().unwrap_or(0) == 0 {
            continue;
        }
        let pick = *s.members.choose(rng).expect("species are non-empty");
        s.representative = population[pick].clone();
        kept.push(s);
    }
    *species = kept;
    next
}

/// Higher raw fitness wins. On a tie the smaller genome counts as fitter,
/// and equal sizes are settled by a coin flip.
fn order_parents<'a, R: Rng + ?Sized>(
    a: &'a Genome,
    b: &'a Genome,
    rng: &mut R,
) -> (&'a Genome, &'a Genome) {
    match a.fitness().partial_cmp(&b.fitness()) {
        Some(Ordering::Greater) => (a, b),
        Some(Ordering::Less) => (b, a),
        _ => match a.gene_count().cmp(&b.gene_count()) {
            Ordering::Less => (a, b),
            Ordering::Greater => (b, a),
            Ordering::Equal if rng.random_bool(0.5) => (b, a),
            Ordering::Equal => (a, b),
        },
    }
}

fn mutate<R: Rng + ?Sized>(
    mut genome: Genome,
    registry: &mut InnovationRegistry,
    config: &EvolutionConfig,
    rng: &mut R,
) -> Genome {
    if rng.random_bool(config.weight_mutation_rate) {
        genome = mutate_weights(
            &genome,
            config.weight_perturb_prob,
            config.weight_perturb_sigma,
            config.weight_reset_prob,
            rng,
        );
    }
    if rng.random_bool(config.add_connection_rate) {
        genome = mutate_add_connection(&genome, registry, rng);
    }
    if rng.random_bool(config.add_node_rate) {
        genome = mutate_add_node(&genome, registry, config.hidden_activation, rng);
    }
    if !genome.conv_stages().is_empty() && rng.random_bool(config.conv_mutation_rate) {
        genome = mutate_conv(
            &genome,
            config.kernel_sigma,
            config.pooler_swap_prob,
            config.activation_swap_prob,
            rng,
        );
    }
    genome
}
