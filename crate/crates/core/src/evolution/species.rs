//! Speciation, explicit fitness sharing and offspring allocation.

use std::cmp::Ordering;

use crate::genome::{compatibility_distance, CompatibilityCoefficients, Genome};

#[derive(Clone, Debug)]
pub struct Species {
    pub id: u32,
    /// Genome new members are compared against, drawn from the previous generation.
    pub representative: Genome,
    /// Indices into the current population.
    pub members: Vec<usize>,
    pub best_fitness_ever: f64,
    /// Generations since `best_fitness_ever` last improved.
    pub stagnation: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("genome {index} has no fitness yet")]
pub struct UnevaluatedGenome {
    pub index: usize,
}

/// Partition `population` into species.
///
/// Each genome joins the first previous species (ascending id) whose
/// representative is closer than the threshold, else the first species
/// founded earlier in this pass, else founds a new one with itself as
/// representative. Species left empty are dropped. New ids come from
/// `next_id`.
pub fn speciate(
    population: &[Genome],
    previous: &[Species],
    coeffs: &CompatibilityCoefficients,
    next_id: &mut u32,
) -> Vec<Species> {
    let mut carried: Vec<Species> = previous
        .iter()
        .map(|s| Species {
            members: Vec::new(),
            ..s.clone()
        })
        .collect();
    carried.sort_by_key(|s| s.id);
    let mut founded: Vec<Species> = Vec::new();

    for (index, genome) in population.iter().enumerate() {
        let close = |s: &&mut Species| {
            compatibility_distance(&s.representative, genome, coeffs) < coeffs.threshold
        };
        if let Some(species) = carried.iter_mut().find(close) {
            species.members.push(index);
        } else if let Some(species) = founded.iter_mut().find(close) {
            species.members.push(index);
        } else {
            founded.push(Species {
                id: *next_id,
                representative: genome.clone(),
                members: vec![index],
                best_fitness_ever: f64::NEG_INFINITY,
                stagnation: 0,
            });
            *next_id += 1;
        }
    }
    carried.retain(|s| !s.members.is_empty());
    carried.extend(founded);
    carried
}

/// Refresh `best_fitness_ever` and stagnation counters from the current members.
pub fn update_stagnation(species: &mut [Species], population: &[Genome]) {
    for s in species {
        let best = s
            .members
            .iter()
            .filter_map(|&i| population[i].fitness())
            .fold(f64::NEG_INFINITY, f64::max);
        if best > s.best_fitness_ever {
            s.best_fitness_ever = best;
            s.stagnation = 0;
        } else {
            s.stagnation += 1;
        }
    }
}

/// Explicit fitness sharing: every member's adjusted fitness is its raw
/// fitness divided by its species' size.
pub fn share_fitness(
    species: &[Species],
    population: &mut [Genome],
) -> Result<(), UnevaluatedGenome> {
    for s in species {
        let size = s.members.len() as f64;
        for &index in &s.members {
            let raw = population[index]
                .fitness()
                .ok_or(UnevaluatedGenome { index })?;
            population[index].set_adjusted_fitness(raw / size);
        }
    }
    Ok(())
}

/// Index of the highest raw fitness; the lowest index wins ties.
pub fn champion_index(population: &[Genome]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in population.iter().enumerate() {
        let f = g.fitness().unwrap_or(f64::NEG_INFINITY);
        if best.is_none_or(|(_, b)| f > b) {
            best = Some((i, f));
        }
    }
    best.map(|(i, _)| i)
}

/// Sum of the members' adjusted fitness, which is the species' mean raw fitness.
fn species_fitness(species: &Species, population: &[Genome]) -> f64 {
    species
        .members
        .iter()
        .map(|&i| population[i].adjusted_fitness().unwrap_or(0.0))
        .sum()
}

/// Offspring count per species, aligned with `species`.
///
/// Counts are proportional to each species' summed adjusted fitness (its mean
/// raw fitness), rounded, then repaired to sum to `population_size` by adding
/// to or taking from the best species first. Species stagnant for
/// `stagnation_limit` generations get nothing unless they hold the population
/// champion. If every species is stagnant only the champion's species
/// survives, with its counter reset.
pub fn allocate_offspring(
    species: &mut [Species],
    population: &[Genome],
    population_size: usize,
    stagnation_limit: usize,
) -> Vec<usize> {
    let mut counts = vec![0; species.len()];
    if species.is_empty() {
        return counts;
    }
    let champion_species = champion_index(population)
        .and_then(|c| species.iter().position(|s| s.members.contains(&c)))
        .unwrap_or(0);

    let stagnant = |s: &Species| s.stagnation >= stagnation_limit;
    if species.iter().all(stagnant) {
        species[champion_species].stagnation = 0;
        counts[champion_species] = population_size;
        return counts;
    }
    let eligible: Vec<usize> = (0..species.len())
        .filter(|&i| i == champion_species || !stagnant(&species[i]))
        .collect();
    let means: Vec<f64> = species
        .iter()
        .map(|s| species_fitness(s, population))
        .collect();
    let total: f64 = eligible.iter().map(|&i| means[i]).sum();
    for &i in &eligible {
        let share = if total > 0.0 {
            means[i] / total
        } else {
            1.0 / eligible.len() as f64
        };
        counts[i] = (population_size as f64 * share).round() as usize;
    }

    let mut by_mean = eligible;
    by_mean.sort_by(|&a, &b| {
        means[b]
            .partial_cmp(&means[a])
            .unwrap_or(Ordering::Equal)
            .then(species[a].id.cmp(&species[b].id))
    });
    let assigned: usize = counts.iter().sum();
    if assigned < population_size {
        counts[by_mean[0]] += population_size - assigned;
    } else {
        let mut excess = assigned - population_size;
        for &i in &by_mean {
            let take = excess.min(counts[i]);
            counts[i] -= take;
            excess -= take;
            if excess == 0 {
                break;
            }
        }
    }
    counts
}
