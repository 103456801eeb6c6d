//! Structural and parametric mutation operators.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{
    pipeline_output_shape, random_weight, ConnectionGene, Genome, InnovationRegistry, NodeGene,
    NodeKind, Pooler,
};
use crate::activation::ActivationKind;

/// Connection weights and kernel elements live in `[-WEIGHT_LIMIT, WEIGHT_LIMIT]`.
pub const WEIGHT_LIMIT: f64 = 8.0;

pub fn clamp_weight(w: f64) -> f64 {
    w.clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT)
}

fn gaussian(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma.max(0.0)).expect("finite non-negative sigma")
}

/// Add one enabled connection between two unconnected nodes, chosen uniformly
/// among all pairs that keep the gene graph acyclic. A saturated genome comes
/// back unchanged.
pub fn mutate_add_connection<R: Rng + ?Sized>(
    g: &Genome,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> Genome {
    let existing: std::collections::HashSet<_> =
        g.connections.iter().map(|c| (c.from, c.to)).collect();
    let mut candidates = Vec::new();
    for target in g.nodes.iter().filter(|n| !n.kind.is_source()) {
        // `from -> target` closes a cycle exactly when `from` is downstream of `target`.
        let downstream = g.descendants(target.id);
        for source in &g.nodes {
            if !downstream.contains(&source.id) && !existing.contains(&(source.id, target.id)) {
                candidates.push((source.id, target.id));
            }
        }
    }
    let Some(&(from, to)) = candidates.choose(rng) else {
        return g.clone();
    };
    let mut child = g.clone();
    child.connections.push(ConnectionGene {
        innovation: registry.connection_innovation(from, to),
        from,
        to,
        weight: random_weight(rng),
        enabled: true,
    });
    child.canonicalize();
    child.clear_fitness();
    child
}

/// Split a uniformly chosen enabled connection `a -> b` (weight `w`) into
/// `a -> n` (weight 1) and `n -> b` (weight `w`), disabling the original.
pub fn mutate_add_node<R: Rng + ?Sized>(
    g: &Genome,
    registry: &mut InnovationRegistry,
    hidden_activation: ActivationKind,
    rng: &mut R,
) -> Genome {
    let enabled: Vec<usize> = g
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| c.enabled)
        .map(|(i, _)| i)
        .collect();
    let Some(&index) = enabled.choose(rng) else {
        return g.clone();
    };
    let mut child = g.clone();
    let split = child.connections[index].clone();
    let record = registry.split(&split, |id| g.has_node(id));
    child.connections[index].enabled = false;
    child.nodes.push(NodeGene {
        id: record.node,
        kind: NodeKind::Hidden,
        activation: hidden_activation,
    });
    child.connections.push(ConnectionGene {
        innovation: record.in_innovation,
        from: split.from,
        to: record.node,
        weight: 1.0,
        enabled: true,
    });
    child.connections.push(ConnectionGene {
        innovation: record.out_innovation,
        from: record.node,
        to: split.to,
        weight: split.weight,
        enabled: true,
    });
    child.canonicalize();
    child.clear_fitness();
    child
}

/// Per-weight mutation: reset to uniform `[-1, 1]` with `reset_prob`, else
/// add `N(0, sigma)` noise with `perturb_prob`, else keep. Results are clamped.
pub fn mutate_weights<R: Rng + ?Sized>(
    g: &Genome,
    perturb_prob: f64,
    perturb_sigma: f64,
    reset_prob: f64,
    rng: &mut R,
) -> Genome {
    let noise = gaussian(perturb_sigma);
    let mut child = g.clone();
    for c in &mut child.connections {
        let roll: f64 = rng.random();
        if roll < reset_prob {
            c.weight = random_weight(rng);
        } else if roll < reset_prob + perturb_prob {
            c.weight = clamp_weight(c.weight + noise.sample(rng));
        }
    }
    child.clear_fitness();
    child
}

/// Parametric conv mutation: jitter every kernel element, and occasionally
/// resample the pooler or activation of one stage. A pooler swap that changes
/// the flattened pipeline size (or is otherwise inapplicable) is rolled back.
pub fn mutate_conv<R: Rng + ?Sized>(
    g: &Genome,
    kernel_sigma: f64,
    swap_pooler_prob: f64,
    swap_activation_prob: f64,
    rng: &mut R,
) -> Genome {
    if g.conv_stages.is_empty() {
        return g.clone();
    }
    let noise = gaussian(kernel_sigma);
    let mut child = g.clone();
    if kernel_sigma > 0.0 {
        for stage in &mut child.conv_stages {
            for v in stage.kernel.values_mut() {
                *v = clamp_weight(*v + noise.sample(rng));
            }
        }
    }
    if rng.random_bool(swap_pooler_prob.clamp(0.0, 1.0)) {
        let stage = rng.random_range(0..child.conv_stages.len());
        let previous = child.conv_stages[stage].pooler;
        child.conv_stages[stage].pooler = *Pooler::ALL.choose(rng).expect("non-empty");
        let inputs = child.input_count();
        let fits = pipeline_output_shape(&child.conv_stages, child.input_shape)
            .is_ok_and(|shape| shape.len() == inputs);
        if !fits {
            child.conv_stages[stage].pooler = previous;
        }
    }
    if rng.random_bool(swap_activation_prob.clamp(0.0, 1.0)) {
        let stage = rng.random_range(0..child.conv_stages.len());
        child.conv_stages[stage].activation = ActivationKind::random(rng);
    }
    child.clear_fitness();
    child
}
