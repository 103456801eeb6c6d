//! Crossover aligned by historical markings.

use super::Genome;
use rand::Rng;

/// Chance an inherited gene stays disabled when either parent disabled it.
pub const DEFAULT_DISABLE_PROB: f64 = 0.75;

/// Recombine two parents.
///
/// Matching genes take their weight from either parent with equal chance.
/// Disjoint and excess genes come from `fitter` only, so the child has
/// exactly `fitter`'s innovations and nodes. Conv stages with the same index and kernel shape
/// take the kernel of either parent, everything else about the stage comes
/// from `fitter`.
pub fn crossover<R: Rng + ?Sized>(
    fitter: &Genome,
    other: &Genome,
    disable_prob: f64,
    rng: &mut R,
) -> Genome {
    let disable_prob = disable_prob.clamp(0.0, 1.0);

    let mut child = fitter.clone();
    child.clear_fitness();

    for gene in &mut child.connections {
        let partner = other.connection_by_innovation(gene.innovation);
        if let Some(partner) = partner {
            if rng.random_bool(0.5) {
                gene.weight = partner.weight;
            }
        }
        let disabled_somewhere = !gene.enabled || partner.is_some_and(|p| !p.enabled);
        if disabled_somewhere {
            gene.enabled = !rng.random_bool(disable_prob);
        }
    }

    for stage in &mut child.conv_stages {
        let Some(partner) = other.conv_stages.get(stage.stage_index) else {
            continue;
        };
        let same_shape = partner.stage_index == stage.stage_index
            && partner.kernel.rows() == stage.kernel.rows()
            && partner.kernel.cols() == stage.kernel.cols();
        if same_shape && rng.random_bool(0.5) {
            stage.kernel = partner.kernel.clone();
        }
    }

    child.canonicalize();
    child
}
