//! Compatibility distance used for speciation.

use serde::{Deserialize, Serialize};

use super::Genome;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompatibilityCoefficients {
    /// Weight on excess genes.
    pub excess_coeff: f64,
    /// Weight on disjoint genes.
    pub disjoint_coeff: f64,
    /// Weight on the mean absolute weight difference of matching genes.
    pub weight_coeff: f64,
    /// When both genomes have fewer genes than this, the size normalizer is 1.
    pub n_floor: usize,
    /// Genomes closer than this belong to the same species.
    pub threshold: f64,
}

impl Default for CompatibilityCoefficients {
    fn default() -> Self {
        CompatibilityCoefficients {
            excess_coeff: 1.0,
            disjoint_coeff: 1.0,
            weight_coeff: 0.4,
            n_floor: 20,
            threshold: 3.0,
        }
    }
}

impl CompatibilityCoefficients {
    pub fn validate(&self) -> Result<(), String> {
        let coeffs = [
            ("excess_coeff", self.excess_coeff),
            ("disjoint_coeff", self.disjoint_coeff),
            ("weight_coeff", self.weight_coeff),
        ];
        for (name, value) in coeffs {
            if !(value.is_finite() && value >= 0.0) {
                return Err(format!("{name} must be finite and >= 0, got {value}"));
            }
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(format!("threshold must be > 0, got {}", self.threshold));
        }
        Ok(())
    }
}

/// `excess·E/N + disjoint·D/N + weight·W̄`.
///
/// Connection genes are aligned by innovation. Conv stages are aligned by
/// stage index: matched stages add their mean absolute kernel difference to
/// the weight average as one gene each, unmatched stages count as disjoint.
pub fn compatibility_distance(a: &Genome, b: &Genome, coeffs: &CompatibilityCoefficients) -> f64 {
    let (mut excess, mut disjoint) = (0usize, 0usize);
    let mut weight_diff = 0.0;
    let mut matched = 0usize;

    let max_a = a.connections.last().map(|c| c.innovation);
    let max_b = b.connections.last().map(|c| c.innovation);
    let (mut i, mut j) = (0, 0);
    let (ca, cb) = (&a.connections, &b.connections);
    while i < ca.len() || j < cb.len() {
        match (ca.get(i), cb.get(j)) {
            (Some(x), Some(y)) if x.innovation == y.innovation => {
                weight_diff += (x.weight - y.weight).abs();
                matched += 1;
                i += 1;
                j += 1;
            }
            (Some(x), y) if y.is_none_or(|y| x.innovation < y.innovation) => {
                if max_b.is_none_or(|m| x.innovation > m) {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                i += 1;
            }
            (_, Some(y)) => {
                if max_a.is_none_or(|m| y.innovation > m) {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                j += 1;
            }
            (_, None) => unreachable!("covered by the arms above"),
        }
    }

    for index in 0..a.conv_stages.len().max(b.conv_stages.len()) {
        match (a.conv_stages.get(index), b.conv_stages.get(index)) {
            (Some(x), Some(y)) if x.kernel.values().len() == y.kernel.values().len() => {
                let n = x.kernel.values().len() as f64;
                let diff: f64 = x
                    .kernel
                    .values()
                    .iter()
                    .zip(y.kernel.values())
                    .map(|(p, q)| (p - q).abs())
                    .sum();
                weight_diff += diff / n;
                matched += 1;
            }
            (Some(_), Some(_)) => disjoint += 2,
            _ => disjoint += 1,
        }
    }

    let (na, nb) = (a.gene_count(), b.gene_count());
    let normalizer = if na < coeffs.n_floor && nb < coeffs.n_floor {
        1.0
    } else {
        na.max(nb).max(1) as f64
    };
    let mean_weight_diff = if matched == 0 {
        0.0
    } else {
        weight_diff / matched as f64
    };
    coeffs.excess_coeff * excess as f64 / normalizer
        + coeffs.disjoint_coeff * disjoint as f64 / normalizer
        + coeffs.weight_coeff * mean_weight_diff
}
