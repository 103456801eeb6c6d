//! Executable networks compiled from genomes.
//!
//! A forward pass runs each conv stage (convolve, pool, activate), flattens the
//! final map row-major into the input nodes, pins the bias node to 1, and then
//! evaluates hidden and output nodes in topological order.

mod ops;

pub use ops::{
    activate, activate_map, convolve, pool, FeatureMap, ImageError, ImageMatrix, PoolKind,
};

use std::collections::{BTreeSet, HashMap};

use crate::activation::ActivationKind;
use crate::genome::{
    pipeline_output_shape, ConvStageGene, Genome, NodeId, NodeKind, Pooler, Shape, ShapeError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhenotypeError {
    #[error("conv pipeline: {0}")]
    Shape(#[from] ShapeError),
    #[error("conv pipeline yields {flattened} values but the genome has {inputs} input nodes")]
    InputCount { flattened: usize, inputs: usize },
    #[error("enabled connections form a cycle")]
    Cycle,
    #[error("expected {expected} input values, got {actual}")]
    InputLength { expected: usize, actual: usize },
}

#[derive(Clone, Debug)]
struct NodeEval {
    slot: usize,
    activation: ActivationKind,
    incoming: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct Phenotype {
    input_shape: Shape,
    stages: Vec<ConvStageGene>,
    input_slots: Vec<usize>,
    bias_slot: usize,
    slot_count: usize,
    eval_order: Vec<NodeId>,
    evals: Vec<NodeEval>,
    output_ids: Vec<NodeId>,
    output_slots: Vec<usize>,
}

impl Phenotype {
    /// Compile `genome`. Disabled connections are dropped.
    pub fn compile(genome: &Genome) -> Result<Self, PhenotypeError> {
        let input_shape = genome.input_shape();
        let flattened = pipeline_output_shape(genome.conv_stages(), input_shape)?.len();
        let inputs = genome.input_count();
        if flattened != inputs {
            return Err(PhenotypeError::InputCount { flattened, inputs });
        }

        let nodes = genome.nodes();
        let slot_of: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let slots_of = |kind: NodeKind| -> Vec<usize> {
            nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| n.kind == kind)
                .map(|(i, _)| i)
                .collect()
        };
        let input_slots = slots_of(NodeKind::Input);
        let bias_slot = *slots_of(NodeKind::Bias)
            .first()
            .ok_or(PhenotypeError::InputCount { flattened, inputs })?;
        let output_slots = slots_of(NodeKind::Output);
        let output_ids = output_slots.iter().map(|&s| nodes[s].id).collect();

        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        let mut indegree = vec![0usize; nodes.len()];
        for c in genome.connections().iter().filter(|c| c.enabled) {
            let (from, to) = (slot_of[&c.from], slot_of[&c.to]);
            incoming[to].push((from, c.weight));
            outgoing[from].push(to);
            indegree[to] += 1;
        }

        // Kahn's algorithm; the lowest slot (= lowest node id) goes first.
        let mut ready: BTreeSet<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
        let mut evals = Vec::new();
        let mut visited = 0;
        while let Some(slot) = ready.pop_first() {
            visited += 1;
            if !nodes[slot].kind.is_source() {
                evals.push(NodeEval {
                    slot,
                    activation: nodes[slot].activation,
                    incoming: std::mem::take(&mut incoming[slot]),
                });
            }
            for &next in &outgoing[slot] {
                indegree[next] -= 1;
                if indegree[next] == 0 {
                    ready.insert(next);
                }
            }
        }
        if visited != nodes.len() {
            return Err(PhenotypeError::Cycle);
        }

        Ok(Phenotype {
            input_shape,
            stages: genome.conv_stages().to_vec(),
            input_slots,
            bias_slot,
            slot_count: nodes.len(),
            eval_order: evals.iter().map(|e| nodes[e.slot].id).collect(),
            evals,
            output_ids,
            output_slots,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn input_count(&self) -> usize {
        self.input_slots.len()
    }

    /// Hidden and output node ids in evaluation order.
    pub fn eval_order(&self) -> &[NodeId] {
        &self.eval_order
    }

    pub fn output_ids(&self) -> &[NodeId] {
        &self.output_ids
    }

    /// Run the conv pipeline only.
    pub fn features(&self, image: &ImageMatrix) -> Result<FeatureMap, ShapeError> {
        if image.shape() != self.input_shape {
            return Err(ShapeError::Mismatch {
                expected: self.input_shape,
                actual: image.shape(),
            });
        }
        let mut map = image.as_map().clone();
        for stage in &self.stages {
            map = convolve(&map, &stage.kernel, stage.stride)?;
            map = match stage.pooler {
                Pooler::Max => pool(&map, PoolKind::Max, stage.pool_window)?,
                Pooler::Average => pool(&map, PoolKind::Average, stage.pool_window)?,
                Pooler::None => map,
            };
            map = activate_map(map, stage.activation);
        }
        Ok(map)
    }

    /// Full forward pass, one value per output node.
    pub fn forward(&self, image: &ImageMatrix) -> Result<Vec<f64>, ShapeError> {
        let features = self.features(image)?;
        Ok(self.evaluate_network(features.data()))
    }

    /// Forward pass that feeds `inputs` straight into the input nodes,
    /// bypassing the conv pipeline.
    pub fn forward_inputs(&self, inputs: &[f64]) -> Result<Vec<f64>, PhenotypeError> {
        if inputs.len() != self.input_slots.len() {
            return Err(PhenotypeError::InputLength {
                expected: self.input_slots.len(),
                actual: inputs.len(),
            });
        }
        Ok(self.evaluate_network(inputs))
    }

    fn evaluate_network(&self, inputs: &[f64]) -> Vec<f64> {
        let mut values = vec![0.0; self.slot_count];
        for (&slot, &v) in self.input_slots.iter().zip(inputs) {
            values[slot] = v;
        }
        values[self.bias_slot] = 1.0;
        for node in &self.evals {
            let sum: f64 = node.incoming.iter().map(|&(src, w)| values[src] * w).sum();
            values[node.slot] = node.activation.apply(sum);
        }
        self.output_slots.iter().map(|&s| values[s]).collect()
    }
}
