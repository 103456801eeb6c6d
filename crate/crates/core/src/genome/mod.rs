//! The evolvable blueprint: an ordered list of convolutional stage genes in
//! front of a NEAT node/connection graph.
//!
//! Genomes are values. Every operator takes `&Genome` and returns a new one,
//! and every constructor hands back the canonical form (nodes sorted by id,
//! connections sorted by innovation, stages sorted by index).

mod conv;
mod crossover;
mod distance;
mod innovation;
mod mutation;

pub use conv::{
    conv_output_shape, pipeline_output_shape, pool_output_shape, ConvStageGene, Kernel, Pooler,
    Shape, ShapeError, KERNEL_SIDES,
};
pub use crossover::{crossover, DEFAULT_DISABLE_PROB};
pub use distance::{compatibility_distance, CompatibilityCoefficients};
pub use innovation::{InnovationRegistry, SplitRecord};
pub use mutation::{
    clamp_weight, mutate_add_connection, mutate_add_node, mutate_conv, mutate_weights, WEIGHT_LIMIT,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::activation::ActivationKind;

pub type NodeId = u32;
pub type Innovation = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Input,
    Bias,
    Hidden,
    Output,
}

impl NodeKind {
    /// Input and bias nodes only ever emit values.
    pub fn is_source(self) -> bool {
        matches!(self, NodeKind::Input | NodeKind::Bias)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeGene {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Only meaningful for hidden and output nodes.
    pub activation: ActivationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionGene {
    pub innovation: Innovation,
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenomeError {
    #[error("conv pipeline is not applicable to a {input} input: {source}")]
    Pipeline {
        input: Shape,
        #[source]
        source: ShapeError,
    },
    #[error("conv pipeline yields {flattened} values but the genome has {inputs} input nodes")]
    InputCount { flattened: usize, inputs: usize },
    #[error("stage indices must be 0..{count}, found {found} at position {position}")]
    StageIndex {
        count: usize,
        position: usize,
        found: usize,
    },
    #[error("stage {stage} kernel is {rows}x{cols}; sides must be one of 1, 3, 5")]
    KernelSide {
        stage: usize,
        rows: usize,
        cols: usize,
    },
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("genome needs exactly one bias node, found {0}")]
    BiasCount(usize),
    #[error("genome needs at least one {0:?} node")]
    MissingKind(NodeKind),
    #[error("duplicate innovation {0}")]
    DuplicateInnovation(Innovation),
    #[error("duplicate connection {from} -> {to}")]
    DuplicateConnection { from: NodeId, to: NodeId },
    #[error("connection {innovation} references unknown node {node}")]
    UnknownNode {
        innovation: Innovation,
        node: NodeId,
    },
    #[error("connection {innovation} targets {kind:?} node {node}")]
    IntoSource {
        innovation: Innovation,
        node: NodeId,
        kind: NodeKind,
    },
    #[error("connection graph contains a cycle")]
    Cycle,
    #[error("non-finite weight on connection {0}")]
    NonFiniteWeight(Innovation),
    #[error("fitness must be finite and non-negative, got {0}")]
    InvalidFitness(f64),
    #[error("genome needs at least one {0}")]
    Empty(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GenomeRepr")]
pub struct Genome {
    pub(crate) input_shape: Shape,
    pub(crate) conv_stages: Vec<ConvStageGene>,
    pub(crate) nodes: Vec<NodeGene>,
    pub(crate) connections: Vec<ConnectionGene>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub(crate) fitness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub(crate) adjusted_fitness: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenomeRepr {
    input_shape: Shape,
    conv_stages: Vec<ConvStageGene>,
    nodes: Vec<NodeGene>,
    connections: Vec<ConnectionGene>,
    #[serde(default)]
    fitness: Option<f64>,
    #[serde(default)]
    adjusted_fitness: Option<f64>,
}

impl TryFrom<GenomeRepr> for Genome {
    type Error = GenomeError;

    fn try_from(repr: GenomeRepr) -> Result<Self, GenomeError> {
        let mut genome = Genome::from_parts(
            repr.input_shape,
            repr.conv_stages,
            repr.nodes,
            repr.connections,
        )?;
        for value in [repr.fitness, repr.adjusted_fitness].into_iter().flatten() {
            if !value.is_finite() || value < 0.0 {
                return Err(GenomeError::InvalidFitness(value));
            }
        }
        genome.fitness = repr.fitness;
        genome.adjusted_fitness = repr.adjusted_fitness;
        Ok(genome)
    }
}

impl Genome {
    /// Assemble a genome from parts, canonicalize it, and check every invariant.
    pub fn from_parts(
        input_shape: Shape,
        conv_stages: Vec<ConvStageGene>,
        nodes: Vec<NodeGene>,
        connections: Vec<ConnectionGene>,
    ) -> Result<Self, GenomeError> {
        let mut genome = Genome {
            input_shape,
            conv_stages,
            nodes,
            connections,
            fitness: None,
            adjusted_fitness: None,
        };
        genome.canonicalize();
        genome.validate()?;
        Ok(genome)
    }

    /// Shape of the image the conv pipeline expects.
    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn conv_stages(&self) -> &[ConvStageGene] {
        &self.conv_stages
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn connections(&self) -> &[ConnectionGene] {
        &self.connections
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    pub fn adjusted_fitness(&self) -> Option<f64> {
        self.adjusted_fitness
    }

    pub fn set_fitness(&mut self, fitness: f64) {
        self.fitness = Some(fitness);
        self.adjusted_fitness = None;
    }

    pub fn set_adjusted_fitness(&mut self, adjusted: f64) {
        self.adjusted_fitness = Some(adjusted);
    }

    pub fn clear_fitness(&mut self) {
        self.fitness = None;
        self.adjusted_fitness = None;
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &NodeGene> + '_ {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    pub fn input_count(&self) -> usize {
        self.nodes_of(NodeKind::Input).count()
    }

    pub fn output_count(&self) -> usize {
        self.nodes_of(NodeKind::Output).count()
    }

    /// Number of genes that take part in compatibility distance: connections
    /// plus conv stages.
    pub fn gene_count(&self) -> usize {
        self.connections.len() + self.conv_stages.len()
    }

    pub fn innovations(&self) -> BTreeSet<Innovation> {
        self.connections.iter().map(|c| c.innovation).collect()
    }

    pub fn connection_by_innovation(&self, innovation: Innovation) -> Option<&ConnectionGene> {
        self.connections
            .binary_search_by_key(&innovation, |c| c.innovation)
            .ok()
            .map(|i| &self.connections[i])
    }

    /// Structural identity, ignoring fitness bookkeeping.
    pub fn same_structure(&self, other: &Genome) -> bool {
        self.input_shape == other.input_shape
            && self.conv_stages == other.conv_stages
            && self.nodes == other.nodes
            && self.connections == other.connections
    }

    pub(crate) fn canonicalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.connections.sort_by_key(|c| c.innovation);
        self.conv_stages.sort_by_key(|s| s.stage_index);
    }

    /// Check every genome invariant.
    pub fn validate(&self) -> Result<(), GenomeError> {
        self.validate_stages()?;

        let mut ids = HashSet::with_capacity(self.nodes.len());
        for node in &self.nodes {
            if !ids.insert(node.id) {
                return Err(GenomeError::DuplicateNode(node.id));
            }
        }
        let bias = self.nodes_of(NodeKind::Bias).count();
        if bias != 1 {
            return Err(GenomeError::BiasCount(bias));
        }
        for kind in [NodeKind::Input, NodeKind::Output] {
            if self.nodes_of(kind).next().is_none() {
                return Err(GenomeError::MissingKind(kind));
            }
        }
        let flattened = pipeline_output_shape(&self.conv_stages, self.input_shape)
            .map_err(|source| GenomeError::Pipeline {
                input: self.input_shape,
                source,
            })?
            .len();
        let inputs = self.input_count();
        if flattened != inputs {
            return Err(GenomeError::InputCount { flattened, inputs });
        }

        let mut innovations = HashSet::with_capacity(self.connections.len());
        let mut pairs = HashSet::with_capacity(self.connections.len());
        for c in &self.connections {
            if !innovations.insert(c.innovation) {
                return Err(GenomeError::DuplicateInnovation(c.innovation));
            }
            if !pairs.insert((c.from, c.to)) {
                return Err(GenomeError::DuplicateConnection {
                    from: c.from,
                    to: c.to,
                });
            }
            if !c.weight.is_finite() {
                return Err(GenomeError::NonFiniteWeight(c.innovation));
            }
            for node in [c.from, c.to] {
                if !ids.contains(&node) {
                    return Err(GenomeError::UnknownNode {
                        innovation: c.innovation,
                        node,
                    });
                }
            }
            let target = self.node(c.to).expect("checked above");
            if target.kind.is_source() {
                return Err(GenomeError::IntoSource {
                    innovation: c.innovation,
                    node: c.to,
                    kind: target.kind,
                });
            }
        }
        if self.has_cycle() {
            return Err(GenomeError::Cycle);
        }
        for value in [self.fitness, self.adjusted_fitness].into_iter().flatten() {
            if !value.is_finite() || value < 0.0 {
                return Err(GenomeError::InvalidFitness(value));
            }
        }
        Ok(())
    }

    fn validate_stages(&self) -> Result<(), GenomeError> {
        for (position, stage) in self.conv_stages.iter().enumerate() {
            if stage.stage_index != position {
                return Err(GenomeError::StageIndex {
                    count: self.conv_stages.len(),
                    position,
                    found: stage.stage_index,
                });
            }
            let (rows, cols) = (stage.kernel.rows(), stage.kernel.cols());
            if !KERNEL_SIDES.contains(&rows) || !KERNEL_SIDES.contains(&cols) {
                return Err(GenomeError::KernelSide {
                    stage: position,
                    rows,
                    cols,
                });
            }
        }
        Ok(())
    }

    /// Cycle check over all connections, enabled or not. Keeping the full gene
    /// graph acyclic means crossover may re-enable any gene safely.
    fn has_cycle(&self) -> bool {
        let mut indegree: BTreeMap<NodeId, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for c in &self.connections {
            *indegree.entry(c.to).or_default() += 1;
            out.entry(c.from).or_default().push(c.to);
        }
        let mut ready: Vec<NodeId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut seen = 0;
        while let Some(id) = ready.pop() {
            seen += 1;
            for next in out.get(&id).into_iter().flatten() {
                let d = indegree.get_mut(next).expect("known node");
                *d -= 1;
                if *d == 0 {
                    ready.push(*next);
                }
            }
        }
        seen != indegree.len()
    }

    /// Nodes reachable from `start` along any connection, including `start`.
    pub(crate) fn descendants(&self, start: NodeId) -> HashSet<NodeId> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for c in &self.connections {
            out.entry(c.from).or_default().push(c.to);
        }
        let mut seen = HashSet::from([start]);
        let mut stack = vec![start];
        while let Some(id) = stack.pop() {
            for &next in out.get(&id).into_iter().flatten() {
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        seen
    }
}

/// Uniform weight in `[-1, 1]`.
pub(crate) fn random_weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..=1.0)
}

/// Minimal NEAT topology: every input and the bias wired to every output, no
/// hidden nodes.
///
/// Node ids are laid out as inputs `1..=n`, bias `n + 1`, outputs after that.
/// Initial connections take their innovations from `registry`, so all genomes
/// built against one registry share markers.
pub fn new_minimal_genome<R: Rng + ?Sized>(
    input_shape: Shape,
    num_outputs: usize,
    conv_seed: &[ConvStageGene],
    output_activation: ActivationKind,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> Result<Genome, GenomeError> {
    if num_outputs == 0 {
        return Err(GenomeError::Empty("output"));
    }
    let mut stages = conv_seed.to_vec();
    stages.sort_by_key(|s| s.stage_index);
    let flattened = pipeline_output_shape(&stages, input_shape)
        .map_err(|source| GenomeError::Pipeline {
            input: input_shape,
            source,
        })?
        .len();
    if flattened == 0 {
        return Err(GenomeError::Empty("input"));
    }

    let num_inputs = flattened as NodeId;
    let bias = num_inputs + 1;
    let outputs = (bias + 1)..=(bias + num_outputs as NodeId);
    registry.reserve_node_ids(*outputs.end());

    let mut nodes: Vec<NodeGene> = (1..=num_inputs)
        .map(|id| NodeGene {
            id,
            kind: NodeKind::Input,
            activation: ActivationKind::Linear,
        })
        .collect();
    nodes.push(NodeGene {
        id: bias,
        kind: NodeKind::Bias,
        activation: ActivationKind::Linear,
    });
    nodes.extend(outputs.clone().map(|id| NodeGene {
        id,
        kind: NodeKind::Output,
        activation: output_activation,
    }));

    let mut connections = Vec::with_capacity((flattened + 1) * num_outputs);
    for from in 1..=bias {
        for to in outputs.clone() {
            connections.push(ConnectionGene {
                innovation: registry.connection_innovation(from, to),
                from,
                to,
                weight: random_weight(rng),
                enabled: true,
            });
        }
    }
    Genome::from_parts(input_shape, stages, nodes, connections)
}
