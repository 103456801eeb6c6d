//! Historical markings.
//!
//! The registry hands out innovation numbers for connection genes and node ids
//! for split mutations. A `(from, to)` pair always maps to the same innovation,
//! so equal structures carry equal markers across the whole run, and a marker
//! is never handed out twice for different structures.

use std::collections::BTreeMap;

use super::{ConnectionGene, Innovation, NodeId};

/// Markers assigned to one split of a connection gene.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitRecord {
    pub node: NodeId,
    pub in_innovation: Innovation,
    pub out_innovation: Innovation,
}

#[derive(Clone, Debug)]
pub struct InnovationRegistry {
    next_innovation: Innovation,
    next_node_id: NodeId,
    connection_innovations: BTreeMap<(NodeId, NodeId), Innovation>,
    split_records: BTreeMap<Innovation, Vec<SplitRecord>>,
}

impl Default for InnovationRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl InnovationRegistry {
    pub fn new() -> Self {
        InnovationRegistry {
            next_innovation: 1,
            next_node_id: 1,
            connection_innovations: BTreeMap::new(),
            split_records: BTreeMap::new(),
        }
    }

    /// Next innovation number that would be assigned.
    pub fn next_innovation(&self) -> Innovation {
        self.next_innovation
    }

    pub fn next_node_id(&self) -> NodeId {
        self.next_node_id
    }

    /// Make sure ids up to and including `id` are never handed out for new nodes.
    pub fn reserve_node_ids(&mut self, id: NodeId) {
        self.next_node_id = self.next_node_id.max(id + 1);
    }

    /// Innovation number of the connection `from -> to`, allocating one if the
    /// pair has never been seen.
    pub fn connection_innovation(&mut self, from: NodeId, to: NodeId) -> Innovation {
        let next = &mut self.next_innovation;
        *self
            .connection_innovations
            .entry((from, to))
            .or_insert_with(|| {
                let innovation = *next;
                *next += 1;
                innovation
            })
    }

    /// Markers for splitting `connection`.
    ///
    /// Splits of the same connection share a node id and innovations. A genome
    /// that already carries a recorded split node (it re-enabled the connection
    /// through crossover) gets the next recorded split it does not hold, or a
    /// fresh one.
    pub fn split(
        &mut self,
        connection: &ConnectionGene,
        genome_has_node: impl Fn(NodeId) -> bool,
    ) -> SplitRecord {
        if let Some(record) = self
            .split_records
            .get(&connection.innovation)
            .and_then(|records| records.iter().find(|r| !genome_has_node(r.node)))
        {
            return *record;
        }
        let node = self.next_node_id;
        self.next_node_id += 1;
        let record = SplitRecord {
            node,
            in_innovation: self.connection_innovation(connection.from, node),
            out_innovation: self.connection_innovation(node, connection.to),
        };
        self.split_records
            .entry(connection.innovation)
            .or_default()
            .push(record);
        record
    }
}
