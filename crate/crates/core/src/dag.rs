//! Labelled DAGs over a handful of nodes, and exhaustive enumeration.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest node count for which every DAG is enumerated (29281 graphs at 5).
pub const MAX_NODES: usize = 5;

/// A directed acyclic graph over nodes `0..d`.
///
/// `adjacency[p * d + i]` is true iff `p -> i`. Parent lists are sorted and the
/// topological order is the lexicographically smallest one.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    d: usize,
    adjacency: Vec<bool>,
    parent_sets: Vec<Vec<usize>>,
    topo_order: Vec<usize>,
}

impl Dag {
    pub fn empty(d: usize) -> Self {
        Self::from_adjacency(d, vec![false; d * d]).expect("empty graph is acyclic")
    }

    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![false; d * d];
        for &(p, i) in edges {
            if p >= d || i >= d {
                return Err(Error::InvalidGraph(format!("edge ({p}, {i}) out of range for d = {d}")));
            }
            if p == i {
                return Err(Error::InvalidGraph(format!("self-loop on node {p}")));
            }
            adjacency[p * d + i] = true;
        }
        Self::from_adjacency(d, adjacency)
    }

    /// Builds a DAG from a row-major `d * d` adjacency matrix, rejecting cycles.
    pub fn from_adjacency(d: usize, adjacency: Vec<bool>) -> Result<Self> {
        if adjacency.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: adjacency.len() });
        }
        let parent_sets: Vec<Vec<usize>> = (0..d)
            .map(|i| (0..d).filter(|&p| adjacency[p * d + i]).collect())
            .collect();
        let topo_order = topological_order(d, &parent_sets)
            .ok_or_else(|| Error::InvalidGraph("graph contains a directed cycle".into()))?;
        Ok(Self { d, adjacency, parent_sets, topo_order })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_edge(&self, p: usize, i: usize) -> bool {
        self.adjacency[p * self.d + i]
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parent_sets[i]
    }

    /// Parent set of node `i` as a bitmask.
    pub fn parent_mask(&self, i: usize) -> u32 {
        self.parent_sets[i].iter().fold(0, |m, &p| m | (1 << p))
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    /// Edges `(p, i)` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let d = self.d;
        (0..d * d)
            .filter(|&k| self.adjacency[k])
            .map(|k| (k / d, k % d))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count()
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag(d={}, {:?})", self.d, self.edges())
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.edge_count() == 0 {
            return write!(f, "(empty)");
        }
        let parts: Vec<String> = self.edges().iter().map(|(p, i)| format!("X{p}->X{i}")).collect();
        write!(f, "{}", parts.join(", "))
    }
}

/// Kahn's algorithm, always taking the smallest ready node. `None` on a cycle.
fn topological_order(d: usize, parent_sets: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indegree: Vec<usize> = parent_sets.iter().map(Vec::len).collect();
    let mut done = vec![false; d];
    let mut order = Vec::with_capacity(d);
    while order.len() < d {
        let next = (0..d).find(|&i| !done[i] && indegree[i] == 0)?;
        done[next] = true;
        order.push(next);
        for (i, ps) in parent_sets.iter().enumerate() {
            if ps.contains(&next) {
                indegree[i] -= 1;
            }
        }
    }
    Some(order)
}

#[derive(Serialize, Deserialize)]
struct DagJson {
    d: usize,
    edges: Vec<[usize; 2]>,
}

impl Serialize for Dag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DagJson { d: self.d, edges: self.edges().into_iter().map(|(p, i)| [p, i]).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dag {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = DagJson::deserialize(de)?;
        let edges: Vec<(usize, usize)> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
        Dag::from_edges(raw.d, &edges).map_err(serde::de::Error::custom)
    }
}

/// Every labelled DAG over `d` nodes, in lexicographic order of the flattened
/// adjacency matrix (row-major, `false < true`).
pub fn enumerate_dags(d: usize) -> Result<Vec<Dag>> {
    if !(1..=MAX_NODES).contains(&d) {
        return Err(Error::DimensionOutOfRange { d, max: MAX_NODES });
    }
    // Off-diagonal positions in row-major order; the first one is the most
    // significant bit so that counting up the mask is lexicographic.
    let slots: Vec<(usize, usize)> =
        (0..d).flat_map(|p| (0..d).filter(move |&i| i != p).map(move |i| (p, i))).collect();
    let m = slots.len();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << m) {
        let mut parents = vec![0u32; d];
        for (k, &(p, i)) in slots.iter().enumerate() {
            if mask >> (m - 1 - k) & 1 == 1 {
                parents[i] |= 1 << p;
            }
        }
        if !is_acyclic_masks(&parents) {
            continue;
        }
        let mut adjacency = vec![false; d * d];
        for (i, &pm) in parents.iter().enumerate() {
            for p in 0..d {
                if pm >> p & 1 == 1 {
                    adjacency[p * d + i] = true;
                }
            }
        }
        out.push(Dag::from_adjacency(d, adjacency)?);
    }
    Ok(out)
}

/// Acyclicity by repeatedly peeling off nodes with no remaining parents.
fn is_acyclic_masks(parents: &[u32]) -> bool {
    let d = parents.len();
    let mut remaining: u32 = (1 << d) - 1;
    while remaining != 0 {
        let ready = (0..d).find(|&i| remaining >> i & 1 == 1 && parents[i] & remaining == 0);
        match ready {
            Some(i) => remaining &= !(1 << i),
            None => return false,
        }
    }
    true
}

/// Structural Hamming distance: additions, deletions and reversals, each
/// counting one edit.
pub fn shd(a: &Dag, b: &Dag) -> Result<usize> {
    if a.d != b.d {
        return Err(Error::DimensionMismatch { expected: a.d, got: b.d });
    }
    let d = a.d;
    let mut dist = 0;
    for p in 0..d {
        for i in (p + 1)..d {
            let ea = (a.has_edge(p, i), a.has_edge(i, p));
            let eb = (b.has_edge(p, i), b.has_edge(i, p));
            if ea != eb {
                dist += 1;
            }
        }
    }
    Ok(dist)
}
