//! Breadth-first compute graph over a gate set.
//!
//! Nodes are distinct unitaries up to global phase reachable from the
//! identity; edges are gate applications. Expansion is level by level, so
//! the parent chain of every node is a shortest factorization.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use num_complex::Complex64;

use crate::circuit::Token;
use crate::error::{Error, Result};
use crate::gates::GateSet;
use crate::unitary::{
    apply_gate_rows, canonical_key, phase_distance, CanonicalKey, PhaseTolerance, Unitary, DEFAULT_KEY_GRID,
};

/// Default node cap for [`build_graph`].
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

const NO_PARENT: u32 = u32::MAX;

/// A gate application `from --token--> to`; `token` indexes [`ComputeGraph::pool`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: u32,
    pub token: u32,
    pub to: u32,
}

/// A materialized view of one node.
#[derive(Debug, Clone)]
pub struct GraphNode {
    pub unitary: Unitary,
    pub key: CanonicalKey,
    pub depth: usize,
    pub shortest_factorization: Vec<Token>,
}

#[derive(Debug, Clone)]
pub struct ComputeGraph {
    n_qubits: usize,
    depth_bound: usize,
    fingerprint: u64,
    pool: Vec<Token>,
    dim: usize,
    // Node storage is columnar: unitaries live in one arena.
    unitaries: Vec<Complex64>,
    depth: Vec<u8>,
    parent: Vec<u32>,
    via: Vec<u32>,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    /// `per_depth[d]` = number of nodes whose shortest factorization has length `d`.
    pub per_depth: Vec<usize>,
}

/// Instantiated tokens used as graph edges on `n_qubits`: every
/// (def, qubit tuple) pair, dropping instantiations whose embedded unitary
/// repeats an earlier one (symmetric two-qubit gates placed both ways).
pub fn token_pool(gs: &GateSet, n_qubits: usize) -> Vec<Token> {
    let dim = 1 << n_qubits;
    let mut seen: Vec<Unitary> = Vec::new();
    let mut pool = Vec::new();
    for t in gs.instantiations(n_qubits) {
        let mut u = Unitary::identity(dim);
        apply_gate_rows(u.entries_mut(), dim, &gs.def(t.def()).matrix, t.qubits(), n_qubits);
        if seen.iter().all(|s| s != &u) {
            seen.push(u);
            pool.push(t);
        }
    }
    pool
}

pub fn build_graph(gs: &GateSet, n_qubits: usize, depth: usize) -> Result<ComputeGraph> {
    build_graph_capped(gs, n_qubits, depth, DEFAULT_NODE_CAP)
}

/// [`build_graph`] failing with [`Error::NodeCapExceeded`] once the node
/// count would pass `node_cap`.
pub fn build_graph_capped(gs: &GateSet, n_qubits: usize, depth: usize, node_cap: usize) -> Result<ComputeGraph> {
    if depth < 1 {
        return Err(Error::InvalidArgument("graph depth must be at least 1".into()));
    }
    if depth > u8::MAX as usize {
        return Err(Error::InvalidArgument(format!("graph depth {depth} too large")));
    }
    if n_qubits == 0 || n_qubits > 8 {
        return Err(Error::InvalidArgument(format!(
            "compute graphs support 1..=8 qubits, got {n_qubits}"
        )));
    }
    let pool = token_pool(gs, n_qubits);
    if pool.is_empty() {
        return Err(Error::NoApplicableToken(n_qubits));
    }
    let dim = 1usize << n_qubits;
    let d2 = dim * dim;
    let tol = PhaseTolerance::default();

    let mut g = ComputeGraph {
        n_qubits,
        depth_bound: depth,
        fingerprint: gs.fingerprint(),
        pool,
        dim,
        unitaries: Unitary::identity(dim).entries().to_vec(),
        depth: vec![0],
        parent: vec![NO_PARENT],
        via: vec![NO_PARENT],
        edges: Vec::new(),
    };
    // key hash -> first node; collisions chain through `next`.
    let mut index: HashMap<u64, u32> = HashMap::new();
    let mut next: Vec<u32> = vec![NO_PARENT];
    index.insert(key_hash(&Unitary::identity(dim)), 0);

    let mut frontier: Vec<u32> = vec![0];
    let mut scratch = Unitary::identity(dim);
    for level in 0..depth {
        let mut new_frontier = Vec::new();
        for &node in &frontier {
            for (ti, tok) in g.pool.iter().enumerate() {
                let base = node as usize * d2;
                scratch.entries_mut().copy_from_slice(&g.unitaries[base..base + d2]);
                apply_gate_rows(
                    scratch.entries_mut(),
                    dim,
                    &gs.def(tok.def()).matrix,
                    tok.qubits(),
                    n_qubits,
                );
                let h = key_hash(&scratch);
                let mut found = None;
                let mut cursor = index.get(&h).copied().unwrap_or(NO_PARENT);
                while cursor != NO_PARENT {
                    let c = cursor as usize;
                    let stored = Unitary::from_raw(dim, g.unitaries[c * d2..(c + 1) * d2].to_vec());
                    if phase_distance(&stored, &scratch)? <= tol.value() {
                        found = Some(cursor);
                        break;
                    }
                    cursor = next[c];
                }
                let to = match found {
                    Some(existing) => existing,
                    None => {
                        let id = g.depth.len();
                        if id >= node_cap {
                            return Err(Error::NodeCapExceeded(node_cap));
                        }
                        let id = id as u32;
                        g.unitaries.extend_from_slice(scratch.entries());
                        g.depth.push((level + 1) as u8);
                        g.parent.push(node);
                        g.via.push(ti as u32);
                        next.push(index.insert(h, id).unwrap_or(NO_PARENT));
                        new_frontier.push(id);
                        id
                    }
                };
                g.edges.push(Edge {
                    from: node,
                    token: ti as u32,
                    to,
                });
            }
        }
        frontier = new_frontier;
    }
    Ok(g)
}

fn key_hash(u: &Unitary) -> u64 {
    let mut h = DefaultHasher::new();
    canonical_key(u, DEFAULT_KEY_GRID).hash(&mut h);
    h.finish()
}

impl ComputeGraph {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Distinct instantiated tokens labelling the edges.
    pub fn pool(&self) -> &[Token] {
        &self.pool
    }

    pub fn node_count(&self) -> usize {
        self.depth.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_depth(&self, id: usize) -> usize {
        self.depth[id] as usize
    }

    pub fn node_unitary(&self, id: usize) -> Unitary {
        let d2 = self.dim * self.dim;
        Unitary::from_raw(self.dim, self.unitaries[id * d2..(id + 1) * d2].to_vec())
    }

    /// Tokens along the BFS parent chain, first-applied first.
    pub fn factorization(&self, id: usize) -> Vec<Token> {
        let mut out = Vec::with_capacity(self.depth[id] as usize);
        let mut cur = id;
        while self.parent[cur] != NO_PARENT {
            out.push(self.pool[self.via[cur] as usize]);
            cur = self.parent[cur] as usize;
        }
        out.reverse();
        out
    }

    pub fn node(&self, id: usize) -> GraphNode {
        let unitary = self.node_unitary(id);
        GraphNode {
            key: canonical_key(&unitary, DEFAULT_KEY_GRID),
            unitary,
            depth: self.node_depth(id),
            shortest_factorization: self.factorization(id),
        }
    }
}

pub fn graph_stats(g: &ComputeGraph) -> GraphStats {
    let mut per_depth = vec![0; g.depth_bound + 1];
    for &d in &g.depth {
        per_depth[d as usize] += 1;
    }
    GraphStats {
        nodes: g.node_count(),
        edges: g.edges.len(),
        per_depth,
    }
}
