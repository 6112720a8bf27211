//! Initial placement of logical qubits onto data tiles via a linear
//! arrangement of the qubit interaction graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::Machine;
use crate::circuit::LogicalCircuit;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("circuit needs {shortfall} more data tiles than the machine provides")]
    InsufficientDataTiles { shortfall: usize },
    #[error("ordering is not a permutation of 0..{0}")]
    BadOrdering(usize),
}

/// Symmetric weighted graph over logical qubits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionGraph {
    n: usize,
    adj: Vec<Vec<(usize, u64)>>,
}

impl InteractionGraph {
    pub fn new(n: usize) -> Self {
        Self { n, adj: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, u64)]) -> Self {
        let mut acc = BTreeMap::new();
        for &(u, v, w) in edges {
            if u != v && w > 0 {
                *acc.entry((u.min(v), u.max(v))).or_insert(0) += w;
            }
        }
        let mut g = Self::new(n);
        for ((u, v), w) in acc {
            g.adj[u].push((v, w));
            g.adj[v].push((u, w));
        }
        g
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, u64)] {
        &self.adj[u]
    }

    pub fn weight(&self, u: usize, v: usize) -> u64 {
        self.adj[u].iter().find(|&&(x, _)| x == v).map_or(0, |&(_, w)| w)
    }

    /// Each undirected edge once, `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for (u, nbrs) in self.adj.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&(v, _)| u < v).map(|&(v, w)| (u, v, w)));
        }
        out
    }

    /// Σ w(u,v)·|π(u) − π(v)| where `ordering[i]` is the qubit at position `i`.
    pub fn arrangement_cost(&self, ordering: &[usize]) -> u64 {
        let pos = positions(ordering, self.n);
        self.edges().iter().map(|&(u, v, w)| w * pos[u].abs_diff(pos[v]) as u64).sum()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                i += 1;
                for &(v, _) in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        // descending size, then by smallest member
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }
}

fn positions(ordering: &[usize], n: usize) -> Vec<usize> {
    let mut pos = vec![0; n];
    for (i, &q) in ordering.iter().enumerate() {
        pos[q] = i;
    }
    pos
}

/// Toffoli-style gates contribute one unit to each operand pair.
pub fn build_interaction_graph(circuit: &LogicalCircuit) -> InteractionGraph {
    let mut edges = Vec::new();
    for g in circuit.gates() {
        for (i, &u) in g.operands.iter().enumerate() {
            for &v in &g.operands[i + 1..] {
                edges.push((u, v, 1));
            }
        }
    }
    InteractionGraph::from_edges(circuit.n_qubits, &edges)
}

const POWER_ITERATIONS: usize = 400;
const SWAP_PASSES: usize = 64;
const PAIR_SWAP_LIMIT: usize = 160;
/// Data tiles kept free per computational segment for incoming operands.
pub const CS_HEADROOM: usize = 3;

/// Heuristic minimum linear arrangement. Components are laid out one after
/// the other; each is seeded from its Fiedler vector (and from its identity
/// order), refined by swap hill-climbing, and the cheaper result is kept.
pub fn linear_arrange(graph: &InteractionGraph) -> Vec<usize> {
    let mut out = Vec::with_capacity(graph.n);
    for comp in graph.components() {
        out.extend(arrange_component(graph, &comp));
    }
    out
}

fn arrange_component(graph: &InteractionGraph, comp: &[usize]) -> Vec<usize> {
    if comp.len() <= 2 {
        return comp.to_vec();
    }
    let local: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let adj: Vec<Vec<(usize, u64)>> =
        comp.iter().map(|&q| graph.adj[q].iter().map(|&(v, w)| (local[&v], w)).collect()).collect();

    let mut best: Option<(u64, Vec<usize>)> = None;
    for seed in [spectral_order(&adj), (0..comp.len()).collect()] {
        let refined = refine(&adj, seed);
        let cost = local_cost(&adj, &refined);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, refined));
        }
    }
    let order = best.expect("at least one candidate").1;
    order.into_iter().map(|i| comp[i]).collect()
}

fn local_cost(adj: &[Vec<(usize, u64)>], order: &[usize]) -> u64 {
    let pos = positions(order, adj.len());
    let mut c = 0;
    for (u, nbrs) in adj.iter().enumerate() {
        for &(v, w) in nbrs {
            if u < v {
                c += w * pos[u].abs_diff(pos[v]) as u64;
            }
        }
    }
    c
}

/// Order by the approximate Fiedler vector from power iteration on a shifted
/// Laplacian, deflated against the constant vector.
fn spectral_order(adj: &[Vec<(usize, u64)>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<f64> = adj.iter().map(|nb| nb.iter().map(|&(_, w)| w as f64).sum()).collect();
    let shift = 2.0 * degree.iter().cloned().fold(0.0, f64::max) + 1.0;
    let mut x: Vec<f64> = (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect();
    let mut y = vec![0.0; n];
    for _ in 0..POWER_ITERATIONS {
        // y = (shift·I − L)·x
        for u in 0..n {
            let mut acc = (shift - degree[u]) * x[u];
            for &(v, w) in &adj[u] {
                acc += w as f64 * x[v];
            }
            y[u] = acc;
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let norm = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = (yi - mean) / norm;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    if order.iter().position(|&i| i == 0).unwrap_or(0) > n / 2 {
        order.reverse();
    }
    order
}

/// Swap hill-climbing: adjacent swaps on large components, all pairs on small ones.
fn refine(adj: &[Vec<(usize, u64)>], mut order: Vec<usize>) -> Vec<usize> {
    let n = order.len();
    let mut pos = positions(&order, n);
    let node_cost = |u: usize, at: usize, pos: &[usize], skip: usize, skip_at: usize| -> i64 {
        adj[u]
            .iter()
            .map(|&(v, w)| {
                let pv = if v == skip { skip_at } else { pos[v] };
                w as i64 * at.abs_diff(pv) as i64
            })
            .sum()
    };
    for _ in 0..SWAP_PASSES {
        let mut improved = false;
        for i in 0..n {
            let range: Vec<usize> = if n <= PAIR_SWAP_LIMIT { (i + 1..n).collect() } else { (i + 1..(i + 2).min(n)).collect() };
            for j in range {
                let (a, b) = (order[i], order[j]);
                let before = node_cost(a, i, &pos, usize::MAX, 0) + node_cost(b, j, &pos, usize::MAX, 0)
                    - adj[a].iter().filter(|&&(v, _)| v == b).map(|&(_, w)| w as i64 * (j - i) as i64).sum::<i64>();
                let after = node_cost(a, j, &pos, b, i) + node_cost(b, i, &pos, a, j)
                    - adj[a].iter().filter(|&&(v, _)| v == b).map(|&(_, w)| w as i64 * (j - i) as i64).sum::<i64>();
                if after < before {
                    order.swap(i, j);
                    pos[a] = j;
                    pos[b] = i;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    order
}

/// Logical qubit → (segment, data slot).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitMap {
    pub assignment: Vec<(usize, usize)>,
}

impl QubitMap {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("qubit map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Fills data tiles segment by segment in machine order, which puts the
/// computational segments first. Qubits that do not fit there are spread
/// evenly over the storage segments.
pub fn assign_tiles(ordering: &[usize], machine: &Machine) -> Result<QubitMap, MapError> {
    let n = ordering.len();
    let mut seen = vec![false; n];
    for &q in ordering {
        if q >= n || std::mem::replace(&mut seen[q], true) {
            return Err(MapError::BadOrdering(n));
        }
    }
    let capacity = machine.data_capacity();
    if n > capacity {
        return Err(MapError::InsufficientDataTiles { shortfall: n - capacity });
    }
    // leave room for teleported-in operands in computational segments when capacity allows
    let usable = |s: &crate::arch::Segment, r: usize| {
        if s.is_computational() { (s.n_data as usize).saturating_sub(r).max(1) } else { s.n_data as usize }
    };
    let headroom = (0..=CS_HEADROOM)
        .rev()
        .find(|&r| machine.segments.iter().map(|s| usable(s, r)).sum::<usize>() >= n)
        .unwrap_or(0);
    let mut quota: Vec<usize> = machine.segments.iter().map(|s| if s.is_computational() { usable(s, headroom) } else { 0 }).collect();
    // storage takes the overflow spread evenly, so larger storage segments do not concentrate traffic
    let mut rest = n.saturating_sub(quota.iter().sum::<usize>());
    let storage: Vec<usize> = machine.segments.iter().filter(|s| !s.is_computational()).map(|s| s.id).collect();
    if rest > 0 {
        let level = (1..)
            .find(|&l| storage.iter().map(|&i| (machine.segments[i].n_data as usize).min(l)).sum::<usize>() >= rest)
            .expect("capacity was checked");
        for &i in &storage {
            let take = (machine.segments[i].n_data as usize).min(level).min(rest);
            quota[i] = take;
            rest -= take;
        }
    }
    let slots = machine.segments.iter().flat_map(|s| (0..quota[s.id]).map(move |k| (s.id, k)));
    let mut assignment = vec![(0, 0); n];
    for (&q, slot) in ordering.iter().zip(slots) {
        assignment[q] = slot;
    }
    Ok(QubitMap { assignment })
}

pub fn map_circuit(circuit: &LogicalCircuit, machine: &Machine) -> Result<QubitMap, MapError> {
    let graph = build_interaction_graph(circuit);
    assign_tiles(&linear_arrange(&graph), machine)
}
