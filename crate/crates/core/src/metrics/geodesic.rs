use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::grid_graph::{GridGraph, Step};

/// All-pairs shortest-path lengths over a grid graph, in meters.
#[derive(Debug, Clone)]
pub struct GeodesicTable {
    n: usize,
    dist: Vec<f64>,
    source_revision: u64,
}

impl GeodesicTable {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn source_revision(&self) -> u64 {
        self.source_revision
    }

    /// `+inf` when the nodes are in different components.
    pub fn distance_nodes(&self, a: u32, b: u32) -> f64 {
        self.dist[a as usize * self.n + b as usize]
    }

    pub(crate) fn from_parts(n: usize, dist: Vec<f64>, source_revision: u64) -> Self {
        GeodesicTable {
            n,
            dist,
            source_revision,
        }
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.dist
    }
}

/// Path length as (orthogonal steps, diagonal steps). Comparing `a + b*sqrt(2)`
/// in floating point orders these exactly for any grid this crate builds,
/// and the final length is always formed the same way.
#[derive(Clone, Copy, PartialEq, Eq)]
struct Steps {
    ortho: u32,
    diag: u32,
}

impl Steps {
    fn key(self) -> f64 {
        self.ortho as f64 + self.diag as f64 * SQRT_2
    }
}

#[derive(PartialEq, Eq)]
struct Entry {
    steps: Steps,
    node: u32,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .steps
            .key()
            .total_cmp(&self.steps.key())
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn single_source(graph: &GridGraph, source: u32, best: &mut [Option<Steps>], out: &mut [f64]) {
    best.iter_mut().for_each(|b| *b = None);
    let mut heap = BinaryHeap::new();
    let zero = Steps { ortho: 0, diag: 0 };
    best[source as usize] = Some(zero);
    heap.push(Entry {
        steps: zero,
        node: source,
    });
    while let Some(Entry { steps, node }) = heap.pop() {
        if best[node as usize].is_some_and(|b| b.key() < steps.key()) {
            continue;
        }
        for &(v, step) in graph.neighbors(node) {
            let next = match step {
                Step::Orthogonal => Steps {
                    ortho: steps.ortho + 1,
                    ..steps
                },
                Step::Diagonal => Steps {
                    diag: steps.diag + 1,
                    ..steps
                },
            };
            let slot = &mut best[v as usize];
            if slot.is_none_or(|b| next.key() < b.key()) {
                *slot = Some(next);
                heap.push(Entry { steps: next, node: v });
            }
        }
    }
    let res = graph.resolution();
    for (o, b) in out.iter_mut().zip(best.iter()) {
        *o = match b {
            Some(s) => res * s.key(),
            None => f64::INFINITY,
        };
    }
}

/// Runs Dijkstra from every node.
pub fn build_geodesic_table(graph: &GridGraph) -> GeodesicTable {
    let n = graph.node_count();
    let mut dist = vec![0.0; n * n];
    let mut best = vec![None; n];
    for s in 0..n {
        single_source(graph, s as u32, &mut best, &mut dist[s * n..(s + 1) * n]);
    }
    GeodesicTable {
        n,
        dist,
        source_revision: graph.source_revision(),
    }
}
