//! Diffusion-map coordinates of a grid graph.
//!
//! Eigenpairs of the symmetric operator `S = D^-1/2 W D^-1/2` are computed with
//! Chebyshev-filtered subspace iteration. The stationary vector of every
//! connected component is projected out, so the eigenvalue-1 directions never
//! show up among the returned components.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid_graph::GridGraph;
use super::MetricError;

const TOLERANCE: f64 = 1e-10;
const MATVEC_CAP: usize = 10_000;
const FILTER_DEGREE: usize = 30;
const SEED: u64 = 0x6469_6666_7573_6531;

#[derive(Debug, Clone)]
pub struct DiffusionEmbedding {
    k: usize,
    t: u32,
    eigenvalues: Vec<f64>,
    coords: Vec<f64>,
    source_revision: u64,
}

impl DiffusionEmbedding {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn source_revision(&self) -> u64 {
        self.source_revision
    }

    /// Leading nontrivial eigenvalues, largest first.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn node_count(&self) -> usize {
        self.coords.len() / self.k
    }

    pub fn coords(&self, node: u32) -> &[f64] {
        let i = node as usize * self.k;
        &self.coords[i..i + self.k]
    }

    pub fn distance_nodes(&self, a: u32, b: u32) -> f64 {
        if a == b {
            return 0.0;
        }
        self.coords(a)
            .iter()
            .zip(self.coords(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn from_parts(
        k: usize,
        t: u32,
        eigenvalues: Vec<f64>,
        coords: Vec<f64>,
        source_revision: u64,
    ) -> Self {
        DiffusionEmbedding {
            k,
            t,
            eigenvalues,
            coords,
            source_revision,
        }
    }

    pub(crate) fn raw_coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Column-major block of `m` vectors of length `n`.
struct Block {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl Block {
    fn zeros(n: usize, m: usize) -> Self {
        Block {
            n,
            m,
            data: vec![0.0; n * m],
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }
}

struct Operator<'a> {
    graph: &'a GridGraph,
    inv_sqrt_deg: Vec<f64>,
    /// Unit stationary vector of each component, stored sparsely.
    trivial: Vec<Vec<(usize, f64)>>,
}

impl Operator<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(j, _) in self.graph.neighbors(i as u32) {
                let j = j as usize;
                acc += self.inv_sqrt_deg[j] * x[j];
            }
            *out = self.inv_sqrt_deg[i] * acc;
        }
        self.deflate(y);
    }

    fn deflate(&self, y: &mut [f64]) {
        for v in &self.trivial {
            let dot: f64 = v.iter().map(|&(i, w)| w * y[i]).sum();
            for &(i, w) in v {
                y[i] -= dot * w;
            }
        }
    }

    fn apply_block(&self, x: &Block, y: &mut Block) {
        for j in 0..x.m {
            let (src, dst) = (x.col(j), y.col_mut(j));
            self.apply(src, dst);
        }
    }
}

fn components(graph: &GridGraph) -> Vec<Vec<usize>> {
    let n = graph.node_count();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        label[s] = id;
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for &(v, _) in graph.neighbors(u as u32) {
                let v = v as usize;
                if label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                }
            }
        }
        out.push(members);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt, run twice. Columns that collapse are refilled from `rng`.
fn orthonormalize(x: &mut Block, op: &Operator, rng: &mut ChaCha8Rng) {
    for _pass in 0..2 {
        for j in 0..x.m {
            for _retry in 0..4 {
                for i in 0..j {
                    let (before, rest) = x.data.split_at_mut(j * x.n);
                    let qi = &before[i * x.n..(i + 1) * x.n];
                    let xj = &mut rest[..x.n];
                    let r = dot(qi, xj);
                    for (a, b) in xj.iter_mut().zip(qi) {
                        *a -= r * b;
                    }
                }
                let norm = dot(x.col(j), x.col(j)).sqrt();
                if norm > 1e-12 {
                    x.col_mut(j).iter_mut().for_each(|v| *v /= norm);
                    break;
                }
                let col = x.col_mut(j);
                col.iter_mut().for_each(|v| *v = rng.random::<f64>() - 0.5);
                op.deflate(col);
            }
        }
    }
}

/// `Y = T_deg((S - c) / e) X`, with `[a, b]` mapped onto `[-1, 1]`.
fn chebyshev_filter(op: &Operator, x: &mut Block, degree: usize, lower: f64, upper: f64) {
    let e = (upper - lower) / 2.0;
    let c = (upper + lower) / 2.0;
    let (n, m) = (x.n, x.m);
    let mut prev = Block {
        n,
        m,
        data: x.data.clone(),
    };
    let mut cur = Block::zeros(n, m);
    op.apply_block(x, &mut cur);
    for (y, x0) in cur.data.iter_mut().zip(&x.data) {
        *y = (*y - c * x0) / e;
    }
    let mut next = Block::zeros(n, m);
    for _ in 1..degree {
        op.apply_block(&cur, &mut next);
        for ((y, x1), x0) in next.data.iter_mut().zip(&cur.data).zip(&prev.data) {
            *y = 2.0 * (*y - c * x1) / e - x0;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    x.data = cur.data;
}

/// Rayleigh-Ritz on an orthonormal block. Rotates `x` onto the Ritz vectors,
/// sorted by decreasing Ritz value, and returns the values with residual norms.
fn rayleigh_ritz(op: &Operator, x: &mut Block) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (x.n, x.m);
    let mut sx = Block::zeros(n, m);
    op.apply_block(x, &mut sx);
    let h = DMatrix::from_fn(m, m, |i, j| {
        0.5 * (dot(x.col(i), sx.col(j)) + dot(x.col(j), sx.col(i)))
    });
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut rx = Block::zeros(n, m);
    let mut rsx = Block::zeros(n, m);
    for (dst, &src) in order.iter().enumerate() {
        for l in 0..m {
            let q = eig.eigenvectors[(l, src)];
            if q == 0.0 {
                continue;
            }
            let (xl, sxl) = (x.col(l), sx.col(l));
            for (o, v) in rx.col_mut(dst).iter_mut().zip(xl) {
                *o += q * v;
            }
            for (o, v) in rsx.col_mut(dst).iter_mut().zip(sxl) {
                *o += q * v;
            }
        }
    }
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let residuals = (0..m)
        .map(|j| {
            rsx.col(j)
                .iter()
                .zip(rx.col(j))
                .map(|(s, v)| (s - values[j] * v).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    *x = rx;
    (values, residuals)
}

/// Builds `k` diffusion coordinates at diffusion time `t`.
pub fn build_diffusion_embedding(
    graph: &GridGraph,
    k: usize,
    t: u32,
) -> Result<DiffusionEmbedding, MetricError> {
    let n = graph.node_count();
    if k < 2 || t == 0 {
        return Err(MetricError::BadParameters { k, t });
    }
    let comps = components(graph);
    let available = n.saturating_sub(comps.len());
    if k >= n || k > available {
        return Err(MetricError::TooFewNodes { k, nodes: n });
    }

    let degree: Vec<f64> = (0..n).map(|i| graph.degree(i as u32) as f64).collect();
    let inv_sqrt_deg: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let trivial = comps
        .iter()
        .map(|members| {
            let norm = members.iter().map(|&i| degree[i]).sum::<f64>().sqrt();
            members
                .iter()
                .map(|&i| {
                    // isolated nodes have a zero row in S; treat their indicator as trivial
                    let w = if norm > 0.0 { degree[i].sqrt() / norm } else { 1.0 };
                    (i, w)
                })
                .collect()
        })
        .collect();
    let op = Operator {
        graph,
        inv_sqrt_deg,
        trivial,
    };

    let m = (k + (k / 2).max(10)).min(available);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut x = Block::zeros(n, m);
    for v in x.data.iter_mut() {
        *v = rng.random::<f64>() - 0.5;
    }
    for j in 0..m {
        op.deflate(x.col_mut(j));
    }
    orthonormalize(&mut x, &op, &mut rng);
    let (mut values, mut residuals) = rayleigh_ritz(&op, &mut x);
    let mut matvecs = 1;

    while residuals[..k].iter().any(|&r| r > TOLERANCE) {
        if matvecs + FILTER_DEGREE + 1 > MATVEC_CAP {
            let worst = residuals[..k].iter().cloned().fold(0.0, f64::max);
            return Err(MetricError::NotConverged {
                matvecs,
                residual: worst,
            });
        }
        // Damp everything at or below the smallest Ritz value in the block.
        let upper = values[m - 1];
        if upper < values[0] - 1e-14 && m < available {
            chebyshev_filter(&op, &mut x, FILTER_DEGREE, -1.0, upper);
            matvecs += FILTER_DEGREE;
        } else {
            // The block spans the whole nontrivial space; a plain power step suffices.
            let mut y = Block::zeros(n, m);
            op.apply_block(&x, &mut y);
            x = y;
            matvecs += 1;
        }
        orthonormalize(&mut x, &op, &mut rng);
        (values, residuals) = rayleigh_ritz(&op, &mut x);
        matvecs += 1;
    }

    let volume: f64 = degree.iter().sum();
    let mut coords = vec![0.0; n * k];
    for j in 0..k {
        let phi = x.col(j);
        let psi: Vec<f64> = (0..n)
            .map(|i| {
                if degree[i] > 0.0 {
                    phi[i] * (volume / degree[i]).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut pivot = 0;
        for i in 1..n {
            if psi[i].abs() > psi[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if psi[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = sign * values[j].powi(t as i32);
        for i in 0..n {
            coords[i * k + j] = scale * psi[i];
        }
    }

    Ok(DiffusionEmbedding {
        k,
        t,
        eigenvalues: values[..k].to_vec(),
        coords,
        source_revision: graph.source_revision(),
    })
}
