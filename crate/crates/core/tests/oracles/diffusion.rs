use biam_core::world::WorldMap;
use nalgebra::{DMatrix, SymmetricEigen};

/// Dense diffusion coordinates: full eigendecomposition of
/// `D^-1/2 W D^-1/2`, dropping the eigenvalue-1 direction of a connected graph.
pub struct DenseDiffusion {
    /// Eigenvalues 2..=k+2 in decreasing order; one past `k` to expose the gap.
    pub values: Vec<f64>,
    pub coords: Vec<Vec<f64>>,
    pub cells: Vec<(usize, usize)>,
}

pub fn dense_diffusion(map: &WorldMap, k: usize, t: u32) -> DenseDiffusion {
    let (cols, rows) = (map.cols() as i64, map.rows() as i64);
    let free = |c: i64, r: i64| c >= 0 && r >= 0 && c < cols && r < rows && !map.is_occupied_cell(c as usize, r as usize);
    let cells: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c, r)))
        .filter(|&(c, r)| free(c, r))
        .map(|(c, r)| (c as usize, r as usize))
        .collect();
    let n = cells.len();
    let index = |c: i64, r: i64| cells.iter().position(|&x| x == (c as usize, r as usize));
    let mut w = DMatrix::<f64>::zeros(n, n);
    for (i, &(c, r)) in cells.iter().enumerate() {
        let (c, r) = (c as i64, r as i64);
        for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            if !free(c + dc, r + dr) {
                continue;
            }
            if dc != 0 && dr != 0 && !(free(c + dc, r) && free(c, r + dr)) {
                continue;
            }
            w[(i, index(c + dc, r + dr).unwrap())] = 1.0;
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let vol: f64 = deg.iter().sum();
    let s = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (deg[i] * deg[j]).sqrt());
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    assert!((eig.eigenvalues[order[0]] - 1.0).abs() < 1e-9, "graph must be connected");
    let picked = &order[1..=k + 1];
    let values: Vec<f64> = picked.iter().map(|&j| eig.eigenvalues[j]).collect();
    let coords = (0..n)
        .map(|i| {
            picked[..k]
                .iter()
                .map(|&j| {
                    let psi = eig.eigenvectors[(i, j)] * (vol / deg[i]).sqrt();
                    eig.eigenvalues[j].powi(t as i32) * psi
                })
                .collect()
        })
        .collect();
    DenseDiffusion { values, coords, cells }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
