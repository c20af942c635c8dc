use crate::geometry::Point;
use crate::world::WorldMap;

use super::MetricError;

const NO_NODE: u32 = u32::MAX;

/// Kind of a grid move; weights are `resolution` and `resolution * sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Orthogonal,
    Diagonal,
}

/// 8-connected graph over the free coarse cells of a map.
#[derive(Debug, Clone)]
pub struct GridGraph {
    resolution: f64,
    cols: usize,
    rows: usize,
    node_of_cell: Vec<u32>,
    cells: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    neighbors: Vec<(u32, Step)>,
    source_revision: u64,
}

impl GridGraph {
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn node_count(&self) -> usize {
        self.cells.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn coarse_dims(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    pub fn source_revision(&self) -> u64 {
        self.source_revision
    }

    pub fn neighbors(&self, node: u32) -> &[(u32, Step)] {
        let n = node as usize;
        &self.neighbors[self.offsets[n]..self.offsets[n + 1]]
    }

    pub fn degree(&self, node: u32) -> usize {
        let n = node as usize;
        self.offsets[n + 1] - self.offsets[n]
    }

    pub fn cell(&self, node: u32) -> (usize, usize) {
        let (c, r) = self.cells[node as usize];
        (c as usize, r as usize)
    }

    pub fn node_at(&self, col: usize, row: usize) -> Option<u32> {
        if col >= self.cols || row >= self.rows {
            return None;
        }
        match self.node_of_cell[row * self.cols + col] {
            NO_NODE => None,
            n => Some(n),
        }
    }

    pub fn center(&self, node: u32) -> Point {
        let (c, r) = self.cell(node);
        Point::new(
            (c as f64 + 0.5) * self.resolution,
            (r as f64 + 0.5) * self.resolution,
        )
    }

    /// Maps a continuous state to its grid node (`g(.)`): the containing
    /// coarse cell when it is free, otherwise the nearest free cell among its
    /// eight neighbors.
    pub fn cell_of(&self, p: Point) -> Result<u32, MetricError> {
        let fc = (p.x / self.resolution).floor();
        let fr = (p.y / self.resolution).floor();
        if !(fc.is_finite() && fr.is_finite()) {
            return Err(MetricError::Unmapped(p));
        }
        let c = (fc.max(0.0) as usize).min(self.cols - 1);
        let r = (fr.max(0.0) as usize).min(self.rows - 1);
        if let Some(n) = self.node_at(c, r) {
            return Ok(n);
        }
        let mut best: Option<(f64, u32)> = None;
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                if nc < 0 || nr < 0 {
                    continue;
                }
                if let Some(n) = self.node_at(nc as usize, nr as usize) {
                    let d = self.center(n).distance_squared(p);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, n));
                    }
                }
            }
        }
        best.map(|(_, n)| n).ok_or(MetricError::Unmapped(p))
    }
}

/// Builds the coarse 8-connected grid graph of a map's static geometry.
///
/// A coarse cell is a node iff every fine cell it covers is free. Diagonal
/// edges require both orthogonally adjacent cells to be nodes.
pub fn build_grid_graph(map: &WorldMap, resolution: f64) -> Result<GridGraph, MetricError> {
    let ratio = resolution / map.cell_size();
    let factor = ratio.round();
    if !(factor >= 1.0 && (ratio - factor).abs() < 1e-9) {
        return Err(MetricError::BadResolution {
            resolution,
            cell_size: map.cell_size(),
        });
    }
    let factor = factor as usize;
    let cols = map.cols().div_ceil(factor);
    let rows = map.rows().div_ceil(factor);

    let mut free = vec![true; cols * rows];
    for r in 0..map.rows() {
        for c in 0..map.cols() {
            if map.is_occupied_cell(c, r) {
                free[(r / factor) * cols + c / factor] = false;
            }
        }
    }

    let mut node_of_cell = vec![NO_NODE; cols * rows];
    let mut cells = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if free[r * cols + c] {
                node_of_cell[r * cols + c] = cells.len() as u32;
                cells.push((c as u32, r as u32));
            }
        }
    }

    let is_free = |c: i64, r: i64| -> bool {
        c >= 0 && r >= 0 && (c as usize) < cols && (r as usize) < rows && free[r as usize * cols + c as usize]
    };
    let mut offsets = Vec::with_capacity(cells.len() + 1);
    let mut neighbors = Vec::with_capacity(cells.len() * 8);
    offsets.push(0);
    for &(c, r) in &cells {
        let (c, r) = (c as i64, r as i64);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if (dc, dr) == (0, 0) || !is_free(c + dc, r + dr) {
                    continue;
                }
                let step = if dc != 0 && dr != 0 {
                    if !(is_free(c + dc, r) && is_free(c, r + dr)) {
                        continue;
                    }
                    Step::Diagonal
                } else {
                    Step::Orthogonal
                };
                let n = node_of_cell[(r + dr) as usize * cols + (c + dc) as usize];
                neighbors.push((n, step));
            }
        }
        offsets.push(neighbors.len());
    }

    Ok(GridGraph {
        resolution,
        cols,
        rows,
        node_of_cell,
        cells,
        offsets,
        neighbors,
        source_revision: map.static_revision(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::load_map;

    #[test]
    fn empty_ten_by_ten() {
        let map = WorldMap::empty(10, 10, 1.0);
        let g = build_grid_graph(&map, 1.0).unwrap();
        assert_eq!(g.node_count(), 100);
        // 2 * 9 * 10 orthogonal + 2 * 9 * 9 diagonal
        assert_eq!(g.edge_count(), 180 + 162);
    }

    #[test]
    fn hand_enumerated_five_by_five() {
        // rows listed top to bottom
        let map = load_map(
            "biam-map v1\ncell 1\n\
             S....\n\
             .#...\n\
             .#.#.\n\
             ...#.\n\
             ....G\n",
        )
        .unwrap();
        let g = build_grid_graph(&map, 1.0).unwrap();
        assert_eq!(g.node_count(), 21);
        // Counted by hand: 12 horizontal and 14 vertical adjacencies; four
        // fully free 2x2 blocks give two diagonals each.
        assert_eq!(g.edge_count(), 12 + 14 + 8);
    }

    #[test]
    fn coarse_cells_need_all_fine_cells_free() {
        let mut map = WorldMap::empty(4, 4, 1.0);
        map.set_occupied(0, 0, true);
        let g = build_grid_graph(&map, 2.0).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.node_at(0, 0), None);
        // the point in the blocked coarse cell maps to a neighbor
        let n = g.cell_of(Point::new(1.9, 0.5)).unwrap();
        assert_eq!(g.cell(n), (1, 0));
    }

    #[test]
    fn rejects_non_multiple_resolution() {
        let map = WorldMap::empty(4, 4, 1.0);
        assert!(matches!(build_grid_graph(&map, 1.5), Err(MetricError::BadResolution { .. })));
        assert!(matches!(build_grid_graph(&map, 0.5), Err(MetricError::BadResolution { .. })));
    }

    #[test]
    fn unmapped_point_deep_in_obstacle() {
        let mut map = WorldMap::empty(5, 5, 1.0);
        for c in 0..5 {
            for r in 0..5 {
                if (c, r) != (0, 0) {
                    map.set_occupied(c, r, true);
                }
            }
        }
        let g = build_grid_graph(&map, 1.0).unwrap();
        assert!(g.cell_of(Point::new(4.5, 4.5)).is_err());
        assert_eq!(g.cell_of(Point::new(1.2, 1.2)).unwrap(), 0);
    }
}
