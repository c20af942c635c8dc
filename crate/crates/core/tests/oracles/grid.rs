use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use biam_core::world::WorldMap;
use rand::Rng;

const STEPS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Path length as `a + b*sqrt(2)` grid steps, compared exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Len {
    pub a: i64,
    pub b: i64,
}

impl Len {
    pub const ZERO: Len = Len { a: 0, b: 0 };

    pub fn add(self, o: Len) -> Len {
        Len { a: self.a + o.a, b: self.b + o.b }
    }

    pub fn to_f64(self) -> f64 {
        self.a as f64 + self.b as f64 * SQRT_2
    }
}

/// Exact order of `a1 + b1 r2` against `a2 + b2 r2`.
pub fn cmp_len(x: Len, y: Len) -> Ordering {
    // sign of (x.a - y.a) + (x.b - y.b) * sqrt(2)
    let (p, q) = (x.a - y.a, x.b - y.b);
    let sign = |v: i64| v.cmp(&0);
    match (sign(p), sign(q)) {
        (Ordering::Equal, s) | (s, Ordering::Equal) => s,
        (sp, sq) if sp == sq => sp,
        (Ordering::Greater, _) => (p * p).cmp(&(2 * q * q)),
        _ => (2 * q * q).cmp(&(p * p)),
    }
}

fn free(map: &WorldMap, c: i64, r: i64) -> bool {
    c >= 0 && r >= 0 && (c as usize) < map.cols() && (r as usize) < map.rows() && !map.is_occupied_cell(c as usize, r as usize)
}

/// 8-connected moves out of a free cell; a diagonal may not clip an occupied cell.
fn moves(map: &WorldMap, c: i64, r: i64) -> impl Iterator<Item = (i64, i64, Len)> + '_ {
    STEPS.iter().filter_map(move |&(dc, dr)| {
        let (nc, nr) = (c + dc, r + dr);
        if !free(map, nc, nr) {
            return None;
        }
        let diagonal = dc != 0 && dr != 0;
        if diagonal && !(free(map, c + dc, r) && free(map, c, r + dr)) {
            return None;
        }
        Some((nc, nr, if diagonal { Len { a: 0, b: 1 } } else { Len { a: 1, b: 0 } }))
    })
}

/// All-pairs lengths over the free cells of `map` by Floyd-Warshall, in
/// grid steps. Index is `row * cols + col`.
#[allow(clippy::needless_range_loop)]
pub fn floyd_warshall(map: &WorldMap) -> Vec<Vec<Option<Len>>> {
    let (cols, rows) = (map.cols() as i64, map.rows() as i64);
    let n = (cols * rows) as usize;
    let mut d = vec![vec![None; n]; n];
    for r in 0..rows {
        for c in 0..cols {
            if !free(map, c, r) {
                continue;
            }
            let i = (r * cols + c) as usize;
            d[i][i] = Some(Len::ZERO);
            for (nc, nr, step) in moves(map, c, r) {
                d[i][(nr * cols + nc) as usize] = Some(step);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i][k] else { continue };
            for j in 0..n {
                let Some(kj) = d[k][j] else { continue };
                let via = ik.add(kj);
                if d[i][j].is_none_or(|cur| cmp_len(via, cur) == Ordering::Less) {
                    d[i][j] = Some(via);
                }
            }
        }
    }
    d
}

/// Shortest 8-connected route between two cell centres in metres, by A*
/// with exact step counts; `None` when the cells are not connected.
pub fn grid_astar(map: &WorldMap, from: (usize, usize), to: (usize, usize)) -> Option<f64> {
    let cols = map.cols() as i64;
    let idx = |c: i64, r: i64| (r * cols + c) as usize;
    // octile distance, kept exact
    let h = |c: i64, r: i64| {
        let (dx, dy) = ((c - to.0 as i64).abs(), (r - to.1 as i64).abs());
        Len { a: dx.max(dy) - dx.min(dy), b: dx.min(dy) }
    };
    #[derive(PartialEq, Eq)]
    struct Entry(Len, i64, i64);
    impl Ord for Entry {
        fn cmp(&self, o: &Self) -> Ordering {
            cmp_len(self.0, o.0).then((self.1, self.2).cmp(&(o.1, o.2)))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    let mut g: Vec<Option<Len>> = vec![None; map.cols() * map.rows()];
    let mut heap = BinaryHeap::new();
    let (sc, sr) = (from.0 as i64, from.1 as i64);
    if !free(map, sc, sr) {
        return None;
    }
    g[idx(sc, sr)] = Some(Len::ZERO);
    heap.push(Reverse(Entry(h(sc, sr), sc, sr)));
    while let Some(Reverse(Entry(f, c, r))) = heap.pop() {
        let gc = g[idx(c, r)].unwrap();
        if f != gc.add(h(c, r)) {
            continue;
        }
        if (c as usize, r as usize) == to {
            return Some(gc.to_f64() * map.cell_size());
        }
        for (nc, nr, step) in moves(map, c, r) {
            let ng = gc.add(step);
            if g[idx(nc, nr)].is_none_or(|cur| cmp_len(ng, cur) == Ordering::Less) {
                g[idx(nc, nr)] = Some(ng);
                heap.push(Reverse(Entry(ng.add(h(nc, nr)), nc, nr)));
            }
        }
    }
    None
}

pub fn random_map<R: Rng>(rng: &mut R, cols: usize, rows: usize, density: f64) -> WorldMap {
    let mut map = WorldMap::empty(cols, rows, 1.0);
    for r in 0..rows {
        for c in 0..cols {
            if rng.random::<f64>() < density {
                map.set_occupied(c, r, true);
            }
        }
    }
    map
}

pub fn walls(cols: usize, rows: usize, cells: &[(usize, usize)]) -> WorldMap {
    let mut map = WorldMap::empty(cols, rows, 1.0);
    for &(c, r) in cells {
        map.set_occupied(c, r, true);
    }
    map
}

/// True when the free cells form one 4-connected component.
pub fn connected(map: &WorldMap) -> bool {
    let (cols, rows) = (map.cols(), map.rows());
    let start = (0..rows).flat_map(|r| (0..cols).map(move |c| (c, r))).find(|&(c, r)| !map.is_occupied_cell(c, r));
    let Some(start) = start else { return false };
    let mut seen = vec![false; cols * rows];
    let mut stack = vec![start];
    seen[start.1 * cols + start.0] = true;
    let mut count = 1;
    while let Some((c, r)) = stack.pop() {
        for (dc, dr) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nc, nr) = (c as i64 + dc, r as i64 + dr);
            if nc < 0 || nr < 0 || nc >= cols as i64 || nr >= rows as i64 {
                continue;
            }
            let (nc, nr) = (nc as usize, nr as usize);
            if !map.is_occupied_cell(nc, nr) && !seen[nr * cols + nc] {
                seen[nr * cols + nc] = true;
                count += 1;
                stack.push((nc, nr));
            }
        }
    }
    count == map.free_cell_count()
}
