//! Occupancy-grid world with runtime disc obstacles.
//!
//! Static geometry is a boolean grid of square cells. Cells are treated as
//! closed squares, so a point on the boundary between a free and an occupied
//! cell is obstructed. Dynamic obstacles are open discs: a point is inside a
//! disc iff its distance to the center is strictly less than the radius.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{point_segment_distance, Point};

const HEADER: &str = "biam-map v1";
const MAX_SAMPLE_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscId(pub u32);

impl fmt::Display for DiscId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscObstacle {
    pub id: DiscId,
    pub center: Point,
    pub radius: f64,
}

impl DiscObstacle {
    pub fn contains(&self, p: Point) -> bool {
        self.center.distance(p) < self.radius
    }

    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        point_segment_distance(self.center, a, b) < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObstacleChange {
    Add { center: Point, radius: f64 },
    Remove(DiscId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("point {0} lies outside the map")]
    OutOfBounds(Point),
    #[error("no obstacle with id {0}")]
    UnknownObstacle(DiscId),
    #[error("obstacle radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("map has no free space to sample from")]
    NoFreeSpace,
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct MapParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected header `{HEADER}`")]
    BadHeader,
    #[error("expected `cell <size>` with a positive size")]
    BadCellSize,
    #[error("map has no rows")]
    Empty,
    #[error("row has {found} glyphs, expected {expected}")]
    RaggedRow { expected: usize, found: usize },
    #[error("unknown glyph `{0}`")]
    UnknownGlyph(char),
    #[error("duplicate `{0}` marker")]
    DuplicateMarker(char),
    #[error("missing `{0}` marker")]
    MissingMarker(char),
}

/// The bundled benchmark scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    BugTrap,
    Maze,
    Office,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::BugTrap, Scenario::Maze, Scenario::Office];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::BugTrap => "bug_trap",
            Scenario::Maze => "maze",
            Scenario::Office => "office",
        }
    }

    pub fn document(self) -> &'static str {
        match self {
            Scenario::BugTrap => include_str!("../scenarios/bug_trap.map"),
            Scenario::Maze => include_str!("../scenarios/maze.map"),
            Scenario::Office => include_str!("../scenarios/office.map"),
        }
    }

    pub fn load(self) -> WorldMap {
        load_map(self.document()).expect("bundled scenario documents are valid")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bug_trap" => Ok(Scenario::BugTrap),
            "maze" => Ok(Scenario::Maze),
            "office" => Ok(Scenario::Office),
            other => Err(WorldError::UnknownScenario(other.to_string())),
        }
    }
}

pub fn builtin_scenario(name: &str) -> Result<WorldMap, WorldError> {
    Ok(name.parse::<Scenario>()?.load())
}

#[derive(Debug, Clone)]
pub struct WorldMap {
    cols: usize,
    rows: usize,
    cell_size: f64,
    /// Row-major, row 0 is the bottom row (y grows upward).
    occupied: Vec<bool>,
    occupied_count: usize,
    discs: Vec<DiscObstacle>,
    next_disc_id: u32,
    revision: u64,
    static_revision: u64,
    start: Option<Point>,
    goal: Option<Point>,
}

impl WorldMap {
    pub fn empty(cols: usize, rows: usize, cell_size: f64) -> Self {
        assert!(cols > 0 && rows > 0 && cell_size > 0.0);
        WorldMap {
            cols,
            rows,
            cell_size,
            occupied: vec![false; cols * rows],
            occupied_count: 0,
            discs: Vec::new(),
            next_disc_id: 0,
            revision: 0,
            static_revision: 0,
            start: None,
            goal: None,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.cell_size
    }

    /// Bumped on every mutation, static or dynamic.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Bumped only when static cells change.
    pub fn static_revision(&self) -> u64 {
        self.static_revision
    }

    pub fn start(&self) -> Option<Point> {
        self.start
    }

    pub fn goal(&self) -> Option<Point> {
        self.goal
    }

    /// Id the next `add_disc` will hand out.
    pub fn next_disc_id(&self) -> DiscId {
        DiscId(self.next_disc_id)
    }

    pub fn discs(&self) -> &[DiscObstacle] {
        &self.discs
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width() && p.y <= self.height()
    }

    pub fn is_occupied_cell(&self, col: usize, row: usize) -> bool {
        self.occupied[row * self.cols + col]
    }

    pub fn set_occupied(&mut self, col: usize, row: usize, occupied: bool) {
        let idx = row * self.cols + col;
        if self.occupied[idx] != occupied {
            self.occupied[idx] = occupied;
            if occupied {
                self.occupied_count += 1;
            } else {
                self.occupied_count -= 1;
            }
            self.revision += 1;
            self.static_revision += 1;
        }
    }

    pub fn free_cell_count(&self) -> usize {
        self.occupied.len() - self.occupied_count
    }

    /// Center of cell `(col, row)`.
    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        Point::new(
            (col as f64 + 0.5) * self.cell_size,
            (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_of(&self, p: Point) -> (usize, usize) {
        let c = ((p.x / self.cell_size).floor().max(0.0) as usize).min(self.cols - 1);
        let r = ((p.y / self.cell_size).floor().max(0.0) as usize).min(self.rows - 1);
        (c, r)
    }

    /// Closed range of cell indices whose closed extent contains coordinate
    /// `v` (in cell units), clamped to `0..n`.
    fn touching_range(v: f64, n: usize) -> (usize, usize) {
        let lo = (v.ceil() - 1.0).max(0.0) as usize;
        let hi = (v.floor().max(0.0) as usize).min(n - 1);
        (lo.min(n - 1), hi)
    }

    fn static_free_point(&self, p: Point) -> bool {
        let (c0, c1) = Self::touching_range(p.x / self.cell_size, self.cols);
        let (r0, r1) = Self::touching_range(p.y / self.cell_size, self.rows);
        for r in r0..=r1 {
            for c in c0..=c1 {
                if self.is_occupied_cell(c, r) {
                    return false;
                }
            }
        }
        true
    }

    /// True iff `p` is inside the map and lies in free space.
    pub fn is_free(&self, p: Point) -> bool {
        self.in_bounds(p)
            && self.static_free_point(p)
            && !self.discs.iter().any(|d| d.contains(p))
    }

    /// Whether every point of segment `a b` is free (`FreePath`).
    ///
    /// Grid cells are tested by exact supercover: every closed cell the
    /// segment touches must be free. Discs use exact point-to-segment
    /// distance.
    pub fn segment_free(&self, a: Point, b: Point) -> Result<bool, WorldError> {
        if !self.in_bounds(a) {
            return Err(WorldError::OutOfBounds(a));
        }
        if !self.in_bounds(b) {
            return Err(WorldError::OutOfBounds(b));
        }
        Ok(self.segment_static_free(a, b) && !self.discs.iter().any(|d| d.intersects_segment(a, b)))
    }

    /// `segment_free` for callers that already know both ends are in bounds;
    /// out-of-bounds ends count as blocked.
    #[inline]
    pub fn segment_clear(&self, a: Point, b: Point) -> bool {
        self.segment_free(a, b).unwrap_or(false)
    }

    /// Segment test against static cells only.
    pub fn segment_static_free(&self, a: Point, b: Point) -> bool {
        const EPS: f64 = 1e-9;
        let cs = self.cell_size;
        let (ax, ay, bx, by) = (a.x / cs, a.y / cs, b.x / cs, b.y / cs);
        let (xmin, xmax) = if ax <= bx { (ax, bx) } else { (bx, ax) };
        let c0 = Self::touching_range(xmin, self.cols).0;
        let c1 = Self::touching_range(xmax, self.cols).1;
        let dx = bx - ax;
        for c in c0..=c1 {
            let x0 = xmin.max(c as f64);
            let x1 = xmax.min(c as f64 + 1.0);
            if x0 > x1 {
                continue;
            }
            let (ylo, yhi) = if dx == 0.0 {
                (ay.min(by), ay.max(by))
            } else {
                let slope = (by - ay) / dx;
                let y0 = ay + (x0 - ax) * slope;
                let y1 = ay + (x1 - ax) * slope;
                (y0.min(y1), y0.max(y1))
            };
            let (r0, _) = Self::touching_range(ylo - EPS, self.rows);
            let (_, r1) = Self::touching_range(yhi + EPS, self.rows);
            for r in r0..=r1 {
                if self.is_occupied_cell(c, r) {
                    return false;
                }
            }
        }
        true
    }

    pub fn add_disc(&mut self, center: Point, radius: f64) -> Result<(DiscId, u64), WorldError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(WorldError::InvalidRadius(radius));
        }
        if !self.in_bounds(center) {
            return Err(WorldError::OutOfBounds(center));
        }
        let id = DiscId(self.next_disc_id);
        self.next_disc_id += 1;
        self.discs.push(DiscObstacle { id, center, radius });
        self.revision += 1;
        Ok((id, self.revision))
    }

    pub fn remove_disc(&mut self, id: DiscId) -> Result<u64, WorldError> {
        let idx = self
            .discs
            .iter()
            .position(|d| d.id == id)
            .ok_or(WorldError::UnknownObstacle(id))?;
        self.discs.remove(idx);
        self.revision += 1;
        Ok(self.revision)
    }

    /// Applies one obstacle change and returns the new revision.
    pub fn mutate_obstacles(&mut self, change: ObstacleChange) -> Result<u64, WorldError> {
        match change {
            ObstacleChange::Add { center, radius } => self.add_disc(center, radius).map(|(_, rev)| rev),
            ObstacleChange::Remove(id) => self.remove_disc(id),
        }
    }

    /// Uniform sample of free space by rejection over the bounding box.
    pub fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point, WorldError> {
        if self.free_cell_count() == 0 {
            return Err(WorldError::NoFreeSpace);
        }
        let (w, h) = (self.width(), self.height());
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let p = Point::new(rng.random::<f64>() * w, rng.random::<f64>() * h);
            if self.is_free(p) {
                return Ok(p);
            }
        }
        Err(WorldError::NoFreeSpace)
    }

    /// Serializes static geometry and markers in the scenario format.
    pub fn to_document(&self) -> String {
        let mut out = String::with_capacity((self.cols + 1) * self.rows + 32);
        out.push_str(HEADER);
        out.push('\n');
        out.push_str(&format!("cell {}\n", self.cell_size));
        let marker_cell = |p: Option<Point>| p.map(|p| self.cell_of(p));
        let s = marker_cell(self.start);
        let g = marker_cell(self.goal);
        for r in (0..self.rows).rev() {
            for c in 0..self.cols {
                let glyph = if s == Some((c, r)) {
                    'S'
                } else if g == Some((c, r)) {
                    'G'
                } else if self.is_occupied_cell(c, r) {
                    '#'
                } else {
                    '.'
                };
                out.push(glyph);
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the static geometry and cell size.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.cols as u64).to_le_bytes());
        hasher.update((self.rows as u64).to_le_bytes());
        hasher.update(self.cell_size.to_le_bytes());
        let packed: Vec<u8> = self.occupied.iter().map(|&o| o as u8).collect();
        hasher.update(&packed);
        hasher.finalize().into()
    }
}

/// Parses a scenario document.
pub fn load_map(document: &str) -> Result<WorldMap, MapParseError> {
    let err = |line, column, kind| MapParseError { line, column, kind };
    let mut lines = document.split('\n').enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, HEADER)) => {}
        _ => return Err(err(1, 1, ParseErrorKind::BadHeader)),
    }
    let cell_size = match lines.next() {
        Some((_, l)) => l
            .strip_prefix("cell ")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| *v > 0.0 && v.is_finite())
            .ok_or(err(2, 1, ParseErrorKind::BadCellSize))?,
        None => return Err(err(2, 1, ParseErrorKind::BadCellSize)),
    };

    let mut rows: Vec<(usize, &str)> = lines.collect();
    // a trailing newline leaves one empty final entry
    if rows.last().is_some_and(|(_, l)| l.is_empty()) {
        rows.pop();
    }
    if rows.is_empty() {
        return Err(err(3, 1, ParseErrorKind::Empty));
    }
    let width = rows[0].1.chars().count();
    if width == 0 {
        return Err(err(rows[0].0, 1, ParseErrorKind::Empty));
    }
    let height = rows.len();
    let mut map = WorldMap::empty(width, height, cell_size);
    let mut start: Option<(usize, usize, usize, usize)> = None;
    let mut goal: Option<(usize, usize, usize, usize)> = None;

    for (doc_row, (line_no, text)) in rows.iter().enumerate() {
        let found = text.chars().count();
        if found != width {
            return Err(err(*line_no, found.min(width) + 1, ParseErrorKind::RaggedRow { expected: width, found }));
        }
        let r = height - 1 - doc_row;
        for (c, glyph) in text.chars().enumerate() {
            let column = c + 1;
            match glyph {
                '.' => {}
                '#' => {
                    map.occupied[r * width + c] = true;
                    map.occupied_count += 1;
                }
                'S' | 'G' => {
                    let slot = if glyph == 'S' { &mut start } else { &mut goal };
                    if slot.is_some() {
                        return Err(err(*line_no, column, ParseErrorKind::DuplicateMarker(glyph)));
                    }
                    *slot = Some((c, r, *line_no, column));
                }
                other => return Err(err(*line_no, column, ParseErrorKind::UnknownGlyph(other))),
            }
        }
    }
    let last_line = rows.last().map(|(l, _)| *l).unwrap_or(3);
    let (sc, sr, ..) = start.ok_or(err(last_line, 1, ParseErrorKind::MissingMarker('S')))?;
    let (gc, gr, ..) = goal.ok_or(err(last_line, 1, ParseErrorKind::MissingMarker('G')))?;
    map.start = Some(map.cell_center(sc, sr));
    map.goal = Some(map.cell_center(gc, gr));
    Ok(map)
}
