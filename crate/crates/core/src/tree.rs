//! Rooted search tree with Euclidean costs and a bucket-grid spatial index.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::geometry::Point;
use crate::world::WorldMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("edge {0} -> {1} is blocked")]
    Blocked(Point, Point),
    #[error("making {parent} the parent of {child} would close a cycle")]
    Cycle { parent: NodeId, child: NodeId },
    #[error("position {0} is outside the tree's bounds")]
    OutOfBounds(Point),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub position: Point,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Path length from the root; `+inf` below a blocked edge.
    pub cost: f64,
    /// Set when the edge to `parent` is obstructed.
    pub edge_blocked: bool,
}

#[derive(Debug, Clone)]
struct BucketGrid {
    side: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<NodeId>>,
}

impl BucketGrid {
    fn new(width: f64, height: f64, side: f64) -> Self {
        let cols = ((width / side).ceil() as usize).max(1);
        let rows = ((height / side).ceil() as usize).max(1);
        BucketGrid {
            side,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        }
    }

    #[inline]
    fn coord(&self, v: f64, n: usize) -> usize {
        let c = (v / self.side).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(n - 1)
        }
    }

    #[inline]
    fn bucket_of(&self, p: Point) -> (usize, usize) {
        (self.coord(p.x, self.cols), self.coord(p.y, self.rows))
    }

    fn insert(&mut self, p: Point, id: NodeId) {
        let (c, r) = self.bucket_of(p);
        self.buckets[r * self.cols + c].push(id);
    }
}

/// A rooted tree. Node ids are dense indices and are never reused.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
    root: NodeId,
    goal: Option<NodeId>,
    index: BucketGrid,
    width: f64,
    height: f64,
}

impl Tree {
    /// `bucket` is the spatial index cell side; use `e_max`.
    pub fn new(root: Point, width: f64, height: f64, bucket: f64) -> Self {
        let mut index = BucketGrid::new(width, height, bucket);
        index.insert(root, NodeId(0));
        Tree {
            nodes: vec![Node {
                position: root,
                parent: None,
                children: Vec::new(),
                cost: 0.0,
                edge_blocked: false,
            }],
            root: NodeId(0),
            goal: None,
            index,
            width,
            height,
        }
    }

    /// A tree sized to `map` with index buckets of side `bucket`.
    pub fn for_map(root: Point, map: &WorldMap, bucket: f64) -> Self {
        Tree::new(root, map.width(), map.height(), bucket)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn get(&self, id: NodeId) -> Result<&Node, TreeError> {
        self.nodes.get(id.index()).ok_or(TreeError::UnknownNode(id))
    }

    #[inline]
    pub fn position(&self, id: NodeId) -> Point {
        self.nodes[id.index()].position
    }

    #[inline]
    pub fn cost(&self, id: NodeId) -> f64 {
        self.nodes[id.index()].cost
    }

    #[inline]
    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.index()].children
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Node standing on the goal point, if any.
    pub fn goal(&self) -> Option<NodeId> {
        self.goal
    }

    pub fn set_goal_node(&mut self, goal: Option<NodeId>) {
        self.goal = goal;
    }

    pub fn goal_cost(&self) -> f64 {
        self.goal.map_or(f64::INFINITY, |g| self.cost(g))
    }

    /// Parent-child pairs, children in id order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.ids().filter_map(|c| self.parent(c).map(|p| (p, c)))
    }

    fn check(&self, id: NodeId) -> Result<(), TreeError> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(TreeError::UnknownNode(id))
        }
    }

    fn edge_cost(&self, parent: NodeId, child: NodeId) -> f64 {
        let c = &self.nodes[child.index()];
        if c.edge_blocked {
            f64::INFINITY
        } else {
            self.cost(parent) + self.position(parent).distance(c.position)
        }
    }

    /// Adds a leaf under `parent` after checking the edge against `map`.
    pub fn insert(&mut self, parent: NodeId, x: Point, map: &WorldMap) -> Result<NodeId, TreeError> {
        self.check(parent)?;
        let from = self.position(parent);
        if !map.segment_clear(from, x) {
            return Err(TreeError::Blocked(from, x));
        }
        self.insert_unchecked(parent, x)
    }

    /// Adds a leaf without a collision check. The caller has already
    /// verified the edge.
    pub fn insert_unchecked(&mut self, parent: NodeId, x: Point) -> Result<NodeId, TreeError> {
        self.check(parent)?;
        if !(x.is_finite() && x.x >= 0.0 && x.y >= 0.0 && x.x <= self.width && x.y <= self.height) {
            return Err(TreeError::OutOfBounds(x));
        }
        let id = NodeId(self.nodes.len() as u32);
        let cost = self.cost(parent) + self.position(parent).distance(x);
        self.nodes.push(Node {
            position: x,
            parent: Some(parent),
            children: Vec::new(),
            cost,
            edge_blocked: false,
        });
        self.nodes[parent.index()].children.push(id);
        self.index.insert(x, id);
        Ok(id)
    }

    /// True when `a` lies on the path from `b` to the root (a node is its own ancestor).
    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        let mut cur = Some(b);
        let mut steps = 0;
        while let Some(n) = cur {
            if n == a {
                return true;
            }
            steps += 1;
            if steps > self.nodes.len() {
                return false;
            }
            cur = self.parent(n);
        }
        false
    }

    /// Reparents `child` under `new_parent` and recomputes the subtree's costs.
    pub fn update_edge(&mut self, new_parent: NodeId, child: NodeId, map: &WorldMap) -> Result<(), TreeError> {
        self.check(new_parent)?;
        self.check(child)?;
        let (a, b) = (self.position(new_parent), self.position(child));
        if !map.segment_clear(a, b) {
            return Err(TreeError::Blocked(a, b));
        }
        self.reparent(new_parent, child)
    }

    /// [`Tree::update_edge`] without the collision check.
    pub fn reparent(&mut self, new_parent: NodeId, child: NodeId) -> Result<(), TreeError> {
        self.check(new_parent)?;
        self.check(child)?;
        if child == self.root || self.is_ancestor(child, new_parent) {
            return Err(TreeError::Cycle {
                parent: new_parent,
                child,
            });
        }
        if let Some(old) = self.parent(child) {
            let siblings = &mut self.nodes[old.index()].children;
            if let Some(i) = siblings.iter().position(|&c| c == child) {
                siblings.swap_remove(i);
            }
        }
        self.nodes[new_parent.index()].children.push(child);
        let node = &mut self.nodes[child.index()];
        node.parent = Some(new_parent);
        node.edge_blocked = false;
        self.refresh_subtree(child);
        Ok(())
    }

    /// Recomputes costs below and including `id` from its parent's cost.
    pub fn refresh_subtree(&mut self, id: NodeId) {
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            let cost = match self.parent(n) {
                Some(p) => self.edge_cost(p, n),
                None => 0.0,
            };
            self.nodes[n.index()].cost = cost;
            stack.extend_from_slice(&self.nodes[n.index()].children);
        }
    }

    /// Root-to-`x` path and its cost.
    pub fn cost_and_path(&self, x: NodeId) -> Result<(f64, Vec<NodeId>), TreeError> {
        self.check(x)?;
        let mut path = vec![x];
        let mut cur = x;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
            if path.len() > self.nodes.len() {
                break;
            }
        }
        path.reverse();
        Ok((self.cost(x), path))
    }

    /// Makes `new_root` the root by reversing the edges on the path to it.
    /// Blocked flags travel with their edges.
    pub fn set_root(&mut self, new_root: NodeId) -> Result<(), TreeError> {
        self.check(new_root)?;
        if new_root == self.root {
            return Ok(());
        }
        let (_, path) = self.cost_and_path(new_root)?;
        // path = [old_root, ..., new_root]; reverse each edge (path[i] -> path[i+1])
        for w in path.windows(2) {
            let (p, c) = (w[0], w[1]);
            let blocked = self.nodes[c.index()].edge_blocked;
            let pc = &mut self.nodes[p.index()].children;
            if let Some(i) = pc.iter().position(|&x| x == c) {
                pc.swap_remove(i);
            }
            self.nodes[c.index()].children.push(p);
            let pn = &mut self.nodes[p.index()];
            pn.parent = Some(c);
            pn.edge_blocked = blocked;
        }
        let rn = &mut self.nodes[new_root.index()];
        rn.parent = None;
        rn.edge_blocked = false;
        self.root = new_root;
        self.refresh_subtree(new_root);
        Ok(())
    }

    /// Rechecks every edge against `map` and recomputes costs. Returns the
    /// children of edges that became blocked.
    pub fn revalidate_edges(&mut self, map: &WorldMap) -> Vec<NodeId> {
        let mut newly = Vec::new();
        for i in 0..self.nodes.len() {
            let Some(p) = self.nodes[i].parent else { continue };
            let blocked = !map.segment_clear(self.position(p), self.nodes[i].position);
            if blocked && !self.nodes[i].edge_blocked {
                newly.push(NodeId(i as u32));
            }
            self.nodes[i].edge_blocked = blocked;
        }
        self.refresh_subtree(self.root);
        newly
    }

    /// Closest node by Euclidean distance, ignoring obstacles. Ties go to the lower id.
    pub fn nearest_node(&self, x: Point) -> Option<NodeId> {
        let g = &self.index;
        let (cx, cy) = g.bucket_of(x);
        let mut best: Option<(f64, NodeId)> = None;
        let max_ring = g.cols.max(g.rows);
        for ring in 0..=max_ring {
            let (c0, c1) = (cx as i64 - ring as i64, cx as i64 + ring as i64);
            let (r0, r1) = (cy as i64 - ring as i64, cy as i64 + ring as i64);
            for r in r0..=r1 {
                if r < 0 || r >= g.rows as i64 {
                    continue;
                }
                let on_edge_row = r == r0 || r == r1;
                let mut c = c0;
                while c <= c1 {
                    if c >= 0 && c < g.cols as i64 {
                        for &id in &g.buckets[r as usize * g.cols + c as usize] {
                            let d = self.position(id).distance_squared(x);
                            if best.is_none_or(|(bd, bid)| d < bd || (d == bd && id < bid)) {
                                best = Some((d, id));
                            }
                        }
                    }
                    // interior rows only need the two edge columns
                    c = if on_edge_row || c == c1 { c + 1 } else { c1 };
                }
            }
            if let Some((bd, _)) = best {
                let reach = ring as f64 * g.side;
                if bd <= reach * reach {
                    break;
                }
            }
        }
        best.map(|(_, id)| id)
    }

    /// The nearest node, provided the segment from it to `x` is free.
    pub fn nearest(&self, x: Point, map: &WorldMap) -> Option<NodeId> {
        let n = self.nearest_node(x)?;
        map.segment_clear(self.position(n), x).then_some(n)
    }

    /// Appends to `out` every node with distance to `x` at most `radius`, in id order.
    pub fn nearby_into(&self, x: Point, radius: f64, out: &mut Vec<NodeId>) {
        out.clear();
        let g = &self.index;
        let (c0, r0) = g.bucket_of(Point::new(x.x - radius, x.y - radius));
        let (c1, r1) = g.bucket_of(Point::new(x.x + radius, x.y + radius));
        let r2 = radius * radius;
        for r in r0..=r1 {
            for c in c0..=c1 {
                for &id in &g.buckets[r * g.cols + c] {
                    if self.position(id).distance_squared(x) <= r2 {
                        out.push(id);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    pub fn nearby(&self, x: Point, radius: f64) -> Vec<NodeId> {
        let mut out = Vec::new();
        self.nearby_into(x, radius, &mut out);
        out
    }

    /// Number of nodes within `radius` of `x`, counting stops at `cap`.
    pub fn count_within(&self, x: Point, radius: f64, cap: usize) -> usize {
        let g = &self.index;
        let (c0, r0) = g.bucket_of(Point::new(x.x - radius, x.y - radius));
        let (c1, r1) = g.bucket_of(Point::new(x.x + radius, x.y + radius));
        let r2 = radius * radius;
        let mut n = 0;
        for r in r0..=r1 {
            for c in c0..=c1 {
                for &id in &g.buckets[r * g.cols + c] {
                    if self.position(id).distance_squared(x) <= r2 {
                        n += 1;
                        if n >= cap {
                            return n;
                        }
                    }
                }
            }
        }
        n
    }

    /// Checks structure, cost consistency (to 1e-9) and the spatial index.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.nodes.len();
        if self.parent(self.root).is_some() {
            return Err(format!("root {} has a parent", self.root));
        }
        if self.cost(self.root) != 0.0 {
            return Err("root cost is not zero".into());
        }
        for id in self.ids() {
            let node = self.node(id);
            match node.parent {
                None if id != self.root => return Err(format!("{id} has no parent but is not the root")),
                None => {}
                Some(p) => {
                    if !self.contains(p) || !self.children(p).contains(&id) {
                        return Err(format!("{id} missing from its parent's children"));
                    }
                    let expect = self.edge_cost(p, id);
                    let ok = if expect.is_finite() {
                        (node.cost - expect).abs() <= 1e-9
                    } else {
                        node.cost == f64::INFINITY
                    };
                    if !ok {
                        return Err(format!("{id}: cost {} but parent gives {expect}", node.cost));
                    }
                }
            }
            for &c in &node.children {
                if self.parent(c) != Some(id) {
                    return Err(format!("{c} listed as child of {id} but has another parent"));
                }
            }
            let mut cur = id;
            let mut steps = 0;
            while let Some(p) = self.parent(cur) {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(format!("cycle above {id}"));
                }
            }
            if cur != self.root {
                return Err(format!("{id} does not reach the root"));
            }
        }
        let mut indexed: Vec<u32> = self.index.buckets.iter().flatten().map(|id| id.0).collect();
        indexed.sort_unstable();
        if indexed.len() != n || indexed.iter().enumerate().any(|(i, &id)| id as usize != i) {
            return Err("spatial index does not match node set".into());
        }
        Ok(())
    }

    /// One line per node: `id parent_id x y cost`; the root's parent is `-`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for id in self.ids() {
            let node = self.node(id);
            let parent = node.parent.map_or("-".to_string(), |p| p.0.to_string());
            let _ = writeln!(
                out,
                "{} {} {:.6} {:.6} {:.6}",
                id.0, parent, node.position.x, node.position.y, node.cost
            );
        }
        out
    }
}
