//! Three-dimensional R-tree over (x, y, t) and near-repeat pair generation.
//!
//! Trees are bulk loaded with sort-tile-recursive packing. Pair generation
//! uses an axis-aligned box predicate (`|dx| <= r_x`, `|dy| <= r_y`,
//! `|dt| <= r_t`, closed bounds); the Knox test in [`crate::knox`] uses
//! Euclidean spatial distance instead.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::Event;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct STPoint {
    pub event_id: u32,
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl STPoint {
    fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.t]
    }
}

impl From<&Event> for STPoint {
    fn from(e: &Event) -> Self {
        STPoint {
            event_id: e.id,
            x: e.x,
            y: e.y,
            t: e.t,
        }
    }
}

/// Closed axis-aligned box over (x, y, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Box3 {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        debug_assert!((0..3).all(|a| min[a] <= max[a]), "inverted box");
        Box3 { min, max }
    }

    pub fn point(p: &STPoint) -> Self {
        let c = p.coords();
        Box3 { min: c, max: c }
    }

    /// Box of half-extents `r` centred on `p`.
    pub fn around(p: &STPoint, r: [f64; 3]) -> Self {
        let c = p.coords();
        Box3 {
            min: [c[0] - r[0], c[1] - r[1], c[2] - r[2]],
            max: [c[0] + r[0], c[1] + r[1], c[2] + r[2]],
        }
    }

    fn empty() -> Self {
        Box3 {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    fn expand(&mut self, other: &Box3) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(other.min[a]);
            self.max[a] = self.max[a].max(other.max[a]);
        }
    }

    fn union(&self, other: &Box3) -> Box3 {
        let mut b = *self;
        b.expand(other);
        b
    }

    pub fn intersects(&self, other: &Box3) -> bool {
        (0..3).all(|a| self.min[a] <= other.max[a] && other.min[a] <= self.max[a])
    }

    pub fn contains_box(&self, other: &Box3) -> bool {
        (0..3).all(|a| self.min[a] <= other.min[a] && other.max[a] <= self.max[a])
    }

    pub fn contains_point(&self, p: &STPoint) -> bool {
        let c = p.coords();
        (0..3).all(|a| self.min[a] <= c[a] && c[a] <= self.max[a])
    }

    fn volume(&self) -> f64 {
        (0..3).map(|a| self.max[a] - self.min[a]).product()
    }

    fn center(&self, axis: usize) -> f64 {
        0.5 * (self.min[axis] + self.max[axis])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RTreeParams {
    pub max_entries: usize,
    pub min_entries: usize,
}

impl Default for RTreeParams {
    fn default() -> Self {
        RTreeParams {
            max_entries: 16,
            min_entries: 6,
        }
    }
}

impl RTreeParams {
    /// Fanout `max_entries` with min fill at 3/8 of it.
    pub fn with_fanout(max_entries: usize) -> Self {
        RTreeParams {
            max_entries,
            min_entries: (max_entries * 3 / 8).max(2),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_entries < 4 || self.min_entries < 2 || self.min_entries * 2 > self.max_entries {
            return Err(Error::Config(format!(
                "R-tree needs 2 <= m <= M/2 and M >= 4 (got m={}, M={})",
                self.min_entries, self.max_entries
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf(Vec<STPoint>),
    Internal(Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    bbox: Box3,
    kind: NodeKind,
}

impl Node {
    fn len(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf(p) => p.len(),
            NodeKind::Internal(c) => c.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RTree3 {
    nodes: Vec<Node>,
    root: usize,
    height: usize,
    len: usize,
    params: RTreeParams,
}

/// Splits `sizes.len()` consecutive node groups over `items` by
/// sort-tile-recursive slicing. On return `items` is ordered so that
/// chunking it by `sizes` yields the packed nodes.
fn str_pack<T>(items: &mut [T], sizes: &[usize], axis: usize, key: &impl Fn(&T, usize) -> f64) {
    items.sort_by(|a, b| key(a, axis).total_cmp(&key(b, axis)));
    if axis == 2 || sizes.len() <= 1 {
        return;
    }
    let nodes = sizes.len();
    let dims = (3 - axis) as u32;
    let mut slabs = 1usize;
    while slabs.pow(dims) < nodes {
        slabs += 1;
    }
    let mut node_start = 0;
    let mut item_start = 0;
    for s in 0..slabs {
        let count = nodes / slabs + usize::from(s < nodes % slabs);
        if count == 0 {
            continue;
        }
        let group = &sizes[node_start..node_start + count];
        let n_items: usize = group.iter().sum();
        str_pack(&mut items[item_start..item_start + n_items], group, axis + 1, key);
        node_start += count;
        item_start += n_items;
    }
}

/// Even split of `n` items into the fewest nodes of at most `max` entries.
fn node_sizes(n: usize, max: usize) -> Vec<usize> {
    let nodes = n.div_ceil(max);
    (0..nodes)
        .map(|i| n / nodes + usize::from(i < n % nodes))
        .collect()
}

impl RTree3 {
    /// Bulk loads a tree. Deterministic for a fixed input order.
    pub fn build(points: &[STPoint], params: RTreeParams) -> Result<Self> {
        params.validate()?;
        if points.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if let Some(p) = points.iter().find(|p| !p.coords().iter().all(|c| c.is_finite())) {
            return Err(Error::Config(format!("non-finite coordinates for event {}", p.event_id)));
        }
        let mut tree = RTree3 {
            nodes: Vec::new(),
            root: 0,
            height: 0,
            len: points.len(),
            params,
        };

        let mut pts = points.to_vec();
        let sizes = node_sizes(pts.len(), params.max_entries);
        str_pack(&mut pts, &sizes, 0, &|p: &STPoint, a| p.coords()[a]);
        let mut level: Vec<usize> = Vec::with_capacity(sizes.len());
        let mut rest = pts.as_slice();
        for &s in &sizes {
            let (chunk, tail) = rest.split_at(s);
            rest = tail;
            let mut bbox = Box3::empty();
            for p in chunk {
                bbox.expand(&Box3::point(p));
            }
            tree.nodes.push(Node {
                bbox,
                kind: NodeKind::Leaf(chunk.to_vec()),
            });
            level.push(tree.nodes.len() - 1);
        }

        while level.len() > 1 {
            let sizes = node_sizes(level.len(), params.max_entries);
            let nodes = &tree.nodes;
            str_pack(&mut level, &sizes, 0, &|&i: &usize, a| nodes[i].bbox.center(a));
            let mut next = Vec::with_capacity(sizes.len());
            let mut rest = level.as_slice();
            for &s in &sizes {
                let (chunk, tail) = rest.split_at(s);
                rest = tail;
                let mut bbox = Box3::empty();
                for &c in chunk {
                    bbox.expand(&tree.nodes[c].bbox);
                }
                tree.nodes.push(Node {
                    bbox,
                    kind: NodeKind::Internal(chunk.to_vec()),
                });
                next.push(tree.nodes.len() - 1);
            }
            level = next;
            tree.height += 1;
        }
        tree.root = level[0];
        Ok(tree)
    }

    /// Empty tree for incremental insertion.
    pub fn empty(params: RTreeParams) -> Result<Self> {
        params.validate()?;
        Ok(RTree3 {
            nodes: vec![Node {
                bbox: Box3::empty(),
                kind: NodeKind::Leaf(Vec::new()),
            }],
            root: 0,
            height: 0,
            len: 0,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of edges from the root to a leaf; a single-leaf tree has height 0.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn params(&self) -> RTreeParams {
        self.params
    }

    pub fn bounds(&self) -> Box3 {
        self.nodes[self.root].bbox
    }

    /// Calls `visit` for every point inside the closed box.
    pub fn visit_range(&self, query: &Box3, mut visit: impl FnMut(&STPoint)) {
        if self.len == 0 {
            return;
        }
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.bbox.intersects(query) {
                continue;
            }
            match &node.kind {
                NodeKind::Leaf(points) => {
                    for p in points.iter().filter(|p| query.contains_point(p)) {
                        visit(p);
                    }
                }
                NodeKind::Internal(children) => stack.extend(children.iter().copied()),
            }
        }
    }

    /// Sorted ids of every point inside the closed box.
    pub fn range_query(&self, query: &Box3) -> Vec<u32> {
        let mut ids = Vec::new();
        self.visit_range(query, |p| ids.push(p.event_id));
        ids.sort_unstable();
        ids
    }

    /// Guttman insertion with quadratic split.
    pub fn insert(&mut self, point: STPoint) {
        if let Some((a, b)) = self.insert_at(self.root, point, self.height) {
            let mut bbox = self.nodes[a].bbox;
            bbox.expand(&self.nodes[b].bbox);
            self.nodes.push(Node {
                bbox,
                kind: NodeKind::Internal(vec![a, b]),
            });
            self.root = self.nodes.len() - 1;
            self.height += 1;
        }
        self.len += 1;
    }

    /// Returns the two halves when the node at `idx` had to split.
    fn insert_at(&mut self, idx: usize, point: STPoint, depth: usize) -> Option<(usize, usize)> {
        let pbox = Box3::point(&point);
        self.nodes[idx].bbox.expand(&pbox);
        if depth == 0 {
            let NodeKind::Leaf(points) = &mut self.nodes[idx].kind else {
                unreachable!("depth 0 is a leaf");
            };
            points.push(point);
            if points.len() <= self.params.max_entries {
                return None;
            }
            let entries = std::mem::take(points);
            let (left, right) = quadratic_split(entries, self.params.min_entries, Box3::point);
            let make = |pts: Vec<STPoint>| {
                let mut bbox = Box3::empty();
                for p in &pts {
                    bbox.expand(&Box3::point(p));
                }
                Node {
                    bbox,
                    kind: NodeKind::Leaf(pts),
                }
            };
            self.nodes[idx] = make(left);
            self.nodes.push(make(right));
            return Some((idx, self.nodes.len() - 1));
        }

        let NodeKind::Internal(children) = &self.nodes[idx].kind else {
            unreachable!("internal node above depth 0");
        };
        let chosen = *children
            .iter()
            .min_by(|&&a, &&b| {
                let (ba, bb) = (&self.nodes[a].bbox, &self.nodes[b].bbox);
                let ea = ba.union(&pbox).volume() - ba.volume();
                let eb = bb.union(&pbox).volume() - bb.volume();
                ea.total_cmp(&eb).then(ba.volume().total_cmp(&bb.volume()))
            })
            .expect("internal nodes have children");
        let (_, new) = self.insert_at(chosen, point, depth - 1)?;
        let NodeKind::Internal(children) = &mut self.nodes[idx].kind else {
            unreachable!();
        };
        children.push(new);
        if children.len() <= self.params.max_entries {
            return None;
        }
        let entries = std::mem::take(children);
        let nodes = &self.nodes;
        let (left, right) = quadratic_split(entries, self.params.min_entries, |&c| nodes[c].bbox);
        let make = |kids: Vec<usize>, nodes: &[Node]| {
            let mut bbox = Box3::empty();
            for &c in &kids {
                bbox.expand(&nodes[c].bbox);
            }
            Node {
                bbox,
                kind: NodeKind::Internal(kids),
            }
        };
        let right_node = make(right, &self.nodes);
        self.nodes[idx] = make(left, &self.nodes);
        self.nodes.push(right_node);
        Some((idx, self.nodes.len() - 1))
    }

    /// Walks the tree and checks fill bounds, box containment, uniform
    /// leaf depth and the point count.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let RTreeParams {
            max_entries,
            min_entries,
        } = self.params;
        let mut count = 0usize;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            let node = &self.nodes[i];
            let n = node.len();
            if n > max_entries {
                return Err(format!("node {i} has {n} > {max_entries} entries"));
            }
            if i != self.root && n < min_entries {
                return Err(format!("node {i} has {n} < {min_entries} entries"));
            }
            match &node.kind {
                NodeKind::Leaf(points) => {
                    if depth != self.height {
                        return Err(format!("leaf {i} at depth {depth}, height {}", self.height));
                    }
                    for p in points {
                        if !node.bbox.contains_point(p) {
                            return Err(format!("leaf {i} box misses event {}", p.event_id));
                        }
                    }
                    count += points.len();
                }
                NodeKind::Internal(children) => {
                    if i == self.root && children.len() < 2 {
                        return Err("internal root with fewer than 2 children".into());
                    }
                    for &c in children {
                        if !node.bbox.contains_box(&self.nodes[c].bbox) {
                            return Err(format!("node {c} box escapes parent {i}"));
                        }
                        stack.push((c, depth + 1));
                    }
                }
            }
        }
        if count != self.len {
            return Err(format!("{count} points reachable, {} inserted", self.len));
        }
        Ok(())
    }
}

fn quadratic_split<T>(
    mut entries: Vec<T>,
    min_fill: usize,
    bbox_of: impl Fn(&T) -> Box3,
) -> (Vec<T>, Vec<T>) {
    let boxes: Vec<Box3> = entries.iter().map(&bbox_of).collect();
    let n = entries.len();
    let (mut s1, mut s2, mut worst) = (0, 1, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let waste = boxes[i].union(&boxes[j]).volume() - boxes[i].volume() - boxes[j].volume();
            if waste > worst {
                (s1, s2, worst) = (i, j, waste);
            }
        }
    }
    let mut group = vec![None::<bool>; n];
    group[s1] = Some(false);
    group[s2] = Some(true);
    let (mut b1, mut b2) = (boxes[s1], boxes[s2]);
    let (mut n1, mut n2) = (1usize, 1usize);
    let mut remaining = n - 2;
    while remaining > 0 {
        if n1 + remaining == min_fill || n2 + remaining == min_fill {
            let to_right = n2 + remaining == min_fill;
            for g in group.iter_mut().filter(|g| g.is_none()) {
                *g = Some(to_right);
            }
            break;
        }
        let (mut pick, mut best_diff, mut d1_pick, mut d2_pick) = (0, f64::NEG_INFINITY, 0.0, 0.0);
        for (i, g) in group.iter().enumerate() {
            if g.is_some() {
                continue;
            }
            let d1 = b1.union(&boxes[i]).volume() - b1.volume();
            let d2 = b2.union(&boxes[i]).volume() - b2.volume();
            if (d1 - d2).abs() > best_diff {
                (pick, best_diff, d1_pick, d2_pick) = (i, (d1 - d2).abs(), d1, d2);
            }
        }
        let to_right = match d1_pick.total_cmp(&d2_pick) {
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal => n2 < n1,
        };
        group[pick] = Some(to_right);
        if to_right {
            b2.expand(&boxes[pick]);
            n2 += 1;
        } else {
            b1.expand(&boxes[pick]);
            n1 += 1;
        }
        remaining -= 1;
    }
    let mut left = Vec::with_capacity(n1);
    let mut right = Vec::with_capacity(n2);
    for (e, g) in entries.drain(..).zip(group) {
        if g == Some(true) {
            right.push(e);
        } else {
            left.push(e);
        }
    }
    (left, right)
}

/// Per-axis proximity limits for near-repeat pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLimits {
    pub r_x: f64,
    pub r_y: f64,
    pub r_t: f64,
}

impl PairLimits {
    pub fn new(r_x: f64, r_y: f64, r_t: f64) -> Result<Self> {
        let limits = PairLimits { r_x, r_y, r_t };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.r_x, self.r_y, self.r_t]
            .iter()
            .any(|r| !(r.is_finite() && *r > 0.0))
        {
            return Err(Error::Config(format!(
                "pair limits must be positive and finite (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Exact closed-bound predicate shared by the index path and oracles.
    pub fn is_near(&self, a: &STPoint, b: &STPoint) -> bool {
        (a.x - b.x).abs() <= self.r_x && (a.y - b.y).abs() <= self.r_y && (a.t - b.t).abs() <= self.r_t
    }
}

/// All unordered pairs `(i, j)`, `i < j`, within the per-axis limits,
/// sorted ascending. `points` must be the points indexed by `tree`.
pub fn neighbor_pairs(tree: &RTree3, points: &[STPoint], limits: PairLimits) -> Vec<(u32, u32)> {
    let pad = |c: f64, r: f64| (c.abs() + r) * 4.0 * f64::EPSILON;
    let mut pairs: Vec<(u32, u32)> = points
        .par_iter()
        .fold(Vec::new, |mut acc, p| {
            // The query box is padded by a few ulps so rounding in `c ± r`
            // cannot exclude a point that the exact predicate accepts.
            let r = [
                limits.r_x + pad(p.x, limits.r_x),
                limits.r_y + pad(p.y, limits.r_y),
                limits.r_t + pad(p.t, limits.r_t),
            ];
            tree.visit_range(&Box3::around(p, r), |q| {
                if p.event_id < q.event_id && limits.is_near(p, q) {
                    acc.push((p.event_id, q.event_id));
                }
            });
            acc
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        });
    pairs.par_sort_unstable();
    pairs.dedup();
    pairs
}

/// Binary pair dump: little-endian u64 count, then `(i, j)` u32 pairs.
pub fn write_pairs_bin<W: Write>(mut w: W, pairs: &[(u32, u32)]) -> Result<()> {
    w.write_all(&(pairs.len() as u64).to_le_bytes())?;
    for &(i, j) in pairs {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        w.write_all(&a.to_le_bytes())?;
        w.write_all(&b.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs_bin<R: Read>(mut r: R) -> Result<Vec<(u32, u32)>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let count = u64::from_le_bytes(word) as usize;
    let mut pairs = Vec::with_capacity(count.min(1 << 24));
    let mut buf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let i = u32::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        pairs.push((i, u32::from_le_bytes(buf)));
    }
    Ok(pairs)
}
