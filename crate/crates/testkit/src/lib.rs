//! Slow, obviously-correct reference computations used as test oracles.
//! Nothing here shares code with the library under test; inputs are
//! plain tuples.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

pub type Edge = (u32, u32);

/// Erdos-Renyi G(n, p) edge list, `u < v`, ascending.
pub fn random_graph<R: Rng>(rng: &mut R, n: u32, p: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Dense boolean adjacency matrix.
pub struct AdjMatrix {
    pub n: usize,
    cells: Vec<bool>,
}

impl AdjMatrix {
    pub fn new(n: usize, edges: &[Edge]) -> Self {
        let mut cells = vec![false; n * n];
        for &(u, v) in edges {
            cells[u as usize * n + v as usize] = true;
            cells[v as usize * n + u as usize] = true;
        }
        AdjMatrix { n, cells }
    }

    pub fn adj(&self, u: u32, v: u32) -> bool {
        self.cells[u as usize * self.n + v as usize]
    }

    pub fn degree(&self, u: u32) -> usize {
        (0..self.n as u32).filter(|&v| self.adj(u, v)).count()
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for u in 0..self.n as u32 {
            for v in u + 1..self.n as u32 {
                if self.adj(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// Connected components via the transitive closure of the adjacency
/// matrix, each ascending, ordered by smallest member.
pub fn components_by_closure(n: usize, edges: &[Edge]) -> Vec<Vec<u32>> {
    let mut reach = vec![false; n * n];
    for i in 0..n {
        reach[i * n + i] = true;
    }
    for &(u, v) in edges {
        reach[u as usize * n + v as usize] = true;
        reach[v as usize * n + u as usize] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i * n + k] {
                for j in 0..n {
                    if reach[k * n + j] {
                        reach[i * n + j] = true;
                    }
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let comp: Vec<u32> = (0..n).filter(|&j| reach[i * n + j]).map(|j| j as u32).collect();
        for &j in &comp {
            seen[j as usize] = true;
        }
        out.push(comp);
    }
    out
}

/// Triangles through each edge by checking every third vertex.
pub fn supports_triple_loop(n: usize, edges: &[Edge]) -> Vec<u32> {
    let a = AdjMatrix::new(n, edges);
    edges
        .iter()
        .map(|&(u, v)| (0..n as u32).filter(|&w| w != u && w != v && a.adj(u, w) && a.adj(v, w)).count() as u32)
        .collect()
}

/// Core numbers: for every k, delete vertices of degree < k until none
/// remain; a vertex's core number is the last k it survives.
pub fn core_numbers_fixpoint(n: usize, edges: &[Edge]) -> Vec<u32> {
    let a = AdjMatrix::new(n, edges);
    let mut core = vec![0u32; n];
    for k in 1..=n as u32 {
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for v in 0..n {
                if alive[v] {
                    let d = (0..n).filter(|&w| alive[w] && a.adj(v as u32, w as u32)).count();
                    if d < k as usize {
                        alive[v] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !alive.iter().any(|&x| x) {
            break;
        }
        for v in 0..n {
            if alive[v] {
                core[v] = k;
            }
        }
    }
    core
}

/// Truss numbers: for every k >= 3, delete edges in fewer than k - 2
/// triangles (recounted from scratch after each deletion) until none
/// remain. Edges in no 3-truss get 2. Returned in the order of `edges`.
pub fn truss_numbers_recount(n: usize, edges: &[Edge]) -> Vec<u32> {
    let mut truss = vec![2u32; edges.len()];
    for k in 3.. {
        let mut alive: Vec<bool> = vec![true; edges.len()];
        loop {
            let live: Vec<Edge> = edges.iter().zip(&alive).filter(|(_, &a)| a).map(|(&e, _)| e).collect();
            let a = AdjMatrix::new(n, &live);
            let victim = edges.iter().enumerate().find(|&(i, &(u, v))| {
                alive[i]
                    && (0..n as u32).filter(|&w| a.adj(u, w) && a.adj(v, w)).count() < (k - 2) as usize
            });
            match victim {
                Some((i, _)) => alive[i] = false,
                None => break,
            }
        }
        if !alive.iter().any(|&x| x) {
            break;
        }
        for (i, &a) in alive.iter().enumerate() {
            if a {
                truss[i] = k;
            }
        }
    }
    truss
}

/// Every maximal clique with at least `min_size` vertices, found by
/// listing all cliques over bitsets and keeping those no vertex extends.
/// Requires `n <= 64`.
pub fn maximal_cliques_bitset(n: usize, edges: &[Edge], min_size: usize) -> BTreeSet<Vec<u32>> {
    assert!(n <= 64, "bitset oracle handles at most 64 vertices");
    let mut nbr = vec![0u64; n];
    for &(u, v) in edges {
        nbr[u as usize] |= 1 << v;
        nbr[v as usize] |= 1 << u;
    }
    let mut out = BTreeSet::new();
    // (members, common neighbours of all members, last vertex added)
    let mut stack: Vec<(u64, u64, usize)> = (0..n).map(|v| (1u64 << v, nbr[v], v)).collect();
    while let Some((members, common, last)) = stack.pop() {
        if common == 0 && members.count_ones() as usize >= min_size {
            out.insert((0..n as u32).filter(|&i| members >> i & 1 == 1).collect());
        }
        for w in last + 1..n {
            if common >> w & 1 == 1 {
                stack.push((members | 1 << w, common & nbr[w], w));
            }
        }
    }
    out
}

/// Graph k-DBSCAN from set-level definitions: at each level the clusters
/// are the connected groups of core vertices, ordered by their smallest
/// core; each non-core vertex adjacent to a core joins the earliest such
/// cluster. Unclustered vertices leave the graph before the next level.
/// Each level lists its clusters by smallest member.
/// `closed` selects the `deg + 1 >= k` core test, otherwise `deg >= k`.
pub fn dbscan_by_definition(n: usize, edges: &[Edge], k_min: u32, closed: bool) -> BTreeMap<u32, Vec<Vec<u32>>> {
    let a = AdjMatrix::new(n, edges);
    let mut alive = vec![true; n];
    let mut out = BTreeMap::new();
    let mut k = k_min;
    while alive.iter().any(|&x| x) {
        let deg = |v: usize| (0..n).filter(|&w| alive[w] && a.adj(v as u32, w as u32)).count();
        let is_core: Vec<bool> = (0..n)
            .map(|v| alive[v] && if closed { deg(v) + 1 >= k as usize } else { deg(v) >= k as usize })
            .collect();
        let core_edges: Vec<Edge> = a
            .edges()
            .into_iter()
            .filter(|&(u, v)| is_core[u as usize] && is_core[v as usize])
            .collect();
        let mut clusters: Vec<Vec<u32>> = components_by_closure(n, &core_edges)
            .into_iter()
            .filter(|c| is_core[c[0] as usize])
            .collect();
        clusters.sort_by_key(|c| c[0]);
        for v in 0..n {
            if !alive[v] || is_core[v] {
                continue;
            }
            if let Some(c) = clusters.iter_mut().find(|c| c.iter().any(|&u| is_core[u as usize] && a.adj(u, v as u32))) {
                c.push(v as u32);
            }
        }
        let mut next = vec![false; n];
        for c in &mut clusters {
            c.sort_unstable();
            for &v in c.iter() {
                next[v as usize] = true;
            }
        }
        // Reported order is by smallest member, not by seed.
        clusters.sort();
        alive = next;
        if clusters.is_empty() {
            break;
        }
        out.insert(k, clusters);
        k += 1;
    }
    out
}

/// Point in (x, y, t) with an id, as plain data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pt {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// All pairs within closed per-axis limits, by checking every pair.
pub fn pairs_double_loop(points: &[Pt], r_x: f64, r_y: f64, r_t: f64) -> Vec<Edge> {
    let mut out = Vec::new();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if (a.x - b.x).abs() <= r_x && (a.y - b.y).abs() <= r_y && (a.t - b.t).abs() <= r_t {
                out.push((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Ids of points inside the closed box, ascending.
pub fn range_linear(points: &[Pt], min: [f64; 3], max: [f64; 3]) -> Vec<u32> {
    let mut out: Vec<u32> = points
        .iter()
        .filter(|p| {
            let c = [p.x, p.y, p.t];
            (0..3).all(|a| min[a] <= c[a] && c[a] <= max[a])
        })
        .map(|p| p.id)
        .collect();
    out.sort_unstable();
    out
}

/// Knox pair counts by checking every pair; `clamp` folds overflow into
/// the last row/column, otherwise overflow pairs are ignored.
pub fn knox_double_loop(
    points: &[Pt],
    distance_step: f64,
    time_step: f64,
    distance_bins: usize,
    time_bins: usize,
    clamp: bool,
) -> Vec<Vec<u64>> {
    let mut table = vec![vec![0u64; time_bins]; distance_bins];
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            let mut r = (d / distance_step).floor() as usize;
            let mut c = ((a.t - b.t).abs() / time_step).floor() as usize;
            if r >= distance_bins || c >= time_bins {
                if !clamp {
                    continue;
                }
                r = r.min(distance_bins - 1);
                c = c.min(time_bins - 1);
            }
            table[r][c] += 1;
        }
    }
    table
}

/// Number of distinct (category, x, y, t) keys, compared bitwise.
pub fn distinct_keys<'a>(rows: impl IntoIterator<Item = (&'a str, f64, f64, f64)>) -> usize {
    rows.into_iter()
        .map(|(c, x, y, t)| (c, x.to_bits(), y.to_bits(), t.to_bits()))
        .collect::<BTreeSet<_>>()
        .len()
}

/// Edges of the 8-vertex example graph that its stated facts force.
pub const EXAMPLE_FORCED: [Edge; 9] = [(0, 1), (0, 3), (0, 4), (1, 3), (1, 4), (3, 4), (1, 2), (2, 3), (2, 7)];

/// Every 13-edge simple graph on vertices 0..8 containing
/// [`EXAMPLE_FORCED`] with deg(1) = 5, deg(5) = 2, support(1,2) = 3,
/// support(2,7) = 1, no isolated vertex and {0,1,3,4} a maximal clique.
pub fn example_candidates() -> Vec<Vec<Edge>> {
    let forced: BTreeSet<Edge> = EXAMPLE_FORCED.iter().copied().collect();
    let free: Vec<Edge> = (0..8u32)
        .flat_map(|u| (u + 1..8).map(move |v| (u, v)))
        .filter(|e| !forced.contains(e))
        .collect();
    let mut out = Vec::new();
    let f = free.len();
    for a in 0..f {
        for b in a + 1..f {
            for c in b + 1..f {
                for d in c + 1..f {
                    let mut edges: Vec<Edge> = forced.iter().copied().collect();
                    edges.extend([free[a], free[b], free[c], free[d]]);
                    edges.sort_unstable();
                    let m = AdjMatrix::new(8, &edges);
                    let sup = |u: u32, v: u32| (0..8).filter(|&w| m.adj(u, w) && m.adj(v, w)).count();
                    let ok = m.degree(1) == 5
                        && m.degree(5) == 2
                        && sup(1, 2) == 3
                        && sup(2, 7) == 1
                        && (0..8).all(|v| m.degree(v) > 0)
                        && (0..8u32)
                            .filter(|w| ![0, 1, 3, 4].contains(w))
                            .all(|w| ![0, 1, 3, 4].iter().all(|&u| m.adj(u, w)));
                    if ok {
                        out.push(edges);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_agree_on_k4_plus_tail() {
        let edges = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4)];
        assert_eq!(core_numbers_fixpoint(5, &edges), vec![3, 3, 3, 3, 1]);
        assert_eq!(truss_numbers_recount(5, &edges), vec![4, 4, 4, 4, 4, 4, 2]);
        assert_eq!(supports_triple_loop(5, &edges), vec![2, 2, 2, 2, 2, 2, 0]);
        let cliques = maximal_cliques_bitset(5, &edges, 2);
        assert_eq!(cliques.into_iter().collect::<Vec<_>>(), vec![vec![0, 1, 2, 3], vec![3, 4]]);
        assert_eq!(components_by_closure(6, &edges), vec![vec![0, 1, 2, 3, 4], vec![5]]);
    }

    #[test]
    fn example_search_is_small() {
        let c = example_candidates();
        assert_eq!(c.len(), 10);
        assert!(c.iter().all(|g| g.len() == 13));
    }
}
