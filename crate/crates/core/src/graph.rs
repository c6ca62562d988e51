//! Undirected simple event graph in compressed-sparse-row layout, plus
//! structural statistics: components, edge supports, clustering
//! coefficients and diameters.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diameter switches from Floyd-Warshall to repeated BFS above this size.
pub const FLOYD_WARSHALL_LIMIT: usize = 512;

/// CSR adjacency. Each undirected edge has one id shared by both
/// directions; ids follow the ascending `(u, v)`, `u < v` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventGraph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    target_edge: Vec<u32>,
    edges: Vec<(u32, u32)>,
}

impl EventGraph {
    pub fn empty(n: usize) -> Self {
        EventGraph {
            offsets: vec![0; n + 1],
            targets: Vec::new(),
            target_edge: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: u32) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Neighbours of `v`, sorted ascending.
    pub fn neighbors(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Edge ids parallel to [`neighbors`](Self::neighbors).
    pub fn neighbor_edge_ids(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.target_edge[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Endpoints `(u, v)`, `u < v`, of edge `e`.
    pub fn edge(&self, e: u32) -> (u32, u32) {
        self.edges[e as usize]
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_id(&self, u: u32, v: u32) -> Option<u32> {
        let (a, b) = if self.degree(u) <= self.degree(v) { (u, v) } else { (v, u) };
        self.neighbors(a)
            .binary_search(&b)
            .ok()
            .map(|i| self.neighbor_edge_ids(a)[i])
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        u != v && self.edge_id(u, v).is_some()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.offsets
    }
}

/// Builds the CSR graph on `n` vertices from undirected pairs given in
/// either orientation.
pub fn build_graph(n: usize, pairs: &[(u32, u32)]) -> Result<EventGraph> {
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
    for &(u, v) in pairs {
        if u as usize >= n || v as usize >= n {
            return Err(Error::VertexOutOfRange { u, v, n });
        }
        if u == v {
            return Err(Error::SelfLoop { u, v });
        }
        edges.push(if u < v { (u, v) } else { (v, u) });
    }
    edges.par_sort_unstable();
    if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateEdge { u: w[0].0, v: w[0].1 });
    }

    let mut offsets = vec![0usize; n + 1];
    for &(u, v) in &edges {
        offsets[u as usize + 1] += 1;
        offsets[v as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut targets = vec![0u32; 2 * edges.len()];
    let mut target_edge = vec![0u32; 2 * edges.len()];
    // Edges are sorted by (u, v), so filling v-rows with u (ascending by
    // construction) and u-rows with v keeps every row sorted.
    for (id, &(u, v)) in edges.iter().enumerate() {
        let slot = cursor[v as usize];
        targets[slot] = u;
        target_edge[slot] = id as u32;
        cursor[v as usize] += 1;
    }
    for (id, &(u, v)) in edges.iter().enumerate() {
        let slot = cursor[u as usize];
        targets[slot] = v;
        target_edge[slot] = id as u32;
        cursor[u as usize] += 1;
    }
    Ok(EventGraph {
        offsets,
        targets,
        target_edge,
        edges,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    /// Component id per vertex, dense and ordered by smallest member.
    pub labels: Vec<u32>,
    /// Members of each component, ascending.
    pub members: Vec<Vec<u32>>,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
        true
    }
}

pub fn connected_components(g: &EventGraph) -> ComponentLabeling {
    let n = g.vertex_count();
    let mut dsu = DisjointSets::new(n);
    for &(u, v) in g.edges() {
        dsu.union(u, v);
    }
    let mut root_label = vec![u32::MAX; n];
    let mut labels = vec![0u32; n];
    let mut members: Vec<Vec<u32>> = Vec::new();
    for v in 0..n as u32 {
        let r = dsu.find(v) as usize;
        if root_label[r] == u32::MAX {
            root_label[r] = members.len() as u32;
            members.push(Vec::new());
        }
        labels[v as usize] = root_label[r];
        members[root_label[r] as usize].push(v);
    }
    ComponentLabeling { labels, members }
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> u32 {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Triangle count per edge, by merging the sorted endpoint rows.
pub fn compute_supports(g: &EventGraph) -> Vec<u32> {
    g.edges()
        .par_iter()
        .map(|&(u, v)| sorted_intersection_len(g.neighbors(u), g.neighbors(v)))
        .collect()
}

/// Local (Watts-Strogatz) coefficient of every vertex; degree < 2 gives 0.
pub fn local_clustering(g: &EventGraph) -> Vec<f64> {
    let supports = compute_supports(g);
    (0..g.vertex_count() as u32)
        .map(|v| {
            let d = g.degree(v) as f64;
            if d < 2.0 {
                return 0.0;
            }
            let twice_triangles: u32 = g.neighbor_edge_ids(v).iter().map(|&e| supports[e as usize]).sum();
            twice_triangles as f64 / (d * (d - 1.0))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub enum Scope<'a> {
    All,
    /// Coefficients are evaluated on the subgraph induced by these vertices.
    Vertices(&'a [u32]),
}

/// Mean local clustering coefficient over the scope.
pub fn clustering_coefficient(g: &EventGraph, scope: Scope<'_>) -> Result<f64> {
    let local = match scope {
        Scope::All => local_clustering(g),
        Scope::Vertices(vs) => {
            if vs.is_empty() {
                return Err(Error::EmptyScope);
            }
            let (sub, _) = induced_subgraph(g, vs)?;
            local_clustering(&sub)
        }
    };
    if local.is_empty() {
        return Err(Error::EmptyScope);
    }
    Ok(local.iter().sum::<f64>() / local.len() as f64)
}

fn bfs_eccentricity(g: &EventGraph, src: u32, dist: &mut [u32], queue: &mut VecDeque<u32>) -> (u32, usize) {
    dist.fill(u32::MAX);
    dist[src as usize] = 0;
    queue.clear();
    queue.push_back(src);
    let (mut ecc, mut seen) = (0, 1);
    while let Some(u) = queue.pop_front() {
        let du = dist[u as usize];
        for &w in g.neighbors(u) {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = du + 1;
                ecc = ecc.max(du + 1);
                seen += 1;
                queue.push_back(w);
            }
        }
    }
    (ecc, seen)
}

/// Diameter of a whole connected graph by breadth-first search from
/// every vertex.
pub fn diameter_bfs(g: &EventGraph) -> Result<u32> {
    let n = g.vertex_count();
    if n == 0 {
        return Err(Error::EmptyScope);
    }
    (0..n as u32)
        .into_par_iter()
        .map_init(
            || (vec![0u32; n], VecDeque::new()),
            |(dist, queue), s| {
                let (ecc, seen) = bfs_eccentricity(g, s, dist, queue);
                if seen == n { Ok(ecc) } else { Err(Error::Disconnected) }
            },
        )
        .try_reduce(|| 0, |a, b| Ok(a.max(b)))
}

/// Diameter of a whole connected graph by Floyd-Warshall.
pub fn diameter_floyd_warshall(g: &EventGraph) -> Result<u32> {
    let n = g.vertex_count();
    if n == 0 {
        return Err(Error::EmptyScope);
    }
    const INF: u32 = u32::MAX / 2;
    let mut d = vec![INF; n * n];
    for v in 0..n {
        d[v * n + v] = 0;
    }
    for &(u, v) in g.edges() {
        d[u as usize * n + v as usize] = 1;
        d[v as usize * n + u as usize] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if dik == INF {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    let max = d.iter().copied().max().unwrap_or(0);
    if max >= INF {
        Err(Error::Disconnected)
    } else {
        Ok(max)
    }
}

/// Unweighted diameter of the connected vertex set `component`.
pub fn diameter(g: &EventGraph, component: &[u32]) -> Result<u32> {
    if component.is_empty() {
        return Err(Error::EmptyScope);
    }
    let (sub, _) = induced_subgraph(g, component)?;
    if sub.vertex_count() <= FLOYD_WARSHALL_LIMIT {
        diameter_floyd_warshall(&sub)
    } else {
        diameter_bfs(&sub)
    }
}

/// Subgraph induced by `vertices`, plus the new-to-original id map.
/// Vertex ids are renumbered in ascending original order.
pub fn induced_subgraph(g: &EventGraph, vertices: &[u32]) -> Result<(EventGraph, Vec<u32>)> {
    let mut remap: Vec<u32> = vertices.to_vec();
    remap.sort_unstable();
    remap.dedup();
    if let Some(&bad) = remap.iter().find(|&&v| v as usize >= g.vertex_count()) {
        return Err(Error::VertexOutOfRange {
            u: bad,
            v: bad,
            n: g.vertex_count(),
        });
    }
    let mut pairs = Vec::new();
    for (new_u, &u) in remap.iter().enumerate() {
        for &w in g.neighbors(u).iter().filter(|&&w| w > u) {
            if let Ok(new_w) = remap.binary_search(&w) {
                pairs.push((new_u as u32, new_w as u32));
            }
        }
    }
    let sub = build_graph(remap.len(), &pairs)?;
    Ok((sub, remap))
}

/// Statistics of one connected component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub component: u32,
    pub vertices: usize,
    pub edges: usize,
    pub diameter: u32,
    pub mean_clustering_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub schema_version: u32,
    pub vertices: usize,
    pub edges: usize,
    pub connected_components: usize,
    /// Components with at least one edge.
    pub nontrivial_components: usize,
    pub max_diameter: u32,
    pub mean_clustering_coefficient: f64,
    pub components: Vec<ComponentStats>,
}

/// Whole-graph and per-component statistics. Singleton components are
/// counted but not listed.
pub fn graph_stats(g: &EventGraph) -> GraphStats {
    let labeling = connected_components(g);
    let components: Vec<ComponentStats> = labeling
        .members
        .par_iter()
        .enumerate()
        .filter(|(_, m)| m.len() > 1)
        .map(|(i, m)| {
            let (sub, _) = induced_subgraph(g, m).expect("component vertices are valid");
            let diameter = if sub.vertex_count() <= FLOYD_WARSHALL_LIMIT {
                diameter_floyd_warshall(&sub)
            } else {
                diameter_bfs(&sub)
            }
            .expect("components are connected");
            ComponentStats {
                component: i as u32,
                vertices: sub.vertex_count(),
                edges: sub.edge_count(),
                diameter,
                mean_clustering_coefficient: clustering_coefficient(&sub, Scope::All).unwrap_or(0.0),
            }
        })
        .collect();
    GraphStats {
        schema_version: crate::SCHEMA_VERSION,
        vertices: g.vertex_count(),
        edges: g.edge_count(),
        connected_components: labeling.count(),
        nontrivial_components: components.len(),
        max_diameter: components.iter().map(|c| c.diameter).max().unwrap_or(0),
        mean_clustering_coefficient: if g.vertex_count() == 0 {
            0.0
        } else {
            clustering_coefficient(g, Scope::All).unwrap_or(0.0)
        },
        components,
    }
}

/// Writes one `u v` line per edge, `u < v`, in edge-id order.
pub fn write_edge_list<W: Write>(mut w: W, edges: &[(u32, u32)]) -> Result<()> {
    for &(u, v) in edges {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        writeln!(w, "{a} {b}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<Vec<(u32, u32)>> {
    let mut edges = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parse = |s: Option<&str>| s.and_then(|s| s.parse::<u32>().ok());
        match (parse(parts.next()), parse(parts.next()), parts.next()) {
            (Some(u), Some(v), None) => edges.push((u, v)),
            _ => {
                return Err(Error::Parse {
                    line: i as u64 + 1,
                    message: format!("expected `u v`, got `{trimmed}`"),
                })
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn complete(n: u32) -> EventGraph {
        let pairs: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        build_graph(n as usize, &pairs).unwrap()
    }

    fn path(n: u32) -> EventGraph {
        let pairs: Vec<_> = (0..n - 1).map(|u| (u, u + 1)).collect();
        build_graph(n as usize, &pairs).unwrap()
    }

    #[test]
    fn triangle_degrees() {
        let g = build_graph(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!((0..3).all(|v| g.degree(v) == 2));
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.edge_id(2, 0), Some(1));
    }

    #[test]
    fn bad_edges_are_errors() {
        assert!(matches!(build_graph(2, &[(0, 2)]), Err(Error::VertexOutOfRange { .. })));
        assert!(matches!(build_graph(2, &[(1, 1)]), Err(Error::SelfLoop { .. })));
        assert!(matches!(build_graph(2, &[(0, 1), (1, 0)]), Err(Error::DuplicateEdge { .. })));
    }

    #[test]
    fn components_of_edgeless_and_triangle() {
        let g = EventGraph::empty(4);
        assert_eq!(connected_components(&g).count(), 4);
        let tri = complete(3);
        assert_eq!(connected_components(&tri).count(), 1);
        let g = build_graph(5, &[(3, 4), (0, 2)]).unwrap();
        let c = connected_components(&g);
        assert_eq!(c.labels, vec![0, 1, 0, 2, 2]);
        assert_eq!(c.members, vec![vec![0, 2], vec![1], vec![3, 4]]);
    }

    #[test]
    fn k4_supports() {
        assert_eq!(compute_supports(&complete(4)), vec![2; 6]);
    }

    #[test]
    fn clique_and_star_coefficients() {
        for n in 3..8 {
            assert_eq!(clustering_coefficient(&complete(n), Scope::All).unwrap(), 1.0);
        }
        let star = build_graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        assert_eq!(clustering_coefficient(&star, Scope::All).unwrap(), 0.0);
        assert!(matches!(clustering_coefficient(&star, Scope::Vertices(&[])), Err(Error::EmptyScope)));
    }

    #[test]
    fn scoped_coefficient_uses_induced_subgraph() {
        // K4 on {0,1,2,3} plus a pendant 4 on 0: restricted to the K4 it is 1.
        let g = build_graph(5, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (0, 4)]).unwrap();
        assert_eq!(clustering_coefficient(&g, Scope::Vertices(&[0, 1, 2, 3])).unwrap(), 1.0);
        assert!(clustering_coefficient(&g, Scope::All).unwrap() < 1.0);
    }

    #[test]
    fn diameters() {
        let k5 = complete(5);
        assert_eq!(diameter(&k5, &[0, 1, 2, 3, 4]).unwrap(), 1);
        let p4 = path(4);
        assert_eq!(diameter(&p4, &[0, 1, 2, 3]).unwrap(), 3);
        assert_eq!(diameter(&p4, &[2]).unwrap(), 0);
        assert!(matches!(diameter(&p4, &[0, 3]), Err(Error::Disconnected)));
        let long = path(600);
        let all: Vec<u32> = (0..600).collect();
        assert_eq!(diameter(&long, &all).unwrap(), 599);
    }

    #[test]
    fn induced_full_set_is_a_copy() {
        let g = build_graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let (sub, remap) = induced_subgraph(&g, &[3, 2, 1, 0]).unwrap();
        assert_eq!(sub, g);
        assert_eq!(remap, vec![0, 1, 2, 3]);
    }

    #[test]
    fn edge_list_round_trip() {
        let edges = vec![(0, 3), (1, 2)];
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &edges).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0 3\n1 2\n");
        assert_eq!(read_edge_list(buf.as_slice()).unwrap(), edges);
        assert!(read_edge_list("0 1 2\n".as_bytes()).is_err());
    }

    #[test]
    fn stats_of_two_components() {
        let g = build_graph(7, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5)]).unwrap();
        let s = graph_stats(&g);
        assert_eq!(s.connected_components, 3);
        assert_eq!(s.nontrivial_components, 2);
        assert_eq!(s.components[0].diameter, 1);
        assert_eq!(s.components[0].mean_clustering_coefficient, 1.0);
        assert_eq!(s.components[1].diameter, 2);
        assert_eq!(s.max_diameter, 2);
    }
}
