//! Event-chain detectors: k-core peeling, k-truss decomposition, graph
//! k-DBSCAN and maximal clique enumeration.
//!
//! Every detector reports, per level `k`, a list of [`Subgraph`]s with
//! original vertex ids. Subgraphs within a level are ordered by their
//! smallest vertex.

mod clique;
mod core;
mod dbscan;
mod truss;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{build_graph, clustering_coefficient, connected_components, induced_subgraph, EventGraph, Scope};

pub use self::clique::{clique_decomposition, enumerate_cliques, CliqueSet};
pub use self::core::{core_numbers, degeneracy_order, k_core_decompose};
pub use self::dbscan::{k_dbscan, k_dbscan_with, CoreRule};
pub use self::truss::{k_truss_decompose, truss_numbers};
pub use self::validate::{validate, ValidationReport, Violation, ViolationKind};

/// Default first level for every method.
pub const DEFAULT_K_MIN: u32 = 3;
/// Default cap on the number of reported maximal cliques.
pub const DEFAULT_MAX_CLIQUES: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Core,
    Truss,
    Dbscan,
    Clique,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Core, Method::Truss, Method::Dbscan, Method::Clique];

    pub fn name(self) -> &'static str {
        match self {
            Method::Core => "core",
            Method::Truss => "truss",
            Method::Dbscan => "dbscan",
            Method::Clique => "clique",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "core" => Ok(Method::Core),
            "truss" => Ok(Method::Truss),
            "dbscan" => Ok(Method::Dbscan),
            "clique" => Ok(Method::Clique),
            other => Err(format!("unknown method `{other}` (expected core, truss, dbscan or clique)")),
        }
    }
}

/// One reported cohesive subgraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    /// Original vertex ids, ascending.
    pub vertices: Vec<u32>,
    /// Edges `(u, v)`, `u < v`, ascending.
    pub edges: Vec<(u32, u32)>,
    /// Mean local clustering coefficient of this subgraph on its own edges.
    pub clustering_coefficient: f64,
}

impl Subgraph {
    /// Assembles a subgraph from its vertex and edge sets and computes
    /// its clustering coefficient.
    pub fn new(mut vertices: Vec<u32>, mut edges: Vec<(u32, u32)>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        for e in &mut edges {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let local: Vec<(u32, u32)> = edges
            .iter()
            .map(|&(u, v)| {
                let pos = |x| vertices.binary_search(&x).expect("edge endpoint in vertex set") as u32;
                (pos(u), pos(v))
            })
            .collect();
        let coefficient = if vertices.is_empty() {
            0.0
        } else {
            let sub = build_graph(vertices.len(), &local).expect("subgraph edges are simple");
            clustering_coefficient(&sub, Scope::All).unwrap_or(0.0)
        };
        Subgraph {
            vertices,
            edges,
            clustering_coefficient: coefficient,
        }
    }

    /// Subgraph of `g` induced by `vertices`.
    pub fn induced(g: &EventGraph, vertices: Vec<u32>) -> Self {
        let (sub, remap) = induced_subgraph(g, &vertices).expect("vertices belong to the graph");
        let edges = sub
            .edges()
            .iter()
            .map(|&(u, v)| (remap[u as usize], remap[v as usize]))
            .collect();
        Subgraph::new(remap, edges)
    }

    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub method: Method,
    pub k_min: u32,
    /// Core test used by k-DBSCAN; `None` for the other methods.
    pub core_rule: Option<CoreRule>,
    /// Set when clique enumeration stopped at its cap.
    pub truncated: bool,
    pub per_k: BTreeMap<u32, Vec<Subgraph>>,
}

impl DecompositionResult {
    pub fn new(method: Method, k_min: u32) -> Self {
        DecompositionResult {
            method,
            k_min,
            core_rule: None,
            truncated: false,
            per_k: BTreeMap::new(),
        }
    }

    pub fn levels(&self) -> impl Iterator<Item = (u32, &[Subgraph])> {
        self.per_k.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.per_k.values().all(Vec::is_empty)
    }

    /// Union of the vertex sets reported at level `k`, ascending.
    pub fn vertices_at(&self, k: u32) -> Vec<u32> {
        let mut all: Vec<u32> = self
            .per_k
            .get(&k)
            .into_iter()
            .flatten()
            .flat_map(|s| s.vertices.iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Union of the edge sets reported at level `k`, ascending.
    pub fn edges_at(&self, k: u32) -> Vec<(u32, u32)> {
        let mut all: Vec<(u32, u32)> = self
            .per_k
            .get(&k)
            .into_iter()
            .flatten()
            .flat_map(|s| s.edges.iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    fn sort_levels(&mut self) {
        for subs in self.per_k.values_mut() {
            subs.sort_by(|a, b| a.vertices.cmp(&b.vertices));
        }
    }
}

/// Parameters shared by [`decompose`] and [`decompose_by_component`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeParams {
    pub k_min: u32,
    pub max_cliques: usize,
    pub core_rule: CoreRule,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        DecomposeParams {
            k_min: DEFAULT_K_MIN,
            max_cliques: DEFAULT_MAX_CLIQUES,
            core_rule: CoreRule::default(),
        }
    }
}

/// Runs one method on the whole graph.
pub fn decompose(g: &EventGraph, method: Method, params: &DecomposeParams) -> DecompositionResult {
    match method {
        Method::Core => k_core_decompose(g, params.k_min),
        Method::Truss => k_truss_decompose(g, params.k_min),
        Method::Dbscan => k_dbscan_with(g, params.k_min, params.core_rule),
        Method::Clique => clique_decomposition(&enumerate_cliques(g, params.k_min, params.max_cliques), params.k_min),
    }
}

/// Runs one method independently on every connected component (in
/// parallel) and merges the results in component order.
pub fn decompose_by_component(g: &EventGraph, method: Method, params: &DecomposeParams) -> DecompositionResult {
    let labeling = connected_components(g);
    let parts: Vec<DecompositionResult> = labeling
        .members
        .par_iter()
        // An isolated vertex can only be a k-DBSCAN cluster when k <= 1.
        .filter(|m| m.len() > 1 || (method == Method::Dbscan && params.core_rule.is_core(0, params.k_min)))
        .map(|m| {
            let (sub, remap) = induced_subgraph(g, m).expect("component vertices are valid");
            let mut res = decompose(&sub, method, params);
            for subs in res.per_k.values_mut() {
                for s in subs.iter_mut() {
                    for v in &mut s.vertices {
                        *v = remap[*v as usize];
                    }
                    for e in &mut s.edges {
                        *e = (remap[e.0 as usize], remap[e.1 as usize]);
                    }
                }
            }
            res
        })
        .collect();

    let mut merged = DecompositionResult::new(method, params.k_min);
    if method == Method::Dbscan {
        merged.core_rule = Some(params.core_rule);
    }
    let mut reported = 0usize;
    'parts: for part in parts {
        merged.truncated |= part.truncated;
        for (k, subs) in part.per_k {
            for s in subs {
                if method == Method::Clique && reported == params.max_cliques {
                    merged.truncated = true;
                    break 'parts;
                }
                reported += 1;
                merged.per_k.entry(k).or_default().push(s);
            }
        }
    }
    merged.sort_levels();
    merged
}

/// Groups `vertices` (already filtered to one level) into the connected
/// components of the subgraph formed by `edges`; isolated vertices are
/// dropped.
fn components_of_edges(n: usize, edges: impl Iterator<Item = (u32, u32)>) -> Vec<(Vec<u32>, Vec<(u32, u32)>)> {
    let mut dsu = crate::graph::DisjointSets::new(n);
    let edges: Vec<(u32, u32)> = edges.collect();
    for &(u, v) in &edges {
        dsu.union(u, v);
    }
    let mut by_root: BTreeMap<u32, (Vec<u32>, Vec<(u32, u32)>)> = BTreeMap::new();
    for &(u, v) in &edges {
        let r = dsu.find(u);
        let entry = by_root.entry(r).or_default();
        entry.0.push(u);
        entry.0.push(v);
        entry.1.push((u, v));
    }
    let mut groups: Vec<(Vec<u32>, Vec<(u32, u32)>)> = by_root
        .into_values()
        .map(|(mut vs, es)| {
            vs.sort_unstable();
            vs.dedup();
            (vs, es)
        })
        .collect();
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    groups
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::graph::{build_graph, EventGraph};

    pub fn complete(n: u32) -> EventGraph {
        let pairs: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        build_graph(n as usize, &pairs).unwrap()
    }

    pub fn path(n: u32) -> EventGraph {
        let pairs: Vec<_> = (0..n - 1).map(|u| (u, u + 1)).collect();
        build_graph(n as usize, &pairs).unwrap()
    }

    pub fn cycle(n: u32) -> EventGraph {
        let pairs: Vec<_> = (0..n).map(|u| (u, (u + 1) % n)).collect();
        build_graph(n as usize, &pairs).unwrap()
    }

    pub fn star(leaves: u32) -> EventGraph {
        let pairs: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        build_graph(leaves as usize + 1, &pairs).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn k4_gives_one_subgraph_per_method() {
        let g = complete(4);
        for method in Method::ALL {
            let r = decompose(&g, method, &DecomposeParams::default());
            let (_, level) = r.per_k.first_key_value().expect("non-empty");
            assert_eq!(level.len(), 1, "{method}");
            assert_eq!(level[0].vertices, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn empty_graph_gives_empty_results() {
        let g = EventGraph::empty(0);
        for method in Method::ALL {
            assert!(decompose(&g, method, &DecomposeParams::default()).is_empty());
        }
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("kcore".parse::<Method>().is_err());
    }

    #[test]
    fn subgraph_stats() {
        let s = Subgraph::induced(&complete(4), vec![3, 1, 0]);
        assert_eq!(s.vertices, vec![0, 1, 3]);
        assert_eq!(s.edge_count(), 3);
        assert_eq!(s.clustering_coefficient, 1.0);
        let p = Subgraph::induced(&path(3), vec![0, 1, 2]);
        assert_eq!(p.clustering_coefficient, 0.0);
    }
}
