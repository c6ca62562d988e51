use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{DecompositionResult, Method, Subgraph};
use crate::graph::EventGraph;

/// Which vertices count as core vertices at level k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreRule {
    /// The closed neighbourhood (the vertex and its neighbours) has at
    /// least k members, i.e. `deg(v) + 1 >= k`. This is the DBSCAN
    /// `minPts` convention where a point counts itself.
    #[default]
    ClosedNeighborhood,
    /// `deg(v) >= k`.
    Degree,
}

impl CoreRule {
    pub fn is_core(self, degree: usize, k: u32) -> bool {
        match self {
            CoreRule::ClosedNeighborhood => degree + 1 >= k as usize,
            CoreRule::Degree => degree >= k as usize,
        }
    }
}

/// k-DBSCAN with the default [`CoreRule`].
pub fn k_dbscan(g: &EventGraph, k_min: u32) -> DecompositionResult {
    k_dbscan_with(g, k_min, CoreRule::default())
}

/// Graph k-DBSCAN.
///
/// At each level k, vertices of the working graph are scanned in
/// ascending id. An unvisited core vertex seeds a cluster that grows
/// breadth-first: every unvisited neighbour joins and is marked visited,
/// and only core members expand further. A border vertex reachable from
/// two clusters stays with the first one. Vertices left unvisited are
/// then removed from the working graph and k increments, until the
/// working graph is empty.
pub fn k_dbscan_with(g: &EventGraph, k_min: u32, rule: CoreRule) -> DecompositionResult {
    let n = g.vertex_count();
    let mut result = DecompositionResult::new(Method::Dbscan, k_min);
    result.core_rule = Some(rule);

    let mut alive = vec![true; n];
    let mut live_count = n;
    let mut degree: Vec<usize> = (0..n as u32).map(|v| g.degree(v)).collect();
    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    let mut k = k_min;
    while live_count > 0 {
        visited.fill(false);
        let mut clusters: Vec<Vec<u32>> = Vec::new();
        for seed in 0..n as u32 {
            let s = seed as usize;
            if !alive[s] || visited[s] || !rule.is_core(degree[s], k) {
                continue;
            }
            visited[s] = true;
            let mut members = vec![seed];
            queue.clear();
            queue.push_back(seed);
            while let Some(u) = queue.pop_front() {
                for &w in g.neighbors(u) {
                    let wi = w as usize;
                    if !alive[wi] || visited[wi] {
                        continue;
                    }
                    visited[wi] = true;
                    members.push(w);
                    if rule.is_core(degree[wi], k) {
                        queue.push_back(w);
                    }
                }
            }
            clusters.push(members);
        }

        // Drop unvisited vertices and refresh degrees on what remains.
        for v in 0..n {
            if alive[v] && !visited[v] {
                alive[v] = false;
                live_count -= 1;
            }
        }
        for v in 0..n as u32 {
            if alive[v as usize] {
                degree[v as usize] = g.neighbors(v).iter().filter(|&&w| alive[w as usize]).count();
            }
        }

        if clusters.is_empty() {
            break;
        }
        let level = clusters.into_iter().map(|c| Subgraph::induced(g, c)).collect();
        result.per_k.insert(k, level);
        k += 1;
    }
    result.sort_levels();
    result
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::graph::{build_graph, EventGraph};

    #[test]
    fn edgeless_graph_is_empty() {
        let g = EventGraph::empty(6);
        for rule in [CoreRule::ClosedNeighborhood, CoreRule::Degree] {
            assert!(k_dbscan_with(&g, 3, rule).is_empty());
        }
    }

    #[test]
    fn star_center_expands_to_all_leaves() {
        let g = star(5);
        for rule in [CoreRule::ClosedNeighborhood, CoreRule::Degree] {
            let r = k_dbscan_with(&g, 3, rule);
            assert_eq!(r.per_k[&3].len(), 1);
            assert_eq!(r.per_k[&3][0].vertices, vec![0, 1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn border_vertex_joins_first_cluster() {
        // Two stars (centres 0 and 5) sharing leaf 4.
        let g = build_graph(9, &[(0, 1), (0, 2), (0, 3), (0, 4), (5, 4), (5, 6), (5, 7), (5, 8)]).unwrap();
        let r = k_dbscan_with(&g, 4, CoreRule::Degree);
        let level = &r.per_k[&4];
        assert_eq!(level.len(), 2);
        assert_eq!(level[0].vertices, vec![0, 1, 2, 3, 4]);
        assert_eq!(level[1].vertices, vec![5, 6, 7, 8]);
    }

    #[test]
    fn rules_differ_on_degree_two_bridge() {
        // Triangle 0-1-2, vertex 3 of degree 2 bridging to a pendant 4.
        let g = build_graph(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]).unwrap();
        let closed = k_dbscan_with(&g, 3, CoreRule::ClosedNeighborhood);
        assert_eq!(closed.per_k[&3][0].vertices, vec![0, 1, 2, 3, 4]);
        let open = k_dbscan_with(&g, 3, CoreRule::Degree);
        assert_eq!(open.per_k[&3][0].vertices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn levels_shrink_until_empty() {
        let g = complete(5);
        let r = k_dbscan(&g, 3);
        assert_eq!(r.per_k.keys().copied().collect::<Vec<_>>(), vec![3, 4, 5]);
        assert!(r.per_k.values().all(|l| l.len() == 1 && l[0].size() == 5));
        let r = k_dbscan_with(&g, 3, CoreRule::Degree);
        assert_eq!(r.per_k.keys().copied().collect::<Vec<_>>(), vec![3, 4]);
    }
}
