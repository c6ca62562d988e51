use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::core::degeneracy_order;
use super::{DecompositionResult, Method, Subgraph};
use crate::graph::EventGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueSet {
    /// Maximal cliques, each ascending; the list is in lexicographic order.
    pub cliques: Vec<Vec<u32>>,
    /// Clique size -> count.
    pub histogram: BTreeMap<usize, usize>,
    /// Enumeration stopped after `max_count` cliques.
    pub truncated: bool,
}

struct Enumerator<'g> {
    g: &'g EventGraph,
    k_min: usize,
    max_count: usize,
    found: Vec<Vec<u32>>,
    truncated: bool,
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn intersection_len(a: &[u32], b: &[u32]) -> usize {
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

impl Enumerator<'_> {
    fn report(&mut self, r: &[u32]) {
        if self.found.len() == self.max_count {
            self.truncated = true;
            return;
        }
        let mut clique = r.to_vec();
        clique.sort_unstable();
        self.found.push(clique);
    }

    /// Bron-Kerbosch with Tomita pivoting; `p` and `x` are sorted.
    fn expand(&mut self, r: &mut Vec<u32>, mut p: Vec<u32>, mut x: Vec<u32>) {
        if self.truncated {
            return;
        }
        if p.is_empty() {
            if x.is_empty() && r.len() >= self.k_min {
                self.report(r);
            }
            return;
        }
        if r.len() + p.len() < self.k_min {
            return;
        }
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| (intersection_len(&p, self.g.neighbors(u)), std::cmp::Reverse(u)))
            .expect("p is non-empty");
        let pivot_nbrs = self.g.neighbors(pivot);
        let candidates: Vec<u32> = p.iter().copied().filter(|v| pivot_nbrs.binary_search(v).is_err()).collect();
        for v in candidates {
            let nv = self.g.neighbors(v);
            r.push(v);
            self.expand(r, intersect(&p, nv), intersect(&x, nv));
            r.pop();
            if self.truncated {
                return;
            }
            let i = p.binary_search(&v).expect("candidate in p");
            p.remove(i);
            let j = x.binary_search(&v).unwrap_err();
            x.insert(j, v);
        }
    }
}

/// All maximal cliques with at least `k_min` vertices, by Bron-Kerbosch
/// with pivoting over a degeneracy ordering. Stops with `truncated` set
/// once `max_count` cliques have been collected and another is found.
pub fn enumerate_cliques(g: &EventGraph, k_min: u32, max_count: usize) -> CliqueSet {
    let order = degeneracy_order(g);
    let mut rank = vec![0usize; g.vertex_count()];
    for (i, &v) in order.iter().enumerate() {
        rank[v as usize] = i;
    }
    let mut e = Enumerator {
        g,
        k_min: k_min as usize,
        max_count,
        found: Vec::new(),
        truncated: false,
    };
    let mut r = Vec::new();
    for &v in &order {
        if e.truncated {
            break;
        }
        let rv = rank[v as usize];
        let (later, earlier): (Vec<u32>, Vec<u32>) = g.neighbors(v).iter().partition(|&&w| rank[w as usize] > rv);
        if later.len() + 1 < e.k_min {
            continue;
        }
        r.push(v);
        e.expand(&mut r, later, earlier);
        r.pop();
    }
    let mut cliques = e.found;
    cliques.sort_unstable();
    let mut histogram = BTreeMap::new();
    for c in &cliques {
        *histogram.entry(c.len()).or_insert(0) += 1;
    }
    CliqueSet {
        cliques,
        histogram,
        truncated: e.truncated,
    }
}

/// Reports maximal cliques keyed by their size.
pub fn clique_decomposition(set: &CliqueSet, k_min: u32) -> DecompositionResult {
    let mut result = DecompositionResult::new(Method::Clique, k_min);
    result.truncated = set.truncated;
    for c in &set.cliques {
        let edges: Vec<(u32, u32)> = c
            .iter()
            .enumerate()
            .flat_map(|(i, &u)| c[i + 1..].iter().map(move |&v| (u, v)))
            .collect();
        result
            .per_k
            .entry(c.len() as u32)
            .or_default()
            .push(Subgraph::new(c.clone(), edges));
    }
    result.sort_levels();
    result
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn k4_has_one_maximal_clique() {
        let set = enumerate_cliques(&complete(4), 3, 100);
        assert_eq!(set.cliques, vec![vec![0, 1, 2, 3]]);
        assert!(!set.truncated);
    }

    #[test]
    fn small_cliques_are_filtered() {
        let g = build_graph(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]).unwrap();
        assert_eq!(enumerate_cliques(&g, 3, 100).cliques, vec![vec![0, 1, 2]]);
        assert_eq!(
            enumerate_cliques(&g, 2, 100).cliques,
            vec![vec![0, 1, 2], vec![2, 3], vec![3, 4]]
        );
    }

    #[test]
    fn truncation_is_flagged() {
        // Disjoint triangles: 4 maximal cliques, cap at 2.
        let mut pairs = Vec::new();
        for b in 0..4u32 {
            pairs.extend([(3 * b, 3 * b + 1), (3 * b + 1, 3 * b + 2), (3 * b, 3 * b + 2)]);
        }
        let g = build_graph(12, &pairs).unwrap();
        let set = enumerate_cliques(&g, 3, 2);
        assert!(set.truncated);
        assert_eq!(set.cliques.len(), 2);
        assert!(!enumerate_cliques(&g, 3, 4).truncated);
    }

    #[test]
    fn cliques_report_coefficient_one() {
        let g = complete(6);
        let r = clique_decomposition(&enumerate_cliques(&g, 3, 10), 3);
        assert_eq!(r.per_k[&6][0].clustering_coefficient, 1.0);
    }
}
