use super::{components_of_edges, DecompositionResult, Method, Subgraph};
use crate::graph::EventGraph;

/// Bucket-queue peeling. Returns the core number of every vertex and the
/// order in which vertices were removed (a degeneracy ordering).
fn peel(g: &EventGraph) -> (Vec<u32>, Vec<u32>) {
    let n = g.vertex_count();
    let mut degree: Vec<u32> = (0..n as u32).map(|v| g.degree(v) as u32).collect();
    let max_degree = degree.iter().copied().max().unwrap_or(0) as usize;

    // bin[d] = first position of degree-d vertices in `order`.
    let mut bin = vec![0usize; max_degree + 2];
    for &d in &degree {
        bin[d as usize + 1] += 1;
    }
    for d in 0..=max_degree {
        bin[d + 1] += bin[d];
    }
    let mut pos = vec![0usize; n];
    let mut order = vec![0u32; n];
    {
        let mut next = bin.clone();
        for v in 0..n {
            let d = degree[v] as usize;
            pos[v] = next[d];
            order[next[d]] = v as u32;
            next[d] += 1;
        }
    }

    for i in 0..n {
        let v = order[i];
        let dv = degree[v as usize];
        for &w in g.neighbors(v) {
            let dw = degree[w as usize];
            if dw > dv {
                // Move w to the front of its bucket, then shrink the bucket.
                let pw = pos[w as usize];
                let front = bin[dw as usize];
                let u = order[front];
                if u != w {
                    order.swap(front, pw);
                    pos[u as usize] = pw;
                    pos[w as usize] = front;
                }
                bin[dw as usize] += 1;
                degree[w as usize] -= 1;
            }
        }
    }
    (degree, order)
}

/// Core number of every vertex: the largest k such that the vertex lies
/// in the k-core.
pub fn core_numbers(g: &EventGraph) -> Vec<u32> {
    peel(g).0
}

/// Vertices in the order the peeling removed them (smallest-last order).
pub fn degeneracy_order(g: &EventGraph) -> Vec<u32> {
    peel(g).1
}

/// For each k ≥ `k_min` up to the largest non-empty core, the connected
/// components of the k-core, each with its induced edges.
pub fn k_core_decompose(g: &EventGraph, k_min: u32) -> DecompositionResult {
    let core = core_numbers(g);
    let mut result = DecompositionResult::new(Method::Core, k_min);
    let top = core.iter().copied().max().unwrap_or(0);
    for k in k_min.max(1)..=top {
        let in_core = |v: u32| core[v as usize] >= k;
        let edges = g
            .edges()
            .iter()
            .copied()
            .filter(|&(u, v)| in_core(u) && in_core(v));
        let level: Vec<Subgraph> = components_of_edges(g.vertex_count(), edges)
            .into_iter()
            .map(|(vs, es)| Subgraph::new(vs, es))
            .collect();
        if level.is_empty() {
            break;
        }
        result.per_k.insert(k, level);
    }
    result
}
