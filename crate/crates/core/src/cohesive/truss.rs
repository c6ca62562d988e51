use super::{components_of_edges, DecompositionResult, Method, Subgraph};
use crate::graph::{compute_supports, EventGraph};

struct Buckets {
    support: Vec<u32>,
    order: Vec<u32>,
    pos: Vec<usize>,
    bin: Vec<usize>,
}

impl Buckets {
    /// Lowers the support of `f` by one unless it is already at `floor`.
    fn decrement(&mut self, f: u32, floor: u32) {
        let sf = self.support[f as usize];
        if sf <= floor {
            return;
        }
        let pf = self.pos[f as usize];
        let front = self.bin[sf as usize];
        let h = self.order[front];
        if h != f {
            self.order.swap(front, pf);
            self.pos[h as usize] = pf;
            self.pos[f as usize] = front;
        }
        self.bin[sf as usize] += 1;
        self.support[f as usize] -= 1;
    }
}

/// Truss number of every edge: the largest k such that the edge lies in
/// the k-truss. Edges in no triangle get 2.
///
/// Edges are bucket sorted by support and peeled in ascending order; when
/// an edge is removed, the two other edges of each of its remaining
/// triangles lose one unit of support and move one bucket down.
pub fn truss_numbers(g: &EventGraph) -> Vec<u32> {
    let m = g.edge_count();
    let support = compute_supports(g);
    let max_support = support.iter().copied().max().unwrap_or(0) as usize;

    let mut bin = vec![0usize; max_support + 2];
    for &s in &support {
        bin[s as usize + 1] += 1;
    }
    for s in 0..=max_support {
        bin[s + 1] += bin[s];
    }
    let mut pos = vec![0usize; m];
    let mut order = vec![0u32; m];
    {
        let mut next = bin.clone();
        for e in 0..m {
            let s = support[e] as usize;
            pos[e] = next[s];
            order[next[s]] = e as u32;
            next[s] += 1;
        }
    }

    let mut buckets = Buckets { support, order, pos, bin };
    let mut removed = vec![false; m];
    let mut truss = vec![2u32; m];
    for i in 0..m {
        let e = buckets.order[i];
        let s = buckets.support[e as usize];
        truss[e as usize] = s + 2;
        let (u, v) = g.edge(e);
        let (a, b) = if g.degree(u) <= g.degree(v) { (u, v) } else { (v, u) };
        for (&w, &e_aw) in g.neighbors(a).iter().zip(g.neighbor_edge_ids(a)) {
            if w == b || removed[e_aw as usize] {
                continue;
            }
            let Some(e_bw) = g.edge_id(b, w) else { continue };
            if removed[e_bw as usize] {
                continue;
            }
            buckets.decrement(e_aw, s);
            buckets.decrement(e_bw, s);
        }
        removed[e as usize] = true;
    }
    truss
}

/// For each k ≥ `k_min`, the connected pieces of the k-truss (edges with
/// truss number ≥ k and their endpoints) until no edge remains.
pub fn k_truss_decompose(g: &EventGraph, k_min: u32) -> DecompositionResult {
    let truss = truss_numbers(g);
    let mut result = DecompositionResult::new(Method::Truss, k_min);
    let top = truss.iter().copied().max().unwrap_or(0);
    for k in k_min.max(2)..=top {
        let edges = g
            .edges()
            .iter()
            .zip(&truss)
            .filter(|(_, &t)| t >= k)
            .map(|(&e, _)| e);
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
