use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use super::{CoreRule, DecompositionResult, Method, Subgraph};
use crate::graph::EventGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    VertexOutOfRange { vertex: u32 },
    /// A reported edge is not an edge of the graph.
    MissingEdge { u: u32, v: u32 },
    /// A reported edge has an endpoint outside the subgraph's vertex set.
    DanglingEdge { u: u32, v: u32 },
    LowDegree { vertex: u32, degree: usize },
    LowSupport { u: u32, v: u32, support: usize },
    NotAdjacent { u: u32, v: u32 },
    NotMaximal { vertex: u32 },
    WrongSize { size: usize },
    OutsideWorkingGraph { vertex: u32 },
    NoCoreVertex,
    Unreachable { vertex: u32 },
    NotExpanded { vertex: u32, neighbor: u32 },
    MissedCore { vertex: u32 },
    Overlap { vertex: u32 },
    /// Two members are adjacent in the graph but the edge was left out.
    MissingInducedEdge { u: u32, v: u32 },
    /// An edge of the k-truss that no subgraph of the level reports.
    MissingTrussEdge { u: u32, v: u32 },
    /// Two subgraphs of one level are joined by an edge and should be one.
    Split { u: u32, v: u32 },
    /// The level is absent or empty although the graph has a non-empty one.
    MissingLevel,
    /// A level below the lowest k the method produces.
    UnexpectedLevel,
    Duplicate { other: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub k: u32,
    /// Index of the offending subgraph within its level, when there is one.
    pub subgraph: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={}", self.k)?;
        if let Some(i) = self.subgraph {
            write!(f, " subgraph #{i}")?;
        }
        write!(f, ": {:?}", self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub checked_subgraphs: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Checker<'a> {
    g: &'a EventGraph,
    report: ValidationReport,
}

impl Checker<'_> {
    fn push(&mut self, k: u32, subgraph: Option<usize>, kind: ViolationKind) {
        self.report.violations.push(Violation { k, subgraph, kind });
    }

    /// Shared checks; returns the reported edges that exist in the graph.
    fn edges_in_graph(&mut self, k: u32, idx: usize, s: &Subgraph) -> Option<Vec<(u32, u32)>> {
        let n = self.g.vertex_count() as u32;
        let mut ok = true;
        for &v in &s.vertices {
            if v >= n {
                self.push(k, Some(idx), ViolationKind::VertexOutOfRange { vertex: v });
                ok = false;
            }
        }
        if !ok {
            return None;
        }
        let members: HashSet<u32> = s.vertices.iter().copied().collect();
        let mut kept = Vec::with_capacity(s.edges.len());
        for &(u, v) in &s.edges {
            if !members.contains(&u) || !members.contains(&v) {
                self.push(k, Some(idx), ViolationKind::DanglingEdge { u, v });
            } else if u >= n || v >= n || !self.g.has_edge(u, v) {
                self.push(k, Some(idx), ViolationKind::MissingEdge { u, v });
            } else {
                kept.push((u, v));
            }
        }
        Some(kept)
    }

    /// Every graph edge between two members must be reported.
    fn check_induced(&mut self, k: u32, idx: usize, s: &Subgraph, edges: &[(u32, u32)]) {
        let have: HashSet<(u32, u32)> = edges.iter().copied().collect();
        for &u in &s.vertices {
            for &w in self.g.neighbors(u) {
                if w > u && s.vertices.binary_search(&w).is_ok() && !have.contains(&(u, w)) {
                    self.push(k, Some(idx), ViolationKind::MissingInducedEdge { u, v: w });
                }
            }
        }
    }

    /// Every member must be reachable from the first over reported edges.
    fn check_connected(&mut self, k: u32, idx: usize, s: &Subgraph, edges: &[(u32, u32)]) {
        let Some(&first) = s.vertices.first() else {
            self.push(k, Some(idx), ViolationKind::WrongSize { size: 0 });
            return;
        };
        let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
        for &(u, v) in edges {
            adj.entry(u).or_default().push(v);
            adj.entry(v).or_default().push(u);
        }
        let mut seen: HashSet<u32> = HashSet::from([first]);
        let mut queue = VecDeque::from([first]);
        while let Some(u) = queue.pop_front() {
            for &w in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        for &v in &s.vertices {
            if !seen.contains(&v) {
                self.push(k, Some(idx), ViolationKind::Unreachable { vertex: v });
            }
        }
    }

    /// Marks the owner of every member; a vertex in two subgraphs is an
    /// overlap.
    fn owners(&mut self, k: u32, level: &[Subgraph]) -> Vec<Option<usize>> {
        let n = self.g.vertex_count();
        let mut owner = vec![None; n];
        for (idx, s) in level.iter().enumerate() {
            for &v in &s.vertices {
                if (v as usize) >= n {
                    continue;
                }
                match owner[v as usize] {
                    Some(_) => self.push(k, Some(idx), ViolationKind::Overlap { vertex: v }),
                    None => owner[v as usize] = Some(idx),
                }
            }
        }
        owner
    }

    fn check_core_subgraph(&mut self, k: u32, idx: usize, s: &Subgraph) {
        let Some(edges) = self.edges_in_graph(k, idx, s) else { return };
        let mut degree: HashMap<u32, usize> = s.vertices.iter().map(|&v| (v, 0)).collect();
        for &(u, v) in &edges {
            *degree.get_mut(&u).expect("member") += 1;
            *degree.get_mut(&v).expect("member") += 1;
        }
        for &v in &s.vertices {
            let d = degree[&v];
            if d < k as usize {
                self.push(k, Some(idx), ViolationKind::LowDegree { vertex: v, degree: d });
            }
        }
        self.check_induced(k, idx, s, &edges);
        self.check_connected(k, idx, s, &edges);
    }

    /// Walks k upward, peeling a private copy of the graph to each k-core,
    /// and compares every level with it.
    fn check_core(&mut self, result: &DecompositionResult) {
        let g = self.g;
        let n = g.vertex_count();
        let first = result.k_min.max(1);
        let top = result.per_k.keys().next_back().copied().unwrap_or(0).max(first);
        let mut alive = vec![true; n];
        let mut degree: Vec<usize> = (0..n as u32).map(|v| g.degree(v)).collect();
        for &k in result.per_k.keys().filter(|&&k| k < first) {
            self.push(k, None, ViolationKind::UnexpectedLevel);
        }
        for k in 1..=top + 1 {
            let mut queue: Vec<u32> = (0..n as u32).filter(|&v| alive[v as usize] && degree[v as usize] < k as usize).collect();
            while let Some(v) = queue.pop() {
                if !alive[v as usize] {
                    continue;
                }
                alive[v as usize] = false;
                for &w in g.neighbors(v) {
                    if alive[w as usize] {
                        degree[w as usize] -= 1;
                        if degree[w as usize] < k as usize {
                            queue.push(w);
                        }
                    }
                }
            }
            if k < first {
                continue;
            }
            let level = result.per_k.get(&k).map(Vec::as_slice).unwrap_or(&[]);
            for (idx, s) in level.iter().enumerate() {
                self.check_core_subgraph(k, idx, s);
            }
            self.report.checked_subgraphs += level.len();
            let owner = self.owners(k, level);
            self.check_coverage(k, level, &alive, &owner);
            for (u, v) in g.edges().iter().copied() {
                if let (Some(a), Some(b)) = (owner[u as usize], owner[v as usize]) {
                    if a != b {
                        self.push(k, Some(a.min(b)), ViolationKind::Split { u, v });
                    }
                }
            }
        }
    }

    /// Members of the true level that no subgraph reports.
    fn check_coverage(&mut self, k: u32, level: &[Subgraph], expected: &[bool], owner: &[Option<usize>]) {
        let missing: Vec<u32> = (0..expected.len() as u32)
            .filter(|&v| expected[v as usize] && owner[v as usize].is_none())
            .collect();
        if missing.is_empty() {
            return;
        }
        if level.is_empty() {
            self.push(k, None, ViolationKind::MissingLevel);
        } else {
            for vertex in missing {
                self.push(k, None, ViolationKind::NotMaximal { vertex });
            }
        }
    }

    fn check_truss_subgraph(&mut self, k: u32, idx: usize, s: &Subgraph) -> Vec<(u32, u32)> {
        let Some(edges) = self.edges_in_graph(k, idx, s) else { return Vec::new() };
        let mut adj: HashMap<u32, HashSet<u32>> = HashMap::new();
        for &(u, v) in &edges {
            adj.entry(u).or_default().insert(v);
            adj.entry(v).or_default().insert(u);
        }
        let need = (k as usize).saturating_sub(2);
        for &(u, v) in &edges {
            let support = adj[&u].intersection(&adj[&v]).count();
            if support < need {
                self.push(k, Some(idx), ViolationKind::LowSupport { u, v, support });
            }
        }
        for &v in &s.vertices {
            if !adj.contains_key(&v) {
                self.push(k, Some(idx), ViolationKind::LowDegree { vertex: v, degree: 0 });
            }
        }
        self.check_connected(k, idx, s, &edges);
        edges
    }

    /// Same walk as `check_core`, peeling edges by triangle count.
    fn check_truss(&mut self, result: &DecompositionResult) {
        let g = self.g;
        let m = g.edge_count();
        let first = result.k_min.max(2);
        let top = result.per_k.keys().next_back().copied().unwrap_or(0).max(first);
        let id = |u: u32, v: u32| g.edge_id(u, v).expect("edge") as usize;
        let mut alive = vec![true; m];
        let mut support: Vec<usize> = g
            .edges()
            .iter()
            .map(|&(u, v)| g.neighbors(u).iter().filter(|&&w| g.has_edge(v, w)).count())
            .collect();
        for &k in result.per_k.keys().filter(|&&k| k < first) {
            self.push(k, None, ViolationKind::UnexpectedLevel);
        }
        for k in 2..=top + 1 {
            let need = k as usize - 2;
            let mut queue: Vec<usize> = (0..m).filter(|&e| alive[e] && support[e] < need).collect();
            while let Some(e) = queue.pop() {
                if !alive[e] {
                    continue;
                }
                alive[e] = false;
                let (u, v) = g.edges()[e];
                for &w in g.neighbors(u) {
                    if !g.has_edge(v, w) {
                        continue;
                    }
                    let (a, b) = (id(u, w), id(v, w));
                    if alive[a] && alive[b] {
                        for x in [a, b] {
                            support[x] -= 1;
                            if support[x] < need {
                                queue.push(x);
                            }
                        }
                    }
                }
            }
            if k < first {
                continue;
            }
            let level = result.per_k.get(&k).map(Vec::as_slice).unwrap_or(&[]);
            let mut reported: HashSet<(u32, u32)> = HashSet::new();
            for (idx, s) in level.iter().enumerate() {
                reported.extend(self.check_truss_subgraph(k, idx, s));
            }
            self.report.checked_subgraphs += level.len();
            self.owners(k, level);
            let missing: Vec<(u32, u32)> = (0..m).filter(|&e| alive[e]).map(|e| g.edges()[e]).filter(|e| !reported.contains(e)).collect();
            if missing.is_empty() {
                continue;
            }
            if level.is_empty() {
                self.push(k, None, ViolationKind::MissingLevel);
            } else {
                for (u, v) in missing {
                    self.push(k, None, ViolationKind::MissingTrussEdge { u, v });
                }
            }
        }
    }

    fn check_clique(&mut self, k: u32, idx: usize, s: &Subgraph) {
        let Some(edges) = self.edges_in_graph(k, idx, s) else { return };
        if s.vertices.len() != k as usize {
            self.push(k, Some(idx), ViolationKind::WrongSize { size: s.vertices.len() });
        }
        for (i, &u) in s.vertices.iter().enumerate() {
            for &v in &s.vertices[i + 1..] {
                if !self.g.has_edge(u, v) {
                    self.push(k, Some(idx), ViolationKind::NotAdjacent { u, v });
                }
            }
        }
        self.check_induced(k, idx, s, &edges);
        let Some(&first) = s.vertices.first() else { return };
        for &w in self.g.neighbors(first) {
            if s.vertices.binary_search(&w).is_err() && s.vertices.iter().all(|&u| self.g.has_edge(u, w)) {
                self.push(k, Some(idx), ViolationKind::NotMaximal { vertex: w });
            }
        }
    }

    fn check_cliques(&mut self, result: &DecompositionResult) {
        for (&k, level) in &result.per_k {
            let mut seen: HashMap<&[u32], usize> = HashMap::new();
            for (idx, s) in level.iter().enumerate() {
                self.check_clique(k, idx, s);
                if let Some(&other) = seen.get(s.vertices.as_slice()) {
                    self.push(k, Some(idx), ViolationKind::Duplicate { other });
                } else {
                    seen.insert(&s.vertices, idx);
                }
            }
            self.report.checked_subgraphs += level.len();
        }
    }

    /// Rebuilds the working graph of each level from the previous level
    /// and re-checks seeding, expansion and reachability of every cluster.
    fn check_dbscan(&mut self, result: &DecompositionResult) {
        let rule = result.core_rule.unwrap_or(CoreRule::default());
        let g = self.g;
        let n = g.vertex_count();
        let mut working: Vec<bool> = vec![true; n];
        let last = result.per_k.keys().next_back().copied();
        let mut k = result.k_min;
        for &key in result.per_k.keys().filter(|&&key| key < k) {
            self.push(key, None, ViolationKind::UnexpectedLevel);
        }
        loop {
            let degree: Vec<usize> = (0..n as u32)
                .map(|v| g.neighbors(v).iter().filter(|&&w| working[w as usize]).count())
                .collect();
            let level = result.per_k.get(&k).map(Vec::as_slice).unwrap_or(&[]);
            if level.is_empty() {
                if (0..n).any(|v| working[v] && rule.is_core(degree[v], k)) {
                    self.push(k, None, ViolationKind::MissingLevel);
                }
                if last.map_or(true, |l| k >= l) {
                    break;
                }
                // Nothing survives an empty level; later levels are reported
                // by the overlap with an empty working graph.
                working.iter_mut().for_each(|w| *w = false);
                k += 1;
                continue;
            }
            let owner = self.owners(k, level);
            let is_core = |v: u32| (v as usize) < n && working[v as usize] && rule.is_core(degree[v as usize], k);
            // Clusters are grown from the smallest core vertex upward, so the
            // seed, not the listing position, decides who claims a border.
            let seeds: Vec<Option<u32>> = level.iter().map(|s| s.vertices.iter().copied().find(|&v| is_core(v))).collect();
            let mut pending = Vec::new();
            for (idx, s) in level.iter().enumerate() {
                let Some(edges) = self.edges_in_graph(k, idx, s) else { continue };
                self.check_induced(k, idx, s, &edges);
                for &v in &s.vertices {
                    if !working[v as usize] {
                        pending.push((idx, ViolationKind::OutsideWorkingGraph { vertex: v }));
                    }
                }
                let Some(seed) = seeds[idx] else {
                    pending.push((idx, ViolationKind::NoCoreVertex));
                    continue;
                };
                let mut reached: HashSet<u32> = HashSet::from([seed]);
                let mut queue = VecDeque::from([seed]);
                while let Some(u) = queue.pop_front() {
                    for &w in g.neighbors(u) {
                        if !working[w as usize] {
                            continue;
                        }
                        match owner[w as usize] {
                            Some(o) if o == idx => {
                                if reached.insert(w) && is_core(w) {
                                    queue.push_back(w);
                                }
                            }
                            Some(o) if !is_core(w) && seeds[o].is_some_and(|so| so < seed) => {}
                            _ => pending.push((idx, ViolationKind::NotExpanded { vertex: u, neighbor: w })),
                        }
                    }
                }
                for &v in &s.vertices {
                    if !reached.contains(&v) {
                        pending.push((idx, ViolationKind::Unreachable { vertex: v }));
                    }
                }
            }
            for v in 0..n as u32 {
                if working[v as usize] && owner[v as usize].is_none() && is_core(v) {
                    self.push(k, None, ViolationKind::MissedCore { vertex: v });
                }
            }
            for (idx, kind) in pending {
                self.push(k, Some(idx), kind);
            }
            for (v, w) in working.iter_mut().enumerate() {
                *w = owner[v].is_some();
            }
            self.report.checked_subgraphs += level.len();
            k += 1;
        }
    }
}

/// Re-checks every level of `result` against `g`: the defining property
/// of each subgraph, and that each level is complete.
pub fn validate(result: &DecompositionResult, g: &EventGraph) -> ValidationReport {
    let mut checker = Checker {
        g,
        report: ValidationReport::default(),
    };
    match result.method {
        Method::Core => checker.check_core(result),
        Method::Truss => checker.check_truss(result),
        Method::Clique => checker.check_cliques(result),
        Method::Dbscan => checker.check_dbscan(result),
    }
    checker.report
}
