//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{read_json, run_ok};
use nrchain_core::cohesive::{
    core_numbers, decompose, enumerate_cliques, k_core_decompose, k_dbscan, k_truss_decompose, truss_numbers,
    DecomposeParams, Method,
};
use nrchain_core::graph::{build_graph, compute_supports, connected_components, EventGraph};
use nrchain_core::ingest::Event;
use nrchain_core::knox::{build_table, expected_and_residuals, knox_test, KnoxConfig, Overflow};
use nrchain_core::st_index::{neighbor_pairs, PairLimits, RTree3, RTreeParams, STPoint};
use nrchain_core::synth::{generate, planted_cluster, SynthConfig};
use nrchain_testkit as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed of the planted Knox dataset.
const PLANTED_SEED: u64 = 20_240_611;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let spent = start.elapsed();
    ensure(spent < limit, || format!("took {spent:.1?}, limit {limit:?}"))?;
    Ok(spent)
}

/// The random graphs shared by criteria 1, 3 and 4.
fn random_instances() -> Vec<(usize, Vec<(u32, u32)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    (0..500)
        .map(|_| {
            let n = rng.gen_range(1..=64u32);
            let p = rng.gen_range(0.02..0.35);
            (n as usize, oracle::random_graph(&mut rng, n, p))
        })
        .collect()
}

fn oracle_equivalence(instances: &[(usize, Vec<(u32, u32)>)]) -> Outcome {
    let start = Instant::now();
    for (i, (n, edges)) in instances.iter().enumerate() {
        let g = build_graph(*n, edges).map_err(|e| e.to_string())?;
        ensure(core_numbers(&g) == oracle::core_numbers_fixpoint(*n, edges), || format!("core numbers, graph {i}"))?;
        ensure(truss_numbers(&g) == oracle::truss_numbers_recount(*n, edges), || format!("truss numbers, graph {i}"))?;
        let cliques: BTreeSet<Vec<u32>> = enumerate_cliques(&g, 2, usize::MAX).cliques.into_iter().collect();
        ensure(cliques == oracle::maximal_cliques_bitset(*n, edges, 2), || format!("cliques, graph {i}"))?;
        ensure(connected_components(&g).members == oracle::components_by_closure(*n, edges), || {
            format!("components, graph {i}")
        })?;
    }
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!("{} graphs, {t:.1?}", instances.len()))
}

fn pair_equivalence() -> Outcome {
    let events = generate(&SynthConfig {
        events: 5_000,
        clusters: 60,
        extent: 10_000.0,
        seed: 2,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let points: Vec<STPoint> = events.iter().map(STPoint::from).collect();
    let tree = RTree3::build(&points, RTreeParams::default()).map_err(|e| e.to_string())?;
    let got = neighbor_pairs(&tree, &points, PairLimits::new(100.0, 100.0, 10.0).map_err(|e| e.to_string())?);
    let plain: Vec<oracle::Pt> = events
        .iter()
        .map(|e| oracle::Pt {
            id: e.id,
            x: e.x,
            y: e.y,
            t: e.t,
        })
        .collect();
    let expected = oracle::pairs_double_loop(&plain, 100.0, 100.0, 10.0);
    ensure(got == expected, || format!("{} index pairs vs {} double-loop pairs", got.len(), expected.len()))?;
    let t = within(Duration::from_secs(30), start)?;
    Ok(format!("{} pairs, {t:.1?}", got.len()))
}

fn subset<T: Ord>(a: &[T], b: &[T]) -> bool {
    let b: BTreeSet<&T> = b.iter().collect();
    a.iter().all(|x| b.contains(x))
}

fn containment(graphs: &[EventGraph]) -> Outcome {
    let mut checks = 0usize;
    for (i, g) in graphs.iter().enumerate() {
        let cores = k_core_decompose(g, 1);
        let trusses = k_truss_decompose(g, 2);
        let top = cores.per_k.keys().chain(trusses.per_k.keys()).copied().max().unwrap_or(0);
        for k in 2..=top + 1 {
            ensure(subset(&trusses.vertices_at(k), &cores.vertices_at(k - 1)), || format!("graph {i}: {k}-truss vertices"))?;
            ensure(subset(&trusses.edges_at(k), &cores.edges_at(k - 1)), || format!("graph {i}: {k}-truss edges"))?;
            ensure(subset(&cores.vertices_at(k + 1), &cores.vertices_at(k)), || format!("graph {i}: {}-core", k + 1))?;
            ensure(subset(&trusses.edges_at(k + 1), &trusses.edges_at(k)), || format!("graph {i}: {}-truss", k + 1))?;
            checks += 4;
        }
        for c in enumerate_cliques(g, 2, usize::MAX).cliques {
            let edges: Vec<(u32, u32)> =
                c.iter().enumerate().flat_map(|(j, &u)| c[j + 1..].iter().map(move |&v| (u, v))).collect();
            ensure(subset(&edges, &trusses.edges_at(c.len() as u32)), || format!("graph {i}: clique {c:?}"))?;
            checks += 1;
        }
    }
    Ok(format!("{checks} inclusions over {} graphs", graphs.len()))
}

/// Runs at the default k_min of 3: a 2-clique is a bare edge, whose
/// endpoints have degree 1 and so contribute 0.
fn coefficients(graphs: &[EventGraph]) -> Outcome {
    let params = DecomposeParams::default();
    let mut subgraphs = 0usize;
    for (i, g) in graphs.iter().enumerate() {
        for method in Method::ALL {
            let r = decompose(g, method, &params);
            for (k, subs) in r.levels() {
                for s in subs {
                    let c = s.clustering_coefficient;
                    if method == Method::Clique {
                        ensure(c == 1.0, || format!("graph {i}: clique at k={k} has {c}"))?;
                    } else {
                        ensure((0.0..=1.0).contains(&c), || format!("graph {i}: {method} k={k} has {c}"))?;
                    }
                    subgraphs += 1;
                }
            }
        }
    }
    Ok(format!("{subgraphs} subgraphs"))
}

fn knox_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..40 {
        let n = rng.gen_range(2..300);
        let spread = rng.gen_range(10.0..5_000.0);
        let events: Vec<Event> = (0..n)
            .map(|i| {
                Event::new(
                    i as u32,
                    rng.gen_range(0.0..spread),
                    rng.gen_range(0.0..spread),
                    rng.gen_range(0.0..200.0),
                    "a",
                )
            })
            .collect();
        let cfg = KnoxConfig {
            distance_bins: rng.gen_bool(0.5).then(|| rng.gen_range(1..20)),
            time_bins: rng.gen_bool(0.5).then(|| rng.gen_range(1..10)),
            overflow: Overflow::Clamp,
            ..KnoxConfig::default()
        };
        let table = expected_and_residuals(build_table(&events, &cfg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let pairs = (n * (n - 1) / 2) as u64;
        ensure(table.observed.total() == pairs, || format!("round {round}: {} != {pairs}", table.observed.total()))?;
        let e = table.expected.as_ref().expect("expected filled");
        let rows = table.observed.row_totals();
        let cols = table.observed.col_totals();
        let close = |a: f64, b: u64| (a - b as f64).abs() <= 1e-9 * (b as f64).max(1.0);
        for r in 0..e.rows {
            let s: f64 = (0..e.cols).map(|c| e.get(r, c)).sum();
            ensure(close(s, rows[r]), || format!("round {round}: row {r} margin {s} vs {}", rows[r]))?;
        }
        for c in 0..e.cols {
            let s: f64 = (0..e.rows).map(|r| e.get(r, c)).sum();
            ensure(close(s, cols[c]), || format!("round {round}: column {c} margin {s} vs {}", cols[c]))?;
        }
    }
    Ok("40 random tables".into())
}

fn knox_detection() -> Outcome {
    let start = Instant::now();
    let events = planted_cluster(PLANTED_SEED);
    let cfg = KnoxConfig {
        distance_step: 100.0,
        time_step: 14.0,
        permutations: 99,
        seed: PLANTED_SEED,
        ..KnoxConfig::default()
    };
    let table = knox_test(&events, &cfg).map_err(|e| e.to_string())?;
    let residual = table.residuals.as_ref().expect("residuals").get(0, 0);
    let p = table.p_values.as_ref().expect("p-values").get(0, 0);
    ensure(residual > 0.0, || format!("residual(0,0) = {residual}"))?;
    ensure(p <= 0.05, || format!("p(0,0) = {p}"))?;
    let t = within(Duration::from_secs(20), start)?;
    Ok(format!("residual {residual:.2}, p {p}, {t:.1?}"))
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("read dir") {
            let p = entry.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(root).expect("prefix").display().to_string();
                out.push((name, fs::read(&p).expect("read file")));
            }
        }
    }
    out.sort();
    out
}

fn determinism(work: &Path) -> Outcome {
    let raw = work.join("det.csv");
    run_ok(
        work,
        &["synth", "--output", raw.to_str().unwrap(), "--events", "3000", "--clusters", "40", "--extent", "6000", "--categories", "a,b"],
    );
    let mut baseline: Option<Vec<(String, Vec<u8>)>> = None;
    let mut runs = 0;
    for (label, threads) in [("t1", "1"), ("t1-again", "1"), ("t4", "4"), ("t8", "8")] {
        let out = work.join(label);
        run_ok(
            &out,
            &["--threads", threads, "run", "--input", raw.to_str().unwrap(), "--binary", "--permutations", "49", "--seed", "3"],
        );
        let files = tree_bytes(&out);
        match &baseline {
            None => baseline = Some(files),
            Some(b) => {
                let names: Vec<&String> = b.iter().map(|f| &f.0).collect();
                ensure(names == files.iter().map(|f| &f.0).collect::<Vec<_>>(), || format!("{label}: different file set"))?;
                for (a, f) in b.iter().zip(&files) {
                    ensure(a.1 == f.1, || format!("{label}: {} differs", f.0))?;
                }
            }
        }
        runs += 1;
    }
    let files = baseline.map_or(0, |b| b.len());
    Ok(format!("{files} files identical over {runs} runs (threads 1, 1, 4, 8)"))
}

fn example_graph() -> Outcome {
    let candidates = oracle::example_candidates();
    ensure(!candidates.is_empty(), || "no candidate graphs".into())?;
    for (i, edges) in candidates.iter().enumerate() {
        let g = build_graph(8, edges).map_err(|e| e.to_string())?;
        ensure(edges.len() == 13, || format!("candidate {i}: {} edges", edges.len()))?;
        ensure(g.degree(1) == 5 && g.degree(5) == 2, || format!("candidate {i}: degrees"))?;
        let support = compute_supports(&g);
        let sup = |u, v| support[g.edge_id(u, v).expect("edge") as usize];
        ensure(sup(1, 2) == 3 && sup(2, 7) == 1, || format!("candidate {i}: supports"))?;
        let cliques = enumerate_cliques(&g, 2, usize::MAX).cliques;
        ensure(cliques.contains(&vec![0, 1, 3, 4]), || format!("candidate {i}: cliques {cliques:?}"))?;
        let dbscan = k_dbscan(&g, 3);
        let level: Vec<&Vec<u32>> = dbscan.per_k.get(&3).into_iter().flatten().map(|s| &s.vertices).collect();
        ensure(level == vec![&(0..8).collect::<Vec<u32>>()], || format!("candidate {i}: 3-DBSCAN {level:?}"))?;
    }
    Ok(format!("{} candidate graphs", candidates.len()))
}

fn scale(work: &Path) -> Outcome {
    let raw = work.join("big.csv");
    run_ok(
        work,
        &["synth", "--output", raw.to_str().unwrap(), "--events", "100000", "--clusters", "2000", "--extent", "50000", "--seed", "9"],
    );
    let out = work.join("big");
    let start = Instant::now();
    run_ok(&out, &["ingest", "--input", raw.to_str().unwrap()]);
    run_ok(&out, &["pairs"]);
    run_ok(&out, &["decompose", "--methods", "core,truss,dbscan"]);
    let t = within(Duration::from_secs(300), start)?;
    let pairs = read_json(&out.join("pairs_summary.json"));
    ensure(pairs["vertices"].as_u64().unwrap_or(0) > 90_000, || format!("only {} events", pairs["vertices"]))?;

    run_ok(&out, &["decompose", "--methods", "clique", "--k-min", "2", "--max-cliques", "100"]);
    let clique = read_json(&out.join("decompose/clique.json"));
    ensure(clique["result"]["truncated"] == true, || "clique run not flagged truncated".into())?;
    let stored: usize = clique["levels"].as_array().map_or(0, |l| l.iter().map(|x| x["subgraphs"].as_u64().unwrap_or(0) as usize).sum());
    ensure(stored <= 100, || format!("{stored} cliques kept past the cap"))?;
    Ok(format!("{} events, {} edges, {t:.1?}; clique cap hit at {stored}", pairs["vertices"], pairs["edges"]))
}

fn main() -> ExitCode {
    // Keep panics inside criteria from printing backtraces over the report.
    panic::set_hook(Box::new(|_| {}));
    let work = tempfile::tempdir().expect("temp dir");
    let instances = random_instances();
    let mut graphs: Vec<EventGraph> =
        instances.iter().map(|(n, e)| build_graph(*n, e).expect("valid random graph")).collect();
    graphs.extend(oracle::example_candidates().iter().map(|e| build_graph(8, e).expect("valid candidate")));

    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("oracle equivalence", Box::new(|| oracle_equivalence(&instances))),
        ("pair generation equivalence", Box::new(pair_equivalence)),
        ("containment", Box::new(|| containment(&graphs))),
        ("clustering coefficients", Box::new(|| coefficients(&graphs))),
        ("knox conservation", Box::new(knox_conservation)),
        ("knox near-repeat detection", Box::new(knox_detection)),
        ("determinism", Box::new(|| determinism(work.path()))),
        ("example graph", Box::new(example_graph)),
        ("desk-scale envelope", Box::new(|| scale(work.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(o) => o,
            Err(payload) => Err(payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
