use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use nrchain_core::cohesive::{decompose_by_component, validate, DecompositionResult, Method};
use nrchain_core::graph::{build_graph, connected_components, graph_stats, read_edge_list, write_edge_list};
use nrchain_core::ingest::{self, ids_by_category, Event};
use nrchain_core::knox::{self, KnoxTable};
use nrchain_core::st_index::{neighbor_pairs, write_pairs_bin, RTree3, RTreeParams, STPoint};
use nrchain_core::SCHEMA_VERSION;

use crate::config::PipelineConfig;

/// File names inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn events(&self) -> PathBuf {
        self.root.join("events.csv")
    }
    pub fn rejects(&self) -> PathBuf {
        self.root.join("rejects.csv")
    }
    pub fn ingest_summary(&self) -> PathBuf {
        self.root.join("ingest_summary.json")
    }
    pub fn edges(&self) -> PathBuf {
        self.root.join("edges.txt")
    }
    pub fn pairs_bin(&self) -> PathBuf {
        self.root.join("pairs.bin")
    }
    pub fn pairs_summary(&self) -> PathBuf {
        self.root.join("pairs_summary.json")
    }
    pub fn graph_stats(&self) -> PathBuf {
        self.root.join("graph_stats.json")
    }
    pub fn decompose_dir(&self) -> PathBuf {
        self.root.join("decompose")
    }
    pub fn decompose_index(&self) -> PathBuf {
        self.decompose_dir().join("index.json")
    }
    pub fn decompose_method(&self, m: Method) -> PathBuf {
        self.decompose_dir().join(format!("{m}.json"))
    }
    pub fn knox_dir(&self) -> PathBuf {
        self.root.join("knox")
    }
    pub fn knox_summary(&self) -> PathBuf {
        self.knox_dir().join("summary.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

/// Wall-clock seconds per named phase, in the order recorded.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub phases: Vec<(String, f64)>,
}

impl Timings {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        log::info!("{name}: {secs:.3}s");
        self.phases.push((name.to_string(), secs));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let map: Vec<serde_json::Value> = self
            .phases
            .iter()
            .map(|(n, s)| serde_json::json!({ "phase": n, "seconds": s }))
            .collect();
        write_json(path, &serde_json::json!({ "phases": map }))
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Reads a stage output, naming the stage that should have produced it.
pub fn read_json<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T> {
    let file = open_stage_file(path, stage)?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn open_stage_file(path: &Path, stage: &str) -> Result<File> {
    if !path.exists() {
        bail!(
            "missing output of stage `{stage}`: {} not found (run `nrchain {stage}` first)",
            path.display()
        );
    }
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?))
}

pub fn load_events(layout: &Layout) -> Result<Vec<Event>> {
    let file = open_stage_file(&layout.events(), "ingest")?;
    Ok(ingest::read_events(BufReader::new(file))?)
}

pub fn load_edges(layout: &Layout) -> Result<Vec<(u32, u32)>> {
    let file = open_stage_file(&layout.edges(), "pairs")?;
    Ok(read_edge_list(BufReader::new(file))?)
}

pub fn run_ingest(cfg: &PipelineConfig, layout: &Layout, timings: &mut Timings) -> Result<ingest::IngestSummary> {
    let input = cfg
        .ingest
        .input
        .as_deref()
        .context("no input file: pass --input or set ingest.input in the config")?;
    let icfg = cfg.ingest.to_config()?;
    let parsed = timings.time("ingest.parse", || ingest::parse_csv(input, &icfg))?;
    let cleaned = timings.time("ingest.clean", || ingest::clean(parsed, &icfg))?;
    ingest::write_events(create(&layout.events())?, &cleaned.events)?;
    ingest::write_rejects(create(&layout.rejects())?, &cleaned.rejects)?;
    write_json(&layout.ingest_summary(), &cleaned.summary)?;
    Ok(cleaned.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub schema_version: u32,
    pub r_x: f64,
    pub r_y: f64,
    pub r_t: f64,
    pub vertices: usize,
    pub edges: usize,
    pub connected_components: usize,
    pub edges_by_category: BTreeMap<String, usize>,
}

/// Near-repeat pairs among events of the same category.
pub fn category_pairs(events: &[Event], limits: nrchain_core::st_index::PairLimits) -> Result<(Vec<(u32, u32)>, BTreeMap<String, usize>)> {
    let mut all = Vec::new();
    let mut by_category = BTreeMap::new();
    for (category, ids) in ids_by_category(events) {
        let points: Vec<STPoint> = ids.iter().map(|&i| STPoint::from(&events[i as usize])).collect();
        let tree = RTree3::build(&points, RTreeParams::default())?;
        let pairs = neighbor_pairs(&tree, &points, limits);
        by_category.insert(category.to_string(), pairs.len());
        all.extend(pairs);
    }
    all.sort_unstable();
    Ok((all, by_category))
}

pub fn run_pairs(cfg: &PipelineConfig, layout: &Layout, timings: &mut Timings) -> Result<PairSummary> {
    let limits = cfg.pairs.limits()?;
    let events = timings.time("pairs.load", || load_events(layout))?;
    if events.is_empty() {
        bail!("no events to pair: {} is empty", layout.events().display());
    }
    let (pairs, edges_by_category) = timings.time("pairs.query", || category_pairs(&events, limits))?;
    write_edge_list(create(&layout.edges())?, &pairs)?;
    if cfg.pairs.binary {
        write_pairs_bin(create(&layout.pairs_bin())?, &pairs)?;
    }
    let g = build_graph(events.len(), &pairs)?;
    let components = connected_components(&g).count();
    let summary = PairSummary {
        schema_version: SCHEMA_VERSION,
        r_x: limits.r_x,
        r_y: limits.r_y,
        r_t: limits.r_t,
        vertices: g.vertex_count(),
        edges: g.edge_count(),
        connected_components: components,
        edges_by_category,
    };
    write_json(&layout.pairs_summary(), &summary)?;
    Ok(summary)
}

fn vertex_count(layout: &Layout) -> Result<usize> {
    let summary: PairSummary = read_json(&layout.pairs_summary(), "pairs")?;
    Ok(summary.vertices)
}

pub fn run_stats(layout: &Layout, timings: &mut Timings) -> Result<nrchain_core::graph::GraphStats> {
    let n = vertex_count(layout)?;
    let edges = load_edges(layout)?;
    let g = build_graph(n, &edges)?;
    let stats = timings.time("stats", || graph_stats(&g));
    write_json(&layout.graph_stats(), &stats)?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub k: u32,
    pub subgraphs: usize,
    pub vertices_covered: usize,
    pub largest_subgraph: usize,
    /// Mean over subgraphs of each subgraph's clustering coefficient.
    pub mean_clustering_coefficient: f64,
}

impl LevelSummary {
    pub fn of(result: &DecompositionResult) -> Vec<LevelSummary> {
        result
            .levels()
            .map(|(k, subs)| LevelSummary {
                k,
                subgraphs: subs.len(),
                vertices_covered: result.vertices_at(k).len(),
                largest_subgraph: subs.iter().map(|s| s.size()).max().unwrap_or(0),
                mean_clustering_coefficient: if subs.is_empty() {
                    0.0
                } else {
                    subs.iter().map(|s| s.clustering_coefficient).sum::<f64>() / subs.len() as f64
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub checked_subgraphs: usize,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub schema_version: u32,
    pub vertices: usize,
    pub edges: usize,
    pub levels: Vec<LevelSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub validation: Option<ValidationSummary>,
    pub result: DecompositionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeIndex {
    pub schema_version: u32,
    pub methods: Vec<Method>,
}

pub fn run_decompose(cfg: &PipelineConfig, layout: &Layout, timings: &mut Timings) -> Result<Vec<MethodReport>> {
    let params = cfg.decompose.params()?;
    let n = vertex_count(layout)?;
    let edges = timings.time("decompose.load", || load_edges(layout))?;
    let g = timings.time("decompose.build", || build_graph(n, &edges))?;
    let components = timings.time("decompose.components", || connected_components(&g));
    log::info!("{} components over {} vertices", components.count(), n);

    let mut methods = cfg.decompose.methods.clone();
    methods.sort();
    methods.dedup();
    let mut reports = Vec::new();
    for &method in &methods {
        let result = timings.time(&format!("decompose.{method}"), || decompose_by_component(&g, method, &params));
        if result.truncated {
            log::warn!("{method}: stopped after {} cliques", params.max_cliques);
        }
        let validation = cfg.decompose.validate.then(|| {
            let report = timings.time(&format!("decompose.{method}.validate"), || validate(&result, &g));
            ValidationSummary {
                checked_subgraphs: report.checked_subgraphs,
                violations: report.violations.iter().map(ToString::to_string).collect(),
            }
        });
        if let Some(v) = &validation {
            if !v.violations.is_empty() {
                log::error!("{method}: {} validation violations", v.violations.len());
            }
        }
        let report = MethodReport {
            schema_version: SCHEMA_VERSION,
            vertices: g.vertex_count(),
            edges: g.edge_count(),
            levels: LevelSummary::of(&result),
            validation,
            result,
        };
        write_json(&layout.decompose_method(method), &report)?;
        reports.push(report);
    }
    write_json(
        &layout.decompose_index(),
        &DecomposeIndex {
            schema_version: SCHEMA_VERSION,
            methods,
        },
    )?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnoxCell {
    pub distance_bin: usize,
    pub time_bin: usize,
    pub observed: u64,
    pub expected: f64,
    pub residual: f64,
    pub p_value: f64,
}

impl KnoxCell {
    fn of(table: &KnoxTable, r: usize, c: usize) -> Self {
        let get = |m: &Option<knox::Matrix<f64>>| m.as_ref().map_or(f64::NAN, |m| m.get(r, c));
        KnoxCell {
            distance_bin: r,
            time_bin: c,
            observed: table.observed.get(r, c),
            expected: get(&table.expected),
            residual: get(&table.residuals),
            p_value: get(&table.p_values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnoxHighlight {
    /// Directory of this category's matrices, relative to `knox/`.
    pub dir: String,
    pub n_events: usize,
    pub total_pairs: u64,
    pub origin: KnoxCell,
    /// Cell with the largest residual; ties go to the first in row order.
    pub strongest: KnoxCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnoxSummary {
    pub schema_version: u32,
    pub categories: BTreeMap<String, KnoxHighlight>,
}

/// Directory name for a category label.
pub fn category_dir(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

pub fn run_knox(cfg: &PipelineConfig, layout: &Layout, timings: &mut Timings) -> Result<KnoxSummary> {
    cfg.knox.validate()?;
    let events = timings.time("knox.load", || load_events(layout))?;
    let mut categories = BTreeMap::new();
    for (label, ids) in ids_by_category(&events) {
        if ids.len() < 2 {
            log::warn!("knox: skipping category `{label}` with {} event", ids.len());
            continue;
        }
        let subset: Vec<Event> = ids.iter().map(|&i| events[i as usize].clone()).collect();
        let table = timings.time(&format!("knox.{label}"), || knox::knox_test(&subset, &cfg.knox))?;
        let dir = category_dir(label);
        knox::emit_heatmap(&table, &layout.knox_dir().join(&dir))?;
        let residuals = table.residuals.as_ref().expect("residuals computed");
        let mut best = 0;
        for (i, &r) in residuals.data.iter().enumerate() {
            if r > residuals.data[best] {
                best = i;
            }
        }
        categories.insert(
            label.to_string(),
            KnoxHighlight {
                dir,
                n_events: table.n_events,
                total_pairs: table.total_pairs,
                origin: KnoxCell::of(&table, 0, 0),
                strongest: KnoxCell::of(&table, best / table.time_bins(), best % table.time_bins()),
            },
        );
    }
    if categories.is_empty() {
        bail!("knox needs a category with at least 2 events");
    }
    let summary = KnoxSummary {
        schema_version: SCHEMA_VERSION,
        categories,
    };
    write_json(&layout.knox_summary(), &summary)?;
    Ok(summary)
}
