use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use nrchain_cli::config::{PipelineConfig, ZoneSetting};
use nrchain_cli::report::{run_report, REPORT_SCHEMA};
use nrchain_cli::stages::{run_decompose, run_ingest, run_knox, run_pairs, run_stats, Layout, Timings};
use nrchain_cli::with_threads;
use nrchain_core::cohesive::{CoreRule, Method};
use nrchain_core::ingest::CoordinateMode;
use nrchain_core::knox::Overflow;
use nrchain_core::synth::{generate, write_raw_csv, SynthConfig};

#[derive(Parser, Debug)]
#[command(name = "nrchain", version, about = "Near-repeat event chain detection pipeline")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides NRCHAIN_OUT and the config).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write per-phase wall-clock timings to this JSON file.
    #[arg(long, global = true)]
    timings: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, project, filter and deduplicate raw events.
    Ingest(IngestArgs),
    /// Near-repeat pairs per category, written as an edge list.
    Pairs(PairArgs),
    /// Components, diameters and clustering coefficients of the pair graph.
    Stats,
    /// Cohesive subgraph decompositions of the pair graph.
    Decompose(DecomposeArgs),
    /// Knox space-time test per category.
    Knox(KnoxArgs),
    /// Merge stage summaries into report.json.
    Report,
    /// Every stage in order.
    Run {
        #[command(flatten)]
        ingest: IngestArgs,
        #[command(flatten)]
        pairs: PairArgs,
        #[command(flatten)]
        decompose: DecomposeArgs,
        #[command(flatten)]
        knox: KnoxArgs,
    },
    /// Write a seeded synthetic raw CSV.
    Synth(SynthArgs),
    /// Print the JSON schema of report.json.
    Schema,
}

#[derive(Args, Debug, Default)]
struct IngestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    coordinate_mode: Option<CoordinateMode>,
    /// `auto` or 1..60.
    #[arg(long)]
    utm_zone: Option<String>,
    #[arg(long)]
    time_format: Option<String>,
    /// Keep only these categories (comma separated).
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<String>>,
}

#[derive(Args, Debug, Default)]
struct PairArgs {
    /// Metres.
    #[arg(long)]
    r_x: Option<f64>,
    /// Metres.
    #[arg(long)]
    r_y: Option<f64>,
    /// Days.
    #[arg(long)]
    r_t: Option<f64>,
    /// Also write pairs.bin.
    #[arg(long)]
    binary: bool,
}

#[derive(Args, Debug, Default)]
struct DecomposeArgs {
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    k_min: Option<u32>,
    #[arg(long)]
    max_cliques: Option<usize>,
    #[arg(long, value_parser = parse_rule)]
    core_rule: Option<CoreRule>,
    /// Re-check every reported subgraph.
    #[arg(long)]
    validate: bool,
}

#[derive(Args, Debug, Default)]
struct KnoxArgs {
    /// Metres per distance bin.
    #[arg(long)]
    distance_step: Option<f64>,
    /// Days per time bin.
    #[arg(long)]
    time_step: Option<f64>,
    #[arg(long)]
    distance_bins: Option<usize>,
    #[arg(long)]
    time_bins: Option<usize>,
    #[arg(long, value_parser = parse_overflow)]
    overflow: Option<Overflow>,
    #[arg(long)]
    permutations: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Destination CSV (default: raw.csv in the output directory).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 5_000)]
    events: usize,
    #[arg(long, default_value_t = 50)]
    clusters: usize,
    #[arg(long, default_value_t = 0.6)]
    clustered_fraction: f64,
    /// Metres.
    #[arg(long, default_value_t = 80.0)]
    spatial_sigma: f64,
    /// Days.
    #[arg(long, default_value_t = 4.0)]
    temporal_sigma: f64,
    /// Side of the square area, metres.
    #[arg(long, default_value_t = 20_000.0)]
    extent: f64,
    #[arg(long, default_value_t = 365.0)]
    days: f64,
    #[arg(long, value_delimiter = ',', default_value = "burglary")]
    categories: Vec<String>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn parse_mode(s: &str) -> Result<CoordinateMode, String> {
    match s {
        "geographic" => Ok(CoordinateMode::Geographic),
        "planar" => Ok(CoordinateMode::Planar),
        _ => Err("expected `geographic` or `planar`".into()),
    }
}

fn parse_rule(s: &str) -> Result<CoreRule, String> {
    match s {
        "closed-neighborhood" => Ok(CoreRule::ClosedNeighborhood),
        "degree" => Ok(CoreRule::Degree),
        _ => Err("expected `closed-neighborhood` or `degree`".into()),
    }
}

fn parse_overflow(s: &str) -> Result<Overflow, String> {
    match s {
        "clamp" => Ok(Overflow::Clamp),
        "drop" => Ok(Overflow::Drop),
        _ => Err("expected `clamp` or `drop`".into()),
    }
}

impl IngestArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        let s = &mut cfg.ingest;
        if let Some(v) = &self.input {
            s.input = Some(v.clone());
        }
        if let Some(v) = self.coordinate_mode {
            s.coordinate_mode = v;
        }
        if let Some(v) = &self.utm_zone {
            s.utm_zone = ZoneSetting::parse(v)?;
        }
        if let Some(v) = &self.time_format {
            s.time_format = v.clone();
        }
        if let Some(v) = &self.categories {
            s.categories = Some(v.clone());
        }
        Ok(())
    }
}

impl PairArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let s = &mut cfg.pairs;
        s.r_x = self.r_x.unwrap_or(s.r_x);
        s.r_y = self.r_y.unwrap_or(s.r_y);
        s.r_t = self.r_t.unwrap_or(s.r_t);
        s.binary |= self.binary;
    }
}

impl DecomposeArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let s = &mut cfg.decompose;
        if let Some(v) = &self.methods {
            s.methods = v.clone();
        }
        s.k_min = self.k_min.unwrap_or(s.k_min);
        s.max_cliques = self.max_cliques.unwrap_or(s.max_cliques);
        s.core_rule = self.core_rule.unwrap_or(s.core_rule);
        s.validate |= self.validate;
    }
}

impl KnoxArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let s = &mut cfg.knox;
        s.distance_step = self.distance_step.unwrap_or(s.distance_step);
        s.time_step = self.time_step.unwrap_or(s.time_step);
        s.distance_bins = self.distance_bins.or(s.distance_bins);
        s.time_bins = self.time_bins.or(s.time_bins);
        s.overflow = self.overflow.unwrap_or(s.overflow);
        s.permutations = self.permutations.unwrap_or(s.permutations);
        s.seed = self.seed.unwrap_or(s.seed);
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    let layout = Layout::new(cfg.resolve_output(cli.out.as_deref()));
    let mut timings = Timings::default();

    match &cli.command {
        Command::Ingest(a) => a.apply(&mut cfg)?,
        Command::Pairs(a) => a.apply(&mut cfg),
        Command::Decompose(a) => a.apply(&mut cfg),
        Command::Knox(a) => a.apply(&mut cfg),
        Command::Run {
            ingest,
            pairs,
            decompose,
            knox,
        } => {
            ingest.apply(&mut cfg)?;
            pairs.apply(&mut cfg);
            decompose.apply(&mut cfg);
            knox.apply(&mut cfg);
        }
        Command::Stats | Command::Report | Command::Synth(_) | Command::Schema => {}
    }

    let threads = cfg.threads;
    with_threads(threads, || -> Result<()> {
        match &cli.command {
            Command::Ingest(_) => {
                let s = run_ingest(&cfg, &layout, &mut timings)?;
                log::info!("ingest: {} events ({} rejected rows)", s.events, s.rejected_rows);
            }
            Command::Pairs(_) => {
                let s = run_pairs(&cfg, &layout, &mut timings)?;
                log::info!("pairs: {} vertices, {} edges, {} components", s.vertices, s.edges, s.connected_components);
            }
            Command::Stats => {
                run_stats(&layout, &mut timings)?;
            }
            Command::Decompose(_) => {
                run_decompose(&cfg, &layout, &mut timings)?;
            }
            Command::Knox(_) => {
                run_knox(&cfg, &layout, &mut timings)?;
            }
            Command::Report => {
                run_report(&layout)?;
            }
            Command::Run { .. } => {
                run_ingest(&cfg, &layout, &mut timings)?;
                run_pairs(&cfg, &layout, &mut timings)?;
                run_stats(&layout, &mut timings)?;
                run_decompose(&cfg, &layout, &mut timings)?;
                run_knox(&cfg, &layout, &mut timings)?;
                run_report(&layout)?;
            }
            Command::Synth(a) => {
                let synth = SynthConfig {
                    events: a.events,
                    clusters: a.clusters,
                    clustered_fraction: a.clustered_fraction,
                    spatial_sigma: a.spatial_sigma,
                    temporal_sigma: a.temporal_sigma,
                    extent: a.extent,
                    days: a.days,
                    categories: a.categories.clone(),
                    seed: a.seed,
                };
                let events = generate(&synth)?;
                let path = a.output.clone().unwrap_or_else(|| layout.root.join("raw.csv"));
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
                write_raw_csv(BufWriter::new(file), &events)?;
                log::info!("synth: {} events to {}", events.len(), path.display());
            }
            Command::Schema => print!("{REPORT_SCHEMA}"),
        }
        Ok(())
    })??;

    if let Some(path) = &cli.timings {
        timings.write(path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

