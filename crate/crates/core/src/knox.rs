//! Knox space-time contingency table.
//!
//! Every unordered event pair is binned by Euclidean spatial distance and
//! absolute time difference. Expected counts follow the independence
//! model on the table margins, residuals are Pearson residuals and
//! significance comes from Monte-Carlo permutation of event times.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Event;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Overflow {
    /// Pairs beyond the last bin are counted in the last bin.
    #[default]
    Clamp,
    /// Pairs beyond the last bin are not counted.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnoxConfig {
    /// Metres per distance bin.
    pub distance_step: f64,
    /// Days per time bin.
    pub time_step: f64,
    /// `None` sizes the table to cover the data.
    pub distance_bins: Option<usize>,
    pub time_bins: Option<usize>,
    pub overflow: Overflow,
    pub permutations: u32,
    pub seed: u64,
}

impl Default for KnoxConfig {
    fn default() -> Self {
        KnoxConfig {
            distance_step: 100.0,
            time_step: 14.0,
            distance_bins: None,
            time_bins: None,
            overflow: Overflow::Clamp,
            permutations: 99,
            seed: 20_170_101,
        }
    }
}

impl KnoxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_step.is_finite() && self.distance_step > 0.0)
            || !(self.time_step.is_finite() && self.time_step > 0.0)
        {
            return Err(Error::Config("Knox steps must be positive".into()));
        }
        if self.distance_bins == Some(0) || self.time_bins == Some(0) {
            return Err(Error::Config("Knox bin counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dense row-major matrix; rows are distance bins, columns time bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

impl Matrix<u64> {
    pub fn row_totals(&self) -> Vec<u64> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c)).sum())
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnoxTable {
    pub config: KnoxConfig,
    pub n_events: usize,
    /// n(n-1)/2.
    pub total_pairs: u64,
    pub observed: Matrix<u64>,
    pub expected: Option<Matrix<f64>>,
    pub residuals: Option<Matrix<f64>>,
    pub p_values: Option<Matrix<f64>>,
}

impl KnoxTable {
    pub fn distance_bins(&self) -> usize {
        self.observed.rows
    }

    pub fn time_bins(&self) -> usize {
        self.observed.cols
    }
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    distance_bins: usize,
    time_bins: usize,
    distance_step: f64,
    time_step: f64,
    overflow: Overflow,
}

impl Shape {
    fn of(table: &KnoxTable) -> Self {
        Shape {
            distance_bins: table.distance_bins(),
            time_bins: table.time_bins(),
            distance_step: table.config.distance_step,
            time_step: table.config.time_step,
            overflow: table.config.overflow,
        }
    }

    fn bin(&self, dx: f64, dy: f64, dt: f64) -> Option<usize> {
        let d = (dx * dx + dy * dy).sqrt();
        let mut i = (d / self.distance_step).floor() as usize;
        let mut j = (dt.abs() / self.time_step).floor() as usize;
        if i >= self.distance_bins || j >= self.time_bins {
            match self.overflow {
                Overflow::Drop => return None,
                Overflow::Clamp => {
                    i = i.min(self.distance_bins - 1);
                    j = j.min(self.time_bins - 1);
                }
            }
        }
        Some(i * self.time_bins + j)
    }
}

/// Distance and time bin of one pair under `config`'s steps, ignoring
/// table extents.
pub fn pair_bin(a: &Event, b: &Event, config: &KnoxConfig) -> (usize, usize) {
    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let dt = (a.t - b.t).abs();
    (
        (d / config.distance_step).floor() as usize,
        (dt / config.time_step).floor() as usize,
    )
}

/// Largest pairwise Euclidean distance, over the convex hull.
fn max_spatial_distance(points: &[(f64, f64)]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return match pts.as_slice() {
            [a, b] => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
            _ => 0.0,
        };
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let mut best = 0.0f64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            best = best.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
        }
    }
    best
}

fn resolve_shape(xs: &[f64], ys: &[f64], ts: &[f64], config: &KnoxConfig) -> Shape {
    let distance_bins = config.distance_bins.unwrap_or_else(|| {
        let pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        (max_spatial_distance(&pts) / config.distance_step).floor() as usize + 1
    });
    let time_bins = config.time_bins.unwrap_or_else(|| {
        let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ((hi - lo) / config.time_step).floor() as usize + 1
    });
    Shape {
        distance_bins,
        time_bins,
        distance_step: config.distance_step,
        time_step: config.time_step,
        overflow: config.overflow,
    }
}

/// Counts all pairs into a table. Rows of the implicit pair loop are
/// split across workers with private tables that are summed at the end.
fn count_pairs(xs: &[f64], ys: &[f64], ts: &[f64], shape: &Shape) -> Vec<u64> {
    let cells = shape.distance_bins * shape.time_bins;
    (0..xs.len())
        .into_par_iter()
        .fold(
            || vec![0u64; cells],
            |mut acc, i| {
                let (xi, yi, ti) = (xs[i], ys[i], ts[i]);
                for j in i + 1..xs.len() {
                    if let Some(c) = shape.bin(xi - xs[j], yi - ys[j], ti - ts[j]) {
                        acc[c] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; cells],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

fn columns(events: &[Event]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        events.iter().map(|e| e.x).collect(),
        events.iter().map(|e| e.y).collect(),
        events.iter().map(|e| e.t).collect(),
    )
}

/// Observed pair counts for all n(n-1)/2 pairs.
pub fn build_table(events: &[Event], config: &KnoxConfig) -> Result<KnoxTable> {
    config.validate()?;
    if events.len() < 2 {
        return Err(Error::TooFewEvents(events.len()));
    }
    let (xs, ys, ts) = columns(events);
    let shape = resolve_shape(&xs, &ys, &ts, config);
    let counts = count_pairs(&xs, &ys, &ts, &shape);
    let n = events.len() as u64;
    let mut config = config.clone();
    config.distance_bins = Some(shape.distance_bins);
    config.time_bins = Some(shape.time_bins);
    Ok(KnoxTable {
        config,
        n_events: events.len(),
        total_pairs: n * (n - 1) / 2,
        observed: Matrix {
            rows: shape.distance_bins,
            cols: shape.time_bins,
            data: counts,
        },
        expected: None,
        residuals: None,
        p_values: None,
    })
}

/// Fills expected counts (row total × column total / grand total) and
/// Pearson residuals; cells with zero expectation get residual 0.
pub fn expected_and_residuals(mut table: KnoxTable) -> Result<KnoxTable> {
    let obs = &table.observed;
    let total = obs.total();
    if table.total_pairs == 0 || total == 0 {
        return Err(Error::EmptyTable);
    }
    let rows = obs.row_totals();
    let cols = obs.col_totals();
    let mut expected = Matrix::<f64>::new(obs.rows, obs.cols);
    let mut residuals = Matrix::<f64>::new(obs.rows, obs.cols);
    for r in 0..obs.rows {
        for c in 0..obs.cols {
            let e = rows[r] as f64 * cols[c] as f64 / total as f64;
            expected.set(r, c, e);
            let res = if e > 0.0 { (obs.get(r, c) as f64 - e) / e.sqrt() } else { 0.0 };
            residuals.set(r, c, res);
        }
    }
    table.expected = Some(expected);
    table.residuals = Some(residuals);
    Ok(table)
}

/// Monte-Carlo p-values with `permuter` deciding how times are shuffled in
/// each round. `permuter(round, times)` must be deterministic per round.
pub fn monte_carlo_with<F>(events: &[Event], mut table: KnoxTable, permuter: F) -> Result<KnoxTable>
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let (xs, ys, ts) = columns(events);
    let shape = Shape::of(&table);
    let original = &table.observed;
    let rounds = table.config.permutations as u64;
    let original_rows = original.row_totals();

    let exceed: Vec<u64> = (0..rounds)
        .into_par_iter()
        .map(|round| {
            let mut times = ts.clone();
            permuter(round, &mut times);
            let counts = count_pairs(&xs, &ys, &times, &shape);
            if cfg!(debug_assertions) && shape.overflow == Overflow::Clamp {
                let permuted = Matrix {
                    rows: shape.distance_bins,
                    cols: shape.time_bins,
                    data: counts.clone(),
                };
                debug_assert_eq!(permuted.row_totals(), original_rows, "spatial margins moved in round {round}");
            }
            counts
                .iter()
                .zip(&original.data)
                .map(|(p, o)| u64::from(p >= o))
                .collect::<Vec<u64>>()
        })
        .reduce(
            || vec![0u64; original.data.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let denom = (rounds + 1) as f64;
    table.p_values = Some(Matrix {
        rows: original.rows,
        cols: original.cols,
        data: exceed.iter().map(|&c| (1 + c) as f64 / denom).collect(),
    });
    Ok(table)
}

/// Monte-Carlo p-values: each round shuffles event times with a ChaCha8
/// generator seeded by `seed + round`, keeping locations fixed.
pub fn monte_carlo(events: &[Event], table: KnoxTable) -> Result<KnoxTable> {
    let seed = table.config.seed;
    monte_carlo_with(events, table, |round, times| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(round));
        times.shuffle(&mut rng);
    })
}

/// Table, expectations, residuals and p-values in one call.
pub fn knox_test(events: &[Event], config: &KnoxConfig) -> Result<KnoxTable> {
    let table = expected_and_residuals(build_table(events, config)?)?;
    monte_carlo(events, table)
}

fn bin_labels(step: f64, bins: usize, overflow: Overflow) -> Vec<String> {
    (0..bins)
        .map(|i| {
            let lo = step * i as f64;
            if i + 1 == bins && overflow == Overflow::Clamp {
                format!("[{lo},inf)")
            } else {
                format!("[{lo},{})", step * (i + 1) as f64)
            }
        })
        .collect()
}

/// Header-labelled matrix as written to the heatmap CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub corner: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl LabeledMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.corner);
        for c in &self.col_labels {
            out.push(',');
            out.push_str(&csv_quote(c));
        }
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            out.push_str(&csv_quote(label));
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut rows = rdr.records();
        let header = rows.next().ok_or(Error::Parse {
            line: 1,
            message: "empty matrix file".into(),
        })??;
        let corner = header.get(0).unwrap_or_default().to_string();
        let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut row_labels = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rows.enumerate() {
            let rec = rec?;
            row_labels.push(rec.get(0).unwrap_or_default().to_string());
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        line: i as u64 + 2,
                        message: format!("bad value `{s}`"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != col_labels.len() {
                return Err(Error::Parse {
                    line: i as u64 + 2,
                    message: "row length differs from header".into(),
                });
            }
            values.push(vals);
        }
        Ok(LabeledMatrix {
            corner,
            row_labels,
            col_labels,
            values,
        })
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn labeled<T: Copy + Into<f64>>(table: &KnoxTable, data: &[T]) -> LabeledMatrix {
    let cols = table.time_bins();
    LabeledMatrix {
        corner: "distance_m/time_d".into(),
        row_labels: bin_labels(table.config.distance_step, table.distance_bins(), table.config.overflow),
        col_labels: bin_labels(table.config.time_step, cols, table.config.overflow),
        values: data.chunks(cols).map(|r| r.iter().map(|&v| v.into()).collect()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnoxMeta {
    pub schema_version: u32,
    pub config: KnoxConfig,
    pub n_events: usize,
    pub total_pairs: u64,
    pub counted_pairs: u64,
    pub distance_bins: usize,
    pub time_bins: usize,
}

/// Writes observed, expected, residual and p-value matrices as CSV plus
/// `knox_meta.json` into `dir`.
pub fn emit_heatmap(table: &KnoxTable, dir: &Path) -> Result<()> {
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| Error::Write { path, source })
    };
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let observed: Vec<f64> = table.observed.data.iter().map(|&c| c as f64).collect();
    write("observed.csv", labeled(table, &observed).to_csv())?;
    if let Some(m) = &table.expected {
        write("expected.csv", labeled(table, &m.data).to_csv())?;
    }
    if let Some(m) = &table.residuals {
        write("residuals.csv", labeled(table, &m.data).to_csv())?;
    }
    if let Some(m) = &table.p_values {
        write("pvalues.csv", labeled(table, &m.data).to_csv())?;
    }
    let meta = KnoxMeta {
        schema_version: crate::SCHEMA_VERSION,
        config: table.config.clone(),
        n_events: table.n_events,
        total_pairs: table.total_pairs,
        counted_pairs: table.observed.total(),
        distance_bins: table.distance_bins(),
        time_bins: table.time_bins(),
    };
    write("knox_meta.json", serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}
