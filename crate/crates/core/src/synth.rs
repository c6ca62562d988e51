//! Seeded synthetic event sets: clustered bursts over a uniform
//! background, in planar metres and days.

use std::io::Write;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Event;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub events: usize,
    /// Number of burst centres.
    pub clusters: usize,
    /// Share of events drawn around burst centres.
    pub clustered_fraction: f64,
    /// Standard deviation around a centre, metres.
    pub spatial_sigma: f64,
    /// Standard deviation around a centre, days.
    pub temporal_sigma: f64,
    /// Side of the square study area, metres.
    pub extent: f64,
    /// Length of the study period, days.
    pub days: f64,
    pub categories: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            events: 5_000,
            clusters: 50,
            clustered_fraction: 0.6,
            spatial_sigma: 80.0,
            temporal_sigma: 4.0,
            extent: 20_000.0,
            days: 365.0,
            categories: vec!["burglary".into()],
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.extent) || !positive(self.days) {
            return Err(Error::Config("extent and days must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.clustered_fraction) {
            return Err(Error::Config("clustered_fraction must lie in [0, 1]".into()));
        }
        if !(self.spatial_sigma >= 0.0 && self.temporal_sigma >= 0.0) {
            return Err(Error::Config("sigmas must be non-negative".into()));
        }
        if self.categories.is_empty() {
            return Err(Error::Config("at least one category is required".into()));
        }
        Ok(())
    }
}

/// Events with dense ids, unsorted. Clustered points are clamped to the
/// study box.
pub fn generate(config: &SynthConfig) -> Result<Vec<Event>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_clustered = if config.clusters == 0 {
        0
    } else {
        (config.events as f64 * config.clustered_fraction).round() as usize
    };
    let centres: Vec<(f64, f64, f64, usize)> = (0..config.clusters)
        .map(|_| {
            (
                rng.gen_range(0.0..config.extent),
                rng.gen_range(0.0..config.extent),
                rng.gen_range(0.0..config.days),
                rng.gen_range(0..config.categories.len()),
            )
        })
        .collect();
    let space = Normal::new(0.0, config.spatial_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let time = Normal::new(0.0, config.temporal_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let mut events = Vec::with_capacity(config.events);
    for i in 0..config.events {
        let (x, y, t, cat) = if i < n_clustered {
            let (cx, cy, ct, cat) = centres[i % centres.len()];
            (
                (cx + space.sample(&mut rng)).clamp(0.0, config.extent),
                (cy + space.sample(&mut rng)).clamp(0.0, config.extent),
                (ct + time.sample(&mut rng)).clamp(0.0, config.days),
                cat,
            )
        } else {
            (
                rng.gen_range(0.0..config.extent),
                rng.gen_range(0.0..config.extent),
                rng.gen_range(0.0..config.days),
                rng.gen_range(0..config.categories.len()),
            )
        };
        events.push(Event::new(i as u32, x, y, t, config.categories[cat].clone()));
    }
    Ok(events)
}

/// 500 uniform events over 10 km × 10 km × 365 days plus 20 events packed
/// within 50 m and 2 days of one another.
pub fn planted_cluster(seed: u64) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(520);
    for i in 0..500u32 {
        events.push(Event::new(
            i,
            rng.gen_range(0.0..10_000.0),
            rng.gen_range(0.0..10_000.0),
            rng.gen_range(0.0..365.0),
            "planted",
        ));
    }
    let (cx, cy, ct) = (5_000.0, 5_000.0, 180.0);
    for i in 500..520u32 {
        // A 35 m square keeps every pair under 50 m apart.
        events.push(Event::new(
            i,
            cx + rng.gen_range(0.0..35.0),
            cy + rng.gen_range(0.0..35.0),
            ct + rng.gen_range(0.0..2.0),
            "planted",
        ));
    }
    events
}

/// Reference date for day offsets in generated CSVs.
pub fn synth_epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2020, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

/// Writes `x,y,timestamp,category` rows; times are offsets from
/// [`synth_epoch`] rounded to the second.
pub fn write_raw_csv<W: Write>(writer: W, events: &[Event]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "timestamp", "category"])?;
    let epoch = synth_epoch();
    for e in events {
        let stamp = epoch + Duration::seconds((e.t * 86_400.0).round() as i64);
        w.write_record([
            format!("{:.3}", e.x),
            format!("{:.3}", e.y),
            stamp.format("%Y-%m-%d %H:%M:%S").to_string(),
            e.category.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
