//! Event ingestion: CSV parsing, UTM projection, range filtering and
//! duplicate merging.

pub mod utm;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use utm::{project_to_utm, unproject_from_utm, zone_for_lon, Hemisphere};

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateMode {
    /// Latitude/longitude in degrees, projected to UTM during cleaning.
    Geographic,
    /// Easting/northing already in metres.
    #[default]
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UtmZone {
    /// Zone of the dataset centroid.
    #[default]
    Auto,
    Fixed(u8),
}

/// Names of the CSV columns holding each field. In geographic mode `x`
/// is the longitude column and `y` the latitude column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub x: String,
    pub y: String,
    pub time: String,
    pub category: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            x: "x".into(),
            y: "y".into(),
            time: "timestamp".into(),
            category: "category".into(),
        }
    }
}

/// Closed validity window. Time bounds are days since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for RangeWindow {
    fn default() -> Self {
        RangeWindow {
            x_min: f64::NEG_INFINITY,
            x_max: f64::INFINITY,
            y_min: f64::NEG_INFINITY,
            y_max: f64::INFINITY,
            t_min: f64::NEG_INFINITY,
            t_max: f64::INFINITY,
        }
    }
}

impl RangeWindow {
    pub fn validate(&self) -> Result<()> {
        for (axis, lo, hi) in [
            ("x", self.x_min, self.x_max),
            ("y", self.y_min, self.y_max),
            ("t", self.t_min, self.t_max),
        ] {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::Config(format!(
                    "range window on {axis} needs min < max (got {lo} .. {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, e: &Event) -> bool {
        (self.x_min..=self.x_max).contains(&e.x)
            && (self.y_min..=self.y_max).contains(&e.y)
            && (self.t_min..=self.t_max).contains(&e.t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub columns: ColumnMap,
    pub coordinate_mode: CoordinateMode,
    pub utm_zone: UtmZone,
    /// `chrono` format string; date-only formats are accepted and map to midnight.
    pub time_format: String,
    pub range_window: RangeWindow,
    pub category_filter: Option<BTreeSet<String>>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            columns: ColumnMap::default(),
            coordinate_mode: CoordinateMode::Planar,
            utm_zone: UtmZone::Auto,
            time_format: "%Y-%m-%d %H:%M:%S".into(),
            range_window: RangeWindow::default(),
            category_filter: None,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        self.range_window.validate()?;
        if let UtmZone::Fixed(z) = self.utm_zone {
            if !(1..=60).contains(&z) {
                return Err(Error::InvalidZone(i32::from(z)));
            }
        }
        Ok(())
    }

    pub fn parse_time(&self, s: &str) -> Option<NaiveDateTime> {
        parse_timestamp(s, &self.time_format)
    }
}

pub fn parse_timestamp(s: &str, format: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, format)
        .ok()
        .or_else(|| {
            NaiveDate::parse_from_str(s, format)
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

fn unix_days(ts: NaiveDateTime) -> f64 {
    ts.and_utc().timestamp() as f64 / SECONDS_PER_DAY
}

/// Days since the Unix epoch of a timestamp string, as used by
/// [`RangeWindow`] time bounds.
pub fn parse_unix_days(s: &str, format: &str) -> Option<f64> {
    parse_timestamp(s, format).map(unix_days)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coordinates {
    Geographic { lat: f64, lon: f64 },
    Planar { easting: f64, northing: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    /// 1-based line in the source file (the header is line 1).
    pub source_line: u64,
    pub coordinates: Coordinates,
    pub timestamp: NaiveDateTime,
    pub category: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    BadNumber,
    BadTimestamp,
    MissingField,
    OutOfBand,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::BadNumber => "bad-number",
            RejectReason::BadTimestamp => "bad-timestamp",
            RejectReason::MissingField => "missing-field",
            RejectReason::OutOfBand => "out-of-band",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutput {
    pub records: Vec<RawRecord>,
    pub rejects: Vec<Reject>,
}

impl ParseOutput {
    pub fn reject_ratio(&self) -> f64 {
        let total = self.records.len() + self.rejects.len();
        if total == 0 {
            0.0
        } else {
            self.rejects.len() as f64 / total as f64
        }
    }
}

/// One cleaned incident. `t` is in days; after [`clean`] it counts from
/// the earliest event of the cleaned set.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub category: String,
    pub multiplicity: u32,
}

impl Event {
    pub fn new(id: u32, x: f64, y: f64, t: f64, category: impl Into<String>) -> Self {
        Event {
            id,
            x,
            y,
            t,
            category: category.into(),
            multiplicity: 1,
        }
    }
}

pub fn parse_csv(path: &Path, config: &IngestConfig) -> Result<ParseOutput> {
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_reader(BufReader::new(file), config)
}

pub fn parse_reader<R: Read>(reader: R, config: &IngestConfig) -> Result<ParseOutput> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let cx = col(&config.columns.x)?;
    let cy = col(&config.columns.y)?;
    let ct = col(&config.columns.time)?;
    let cc = col(&config.columns.category)?;

    let mut out = ParseOutput::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, [cx, cy, ct, cc], config) {
            Ok((coordinates, timestamp, category)) => out.records.push(RawRecord {
                source_line: line,
                coordinates,
                timestamp,
                category,
            }),
            Err(reason) => out.rejects.push(Reject { line, reason }),
        }
    }
    if out.reject_ratio() > 0.5 {
        log::warn!(
            "{} of {} lines rejected",
            out.rejects.len(),
            out.rejects.len() + out.records.len()
        );
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    [cx, cy, ct, cc]: [usize; 4],
    config: &IngestConfig,
) -> std::result::Result<(Coordinates, NaiveDateTime, String), RejectReason> {
    let field = |i: usize| match row.get(i) {
        Some(s) if !s.is_empty() => Ok(s),
        _ => Err(RejectReason::MissingField),
    };
    let (sx, sy, st, sc) = (field(cx)?, field(cy)?, field(ct)?, field(cc)?);
    let num = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or(RejectReason::BadNumber)
    };
    let (x, y) = (num(sx)?, num(sy)?);
    let timestamp = config.parse_time(st).ok_or(RejectReason::BadTimestamp)?;
    let coordinates = match config.coordinate_mode {
        CoordinateMode::Geographic => Coordinates::Geographic { lat: y, lon: x },
        CoordinateMode::Planar => Coordinates::Planar {
            easting: x,
            northing: y,
        },
    };
    Ok((coordinates, timestamp, sc.to_string()))
}

/// Keeps exactly the events inside the closed window.
pub fn filter_range(events: Vec<Event>, window: &RangeWindow) -> Vec<Event> {
    let before = events.len();
    let kept: Vec<Event> = events.into_iter().filter(|e| window.contains(e)).collect();
    if kept.is_empty() && before > 0 {
        log::warn!("range window removed all {before} events");
    }
    kept
}

fn event_order(a: &Event, b: &Event) -> Ordering {
    a.t.total_cmp(&b.t)
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
        .then_with(|| a.category.cmp(&b.category))
}

/// Merges events sharing (category, x, y, t) exactly, summing their
/// multiplicities. Output is sorted by (t, x, y) with dense ids.
pub fn deduplicate(mut events: Vec<Event>) -> Vec<Event> {
    events.sort_by(event_order);
    let mut out: Vec<Event> = Vec::with_capacity(events.len());
    for e in events {
        match out.last_mut() {
            Some(last) if event_order(last, &e) == Ordering::Equal => {
                last.multiplicity += e.multiplicity;
            }
            _ => out.push(e),
        }
    }
    for (i, e) in out.iter_mut().enumerate() {
        e.id = i as u32;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub schema_version: u32,
    pub input_rows: usize,
    pub accepted_rows: usize,
    pub rejected_rows: usize,
    pub rejects_by_reason: BTreeMap<String, usize>,
    pub high_reject_rate: bool,
    pub filtered_by_category: usize,
    pub filtered_by_range: usize,
    /// Records folded into another record by duplicate merging.
    pub duplicates_merged: usize,
    pub events: usize,
    pub events_by_category: BTreeMap<String, usize>,
    /// Timestamp of t = 0 in the cleaned events file.
    pub epoch: String,
    pub utm_zone: Option<u8>,
}

#[derive(Debug, Clone)]
pub struct CleanOutput {
    pub events: Vec<Event>,
    pub rejects: Vec<Reject>,
    pub summary: IngestSummary,
}

fn resolve_zone(records: &[RawRecord], config: &IngestConfig) -> Result<Option<(u8, Hemisphere)>> {
    let geo: Vec<(u64, f64, f64)> = records
        .iter()
        .filter_map(|r| match r.coordinates {
            Coordinates::Geographic { lat, lon } => Some((r.source_line, lat, lon)),
            Coordinates::Planar { .. } => None,
        })
        .collect();
    if geo.is_empty() {
        return Ok(None);
    }
    let n = geo.len() as f64;
    let mean_lat = geo.iter().map(|g| g.1).sum::<f64>() / n;
    let mean_lon = geo.iter().map(|g| g.2).sum::<f64>() / n;
    let hemisphere = Hemisphere::of(mean_lat);
    if geo.iter().any(|g| Hemisphere::of(g.1) != hemisphere) {
        return Err(Error::MixedHemispheres);
    }
    let zone = match config.utm_zone {
        UtmZone::Fixed(z) => z,
        UtmZone::Auto => {
            let zone = zone_for_lon(mean_lon);
            let zones: BTreeSet<u8> = geo.iter().map(|g| zone_for_lon(g.2)).collect();
            if zones.len() > 1 {
                return Err(Error::MixedZones {
                    zones: zones.into_iter().collect(),
                });
            }
            zone
        }
    };
    Ok(Some((zone, hemisphere)))
}

/// Runs the full cleaning pass over parsed records: category filter,
/// projection, range filter, duplicate merge and time rebasing.
pub fn clean(parsed: ParseOutput, config: &IngestConfig) -> Result<CleanOutput> {
    config.validate()?;
    let ParseOutput {
        records,
        mut rejects,
    } = parsed;
    let input_rows = records.len() + rejects.len();
    let accepted_rows = records.len();

    let before = records.len();
    let records: Vec<RawRecord> = match &config.category_filter {
        Some(keep) => records
            .into_iter()
            .filter(|r| keep.contains(&r.category))
            .collect(),
        None => records,
    };
    let filtered_by_category = before - records.len();

    let zone = resolve_zone(&records, config)?;
    let mut events = Vec::with_capacity(records.len());
    for r in records {
        let (x, y) = match (r.coordinates, zone) {
            (Coordinates::Planar { easting, northing }, _) => (easting, northing),
            (Coordinates::Geographic { lat, lon }, Some((z, _))) => {
                match project_to_utm(lat, lon, z) {
                    Ok(p) => p,
                    Err(_) => {
                        rejects.push(Reject {
                            line: r.source_line,
                            reason: RejectReason::OutOfBand,
                        });
                        continue;
                    }
                }
            }
            (Coordinates::Geographic { .. }, None) => unreachable!("zone resolved for geographic input"),
        };
        events.push(Event::new(0, x, y, unix_days(r.timestamp), r.category));
    }
    rejects.sort_by_key(|r| r.line);

    let before = events.len();
    let events = filter_range(events, &config.range_window);
    let filtered_by_range = before - events.len();

    let before = events.len();
    let mut events = deduplicate(events);
    let duplicates_merged = before - events.len();

    let t0 = events.first().map_or(0.0, |e| e.t);
    for e in &mut events {
        e.t -= t0;
    }
    let epoch = chrono::DateTime::from_timestamp((t0 * SECONDS_PER_DAY).round() as i64, 0)
        .map(|d| d.naive_utc().format("%Y-%m-%dT%H:%M:%S").to_string())
        .unwrap_or_default();

    let mut rejects_by_reason = BTreeMap::new();
    for r in &rejects {
        *rejects_by_reason.entry(r.reason.code().to_string()).or_insert(0) += 1;
    }
    let mut events_by_category = BTreeMap::new();
    for e in &events {
        *events_by_category.entry(e.category.clone()).or_insert(0) += 1;
    }
    let summary = IngestSummary {
        schema_version: crate::SCHEMA_VERSION,
        input_rows,
        accepted_rows,
        rejected_rows: input_rows - accepted_rows,
        rejects_by_reason,
        high_reject_rate: input_rows > 0 && (input_rows - accepted_rows) * 2 > input_rows,
        filtered_by_category,
        filtered_by_range,
        duplicates_merged,
        events: events.len(),
        events_by_category,
        epoch,
        utm_zone: zone.map(|z| z.0),
    };
    Ok(CleanOutput {
        events,
        rejects,
        summary,
    })
}

/// Writes the cleaned events file (`id,x,y,t,category,multiplicity`).
pub fn write_events<W: Write>(writer: W, events: &[Event]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "x", "y", "t", "category", "multiplicity"])?;
    for e in events {
        w.write_record([
            e.id.to_string(),
            format!("{:.3}", e.x),
            format!("{:.3}", e.y),
            format!("{:.6}", e.t),
            e.category.clone(),
            e.multiplicity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events<R: Read>(reader: R) -> Result<Vec<Event>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut events = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        let get = |i: usize, what: &str| row.get(i).ok_or_else(|| bad(what));
        let event = Event {
            id: get(0, "id")?.parse().map_err(|_| bad("id"))?,
            x: get(1, "x")?.parse().map_err(|_| bad("x"))?,
            y: get(2, "y")?.parse().map_err(|_| bad("y"))?,
            t: get(3, "t")?.parse().map_err(|_| bad("t"))?,
            category: get(4, "category")?.to_string(),
            multiplicity: get(5, "multiplicity")?.parse().map_err(|_| bad("multiplicity"))?,
        };
        if event.id as usize != events.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected id {}, found {}", events.len(), event.id),
            });
        }
        events.push(event);
    }
    Ok(events)
}

pub fn write_rejects<W: Write>(writer: W, rejects: &[Reject]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["line", "reason"])?;
    for r in rejects {
        w.write_record([r.line.to_string(), r.reason.code().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Groups event ids by category, categories in lexicographic order.
pub fn ids_by_category(events: &[Event]) -> BTreeMap<&str, Vec<u32>> {
    let mut groups: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for e in events {
        groups.entry(e.category.as_str()).or_default().push(e.id);
    }
    groups
}
