use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use nrchain_core::cohesive::{CoreRule, DecomposeParams, Method, DEFAULT_K_MIN, DEFAULT_MAX_CLIQUES};
use nrchain_core::ingest::{parse_unix_days, ColumnMap, CoordinateMode, IngestConfig, RangeWindow, UtmZone};
use nrchain_core::knox::KnoxConfig;
use nrchain_core::st_index::PairLimits;

/// Environment variable overriding the configured output directory.
pub const OUT_ENV: &str = "NRCHAIN_OUT";
pub const DEFAULT_OUT: &str = "nrchain-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 picks one per core.
    pub threads: usize,
    pub ingest: IngestSection,
    pub pairs: PairSection,
    pub decompose: DecomposeSection,
    pub knox: KnoxConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZoneSetting {
    Fixed(u8),
    Named(AutoZone),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoZone {
    Auto,
}

impl Default for ZoneSetting {
    fn default() -> Self {
        ZoneSetting::Named(AutoZone::Auto)
    }
}

impl ZoneSetting {
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(ZoneSetting::Named(AutoZone::Auto));
        }
        let z: u8 = s.parse().with_context(|| format!("UTM zone `{s}` is neither `auto` nor 1..60"))?;
        Ok(ZoneSetting::Fixed(z))
    }
}

/// Range window as written in the config; time bounds are timestamps in
/// the configured format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub t_min: Option<String>,
    pub t_max: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub input: Option<PathBuf>,
    pub coordinate_mode: CoordinateMode,
    pub utm_zone: ZoneSetting,
    pub time_format: String,
    pub columns: ColumnMap,
    pub range: RangeSection,
    pub categories: Option<Vec<String>>,
}

impl Default for IngestSection {
    fn default() -> Self {
        let base = IngestConfig::default();
        IngestSection {
            input: None,
            coordinate_mode: base.coordinate_mode,
            utm_zone: ZoneSetting::default(),
            time_format: base.time_format,
            columns: base.columns,
            range: RangeSection::default(),
            categories: None,
        }
    }
}

impl IngestSection {
    pub fn to_config(&self) -> Result<IngestConfig> {
        let mut cfg = IngestConfig {
            columns: self.columns.clone(),
            coordinate_mode: self.coordinate_mode,
            utm_zone: match self.utm_zone {
                ZoneSetting::Fixed(z) => UtmZone::Fixed(z),
                ZoneSetting::Named(AutoZone::Auto) => UtmZone::Auto,
            },
            time_format: self.time_format.clone(),
            range_window: RangeWindow::default(),
            category_filter: self
                .categories
                .as_ref()
                .map(|c| c.iter().cloned().collect::<BTreeSet<String>>()),
        };
        let r = &self.range;
        let w = &mut cfg.range_window;
        w.x_min = r.x_min.unwrap_or(w.x_min);
        w.x_max = r.x_max.unwrap_or(w.x_max);
        w.y_min = r.y_min.unwrap_or(w.y_min);
        w.y_max = r.y_max.unwrap_or(w.y_max);
        let days = |s: &String| -> Result<f64> {
            parse_unix_days(s, &self.time_format)
                .with_context(|| format!("range bound `{s}` does not match time format `{}`", self.time_format))
        };
        if let Some(s) = &r.t_min {
            w.t_min = days(s)?;
        }
        if let Some(s) = &r.t_max {
            w.t_max = days(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairSection {
    /// Metres.
    pub r_x: f64,
    pub r_y: f64,
    /// Days.
    pub r_t: f64,
    /// Also write `pairs.bin`.
    pub binary: bool,
}

impl Default for PairSection {
    fn default() -> Self {
        PairSection {
            r_x: 100.0,
            r_y: 100.0,
            r_t: 10.0,
            binary: false,
        }
    }
}

impl PairSection {
    pub fn limits(&self) -> Result<PairLimits> {
        Ok(PairLimits::new(self.r_x, self.r_y, self.r_t)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSection {
    pub methods: Vec<Method>,
    pub k_min: u32,
    pub max_cliques: usize,
    pub core_rule: CoreRule,
    /// Re-check every reported subgraph after decomposition.
    pub validate: bool,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        DecomposeSection {
            methods: Method::ALL.to_vec(),
            k_min: DEFAULT_K_MIN,
            max_cliques: DEFAULT_MAX_CLIQUES,
            core_rule: CoreRule::default(),
            validate: false,
        }
    }
}

impl DecomposeSection {
    pub fn params(&self) -> Result<DecomposeParams> {
        if self.methods.is_empty() {
            bail!("decompose needs at least one method");
        }
        Ok(DecomposeParams {
            k_min: self.k_min,
            max_cliques: self.max_cliques,
            core_rule: self.core_rule,
        })
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Flag, then environment, then config file, then the default.
    pub fn resolve_output(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}
