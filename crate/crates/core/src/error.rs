use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("record at line {line}: latitude {lat} is outside the UTM band (-80, 84)")]
    OutsideUtmBand { line: u64, lat: f64 },
    #[error("invalid UTM zone {0}")]
    InvalidZone(i32),
    #[error("dataset spans several UTM zones ({zones:?}); configure an explicit zone or split the input")]
    MixedZones { zones: Vec<u8> },
    #[error("dataset spans both hemispheres; split the input")]
    MixedHemispheres,
    #[error("cannot build an index over an empty point set")]
    EmptyIndex,
    #[error("edge ({u}, {v}) references a vertex outside 0..{n}")]
    VertexOutOfRange { u: u32, v: u32, n: usize },
    #[error("edge ({u}, {v}) is a self-loop")]
    SelfLoop { u: u32, v: u32 },
    #[error("edge ({u}, {v}) is listed more than once")]
    DuplicateEdge { u: u32, v: u32 },
    #[error("scope is empty")]
    EmptyScope,
    #[error("vertex set is not connected")]
    Disconnected,
    #[error("need at least 2 events, got {0}")]
    TooFewEvents(usize),
    #[error("table has no pairs")]
    EmptyTable,
    #[error("malformed input at line {line}: {message}")]
    Parse { line: u64, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
