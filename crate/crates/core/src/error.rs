use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("OSM parse error at line {line}: {message}")]
    OsmParse { line: usize, message: String },

    #[error("invalid coordinate ({lat}, {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),

    #[error("bad index file: {0}")]
    IndexFormat(String),

    #[error("category map line {line}: unknown category {category:?}")]
    UnknownCategory { line: usize, category: String },

    #[error("category map line {line}: expected `location_type,category`")]
    MalformedMapLine { line: usize },

    #[error("category maps have different key sets; symmetric difference: {0:?}")]
    KeySetMismatch(Vec<String>),

    #[error("fixes are not sorted by timestamp (index {0})")]
    UnsortedFixes(usize),

    #[error("date {date} is before term start {term_start}")]
    BeforeTermStart { date: String, term_start: String },

    #[error("feature {0:?} missing from row")]
    MissingFeature(String),

    #[error("unknown feature set {0:?}")]
    UnknownFeatureSet(String),

    #[error("EMA code {0} outside 1..=5")]
    InvalidEmaCode(i64),

    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("only one class present")]
    SingleClass,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    Config(String),

    #[error("missing upstream artifact {}: run `geopriv {producer}` first", path.display())]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
