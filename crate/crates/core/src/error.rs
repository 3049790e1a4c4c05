use std::path::PathBuf;

use crate::mesh::Edge;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {what} index {index} out of range (have {count})")]
    IndexOutOfRange {
        line: usize,
        what: &'static str,
        index: i64,
        count: usize,
    },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("non-manifold edge ({}, {}) has {faces} incident faces", .edge.0, .edge.1)]
    NonManifold { edge: Edge, faces: usize },
    #[error("mesh has no per-corner UVs")]
    MissingUvs,
    #[error("edge ({}, {}) is not an edge of the mesh", .0.0, .0.1)]
    NotAnEdge(Edge),
    #[error("edge ({}, {}) appears more than once", .0.0, .0.1)]
    DuplicateEdge(Edge),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("malformed token sequence at position {position}: {message}")]
    MalformedTokens { position: usize, message: String },
    #[error("loop starting at vertex {0} does not separate the patch into two components")]
    NonSeparatingLoop(usize),
    #[error("loop starting at vertex {0} is not interior to the patch")]
    BoundaryCoincident(usize),
    #[error("replay target exhausted at step {0}")]
    ExhaustedTarget(usize),
    #[error("scorer returned {got} logits, expected {expected}")]
    ScorerShape { got: usize, expected: usize },
    #[error(
        "chart {chart} is not a topological disk (euler characteristic {euler}, {boundaries} boundary loops)"
    )]
    NonDisk {
        chart: usize,
        euler: i64,
        boundaries: usize,
    },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("target candidate {target} is masked out at step {step}")]
    TargetMasked { step: usize, target: usize },
    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },
    #[error("weight file: {0}")]
    WeightFormat(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI error payload.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } | Error::IndexOutOfRange { .. } | Error::Json(_) => "parse",
            Error::WeightFormat(_) => "format",
            Error::Config(_) => "config",
            _ => "domain",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
