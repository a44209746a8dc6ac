use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] deconfound_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("column `{0}` has no role; map it or drop it from the file")]
    UnmappedColumn(String),
    #[error("column `{0}` is mapped twice")]
    DuplicateColumn(String),
    #[error("line {line}: count `{value}` is not a nonnegative integer")]
    InvalidCount { line: u64, value: String },
    #[error(
        "line {line}: cell {cell} repeats an earlier row (pass the merge flag to add them up)"
    )]
    DuplicateRow { line: u64, cell: String },
    #[error("file has no data rows")]
    Empty,
    #[error("unknown builtin dataset `{0}`")]
    UnknownDataset(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
