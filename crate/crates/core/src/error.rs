use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),
    #[error("label column `{column}` has {distinct} distinct values; configure a binarization rule")]
    NonBinaryLabels { column: String, distinct: usize },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("missing value in column `{column}` at row {row}")]
    MissingValue { column: String, row: usize },
    #[error("column `{column}` is hinted numeric but row {row} holds `{value}`")]
    NotNumeric { column: String, row: usize, value: String },
    #[error("feature `{0}` not present in dataset")]
    UnknownFeature(String),
    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("class {0} absent from training partition")]
    ClassAbsent(u8),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset `{name}`: {source}")]
    Dataset {
        name: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
