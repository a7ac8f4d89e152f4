use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input.
    Validation,
    /// Inputs were well formed but the requested quantity is undefined for them.
    Computation,
}

#[derive(Debug, Error)]
pub enum Error {
    // FASTA input
    #[error("FASTA input contains no records")]
    EmptyFasta,
    #[error("line {line}: sequence data before any '>' header")]
    SequenceBeforeHeader { line: usize },
    #[error("line {line}: header has no taxon id")]
    EmptyTaxonId { line: usize },
    #[error("record '{taxon}' has no bases")]
    EmptySequence { taxon: String },
    #[error("duplicate taxon id '{taxon}'")]
    DuplicateTaxon { taxon: String },
    #[error("record '{taxon}' has {found} sites, expected {expected}")]
    UnequalLength {
        taxon: String,
        expected: usize,
        found: usize,
    },
    #[error("record '{taxon}': invalid character {character:?} at site index {site}")]
    InvalidBase {
        character: char,
        taxon: String,
        site: usize,
    },

    // distances
    #[error("sequences have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("no comparable sites (every site has a gap or ambiguity code in one sequence)")]
    NoComparableSites,
    #[error("distance between '{a}' and '{b}': {source}")]
    PairDistance {
        a: String,
        b: String,
        #[source]
        source: Box<Error>,
    },
    #[error("unknown taxon '{taxon}'")]
    UnknownTaxon { taxon: String },
    #[error("outlier taxon '{taxon}' is also listed as an inlier")]
    OutlierAmongInliers { taxon: String },
    #[error("inlier taxon '{taxon}' listed more than once")]
    DuplicateInlier { taxon: String },

    // scoring
    #[error("logit vector needs at least 2 classes, found {found}")]
    TooFewClasses { found: usize },
    #[error("logit at index {index} is not finite ({value})")]
    NonFiniteLogit { index: usize, value: f64 },

    // ranking
    #[error("no records to rank")]
    EmptyRecords,
    #[error("image '{image_id}' has a non-finite score")]
    NonFiniteScore { image_id: String },
    #[error("image '{image_id}' is predicted as '{class}', which is not in the DNA ranking")]
    UnrankedClass { image_id: String, class: String },
    #[error("quantile q = {q} is outside [0, 1]")]
    InvalidQuantile { q: f64 },

    // metrics
    #[error("ranking contains no outliers")]
    NoOutliers,
    #[error("ranking contains no inliers")]
    NoInliers,
    #[error("{labels} labels but {scores} scores")]
    LabelScoreMismatch { labels: usize, scores: usize },
    #[error("experiment with outlier '{outlier}' has no outlier images")]
    EmptyExperiment { outlier: String },
    #[error("experiment with outlier '{outlier}' predicts '{class}', which is not one of its inlier classes")]
    UnknownPrediction { outlier: String, class: String },
    #[error("outlier taxon '{outlier}' appears in more than one experiment")]
    DuplicateExperiment { outlier: String },
    #[error("only {found} (distance, proportion) pairs survive filtering; at least 3 are needed")]
    TooFewPairs { found: usize },
    #[error("correlation undefined: {which} values have zero variance")]
    DegenerateVariance { which: &'static str },
    #[error("permutation count must be positive")]
    InvalidPermutations,

    // tables
    #[error("{file}: {message}")]
    MalformedHeader { file: String, message: String },
    #[error("{file}, line {line}: expected {expected} fields, found {found}")]
    RowArity {
        file: String,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{file}, line {line}: column '{column}' value {value:?} is not a finite number")]
    NonNumericLogit {
        file: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{file}: duplicate image_id '{image_id}'")]
    DuplicateImageId { file: String, image_id: String },
    #[error("{file}: class map has no entry for index {index}")]
    ClassMapGap { file: String, index: usize },
    #[error("{file}, line {line}: {message}")]
    BadRecord { file: String, line: u64, message: String },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // pipeline
    #[error("no barcode for taxon '{taxon}'")]
    MissingBarcode { taxon: String },
    #[error("outlier taxon '{taxon}' is one of the classifier's classes")]
    OutlierIsInlier { taxon: String },
    #[error("image '{image_id}' has true class '{class}', which is neither an inlier class nor the outlier")]
    UnknownTrueClass { image_id: String, class: String },
    #[error("no images with true class equal to the outlier '{taxon}'")]
    NoOutlierImages { taxon: String },
    #[error("no inlier images in the table")]
    NoInlierImages,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NoComparableSites
            | Error::NoOutliers
            | Error::NoInliers
            | Error::TooFewPairs { .. }
            | Error::DegenerateVariance { .. } => ErrorKind::Computation,
            Error::PairDistance { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
