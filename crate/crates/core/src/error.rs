use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("duplicate image id `{0}`")]
    DuplicateImage(String),

    #[error("image `{image}` has a pool of {size} descriptions; at least 2 are required")]
    PoolTooSmall { image: String, size: usize },

    #[error("image `{image}` has {found} pool descriptions, dataset uses {expected}")]
    InconsistentPoolSize {
        image: String,
        expected: usize,
        found: usize,
    },

    #[error("image `{image}` has {found}-dimensional features, dataset declares {expected}")]
    InconsistentFeatures {
        image: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown image id `{0}`")]
    UnknownImage(String),

    #[error("unknown synset id `{0}`")]
    UnknownSynset(String),

    #[error("duplicate synset id `{0}`")]
    DuplicateSynset(String),

    #[error("synset `{synset}` references missing neighbor `{neighbor}`")]
    DanglingNeighbor { synset: String, neighbor: String },

    #[error("synset `{0}` lists itself as a neighbor")]
    SelfLoop(String),

    #[error("cannot fit TF-IDF on an empty corpus")]
    EmptyCorpus,

    #[error("database is empty")]
    EmptyDatabase,

    #[error("need at least {required} images, got {found}")]
    TooFewImages { required: usize, found: usize },

    #[error(
        "logistic regression needs both classes: got {positives} positives and {negatives} negatives"
    )]
    SingleClass { positives: usize, negatives: usize },

    #[error("no LR parameters for image `{0}`")]
    MissingParams(String),

    #[error("image `{0}` has no feature vector")]
    MissingFeatures(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("zero-variance input: correlation is undefined")]
    ZeroVariance,

    #[error("image `{image}` is rated by {found} subject(s); split-half needs at least 2")]
    InsufficientSubjects { image: String, found: usize },

    #[error(
        "category `{category}` is present in {found} images; more than {threshold} are required"
    )]
    RareCategory {
        category: String,
        found: usize,
        threshold: usize,
    },

    #[error("target `{target}` of query `{query}` is missing from its ranking")]
    TargetMissing { query: String, target: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
