use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("duplicate clip_id {0:?}")]
    DuplicateClipId(String),

    #[error("clip {clip_id:?}: non-finite {modality} feature at index {index}")]
    NonFiniteFeature {
        clip_id: String,
        modality: &'static str,
        index: usize,
    },

    #[error("clip {clip_id:?}: {modality} features have length {found}, expected {expected}")]
    DimensionMismatch {
        clip_id: String,
        modality: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("input length {found} does not match expected {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("trained bundle is missing component `{0}`")]
    MissingComponent(&'static str),

    #[error("leave-one-video-out needs at least two distinct videos, found {0}")]
    TooFewVideos(usize),

    #[error("fold holding out video {video_id:?}: {source}")]
    Fold {
        video_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: unknown {field} token {token:?}")]
    UnknownToken {
        line: u64,
        field: &'static str,
        token: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dataset fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    #[error("unknown method {given:?}; valid methods: {valid}")]
    UnknownMethod { given: String, valid: String },

    #[error("cannot read {path}: {source}")]
    InputFile {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::UnknownMethod { .. } => ErrorKind::Config,
            Error::Io(_) | Error::Json(_) => ErrorKind::Internal,
            Error::Fold { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn in_fold(video_id: &str, source: Error) -> Self {
        Error::Fold {
            video_id: video_id.to_owned(),
            source: Box::new(source),
        }
    }
}
