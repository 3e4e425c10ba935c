use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported algorithm {0}")]
    UnsupportedAlgorithm(u32),

    #[error("unknown parameter space `{0}`")]
    UnknownSpace(String),

    #[error("invalid sample rate {0} Hz (minimum 8000)")]
    InvalidSampleRate(u32),

    #[error("sample-rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("preset does not belong to space `{expected}` (got `{found}`)")]
    SpaceMismatch { expected: String, found: String },

    #[error("invalid preset: {0}")]
    InvalidPreset(String),

    #[error("invalid note: {0}")]
    InvalidNote(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("audio has {len} samples, shorter than one {window}-sample window")]
    AudioTooShort { len: usize, window: usize },

    #[error("invalid audio: {0}")]
    InvalidAudio(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("expected an integer >= 2, got {0}")]
    BelowTwo(u64),

    #[error("bins-per-octave mismatch: input has {input}, filter expects {filter}")]
    BinsPerOctaveMismatch { input: usize, filter: usize },

    #[error("shape mismatch in {context}: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("no audible preset after {0} attempts")]
    RetryCapExhausted(usize),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("corrupt manifest: {0}")]
    CorruptManifest(String),

    #[error("corrupt container: {0}")]
    CorruptContainer(String),

    #[error("search budget must be at least 1")]
    ZeroBudget,

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl Error {
    pub fn shape(context: impl Into<String>, expected: &[usize], found: &[usize]) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }

    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::File {
            path: path.display().to_string(),
            source,
        }
    }

    /// Whether the failure was caused by bad input rather than a defect.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::ShapeMismatch { .. } | Error::Io(_))
    }
}
