use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing corpus file: {0}")]
    MissingFile(PathBuf),

    #[error("manifest for language `{0}` lists no files")]
    EmptyManifest(String),

    #[error("invalid language id `{0}`")]
    InvalidLanguage(String),

    #[error("train fraction {0} is outside (0, 1]")]
    TrainFraction(f64),

    #[error("{what} parse error at line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("invalid lexer spec for `{language}`: {message}")]
    LexerSpec { language: String, message: String },

    #[error("cannot lex {path}: {message}")]
    Lex { path: PathBuf, message: String },

    #[error("duplicate language `{0}`")]
    DuplicateLanguage(String),

    #[error("need at least {needed} inputs, got {got}")]
    TooFewInputs { needed: usize, got: usize },

    #[error("token `{token}` has no non-comment occurrence in the test partition of `{language}`")]
    TokenAbsent { language: String, token: String },

    #[error("invalid encoder config: {0}")]
    EncoderConfig(String),

    #[error("training corpus has {chunks} sequences, fewer than one batch of {batch}")]
    CorpusTooSmall { chunks: usize, batch: usize },

    #[error("degenerate representation for `{0}`: no token embedding sets")]
    DegenerateRepresentation(String),

    #[error("archive format error: {0}")]
    Archive(String),

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u64,
        expected: u64,
    },

    #[error("width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("duplicate record for token `{token}` occurrence {occ}")]
    DuplicateRecord { token: String, occ: u64 },

    #[error("zero-norm vector has no cosine similarity")]
    ZeroVector,

    #[error("empty embedding set for token `{0}`")]
    EmptySet(String),

    #[error("token mismatch: `{0}` vs `{1}`")]
    TokenMismatch(String, String),

    #[error("languages `{0}` and `{1}` share no tokens")]
    NoSharedTokens(String, String),

    #[error("comparing `{a}` with `{b}`: {source}")]
    Pair {
        a: String,
        b: String,
        #[source]
        source: Box<Error>,
    },

    #[error("every token set of `{0}` is a singleton; self-similarity undefined")]
    AllSingletons(String),

    #[error("invalid report config: {0}")]
    ReportConfig(String),

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what,
            line,
            message: message.into(),
        }
    }
}
