use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("phoneme '{0}' is not covered by the map")]
    Uncovered(String),

    #[error("unknown word '{0}'")]
    UnknownWord(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("utterance '{utt}', line {line}: {msg}")]
    CorpusFormat { utt: String, line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model: {0}")]
    Model(String),

    #[error("alignment: {0}")]
    Alignment(String),

    #[error("decode: {0}")]
    Decode(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
