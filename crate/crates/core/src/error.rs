use thiserror::Error;

/// Errors raised by the library.
///
/// Variants mirror the failure modes of the individual operations; the CLI maps
/// every variant to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("measures live on different domains")]
    DomainMismatch,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("atom at {0:?} is not covered by any partition cell")]
    PartitionGap(Vec<f64>),
    #[error("all Monte Carlo weights underflowed")]
    NumericalUnderflow,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("empty data")]
    EmptyData,
    #[error("empty support")]
    EmptySupport,
    #[error("kernel Fourier transform vanishes at {0}")]
    KernelNotInvertible(f64),
    #[error("measures do not share an atom set")]
    SupportMismatch,
    #[error("degenerate Dirichlet parameter: {0}")]
    DegenerateDirichlet(String),
    #[error("measures have overlapping supports")]
    SupportsOverlap,
    #[error("only {0} usable grid points, need at least 5")]
    InsufficientSignal(usize),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("missing config parameter `{0}`")]
    MissingParameter(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.context(context))
    }
}
