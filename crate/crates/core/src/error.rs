use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
  #[error("domain error: {0}")]
  Domain(String),
  #[error("recurrence weight pole at n = {n}")]
  Pole { n: usize },
  #[error("CFL violation: dt = {dt} exceeds limit {limit}")]
  Cfl { dt: f64, limit: f64 },
  #[error("non-finite value at tau = {tau}")]
  NonFinite { tau: f64 },
  #[error("hyperbolicity lost: principal coefficient {value} below margin {margin} at node {node}")]
  Hyperbolicity { value: f64, margin: f64, node: usize },
  #[error("hyperbolicity lost: principal symbol discriminant {discriminant} is negative at node {node}")]
  NotHyperbolic { discriminant: f64, node: usize },
  #[error("at tau = {tau}: {source}")]
  AtTime { tau: f64, source: Box<Error> },
  #[error("blowup detected at tau = {tau}: norm {norm} exceeds ceiling {ceiling}")]
  Blowup { tau: f64, norm: f64, ceiling: f64 },
  #[error("eigensolver did not converge within {iterations} iterations")]
  EigenNonConvergence { iterations: usize },
  #[error("degenerate fit: {0}")]
  DegenerateFit(String),
  #[error("iteration diverged: residual norm {norm} grew for two consecutive steps ending at m = {step}")]
  Divergence { step: usize, norm: f64 },
  #[error("precondition violated: {0}")]
  Precondition(String),
  #[error("identity check failed at entry ({row}, {col}): {detail}")]
  Identity { row: usize, col: usize, detail: String },
  #[error("checkpoint format: {0}")]
  Checkpoint(String),
  #[error("io: {0}")]
  Io(String),
}

impl From<std::io::Error> for Error {
  fn from(e: std::io::Error) -> Self {
    Error::Io(e.to_string())
  }
}

impl Error {
  pub(crate) fn at(self, tau: f64) -> Error {
    match self {
      e @ Error::AtTime { .. } => e,
      e => Error::AtTime { tau, source: Box::new(e) },
    }
  }

  /// The error with any time context removed.
  pub fn root(&self) -> &Error {
    match self {
      Error::AtTime { source, .. } => source.root(),
      e => e,
    }
  }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
  Err(Error::Domain(msg.into()))
}
