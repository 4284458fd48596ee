use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("CFL violation: dt = {dt:e} exceeds the stability bound {bound:e} ({reason})")]
    Cfl { dt: f64, bound: f64, reason: String },

    #[error("non-finite value in field at node {node}")]
    NonFinite { node: usize },

    #[error("projection singularity at node {node}: pre-projection norm {norm:e} < 1e-8")]
    ProjectionSingularity { node: usize, norm: f64 },

    #[error("chart domain error at node {node}: last component {last} too close to the south pole")]
    ChartDomain { node: usize, last: f64 },

    #[error("kernel evaluated outside its domain: t = {t} is not earlier than t0 = {t0}")]
    KernelDomain { t: f64, t0: f64 },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("inadmissible radii: {0}")]
    InadmissibleRadii(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the numerics themselves (stability bound, blow-up).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. }
                | Error::NonFinite { .. }
                | Error::ProjectionSingularity { .. }
                | Error::NoConvergence { .. }
        )
    }
}
