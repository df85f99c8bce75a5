use thiserror::Error;

pub type Result<T, E = ZnlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ZnlError {
    /// Bad arguments or malformed configuration.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input data is unusable (degenerate, too short, unparsable).
    #[error("data error: {0}")]
    Data(String),

    /// A flow or map left the bounded region.
    #[error("trajectory diverged at step {step}: |x|_inf = {norm:e}")]
    BlowUp { step: usize, norm: f64 },

    #[error("integration error: non-finite vector field at state {state:?}")]
    Integration { state: Vec<f64> },

    #[error("transition graph is not irreducible ({} strongly connected components)", components.len())]
    Reducible { components: Vec<Vec<usize>> },

    #[error("power iteration did not converge after {iters} iterations (residual {residual:e})")]
    Convergence { iters: usize, residual: f64 },

    #[error("singular normal equations for edge fit (pivot {pivot:e}); use a positive ridge coefficient")]
    RankDeficient { pivot: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Every kernel weight underflowed: the query is too far from the edge's training inputs.
    #[error("point {x:?} is outside the domain of edge {from}->{to} (all kernel weights are zero)")]
    OutOfDomain { from: usize, to: usize, x: Vec<f64> },

    #[error("simulation aborted at step {step} from state (s={cell}, x={x:?}): {source}")]
    Simulation {
        step: usize,
        cell: usize,
        x: Vec<f64>,
        #[source]
        source: Box<ZnlError>,
    },

    /// A pipeline stage failed.
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ZnlError>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl ZnlError {
    /// Process exit code: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            ZnlError::Argument(_) => 1,
            ZnlError::Data(_) | ZnlError::Io { .. } | ZnlError::Json { .. } => 2,
            ZnlError::Simulation { source, .. } | ZnlError::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        ZnlError::Io { context: context.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        ZnlError::Json { context: context.into(), source }
    }
}
