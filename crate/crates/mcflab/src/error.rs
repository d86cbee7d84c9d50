use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the laboratory.  Numerical routines return these instead
/// of panicking so that pipeline stages can attach context and sweeps can
/// record per-run failures without aborting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input samples contain non-finite values")]
    NonFiniteSamples,

    #[error("grid with {m} nodes cannot hold modes up to l = {l_max} without aliasing")]
    Aliasing { l_max: usize, m: usize },

    #[error("operation is implemented for n = 1 only (got n = {n})")]
    UnsupportedDimension { n: u32 },

    #[error("convexity lost at tau = {tau:.6e}: h + h'' = {value:.6e} near theta = {theta:.4}")]
    ConvexityLoss { tau: f64, theta: f64, value: f64 },

    #[error("time step {dtau:.3e} exceeds the stability bound {bound:.3e}")]
    StepRejected { dtau: f64, bound: f64 },

    #[error("rescaling requires tau < T (tau = {tau}, T = {t_hat})")]
    GaugeTime { tau: f64, t_hat: f64 },

    #[error("rescaled boundary is not star-shaped about the gauge point (margin {margin:.3e} near theta = {theta:.4})")]
    NotStarShaped { theta: f64, margin: f64 },

    #[error("graph condition violated: sqrt(2) + u = {value:.3e} at node {node}")]
    GraphCondition { node: usize, value: f64 },

    #[error("radial resampling did not converge at target angle {phi:.6}")]
    ResampleDiverged { phi: f64 },

    #[error("point at distance {dist:.6e} lies outside the ball of radius {radius:.6e}")]
    OutsideDomain { dist: f64, radius: f64 },

    #[error("need at least {need} usable snapshots, found {found}")]
    InsufficientData { need: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Config(String),
}

impl Error {
    pub fn stage(stage: &str, source: Error) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(source),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
