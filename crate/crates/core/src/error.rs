use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures surfaced by the numerical pipeline.
///
/// Every variant names the module that raised it so command-line
/// diagnostics stay traceable without a backtrace.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("variational: no positive equilibrium width for kappa={kappa}, N*g={interaction}")]
    NoEquilibrium { kappa: f64, interaction: f64 },

    #[error("variational: width became non-positive at t={time}")]
    NonPositiveWidth { time: f64 },

    #[error("bridge: variance became non-positive at t={time}")]
    NonPositiveVariance { time: f64 },

    #[error("optimal: Newton did not converge (last scaled residual {residual:.3e}, mu={mu})")]
    NewtonFailed { residual: f64, mu: f64 },

    #[error("optimal: interior node {node} violates the transit sign (s={s})")]
    SignViolation { node: usize, s: f64 },

    #[error("optimal: duration integrand is not integrable at the {endpoint} endpoint (fitted exponent {exponent:.4})")]
    NonIntegrable { endpoint: &'static str, exponent: f64 },

    #[error("gpe: imaginary-time propagation did not converge in {steps} steps (last relative energy change {last_change:.3e})")]
    GroundStateNotConverged {
        steps: usize,
        last_change: f64,
        energy_trace: Vec<f64>,
    },

    #[error("gpe: norm drift {drift:.3e} at t={time}")]
    NormDrift { drift: f64, time: f64 },

    #[error("gpe: boundary amplitude ratio {ratio:.3e} at t={time}; enlarge the grid")]
    BoundaryAmplitude { ratio: f64, time: f64 },

    #[error("engine: corner {corner}: {source}")]
    Corner {
        corner: char,
        #[source]
        source: Box<Error>,
    },

    #[error("engine: cycle {cycle}, stroke {stroke}: {source}")]
    Stroke {
        cycle: usize,
        stroke: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_))
    }
}
