use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    EigenNotConverged { iterations: usize, residual: f64 },

    #[error("state labeling failed at theta = {theta_over_pi:.6} pi: {message}")]
    Labeling { theta_over_pi: f64, message: String },

    #[error("no interior extremum of {quantity} in bracket [{lo:.6} pi, {hi:.6} pi]")]
    NoInteriorExtremum { quantity: &'static str, lo: f64, hi: f64 },

    #[error("propagation failed at t = {time:.6} ns: {message}")]
    Propagation { time: f64, message: String },

    #[error("gate fit failed: {0}")]
    Fit(String),

    #[error("bracket [{lo}, {hi}] does not straddle target {target} (angles {angle_lo}, {angle_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        target: f64,
        angle_lo: f64,
        angle_hi: f64,
    },

    #[error("gate simulation at T = {gate_time} ns: {source}")]
    AtGateTime {
        gate_time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn at_gate_time(gate_time: f64, source: Error) -> Self {
        Error::AtGateTime {
            gate_time,
            source: Box::new(source),
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
