use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integration failed at t = {time} fs: step size underflow")]
    IntegrationFailure { time: f64 },

    #[error("numerical instability at t = {time} fs: {what} deviates by {deviation:e}")]
    NumericalInstability {
        time: f64,
        what: &'static str,
        deviation: f64,
    },

    #[error("integration failed for pulse area {area} rad: {source}")]
    AtArea {
        area: f64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("peak visibility undefined: every peak amplitude is zero")]
    UndefinedVisibility,

    #[error("peak windows overlap: half-width {half_width} meV is too wide for splitting {delta} meV")]
    WindowOverlap { half_width: f64, delta: f64 },

    #[error("axis `{0}` is not uniform")]
    NonUniformAxis(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
