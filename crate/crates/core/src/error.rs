use alloc::string::String;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure at R = {r} a0: {reason}")]
    NumericalAt { r: f64, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("energy coincides with threshold {channel}")]
    ThresholdEnergy { channel: usize },
    #[error("Jost singularity (possible bound state at this E)")]
    JostSingular,
    #[error("no interior minimum of the middle curve")]
    NoWell,
    #[error("calibration failed: {0}")]
    Calibration(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { field, reason: reason.into() }
    }

    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid { .. } | Error::Domain(_) | Error::ThresholdEnergy { .. } | Error::Calibration(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
