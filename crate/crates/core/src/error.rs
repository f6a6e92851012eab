use std::path::PathBuf;

use thiserror::Error;

/// Every failure the simulator can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("caustic between rays {left} and {right} at t = {t}: projected spacing {spacing:e} <= {sigma_min:e}")]
    Caustic {
        t: f64,
        left: usize,
        right: usize,
        spacing: f64,
        sigma_min: f64,
    },

    #[error("singular guidance at ray {ray}: |E - V| = {gap:e} below 1e-9 E")]
    SingularGuidance { ray: usize, gap: f64 },

    #[error("imaginary root in relativistic Hamiltonian: radicand {radicand:e}")]
    ImaginaryRoot { radicand: f64 },

    #[error("step too large at t = {t} (dt = {dt:e}): ray {ray} deviates {deviation:e} against spacing {sigma:e}")]
    StepTooLarge {
        t: f64,
        dt: f64,
        ray: usize,
        deviation: f64,
        sigma: f64,
    },

    #[error("point ({x}, {z}) lies outside the tabulated potential grid")]
    OutOfGrid { x: f64, z: f64 },

    #[error("field at the grid edge is {edge:e} of peak, above the 1e-6 limit")]
    GridTooNarrow { edge: f64 },

    #[error("transform energy mismatch {residual:e} above 1e-10")]
    Parseval { residual: f64 },

    #[error("ray {ray} never reaches z = {z_plane}")]
    PlaneNotReached { ray: usize, z_plane: f64 },

    #[error("amplitude is zero on every ray")]
    ZeroAmplitude,

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
