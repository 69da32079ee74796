use thiserror::Error;

/// Errors produced by the physics and numerics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// The plasmon resonance does not sit strictly inside the photon band,
    /// so the continuum decay-rate formula does not apply.
    #[error(
        "resonance outside photon band: eps0 = {eps0}, band = [{omega_bottom}, {omega_top}]"
    )]
    OutOfBand {
        eps0: f64,
        omega_bottom: f64,
        omega_top: f64,
    },

    #[error("mode index {k} out of range 1..={max}")]
    ModeIndexOutOfRange { k: usize, max: usize },

    #[error("non-finite value encountered in {context}")]
    NumericDomain { context: String },

    #[error("integration failed at t = {last_good_t}: {reason}")]
    IntegrationFailure { last_good_t: f64, reason: String },

    #[error("quadrature did not converge: requested abs tol {requested}, achieved {achieved}")]
    QuadratureNonConvergence { requested: f64, achieved: f64 },

    #[error("drive too faint: N*|phi0|^2 = {n_phi0_sq} <= 1/2, max-squeezing formula undefined")]
    FaintDrive { n_phi0_sq: f64 },

    #[error(
        "Fock truncation insufficient: tail norm {tail:.3e} > {limit:.3e} (r = {r}, n_max = {n_max})"
    )]
    InsufficientTruncation {
        r: f64,
        n_max: usize,
        tail: f64,
        limit: f64,
    },

    #[error("undefined ratio: initial amplitude is zero")]
    UndefinedRatio,

    #[error("sample grids do not match: {0}")]
    GridMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
