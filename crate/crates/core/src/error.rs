use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    Resource {
        what: String,
        needed: usize,
        cap: usize,
    },
    #[error("construction error: {0}")]
    Construction(String),
    #[error("spectral gap closed: deviation {deviation:.3e} is not below 1/4")]
    GapClosed { deviation: f64 },
    #[error("plaquette phase {phase:.3} too close to pi; refine the grid")]
    PhaseOverflow { phase: f64 },
    #[error("homotopy failure at s = {s}: {reason}")]
    Homotopy { s: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
