use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("point {point:?} lies inside or on the surface of a magnet")]
    InsideMagnet { point: [f64; 3] },

    #[error("point {point:?} lies on an edge extension of a magnet; the closed-form field is singular there")]
    SingularPoint { point: [f64; 3] },

    #[error("no interior minimum in bracket [{lo:e}, {hi:e}]")]
    NoMinimum { lo: f64, hi: f64 },

    #[error("root not bracketed: f({lo:e}) and f({hi:e}) have the same sign")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid quantum system: {0}")]
    InvalidSystem(String),

    #[error("integrator failed at t = {t:e} s (step {step:e} s, {steps} steps): {reason}")]
    Integrator { t: f64, step: f64, steps: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the user's input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
