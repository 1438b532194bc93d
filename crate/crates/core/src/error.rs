use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("aperture at ({center_y:e}, {center_z:e}) m is not contained in {target}")]
    ApertureOutside { center_y: f64, center_z: f64, target: String },

    #[error("unknown electrode id `{0}`")]
    UnknownElectrode(String),

    #[error("field point must lie above the electrode plane (x > 0), got x = {0:e} m")]
    BelowPlane(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: String, iterations: usize },

    #[error("not a trapping point: {0}")]
    NotTrapping(String),

    #[error("no saddle point found in the search region")]
    NoSaddle,

    #[error("peak analysis failed: {0}")]
    Peak(String),

    #[error("grating has no propagating solution: {0}")]
    Grating(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by malformed input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Geometry(_)
                | Error::ApertureOutside { .. }
                | Error::UnknownElectrode(_)
                | Error::InvalidArgument(_)
                | Error::Config { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
