use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("ground state not converged after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("no tunneling barrier: field {field} over-the-barrier at energy {energy} (discriminant {discriminant:e})")]
    NoBarrier {
        field: f64,
        energy: f64,
        discriminant: f64,
    },

    #[error("calibration out of range: {what} = {value} not in [{lo}, {hi}] (clock resolution too small for the measured duration)")]
    CalibrationRange {
        what: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error with stage tags peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 config, 3 numerical, 4 calibration out-of-range.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Checkpoint(_) | Error::Io(_) => 2,
            Error::CalibrationRange { .. } => 4,
            _ => 3,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
