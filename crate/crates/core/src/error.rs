use std::path::PathBuf;

/// Errors produced by the segmentation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("insufficient points: need {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("degenerate plane fit: {0}")]
    DegenerateFit(&'static str),
    #[error("no plane found: best consensus {best} below minimum {min}")]
    NoPlaneFound { best: usize, min: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid scene spec: {0}")]
    Spec(String),
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error("no floor candidate among clusters")]
    NoFloor,
    #[error("only the floor was found, nothing to grasp")]
    NothingToGrasp,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Format { what, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a pipeline failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::EmptyCloud
                | Error::Input(_)
                | Error::Spec(_)
                | Error::Format { .. }
                | Error::Io { .. }
                | Error::Image { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
