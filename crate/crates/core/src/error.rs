use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate element {index} (area {area:e})")]
    DegenerateElement { index: usize, area: f64 },

    #[error("unknown region tag `{0}`")]
    UnknownRegion(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no cooled surface: the axial grid has no overhang element")]
    NoCooledSurface,

    #[error("solver did not converge in {iterations} iterations (best relative residual {best_residual:e})")]
    NotConverged {
        iterations: usize,
        best_residual: f64,
    },

    #[error("preconditioner: zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("matrix not SPD: pivot {pivot:e} in row {row}")]
    NotSpd { row: usize, pivot: f64 },

    #[error("matrix not symmetric: {0}")]
    NotSymmetric(String),

    #[error(
        "point ({x:e}, {y:e}) lies outside the mesh (nearest triangle {nearest}, centroid distance {distance:e} m)"
    )]
    PointOutsideMesh {
        x: f64,
        y: f64,
        nearest: usize,
        distance: f64,
    },

    #[error("axial coordinate {s:e} m outside [{start:e}, {end:e}]")]
    OutsideAxialRange { s: f64, start: f64, end: f64 },

    #[error("size guard: {0}")]
    TooLarge(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
