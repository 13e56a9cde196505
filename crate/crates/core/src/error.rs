use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inverse transform left an imaginary residue of {max:e} (limit 1e-9)")]
    ImaginaryResidue { max: f64 },

    #[error("mode radius {m} needs a {side}x{side} block but the grid is {h}x{w}", side = 2 * m + 1)]
    ModeOverflow { m: usize, h: usize, w: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("group action requested on a kernel without a group axis")]
    NoGroupAxis,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteEpoch { epoch: usize },

    #[error("tape holds no forward pass (never recorded or already consumed)")]
    TapeConsumed,

    #[error("reference sample {sample} has zero norm")]
    ZeroReference { sample: usize },

    #[error("solver unstable: {0}")]
    Instability(String),

    #[error("dry cell encountered (h = {h:e})")]
    DryCell { h: f64 },

    #[error("negative depth clamping removed {clamped:e} m^3, above tolerance {limit:e} m^3")]
    NegativeDepth { clamped: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("checkpoint config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
