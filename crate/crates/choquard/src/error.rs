use thiserror::Error;

/// Errors surfaced by the public API.
///
/// Contract violations with no sensible recovery (mismatched grids,
/// kernel/field shape disagreement) panic instead; everything a caller can
/// plausibly trigger through configuration or data goes through here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("resolution too coarse: {feature} spans {got:.1} nodes, need at least {need}")]
    TooCoarse { feature: String, got: f64, need: u32 },

    #[error("inner region Omega_r^- is empty on this grid; reduce r_margin (currently {r_margin})")]
    EmptyInnerRegion { r_margin: f64 },

    #[error("grid too large for direct convolution: {nodes} nodes, limit {limit}; use the FFT path")]
    GridTooLarge { nodes: usize, limit: usize },

    #[error("no Nehari projection for nonpositive u")]
    NonpositiveField,

    #[error("zero field has no barycenter")]
    ZeroField,

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("run failed: {0}")]
    RunFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed field dump: {0}")]
    BadFieldDump(String),
}

pub type Result<T> = std::result::Result<T, Error>;
