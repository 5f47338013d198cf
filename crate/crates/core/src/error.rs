use thiserror::Error;

/// Errors raised by the model systems, solvers and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model system: {0}")]
    InvalidSystem(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("radius {radius} exceeds the chart validity scale {max}")]
    ChartOverflow { radius: f64, max: f64 },

    #[error("point is not on the {leaf} leaf (defect {defect:.3e})")]
    NotOnLeaf { leaf: &'static str, defect: f64 },

    #[error("holonomy leaves the chart before meeting the target transversal")]
    HolonomyExit,

    #[error("resolution exhausted: {0}")]
    ResolutionExhausted(String),

    #[error("sample starvation: {found} samples in the smallest ball, need {needed}")]
    Starvation { found: usize, needed: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "inconsistent chart overlap: max relative discrepancy {discrepancy:.3e} at cell ({i}, {j})"
    )]
    InconsistentOverlap {
        discrepancy: f64,
        i: usize,
        j: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
