//! Compute-scaling analysis over rated snapshots.
//!
//! The pipeline: [`extract_frontier`] turns rated snapshots into
//! per-board compute frontiers; [`fit_changepoint`] fits the
//! five-parameter change-point model (annealed multi-start L-BFGS);
//! [`derive_quantities`] reads off the interpretable summaries;
//! [`predictive_error`] scores small-board fits on held-out larger
//! boards; [`fit_sigmoid`] and [`fit_linear`] are comparator curve
//! families; and [`tradeoff_analysis`] re-evaluates snapshots across
//! test-time node budgets to expose the train/test compute exchange
//! rate.
//!
//! Everything except `tradeoff_analysis` is a pure function over point
//! sets; that one plays matches and delegates concurrency to the arena.

mod alt_models;
mod fit;
mod frontier;
mod lbfgs;
mod model;
mod predict;
mod tradeoff;

pub use alt_models::{fit_linear, fit_sigmoid, LinearFit, SigmoidFit, SigmoidParams};
pub use fit::{changepoint_mse, fit_changepoint, per_board_incline_slopes, ChangePointFit};
pub use frontier::{extract_frontier, FrontierPoint, RatedSnapshot};
pub use lbfgs::{minimize, minimize_fd, LbfgsOptions, LbfgsResult};
pub use model::{derive_quantities, model_elo, ChangePointParams, DerivedQuantities};
pub use predict::{predictive_error, PredictiveError};
pub use tradeoff::{
    iso_elo_slopes, tradeoff_analysis, IsoEloLine, TradeoffAnalysis, TradeoffPoint,
    TradeoffSnapshot,
};

use crate::arena::ArenaError;

#[derive(Debug, thiserror::Error)]
pub enum ScalingError {
    #[error("invalid analysis config: {0}")]
    Config(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("fit did not converge: {0}")]
    NoConvergence(String),
    #[error(transparent)]
    Arena(#[from] ArenaError),
}
