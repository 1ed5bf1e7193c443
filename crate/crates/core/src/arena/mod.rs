//! Agent evaluation: match scheduling and Elo rating.
//!
//! Agents (net snapshots, a uniform-random baseline, the exact solver)
//! play paired-color matches so first-move advantage cancels out of
//! every head-to-head record. A league or top-agent schedule produces a
//! [`WinMatrix`]; [`fit_elos`] turns it into ratings by maximizing the
//! Bradley-Terry likelihood on the standard 400/log10 scale, with one
//! agent pinned as the zero anchor.
//!
//! Schedules are deterministic in their seed: every game gets its own
//! derived RNG stream, so regrouping games into different batches never
//! changes an outcome. Net moves inside a block run through the batched
//! search, which keeps large leagues at self-play throughput.

mod agent;
mod elo;
mod matches;

pub use agent::Agent;
pub use elo::{
    fit_elos, fit_elos_from, neg_log_likelihood, win_probability, EloEntry, EloRating, WinMatrix,
};
pub use matches::{
    play_pair, run_league, run_pairing, run_top_agent_eval, MatchConfig, MatchRecord, MatchSink,
    NullMatchSink,
};

use crate::hex::{HexError, SolverError};
use crate::mcts::SearchError;

#[derive(Debug, thiserror::Error)]
pub enum ArenaError {
    #[error("invalid arena config: {0}")]
    Config(String),
    #[error("duplicate agent id {0:?}")]
    DuplicateId(String),
    #[error("invalid agent id {0:?}")]
    BadId(String),
    #[error("unknown agent id {0:?}")]
    UnknownId(String),
    #[error("agent {id:?} cannot play {size}x{size}")]
    BoardUnsupported { id: String, size: u8 },
    #[error("win matrices cover different agents")]
    MatrixMismatch,
    #[error("rating fit did not converge")]
    NoConvergence,
    #[error(transparent)]
    Hex(#[from] HexError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("match sink failed: {0}")]
    Sink(#[from] std::io::Error),
}
