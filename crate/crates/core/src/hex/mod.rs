//! Hex rules, batched self-play environment, and exact solver.
//!
//! Conventions used throughout the crate:
//!
//! * Cells are addressed `(row, col)`, zero-based, index `row * size + col`.
//! * Neighbors on the rhombus are `(r-1,c) (r-1,c+1) (r,c-1) (r,c+1)
//!   (r+1,c-1) (r+1,c)`.
//! * Black connects row 0 to row `size-1`, White connects column 0 to
//!   column `size-1`. Black moves first.
//! * There is no swap rule; color asymmetry is handled by paired matches
//!   with colors exchanged.

mod board;
mod env;
mod solver;

pub use board::{Board, Coord, HexError, Outcome, Player, MAX_SIZE};
pub use env::{BatchEnv, EnvError};
pub use solver::{Solved, Solver, SolverError, SOLVER_MAX_SIZE};
