//! Hex self-play training, Elo rating, and compute-scaling analysis.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`hex`]: game rules, a vectorized self-play environment, and an exact
//!   solver for small boards.
//! * [`nnet`]: a dense residual policy/value network with hand-written
//!   backprop and an exact FLOP accounting model.
//! * [`mcts`]: search with regularized policy optimization at every node.
//! * [`trainer`]: the self-play + learner loop, replay buffer, compute meter,
//!   and snapshot schedule.
//! * [`arena`]: agents, round-robin match play, and Bradley-Terry Elo fits.
//! * [`scaling`]: compute-performance frontier extraction, change-point
//!   curve fits, and train/test compute trade-off analysis.
//! * [`store`]: on-disk layout for runs, snapshots, match ledgers, and
//!   analysis artifacts.
//!
//! Every random decision flows from explicit `u64` seeds through
//! per-slot ChaCha8 streams, so runs are reproducible bit-for-bit and
//! results never depend on thread count.

pub mod arena;
pub mod hex;
pub mod mcts;
pub mod nnet;
pub mod rng;
pub mod scaling;
pub mod store;
pub mod trainer;

pub use hex::{BatchEnv, Board, Coord, Outcome, Player};
pub use nnet::{NetConfig, Params};
pub use trainer::TrainConfig;
