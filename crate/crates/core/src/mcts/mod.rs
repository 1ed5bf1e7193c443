//! Search with regularized policy optimization.
//!
//! Instead of UCT, every node solves a small convex program: maximize
//! `sum_a pi(a) q(a) - lambda_N * KL(priors || pi)` over the simplex.
//! The optimum has the closed form `pi*(a) = lambda_N * priors(a) /
//! (alpha - q(a))` where `alpha` is the unique root of
//! `sum_a lambda_N * priors(a) / (alpha - q(a)) = 1` above `max q`.
//! Children are visited greedily by `argmax pi*(a) - n(a) / (1 + sum n)`,
//! which steers visit proportions toward `pi*`. The searched policy
//! returned for training is `pi*` at the root under the final statistics.

mod noise;
mod regularized;
mod search;

pub use noise::apply_root_noise;
pub use regularized::{regularized_policy, solve_alpha, PolicyError};
pub use search::{sample_move, search, search_batch, SearchConfig, SearchError, SearchResult};
