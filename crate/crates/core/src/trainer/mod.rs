//! Self-play training loop.
//!
//! One environment step drives every slot through a full search, samples
//! a move from each searched policy, advances the batch environment, and
//! feeds finished games into the replay buffer. Each environment step is
//! followed by at most one learner step (once the buffer holds a batch),
//! keeping the paper's 1:1 actor/learner coupling.
//!
//! Compute is metered exactly: `train_flops = selfplay_forwards * fpf +
//! learner_samples * 3 * fpf`. Snapshots are captured when `train_flops`
//! crosses the next threshold of a halving schedule anchored at the flop
//! limit. A single step can cross several thresholds at once (small runs
//! outpace the earliest thresholds); one snapshot is taken at the highest
//! crossed index so stored snapshots always have strictly increasing
//! compute.

mod buffer;
mod meter;
mod run;
mod schedule;

pub use buffer::{ReplayBuffer, Sample};
pub use meter::ComputeMeter;
pub use run::{game_to_samples, run_training, MetricsRecord, NullSink, Ply, RunSink, TrainReport};
pub use schedule::snapshot_schedule;

use serde::{Deserialize, Serialize};

use crate::hex::{EnvError, HexError};
use crate::mcts::{SearchConfig, SearchError};
use crate::nnet::{AdamConfig, ConfigError, LossWeights, NetError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub board_size: u8,
    pub width: usize,
    pub depth: usize,
    pub n_envs: usize,
    pub batch_size: usize,
    /// Replay capacity in environment steps; sample capacity is
    /// `buffer_steps * n_envs`.
    pub buffer_steps: usize,
    pub lr: f64,
    pub adam: AdamConfig,
    pub loss_weights: LossWeights,
    pub search: SearchConfig,
    /// Length of the halving snapshot schedule.
    pub snapshots: u32,
    /// Stop once this many samples were consumed by the learner.
    pub sample_limit: Option<u64>,
    /// Stop once train_flops reaches this; also anchors the schedule.
    pub flop_limit: u64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if let Err(e) = crate::nnet::NetConfig::new(self.board_size, self.width, self.depth) {
            return bad(e.to_string());
        }
        if self.n_envs == 0 {
            return bad("n_envs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.buffer_steps == 0 {
            return bad("buffer_steps must be positive".into());
        }
        if self.batch_size > self.buffer_steps * self.n_envs {
            return bad(format!(
                "batch_size {} exceeds buffer capacity {}",
                self.batch_size,
                self.buffer_steps * self.n_envs
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if let Err(e) = self.search.validate() {
            return bad(e);
        }
        if self.snapshots < 2 {
            return bad("snapshots must be at least 2".into());
        }
        if self.flop_limit == 0 {
            return bad("flop_limit must be positive".into());
        }
        if self.sample_limit == Some(0) {
            return bad("sample_limit must be positive when set".into());
        }
        Ok(())
    }

    /// Desk-scale preset: full algorithm, budgets sized for one machine.
    pub fn desk(board_size: u8) -> Option<TrainConfig> {
        let (width, depth, flop_limit) = match board_size {
            3 => (16, 2, 30_000_000_000),
            4 => (16, 4, 50_000_000_000),
            5 => (16, 8, 150_000_000_000),
            6 => (32, 8, 300_000_000_000),
            _ => return None,
        };
        Some(TrainConfig {
            board_size,
            width,
            depth,
            n_envs: 512,
            batch_size: 512,
            buffer_steps: 64,
            lr: 1e-3,
            adam: AdamConfig::default(),
            loss_weights: LossWeights::default(),
            search: SearchConfig::selfplay(board_size),
            snapshots: 21,
            sample_limit: None,
            flop_limit,
            seed: 0,
        })
    }

    /// Published-scale preset. These are faithful to the original
    /// budgets and are far beyond a desk machine; they exist so the
    /// configuration is explicit and runnable on serious hardware.
    pub fn paper(board_size: u8) -> Option<TrainConfig> {
        let (width, depth, samples, flops) = match board_size {
            3 => (2, 4, 400_000_000, 1_000_000_000_000),
            4 => (16, 4, 200_000_000, 10_000_000_000_000),
            5 => (16, 8, 300_000_000, 30_000_000_000_000),
            6 => (128, 8, 600_000_000, 400_000_000_000_000),
            7 => (512, 8, 1_000_000_000, 10_000_000_000_000_000),
            8 => (512, 8, 1_000_000_000, 30_000_000_000_000_000),
            9 => (1024, 8, 2_000_000_000, 100_000_000_000_000_000),
            _ => return None,
        };
        Some(TrainConfig {
            board_size,
            width,
            depth,
            n_envs: 32_768,
            batch_size: 32_768,
            buffer_steps: 64,
            lr: 1e-3,
            adam: AdamConfig::default(),
            loss_weights: LossWeights::default(),
            search: SearchConfig::selfplay(board_size),
            snapshots: 21,
            sample_limit: Some(samples),
            flop_limit: flops,
            seed: 0,
        })
    }

    pub fn preset(name: &str) -> Option<TrainConfig> {
        let (family, board) = name.split_once('-')?;
        let board: u8 = board.parse().ok()?;
        match family {
            "desk" => TrainConfig::desk(board),
            "paper" => TrainConfig::paper(board),
            _ => None,
        }
    }

    pub fn preset_names() -> Vec<String> {
        let mut names: Vec<String> = (3..=6).map(|b| format!("desk-{b}")).collect();
        names.extend((3..=9).map(|b| format!("paper-{b}")));
        names
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Hex(#[from] HexError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("sink: {0}")]
    Sink(#[from] std::io::Error),
}

impl From<ConfigError> for TrainError {
    fn from(e: ConfigError) -> Self {
        TrainError::Config(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_cover_documented_range() {
        for name in TrainConfig::preset_names() {
            let cfg = TrainConfig::preset(&name).expect("preset exists");
            cfg.validate().expect("preset validates");
        }
        assert!(TrainConfig::preset("desk-7").is_none());
        assert!(TrainConfig::preset("paper-2").is_none());
        assert!(TrainConfig::preset("galaxy-9").is_none());
    }

    #[test]
    fn paper_presets_match_published_budgets() {
        let p9 = TrainConfig::paper(9).unwrap();
        assert_eq!((p9.width, p9.depth), (1024, 8));
        assert_eq!(p9.flop_limit, 100_000_000_000_000_000);
        assert_eq!(p9.sample_limit, Some(2_000_000_000));
        assert_eq!(p9.n_envs, 32_768);
        assert_eq!(p9.buffer_steps * p9.n_envs, 2_097_152);
        let p3 = TrainConfig::paper(3).unwrap();
        assert_eq!((p3.width, p3.depth), (2, 4));
        assert_eq!(p3.search.node_budget, 64);
        assert_eq!(p3.search.c_puct, 1.0 / 16.0);
        assert_eq!(p3.search.noise_eps, 0.25);
    }

    #[test]
    fn validation_rejects_inconsistent_configs() {
        let mut cfg = TrainConfig::desk(3).unwrap();
        cfg.batch_size = cfg.buffer_steps * cfg.n_envs + 1;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::desk(3).unwrap();
        cfg.lr = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::desk(3).unwrap();
        cfg.flop_limit = 0;
        assert!(cfg.validate().is_err());
    }
}
