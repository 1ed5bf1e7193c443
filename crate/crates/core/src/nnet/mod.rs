//! Dense residual policy/value network with hand-written backprop.
//!
//! The architecture is deliberately small and fully specified:
//!
//! * input: the two observation planes flattened to `2 * cells`,
//! * a dense input layer to `width` units with ReLU,
//! * `depth` residual blocks, each `h <- h + relu(W h + b)`,
//! * a policy head (`cells` logits, masked softmax over legal cells),
//! * a value head (scalar, tanh) predicting the mover's result in [-1, 1].
//!
//! Everything is generic over [`Real`] so the identical code path runs in
//! f32 for production and f64 for finite-difference gradient checks.
//!
//! FLOP accounting follows one convention everywhere: a multiply-add is
//! 2 FLOPs, a backward pass costs twice the forward, so one training
//! sample costs 3x `flops_per_forward`.

mod adam;
mod model;
mod real;
mod snapshot;

pub use adam::{Adam, AdamConfig};
pub use model::{
    forward, loss_and_grad, Dense, LossParts, LossWeights, NetError, NetOutput, Params,
    TrainBatch,
};
pub use real::Real;
pub use snapshot::{read_snapshot, write_snapshot, SnapshotError, SnapshotHeader, SNAPSHOT_SCHEMA};

use serde::{Deserialize, Serialize};

use crate::hex::MAX_SIZE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub board_size: u8,
    /// Hidden width shared by every layer.
    pub width: usize,
    /// Number of residual blocks.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("board size {0} outside 1..={MAX_SIZE}")]
    BadBoard(u8),
    #[error("width must be positive")]
    BadWidth,
}

impl NetConfig {
    pub fn new(board_size: u8, width: usize, depth: usize) -> Result<NetConfig, ConfigError> {
        let cfg = NetConfig { board_size, width, depth };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.board_size == 0 || self.board_size > MAX_SIZE {
            return Err(ConfigError::BadBoard(self.board_size));
        }
        if self.width == 0 {
            return Err(ConfigError::BadWidth);
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.board_size as usize * self.board_size as usize
    }

    pub fn obs_len(&self) -> usize {
        2 * self.cells()
    }
}

/// Exact trainable parameter count (weights plus biases).
pub fn count_params(cfg: &NetConfig) -> u64 {
    let (w, d, c) = (cfg.width as u64, cfg.depth as u64, cfg.cells() as u64);
    let input = w * 2 * c + w;
    let blocks = d * (w * w + w);
    let policy = c * w + c;
    let value = w + 1;
    input + blocks + policy + value
}

/// FLOPs for a single forward pass at batch size one, counting each
/// multiply-add in the four matmul stages as 2 FLOPs. Elementwise ops
/// are not charged; they are a vanishing fraction at these widths.
pub fn flops_per_forward(cfg: &NetConfig) -> u64 {
    let (w, d, c) = (cfg.width as u64, cfg.depth as u64, cfg.cells() as u64);
    2 * (2 * c * w + d * w * w + w * c + w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_counts() {
        let cfg = NetConfig::new(9, 512, 2).unwrap();
        assert_eq!(count_params(&cfg), 650_834);
        assert_eq!(flops_per_forward(&cfg), 1_298_432);
    }

    #[test]
    fn param_count_matches_allocated_tensors() {
        use rand_chacha::ChaCha8Rng;
        let cfg = NetConfig::new(4, 24, 3).unwrap();
        let p = Params::<f32>::init(cfg, &mut <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0));
        assert_eq!(p.to_flat().len() as u64, count_params(&cfg));
    }

    #[test]
    fn config_validation() {
        assert!(NetConfig::new(0, 8, 1).is_err());
        assert!(NetConfig::new(10, 8, 1).is_err());
        assert!(NetConfig::new(5, 0, 1).is_err());
        assert!(NetConfig::new(5, 8, 0).is_ok());
    }
}
