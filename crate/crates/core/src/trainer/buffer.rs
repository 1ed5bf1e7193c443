use ndarray::{Array1, Array2};
use rand::Rng;

use crate::nnet::{NetConfig, Real, TrainBatch};

/// One training example: observation, search policy, final result from
/// the mover's perspective.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub obs: Vec<f32>,
    pub policy: Vec<f32>,
    pub value: f32,
}

/// Fixed-capacity FIFO replay buffer. New samples overwrite the oldest
/// once full; batches are drawn uniformly with replacement.
pub struct ReplayBuffer {
    cap: usize,
    data: Vec<Sample>,
    /// Next write position once the ring has wrapped.
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(cap: usize) -> ReplayBuffer {
        assert!(cap > 0, "replay capacity must be positive");
        ReplayBuffer { cap, data: Vec::with_capacity(cap.min(1 << 20)), next: 0, pushed: 0 }
    }

    pub fn push(&mut self, sample: Sample) {
        if self.data.len() < self.cap {
            self.data.push(sample);
        } else {
            self.data[self.next] = sample;
            self.next = (self.next + 1) % self.cap;
        }
        self.pushed += 1;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    /// Samples ever pushed, including ones already evicted.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    /// Draw `n` samples uniformly with replacement into a dense batch.
    pub fn sample_batch<F: Real>(
        &self,
        cfg: &NetConfig,
        n: usize,
        rng: &mut impl Rng,
    ) -> TrainBatch<F> {
        assert!(!self.data.is_empty(), "cannot sample from an empty buffer");
        assert!(n > 0, "batch size must be positive");
        let cells = cfg.cells();
        let obs_len = cfg.obs_len();
        let mut obs = Array2::zeros((n, obs_len));
        let mut policy = Array2::zeros((n, cells));
        let mut value = Array1::zeros(n);
        for row in 0..n {
            let s = &self.data[rng.random_range(0..self.data.len())];
            debug_assert_eq!(s.obs.len(), obs_len);
            debug_assert_eq!(s.policy.len(), cells);
            for (dst, &src) in obs.row_mut(row).iter_mut().zip(&s.obs) {
                *dst = F::from_f64(src as f64);
            }
            for (dst, &src) in policy.row_mut(row).iter_mut().zip(&s.policy) {
                *dst = F::from_f64(src as f64);
            }
            value[row] = F::from_f64(s.value as f64);
        }
        TrainBatch { obs, policy_target: policy, value_target: value }
    }
}
