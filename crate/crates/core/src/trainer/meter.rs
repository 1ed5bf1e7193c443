use serde::{Deserialize, Serialize};

/// Exact integer compute meter.
///
/// A forward pass costs `flops_per_forward`; a training sample costs
/// three forwards (one forward plus a backward at twice the forward).
/// All accounting is unsaturated u64 arithmetic, so two runs with equal
/// counters report identical flops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeMeter {
    flops_per_forward: u64,
    selfplay_forwards: u64,
    learner_samples: u64,
}

impl ComputeMeter {
    pub fn new(flops_per_forward: u64) -> ComputeMeter {
        assert!(flops_per_forward > 0);
        ComputeMeter { flops_per_forward, selfplay_forwards: 0, learner_samples: 0 }
    }

    pub fn add_selfplay_forwards(&mut self, n: u64) {
        self.selfplay_forwards += n;
    }

    pub fn add_learner_samples(&mut self, n: u64) {
        self.learner_samples += n;
    }

    pub fn flops_per_forward(&self) -> u64 {
        self.flops_per_forward
    }

    pub fn selfplay_forwards(&self) -> u64 {
        self.selfplay_forwards
    }

    pub fn learner_samples(&self) -> u64 {
        self.learner_samples
    }

    pub fn train_flops(&self) -> u64 {
        self.selfplay_forwards * self.flops_per_forward
            + self.learner_samples * 3 * self.flops_per_forward
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accounting_matches_the_stated_formula() {
        let mut m = ComputeMeter::new(1000);
        m.add_selfplay_forwards(7);
        m.add_learner_samples(5);
        m.add_selfplay_forwards(3);
        assert_eq!(m.selfplay_forwards(), 10);
        assert_eq!(m.learner_samples(), 5);
        assert_eq!(m.train_flops(), 10 * 1000 + 5 * 3 * 1000);
    }

    #[test]
    fn published_scale_fits_in_u64() {
        // Largest published run: 1e17 flops, far under 2^63.
        let net = crate::nnet::NetConfig::new(9, 1024, 8).unwrap();
        let mut m = ComputeMeter::new(crate::nnet::flops_per_forward(&net));
        m.add_selfplay_forwards(5_000_000_000);
        m.add_learner_samples(2_000_000_000);
        assert!(m.train_flops() > 100_000_000_000_000_000);
    }
}
