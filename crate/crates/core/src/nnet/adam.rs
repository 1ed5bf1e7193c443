use super::{count_params, Params, Real};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment vectors follow the canonical flat
/// parameter order, so optimizer state lines up with snapshots.
pub struct Adam<F> {
    cfg: AdamConfig,
    m: Vec<F>,
    v: Vec<F>,
    t: u64,
}

impl<F: Real> Adam<F> {
    pub fn new(params: &Params<F>, cfg: AdamConfig) -> Adam<F> {
        let n = count_params(params.cfg()) as usize;
        Adam { cfg, m: vec![F::zero(); n], v: vec![F::zero(); n], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Params<F>, grads: &Params<F>, lr: f64) {
        self.t += 1;
        let b1 = F::from_f64(self.cfg.beta1);
        let b2 = F::from_f64(self.cfg.beta2);
        let one = F::one();
        let eps = F::from_f64(self.cfg.eps);
        // Fold bias correction into the step size.
        let corr1 = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let corr2 = 1.0 - self.cfg.beta2.powi(self.t as i32);
        let alpha = F::from_f64(lr * corr2.sqrt() / corr1);

        let (m, v) = (&mut self.m, &mut self.v);
        let mut off = 0;
        params.zip_slices_mut(grads, |ps, gs| {
            for (i, (p, &g)) in ps.iter_mut().zip(gs).enumerate() {
                let j = off + i;
                m[j] = b1 * m[j] + (one - b1) * g;
                v[j] = b2 * v[j] + (one - b2) * g * g;
                *p = *p - alpha * m[j] / (v[j].sqrt() + eps);
            }
            off += ps.len();
        });
        debug_assert_eq!(off, m.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{loss_and_grad, LossWeights, NetConfig, TrainBatch};
    use ndarray::{Array1, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_moves_by_lr_in_gradient_sign() {
        // With bias correction the first update is lr * g / (|g| + eps').
        let cfg = NetConfig::new(2, 3, 0).unwrap();
        let mut p: Params<f64> = Params::init(cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let before = p.to_flat();
        let mut g = p.zeros_like();
        g.input.w[[0, 0]] = 0.5;
        g.input.w[[1, 1]] = -2.0;
        let mut adam = Adam::new(&p, AdamConfig::default());
        adam.step(&mut p, &g, 1e-3);
        let after = p.to_flat();
        assert!((before[0] - after[0] - 1e-3).abs() < 1e-6);
        let j = cfg.obs_len() + 1;
        assert!((after[j] - before[j] - 1e-3).abs() < 1e-6);
        // Untouched coordinates stay put.
        assert_eq!(before[2], after[2]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn adam_descends_on_a_fixed_batch() {
        let cfg = NetConfig::new(3, 16, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p: Params<f64> = Params::init(cfg, &mut rng);
        // Four distinct one-stone positions, each with its own one-hot
        // target: fully memorizable.
        let n = 4;
        let mut obs = Array2::zeros((n, cfg.obs_len()));
        let mut tgt = Array2::zeros((n, cfg.cells()));
        let mut val = Array1::zeros(n);
        for i in 0..n {
            let mut board = crate::hex::Board::new(3).unwrap();
            board.apply_move(crate::hex::Coord::new(0, (i as u8).min(2))).unwrap();
            if i == 3 {
                board.apply_move(crate::hex::Coord::new(2, 2)).unwrap();
            }
            for (c, &x) in board.observation().iter().enumerate() {
                obs[[i, c]] = x as f64;
            }
            tgt[[i, 3 + i]] = 1.0;
            val[i] = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let batch = TrainBatch { obs, policy_target: tgt, value_target: val };
        let mut adam = Adam::new(&p, AdamConfig::default());
        let (first, _) = loss_and_grad(&p, &batch, LossWeights::default()).unwrap();
        let mut last = first.total;
        for _ in 0..200 {
            let (parts, grads) = loss_and_grad(&p, &batch, LossWeights::default()).unwrap();
            adam.step(&mut p, &grads, 3e-3);
            last = parts.total;
        }
        assert!(
            last < 0.2 * first.total,
            "loss should fall on a memorizable batch: {first:?} -> {last}"
        );
    }
}
