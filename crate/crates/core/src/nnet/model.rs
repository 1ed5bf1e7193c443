use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{count_params, NetConfig, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("batch row {0} has no legal cells")]
    NoLegalMoves(usize),
    #[error("non-finite loss: training diverged")]
    NonFinite,
}

#[derive(Clone, Debug)]
pub struct Dense<F> {
    /// Weight matrix, shape (out, in), row-major.
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Real> Dense<F> {
    fn init(rng: &mut impl Rng, out: usize, inp: usize, limit: f64) -> Dense<F> {
        let mut draw = || F::from_f64(rng.random_range(-limit..limit));
        Dense {
            w: Array2::from_shape_simple_fn((out, inp), &mut draw),
            b: Array1::zeros(out),
        }
    }

    fn zeros_like(&self) -> Dense<F> {
        Dense { w: Array2::zeros(self.w.raw_dim()), b: Array1::zeros(self.b.raw_dim()) }
    }
}

/// All trainable tensors of one network.
///
/// The canonical flat order (input, blocks in order, policy, value;
/// weights before biases, row-major) is shared by the optimizer state
/// and the snapshot format.
#[derive(Clone, Debug)]
pub struct Params<F: Real> {
    cfg: NetConfig,
    pub input: Dense<F>,
    pub blocks: Vec<Dense<F>>,
    pub policy: Dense<F>,
    pub value: Dense<F>,
}

impl<F: Real> Params<F> {
    /// He-uniform init for the ReLU trunk, Xavier-uniform for the heads,
    /// zero biases. Draws happen in a fixed order from the caller's RNG.
    pub fn init(cfg: NetConfig, rng: &mut impl Rng) -> Params<F> {
        cfg.validate().expect("validated config");
        let (w, c) = (cfg.width, cfg.cells());
        let he = |fan_in: usize| (6.0 / fan_in as f64).sqrt();
        let xavier = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        Params {
            cfg,
            input: Dense::init(rng, w, 2 * c, he(2 * c)),
            blocks: (0..cfg.depth).map(|_| Dense::init(rng, w, w, he(w))).collect(),
            policy: Dense::init(rng, c, w, xavier(w, c)),
            value: Dense::init(rng, 1, w, xavier(w, 1)),
        }
    }

    pub fn zeros_like(&self) -> Params<F> {
        Params {
            cfg: self.cfg,
            input: self.input.zeros_like(),
            blocks: self.blocks.iter().map(Dense::zeros_like).collect(),
            policy: self.policy.zeros_like(),
            value: self.value.zeros_like(),
        }
    }

    pub fn cfg(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn for_each_slice<'a>(&'a self, mut f: impl FnMut(&'a [F])) {
        let flat2 = |a: &'a Array2<F>| a.as_slice().expect("standard layout");
        let flat1 = |a: &'a Array1<F>| a.as_slice().expect("standard layout");
        f(flat2(&self.input.w));
        f(flat1(&self.input.b));
        for blk in &self.blocks {
            f(flat2(&blk.w));
            f(flat1(&blk.b));
        }
        f(flat2(&self.policy.w));
        f(flat1(&self.policy.b));
        f(flat2(&self.value.w));
        f(flat1(&self.value.b));
    }

    pub fn for_each_slice_mut(&mut self, mut f: impl FnMut(&mut [F])) {
        f(self.input.w.as_slice_mut().expect("standard layout"));
        f(self.input.b.as_slice_mut().expect("standard layout"));
        for blk in &mut self.blocks {
            f(blk.w.as_slice_mut().expect("standard layout"));
            f(blk.b.as_slice_mut().expect("standard layout"));
        }
        f(self.policy.w.as_slice_mut().expect("standard layout"));
        f(self.policy.b.as_slice_mut().expect("standard layout"));
        f(self.value.w.as_slice_mut().expect("standard layout"));
        f(self.value.b.as_slice_mut().expect("standard layout"));
    }

    /// Walks `self` and `other` in canonical order with paired slices.
    /// Panics if the configs differ.
    pub fn zip_slices_mut(&mut self, other: &Params<F>, mut f: impl FnMut(&mut [F], &[F])) {
        assert_eq!(self.cfg, other.cfg, "parameter shapes must match");
        f(
            self.input.w.as_slice_mut().expect("standard layout"),
            other.input.w.as_slice().expect("standard layout"),
        );
        f(
            self.input.b.as_slice_mut().expect("standard layout"),
            other.input.b.as_slice().expect("standard layout"),
        );
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            f(
                a.w.as_slice_mut().expect("standard layout"),
                b.w.as_slice().expect("standard layout"),
            );
            f(
                a.b.as_slice_mut().expect("standard layout"),
                b.b.as_slice().expect("standard layout"),
            );
        }
        f(
            self.policy.w.as_slice_mut().expect("standard layout"),
            other.policy.w.as_slice().expect("standard layout"),
        );
        f(
            self.policy.b.as_slice_mut().expect("standard layout"),
            other.policy.b.as_slice().expect("standard layout"),
        );
        f(
            self.value.w.as_slice_mut().expect("standard layout"),
            other.value.w.as_slice().expect("standard layout"),
        );
        f(
            self.value.b.as_slice_mut().expect("standard layout"),
            other.value.b.as_slice().expect("standard layout"),
        );
    }

    pub fn to_flat(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(count_params(&self.cfg) as usize);
        self.for_each_slice(|s| out.extend_from_slice(s));
        out
    }

    pub fn from_flat(cfg: NetConfig, flat: &[F]) -> Result<Params<F>, NetError> {
        if flat.len() as u64 != count_params(&cfg) {
            return Err(NetError::Shape(format!(
                "expected {} parameters for {:?}, got {}",
                count_params(&cfg),
                cfg,
                flat.len()
            )));
        }
        let mut rng = FlatReader { flat, pos: 0 };
        let (w, c) = (cfg.width, cfg.cells());
        let params = Params {
            cfg,
            input: rng.dense(w, 2 * c),
            blocks: (0..cfg.depth).map(|_| rng.dense(w, w)).collect(),
            policy: rng.dense(c, w),
            value: rng.dense(1, w),
        };
        debug_assert_eq!(rng.pos, flat.len());
        Ok(params)
    }

    /// Re-expresses the parameters in another precision. Used to run the
    /// identical network in f64 for gradient checks.
    pub fn cast<T: Real>(&self) -> Params<T> {
        let c2 = |a: &Array2<F>| a.mapv(|x| T::from_f64(x.to_f64()));
        let c1 = |a: &Array1<F>| a.mapv(|x| T::from_f64(x.to_f64()));
        let cd = |d: &Dense<F>| Dense { w: c2(&d.w), b: c1(&d.b) };
        Params {
            cfg: self.cfg,
            input: cd(&self.input),
            blocks: self.blocks.iter().map(cd).collect(),
            policy: cd(&self.policy),
            value: cd(&self.value),
        }
    }
}

struct FlatReader<'a, F> {
    flat: &'a [F],
    pos: usize,
}

impl<F: Real> FlatReader<'_, F> {
    fn take(&mut self, n: usize) -> &[F] {
        let s = &self.flat[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn dense(&mut self, out: usize, inp: usize) -> Dense<F> {
        let w = Array2::from_shape_vec((out, inp), self.take(out * inp).to_vec())
            .expect("length matches shape");
        let b = Array1::from_vec(self.take(out).to_vec());
        Dense { w, b }
    }
}

pub struct NetOutput<F> {
    /// Masked softmax policy over cells, shape (batch, cells); exactly
    /// zero on illegal cells.
    pub policy: Array2<F>,
    /// Tanh value in (-1, 1) from the mover's perspective.
    pub value: Array1<F>,
}

fn relu_inplace<F: Real>(a: &mut Array2<F>) {
    a.mapv_inplace(|x| if x > F::zero() { x } else { F::zero() });
}

fn trunk<F: Real>(p: &Params<F>, obs: ArrayView2<F>, cache: Option<&mut TrunkCache<F>>) -> Array2<F> {
    let mut h = obs.dot(&p.input.w.t()) + &p.input.b;
    let mut store = cache;
    if let Some(c) = store.as_deref_mut() {
        c.z_input = h.clone();
    }
    relu_inplace(&mut h);
    for (k, blk) in p.blocks.iter().enumerate() {
        if let Some(c) = store.as_deref_mut() {
            c.h.push(h.clone());
        }
        let mut z = h.dot(&blk.w.t()) + &blk.b;
        if let Some(c) = store.as_deref_mut() {
            c.z_blocks.push(z.clone());
        }
        relu_inplace(&mut z);
        h += &z;
        let _ = k;
    }
    h
}

struct TrunkCache<F> {
    z_input: Array2<F>,
    /// Inputs to each block (h after input relu, then after each block).
    h: Vec<Array2<F>>,
    z_blocks: Vec<Array2<F>>,
}

impl<F: Real> TrunkCache<F> {
    fn new(depth: usize) -> TrunkCache<F> {
        TrunkCache {
            z_input: Array2::zeros((0, 0)),
            h: Vec::with_capacity(depth),
            z_blocks: Vec::with_capacity(depth),
        }
    }
}

fn check_shapes<F: Real>(
    cfg: &NetConfig,
    obs: &ArrayView2<F>,
    mask_cols: usize,
    mask_rows: usize,
) -> Result<(), NetError> {
    if obs.ncols() != cfg.obs_len() {
        return Err(NetError::Shape(format!(
            "observation width {} != {}",
            obs.ncols(),
            cfg.obs_len()
        )));
    }
    if mask_cols != cfg.cells() || mask_rows != obs.nrows() {
        return Err(NetError::Shape(format!(
            "mask shape ({mask_rows}, {mask_cols}) != ({}, {})",
            obs.nrows(),
            cfg.cells()
        )));
    }
    Ok(())
}

/// Batched inference: masked softmax policy plus tanh value.
///
/// `mask` marks legal cells; every row needs at least one. Illegal cells
/// get exactly zero probability and legal probabilities sum to one.
pub fn forward<F: Real>(
    p: &Params<F>,
    obs: ArrayView2<F>,
    mask: &[bool],
) -> Result<NetOutput<F>, NetError> {
    let cells = p.cfg.cells();
    if mask.len() % cells != 0 {
        return Err(NetError::Shape(format!(
            "mask length {} not a multiple of {cells}",
            mask.len()
        )));
    }
    check_shapes(&p.cfg, &obs, cells, mask.len() / cells)?;
    let h = trunk(p, obs, None);
    let mut logits = h.dot(&p.policy.w.t()) + &p.policy.b;
    masked_softmax_inplace(&mut logits, mask)?;
    let mut value = h.dot(&p.value.w.t()) + &p.value.b;
    value.mapv_inplace(|x| x.tanh());
    Ok(NetOutput {
        policy: logits,
        value: value.index_axis_move(Axis(1), 0),
    })
}

fn masked_softmax_inplace<F: Real>(logits: &mut Array2<F>, mask: &[bool]) -> Result<(), NetError> {
    let cells = logits.ncols();
    for (i, mut row) in logits.axis_iter_mut(Axis(0)).enumerate() {
        let m = &mask[i * cells..(i + 1) * cells];
        let mut max = F::neg_infinity();
        for (c, &v) in row.iter().enumerate() {
            if m[c] && v > max {
                max = v;
            }
        }
        if max == F::neg_infinity() {
            return Err(NetError::NoLegalMoves(i));
        }
        let mut sum = F::zero();
        for (c, v) in row.iter_mut().enumerate() {
            if m[c] {
                *v = (*v - max).exp();
                sum = sum + *v;
            } else {
                *v = F::zero();
            }
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub policy: f64,
    pub value: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { policy: 1.0, value: 1.0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LossParts<F> {
    pub total: F,
    pub policy: F,
    pub value: F,
}

/// One training batch. Policy targets are dense over cells, zero on
/// illegal cells; value targets are the mover's final result in [-1, 1].
pub struct TrainBatch<F> {
    pub obs: Array2<F>,
    pub policy_target: Array2<F>,
    pub value_target: Array1<F>,
}

/// Combined cross-entropy + squared-error loss and its exact gradient.
///
/// Legality masks are derived from the observation itself: a cell is
/// legal iff both planes are zero there. Loss terms are means over the
/// batch, weighted by `weights`.
pub fn loss_and_grad<F: Real>(
    p: &Params<F>,
    batch: &TrainBatch<F>,
    weights: LossWeights,
) -> Result<(LossParts<F>, Params<F>), NetError> {
    let cells = p.cfg.cells();
    let n = batch.obs.nrows();
    check_shapes(&p.cfg, &batch.obs.view(), batch.policy_target.ncols(), batch.policy_target.nrows())?;
    if batch.value_target.len() != n {
        return Err(NetError::Shape(format!(
            "value targets {} != batch rows {n}",
            batch.value_target.len()
        )));
    }
    if n == 0 {
        return Err(NetError::Shape("empty batch".into()));
    }

    let mut cache = TrunkCache::new(p.cfg.depth);
    let h_last = trunk(p, batch.obs.view(), Some(&mut cache));

    let logits = h_last.dot(&p.policy.w.t()) + &p.policy.b;
    let u = h_last.dot(&p.value.w.t()) + &p.value.b;
    let v = u.mapv(|x| x.tanh());

    let wp = F::from_f64(weights.policy);
    let wv = F::from_f64(weights.value);
    let inv_n = F::from_f64(1.0 / n as f64);

    // Policy: masked log-softmax cross entropy, gradient (p - t) per row.
    let mut dlogits = Array2::zeros((n, cells));
    let mut policy_loss = F::zero();
    for i in 0..n {
        let row = logits.row(i);
        let mut max = F::neg_infinity();
        let legal = |c: usize| {
            batch.obs[[i, c]] == F::zero() && batch.obs[[i, cells + c]] == F::zero()
        };
        for c in 0..cells {
            if legal(c) && row[c] > max {
                max = row[c];
            }
        }
        if max == F::neg_infinity() {
            return Err(NetError::NoLegalMoves(i));
        }
        let mut sum = F::zero();
        for c in 0..cells {
            if legal(c) {
                sum = sum + (row[c] - max).exp();
            }
        }
        let lse = max + sum.ln();
        for c in 0..cells {
            let t = batch.policy_target[[i, c]];
            if legal(c) {
                let prob = (row[c] - lse).exp();
                dlogits[[i, c]] = (prob - t) * wp * inv_n;
                if t > F::zero() {
                    policy_loss = policy_loss + t * (lse - row[c]);
                }
            } else {
                debug_assert!(t == F::zero(), "policy target on illegal cell");
            }
        }
    }
    policy_loss = policy_loss * inv_n;

    // Value: mean squared error through tanh.
    let mut value_loss = F::zero();
    let mut du = Array2::zeros((n, 1));
    for i in 0..n {
        let diff = v[[i, 0]] - batch.value_target[i];
        value_loss = value_loss + diff * diff;
        let two = F::from_f64(2.0);
        du[[i, 0]] = two * diff * (F::one() - v[[i, 0]] * v[[i, 0]]) * wv * inv_n;
    }
    value_loss = value_loss * inv_n;

    let total = wp * policy_loss + wv * value_loss;
    if !total.is_finite() {
        return Err(NetError::NonFinite);
    }

    // Backward through the heads into the trunk.
    let mut grads = p.zeros_like();
    grads.policy.w = dlogits.t().dot(&h_last);
    grads.policy.b = dlogits.sum_axis(Axis(0));
    grads.value.w = du.t().dot(&h_last);
    grads.value.b = du.sum_axis(Axis(0));

    let mut dh = dlogits.dot(&p.policy.w) + du.dot(&p.value.w);

    for k in (0..p.cfg.depth).rev() {
        let z = &cache.z_blocks[k];
        let h_in = &cache.h[k];
        let mut dz = dh.clone();
        dz.zip_mut_with(z, |d, &zv| {
            if zv <= F::zero() {
                *d = F::zero();
            }
        });
        grads.blocks[k].w = dz.t().dot(h_in);
        grads.blocks[k].b = dz.sum_axis(Axis(0));
        dh += &dz.dot(&p.blocks[k].w);
    }

    let mut dz0 = dh;
    dz0.zip_mut_with(&cache.z_input, |d, &zv| {
        if zv <= F::zero() {
            *d = F::zero();
        }
    });
    grads.input.w = dz0.t().dot(&batch.obs);
    grads.input.b = dz0.sum_axis(Axis(0));

    Ok((LossParts { total, policy: policy_loss * wp, value: value_loss * wv }, grads))
}
