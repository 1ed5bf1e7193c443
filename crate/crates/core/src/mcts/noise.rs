use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Mixes Dirichlet noise into a prior vector in place:
/// `p <- (1 - eps) * p + eps * Dirichlet(alpha)`.
///
/// The noise covers the whole slice, which is expected to hold the
/// priors of the legal moves only. With `eps == 0` the priors are
/// returned untouched and the RNG is never consumed.
pub fn apply_root_noise(priors: &mut [f64], eps: f64, alpha: f64, rng: &mut impl Rng) {
    assert!((0.0..=1.0).contains(&eps), "eps must lie in [0, 1], got {eps}");
    assert!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive, got {alpha}");
    if eps == 0.0 || priors.is_empty() {
        return;
    }
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    let mut noise: Vec<f64> = priors.iter().map(|_| gamma.sample(rng)).collect();
    let sum: f64 = noise.iter().sum();
    if sum > 0.0 {
        for n in &mut noise {
            *n /= sum;
        }
    } else {
        // Gamma draws can all underflow for very small alpha.
        let u = 1.0 / noise.len() as f64;
        for n in &mut noise {
            *n = u;
        }
    }
    for (p, n) in priors.iter_mut().zip(noise) {
        *p = (1.0 - eps) * *p + eps * n;
    }
}
