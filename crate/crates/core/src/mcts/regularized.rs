#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("length mismatch: {qs} values vs {priors} priors")]
    Length { qs: usize, priors: usize },
    #[error("empty action set")]
    Empty,
    #[error("non-finite input")]
    NonFinite,
    #[error("priors must be non-negative with positive total mass (sum {0})")]
    BadPriors(f64),
    #[error("lambda must be positive and finite, got {0}")]
    BadLambda(f64),
}

fn validate(q: &[f64], priors: &[f64], lambda: f64) -> Result<(), PolicyError> {
    if q.len() != priors.len() {
        return Err(PolicyError::Length { qs: q.len(), priors: priors.len() });
    }
    if q.is_empty() {
        return Err(PolicyError::Empty);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(PolicyError::BadLambda(lambda));
    }
    if q.iter().chain(priors).any(|x| !x.is_finite()) {
        return Err(PolicyError::NonFinite);
    }
    if priors.iter().any(|&p| p < 0.0) {
        return Err(PolicyError::BadPriors(priors.iter().sum()));
    }
    let sum: f64 = priors.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(PolicyError::BadPriors(sum));
    }
    Ok(())
}

/// Root of `f(alpha) = sum_a lambda * priors[a] / (alpha - q[a]) - 1`
/// above `max q`, restricted to actions with positive prior.
///
/// `f` is convex and strictly decreasing on `(max q, inf)`, and is
/// bracketed by `[max q + lambda * priors_at_max, max q + lambda]`.
/// Newton steps are taken inside that bracket and fall back to
/// bisection whenever a step would leave it, so convergence is
/// guaranteed and quadratic near the root.
pub fn solve_alpha(q: &[f64], priors: &[f64], lambda: f64) -> Result<f64, PolicyError> {
    validate(q, priors, lambda)?;
    let support: Vec<usize> = (0..q.len()).filter(|&i| priors[i] > 0.0).collect();
    debug_assert!(!support.is_empty(), "validated priors have positive mass");

    let qmax = support.iter().map(|&i| q[i]).fold(f64::NEG_INFINITY, f64::max);
    let mass_at_max: f64 = support.iter().filter(|&&i| q[i] == qmax).map(|&i| priors[i]).sum();
    let total_mass: f64 = support.iter().map(|&i| priors[i]).sum();

    let mut lo = qmax + lambda * mass_at_max; // f(lo) >= 0
    let mut hi = qmax + lambda * total_mass; // f(hi) <= 0
    if lo >= hi {
        // All prior mass sits at qmax; the root is exact.
        return Ok(hi);
    }

    let eval = |alpha: f64| {
        let mut f = -1.0;
        let mut fp = 0.0;
        for &i in &support {
            let d = alpha - q[i];
            let term = lambda * priors[i] / d;
            f += term;
            fp -= term / d;
        }
        (f, fp)
    };

    let mut alpha = hi;
    for _ in 0..100 {
        let (f, fp) = eval(alpha);
        if f > 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
        if f.abs() < 1e-15 {
            break;
        }
        let mut next = alpha - f / fp;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - alpha).abs() <= f64::EPSILON * alpha.abs() {
            break;
        }
        alpha = next;
    }
    Ok(alpha)
}

/// The regularized policy `pi*(a) = lambda * priors(a) / (alpha - q(a))`,
/// zero off the prior support, renormalized to sum exactly to one.
pub fn regularized_policy(q: &[f64], priors: &[f64], lambda: f64) -> Result<Vec<f64>, PolicyError> {
    let alpha = solve_alpha(q, priors, lambda)?;
    let mut pi = vec![0.0; q.len()];
    let mut sum = 0.0;
    for i in 0..q.len() {
        if priors[i] > 0.0 {
            pi[i] = lambda * priors[i] / (alpha - q[i]);
            sum += pi[i];
        }
    }
    for p in &mut pi {
        *p /= sum;
    }
    Ok(pi)
}
