//! Limited-memory BFGS with two-loop recursion and Armijo backtracking.
//!
//! Small and dependency-free on purpose: the curve fits in this module
//! have five or six parameters, so robustness matters far more than
//! per-iteration cost.

use std::collections::VecDeque;

pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `|grad| <= grad_tol * (1 + |f|)`.
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> LbfgsOptions {
        LbfgsOptions { memory: 10, max_iters: 500, grad_tol: 1e-9 }
    }
}

pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// True when the gradient tolerance was met; false on iteration
    /// cap or a stalled line search (e.g. at a kink of a piecewise
    /// objective).
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn two_loop(grad: &[f64], s_hist: &VecDeque<Vec<f64>>, y_hist: &VecDeque<Vec<f64>>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let k = s_hist.len();
    let mut alpha = vec![0.0; k];
    let mut rho = vec![0.0; k];
    for i in (0..k).rev() {
        rho[i] = 1.0 / dot(&y_hist[i], &s_hist[i]);
        alpha[i] = rho[i] * dot(&s_hist[i], &q);
        for (qv, yv) in q.iter_mut().zip(&y_hist[i]) {
            *qv -= alpha[i] * yv;
        }
    }
    if k > 0 {
        let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
        for qv in &mut q {
            *qv *= gamma;
        }
    }
    for i in 0..k {
        let beta = rho[i] * dot(&y_hist[i], &q);
        for (qv, sv) in q.iter_mut().zip(&s_hist[i]) {
            *qv += (alpha[i] - beta) * sv;
        }
    }
    q
}

/// Minimize `f`, which must write the gradient into its second argument
/// and return the objective value.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut x_t = vec![0.0; n];
    let mut g_t = vec![0.0; n];
    let mut x_p = vec![0.0; n];
    let mut g_p = vec![0.0; n];
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        if norm(&g) <= opts.grad_tol * (1.0 + fx.abs()) {
            return LbfgsResult { x, value: fx, iterations, converged: true };
        }

        let mut d = two_loop(&g, &s_hist, &y_hist);
        for v in &mut d {
            *v = -*v;
        }
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            // Stale curvature produced a non-descent direction; restart.
            s_hist.clear();
            y_hist.clear();
            d = g.iter().map(|v| -v).collect();
            gd = dot(&g, &d);
            if !(gd < 0.0) {
                return LbfgsResult { x, value: fx, iterations, converged: true };
            }
        }

        // Backtrack until the Armijo condition holds.
        let mut t = 1.0;
        let mut f_t = f64::INFINITY;
        let mut moved = false;
        for _ in 0..60 {
            for i in 0..n {
                x_t[i] = x[i] + t * d[i];
            }
            f_t = f(&x_t, &mut g_t);
            if f_t.is_finite() && f_t <= fx + 1e-4 * t * gd {
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // Line search exhausted: a kink or the floating-point floor.
            return LbfgsResult { x, value: fx, iterations, converged: false };
        }

        // Greedy expansion: doubling the step while it keeps improving
        // restores scale after the curvature history collapses (a
        // backtracking-only search can never grow past t = 1).
        for _ in 0..40 {
            let t2 = 2.0 * t;
            for i in 0..n {
                x_p[i] = x[i] + t2 * d[i];
            }
            let f_p = f(&x_p, &mut g_p);
            if f_p.is_finite() && f_p < f_t && f_p <= fx + 1e-4 * t2 * gd {
                t = t2;
                f_t = f_p;
                std::mem::swap(&mut x_t, &mut x_p);
                std::mem::swap(&mut g_t, &mut g_p);
            } else {
                break;
            }
        }

        let s: Vec<f64> = (0..n).map(|i| x_t[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_t[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if s_hist.len() == opts.memory {
                s_hist.pop_front();
                y_hist.pop_front();
            }
            s_hist.push_back(s);
            y_hist.push_back(y);
        }
        x.copy_from_slice(&x_t);
        g.copy_from_slice(&g_t);
        fx = f_t;
    }
    LbfgsResult { x, value: fx, iterations, converged: false }
}

/// As [`minimize`] for objectives without an analytic gradient; the
/// gradient is formed by central differences.
pub fn minimize_fd<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut probe = vec![0.0; n];
    minimize(
        |x, g| {
            probe.copy_from_slice(x);
            for i in 0..n {
                let h = 1e-6 * (1.0 + x[i].abs());
                probe[i] = x[i] + h;
                let fp = f(&probe);
                probe[i] = x[i] - h;
                let fm = f(&probe);
                probe[i] = x[i];
                g[i] = (fp - fm) / (2.0 * h);
            }
            f(x)
        },
        x0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_rosenbrock() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let r = minimize(f, &[-1.2, 1.0], &LbfgsOptions::default());
        assert!(r.converged, "stalled after {} iterations at {}", r.iterations, r.value);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn solves_an_ill_conditioned_quadratic() {
        let scales = [1.0, 10.0, 100.0, 1e3, 1e4];
        let target = [3.0, -2.0, 0.5, 7.0, -1.0];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..5 {
                let d = x[i] - target[i];
                v += scales[i] * d * d;
                g[i] = 2.0 * scales[i] * d;
            }
            v
        };
        let r = minimize(f, &[0.0; 5], &LbfgsOptions::default());
        for i in 0..5 {
            assert!((r.x[i] - target[i]).abs() < 1e-5, "coordinate {i}: {}", r.x[i]);
        }
    }

    #[test]
    fn finite_difference_wrapper_matches_analytic() {
        let fa = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 4.0);
            g[1] = 6.0 * (x[1] + 2.0);
            (x[0] - 4.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2)
        };
        let fv = |x: &[f64]| (x[0] - 4.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let ra = minimize(fa, &[0.0, 0.0], &LbfgsOptions::default());
        let rf = minimize_fd(fv, &[0.0, 0.0], &LbfgsOptions::default());
        assert!((ra.x[0] - rf.x[0]).abs() < 1e-5);
        assert!((ra.x[1] - rf.x[1]).abs() < 1e-5);
    }
}
