use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frontier::FrontierPoint;
use super::lbfgs::{minimize, LbfgsOptions};
use super::model::{model_elo, soft_elo_and_grad, ChangePointParams};
use super::ScalingError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePointFit {
    pub params: ChangePointParams,
    /// Mean squared residual of the exact-clamp model, in Elo^2.
    pub mse: f64,
    /// False when too few points land strictly on the incline (or the
    /// fitted slope is not positive), leaving the slope unconstrained.
    pub incline_identifiable: bool,
    /// False for single-board data, where the board slopes and
    /// intercepts are confounded and extrapolation is unreliable.
    pub board_identifiable: bool,
}

/// Mean squared error of the exact model over a point set.
pub fn changepoint_mse(p: &ChangePointParams, points: &[FrontierPoint]) -> f64 {
    let n = points.len() as f64;
    points
        .iter()
        .map(|pt| (model_elo(p, pt.board_size, pt.log10_train_flops) - pt.elo).powi(2))
        .sum::<f64>()
        / n
}

fn loss_and_grad(x: &[f64], points: &[FrontierPoint], temp: f64, g: &mut [f64]) -> f64 {
    let p = ChangePointParams::from_array(x);
    let n = points.len() as f64;
    g.fill(0.0);
    let mut s = 0.0;
    for pt in points {
        let (e, de) =
            soft_elo_and_grad(&p, f64::from(pt.board_size), pt.log10_train_flops, temp);
        let r = e - pt.elo;
        s += r * r / n;
        for (gi, di) in g.iter_mut().zip(de) {
            *gi += 2.0 * r * di / n;
        }
    }
    s
}

/// Least-squares line fit; None without two distinct abscissae.
pub(crate) fn ols(pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-12 * (1.0 + mx * mx) {
        return None;
    }
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn group_by_board(points: &[FrontierPoint]) -> BTreeMap<u8, Vec<(f64, f64)>> {
    let mut by: BTreeMap<u8, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        by.entry(p.board_size).or_default().push((p.log10_train_flops, p.elo));
    }
    by
}

/// Data-driven starting point: plateau line through per-board minima,
/// incline slope from the middle band of each board's range, incline
/// offsets through the band means.
fn informed_guess(points: &[FrontierPoint]) -> ChangePointParams {
    let by = group_by_board(points);
    let global_min = points.iter().map(|p| p.elo).fold(f64::INFINITY, f64::min);

    let bottoms: Vec<(f64, f64)> = by
        .iter()
        .map(|(b, v)| (f64::from(*b), v.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)))
        .collect();
    let (m_pb, c_p) = ols(&bottoms).unwrap_or((0.0, global_min));

    let band_of = |v: &[(f64, f64)]| -> Vec<(f64, f64)> {
        let lo = v.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = v.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if span <= 1.0 {
            return Vec::new();
        }
        v.iter()
            .copied()
            .filter(|p| p.1 > lo + 0.25 * span && p.1 < lo + 0.75 * span)
            .collect()
    };

    let mut slopes: Vec<f64> = by
        .values()
        .filter_map(|v| ols(&band_of(v)).map(|(s, _)| s))
        .filter(|s| *s > 0.0)
        .collect();
    slopes.sort_by(f64::total_cmp);
    let m_if = if slopes.is_empty() { 300.0 } else { slopes[slopes.len() / 2] };

    // Anchor the incline through each banded board's mean point.
    let mut mids: Vec<(f64, f64)> = Vec::new();
    for (b, v) in &by {
        let band = band_of(v);
        if band.is_empty() {
            continue;
        }
        let n = band.len() as f64;
        let mf = band.iter().map(|p| p.0).sum::<f64>() / n;
        let me = band.iter().map(|p| p.1).sum::<f64>() / n;
        mids.push((f64::from(*b), me - m_if * mf));
    }
    if mids.is_empty() {
        for (b, v) in &by {
            let n = v.len() as f64;
            let mf = v.iter().map(|p| p.0).sum::<f64>() / n;
            let me = v.iter().map(|p| p.1).sum::<f64>() / n;
            mids.push((f64::from(*b), me - m_if * mf));
        }
    }
    let (m_ib, c_i) = ols(&mids).unwrap_or((0.0, mids.first().map_or(0.0, |m| m.1)));

    ChangePointParams {
        m_plateau_boardsize: m_pb,
        c_plateau: c_p,
        m_incline_flops: m_if,
        m_incline_boardsize: m_ib,
        c_incline: c_i,
    }
}

pub(crate) fn multi_start_inits(points: &[FrontierPoint]) -> Vec<ChangePointParams> {
    let g = informed_guess(points);
    let lo = points.iter().map(|p| p.elo).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.elo).fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e5);
    let mut out = vec![g];
    while out.len() < 16 {
        let mut stretch = |v: f64| v * rng.random_range(-0.7..0.7f64).exp();
        let m_pb = stretch(g.m_plateau_boardsize);
        let m_if = stretch(g.m_incline_flops);
        let m_ib = stretch(g.m_incline_boardsize);
        out.push(ChangePointParams {
            m_plateau_boardsize: m_pb - rng.random_range(0.0..60.0),
            c_plateau: g.c_plateau + rng.random_range(-0.4..0.4) * span,
            m_incline_flops: m_if,
            m_incline_boardsize: m_ib - rng.random_range(0.0..80.0),
            c_incline: g.c_incline + rng.random_range(-0.4..0.4) * span,
        });
    }
    out
}

/// Fit the five-parameter change-point model by annealed multi-start
/// L-BFGS: each start descends the soft-clamp objective at temperatures
/// 100, 10, 1 Elo and is then polished on the exact clamp; the best
/// exact-clamp MSE wins.
///
/// Single-board data is accepted so frontier predictions can be studied
/// as boards accumulate, but is flagged via `board_identifiable`.
pub fn fit_changepoint(points: &[FrontierPoint]) -> Result<ChangePointFit, ScalingError> {
    if points.len() < 5 {
        return Err(ScalingError::Degenerate(format!(
            "need at least 5 points for a five-parameter fit, got {}",
            points.len()
        )));
    }
    let mut logfs: Vec<f64> = points.iter().map(|p| p.log10_train_flops).collect();
    logfs.sort_by(f64::total_cmp);
    logfs.dedup();
    if logfs.len() < 2 {
        return Err(ScalingError::Degenerate(
            "all points share a single compute value".into(),
        ));
    }

    let stage = LbfgsOptions { max_iters: 300, ..LbfgsOptions::default() };
    let polish = LbfgsOptions { max_iters: 600, grad_tol: 1e-11, ..LbfgsOptions::default() };
    let mut best: Option<(f64, ChangePointParams)> = None;
    for init in multi_start_inits(points) {
        let mut x = init.to_array().to_vec();
        for temp in [100.0, 10.0, 1.0] {
            x = minimize(|x, g| loss_and_grad(x, points, temp, g), &x, &stage).x;
        }
        let r = minimize(|x, g| loss_and_grad(x, points, 0.0, g), &x, &polish);
        let p = ChangePointParams::from_array(&r.x);
        let mse = changepoint_mse(&p, points);
        if best.as_ref().map_or(true, |(m, _)| mse < *m) {
            best = Some((mse, p));
        }
    }
    let (mse, params) = best.expect("at least one start");

    let mut incline_logfs: Vec<f64> = points
        .iter()
        .filter(|pt| {
            let inc = params.incline(pt.board_size, pt.log10_train_flops);
            params.plateau(pt.board_size) < inc && inc < 0.0
        })
        .map(|pt| pt.log10_train_flops)
        .collect();
    incline_logfs.sort_by(f64::total_cmp);
    incline_logfs.dedup();
    let boards = group_by_board(points).len();

    Ok(ChangePointFit {
        params,
        mse,
        incline_identifiable: incline_logfs.len() >= 2 && params.m_incline_flops > 0.0,
        board_identifiable: boards >= 2,
    })
}

/// Per-board OLS slope of observed elo against log-compute, restricted
/// to the central 80% of each board's incline regime under the given
/// fit. None when fewer than two points fall in the window.
pub fn per_board_incline_slopes(
    points: &[FrontierPoint],
    p: &ChangePointParams,
) -> Vec<(u8, Option<f64>)> {
    group_by_board(points)
        .into_iter()
        .map(|(b, v)| {
            let plateau = p.plateau(b).min(0.0);
            let lo = 0.9 * plateau;
            let hi = 0.1 * plateau;
            let band: Vec<(f64, f64)> = v
                .into_iter()
                .filter(|(logf, _)| {
                    let inc = p.incline(b, *logf);
                    lo < inc && inc < hi
                })
                .collect();
            (b, ols(&band).map(|(s, _)| s))
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn synthetic_frontier(
    p: &ChangePointParams,
    boards: std::ops::RangeInclusive<u8>,
    levels: usize,
    sigma: f64,
    seed: u64,
) -> Vec<FrontierPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for b in boards {
        let takeoff = (p.plateau(b) - p.incline(b, 0.0)) / p.m_incline_flops;
        let zero = -p.incline(b, 0.0) / p.m_incline_flops;
        for k in 0..levels {
            let t = k as f64 / (levels - 1) as f64;
            let logf = (takeoff - 2.0) * (1.0 - t) + (zero + 2.0) * t;
            let noise = if sigma > 0.0 {
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            } else {
                0.0
            };
            out.push(FrontierPoint {
                board_size: b,
                log10_train_flops: logf,
                elo: model_elo(p, b, logf) + noise,
            });
        }
    }
    out
}
