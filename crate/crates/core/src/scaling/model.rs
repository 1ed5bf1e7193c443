use serde::{Deserialize, Serialize};

/// Five-parameter change-point model of a compute frontier:
///
/// ```text
/// plateau = m_plateau_boardsize * board + c_plateau
/// incline = m_incline_boardsize * board + m_incline_flops * log10(flops) + c_incline
/// elo     = incline.clamp(plateau, 0)
/// ```
///
/// The plateau line is where untrained play sits, the incline is the
/// shared learning slope, and zero is perfect play (when ratings are
/// anchored to the perfect agent).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePointParams {
    pub m_plateau_boardsize: f64,
    pub c_plateau: f64,
    pub m_incline_flops: f64,
    pub m_incline_boardsize: f64,
    pub c_incline: f64,
}

impl ChangePointParams {
    pub fn plateau(&self, board_size: u8) -> f64 {
        self.m_plateau_boardsize * f64::from(board_size) + self.c_plateau
    }

    pub fn incline(&self, board_size: u8, log10_flops: f64) -> f64 {
        self.m_incline_boardsize * f64::from(board_size)
            + self.m_incline_flops * log10_flops
            + self.c_incline
    }

    pub(crate) fn to_array(self) -> [f64; 5] {
        [
            self.m_plateau_boardsize,
            self.c_plateau,
            self.m_incline_flops,
            self.m_incline_boardsize,
            self.c_incline,
        ]
    }

    pub(crate) fn from_array(x: &[f64]) -> ChangePointParams {
        ChangePointParams {
            m_plateau_boardsize: x[0],
            c_plateau: x[1],
            m_incline_flops: x[2],
            m_incline_boardsize: x[3],
            c_incline: x[4],
        }
    }
}

/// Model Elo at a board size and log10 train compute. Written
/// max-then-min so it stays total even for candidate parameters that
/// briefly put the plateau above zero during fitting.
pub fn model_elo(p: &ChangePointParams, board_size: u8, log10_flops: f64) -> f64 {
    p.incline(board_size, log10_flops).max(p.plateau(board_size)).min(0.0)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smoothed model value and its gradient in parameter order
/// [m_plateau_boardsize, c_plateau, m_incline_flops,
/// m_incline_boardsize, c_incline]. `temp` is the softness of both
/// clamps in Elo; zero gives the exact model with subgradients at the
/// kinks.
pub(crate) fn soft_elo_and_grad(
    p: &ChangePointParams,
    board: f64,
    log10_flops: f64,
    temp: f64,
) -> (f64, [f64; 5]) {
    let plateau = p.m_plateau_boardsize * board + p.c_plateau;
    let incline = p.m_incline_boardsize * board + p.m_incline_flops * log10_flops + p.c_incline;

    // lower = smooth_max(incline, plateau); w_i = d lower / d incline.
    let (lower, w_i) = if temp > 0.0 {
        let m = incline.max(plateau);
        let v = m + temp * (-(incline - plateau).abs() / temp).exp().ln_1p();
        (v, sigmoid((incline - plateau) / temp))
    } else if incline >= plateau {
        (incline, 1.0)
    } else {
        (plateau, 0.0)
    };

    // elo = smooth_min(lower, 0); w_0 = d elo / d lower.
    let (elo, w_0) = if temp > 0.0 {
        let v = lower.min(0.0) - temp * (-lower.abs() / temp).exp().ln_1p();
        (v, sigmoid(-lower / temp))
    } else if lower <= 0.0 {
        (lower, 1.0)
    } else {
        (0.0, 0.0)
    };

    let gi = w_0 * w_i;
    let gp = w_0 * (1.0 - w_i);
    (elo, [gp * board, gp, gi * log10_flops, gi * board, gi])
}

/// Interpretable summaries of a fitted change-point model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Elo gained per order of magnitude of train compute on the incline.
    pub elo_per_oom: f64,
    /// Factor more compute needed for perfect play per board-size step.
    pub perfect_play_compute_multiplier: f64,
    /// Factor more compute needed to leave the plateau per board-size step.
    pub takeoff_compute_multiplier: f64,
    /// Elo between random and perfect play added per board-size step.
    pub random_perfect_gap_per_board: f64,
}

pub fn derive_quantities(p: &ChangePointParams) -> DerivedQuantities {
    assert!(p.m_incline_flops > 0.0, "incline must rise with compute");
    DerivedQuantities {
        elo_per_oom: p.m_incline_flops,
        perfect_play_compute_multiplier: 10f64.powf(-p.m_incline_boardsize / p.m_incline_flops),
        takeoff_compute_multiplier: 10f64
            .powf((p.m_plateau_boardsize - p.m_incline_boardsize) / p.m_incline_flops),
        random_perfect_gap_per_board: -p.m_plateau_boardsize,
    }
}

#[cfg(test)]
pub(crate) fn published_params() -> ChangePointParams {
    ChangePointParams {
        m_plateau_boardsize: -270.0,
        c_plateau: 570.0,
        m_incline_flops: 510.0,
        m_incline_boardsize: -430.0,
        c_incline: -4400.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_evaluations_on_published_params() {
        let p = published_params();
        // 9x9 at 1e17 flops: incline = 510*17 - 430*9 - 4400 = 400,
        // clamped to perfect play.
        assert_eq!(p.incline(9, 17.0), 400.0);
        assert_eq!(model_elo(&p, 9, 17.0), 0.0);
        // 9x9 floor sits at the plateau line.
        assert_eq!(p.plateau(9), -1860.0);
        assert_eq!(model_elo(&p, 9, 1.0), -1860.0);
        // Exactly at the zero crossing the clamp is inactive but tight.
        let crossing = -(p.m_incline_boardsize * 9.0 + p.c_incline) / p.m_incline_flops;
        assert!(model_elo(&p, 9, crossing).abs() < 1e-9);
    }

    #[test]
    fn derived_quantities_match_published_values() {
        let d = derive_quantities(&published_params());
        assert_eq!(d.elo_per_oom, 510.0);
        assert!((d.perfect_play_compute_multiplier - 6.97).abs() < 0.01);
        assert!((d.takeoff_compute_multiplier - 2.06).abs() < 0.01);
        assert_eq!(d.random_perfect_gap_per_board, 270.0);
    }

    #[test]
    fn multipliers_are_scale_free() {
        let p = published_params();
        let doubled = ChangePointParams {
            m_plateau_boardsize: 2.0 * p.m_plateau_boardsize,
            c_plateau: 2.0 * p.c_plateau,
            m_incline_flops: 2.0 * p.m_incline_flops,
            m_incline_boardsize: 2.0 * p.m_incline_boardsize,
            c_incline: 2.0 * p.c_incline,
        };
        let (a, b) = (derive_quantities(&p), derive_quantities(&doubled));
        assert!((a.perfect_play_compute_multiplier - b.perfect_play_compute_multiplier).abs() < 1e-12);
        assert!((a.takeoff_compute_multiplier - b.takeoff_compute_multiplier).abs() < 1e-12);
        assert_eq!(b.elo_per_oom, 2.0 * a.elo_per_oom);
    }

    #[test]
    fn multipliers_reproduce_crossing_spacing() {
        let p = published_params();
        let d = derive_quantities(&p);
        for b in 3..9u8 {
            let zero = |bb: u8| -(p.incline(bb, 0.0)) / p.m_incline_flops;
            let takeoff =
                |bb: u8| (p.plateau(bb) - p.incline(bb, 0.0)) / p.m_incline_flops;
            let dz = zero(b + 1) - zero(b);
            let dt = takeoff(b + 1) - takeoff(b);
            assert!((dz - d.perfect_play_compute_multiplier.log10()).abs() < 1e-12);
            assert!((dt - d.takeoff_compute_multiplier.log10()).abs() < 1e-12);
        }
    }

    #[test]
    fn model_is_monotone_for_sign_constrained_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let p = ChangePointParams {
                m_plateau_boardsize: -rng.random_range(1.0..500.0),
                c_plateau: rng.random_range(-500.0..1000.0),
                m_incline_flops: rng.random_range(1.0..1000.0),
                m_incline_boardsize: -rng.random_range(1.0..800.0),
                c_incline: rng.random_range(-8000.0..0.0),
            };
            for b in 3..9u8 {
                let mut prev = f64::NEG_INFINITY;
                for k in 0..40 {
                    let f = k as f64 * 0.5;
                    let e = model_elo(&p, b, f);
                    assert!(e >= prev - 1e-12, "not monotone in flops");
                    assert!(
                        model_elo(&p, b + 1, f) <= e + 1e-12,
                        "not monotone in board size"
                    );
                    prev = e;
                }
            }
        }
    }

    #[test]
    fn soft_model_converges_to_exact_and_grads_match_fd() {
        let p = published_params();
        for (b, f) in [(3u8, 10.0), (5, 12.5), (9, 16.0), (9, 18.0), (4, 5.0)] {
            let (exact, _) = soft_elo_and_grad(&p, f64::from(b), f, 0.0);
            assert_eq!(exact, model_elo(&p, b, f));
            let (soft, _) = soft_elo_and_grad(&p, f64::from(b), f, 1.0);
            assert!((soft - exact).abs() < 2.0, "temp=1 stays within ~2 Elo");

            // Finite differences on each parameter at temp=10.
            let (_, grad) = soft_elo_and_grad(&p, f64::from(b), f, 10.0);
            let mut arr = p.to_array();
            for i in 0..5 {
                let h = 1e-5 * (1.0 + arr[i].abs());
                arr[i] += h;
                let up = soft_elo_and_grad(&ChangePointParams::from_array(&arr), f64::from(b), f, 10.0).0;
                arr[i] -= 2.0 * h;
                let dn = soft_elo_and_grad(&ChangePointParams::from_array(&arr), f64::from(b), f, 10.0).0;
                arr[i] += h;
                let fd = (up - dn) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() < 1e-4 * (1.0 + fd.abs()),
                    "param {i}: fd {fd} vs analytic {}",
                    grad[i]
                );
            }
        }
    }
}
