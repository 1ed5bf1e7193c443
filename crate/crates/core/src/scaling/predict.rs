use serde::{Deserialize, Serialize};

use super::fit::fit_changepoint;
use super::frontier::FrontierPoint;
use super::model::model_elo;
use super::ScalingError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveError {
    /// Mean squared residual on the held-out board, in Elo^2.
    pub residual_variance: f64,
    /// 1 - residual_variance / variance of the held-out elos.
    pub r_squared: f64,
    pub n_eval_points: usize,
}

/// Fit the change-point model on `fit_boards` only and score its
/// predictions on `eval_board`'s frontier points.
pub fn predictive_error(
    points: &[FrontierPoint],
    fit_boards: &[u8],
    eval_board: u8,
) -> Result<PredictiveError, ScalingError> {
    if fit_boards.is_empty() {
        return Err(ScalingError::Config("fit_boards must be non-empty".into()));
    }
    if fit_boards.contains(&eval_board) {
        return Err(ScalingError::Config(format!(
            "eval board {eval_board} cannot be in the fit set"
        )));
    }
    let fit_pts: Vec<FrontierPoint> = points
        .iter()
        .filter(|p| fit_boards.contains(&p.board_size))
        .cloned()
        .collect();
    let eval_pts: Vec<&FrontierPoint> =
        points.iter().filter(|p| p.board_size == eval_board).collect();
    if eval_pts.is_empty() {
        return Err(ScalingError::Degenerate(format!(
            "no frontier points for eval board {eval_board}"
        )));
    }

    let fit = fit_changepoint(&fit_pts)?;
    let n = eval_pts.len() as f64;
    let rv = eval_pts
        .iter()
        .map(|p| (model_elo(&fit.params, p.board_size, p.log10_train_flops) - p.elo).powi(2))
        .sum::<f64>()
        / n;
    let mean = eval_pts.iter().map(|p| p.elo).sum::<f64>() / n;
    let var = eval_pts.iter().map(|p| (p.elo - mean).powi(2)).sum::<f64>() / n;
    Ok(PredictiveError {
        residual_variance: rv,
        r_squared: 1.0 - rv / var.max(1e-12),
        n_eval_points: eval_pts.len(),
    })
}
