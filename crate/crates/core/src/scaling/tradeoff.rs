use serde::{Deserialize, Serialize};

use super::fit::ols;
use super::ScalingError;
use crate::arena::{fit_elos, run_league, Agent, MatchConfig, MatchSink};
use crate::nnet::{flops_per_forward, Params};
use crate::rng;

/// A snapshot entering the trade-off study: its training cost and its
/// weights, which get re-evaluated at every test-time node budget.
#[derive(Clone, Debug)]
pub struct TradeoffSnapshot {
    pub id: String,
    pub train_flops: u64,
    pub params: Params<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub id: String,
    pub log10_train_flops: f64,
    /// log10 of (test nodes x flops per forward); environment rules are
    /// not counted.
    pub log10_test_flops: f64,
    pub elo: f64,
}

/// One iso-Elo level: the lower-left Pareto frontier of
/// (log10 train flops, log10 test flops) pairs reaching that Elo, with
/// the fitted line's slope when the frontier has spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoEloLine {
    pub elo: f64,
    pub frontier: Vec<(f64, f64)>,
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffAnalysis {
    pub points: Vec<TradeoffPoint>,
    pub iso_lines: Vec<IsoEloLine>,
    /// Median of the defined iso-Elo slopes; None when every level is
    /// degenerate.
    pub slope: Option<f64>,
}

/// Anchor id used in every per-node-count league. Random play needs no
/// search, so its strength is the same at every node budget, which is
/// what makes Elo comparable across the grid.
const ANCHOR: &str = "random";

pub(crate) fn frontierize_per_snapshot(points: &mut [TradeoffPoint]) {
    points.sort_by(|a, b| {
        a.id.cmp(&b.id).then(a.log10_test_flops.total_cmp(&b.log10_test_flops))
    });
    let mut k = 0;
    while k < points.len() {
        let mut best = f64::NEG_INFINITY;
        let id = points[k].id.clone();
        while k < points.len() && points[k].id == id {
            best = best.max(points[k].elo);
            points[k].elo = best;
            k += 1;
        }
    }
}

/// Pareto lower-left frontiers at evenly spaced interior levels of the
/// observed Elo range (deciles for `levels` = 9), each with an OLS
/// slope of log-test on log-train compute.
pub fn iso_elo_slopes(points: &[TradeoffPoint], levels: usize) -> Vec<IsoEloLine> {
    if points.is_empty() || levels == 0 {
        return Vec::new();
    }
    let lo = points.iter().map(|p| p.elo).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.elo).fold(f64::NEG_INFINITY, f64::max);
    let n_levels = if hi - lo < 1e-9 { 1 } else { levels };
    let mut out = Vec::new();
    for k in 1..=n_levels {
        let level = lo + (hi - lo) * k as f64 / (n_levels + 1) as f64;
        let mut reach: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.elo >= level)
            .map(|p| (p.log10_train_flops, p.log10_test_flops))
            .collect();
        reach.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut frontier: Vec<(f64, f64)> = Vec::new();
        let mut best = f64::INFINITY;
        for (tr, te) in reach {
            if te < best {
                frontier.push((tr, te));
                best = te;
            }
        }
        let slope = ols(&frontier).map(|(s, _)| s);
        out.push(IsoEloLine { elo: level, frontier, slope });
    }
    out
}

fn median_slope(lines: &[IsoEloLine]) -> Option<f64> {
    let mut slopes: Vec<f64> = lines.iter().filter_map(|l| l.slope).collect();
    if slopes.is_empty() {
        return None;
    }
    slopes.sort_by(f64::total_cmp);
    Some(slopes[slopes.len() / 2])
}

/// Re-evaluate every snapshot at every node budget in `node_grid` by
/// running one league per budget (snapshots plus a random anchor at
/// zero), then frontierize per snapshot and extract iso-Elo trade-off
/// slopes.
pub fn tradeoff_analysis(
    snaps: &[TradeoffSnapshot],
    node_grid: &[u32],
    cfg: &MatchConfig,
    games_per_pair: usize,
    seed: u64,
    sink: &mut dyn MatchSink,
) -> Result<TradeoffAnalysis, ScalingError> {
    if snaps.is_empty() {
        return Err(ScalingError::Config("no snapshots to evaluate".into()));
    }
    if snaps.iter().any(|s| s.id == ANCHOR) {
        return Err(ScalingError::Config(format!("snapshot id {ANCHOR:?} is reserved")));
    }
    let mut grid = node_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || grid[0] == 0 {
        return Err(ScalingError::Config("node grid must be positive".into()));
    }

    let mut points = Vec::new();
    for (gi, &nodes) in grid.iter().enumerate() {
        let league_cfg = MatchConfig { nodes, ..*cfg };
        let mut agents: Vec<Agent> = snaps
            .iter()
            .map(|s| Agent::net(&s.id, s.params.clone()))
            .collect();
        agents.push(Agent::random(ANCHOR));
        let m = run_league(
            &mut agents,
            games_per_pair,
            &league_cfg,
            rng::split_seed(seed, gi as u64),
            sink,
        )?;
        let elos = fit_elos(&m, ANCHOR)?;
        for s in snaps {
            if let Some(elo) = elos.get(&s.id) {
                let test = u64::from(nodes) * flops_per_forward(s.params.cfg());
                points.push(TradeoffPoint {
                    id: s.id.clone(),
                    log10_train_flops: (s.train_flops.max(1) as f64).log10(),
                    log10_test_flops: (test.max(1) as f64).log10(),
                    elo,
                });
            }
        }
    }
    frontierize_per_snapshot(&mut points);
    let iso_lines = iso_elo_slopes(&points, 9);
    let slope = median_slope(&iso_lines);
    Ok(TradeoffAnalysis { points, iso_lines, slope })
}
