use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ArenaError;

/// Probability that a player wins given an Elo advantage of `delta`,
/// on the base-10 / 400-point scale: 400 points mean 10:1 odds.
pub fn win_probability(delta_elo: f64) -> f64 {
    1.0 / (1.0 + (10.0f64).powf(-delta_elo / 400.0))
}

/// Elo points per natural-log-odds unit.
const ELO_PER_NAT: f64 = 400.0 / std::f64::consts::LN_10;

/// Pairwise win counts between named entities, with the black-side
/// breakdown retained so color fairness stays checkable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinMatrix {
    ids: Vec<String>,
    /// counts[i][j] = games i beat j, either color.
    counts: Vec<Vec<u64>>,
    /// black_wins[i][j] = games i beat j while i held black.
    black_wins: Vec<Vec<u64>>,
}

impl WinMatrix {
    pub fn new(ids: Vec<String>) -> Result<WinMatrix, ArenaError> {
        for (k, id) in ids.iter().enumerate() {
            if ids[..k].contains(id) {
                return Err(ArenaError::DuplicateId(id.clone()));
            }
        }
        let n = ids.len();
        WinMatrix::check_ids(&ids)?;
        Ok(WinMatrix {
            ids,
            counts: vec![vec![0; n]; n],
            black_wins: vec![vec![0; n]; n],
        })
    }

    fn check_ids(ids: &[String]) -> Result<(), ArenaError> {
        for id in ids {
            if id.is_empty()
                || !id.chars().all(|c| c.is_ascii_alphanumeric() || "._-@".contains(c))
            {
                return Err(ArenaError::BadId(id.clone()));
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Record one game: `winner_black` tells whether black won.
    pub fn record(&mut self, black: usize, white: usize, winner_black: bool) {
        assert!(black != white, "an entity cannot play itself in the matrix");
        if winner_black {
            self.counts[black][white] += 1;
            self.black_wins[black][white] += 1;
        } else {
            self.counts[white][black] += 1;
        }
    }

    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j]
    }

    pub fn wins_as_black(&self, i: usize, j: usize) -> u64 {
        self.black_wins[i][j]
    }

    pub fn games_between(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j] + self.counts[j][i]
    }

    pub fn total_games(&self) -> u64 {
        let mut t = 0;
        for row in &self.counts {
            for &c in row {
                t += c;
            }
        }
        t
    }

    /// Merge another matrix over the same entity set, summing counts;
    /// used by collectors combining per-worker results.
    pub fn merge(&mut self, other: &WinMatrix) -> Result<(), ArenaError> {
        if self.ids != other.ids {
            return Err(ArenaError::MatrixMismatch);
        }
        for i in 0..self.len() {
            for j in 0..self.len() {
                self.counts[i][j] += other.counts[i][j];
                self.black_wins[i][j] += other.black_wins[i][j];
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloEntry {
    pub id: String,
    /// None for entities with no win-graph path to the anchor.
    pub rating: Option<f64>,
    /// True when pseudo-counts were added to keep the MLE finite.
    pub regularized: bool,
}

/// Maximum-likelihood ratings with the anchor pinned to exactly zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloRating {
    pub anchor: String,
    pub entries: Vec<EloEntry>,
}

impl EloRating {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.id == id).and_then(|e| e.rating)
    }

    pub fn entry(&self, id: &str) -> Option<&EloEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Negative log-likelihood of ratings (Elo units) under Bradley-Terry.
pub fn neg_log_likelihood(m: &WinMatrix, ratings: &[f64]) -> f64 {
    assert_eq!(ratings.len(), m.len());
    let mut nll = 0.0;
    for i in 0..m.len() {
        for j in 0..m.len() {
            if m.counts[i][j] > 0 {
                nll -= m.counts[i][j] as f64 * win_probability(ratings[i] - ratings[j]).ln();
            }
        }
    }
    nll
}

/// Fit maximum-likelihood Elo ratings, anchor pinned to zero.
///
/// Undefeated or winless entities first receive +1 pseudo-count per
/// pairing (toward the missing side) and are flagged `regularized`.
/// Entities not connected to the anchor through played games are
/// reported unrated. The optimum is found by damped Newton on the
/// natural-parameter likelihood to a gradient norm below 1e-8.
pub fn fit_elos(m: &WinMatrix, anchor: &str) -> Result<EloRating, ArenaError> {
    fit_elos_from(m, anchor, None)
}

/// As `fit_elos` but starting from explicit initial ratings (Elo units);
/// exposed so gauge invariance is testable from arbitrary inits.
pub fn fit_elos_from(
    m: &WinMatrix,
    anchor: &str,
    init: Option<&[f64]>,
) -> Result<EloRating, ArenaError> {
    let n = m.len();
    let anchor_idx = m.index_of(anchor).ok_or_else(|| ArenaError::UnknownId(anchor.into()))?;
    if let Some(r0) = init {
        assert_eq!(r0.len(), n, "one initial rating per entity");
    }

    // Connected component of the anchor in the undirected game graph.
    let mut connected = vec![false; n];
    connected[anchor_idx] = true;
    let mut queue = VecDeque::from([anchor_idx]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !connected[j] && m.games_between(i, j) > 0 {
                connected[j] = true;
                queue.push_back(j);
            }
        }
    }

    // Pseudo-counts for one-sided records within the rated component.
    let mut counts = m.counts.clone();
    let mut regularized = vec![false; n];
    for e in 0..n {
        if !connected[e] {
            continue;
        }
        let wins: u64 = (0..n).map(|j| counts[e][j]).sum();
        let losses: u64 = (0..n).map(|j| counts[j][e]).sum();
        if m.games_between_any(e) == 0 {
            continue;
        }
        if losses == 0 {
            for j in 0..n {
                if j != e && m.games_between(e, j) > 0 {
                    counts[j][e] += 1;
                }
            }
            regularized[e] = true;
        } else if wins == 0 {
            for j in 0..n {
                if j != e && m.games_between(e, j) > 0 {
                    counts[e][j] += 1;
                }
            }
            regularized[e] = true;
        }
    }

    // Damped Newton in natural parameters theta = elo / ELO_PER_NAT,
    // anchor coordinate frozen at its initial value (gauge fix).
    let rated: Vec<usize> = (0..n).filter(|&i| connected[i]).collect();
    let free: Vec<usize> = rated.iter().copied().filter(|&i| i != anchor_idx).collect();
    let mut theta = vec![0.0f64; n];
    if let Some(r0) = init {
        for i in 0..n {
            theta[i] = r0[i] / ELO_PER_NAT;
        }
    }

    let nll_nat = |theta: &[f64]| -> f64 {
        let mut s = 0.0;
        for &i in &rated {
            for &j in &rated {
                if counts[i][j] > 0 {
                    let p = 1.0 / (1.0 + (-(theta[i] - theta[j])).exp());
                    s -= counts[i][j] as f64 * p.ln();
                }
            }
        }
        s
    };

    if !free.is_empty() {
        let k = free.len();
        let mut converged = false;
        for _ in 0..200 {
            let mut grad = DVector::<f64>::zeros(k);
            let mut hess = DMatrix::<f64>::zeros(k, k);
            let pos = {
                let mut pos = vec![usize::MAX; n];
                for (a, &i) in free.iter().enumerate() {
                    pos[i] = a;
                }
                pos
            };
            for &i in &rated {
                for &j in &rated {
                    let c = counts[i][j] as f64;
                    if c == 0.0 || i == j {
                        continue;
                    }
                    let p = 1.0 / (1.0 + (-(theta[i] - theta[j])).exp());
                    // d/d theta_i of -c ln sigma(theta_i - theta_j).
                    let g = -c * (1.0 - p);
                    let w = c * p * (1.0 - p);
                    if pos[i] != usize::MAX {
                        grad[pos[i]] += g;
                        hess[(pos[i], pos[i])] += w;
                    }
                    if pos[j] != usize::MAX {
                        grad[pos[j]] -= g;
                        hess[(pos[j], pos[j])] += w;
                    }
                    if pos[i] != usize::MAX && pos[j] != usize::MAX {
                        hess[(pos[i], pos[j])] -= w;
                        hess[(pos[j], pos[i])] -= w;
                    }
                }
            }
            if grad.norm() < 1e-8 {
                converged = true;
                break;
            }
            // Levenberg damping keeps the step defined even when the
            // reduced Hessian is near-singular (sparse schedules).
            let mut lambda = 0.0;
            let step = loop {
                let mut h = hess.clone();
                for d in 0..k {
                    h[(d, d)] += lambda;
                }
                match h.cholesky() {
                    Some(ch) => break ch.solve(&grad),
                    None => {
                        lambda = if lambda == 0.0 { 1e-9 } else { lambda * 10.0 };
                        assert!(lambda < 1e6, "Hessian irreparably singular");
                    }
                }
            };
            let base = nll_nat(&theta);
            let mut scale = 1.0;
            for _ in 0..60 {
                let mut cand = theta.clone();
                for (a, &i) in free.iter().enumerate() {
                    cand[i] -= scale * step[a];
                }
                if nll_nat(&cand) <= base {
                    theta = cand;
                    break;
                }
                scale *= 0.5;
            }
        }
        if !converged {
            // One final gradient check; Newton from a line-searched
            // path essentially always lands well below the threshold.
            return Err(ArenaError::NoConvergence);
        }
    }

    let shift = theta[anchor_idx];
    let entries = (0..n)
        .map(|i| EloEntry {
            id: m.ids[i].clone(),
            rating: if connected[i] { Some((theta[i] - shift) * ELO_PER_NAT) } else { None },
            regularized: regularized[i],
        })
        .collect();
    Ok(EloRating { anchor: anchor.to_string(), entries })
}

impl WinMatrix {
    fn games_between_any(&self, e: usize) -> u64 {
        (0..self.len()).map(|j| self.games_between(e, j)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(ids: &[&str]) -> WinMatrix {
        WinMatrix::new(ids.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn win_probability_reference_points() {
        assert_eq!(win_probability(0.0), 0.5);
        assert!((win_probability(400.0) - 10.0 / 11.0).abs() < 1e-12);
        // 2x compute at 500 Elo per OOM: delta = 500 log10(2) = 150.51,
        // exactly 2^(5/4) : 1 odds.
        let delta = 500.0 * (2.0f64).log10();
        let odds = (2.0f64).powf(1.25);
        assert!((win_probability(delta) - odds / (1.0 + odds)).abs() < 1e-12);
        assert!((win_probability(delta) - 0.70400).abs() < 5e-6);
        // Symmetry.
        for d in [-333.0, -1.5, 42.0, 1234.5] {
            assert!((win_probability(d) + win_probability(-d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn even_split_rates_both_at_zero() {
        let mut m = matrix(&["a", "b"]);
        for g in 0..1024 {
            let (black, white) = if g % 2 == 0 { (0, 1) } else { (1, 0) };
            // Alternate winners so each beats the other 512 times.
            m.record(black, white, g % 4 < 2);
        }
        assert_eq!(m.wins(0, 1), 512);
        assert_eq!(m.wins(1, 0), 512);
        let elos = fit_elos(&m, "a").unwrap();
        assert_eq!(elos.get("a"), Some(0.0));
        assert!(elos.get("b").unwrap().abs() < 0.1);
    }

    #[test]
    fn lopsided_split_matches_the_closed_form() {
        let mut m = matrix(&["a", "b"]);
        for _ in 0..768 {
            m.record(0, 1, true);
        }
        for _ in 0..256 {
            m.record(0, 1, false);
        }
        let elos = fit_elos(&m, "b").unwrap();
        let expect = 400.0 * (3.0f64).log10();
        assert!(
            (elos.get("a").unwrap() - expect).abs() < 0.1,
            "got {:?}, want {expect}",
            elos.get("a")
        );
        // Prediction consistency: fitted delta reproduces the win rate.
        let delta = elos.get("a").unwrap() - elos.get("b").unwrap();
        assert!((win_probability(delta) - 0.75).abs() < 1e-6);
    }

    #[test]
    fn synthetic_league_recovers_true_ratings() {
        let truth: Vec<f64> = (0..8).map(|i| 100.0 * i as f64).collect();
        let ids: Vec<String> = (0..8).map(|i| format!("agent{i}")).collect();
        let mut m = WinMatrix::new(ids).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..8 {
            for j in (i + 1)..8 {
                let p_i = win_probability(truth[i] - truth[j]);
                for g in 0..10_000 {
                    let i_black = g % 2 == 0;
                    let i_wins = rng.random::<f64>() < p_i;
                    let (b, w) = if i_black { (i, j) } else { (j, i) };
                    m.record(b, w, i_wins == i_black);
                }
            }
        }
        let elos = fit_elos(&m, "agent0").unwrap();
        for i in 0..8 {
            let r = elos.get(&format!("agent{i}")).unwrap();
            assert!(
                (r - truth[i]).abs() < 10.0,
                "agent{i}: fitted {r:.2} vs true {}",
                truth[i]
            );
        }
    }

    #[test]
    fn gauge_is_fixed_by_the_anchor() {
        let mut m = matrix(&["a", "b", "c"]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..3usize {
            for j in (i + 1)..3 {
                for g in 0..200 {
                    let p = win_probability(60.0 * (j as f64 - i as f64));
                    m.record(i, j, (g % 2 == 0) ^ (rng.random::<f64>() < p));
                }
            }
        }
        let from_zero = fit_elos(&m, "b").unwrap();
        let init: Vec<f64> = (0..3).map(|_| rng.random_range(-500.0..500.0)).collect();
        let from_random = fit_elos_from(&m, "b", Some(&init)).unwrap();
        for id in ["a", "b", "c"] {
            assert!(
                (from_zero.get(id).unwrap() - from_random.get(id).unwrap()).abs() < 0.1,
                "init changed the optimum for {id}"
            );
        }
        // The likelihood never prefers the zero vector to the fit.
        let fitted: Vec<f64> =
            (0..3).map(|i| from_zero.get(&m.ids()[i]).unwrap()).collect();
        assert!(neg_log_likelihood(&m, &fitted) <= neg_log_likelihood(&m, &[0.0; 3]));
    }

    #[test]
    fn one_sided_records_are_regularized_not_infinite() {
        let mut m = matrix(&["champ", "mid", "bottom"]);
        for _ in 0..32 {
            m.record(0, 1, true); // champ beats mid, never loses
            m.record(1, 2, true); // mid beats bottom, bottom winless
        }
        for _ in 0..8 {
            m.record(2, 1, true);
        }
        let elos = fit_elos(&m, "mid").unwrap();
        let champ = elos.entry("champ").unwrap();
        assert!(champ.regularized);
        assert!(champ.rating.unwrap().is_finite());
        assert!(champ.rating.unwrap() > 300.0, "undefeated stays clearly on top");
        assert!(!elos.entry("mid").unwrap().regularized);
    }

    #[test]
    fn disconnected_entities_are_unrated() {
        let mut m = matrix(&["a", "b", "x", "y"]);
        for _ in 0..16 {
            m.record(0, 1, true);
            m.record(1, 0, true);
            m.record(2, 3, true);
            m.record(3, 2, true);
        }
        let elos = fit_elos(&m, "a").unwrap();
        assert!(elos.get("a").is_some() && elos.get("b").is_some());
        assert_eq!(elos.get("x"), None);
        assert_eq!(elos.get("y"), None);
        assert!(fit_elos(&m, "nobody").is_err());
    }

    #[test]
    fn merge_sums_counts_and_checks_ids() {
        let mut a = matrix(&["p", "q"]);
        let mut b = matrix(&["p", "q"]);
        a.record(0, 1, true);
        b.record(1, 0, false);
        b.record(0, 1, false);
        a.merge(&b).unwrap();
        assert_eq!(a.wins(0, 1), 2);
        assert_eq!(a.wins(1, 0), 1);
        assert_eq!(a.wins_as_black(0, 1), 1);
        let c = matrix(&["p", "r"]);
        assert!(a.merge(&c).is_err());
    }

    #[test]
    fn matrix_rejects_bad_and_duplicate_ids() {
        assert!(WinMatrix::new(vec!["ok".into(), "ok".into()]).is_err());
        assert!(WinMatrix::new(vec!["with space".into()]).is_err());
        assert!(WinMatrix::new(vec!["".into()]).is_err());
        assert!(WinMatrix::new(vec!["r1.s3@n64".into(), "solver".into()]).is_ok());
    }
}
