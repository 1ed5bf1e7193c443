use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A snapshot joined with its rating; the input to frontier extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatedSnapshot {
    pub board_size: u8,
    pub train_flops: u64,
    pub elo: f64,
}

/// One point of a compute-performance frontier. Within a board size the
/// construction guarantees elo is non-decreasing in compute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub board_size: u8,
    pub log10_train_flops: f64,
    pub elo: f64,
}

/// Best rating achieved at each compute level, per board: sort by
/// compute and take the running max of elo, one point per distinct
/// compute value. Output is ordered by board size, then compute.
pub fn extract_frontier(snaps: &[RatedSnapshot]) -> Vec<FrontierPoint> {
    let mut by_board: BTreeMap<u8, Vec<(u64, f64)>> = BTreeMap::new();
    for s in snaps {
        by_board.entry(s.board_size).or_default().push((s.train_flops, s.elo));
    }
    let mut out: Vec<FrontierPoint> = Vec::new();
    for (board, mut pts) in by_board {
        pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut best = f64::NEG_INFINITY;
        let mut last_flops = None;
        for (flops, elo) in pts {
            best = best.max(elo);
            if last_flops == Some(flops) {
                out.last_mut().expect("point emitted for this compute value").elo = best;
            } else {
                out.push(FrontierPoint {
                    board_size: board,
                    log10_train_flops: (flops.max(1) as f64).log10(),
                    elo: best,
                });
                last_flops = Some(flops);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(board_size: u8, train_flops: u64, elo: f64) -> RatedSnapshot {
        RatedSnapshot { board_size, train_flops, elo }
    }

    #[test]
    fn single_snapshot_gives_single_point() {
        let f = extract_frontier(&[snap(5, 1000, -420.0)]);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].board_size, 5);
        assert_eq!(f[0].log10_train_flops, 3.0);
        assert_eq!(f[0].elo, -420.0);
    }

    #[test]
    fn running_max_smooths_dips() {
        let snaps: Vec<RatedSnapshot> = [(-900.0, 10), (-800.0, 100), (-850.0, 1000), (-100.0, 10_000)]
            .into_iter()
            .map(|(e, fl)| snap(4, fl, e))
            .collect();
        let f = extract_frontier(&snaps);
        let elos: Vec<f64> = f.iter().map(|p| p.elo).collect();
        assert_eq!(elos, vec![-900.0, -800.0, -800.0, -100.0]);
    }

    #[test]
    fn order_insensitive_and_grouped_by_board() {
        let mut snaps = vec![
            snap(4, 100, -500.0),
            snap(3, 10, -200.0),
            snap(4, 10, -700.0),
            snap(3, 100, -50.0),
        ];
        let a = extract_frontier(&snaps);
        snaps.reverse();
        let b = extract_frontier(&snaps);
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|p| p.board_size).collect::<Vec<_>>(), vec![3, 3, 4, 4]);
        for w in a.windows(2) {
            if w[0].board_size == w[1].board_size {
                assert!(w[1].elo >= w[0].elo);
                assert!(w[1].log10_train_flops > w[0].log10_train_flops);
            }
        }
    }

    #[test]
    fn equal_compute_values_collapse_to_their_best() {
        let f = extract_frontier(&[snap(3, 50, -300.0), snap(3, 50, -100.0), snap(3, 50, -200.0)]);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].elo, -100.0);
    }
}
