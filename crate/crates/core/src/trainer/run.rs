use rand::{Rng, RngCore};

use super::buffer::{ReplayBuffer, Sample};
use super::meter::ComputeMeter;
use super::schedule::snapshot_schedule;
use super::{TrainConfig, TrainError};
use crate::hex::{BatchEnv, Player};
use crate::mcts::{sample_move, search_batch};
use crate::nnet::{
    count_params, flops_per_forward, loss_and_grad, Adam, NetConfig, Params, SnapshotHeader,
    SNAPSHOT_SCHEMA,
};
use crate::rng;

/// Seed-stream tags; changing these changes every run.
const TAG_PARAMS: u64 = 1;
const TAG_ENV: u64 = 2;
const TAG_LEARNER: u64 = 3;

/// One recorded ply of a self-play game.
#[derive(Clone, Debug)]
pub struct Ply {
    pub obs: Vec<f32>,
    /// Root policy of the search that chose the move, dense over cells.
    pub policy: Vec<f32>,
    pub mover: Player,
}

/// Convert a finished game into training samples: one per ply, value
/// target +1 where the ply's mover went on to win, else -1.
pub fn game_to_samples(plies: &[Ply], winner: Player) -> Vec<Sample> {
    plies
        .iter()
        .map(|ply| Sample {
            obs: ply.obs.clone(),
            policy: ply.policy.clone(),
            value: if ply.mover == winner { 1.0 } else { -1.0 },
        })
        .collect()
}

/// Per-step training metrics. Loss fields are `None` until the buffer
/// first holds a full batch and the learner engages.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsRecord {
    pub env_step: u64,
    pub games: u64,
    pub loss_total: Option<f64>,
    pub loss_policy: Option<f64>,
    pub loss_value: Option<f64>,
    pub buffer_len: u64,
    pub selfplay_forwards: u64,
    pub learner_samples: u64,
    pub train_flops: u64,
}

/// Consumer of training output. Implementations persist metrics and
/// snapshots; errors propagate and abort the run.
pub trait RunSink {
    fn on_metrics(&mut self, rec: &MetricsRecord) -> std::io::Result<()>;
    fn on_snapshot(&mut self, header: &SnapshotHeader, params: &Params<f32>)
        -> std::io::Result<()>;
}

/// Discards everything; for tests and throwaway runs.
pub struct NullSink;

impl RunSink for NullSink {
    fn on_metrics(&mut self, _rec: &MetricsRecord) -> std::io::Result<()> {
        Ok(())
    }
    fn on_snapshot(
        &mut self,
        _header: &SnapshotHeader,
        _params: &Params<f32>,
    ) -> std::io::Result<()> {
        Ok(())
    }
}

pub struct TrainReport {
    pub run_id: String,
    pub net: NetConfig,
    /// Captured snapshots in schedule order, strictly increasing in
    /// train_flops.
    pub snapshots: Vec<(SnapshotHeader, Params<f32>)>,
    pub env_steps: u64,
    pub games: u64,
    pub selfplay_forwards: u64,
    pub learner_samples: u64,
    pub train_flops: u64,
    pub final_loss: Option<(f64, f64, f64)>,
}

fn capture_snapshot(
    sink: &mut dyn RunSink,
    snapshots: &mut Vec<(SnapshotHeader, Params<f32>)>,
    run_id: &str,
    index: u32,
    seed: u64,
    env_steps: u64,
    games: u64,
    meter: &ComputeMeter,
    params: &Params<f32>,
) -> Result<(), TrainError> {
    let header = SnapshotHeader {
        schema: SNAPSHOT_SCHEMA,
        run_id: run_id.to_string(),
        index,
        net: *params.cfg(),
        seed,
        env_steps,
        games,
        selfplay_forwards: meter.selfplay_forwards(),
        learner_samples: meter.learner_samples(),
        train_flops: meter.train_flops(),
        parameter_count: count_params(params.cfg()),
    };
    sink.on_snapshot(&header, params)?;
    snapshots.push((header, params.clone()));
    Ok(())
}

/// Run the full self-play training loop.
///
/// Each environment step: every slot searches its position, a move is
/// sampled from the root policy, the batch environment advances, and
/// finished games become replay samples. One learner step follows per
/// environment step once the buffer holds a batch. Snapshots are taken
/// as `train_flops` crosses schedule thresholds; the run stops at
/// `flop_limit` or `sample_limit`, whichever comes first, capturing a
/// final snapshot if compute advanced past the last captured one.
///
/// Fully deterministic for a given config: per-slot RNG streams and
/// batch-ordered reductions make the result independent of worker count.
pub fn run_training(
    cfg: &TrainConfig,
    run_id: &str,
    sink: &mut dyn RunSink,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let net_cfg = NetConfig::new(cfg.board_size, cfg.width, cfg.depth)?;

    let mut params: Params<f32> =
        Params::init(net_cfg, &mut rng::stream(cfg.seed, TAG_PARAMS));
    let mut adam = Adam::new(&params, cfg.adam);
    let mut env = BatchEnv::new(cfg.board_size, cfg.n_envs, rng::split_seed(cfg.seed, TAG_ENV))?;
    let mut learner_rng = rng::stream(cfg.seed, TAG_LEARNER);
    let mut buffer = ReplayBuffer::new(cfg.buffer_steps * cfg.n_envs);
    let mut meter = ComputeMeter::new(flops_per_forward(&net_cfg));
    let thresholds = snapshot_schedule(cfg.flop_limit, cfg.snapshots);

    let mut traces: Vec<Vec<Ply>> = vec![Vec::new(); cfg.n_envs];
    let mut snapshots = Vec::new();
    let mut next_threshold = 0usize;
    let mut env_steps = 0u64;
    let mut games = 0u64;
    let mut latest_loss: Option<(f64, f64, f64)> = None;

    loop {
        env_steps += 1;

        // Self-play step: search every slot, then commit sampled moves.
        let mut moves = Vec::with_capacity(cfg.n_envs);
        {
            let (boards, rngs) = env.slots();
            let seeds: Vec<u64> = rngs.iter_mut().map(|r| r.next_u64()).collect();
            let results = search_batch(boards, &params, &cfg.search, &seeds)?;
            for ((board, rng), res) in boards.iter().zip(rngs.iter_mut()).zip(&results) {
                let u: f64 = rng.random();
                moves.push(sample_move(board, &res.policy, u));
            }
            for (i, (board, res)) in boards.iter().zip(&results).enumerate() {
                traces[i].push(Ply {
                    obs: board.observation(),
                    policy: res.policy.iter().map(|&p| p as f32).collect(),
                    mover: board.to_move(),
                });
                meter.add_selfplay_forwards(u64::from(res.nodes_expanded));
            }
        }
        let outcomes = env.batch_step(&moves)?;
        for (i, outcome) in outcomes.iter().enumerate() {
            if let Some(o) = outcome {
                games += 1;
                debug_assert_eq!(traces[i].len(), o.plies as usize);
                for sample in game_to_samples(&traces[i], o.winner) {
                    buffer.push(sample);
                }
                traces[i].clear();
            }
        }

        // Learner step, once warm.
        if buffer.len() >= cfg.batch_size {
            let batch = buffer.sample_batch::<f32>(&net_cfg, cfg.batch_size, &mut learner_rng);
            let (parts, grads) = loss_and_grad(&params, &batch, cfg.loss_weights)?;
            adam.step(&mut params, &grads, cfg.lr);
            meter.add_learner_samples(cfg.batch_size as u64);
            latest_loss =
                Some((parts.total as f64, parts.policy as f64, parts.value as f64));
        }

        sink.on_metrics(&MetricsRecord {
            env_step: env_steps,
            games,
            loss_total: latest_loss.map(|l| l.0),
            loss_policy: latest_loss.map(|l| l.1),
            loss_value: latest_loss.map(|l| l.2),
            buffer_len: buffer.len() as u64,
            selfplay_forwards: meter.selfplay_forwards(),
            learner_samples: meter.learner_samples(),
            train_flops: meter.train_flops(),
        })?;

        // A fast step can cross several thresholds; snapshot once, at
        // the highest index crossed, so flops stay strictly increasing.
        let flops = meter.train_flops();
        if next_threshold < thresholds.len() && flops >= thresholds[next_threshold] {
            let mut idx = next_threshold;
            while idx + 1 < thresholds.len() && flops >= thresholds[idx + 1] {
                idx += 1;
            }
            capture_snapshot(
                sink, &mut snapshots, run_id, idx as u32, cfg.seed, env_steps, games, &meter,
                &params,
            )?;
            next_threshold = idx + 1;
        }

        let samples_done =
            cfg.sample_limit.is_some_and(|lim| meter.learner_samples() >= lim);
        if flops >= cfg.flop_limit || samples_done {
            let stale = snapshots
                .last()
                .map_or(true, |(h, _): &(SnapshotHeader, _)| flops > h.train_flops);
            if stale {
                capture_snapshot(
                    sink,
                    &mut snapshots,
                    run_id,
                    next_threshold as u32,
                    cfg.seed,
                    env_steps,
                    games,
                    &meter,
                    &params,
                )?;
            }
            break;
        }
    }

    Ok(TrainReport {
        run_id: run_id.to_string(),
        net: net_cfg,
        snapshots,
        env_steps,
        games,
        selfplay_forwards: meter.selfplay_forwards(),
        learner_samples: meter.learner_samples(),
        train_flops: meter.train_flops(),
        final_loss: latest_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hex::{Board, Coord};
    use crate::mcts::SearchConfig;
    use crate::nnet::{AdamConfig, LossWeights};

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            board_size: 3,
            width: 8,
            depth: 1,
            n_envs: 8,
            batch_size: 16,
            buffer_steps: 8,
            lr: 1e-3,
            adam: AdamConfig::default(),
            loss_weights: LossWeights::default(),
            search: SearchConfig { node_budget: 8, ..SearchConfig::selfplay(3) },
            snapshots: 5,
            sample_limit: None,
            flop_limit: 3_000_000,
            seed: 11,
        }
    }

    struct RecordingSink {
        metrics: Vec<MetricsRecord>,
        snaps: Vec<(SnapshotHeader, Vec<f32>)>,
    }

    impl RecordingSink {
        fn new() -> Self {
            RecordingSink { metrics: Vec::new(), snaps: Vec::new() }
        }
    }

    impl RunSink for RecordingSink {
        fn on_metrics(&mut self, rec: &MetricsRecord) -> std::io::Result<()> {
            self.metrics.push(*rec);
            Ok(())
        }
        fn on_snapshot(
            &mut self,
            header: &SnapshotHeader,
            params: &Params<f32>,
        ) -> std::io::Result<()> {
            self.snaps.push((header.clone(), params.to_flat()));
            Ok(())
        }
    }

    #[test]
    fn game_to_samples_alternates_values_from_the_winner() {
        let mut board = Board::new(3).unwrap();
        let mut plies = Vec::new();
        // Black wins the top-left column in 5 plies.
        for &(r, c) in &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)] {
            let mut policy = vec![0.0f32; 9];
            policy[board.index(Coord::new(r, c))] = 1.0;
            plies.push(Ply { obs: board.observation(), policy, mover: board.to_move() });
            board.apply_move(Coord::new(r, c)).unwrap();
        }
        let winner = board.winner().expect("game over");
        assert_eq!(winner, Player::Black);
        let samples = game_to_samples(&plies, winner);
        assert_eq!(samples.len(), 5);
        let values: Vec<f32> = samples.iter().map(|s| s.value).collect();
        assert_eq!(values, vec![1.0, -1.0, 1.0, -1.0, 1.0]);
        for s in &samples {
            let sum: f32 = s.policy.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn tiny_run_schedules_snapshots_and_terminates() {
        let cfg = tiny_cfg();
        let mut sink = RecordingSink::new();
        let report = run_training(&cfg, "tiny", &mut sink).unwrap();

        assert!(report.train_flops >= cfg.flop_limit);
        assert!(!report.snapshots.is_empty());
        assert!(report.games > 0);
        assert!(report.learner_samples > 0, "learner never engaged");
        assert!(report.final_loss.is_some());

        // Monotone flop counts, monotone schedule indices.
        for w in report.snapshots.windows(2) {
            assert!(w[1].0.train_flops > w[0].0.train_flops);
            assert!(w[1].0.index > w[0].0.index);
        }
        let last = &report.snapshots.last().unwrap().0;
        assert_eq!(last.train_flops, report.train_flops);
        assert_eq!(last.parameter_count, count_params(&report.net));

        // Sink saw exactly the reported snapshots and one metrics row
        // per environment step.
        assert_eq!(sink.snaps.len(), report.snapshots.len());
        assert_eq!(sink.metrics.len(), report.env_steps as usize);
        let m = sink.metrics.last().unwrap();
        assert_eq!(m.train_flops, report.train_flops);
        assert_eq!(
            m.train_flops,
            m.selfplay_forwards * flops_per_forward(&report.net)
                + m.learner_samples * 3 * flops_per_forward(&report.net)
        );
    }

    #[test]
    fn identical_configs_give_identical_runs() {
        let cfg = tiny_cfg();
        let mut a = RecordingSink::new();
        let mut b = RecordingSink::new();
        run_training(&cfg, "rep", &mut a).unwrap();
        run_training(&cfg, "rep", &mut b).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.snaps.len(), b.snaps.len());
        for ((ha, pa), (hb, pb)) in a.snaps.iter().zip(&b.snaps) {
            assert_eq!(ha, hb);
            assert_eq!(pa, pb, "parameters diverged at snapshot {}", ha.index);
        }
    }

    #[test]
    fn seed_changes_the_trajectory() {
        let cfg = tiny_cfg();
        let mut other = tiny_cfg();
        other.seed = 12;
        let a = run_training(&cfg, "a", &mut NullSink).unwrap();
        let b = run_training(&other, "b", &mut NullSink).unwrap();
        let pa = a.snapshots.last().unwrap().1.to_flat();
        let pb = b.snapshots.last().unwrap().1.to_flat();
        assert_ne!(pa, pb);
    }

    #[test]
    fn sample_limit_stops_the_run_early() {
        let mut cfg = tiny_cfg();
        cfg.flop_limit = u64::MAX / 4;
        cfg.sample_limit = Some(64);
        let report = run_training(&cfg, "cap", &mut NullSink).unwrap();
        assert!(report.learner_samples >= 64);
        assert!(report.train_flops < cfg.flop_limit);
        // The forced final snapshot reflects the terminal state.
        let last = &report.snapshots.last().unwrap().0;
        assert_eq!(last.train_flops, report.train_flops);
    }

    #[test]
    fn buffer_staleness_is_bounded_by_capacity() {
        // With buffer_steps=8 and n_envs=8 the ring holds 64 samples;
        // total pushes past capacity must evict oldest-first, which the
        // buffer's own tests cover. Here we check the loop keeps the
        // fill level at or below capacity while cycling games through.
        let cfg = tiny_cfg();
        let mut sink = RecordingSink::new();
        run_training(&cfg, "stale", &mut sink).unwrap();
        let cap = (cfg.buffer_steps * cfg.n_envs) as u64;
        for m in &sink.metrics {
            assert!(m.buffer_len <= cap);
        }
    }

}
