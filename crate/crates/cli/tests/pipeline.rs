//! End-to-end pipeline over a temporary store: train tiny runs, league
//! them against the reference agents, rate, extract frontiers, fit, and
//! report. Also checks idempotent leagues, byte-deterministic analysis
//! reruns, and the exit-code contract.

use std::process::Command;

use hexlab_cli::artifacts::{FrontierArtifact, InputRef, FRONTIER_SCHEMA};
use hexlab_cli::commands::{
    cmd_elo, cmd_fit, cmd_frontier, cmd_league, cmd_predict, cmd_report, cmd_topeval,
    cmd_tradeoff, cmd_train, LeagueOpts, TradeoffOpts,
};
use hexlab_cli::config::TrainSpec;
use hexlab_cli::CliError;
use hexlab_core::scaling::{model_elo, ChangePointParams, FrontierPoint};
use hexlab_core::store::RunStore;

fn tiny_spec(seed: u64) -> TrainSpec {
    TrainSpec {
        preset: Some("desk-3".into()),
        seed: Some(seed),
        width: Some(4),
        depth: Some(1),
        n_envs: Some(8),
        batch_size: Some(16),
        flop_limit: Some(20_000_000),
        snapshots: Some(4),
        node_budget: Some(8),
        ..TrainSpec::default()
    }
}

#[test]
fn pipeline_runs_end_to_end_and_reruns_are_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let store = RunStore::open(tmp.path()).unwrap();

    let a = cmd_train(&store, &tiny_spec(0)).unwrap();
    let b = cmd_train(&store, &tiny_spec(1)).unwrap();
    assert!(a.trained && b.trained);
    assert_ne!(a.run_id, b.run_id);
    assert!(a.snapshots >= 1);

    let again = cmd_train(&store, &tiny_spec(0)).unwrap();
    assert!(!again.trained, "identical config should reuse the run");
    assert_eq!(again.run_id, a.run_id);
    assert_eq!(again.snapshots, a.snapshots);

    let runs = vec![a.run_id.clone(), b.run_id.clone()];
    let opts = LeagueOpts {
        games_per_pair: 4,
        nodes: 8,
        include_random: true,
        include_solver: true,
        stride: 2,
        seed: 0,
    };
    let league = cmd_league(&store, &runs, &opts).unwrap();
    let pairs = league.agents * (league.agents - 1) / 2;
    assert_eq!(league.pairs_played, pairs);
    assert_eq!(league.pairs_skipped, 0);
    assert_eq!(league.games_appended, 4 * pairs as u64);

    let rerun = cmd_league(&store, &runs, &opts).unwrap();
    assert_eq!(rerun.pairs_played, 0);
    assert_eq!(rerun.pairs_skipped, pairs);
    assert_eq!(rerun.games_appended, 0);

    // Raising games_per_pair tops up only the difference.
    let topped = cmd_league(&store, &runs, &LeagueOpts { games_per_pair: 6, ..opts.clone() })
        .unwrap();
    assert_eq!(topped.pairs_played, pairs);
    assert_eq!(topped.games_appended, 2 * pairs as u64);

    let (elo_name, elo) = cmd_elo(&store, &league.context, "solver").unwrap();
    assert_eq!(elo.entries.iter().find(|e| e.id == "solver").unwrap().rating, Some(0.0));
    assert_eq!(elo.games, 6 * pairs as u64);
    let bytes1 = store.read_analysis(&elo_name).unwrap();
    cmd_elo(&store, &league.context, "solver").unwrap();
    let bytes2 = store.read_analysis(&elo_name).unwrap();
    assert_eq!(bytes1, bytes2, "elo rerun must be byte-identical");

    let (frontier_name, frontier) = cmd_frontier(&store, 3, &league.context).unwrap();
    assert!(!frontier.points.is_empty());
    assert!(frontier
        .points
        .windows(2)
        .all(|w| w[0].log10_train_flops < w[1].log10_train_flops && w[0].elo <= w[1].elo));
    assert!(frontier.inputs.iter().any(|i| i.name == elo_name));
    let fbytes1 = store.read_analysis(&frontier_name).unwrap();
    cmd_frontier(&store, 3, &league.context).unwrap();
    assert_eq!(fbytes1, store.read_analysis(&frontier_name).unwrap());

    let tops = cmd_topeval(
        &store,
        &runs[..1],
        "solver",
        2,
        &LeagueOpts { include_solver: true, stride: 4, ..opts.clone() },
    )
    .unwrap();
    assert!(tops.games_appended > 0);
    let tops_again = cmd_topeval(
        &store,
        &runs[..1],
        "solver",
        2,
        &LeagueOpts { include_solver: true, stride: 4, ..opts.clone() },
    )
    .unwrap();
    assert_eq!(tops_again.games_appended, 0);

    let topts = TradeoffOpts { node_grid: vec![1, 2], games_per_pair: 4, stride: 2, seed: 0 };
    let (tname, tart) = cmd_tradeoff(&store, &a.run_id, &topts).unwrap();
    assert!(!tart.points.is_empty());
    let tbytes = store.read_analysis(&tname).unwrap();
    cmd_tradeoff(&store, &a.run_id, &topts).unwrap();
    assert_eq!(tbytes, store.read_analysis(&tname).unwrap());

    let files = cmd_report(&store).unwrap();
    assert!(files.iter().any(|f| f == "report.txt"));
    assert!(files.iter().any(|f| f == "report-frontier-b3.svg"));
    assert!(files.iter().any(|f| f.starts_with("report-tradeoff-b3")));
    let svg = store.read_analysis("report-frontier-b3.svg").unwrap();
    assert!(String::from_utf8(svg).unwrap().starts_with("<svg"));
    let txt = String::from_utf8(store.read_analysis("report.txt").unwrap()).unwrap();
    assert!(txt.contains("Frontier board 3"));
}

fn table_params() -> ChangePointParams {
    ChangePointParams {
        m_plateau_boardsize: -270.0,
        c_plateau: 570.0,
        m_incline_flops: 510.0,
        m_incline_boardsize: -430.0,
        c_incline: -4400.0,
    }
}

/// Noiseless frontier for one board sampled two decades beyond the model
/// kinks on either side .
fn synthetic_frontier(p: &ChangePointParams, board: u8) -> Vec<FrontierPoint> {
    let takeoff = (p.plateau(board) - p.m_incline_boardsize * f64::from(board) - p.c_incline)
        / p.m_incline_flops;
    let zero =
        (-p.m_incline_boardsize * f64::from(board) - p.c_incline) / p.m_incline_flops;
    let (lo, hi) = (takeoff - 2.0, zero + 2.0);
    (0..24)
        .map(|k| {
            let logf = lo + (hi - lo) * k as f64 / 23.0;
            FrontierPoint {
                board_size: board,
                log10_train_flops: logf,
                elo: model_elo(p, board, logf),
            }
        })
        .collect()
}

fn write_synthetic_frontiers(store: &RunStore, boards: &[u8]) {
    let p = table_params();
    for &b in boards {
        let artifact = FrontierArtifact {
            schema: FRONTIER_SCHEMA.to_string(),
            code_version: "test".to_string(),
            options_hash: "0".repeat(16),
            board_size: b,
            context: format!("synthetic-b{b}"),
            inputs: vec![InputRef { name: "synthetic".into(), hash: "0".repeat(16) }],
            points: synthetic_frontier(&p, b),
        };
        store
            .write_analysis(
                &format!("frontier-b{b}.json"),
                &serde_json::to_vec_pretty(&artifact).unwrap(),
            )
            .unwrap();
    }
}

#[test]
fn fit_recovers_the_generating_parameters_from_a_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let store = RunStore::open(tmp.path()).unwrap();
    write_synthetic_frontiers(&store, &[5, 6, 7, 8, 9]);

    let (_, fit) = cmd_fit(&store, "changepoint", &[5, 6, 7, 8, 9]).unwrap();
    let got = fit.changepoint.as_ref().unwrap();
    let want = table_params();
    let sides = [
        ("m_plateau_boardsize", got.params.m_plateau_boardsize, want.m_plateau_boardsize),
        ("c_plateau", got.params.c_plateau, want.c_plateau),
        ("m_incline_flops", got.params.m_incline_flops, want.m_incline_flops),
        ("m_incline_boardsize", got.params.m_incline_boardsize, want.m_incline_boardsize),
        ("c_incline", got.params.c_incline, want.c_incline),
    ];
    for (name, g, w) in sides {
        assert!((g - w).abs() <= 0.01 * w.abs(), "{name} fitted {g} vs generating {w}");
    }
    let d = fit.derived.as_ref().expect("identifiable fit derives quantities");
    assert!((d.elo_per_oom - 510.0).abs() < 5.0);
    assert!((d.perfect_play_compute_multiplier - 6.97).abs() < 0.05);

    let (_, lin) = cmd_fit(&store, "linear", &[5, 6, 7]).unwrap();
    assert!(lin.linear.unwrap().mse > got.mse);

    let (_, pred) = cmd_predict(&store, &[5, 6, 7, 8], 9).unwrap();
    assert!(pred.error.residual_variance < 1.0);
    assert!(pred.error.r_squared > 0.999);

    let files = cmd_report(&store).unwrap();
    assert!(files.iter().any(|f| f == "report-frontiers-all.svg"));
}

#[test]
fn errors_map_to_the_documented_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let store = RunStore::open(tmp.path()).unwrap();

    let missing = cmd_elo(&store, "league-b3-n8", "solver").unwrap_err();
    assert_eq!(missing.exit_code(), 3, "{missing}");

    let missing = cmd_fit(&store, "changepoint", &[3]).unwrap_err();
    assert_eq!(missing.exit_code(), 3, "{missing}");

    write_synthetic_frontiers(&store, &[5]);
    let badmodel = cmd_fit(&store, "wat", &[5]).unwrap_err();
    assert!(matches!(badmodel, CliError::Config(_)));
    assert_eq!(badmodel.exit_code(), 2);

    // One board with one point is numerically degenerate.
    let one = FrontierArtifact {
        schema: FRONTIER_SCHEMA.to_string(),
        code_version: "test".to_string(),
        options_hash: "0".repeat(16),
        board_size: 3,
        context: "synthetic-b3".into(),
        inputs: vec![],
        points: vec![FrontierPoint { board_size: 3, log10_train_flops: 9.0, elo: -100.0 }],
    };
    store
        .write_analysis("frontier-b3.json", &serde_json::to_vec_pretty(&one).unwrap())
        .unwrap();
    let degenerate = cmd_fit(&store, "changepoint", &[3]).unwrap_err();
    assert_eq!(degenerate.exit_code(), 4, "{degenerate}");

    let overlap = cmd_predict(&store, &[5], 5).unwrap_err();
    assert_eq!(overlap.exit_code(), 2, "{overlap}");

    let spec = TrainSpec {
        preset: Some("desk-3".into()),
        width: Some(3),
        ..TrainSpec::default()
    };
    let offgrid = cmd_train(&store, &spec).unwrap_err();
    assert_eq!(offgrid.exit_code(), 2);
}

#[test]
fn the_binary_honors_the_exit_code_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let store_arg = tmp.path().to_str().unwrap();
    let bin = env!("CARGO_BIN_EXE_hexlab");

    let out = Command::new(bin)
        .args(["--store", store_arg, "train", "--preset", "paper-9", "--dry-run"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stderr.contains("not a desk-scale"), "{stderr}");
    assert!(stdout.contains("2e9") && stdout.contains("1e17"), "{stdout}");

    let out = Command::new(bin)
        .args(["--store", store_arg, "train", "--preset", "desk-3", "--width", "3", "--dry-run"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("powers of two"));

    let out = Command::new(bin)
        .args(["--store", store_arg, "elo", "--context", "league-b3-n8", "--anchor", "solver"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
