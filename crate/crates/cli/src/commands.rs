//! Subcommand implementations. Each takes an open store plus resolved
//! options and returns a summary the binary prints; artifacts land in
//! the store. Analysis commands are deterministic functions of the
//! artifacts they read.

use std::collections::BTreeMap;

use hexlab_core::arena::{
    fit_elos, run_pairing, Agent, MatchConfig, MatchRecord, NullMatchSink, WinMatrix,
};
use hexlab_core::rng;
use hexlab_core::scaling::{
    derive_quantities, extract_frontier, fit_changepoint, fit_linear, fit_sigmoid,
    per_board_incline_slopes, predictive_error, tradeoff_analysis, FrontierPoint, RatedSnapshot,
    TradeoffSnapshot,
};
use hexlab_core::store::{content_hash, content_hash_u64, RunHandle, RunStore};
use hexlab_core::trainer::run_training;
use hexlab_core::{Params, TrainConfig};

use crate::artifacts::{
    elo_file, fit_file, frontier_file, predict_file, tradeoff_file, EloArtifact, FitArtifact,
    FrontierArtifact, InputRef, PredictArtifact, TradeoffArtifact, ELO_SCHEMA, FIT_SCHEMA,
    FRONTIER_SCHEMA, PREDICT_SCHEMA, TRADEOFF_SCHEMA,
};
use crate::config::{resolve, TrainSpec};
use crate::{CliError, CODE_VERSION};

#[derive(Debug)]
pub struct TrainOutcome {
    pub run_id: String,
    /// False when the run already existed with snapshots and was reused.
    pub trained: bool,
    pub snapshots: usize,
    pub train_flops: u64,
    pub games: u64,
    pub warnings: Vec<String>,
}

pub fn cmd_train(store: &RunStore, spec: &TrainSpec) -> Result<TrainOutcome, CliError> {
    let (cfg, warnings) = resolve(spec)?;
    let mut outcome = ensure_trained(store, &cfg)?;
    outcome.warnings = warnings;
    Ok(outcome)
}

/// Train `cfg` into the store, or reuse the finished run it hashes to.
pub fn ensure_trained(store: &RunStore, cfg: &TrainConfig) -> Result<TrainOutcome, CliError> {
    let run = match store.create_run(cfg) {
        Ok(run) => run,
        Err(hexlab_core::store::StoreError::RunExists(id)) => {
            let run = store.open_run(&id)?;
            let headers = run.snapshot_headers()?;
            if !headers.is_empty() {
                let last = headers.last().expect("nonempty");
                return Ok(TrainOutcome {
                    run_id: id,
                    trained: false,
                    snapshots: headers.len(),
                    train_flops: last.train_flops,
                    games: last.games,
                    warnings: Vec::new(),
                });
            }
            run // aborted before any snapshot; retrain in place
        }
        Err(e) => return Err(e.into()),
    };
    let mut writer = run.writer()?;
    let report = run_training(&cfg, run.id(), &mut writer)?;
    writer.finish()?;
    Ok(TrainOutcome {
        run_id: report.run_id,
        trained: true,
        snapshots: report.snapshots.len(),
        train_flops: report.train_flops,
        games: report.games,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone)]
pub struct LeagueOpts {
    pub games_per_pair: usize,
    pub nodes: u32,
    pub include_random: bool,
    pub include_solver: bool,
    /// Keep every `stride`-th snapshot (by schedule index) plus the last.
    pub stride: usize,
    pub seed: u64,
}

impl Default for LeagueOpts {
    fn default() -> LeagueOpts {
        LeagueOpts {
            games_per_pair: 64,
            nodes: 64,
            include_random: false,
            include_solver: false,
            stride: 1,
            seed: 0,
        }
    }
}

pub struct LeagueOutcome {
    pub context: String,
    pub agents: usize,
    pub pairs_played: usize,
    pub pairs_skipped: usize,
    pub games_appended: u64,
}

fn snapshot_agent_id(run_id: &str, index: u32) -> String {
    format!("{run_id}-s{index:03}")
}

/// Loads the snapshot agents of `runs`, all of which must share one
/// board size. Returns the board and the agents sorted by id.
fn load_fleet(
    store: &RunStore,
    runs: &[String],
    stride: usize,
) -> Result<(u8, Vec<Agent>), CliError> {
    if runs.is_empty() {
        return Err(CliError::Config("no run ids given".into()));
    }
    if stride == 0 {
        return Err(CliError::Config("stride must be positive".into()));
    }
    let mut board = None;
    let mut agents: Vec<(String, Params<f32>)> = Vec::new();
    for id in runs {
        let run = store.open_run(id)?;
        let cfg = run.config()?;
        match board {
            None => board = Some(cfg.board_size),
            Some(b) if b == cfg.board_size => {}
            Some(b) => {
                return Err(CliError::Config(format!(
                    "runs mix board sizes {b} and {} ({id})",
                    cfg.board_size
                )))
            }
        }
        let snaps = run.load_snapshots()?;
        if snaps.is_empty() {
            return Err(CliError::Missing(format!("run {id} has no snapshots")));
        }
        let last = snaps.len() - 1;
        for (k, (header, params)) in snaps.into_iter().enumerate() {
            if k % stride == 0 || k == last {
                agents.push((snapshot_agent_id(id, header.index), params));
            }
        }
    }
    agents.sort_by(|a, b| a.0.cmp(&b.0));
    let agents = agents
        .into_iter()
        .map(|(id, params)| Agent::net(id, params))
        .collect();
    Ok((board.expect("at least one run"), agents))
}

fn pair_seed(context: &str, a: &str, b: &str, user_seed: u64, prior: u64) -> u64 {
    let base = content_hash_u64(format!("{context}|{a}|{b}").as_bytes());
    rng::split_seed(base ^ user_seed, prior)
}

/// Plays any missing games of one pairing and appends them to the
/// ledger. Returns the number of games added.
fn top_up_pairing(
    store: &RunStore,
    agents: &mut [Agent],
    cfg: &MatchConfig,
    context: &str,
    a: &str,
    b: &str,
    games_per_pair: usize,
    user_seed: u64,
) -> Result<u64, CliError> {
    let done = store.games_recorded(context, a, b)?;
    if done >= games_per_pair as u64 {
        return Ok(0);
    }
    let remaining = (games_per_pair as u64 - done).next_multiple_of(2) as usize;
    let seed = pair_seed(context, a, b, user_seed, done);
    let mut records: Vec<MatchRecord> = Vec::new();
    run_pairing(agents, a, b, remaining, cfg, seed, &mut records)?;
    store.append_matches(context, &records)?;
    Ok(records.len() as u64)
}

pub fn cmd_league(
    store: &RunStore,
    runs: &[String],
    opts: &LeagueOpts,
) -> Result<LeagueOutcome, CliError> {
    if opts.games_per_pair == 0 || opts.games_per_pair % 2 != 0 {
        return Err(CliError::Config(format!(
            "games_per_pair must be positive and even, got {}",
            opts.games_per_pair
        )));
    }
    let (board, mut agents) = load_fleet(store, runs, opts.stride)?;
    if opts.include_random {
        agents.push(Agent::random("random"));
    }
    if opts.include_solver {
        agents.push(Agent::solver("solver"));
    }
    if agents.len() < 2 {
        return Err(CliError::Config("league needs at least two agents".into()));
    }
    let cfg = MatchConfig::new(board, opts.nodes);
    let context = format!("league-b{board}-n{}", opts.nodes);
    let ids: Vec<String> = agents.iter().map(|a| a.id().to_string()).collect();

    let mut outcome = LeagueOutcome {
        context: context.clone(),
        agents: agents.len(),
        pairs_played: 0,
        pairs_skipped: 0,
        games_appended: 0,
    };
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            let added = top_up_pairing(
                store,
                &mut agents,
                &cfg,
                &context,
                &ids[i],
                &ids[j],
                opts.games_per_pair,
                opts.seed,
            )?;
            if added == 0 {
                outcome.pairs_skipped += 1;
            } else {
                outcome.pairs_played += 1;
                outcome.games_appended += added;
            }
        }
    }
    Ok(outcome)
}

pub fn cmd_topeval(
    store: &RunStore,
    runs: &[String],
    top: &str,
    games_per_agent: usize,
    opts: &LeagueOpts,
) -> Result<LeagueOutcome, CliError> {
    if games_per_agent == 0 || games_per_agent % 2 != 0 {
        return Err(CliError::Config(format!(
            "games must be positive and even, got {games_per_agent}"
        )));
    }
    let (board, mut agents) = load_fleet(store, runs, opts.stride)?;
    if opts.include_random {
        agents.push(Agent::random("random"));
    }
    if opts.include_solver {
        agents.push(Agent::solver("solver"));
    }
    let ids: Vec<String> = agents.iter().map(|a| a.id().to_string()).collect();
    if !ids.iter().any(|id| id == top) {
        return Err(CliError::Config(format!(
            "top agent {top:?} is not among the loaded agents"
        )));
    }
    let context = format!("topeval-b{board}-n{}", opts.nodes);
    let cfg = MatchConfig::new(board, opts.nodes);

    let mut outcome = LeagueOutcome {
        context: context.clone(),
        agents: agents.len(),
        pairs_played: 0,
        pairs_skipped: 0,
        games_appended: 0,
    };
    for id in &ids {
        if id == top {
            continue;
        }
        let added = top_up_pairing(
            store,
            &mut agents,
            &cfg,
            &context,
            top,
            id,
            games_per_agent,
            opts.seed,
        )?;
        if added == 0 {
            outcome.pairs_skipped += 1;
        } else {
            outcome.pairs_played += 1;
            outcome.games_appended += added;
        }
    }
    Ok(outcome)
}

/// Canonical rendering of the ledger rows an analysis consumed; hashing
/// this ties the output to its exact inputs.
fn rows_digest(rows: &[&MatchRecord]) -> String {
    let mut text = String::new();
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.board_size, r.nodes, r.black, r.white, r.winner, r.seed
        ));
    }
    content_hash(text.as_bytes())
}

fn options_hash(value: &serde_json::Value) -> Result<String, CliError> {
    Ok(content_hash(&serde_json::to_vec(value)?))
}

pub fn cmd_elo(
    store: &RunStore,
    context: &str,
    anchor: &str,
) -> Result<(String, EloArtifact), CliError> {
    let rows: Vec<_> = store
        .read_ledger()?
        .into_iter()
        .filter(|e| e.context == context)
        .map(|e| e.rec)
        .collect();
    if rows.is_empty() {
        return Err(CliError::Missing(format!(
            "no ledger entries for context {context:?}; run league or topeval first"
        )));
    }
    let mut ids: Vec<String> = Vec::new();
    for r in &rows {
        for id in [&r.black, &r.white] {
            if !ids.contains(id) {
                ids.push(id.clone());
            }
        }
    }
    ids.sort();
    let index: BTreeMap<String, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    let mut matrix = WinMatrix::new(ids)?;
    for r in &rows {
        matrix.record(index[&r.black], index[&r.white], r.winner == r.black);
    }
    let rating = fit_elos(&matrix, anchor)?;

    let artifact = EloArtifact {
        schema: ELO_SCHEMA.to_string(),
        code_version: CODE_VERSION.to_string(),
        options_hash: options_hash(&serde_json::json!({
            "context": context, "anchor": anchor,
        }))?,
        context: context.to_string(),
        anchor: anchor.to_string(),
        games: matrix.total_games(),
        inputs: vec![InputRef {
            name: format!("ledger:{context}"),
            hash: rows_digest(&rows.iter().collect::<Vec<_>>()),
        }],
        entries: rating.entries,
    };
    let name = elo_file(context);
    store.write_analysis(&name, &serde_json::to_vec_pretty(&artifact)?)?;
    Ok((name, artifact))
}

fn read_artifact<T: serde::de::DeserializeOwned>(
    store: &RunStore,
    name: &str,
    want_schema: &str,
) -> Result<(T, String), CliError> {
    let bytes = store.read_analysis(name)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == want_schema => {}
        other => {
            return Err(CliError::Internal(format!(
                "{name}: expected schema {want_schema}, found {other:?}"
            )))
        }
    }
    Ok((serde_json::from_value(value)?, content_hash(&bytes)))
}

pub fn cmd_frontier(
    store: &RunStore,
    board: u8,
    context: &str,
) -> Result<(String, FrontierArtifact), CliError> {
    let (elo, elo_hash) = read_artifact::<EloArtifact>(store, &elo_file(context), ELO_SCHEMA)?;

    let mut runs: BTreeMap<String, RunHandle> = BTreeMap::new();
    let mut inputs = vec![InputRef {
        name: elo_file(context),
        hash: elo_hash,
    }];
    let mut rated = Vec::new();
    for entry in &elo.entries {
        let Some(rating) = entry.rating else { continue };
        let Some((run_id, idx)) = entry.id.rsplit_once("-s") else {
            continue; // reference agent ("random", "solver"), not a snapshot
        };
        let Ok(index) = idx.parse::<u32>() else { continue };
        if !runs.contains_key(run_id) {
            let run = store.open_run(run_id)?;
            inputs.push(InputRef {
                name: format!("run:{run_id}"),
                hash: run.config_hash()?,
            });
            runs.insert(run_id.to_string(), run);
        }
        let (header, _) = runs[run_id].load_snapshot(index)?;
        if header.net.board_size != board {
            return Err(CliError::Config(format!(
                "context {context:?} rates board {} snapshots, not board {board}",
                header.net.board_size
            )));
        }
        rated.push(RatedSnapshot {
            board_size: board,
            train_flops: header.train_flops,
            elo: rating,
        });
    }
    if rated.is_empty() {
        return Err(CliError::Numeric(format!(
            "no rated snapshots under context {context:?}"
        )));
    }
    let points = extract_frontier(&rated);

    let artifact = FrontierArtifact {
        schema: FRONTIER_SCHEMA.to_string(),
        code_version: CODE_VERSION.to_string(),
        options_hash: options_hash(&serde_json::json!({
            "board": board, "context": context,
        }))?,
        board_size: board,
        context: context.to_string(),
        inputs,
        points,
    };
    let name = frontier_file(board);
    store.write_analysis(&name, &serde_json::to_vec_pretty(&artifact)?)?;
    Ok((name, artifact))
}

fn read_frontier_points(
    store: &RunStore,
    boards: &[u8],
) -> Result<(Vec<FrontierPoint>, Vec<InputRef>), CliError> {
    let mut points = Vec::new();
    let mut inputs = Vec::new();
    for &board in boards {
        let name = frontier_file(board);
        let (artifact, hash) = read_artifact::<FrontierArtifact>(store, &name, FRONTIER_SCHEMA)?;
        if artifact.board_size != board {
            return Err(CliError::Internal(format!(
                "{name} claims board {}",
                artifact.board_size
            )));
        }
        points.extend(artifact.points);
        inputs.push(InputRef { name, hash });
    }
    Ok((points, inputs))
}

fn check_boards(boards: &[u8]) -> Result<Vec<u8>, CliError> {
    if boards.is_empty() {
        return Err(CliError::Config("no boards given".into()));
    }
    let mut sorted = boards.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != boards.len() {
        return Err(CliError::Config(format!("duplicate boards in {boards:?}")));
    }
    Ok(sorted)
}

pub fn cmd_fit(
    store: &RunStore,
    model: &str,
    boards: &[u8],
) -> Result<(String, FitArtifact), CliError> {
    let boards = check_boards(boards)?;
    let (points, inputs) = read_frontier_points(store, &boards)?;
    let mut artifact = FitArtifact {
        schema: FIT_SCHEMA.to_string(),
        code_version: CODE_VERSION.to_string(),
        options_hash: options_hash(&serde_json::json!({
            "model": model, "boards": boards,
        }))?,
        model: model.to_string(),
        boards: boards.clone(),
        n_points: points.len(),
        inputs,
        changepoint: None,
        derived: None,
        per_board_incline_slopes: None,
        sigmoid: None,
        linear: None,
    };
    match model {
        "changepoint" => {
            let fit = fit_changepoint(&points)?;
            if fit.incline_identifiable {
                artifact.derived = Some(derive_quantities(&fit.params));
            }
            artifact.per_board_incline_slopes =
                Some(per_board_incline_slopes(&points, &fit.params));
            artifact.changepoint = Some(fit);
        }
        "sigmoid" => artifact.sigmoid = Some(fit_sigmoid(&points)?),
        "linear" => artifact.linear = Some(fit_linear(&points)?),
        other => {
            return Err(CliError::Config(format!(
                "unknown model {other:?}; choose changepoint, sigmoid, or linear"
            )))
        }
    }
    let name = fit_file(model, &boards);
    store.write_analysis(&name, &serde_json::to_vec_pretty(&artifact)?)?;
    Ok((name, artifact))
}

pub fn cmd_predict(
    store: &RunStore,
    fit_boards: &[u8],
    eval_board: u8,
) -> Result<(String, PredictArtifact), CliError> {
    let fit_boards = check_boards(fit_boards)?;
    if fit_boards.contains(&eval_board) {
        return Err(CliError::Config(format!(
            "eval board {eval_board} is in the fit set {fit_boards:?}"
        )));
    }
    let mut all = fit_boards.clone();
    all.push(eval_board);
    all.sort_unstable();
    let (points, inputs) = read_frontier_points(store, &all)?;
    let error = predictive_error(&points, &fit_boards, eval_board)?;
    let artifact = PredictArtifact {
        schema: PREDICT_SCHEMA.to_string(),
        code_version: CODE_VERSION.to_string(),
        options_hash: options_hash(&serde_json::json!({
            "fit_boards": fit_boards, "eval_board": eval_board,
        }))?,
        fit_boards: fit_boards.clone(),
        eval_board,
        inputs,
        error,
    };
    let name = predict_file(&fit_boards, eval_board);
    store.write_analysis(&name, &serde_json::to_vec_pretty(&artifact)?)?;
    Ok((name, artifact))
}

pub struct TradeoffOpts {
    pub node_grid: Vec<u32>,
    pub games_per_pair: usize,
    pub stride: usize,
    pub seed: u64,
}

pub fn cmd_tradeoff(
    store: &RunStore,
    run_id: &str,
    opts: &TradeoffOpts,
) -> Result<(String, TradeoffArtifact), CliError> {
    if opts.stride == 0 {
        return Err(CliError::Config("stride must be positive".into()));
    }
    let run = store.open_run(run_id)?;
    let cfg = run.config()?;
    let snaps = run.load_snapshots()?;
    if snaps.is_empty() {
        return Err(CliError::Missing(format!("run {run_id} has no snapshots")));
    }
    let last = snaps.len() - 1;
    let snapshots: Vec<TradeoffSnapshot> = snaps
        .into_iter()
        .enumerate()
        .filter(|(k, _)| k % opts.stride == 0 || *k == last)
        .map(|(_, (header, params))| TradeoffSnapshot {
            id: snapshot_agent_id(run_id, header.index),
            train_flops: header.train_flops,
            params,
        })
        .collect();
    let first_nodes = *opts
        .node_grid
        .first()
        .ok_or_else(|| CliError::Config("empty node grid".into()))?;
    let match_cfg = MatchConfig::new(cfg.board_size, first_nodes);
    let analysis = tradeoff_analysis(
        &snapshots,
        &opts.node_grid,
        &match_cfg,
        opts.games_per_pair,
        opts.seed,
        &mut NullMatchSink,
    )?;

    let artifact = TradeoffArtifact {
        schema: TRADEOFF_SCHEMA.to_string(),
        code_version: CODE_VERSION.to_string(),
        options_hash: options_hash(&serde_json::json!({
            "run": run_id,
            "node_grid": opts.node_grid,
            "games_per_pair": opts.games_per_pair,
            "stride": opts.stride,
            "seed": opts.seed,
        }))?,
        board_size: cfg.board_size,
        run_id: run_id.to_string(),
        node_grid: opts.node_grid.clone(),
        games_per_pair: opts.games_per_pair,
        inputs: vec![InputRef {
            name: format!("run:{run_id}"),
            hash: run.config_hash()?,
        }],
        points: analysis.points,
        iso_lines: analysis.iso_lines,
        slope: analysis.slope,
    };
    let name = tradeoff_file(cfg.board_size);
    store.write_analysis(&name, &serde_json::to_vec_pretty(&artifact)?)?;
    Ok((name, artifact))
}

pub fn cmd_report(store: &RunStore) -> Result<Vec<String>, CliError> {
    crate::report::render(store)
}
