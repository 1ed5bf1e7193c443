use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hexlab_cli::commands::{
    cmd_elo, cmd_fit, cmd_frontier, cmd_league, cmd_predict, cmd_report, cmd_topeval,
    cmd_tradeoff, cmd_train, LeagueOpts, TradeoffOpts,
};
use hexlab_cli::config::TrainSpec;
use hexlab_cli::CliError;
use hexlab_core::store::RunStore;

#[derive(Parser)]
#[command(name = "hexlab", version, about = "Hex self-play scaling experiments")]
struct Cli {
    /// Run store root directory.
    #[arg(long, global = true, default_value = "hexlab-store")]
    store: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one config and store its snapshots.
    Train {
        /// Preset name (desk-3..desk-6, paper-3..paper-9).
        #[arg(long)]
        preset: Option<String>,
        /// TOML config file; alternative to --preset.
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        n_envs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        flop_limit: Option<u64>,
        #[arg(long)]
        sample_limit: Option<u64>,
        #[arg(long)]
        snapshots: Option<u32>,
        /// Self-play search nodes per move.
        #[arg(long)]
        node_budget: Option<u32>,
        /// Resolve and echo the config without training.
        #[arg(long)]
        dry_run: bool,
    },
    /// Round-robin league over the snapshots of the given runs.
    League {
        /// Run ids, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        runs: Vec<String>,
        #[arg(long, default_value_t = 64)]
        games_per_pair: usize,
        /// Test-time search nodes per move.
        #[arg(long, default_value_t = 64)]
        nodes: u32,
        /// Add the uniform-random reference agent.
        #[arg(long)]
        random: bool,
        /// Add the exact-solver reference agent (boards up to 5).
        #[arg(long)]
        solver: bool,
        /// Keep every k-th snapshot per run (the last is always kept).
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate every agent against one reference agent.
    Topeval {
        #[arg(long, value_delimiter = ',', required = true)]
        runs: Vec<String>,
        /// Agent id to play everyone against (e.g. "solver" or a snapshot id).
        #[arg(long)]
        top: String,
        #[arg(long, default_value_t = 64)]
        games: usize,
        #[arg(long, default_value_t = 64)]
        nodes: u32,
        #[arg(long)]
        random: bool,
        #[arg(long)]
        solver: bool,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit Bradley-Terry ratings over one ledger context.
    Elo {
        /// Ledger context, e.g. league-b5-n64.
        #[arg(long)]
        context: String,
        /// Agent pinned to 0 Elo.
        #[arg(long)]
        anchor: String,
    },
    /// Extract the compute frontier for one board from its ratings.
    Frontier {
        #[arg(long)]
        board: u8,
        #[arg(long)]
        context: String,
    },
    /// Fit a scaling curve to stored frontiers.
    Fit {
        /// changepoint, sigmoid, or linear.
        #[arg(long)]
        model: String,
        #[arg(long, value_delimiter = ',', required = true)]
        boards: Vec<u8>,
    },
    /// Held-out prediction error for one board.
    Predict {
        #[arg(long, value_delimiter = ',', required = true)]
        fit_boards: Vec<u8>,
        #[arg(long)]
        eval_board: u8,
    },
    /// Train/test compute trade-off over a node grid.
    Tradeoff {
        #[arg(long)]
        run: String,
        /// Test-time node budgets, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        nodes: Vec<u32>,
        #[arg(long, default_value_t = 64)]
        games_per_pair: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render summary tables and SVG charts from stored artifacts.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let store = RunStore::open(&cli.store)?;
    match cli.cmd {
        Cmd::Train {
            preset,
            config,
            seed,
            width,
            depth,
            n_envs,
            batch_size,
            flop_limit,
            sample_limit,
            snapshots,
            node_budget,
            dry_run,
        } => {
            let spec = TrainSpec {
                preset,
                config_path: config,
                seed,
                width,
                depth,
                n_envs,
                batch_size,
                flop_limit,
                sample_limit,
                snapshots,
                node_budget,
            };
            if dry_run {
                let (cfg, warnings) = hexlab_cli::config::resolve(&spec)?;
                for w in &warnings {
                    eprintln!("warning: {w}");
                }
                let samples = cfg
                    .sample_limit
                    .map(|s| format!("{:e}", s as f64))
                    .unwrap_or_else(|| "none".into());
                println!(
                    "config ok: board {}, width {}, depth {}, sample limit {}, flop limit {:e}, \
run id {}",
                    cfg.board_size,
                    cfg.width,
                    cfg.depth,
                    samples,
                    cfg.flop_limit as f64,
                    RunStore::run_id_for(&cfg)?,
                );
                return Ok(());
            }
            let out = cmd_train(&store, &spec)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if out.trained {
                println!(
                    "run {} trained: {} snapshots, {} games, {} train flops",
                    out.run_id, out.snapshots, out.games, out.train_flops
                );
            } else {
                println!(
                    "run {} already trained ({} snapshots); reusing it",
                    out.run_id, out.snapshots
                );
            }
        }
        Cmd::League {
            runs,
            games_per_pair,
            nodes,
            random,
            solver,
            stride,
            seed,
        } => {
            let opts = LeagueOpts {
                games_per_pair,
                nodes,
                include_random: random,
                include_solver: solver,
                stride,
                seed,
            };
            let out = cmd_league(&store, &runs, &opts)?;
            println!(
                "league {}: {} agents, {} pairings played, {} already complete, {} games appended",
                out.context, out.agents, out.pairs_played, out.pairs_skipped, out.games_appended
            );
        }
        Cmd::Topeval {
            runs,
            top,
            games,
            nodes,
            random,
            solver,
            stride,
            seed,
        } => {
            let opts = LeagueOpts {
                games_per_pair: games,
                nodes,
                include_random: random,
                include_solver: solver,
                stride,
                seed,
            };
            let out = cmd_topeval(&store, &runs, &top, games, &opts)?;
            println!(
                "topeval {}: {} agents, {} pairings played, {} already complete, {} games appended",
                out.context, out.agents, out.pairs_played, out.pairs_skipped, out.games_appended
            );
        }
        Cmd::Elo { context, anchor } => {
            let (name, artifact) = cmd_elo(&store, &context, &anchor)?;
            let rated = artifact.entries.iter().filter(|e| e.rating.is_some()).count();
            println!(
                "wrote {name}: {} agents rated over {} games (anchor {})",
                rated, artifact.games, artifact.anchor
            );
        }
        Cmd::Frontier { board, context } => {
            let (name, artifact) = cmd_frontier(&store, board, &context)?;
            println!("wrote {name}: {} frontier points", artifact.points.len());
        }
        Cmd::Fit { model, boards } => {
            let (name, artifact) = cmd_fit(&store, &model, &boards)?;
            println!("wrote {name}: {} points fitted", artifact.n_points);
            if let Some(d) = &artifact.derived {
                println!(
                    "  elo/oom {:.1}, perfect-play multiplier {:.2}, takeoff multiplier {:.2}",
                    d.elo_per_oom, d.perfect_play_compute_multiplier, d.takeoff_compute_multiplier
                );
            }
        }
        Cmd::Predict {
            fit_boards,
            eval_board,
        } => {
            let (name, artifact) = cmd_predict(&store, &fit_boards, eval_board)?;
            println!(
                "wrote {name}: residual variance {:.2} over {} held-out points",
                artifact.error.residual_variance, artifact.error.n_eval_points
            );
        }
        Cmd::Tradeoff {
            run,
            nodes,
            games_per_pair,
            stride,
            seed,
        } => {
            let opts = TradeoffOpts {
                node_grid: nodes,
                games_per_pair,
                stride,
                seed,
            };
            let (name, artifact) = cmd_tradeoff(&store, &run, &opts)?;
            match artifact.slope {
                Some(s) => println!("wrote {name}: median iso-Elo slope {s:.3}"),
                None => println!("wrote {name}: slope undefined (too few frontier points)"),
            }
        }
        Cmd::Report => {
            let files = cmd_report(&store)?;
            for f in &files {
                println!("wrote {f}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
