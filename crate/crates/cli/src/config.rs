//! Training config resolution: presets, TOML config files, flag
//! overrides, and the width/depth grid rule.

use std::path::Path;

use hexlab_core::mcts::SearchConfig;
use hexlab_core::nnet::{flops_per_forward, NetConfig};
use hexlab_core::TrainConfig;
use serde::Deserialize;

use crate::CliError;

pub const PRESETS: [&str; 11] = [
    "desk-3", "desk-4", "desk-5", "desk-6", "paper-3", "paper-4", "paper-5", "paper-6",
    "paper-7", "paper-8", "paper-9",
];

/// Unresolved training request: a preset or config file plus overrides.
#[derive(Debug, Default, Clone)]
pub struct TrainSpec {
    pub preset: Option<String>,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub n_envs: Option<usize>,
    pub batch_size: Option<usize>,
    pub flop_limit: Option<u64>,
    pub sample_limit: Option<u64>,
    pub snapshots: Option<u32>,
    pub node_budget: Option<u32>,
}

/// TOML config file shape. Only the architecture and budget are
/// mandatory; everything else defaults to the shared constants.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    board_size: u8,
    width: usize,
    depth: usize,
    flop_limit: u64,
    sample_limit: Option<u64>,
    n_envs: Option<usize>,
    batch_size: Option<usize>,
    buffer_steps: Option<usize>,
    lr: Option<f64>,
    snapshots: Option<u32>,
    node_budget: Option<u32>,
    seed: Option<u64>,
}

fn from_file(path: &str) -> Result<TrainConfig, CliError> {
    let text = std::fs::read_to_string(Path::new(path))
        .map_err(|e| CliError::Missing(format!("config file {path}: {e}")))?;
    let f: ConfigFile =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config file {path}: {e}")))?;
    let mut cfg = TrainConfig::desk(f.board_size).unwrap_or_else(|| TrainConfig {
        board_size: f.board_size,
        ..TrainConfig::desk(3).expect("desk-3 preset exists")
    });
    cfg.width = f.width;
    cfg.depth = f.depth;
    cfg.flop_limit = f.flop_limit;
    cfg.sample_limit = f.sample_limit;
    cfg.search = SearchConfig::selfplay(f.board_size);
    if let Some(v) = f.n_envs {
        cfg.n_envs = v;
    }
    if let Some(v) = f.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = f.buffer_steps {
        cfg.buffer_steps = v;
    }
    if let Some(v) = f.lr {
        cfg.lr = v;
    }
    if let Some(v) = f.snapshots {
        cfg.snapshots = v;
    }
    if let Some(v) = f.node_budget {
        cfg.search.node_budget = v;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

/// The architecture grid runs in powers of two: widths 1..=1024,
/// depths 1, 2, 4, 8. Anything off-grid is a config error.
pub fn check_grid(width: usize, depth: usize) -> Result<(), CliError> {
    if !width.is_power_of_two() || width > 1024 {
        return Err(CliError::Config(format!(
            "width {width} is off the grid: widths are powers of two (1, 2, 4, ..., 1024)"
        )));
    }
    if !matches!(depth, 1 | 2 | 4 | 8) {
        return Err(CliError::Config(format!(
            "depth {depth} is off the grid: depths are powers of two (1, 2, 4, 8)"
        )));
    }
    Ok(())
}

/// Resolves a [`TrainSpec`] to a validated config plus any warnings
/// (currently just the not-desk-scale note on paper presets).
pub fn resolve(spec: &TrainSpec) -> Result<(TrainConfig, Vec<String>), CliError> {
    let mut warnings = Vec::new();
    let mut cfg = match (&spec.preset, &spec.config_path) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either --preset or --config, not both".into(),
            ))
        }
        (Some(name), None) => TrainConfig::preset(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset {name:?}; valid presets: {}",
                PRESETS.join(", ")
            ))
        })?,
        (None, Some(path)) => from_file(path)?,
        (None, None) => {
            return Err(CliError::Config(
                "train needs --preset <name> or --config <file>".into(),
            ))
        }
    };

    if let Some(v) = spec.width {
        cfg.width = v;
    }
    if let Some(v) = spec.depth {
        cfg.depth = v;
    }
    if let Some(v) = spec.n_envs {
        cfg.n_envs = v;
    }
    if let Some(v) = spec.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = spec.flop_limit {
        cfg.flop_limit = v;
    }
    if let Some(v) = spec.sample_limit {
        cfg.sample_limit = Some(v);
    }
    if let Some(v) = spec.snapshots {
        cfg.snapshots = v;
    }
    if let Some(v) = spec.node_budget {
        cfg.search.node_budget = v;
    }
    if let Some(v) = spec.seed {
        cfg.seed = v;
    }

    check_grid(cfg.width, cfg.depth)?;
    cfg.validate().map_err(CliError::from)?;

    if matches!(&spec.preset, Some(p) if p.starts_with("paper-")) {
        let samples = cfg
            .sample_limit
            .map(|s| format!("{:.0e} samples", s as f64))
            .unwrap_or_else(|| "unbounded samples".into());
        warnings.push(format!(
            "{} targets {} and {:.0e} training flops; this is a published-scale \
budget, not a desk-scale one",
            spec.preset.as_deref().unwrap_or(""),
            samples,
            cfg.flop_limit as f64,
        ));
    }
    Ok((cfg, warnings))
}

/// Net-size ladder for the scaling study on one board. Each member's
/// compute budget scales with its per-forward cost, so every member
/// trains for the same number of steps (hence comparable wall time and
/// sample count) while covering its own slice of the compute axis; the
/// union of snapshots spans the whole frontier. The top member is the
/// board's desk preset itself.
pub fn desk_fleet(board_size: u8) -> Option<Vec<TrainConfig>> {
    let base = TrainConfig::desk(board_size)?;
    let ladder: &[(usize, usize)] = match board_size {
        3 => &[(1, 1), (2, 1), (4, 1), (4, 2), (8, 2), (16, 2)],
        4 => &[(2, 1), (4, 1), (4, 2), (8, 2), (16, 2), (16, 4)],
        5 => &[(2, 1), (4, 2), (8, 2), (16, 2), (16, 4), (16, 8)],
        6 => &[(4, 1), (8, 2), (16, 2), (16, 4), (32, 4), (32, 8)],
        _ => return None,
    };
    let cost = |width, depth| {
        let cfg = NetConfig::new(board_size, width, depth).expect("ladder shapes are valid");
        flops_per_forward(&cfg) as u128
    };
    let base_fpf = cost(base.width, base.depth);
    Some(
        ladder
            .iter()
            .map(|&(width, depth)| TrainConfig {
                width,
                depth,
                flop_limit: (u128::from(base.flop_limit) * cost(width, depth) / base_fpf)
                    .max(1) as u64,
                ..base.clone()
            })
            .collect(),
    )
}
