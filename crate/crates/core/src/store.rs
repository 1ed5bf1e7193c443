//! On-disk layout for training runs, the match ledger, and analysis outputs.
//!
//! ```text
//! <root>/
//!   runs/<run_id>/config.json     config echo with schema and content hash
//!   runs/<run_id>/metrics.csv     one row per logged training step
//!   runs/<run_id>/snapshots/      s000.snap, s001.snap, ...
//!   ledger.csv                    global append-only match ledger
//!   analysis/<name>               analysis outputs, replaced atomically
//!   analysis/<name>.meta          sidecar holding the write timestamp
//! ```
//!
//! Invariants: every artifact starts with a schema tag; the ledger is
//! append-only and analysis commands never write under `runs/`; analysis
//! files are rewritten via temp-file rename so a rerun either reproduces
//! the previous bytes or replaces them whole. Timestamps live only in
//! `.meta` sidecars, keeping the primary outputs byte-deterministic.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::MatchRecord;
use crate::nnet::{read_snapshot, write_snapshot, Params, SnapshotError, SnapshotHeader};
use crate::trainer::{MetricsRecord, RunSink, TrainConfig};

pub const RUN_SCHEMA: &str = "hexlab.run.v1";
pub const METRICS_SCHEMA: &str = "hexlab.metrics.v1";
pub const LEDGER_SCHEMA: &str = "hexlab.ledger.v1";
pub const ANALYSIS_META_SCHEMA: &str = "hexlab.analysis-meta.v1";

const METRICS_COLUMNS: &str = "env_step,games,loss_total,loss_policy,loss_value,\
buffer_len,selfplay_forwards,learner_samples,train_flops";
const LEDGER_COLUMNS: &str = "context,board_size,nodes,black,white,winner,seed";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("snapshot: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error("bad name {0:?}: names use [A-Za-z0-9._-] and cannot start with '.'")]
    BadName(String),
    #[error("run {0} already exists")]
    RunExists(String),
    #[error("missing artifact: {0}")]
    Missing(String),
    #[error("corrupt artifact {path}: {what}")]
    Corrupt { path: String, what: String },
}

fn corrupt(path: &Path, what: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        path: path.display().to_string(),
        what: what.into(),
    }
}

/// FNV-1a over the raw bytes. Used to tag artifacts with the exact
/// inputs they were derived from and to derive schedule seeds; not
/// collision-resistant against an adversary and not meant to be.
pub fn content_hash_u64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// [`content_hash_u64`] rendered as 16 hex digits.
pub fn content_hash(bytes: &[u8]) -> String {
    format!("{:016x}", content_hash_u64(bytes))
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
}

fn check_name(name: &str) -> Result<(), StoreError> {
    if valid_name(name) {
        Ok(())
    } else {
        Err(StoreError::BadName(name.to_string()))
    }
}

fn expect_header_line(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    want: &str,
    path: &Path,
    what: &str,
) -> Result<(), StoreError> {
    match lines.next() {
        Some(line) => {
            if line?.trim() == want {
                Ok(())
            } else {
                Err(corrupt(path, what))
            }
        }
        None => Err(corrupt(path, what)),
    }
}

/// Write-through-rename so readers never observe a half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("artifact paths have a parent");
    let name = path.file_name().expect("artifact paths have a file name");
    let tmp = dir.join(format!(".tmp-{}", name.to_string_lossy()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    schema: String,
    run_id: String,
    config_hash: String,
    config: TrainConfig,
}

/// One ledger row: which command produced the match, plus the match itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub context: String,
    pub rec: MatchRecord,
}

pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    /// Opens a store rooted at `root`, creating the skeleton if absent.
    pub fn open(root: impl Into<PathBuf>) -> Result<RunStore, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("runs"))?;
        fs::create_dir_all(root.join("analysis"))?;
        Ok(RunStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Run ids are derived from the config content, so retraining the
    /// same config lands on the same id instead of a fresh directory.
    pub fn run_id_for(cfg: &TrainConfig) -> Result<String, StoreError> {
        let bytes = serde_json::to_vec(cfg)?;
        Ok(format!("r{}", &content_hash(&bytes)[..12]))
    }

    pub fn create_run(&self, cfg: &TrainConfig) -> Result<RunHandle, StoreError> {
        let id = Self::run_id_for(cfg)?;
        let dir = self.root.join("runs").join(&id);
        if dir.exists() {
            return Err(StoreError::RunExists(id));
        }
        fs::create_dir_all(dir.join("snapshots"))?;
        let bytes = serde_json::to_vec(cfg)?;
        let manifest = RunManifest {
            schema: RUN_SCHEMA.to_string(),
            run_id: id.clone(),
            config_hash: content_hash(&bytes),
            config: cfg.clone(),
        };
        write_atomic(
            &dir.join("config.json"),
            &serde_json::to_vec_pretty(&manifest)?,
        )?;
        Ok(RunHandle { id, dir })
    }

    pub fn open_run(&self, id: &str) -> Result<RunHandle, StoreError> {
        check_name(id)?;
        let dir = self.root.join("runs").join(id);
        if !dir.join("config.json").is_file() {
            return Err(StoreError::Missing(format!("run {id}")));
        }
        let handle = RunHandle {
            id: id.to_string(),
            dir,
        };
        let manifest = handle.manifest()?;
        if manifest.run_id != id {
            return Err(corrupt(
                &handle.dir.join("config.json"),
                format!("manifest names run {}", manifest.run_id),
            ));
        }
        Ok(handle)
    }

    /// Sorted ids of every run directory with a readable manifest.
    pub fn list_runs(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("runs"))? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            if valid_name(&name) && entry.path().join("config.json").is_file() {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    fn ledger_path(&self) -> PathBuf {
        self.root.join("ledger.csv")
    }

    /// Appends matches under a context label. Creates the ledger with its
    /// schema header on first use; never rewrites existing rows.
    pub fn append_matches(
        &self,
        context: &str,
        records: &[MatchRecord],
    ) -> Result<(), StoreError> {
        check_name(context)?;
        for rec in records {
            for id in [&rec.black, &rec.white, &rec.winner] {
                check_name(id)?;
            }
        }
        let path = self.ledger_path();
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        if file.metadata()?.len() == 0 {
            writeln!(file, "#schema={LEDGER_SCHEMA}")?;
            writeln!(file, "{LEDGER_COLUMNS}")?;
        }
        let mut w = BufWriter::new(file);
        for rec in records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                context, rec.board_size, rec.nodes, rec.black, rec.white, rec.winner, rec.seed
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// Every ledger row, in append order. An absent ledger reads as empty.
    pub fn read_ledger(&self) -> Result<Vec<LedgerEntry>, StoreError> {
        let path = self.ledger_path();
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut lines = BufReader::new(file).lines();
        expect_header_line(
            &mut lines,
            &format!("#schema={LEDGER_SCHEMA}"),
            &path,
            "missing or unknown schema tag",
        )?;
        expect_header_line(&mut lines, LEDGER_COLUMNS, &path, "missing column header")?;
        let mut out = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(corrupt(&path, format!("bad row {line:?}")));
            }
            let parse_err = |what: &str| corrupt(&path, format!("bad {what} in {line:?}"));
            let rec = MatchRecord {
                black: fields[3].to_string(),
                white: fields[4].to_string(),
                winner: fields[5].to_string(),
                board_size: fields[1].parse().map_err(|_| parse_err("board_size"))?,
                nodes: fields[2].parse().map_err(|_| parse_err("nodes"))?,
                seed: fields[6].parse().map_err(|_| parse_err("seed"))?,
            };
            if rec.winner != rec.black && rec.winner != rec.white {
                return Err(corrupt(&path, format!("winner played neither side: {line:?}")));
            }
            out.push(LedgerEntry {
                context: fields[0].to_string(),
                rec,
            });
        }
        Ok(out)
    }

    /// Completed games between `a` and `b` under `context`, either color.
    /// League commands consult this to skip already-played pairings.
    pub fn games_recorded(&self, context: &str, a: &str, b: &str) -> Result<u64, StoreError> {
        let mut n = 0;
        for e in self.read_ledger()? {
            if e.context == context
                && ((e.rec.black == a && e.rec.white == b)
                    || (e.rec.black == b && e.rec.white == a))
            {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn analysis_path(&self, name: &str) -> PathBuf {
        self.root.join("analysis").join(name)
    }

    /// Atomically (re)writes an analysis artifact and refreshes its
    /// timestamp sidecar. Returns the content hash of the bytes written.
    pub fn write_analysis(&self, name: &str, bytes: &[u8]) -> Result<String, StoreError> {
        check_name(name)?;
        let hash = content_hash(bytes);
        write_atomic(&self.analysis_path(name), bytes)?;
        let written_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let meta = serde_json::json!({
            "schema": ANALYSIS_META_SCHEMA,
            "content_hash": hash,
            "written_unix_ms": written_unix_ms,
        });
        write_atomic(
            &self.analysis_path(&format!("{name}.meta")),
            &serde_json::to_vec_pretty(&meta)?,
        )?;
        Ok(hash)
    }

    /// Sorted names of analysis artifacts, sidecars excluded.
    pub fn list_analysis(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("analysis"))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if valid_name(&name) && !name.ends_with(".meta") {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn read_analysis(&self, name: &str) -> Result<Vec<u8>, StoreError> {
        check_name(name)?;
        let path = self.analysis_path(name);
        match fs::read(&path) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(StoreError::Missing(format!("analysis/{name}")))
            }
            Err(e) => Err(e.into()),
        }
    }
}

pub struct RunHandle {
    id: String,
    dir: PathBuf,
}

impl RunHandle {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn manifest(&self) -> Result<RunManifest, StoreError> {
        let path = self.dir.join("config.json");
        let manifest: RunManifest = serde_json::from_slice(&fs::read(&path)?)?;
        if manifest.schema != RUN_SCHEMA {
            return Err(corrupt(&path, format!("schema {:?}", manifest.schema)));
        }
        Ok(manifest)
    }

    pub fn config(&self) -> Result<TrainConfig, StoreError> {
        Ok(self.manifest()?.config)
    }

    pub fn config_hash(&self) -> Result<String, StoreError> {
        Ok(self.manifest()?.config_hash)
    }

    /// Fresh metrics/snapshot writer. Truncates any partial metrics file
    /// from an aborted run; snapshots overwrite by index the same way.
    pub fn writer(&self) -> Result<RunWriter, StoreError> {
        let file = File::create(self.dir.join("metrics.csv"))?;
        let mut metrics = BufWriter::new(file);
        writeln!(metrics, "#schema={METRICS_SCHEMA}")?;
        writeln!(metrics, "{METRICS_COLUMNS}")?;
        Ok(RunWriter {
            metrics,
            snap_dir: self.dir.join("snapshots"),
        })
    }

    pub fn metrics(&self) -> Result<Vec<MetricsRecord>, StoreError> {
        let path = self.dir.join("metrics.csv");
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::Missing(format!("run {} metrics", self.id)))
            }
            Err(e) => return Err(e.into()),
        };
        let mut lines = BufReader::new(file).lines();
        expect_header_line(
            &mut lines,
            &format!("#schema={METRICS_SCHEMA}"),
            &path,
            "missing or unknown schema tag",
        )?;
        expect_header_line(&mut lines, METRICS_COLUMNS, &path, "missing column header")?;
        let mut out = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(corrupt(&path, format!("bad row {line:?}")));
            }
            let int = |i: usize| -> Result<u64, StoreError> {
                fields[i]
                    .parse()
                    .map_err(|_| corrupt(&path, format!("bad integer in {line:?}")))
            };
            let opt = |i: usize| -> Result<Option<f64>, StoreError> {
                if fields[i].is_empty() {
                    Ok(None)
                } else {
                    fields[i]
                        .parse()
                        .map(Some)
                        .map_err(|_| corrupt(&path, format!("bad float in {line:?}")))
                }
            };
            out.push(MetricsRecord {
                env_step: int(0)?,
                games: int(1)?,
                loss_total: opt(2)?,
                loss_policy: opt(3)?,
                loss_value: opt(4)?,
                buffer_len: int(5)?,
                selfplay_forwards: int(6)?,
                learner_samples: int(7)?,
                train_flops: int(8)?,
            });
        }
        Ok(out)
    }

    /// Snapshot headers in index order.
    pub fn snapshot_headers(&self) -> Result<Vec<SnapshotHeader>, StoreError> {
        Ok(self
            .load_snapshots()?
            .into_iter()
            .map(|(h, _)| h)
            .collect())
    }

    pub fn load_snapshot(&self, index: u32) -> Result<(SnapshotHeader, Params<f32>), StoreError> {
        let path = self.snapshot_path(index);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::Missing(format!(
                    "run {} snapshot {index}",
                    self.id
                )))
            }
            Err(e) => return Err(e.into()),
        };
        let (header, params) = read_snapshot(&mut BufReader::new(file))?;
        if header.index != index || header.run_id != self.id {
            return Err(corrupt(&path, "header does not match its location"));
        }
        Ok((header, params))
    }

    /// All snapshots, sorted by index.
    pub fn load_snapshots(&self) -> Result<Vec<(SnapshotHeader, Params<f32>)>, StoreError> {
        let mut indices = Vec::new();
        for entry in fs::read_dir(self.dir.join("snapshots"))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(num) = name.strip_prefix('s').and_then(|s| s.strip_suffix(".snap")) {
                if let Ok(i) = num.parse::<u32>() {
                    indices.push(i);
                }
            }
        }
        indices.sort_unstable();
        indices.dedup();
        indices
            .into_iter()
            .map(|i| self.load_snapshot(i))
            .collect()
    }

    /// Raw snapshot bytes, for determinism checks.
    pub fn snapshot_bytes(&self, index: u32) -> Result<Vec<u8>, StoreError> {
        let mut buf = Vec::new();
        File::open(self.snapshot_path(index))?.read_to_end(&mut buf)?;
        Ok(buf)
    }

    fn snapshot_path(&self, index: u32) -> PathBuf {
        self.dir.join("snapshots").join(format!("s{index:03}.snap"))
    }
}

/// Streams training output to disk. Metrics go to `metrics.csv`;
/// snapshots are written atomically as they arrive.
pub struct RunWriter {
    metrics: BufWriter<File>,
    snap_dir: PathBuf,
}

impl RunWriter {
    /// Flushes buffered metrics. Dropping without calling this loses
    /// errors, not data ordering.
    pub fn finish(mut self) -> std::io::Result<()> {
        self.metrics.flush()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunSink for RunWriter {
    fn on_metrics(&mut self, rec: &MetricsRecord) -> std::io::Result<()> {
        writeln!(
            self.metrics,
            "{},{},{},{},{},{},{},{},{}",
            rec.env_step,
            rec.games,
            fmt_opt(rec.loss_total),
            fmt_opt(rec.loss_policy),
            fmt_opt(rec.loss_value),
            rec.buffer_len,
            rec.selfplay_forwards,
            rec.learner_samples,
            rec.train_flops
        )
    }

    fn on_snapshot(
        &mut self,
        header: &SnapshotHeader,
        params: &Params<f32>,
    ) -> std::io::Result<()> {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, header, params).map_err(|e| match e {
            SnapshotError::Io(e) => e,
            SnapshotError::Corrupt(m) => std::io::Error::new(std::io::ErrorKind::InvalidData, m),
        })?;
        let path = self.snap_dir.join(format!("s{:03}.snap", header.index));
        write_atomic(&path, &buf).map_err(|e| match e {
            StoreError::Io(e) => e,
            other => std::io::Error::other(other.to_string()),
        })
    }
}
