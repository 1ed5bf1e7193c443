//! Analysis artifact schemas. Every artifact names its schema, the code
//! version that wrote it, the resolved options it was produced under,
//! and content hashes of the exact inputs it consumed, so any output can
//! be traced back through the pipeline. Serialization is plain
//! serde_json over structs: field order is fixed, so identical inputs
//! give byte-identical files (timestamps live in the store's sidecars).

use hexlab_core::arena::EloEntry;
use hexlab_core::scaling::{
    ChangePointFit, DerivedQuantities, FrontierPoint, IsoEloLine, LinearFit, PredictiveError,
    SigmoidFit, TradeoffPoint,
};
use serde::{Deserialize, Serialize};

pub const ELO_SCHEMA: &str = "hexlab.elo.v1";
pub const FRONTIER_SCHEMA: &str = "hexlab.frontier.v1";
pub const FIT_SCHEMA: &str = "hexlab.fit.v1";
pub const PREDICT_SCHEMA: &str = "hexlab.predict.v1";
pub const TRADEOFF_SCHEMA: &str = "hexlab.tradeoff.v1";

/// One upstream input: a human-readable name plus the content hash of
/// the bytes actually consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub name: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloArtifact {
    pub schema: String,
    pub code_version: String,
    pub options_hash: String,
    pub context: String,
    pub anchor: String,
    pub games: u64,
    pub inputs: Vec<InputRef>,
    pub entries: Vec<EloEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierArtifact {
    pub schema: String,
    pub code_version: String,
    pub options_hash: String,
    pub board_size: u8,
    pub context: String,
    pub inputs: Vec<InputRef>,
    pub points: Vec<FrontierPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub schema: String,
    pub code_version: String,
    pub options_hash: String,
    pub model: String,
    pub boards: Vec<u8>,
    pub n_points: usize,
    pub inputs: Vec<InputRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub changepoint: Option<ChangePointFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedQuantities>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_board_incline_slopes: Option<Vec<(u8, Option<f64>)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmoid: Option<SigmoidFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictArtifact {
    pub schema: String,
    pub code_version: String,
    pub options_hash: String,
    pub fit_boards: Vec<u8>,
    pub eval_board: u8,
    pub inputs: Vec<InputRef>,
    pub error: PredictiveError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffArtifact {
    pub schema: String,
    pub code_version: String,
    pub options_hash: String,
    pub board_size: u8,
    pub run_id: String,
    pub node_grid: Vec<u32>,
    pub games_per_pair: usize,
    pub inputs: Vec<InputRef>,
    pub points: Vec<TradeoffPoint>,
    pub iso_lines: Vec<IsoEloLine>,
    /// Median log-log slope of test compute against train compute.
    pub slope: Option<f64>,
}

pub fn elo_file(context: &str) -> String {
    format!("elo-{context}.json")
}

pub fn frontier_file(board: u8) -> String {
    format!("frontier-b{board}.json")
}

pub fn fit_file(model: &str, boards: &[u8]) -> String {
    let tags: Vec<String> = boards.iter().map(|b| b.to_string()).collect();
    format!("fit-{model}-b{}.json", tags.join("_"))
}

pub fn predict_file(fit_boards: &[u8], eval_board: u8) -> String {
    let tags: Vec<String> = fit_boards.iter().map(|b| b.to_string()).collect();
    format!("predict-b{eval_board}-from{}.json", tags.join("_"))
}

pub fn tradeoff_file(board: u8) -> String {
    format!("tradeoff-b{board}.json")
}
