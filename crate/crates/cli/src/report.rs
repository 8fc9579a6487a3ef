//! Machine-readable run reports.
//!
//! Reports are pretty-printed JSON with a trailing newline. Parsing a report
//! and writing it again reproduces the same bytes.

use std::path::Path;

use pathnas::sampler::FairnessReport;
use pathnas::search::SearchMethod;
use pathnas::Architecture;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const REPORT_FORMAT: &str = "pathnas-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optimum {
    pub architecture: Architecture,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderboardSnapshot {
    pub cycles: usize,
    pub scores: Vec<Vec<f64>>,
    pub occurrences: Vec<Vec<u64>>,
    /// Layers whose argmax was decided by the lowest-index tie-break.
    pub tied_layers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRun {
    pub seed: u64,
    /// SHA-256 of the landscape document or checkpoint that produced fitness.
    pub evaluator_fingerprint: String,
    pub best_architecture: Architecture,
    pub best_fitness: f64,
    pub evaluations: usize,
    /// Brute-force optimum when the space is enumerable and the evaluator
    /// is an oracle.
    pub optimum: Option<Optimum>,
    pub found_optimum: Option<bool>,
    pub fairness: Option<FairnessReport>,
    pub leaderboard: Option<LeaderboardSnapshot>,
    pub evaluation_log: String,
    pub landscape: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchReport {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub space_size: String,
    pub evaluator: String,
    pub method: SearchMethod,
    pub budget: usize,
    pub runs: Vec<SearchRun>,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRun {
    pub seed: u64,
    pub checkpoint: String,
    pub macro_steps: u64,
    pub accumulation_window: usize,
    pub update_counts: Vec<Vec<u64>>,
    /// True when every layer's update counts are exactly equal.
    pub fair: bool,
    pub fairness: FairnessReport,
    /// Mean loss of each macro-step run by this invocation.
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainReport {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub parameter_count: usize,
    pub runs: Vec<TrainRun>,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferRun {
    pub seed: u64,
    pub source_selection: Architecture,
    pub source_fitness: f64,
    /// Target fitness of the architecture searched on the source.
    pub transfer_fitness: f64,
    pub native_selection: Architecture,
    pub native_fitness: f64,
    /// `native_fitness − transfer_fitness`
    pub gap: f64,
    pub target_optimum: Option<Optimum>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferReport {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub source: ExperimentConfig,
    pub target: ExperimentConfig,
    pub runs: Vec<TransferRun>,
    pub mean_gap: f64,
    pub wall_clock_seconds: f64,
}

pub fn to_text<R: Serialize>(report: &R) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write<R: Serialize>(path: &Path, report: &R) -> CliResult<()> {
    std::fs::write(path, to_text(report))
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn read<R: DeserializeOwned>(path: &Path) -> CliResult<R> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read report {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::runtime(format!("bad report {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trips<R: Serialize + DeserializeOwned>(path: &Path) {
        let text = std::fs::read_to_string(path).unwrap();
        let parsed: R = serde_json::from_str(&text).unwrap();
        assert_eq!(to_text(&parsed), text, "{}", path.display());
    }

    #[test]
    fn written_reports_round_trip_byte_for_byte() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path();
        let oracle = "seeds = [0, 3]\nspace.groups = [{ name = \"l\", layers = 4, choices = 3 }]\n\
                      evaluator.kind = \"oracle\"\nevaluator.oracle.landscape = \"noisy\"\n";
        std::fs::write(d.join("o.toml"), oracle).unwrap();
        round_trips::<SearchReport>(&crate::commands::search(&d.join("o.toml"), None).unwrap());
        round_trips::<TransferReport>(
            &crate::commands::transfer(&d.join("o.toml"), &d.join("o.toml"), None).unwrap(),
        );
        std::fs::write(
            d.join("s.toml"),
            "space.groups = [{ name = \"l\", layers = 2, choices = 3 }]\nevaluator.kind = \"supernet\"\n\
             evaluator.supernet.macro_steps = 2\nevaluator.supernet.task = { train_size = 64, val_size = 32 }\n",
        )
        .unwrap();
        let ckpt = crate::commands::train_supernet(&d.join("s.toml"), None, None).unwrap();
        round_trips::<TrainReport>(&ckpt[0].parent().unwrap().join("report.json"));
    }
}
