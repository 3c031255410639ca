//! End-to-end experiment: plain pricing, training, importance-sampled pricing
//! and comparison rows, with every artifact written to one output directory.
//!
//! Files written by [`run`]:
//!
//! | file | content |
//! |------|---------|
//! | `resolved.toml` | the resolved config |
//! | `paths.csv` | first plain paths, when requested |
//! | `plain.{csv,json}` | plain reports, one per sample size |
//! | `checkpoint.txt` | trained network |
//! | `trace.csv` | objective and `‖h‖²` per training step |
//! | `importance.{csv,json}` | importance-sampled reports |
//! | `comparison.{csv,json}` | one table row per sample size |
//! | `error.json` | stage and message, only on failure |

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Resolved, RunConfig};
use crate::engine::{compare, write_records, ComparisonRow, Estimator, EstimatorReport, Format};
use crate::error::{Error, Result};
use crate::ffn::ShallowNet;
use crate::models::{simulate_with, Simulator};
use crate::rng::{derive_seed, substream, Domain};
use crate::training::{train, TrainOutcome};

/// Seeds of the plain and importance-sampled runs for table row `row`.
pub fn row_seeds(seed: u64, row: usize) -> (u64, u64) {
    let r = 2 * row as u64;
    (derive_seed(seed, r), derive_seed(seed, r + 1))
}

/// Plain reports for every configured sample size.
pub fn price_plain(resolved: &Resolved) -> Result<Vec<EstimatorReport>> {
    let cov = resolved.covariation()?;
    let est = Estimator::new(&resolved.model, &resolved.payoff, &cov)?;
    let e = &resolved.config.estimation;
    e.sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| est.plain(row_seeds(e.seed, i).0, n))
        .collect()
}

/// Importance-sampled reports for every configured sample size.
pub fn price_importance(resolved: &Resolved, net: &ShallowNet) -> Result<Vec<EstimatorReport>> {
    let cov = resolved.covariation()?;
    let est = Estimator::new(&resolved.model, &resolved.payoff, &cov)?;
    let e = &resolved.config.estimation;
    e.sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| est.importance(net, row_seeds(e.seed, i).1, n))
        .collect()
}

/// Trains a fresh network on the training grid.
pub fn train_resolved(resolved: &Resolved) -> Result<TrainOutcome> {
    let cov = resolved.train_covariation()?;
    let net = resolved.config.training.init_net(resolved.model.driver_dim());
    train(&net, &resolved.model, &resolved.payoff, &cov, &resolved.config.training)
}

pub fn compare_all(plain: &[EstimatorReport], weighted: &[EstimatorReport]) -> Result<Vec<ComparisonRow>> {
    if plain.len() != weighted.len() {
        return Err(Error::Mismatch(format!(
            "{} plain reports against {} importance-sampled",
            plain.len(),
            weighted.len()
        )));
    }
    plain.iter().zip(weighted).map(|(a, b)| compare(a, b)).collect()
}

/// Writes the first `n` plain paths of the first row's seed.
pub fn dump_paths(resolved: &Resolved, n: usize, path: &Path) -> Result<()> {
    let cov = resolved.covariation()?;
    let sim = Simulator::new(&resolved.model, &cov)?;
    let seed = row_seeds(resolved.config.estimation.seed, 0).0;
    let mut rng = substream(seed, Domain::Paths, 0);
    let batch = simulate_with(&sim, &mut rng, n)?;
    batch.write_csv(cov.grid(), BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub dry_run: bool,
    /// Replaces the configured output formats.
    pub formats: Option<Vec<Format>>,
    /// Replaces the configured number of dumped paths.
    pub dump_paths: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub resolved_path: PathBuf,
    pub plain: Vec<EstimatorReport>,
    pub importance: Vec<EstimatorReport>,
    pub rows: Vec<ComparisonRow>,
    pub halted: Option<String>,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    stage: &'a str,
    exit_code: i32,
    message: String,
}

/// Writes `error.json` for a failure at `stage` and passes the error on.
pub fn record_error(out_dir: &Path, stage: &str, err: Error) -> Error {
    let record = ErrorRecord {
        stage,
        exit_code: err.exit_code(),
        message: err.to_string(),
    };
    if let Ok(text) = serde_json::to_string_pretty(&record) {
        let _ = fs::write(out_dir.join("error.json"), text + "\n");
    }
    err
}

/// Writes `records` once per format as `<stem>.<ext>`.
pub fn emit<T: Serialize>(out_dir: &Path, stem: &str, records: &[T], formats: &[Format]) -> Result<()> {
    for &f in formats {
        let file = File::create(out_dir.join(format!("{stem}.{}", f.extension())))?;
        write_records(records, f, BufWriter::new(file))?;
    }
    Ok(())
}

/// Resolves `config` and runs the full experiment into `out_dir`.
///
/// Artifacts of completed stages are kept when a later stage fails.
pub fn run(config: &RunConfig, out_dir: &Path, options: &RunOptions) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let _ = fs::remove_file(out_dir.join("error.json"));
    let stage = |name: &'static str| move |e: Error| record_error(out_dir, name, e);

    let resolved = config.resolve().map_err(stage("resolve"))?;
    let resolved_path = out_dir.join("resolved.toml");
    fs::write(&resolved_path, resolved.config.to_toml()?).map_err(|e| stage("resolve")(e.into()))?;
    let mut summary = RunSummary {
        resolved_path,
        plain: vec![],
        importance: vec![],
        rows: vec![],
        halted: None,
    };
    if options.dry_run {
        return Ok(summary);
    }
    let formats = options
        .formats
        .clone()
        .unwrap_or_else(|| resolved.config.output.formats.clone());
    let n_dump = options.dump_paths.unwrap_or(resolved.config.output.dump_paths);

    if n_dump > 0 {
        dump_paths(&resolved, n_dump, &out_dir.join("paths.csv")).map_err(stage("dump_paths"))?;
    }

    summary.plain = price_plain(&resolved).map_err(stage("plain"))?;
    emit(out_dir, "plain", &summary.plain, &formats).map_err(stage("plain"))?;

    let outcome = train_resolved(&resolved).map_err(stage("train"))?;
    outcome
        .net
        .save(out_dir.join("checkpoint.txt"))
        .map_err(stage("train"))?;
    let trace = File::create(out_dir.join("trace.csv")).map_err(|e| stage("train")(e.into()))?;
    outcome.trace.write_csv(BufWriter::new(trace)).map_err(stage("train"))?;
    summary.halted = outcome.halted;

    summary.importance = price_importance(&resolved, &outcome.net).map_err(stage("importance"))?;
    emit(out_dir, "importance", &summary.importance, &formats).map_err(stage("importance"))?;

    summary.rows = compare_all(&summary.plain, &summary.importance).map_err(stage("compare"))?;
    emit(out_dir, "comparison", &summary.rows, &formats).map_err(stage("compare"))?;
    Ok(summary)
}
