use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reptreefl::harness::{ExperimentResult, SweepPoint};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";
pub const ROUNDS: &str = "rounds.csv";
pub const RESULTS: &str = "results.json";
pub const SUMMARY: &str = "summary.csv";

pub const ROUNDS_HEADER: [&str; 8] = ["fold", "round", "anchor", "replica_path", "div", "alpha", "loss", "acc-or-mae"];
pub const PLOT_HEADER: [&str; 5] = ["method", "client", "fold", "metric", "value"];

/// Everything needed to rerun an experiment, plus what it produced. Holds
/// nothing that depends on wall-clock time or thread count.
#[derive(Debug, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config_hash: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_point: Option<SweepPoint>,
    pub result: ExperimentResult,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<&'a str>,
    pub parallel: Option<usize>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(csv::Writer::from_writer(file))
}

fn num(v: f64) -> String {
    v.to_string()
}

/// One row per (round, parent, replica) with the replica's divergence and
/// weight, and one per (round, anchor) with its last epoch loss and
/// headline test metric.
pub fn write_rounds(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ROUNDS_HEADER)?;
    for fold in &result.folds {
        for report in &fold.rounds {
            for a in &report.anchors {
                for d in &a.diversity {
                    w.write_record([
                        fold.fold.to_string(),
                        report.round.to_string(),
                        a.anchor.to_string(),
                        d.child.to_string(),
                        num(d.div),
                        num(d.alpha),
                        String::new(),
                        String::new(),
                    ])?;
                }
                w.write_record([
                    fold.fold.to_string(),
                    report.round.to_string(),
                    a.anchor.to_string(),
                    a.anchor.to_string(),
                    String::new(),
                    String::new(),
                    a.losses.last().map(|&l| num(l)).unwrap_or_default(),
                    a.metrics.map(|m| num(m.headline())).unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Final-round metrics, one row per (sweep value, client, fold).
pub fn write_summary(path: &Path, points: &[(SweepPoint, ExperimentResult)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let metric_names: Vec<&str> = points
        .first()
        .and_then(|(_, r)| r.folds.first())
        .and_then(|f| f.clients.first())
        .map(|c| c.metrics.named().into_iter().map(|(n, _)| n).collect())
        .unwrap_or_default();
    let mut header = vec!["parameter", "value", "method", "client", "fold"];
    header.extend(&metric_names);
    w.write_record(&header)?;
    for (point, result) in points {
        for fold in &result.folds {
            for c in &fold.clients {
                let mut row = vec![
                    point.parameter.clone(),
                    point.value.clone(),
                    result.method.to_string(),
                    c.client.to_string(),
                    fold.fold.to_string(),
                ];
                row.extend(c.metrics.named().into_iter().map(|(_, v)| num(v)));
                w.write_record(&row)?;
            }
        }
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn read_results(path: &Path) -> Result<ResultsFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("corrupt results file {}", path.display()))
}

/// Results files under a run directory, or under each point of a sweep
/// directory in name order.
fn collect_results(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("result directory {} does not exist", dir.display());
    }
    let direct = dir.join(RESULTS);
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let p = entry?.path().join(RESULTS);
        if p.is_file() {
            found.push(p);
        }
    }
    if found.is_empty() {
        bail!("no {RESULTS} in {} or its subdirectories", dir.display());
    }
    found.sort();
    Ok(found)
}

/// Long-format `method,client,fold,metric,value` rows from every given
/// run or sweep directory. Sweep points are labelled `method@param=value`.
pub fn write_plotdata(dirs: &[PathBuf], out: &mut impl Write) -> Result<usize> {
    if dirs.is_empty() {
        bail!("no result directories given");
    }
    let mut files = Vec::new();
    for d in dirs {
        files.extend(collect_results(d)?);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_HEADER)?;
    let mut rows = 0;
    for path in files {
        let r = read_results(&path)?;
        let label = match &r.sweep_point {
            Some(p) => format!("{}@{}", r.result.method, p.label()),
            None => r.result.method.to_string(),
        };
        for fold in &r.result.folds {
            for c in &fold.clients {
                for (name, value) in c.metrics.named() {
                    w.write_record([label.clone(), c.client.to_string(), fold.fold.to_string(), name.into(), num(value)])?;
                    rows += 1;
                }
            }
        }
    }
    w.flush()?;
    Ok(rows)
}
