mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use reptreefl::harness::{run_ablation, run_experiment, with_threads, Sweep, SweepPoint};

use config::RunConfig;
use output::{Manifest, ResultsFile, MANIFEST, RESULTS, ROUNDS, SUMMARY};

/// Replica-tree federated learning experiments.
#[derive(Parser)]
#[command(name = "reptreefl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one cross-validated experiment.
    Run(RunArgs),
    /// Run one experiment per value of a single parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `name=v1,v2,...`; names: perturbation_rate, depth, aggregation,
        /// perturbation_mode, client_dataset_size.
        #[arg(long)]
        sweep: String,
    },
    /// Merge result directories into long-format plot data.
    Plotdata {
        /// Run or sweep output directories.
        dirs: Vec<PathBuf>,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// reptreefl, repfl, fedavg, standalone or centralized.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for folds and replica subtrees; results do not depend
    /// on it.
    #[arg(long)]
    parallel: Option<usize>,
    /// Override a config key, e.g. `--set lr=0.01 --set client.0.depth=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let mut overrides = self.overrides.clone();
        if let Some(m) = &self.method {
            overrides.push(format!("method={m:?}"));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        config::load(&self.config, &overrides)
    }
}

fn now() -> String {
    Utc::now().to_rfc3339()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_point(
    dir: &Path,
    config: &RunConfig,
    point: Option<SweepPoint>,
    result: reptreefl::harness::ExperimentResult,
    manifest: Manifest<'_>,
) -> Result<()> {
    create_dir(dir)?;
    output::write_rounds(&dir.join(ROUNDS), &result)?;
    let results = ResultsFile {
        config_hash: manifest.config_hash.clone(),
        config: config.clone(),
        sweep_point: point,
        result,
    };
    output::write_json(&dir.join(RESULTS), &results)?;
    output::write_json(&dir.join(MANIFEST), &manifest)
}

fn manifest<'a>(
    command: &'a str,
    config: &RunConfig,
    hash: String,
    sweep: Option<&'a str>,
    parallel: Option<usize>,
    started_at: String,
    outputs: Vec<PathBuf>,
) -> Result<Manifest<'a>> {
    Ok(Manifest {
        command,
        config: serde_json::to_value(config)?,
        config_hash: hash,
        seed: config.seed,
        sweep,
        parallel,
        started_at,
        finished_at: now(),
        outputs,
    })
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let started = now();
    let (config, base) = args.load()?;
    let pool = config.dataset(&base)?;
    let experiment = config.experiment(&pool)?;
    let result = with_threads(args.parallel, || run_experiment(&experiment, &pool))??;
    let outputs = [MANIFEST, ROUNDS, RESULTS].iter().map(|f| args.out.join(f)).collect();
    let m = manifest("run", &config, config.content_hash()?, None, args.parallel, started, outputs)?;
    write_point(&args.out, &config, None, result, m)
}

fn cmd_sweep(args: &RunArgs, sweep_arg: &str) -> Result<()> {
    let started = now();
    let sweep: Sweep = sweep_arg.parse().with_context(|| format!("invalid --sweep {sweep_arg:?}"))?;
    let (config, base) = args.load()?;
    let pool = config.dataset(&base)?;
    let experiment = config.experiment(&pool)?;
    let points = with_threads(args.parallel, || run_ablation(&experiment, &pool, &sweep))??;
    create_dir(&args.out)?;
    output::write_summary(&args.out.join(SUMMARY), &points)?;

    let base_hash = config.content_hash()?;
    let mut outputs = vec![args.out.join(MANIFEST), args.out.join(SUMMARY)];
    for (point, result) in points {
        let dir = args.out.join(point.label());
        let hash = {
            use sha2::{Digest, Sha256};
            hex::encode(Sha256::digest(format!("{base_hash} {}", point.label())))
        };
        let files: Vec<PathBuf> = [MANIFEST, ROUNDS, RESULTS].iter().map(|f| dir.join(f)).collect();
        outputs.extend(files.iter().cloned());
        let m = manifest("sweep", &config, hash, Some(sweep_arg), args.parallel, started.clone(), files)?;
        write_point(&dir, &config, Some(point), result, m)?;
    }
    let m = manifest("sweep", &config, base_hash, Some(sweep_arg), args.parallel, started, outputs)?;
    output::write_json(&args.out.join(MANIFEST), &m)
}

fn cmd_plotdata(dirs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut buf = Vec::new();
            output::write_plotdata(dirs, &mut buf)?;
            std::fs::write(path, buf).with_context(|| format!("cannot write {}", path.display()))
        }
        None => output::write_plotdata(dirs, &mut std::io::stdout().lock()).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep { run, sweep } => cmd_sweep(run, sweep),
        Command::Plotdata { dirs, out } => cmd_plotdata(dirs, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
