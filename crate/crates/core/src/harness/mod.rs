//! Baselines, cross-validated experiments and ablation sweeps.

mod ablation;
mod baselines;
mod experiment;

pub use ablation::{run_ablation, Sweep, SweepPoint};
pub use baselines::{centralized, fedavg, standalone};
pub use experiment::{
    fold_setup, mean_std, run_centralized, run_experiment, run_fedavg, run_method, run_standalone,
    summarize, with_threads, ClientMetrics, ClientSummary, ExperimentConfig, ExperimentResult,
    FoldResult, Method, MetricStat,
};
