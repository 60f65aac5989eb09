//! Datasets, ingestion, cross-validation splits and replica perturbation.

mod csv_io;
mod dataset;
mod perturb;
mod split;
mod synthetic;

pub use csv_io::{load_csv, write_csv, CsvSchema, CsvTask};
pub use dataset::Dataset;
pub use perturb::{
    perturb, perturb_random, perturb_stratified, removal_count, removal_window, stratified_quotas,
    PerturbationMode,
};
pub use split::{kfold_assign, FoldRoles, SplitPlan};
pub use synthetic::{generate, generate_synthetic, SyntheticKind, SyntheticSpec};
