//! The replica-tree federation protocol: local training, diversity-weighted
//! tree aggregation and the server round loop.

mod aggregate;
mod protocol;
mod train;
mod weights;

pub use aggregate::{aggregate_diversity, aggregate_simple, average_common};
pub use protocol::{
    build_forest, client_update, initial_params, run_federation, server_round, test_view, Anchor,
    AnchorRound, ClientSetup, DiversityRecord, FederationOutcome, NodeUpdate, RoundReport,
};
pub use train::{hetero_local_update, local_train, TrainSettings};
pub use weights::{compute_div_aggregation_weights, AggregationWeights, DIVERSITY_EPSILON};
