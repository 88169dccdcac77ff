//! Federated training of a single slimmable network with rewards paid out as
//! subnetworks whose accuracy tracks each client's contribution.
//!
//! Post-training rewards: [`fedcore::run_sampled_widths`] trains the shared model,
//! [`contribution::standalone_accuracy`] measures contributions and
//! [`allocator::allocate`] picks one width per client.
//!
//! Training-time rewards: [`fedcore::run_with_rewards`] adjusts each client's width
//! every round from its assessed contribution.
//!
//! [`pipeline::run`] wires everything to a [`config::ExperimentConfig`].

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod config;
pub mod contribution;
pub mod error;
pub mod fedcore;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod seed;
pub mod slimnet;
pub mod tensor;
pub mod train;

pub use allocator::{AllocationProblem, AllocationRow, AnnealSchedule, WidthProfile};
pub use config::{ExperimentConfig, RunMode};
pub use contribution::{Assess, ContributionMethod, ContributionVector};
pub use error::{Error, Result};
pub use fedcore::{ClientState, EngineConfig, RoundRecord};
pub use metrics::MetricReport;
pub use partition::{Dataset, PartitionKind, PartitionSpec};
pub use slimnet::{ModelSpec, SlimmableModel, WidthGrid};
pub use tensor::Tensor2;
