//! Stable-throughput analysis of a cognitive radio network in which
//! secondary users (SUs) relay failed primary-user (PU) packets.
//!
//! The crate computes link success probabilities in closed form
//! ([`linkprob`]), assembles per-protocol branch gains ([`protocols`]),
//! reduces the per-packet signal flow graph to a throughput ([`sfg`]) and
//! derives system metrics ([`performance`]). [`oracle`] re-derives the link
//! probabilities numerically for validation.
//!
//! Formulas are generic over the scalar: [`scalar::Real`] for the
//! probability expressions and [`scalar::Field`] for the graph engine, which
//! also runs over exact rationals. The aliases below fix `f64`.

pub mod error;
pub mod linkprob;
pub mod model;
pub mod oracle;
pub mod performance;
pub mod protocols;
pub mod scalar;
pub mod sfg;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use model::{default_config, Protocol, Sensing};
pub use stats::SimEstimate;

pub type SystemConfig = model::SystemConfig<f64>;
pub type ChannelProfile = model::ChannelProfile<f64>;
pub type ThroughputReport = model::ThroughputReport<f64>;
pub type BranchGains = protocols::BranchGains<f64>;
pub type FlowGraph = sfg::FlowGraph<f64>;
pub type TransferValue = sfg::TransferValue<f64>;
pub type LinkTable = linkprob::LinkTable<f64>;
pub type RegionPoint = performance::RegionPoint<f64>;

/// Exact rational scalar for the flow-graph engine and sensing fusion.
pub type Rational = num_rational::Ratio<i128>;
