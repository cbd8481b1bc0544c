//! Slot-level Monte Carlo simulator of the PU queue, SU sensing and the
//! cooperative retransmission protocols.
//!
//! Every slot draws the same set of random numbers, from one deterministic
//! stream per (replication, entity, purpose), whether or not the protocol
//! uses them. Runs with different protocols or sensing modes but the same
//! seed therefore see identical channels and coins.

mod engine;
mod streams;

use serde::{Deserialize, Serialize};

use cocrn_core::SimEstimate;

pub use engine::{simulate, trace};

/// Run-length and seeding options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Slots per replication, warmup included.
    pub slots: u64,
    /// Leading slots excluded from statistics.
    pub warmup: u64,
    pub seed: u64,
    /// PU always backlogged: the departure rate is then the service rate.
    pub saturated_pu: bool,
    pub replications: u32,
    /// Batches per replication for batch-means standard errors.
    pub batches: u32,
    /// Let non-holding SUs that overhear an assisted retransmission join the
    /// holder set. Off by default, matching the analysis.
    pub join_mid_packet: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            slots: 1_000_000,
            warmup: 1_000,
            seed: 1,
            saturated_pu: true,
            replications: 4,
            batches: 20,
            join_mid_packet: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.slots == 0 {
            return Err("slots must be positive".into());
        }
        if self.warmup >= self.slots {
            return Err(format!(
                "warmup ({}) must be below slots ({})",
                self.warmup, self.slots
            ));
        }
        if self.replications == 0 {
            return Err("replications must be positive".into());
        }
        if self.batches == 0 || u64::from(self.batches) > self.slots - self.warmup {
            return Err("batches must be between 1 and the number of measured slots".into());
        }
        Ok(())
    }
}

/// Pooled estimates over all replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// PU departures per slot (the service rate when saturated).
    #[serde(rename = "mu_P_hat")]
    pub mu_p_hat: SimEstimate,
    /// Fraction of slots in which the PU has nothing to send.
    pub idle_frac: SimEstimate,
    /// Own-packet successes per slot of the tagged SU, any PU state.
    #[serde(rename = "mu_S_hat")]
    pub mu_s_hat: SimEstimate,
    /// As `mu_S_hat` but counting only slots with the PU idle.
    #[serde(rename = "mu_S_bound_hat")]
    pub mu_s_bound_hat: SimEstimate,
    /// Slots from arrival to acknowledgement, inclusive. With a saturated PU
    /// a packet "arrives" when its service starts.
    pub delay_hat: SimEstimate,
    /// Measured slots summed over replications.
    pub slots: u64,
    pub departures: u64,
}
