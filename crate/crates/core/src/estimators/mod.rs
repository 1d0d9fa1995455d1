//! The six outage-probability estimators.
//!
//! Every estimator returns an [`EstimateResult`] whose `var_hat` is the
//! variance of one sample of the estimator, so `var_hat / samples` is the
//! variance of `p_hat`. Sample loops run through an [`Executor`]; results
//! depend on the seed but never on the worker count.
//!
//! [`Executor`]: crate::exec::Executor

mod ce;
mod et;
mod mls;
mod nmc;
mod pis;
mod uis;

use std::time::Instant;

use serde::Serialize;

pub use ce::{ce_update, estimate_ce, fit_scaled_ncx2, CeFit, CeOptions, CeParams};
pub use et::estimate_et;
pub use mls::{estimate_mls, mls_pilot_levels, MlsOptions, MlsSchedule, PilotOptions};
pub use nmc::estimate_nmc;
pub use pis::{estimate_pis, estimate_pis_with, PartitionBlock, PartitionPlan};
pub use uis::estimate_uis;

use crate::samplers::{MellBound, RejectionStats};

/// Per-method detail that does not fit the common result columns.
#[derive(Debug, Clone, Default, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostics {
    #[default]
    None,
    Nmc {
        hits: u64,
    },
    Uis {
        ell1: f64,
        hit_rate: f64,
    },
    Pis {
        ell2: f64,
        hit_rate: f64,
        plan: PartitionPlan,
        bounds: Vec<MellBound>,
        rejection: RejectionStats,
    },
    Et {
        hit_rate: f64,
    },
    Ce {
        trace: Vec<CeParams>,
        hit_rate: f64,
    },
    Mls {
        schedule: MlsSchedule,
        replications: usize,
        zero_replications: usize,
        replication_estimates: Vec<f64>,
    },
}

/// Wall-clock stopwatch for the sampling phase.
pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub(crate) fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub(crate) fn check_samples(samples: u64) -> crate::Result<()> {
    if samples == 0 {
        return Err(crate::Error::InvalidConfig(
            "sample count must be at least 1".into(),
        ));
    }
    Ok(())
}
