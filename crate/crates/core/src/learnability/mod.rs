//! Throughput metrics, learnability verdicts and the exhaustive oracle.

mod metrics;
mod oracle;
mod verify;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{
    average_error, data_throughput, data_throughput_series, thread_throughput,
    weighted_thread_throughput, DataThroughput,
};
pub use oracle::{oracle_max_kappa, oracle_max_kappa_with_limits, OracleLimits, OracleResult};
pub use verify::{verify, verify_stochastic, Condition, ThreadCheck, Verdict, VerifyParams};

use crate::bundle::TaskBundle;
use crate::engine::{run, SimParams};
use crate::error::{Error, Result};
use crate::scheduler::StrategyConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum FrontierSource {
    Strategy(StrategyConfig),
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub eta: f64,
    pub kappa: f64,
}

/// Thread throughput reached at each data-throughput cap in `grid`.
///
/// With a quantum, strategies are quantized to the same `eta / quantum`
/// grid the oracle searches; the oracle requires one.
pub fn frontier(
    bundle: &TaskBundle,
    source: &FrontierSource,
    grid: &[f64],
    epsilon: f64,
    quantum: Option<u32>,
    seed: u64,
) -> Result<Vec<FrontierPoint>> {
    if grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::Usage("eta grid values must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("eta grid must be ascending".into()));
    }
    grid.par_iter()
        .map(|&eta| {
            let kappa = match source {
                FrontierSource::Oracle => {
                    let q = quantum.ok_or_else(|| {
                        Error::Usage("the oracle frontier needs a quantum".into())
                    })?;
                    oracle_max_kappa(bundle, eta, epsilon, q)?.kappa_star
                }
                FrontierSource::Strategy(s) => {
                    let s = match quantum {
                        Some(q) => s.clone().with_quantum(Some(q)),
                        None => s.clone(),
                    };
                    let params = SimParams::new(eta, epsilon).with_seed(seed);
                    thread_throughput(&run(bundle, &s, &params)?)
                }
            };
            Ok(FrontierPoint { eta, kappa })
        })
        .collect()
}
