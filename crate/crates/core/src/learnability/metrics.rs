use serde::{Deserialize, Serialize};

use crate::bundle::TaskBundle;
use crate::engine::Trace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataThroughput {
    pub timeslot: usize,
    pub value: f64,
    /// Set when nothing was received and the ratio is vacuously 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Share of the data received at `t` that was actually processed.
pub fn data_throughput(trace: &Trace, t: usize) -> Result<DataThroughput> {
    let slot = trace
        .slot(t)
        .ok_or_else(|| Error::Usage(format!("timeslot {t} outside 1..={}", trace.horizon())))?;
    if slot.received <= 0.0 {
        return Ok(DataThroughput {
            timeslot: t,
            value: 1.0,
            warning: Some(format!(
                "timeslot {t}: no data received, throughput taken as 1"
            )),
        });
    }
    Ok(DataThroughput {
        timeslot: t,
        value: (slot.processed() / slot.received).clamp(0.0, 1.0),
        warning: None,
    })
}

pub fn data_throughput_series(trace: &Trace) -> Vec<DataThroughput> {
    (1..=trace.horizon())
        .map(|t| data_throughput(trace, t).expect("t within horizon"))
        .collect()
}

/// `|I_succ| / K`, or 1 for an empty bundle.
pub fn thread_throughput(trace: &Trace) -> f64 {
    let k = trace.thread_count();
    if k == 0 {
        return 1.0;
    }
    trace.succeeded().len() as f64 / k as f64
}

/// Importance-weighted share of successful threads, weights taken from the
/// bundle the trace was produced from.
pub fn weighted_thread_throughput(trace: &Trace, bundle: &TaskBundle) -> Result<f64> {
    if bundle.len() != trace.thread_count() {
        return Err(Error::Usage(format!(
            "bundle has {} threads, trace has {}",
            bundle.len(),
            trace.thread_count()
        )));
    }
    let total: f64 = bundle.threads.iter().map(|t| t.weight).sum();
    if bundle.threads.iter().any(|t| t.weight < 0.0) || total <= 0.0 {
        return Err(Error::Config(
            "thread weights must be nonnegative and not all zero".into(),
        ));
    }
    let won: f64 = trace
        .outcomes
        .iter()
        .filter(|o| o.status.is_success())
        .map(|o| bundle.threads[o.id as usize - 1].weight)
        .sum();
    Ok(won / total)
}

/// Mean final true error over all threads.
pub fn average_error(trace: &Trace) -> Result<f64> {
    if trace.outcomes.is_empty() {
        return Err(Error::Usage(
            "average error of an empty bundle is undefined".into(),
        ));
    }
    let sum: f64 = trace.outcomes.iter().map(|o| o.final_true_error).sum();
    Ok(sum / trace.outcomes.len() as f64)
}
