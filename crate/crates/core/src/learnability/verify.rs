use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{TaskBundle, ThreadId};
use crate::engine::{derive_seed, run, SimParams, ThreadStatus, Trace};
use crate::error::{Error, Result};
use crate::scheduler::{StrategyConfig, BUDGET_TOLERANCE};

use super::metrics::thread_throughput;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    pub eta: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub replicates: usize,
}

impl VerifyParams {
    pub fn new(eta: f64, kappa: f64, epsilon: f64, delta: f64) -> Self {
        Self {
            eta,
            kappa,
            epsilon,
            delta,
            replicates: 1,
        }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Usage(what.to_string()));
        if !(0.0..=1.0).contains(&self.eta) {
            return bad("eta must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return bad("kappa must lie in [0, 1]");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Pass,
    Fail,
    /// No model was delivered, so the error condition was never checked.
    NotEvaluated,
}

impl Condition {
    fn merge(self, other: Condition) -> Condition {
        use Condition::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Pass, _) | (_, Pass) => Pass,
            _ => NotEvaluated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadCheck {
    pub id: ThreadId,
    /// `s_k <= d_k`.
    pub deadline: Condition,
    /// Final true error within epsilon.
    pub error: Condition,
    /// Share of replicates in which the thread succeeded.
    pub success_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub learnable: bool,
    pub achieved_kappa: f64,
    /// Per-slot budget audit against `eta` over every thread.
    pub budget_ok: bool,
    pub threads: Vec<ThreadCheck>,
    pub confidence_fraction: f64,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<f64>>>,
}

impl Verdict {
    /// Ids flagged on the deadline condition.
    pub fn deadline_violations(&self) -> Vec<ThreadId> {
        self.threads
            .iter()
            .filter(|c| c.deadline == Condition::Fail)
            .map(|c| c.id)
            .collect()
    }

    /// Ids flagged on the error condition.
    pub fn error_violations(&self) -> Vec<ThreadId> {
        self.threads
            .iter()
            .filter(|c| c.error == Condition::Fail)
            .map(|c| c.id)
            .collect()
    }
}

/// Whether `successes` out of `k` threads meets `|I_succ| >= kappa * K`.
pub(crate) fn meets_kappa(successes: usize, k: usize, kappa: f64) -> bool {
    successes as f64 + 1e-9 >= kappa * k as f64
}

fn budget_ok(trace: &Trace, eta: f64) -> bool {
    trace
        .slots
        .iter()
        .all(|s| s.allocation.total() <= eta + BUDGET_TOLERANCE)
}

/// Deterministic check of one trace at `(eta, kappa)`.
pub fn verify(trace: &Trace, p: &VerifyParams) -> Result<Verdict> {
    p.check()?;
    if (trace.params.epsilon - p.epsilon).abs() > 1e-12 {
        return Err(Error::Usage(format!(
            "trace was run at epsilon {} but verification asks for {}",
            trace.params.epsilon, p.epsilon
        )));
    }
    let budget_ok = budget_ok(trace, p.eta);
    let threads: Vec<ThreadCheck> = trace
        .outcomes
        .iter()
        .map(|o| {
            let (deadline, error) = match o.status {
                ThreadStatus::Success => (Condition::Pass, Condition::Pass),
                ThreadStatus::FailDeadline => (Condition::Fail, Condition::NotEvaluated),
                ThreadStatus::FailError => (Condition::Pass, Condition::Fail),
            };
            ThreadCheck {
                id: o.id,
                deadline,
                error,
                success_fraction: if o.status.is_success() { 1.0 } else { 0.0 },
            }
        })
        .collect();
    let successes = trace.succeeded().len();
    let passes = budget_ok && meets_kappa(successes, trace.thread_count(), p.kappa);
    Ok(Verdict {
        learnable: passes,
        achieved_kappa: thread_throughput(trace),
        budget_ok,
        threads,
        confidence_fraction: if passes { 1.0 } else { 0.0 },
        replicates: 1,
        witness: None,
    })
}

/// Monte-Carlo check: runs `p.replicates` simulations and accepts when the
/// fraction of passing replicates is at least `1 - delta`.
///
/// Replicate 0 uses `seed` itself and replicate `r` uses
/// [`derive_seed`]`(seed, r)`, so a single replicate is exactly one run.
pub fn verify_stochastic(
    bundle: &TaskBundle,
    strategy: &StrategyConfig,
    p: &VerifyParams,
    seed: u64,
) -> Result<Verdict> {
    p.check()?;
    let verdicts: Vec<Verdict> = (0..p.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let params = SimParams {
                eta_cap: p.eta,
                epsilon: p.epsilon,
                seed: if r == 0 { seed } else { derive_seed(seed, r) },
                record_observed: false,
            };
            let trace = run(bundle, strategy, &params)?;
            verify(&trace, p)
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(&verdicts, p))
}

fn aggregate(verdicts: &[Verdict], p: &VerifyParams) -> Verdict {
    let n = verdicts.len() as f64;
    let passes = verdicts.iter().filter(|v| v.learnable).count();
    let confidence = passes as f64 / n;
    let mut threads = verdicts[0].threads.clone();
    for v in &verdicts[1..] {
        for (acc, c) in threads.iter_mut().zip(&v.threads) {
            acc.deadline = acc.deadline.merge(c.deadline);
            acc.error = acc.error.merge(c.error);
            acc.success_fraction += c.success_fraction;
        }
    }
    for c in &mut threads {
        c.success_fraction /= n;
    }
    Verdict {
        learnable: confidence + 1e-12 >= 1.0 - p.delta,
        achieved_kappa: verdicts.iter().map(|v| v.achieved_kappa).sum::<f64>() / n,
        budget_ok: verdicts.iter().all(|v| v.budget_ok),
        threads,
        confidence_fraction: confidence,
        replicates: verdicts.len(),
        witness: None,
    }
}
