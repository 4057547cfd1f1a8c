//! Discrete-time execution of a strategy over a bundle.
//!
//! Each timeslot runs, in order: build the view, allocate, process data,
//! record errors, completion check, deadline check. A thread that reaches
//! the target error at its deadline slot succeeds.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{alive_set, AllocationRow, TaskBundle, ThreadId};
use crate::error::{Error, Result};
use crate::learnability::oracle_max_kappa;
use crate::scheduler::{
    allocate, Observation, SchedulerView, StrategyConfig, ThreadView, BUDGET_TOLERANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub eta_cap: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub record_observed: bool,
}

fn default_true() -> bool {
    true
}

impl SimParams {
    pub fn new(eta_cap: f64, epsilon: f64) -> Self {
        Self {
            eta_cap,
            epsilon,
            seed: 0,
            record_observed: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_cap) {
            return Err(Error::Config(format!(
                "eta {} outside [0, 1]",
                self.eta_cap
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon {} outside (0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThreadStatus {
    Success,
    /// Still being learned when its deadline arrived.
    FailDeadline,
    /// Learning had stopped by the deadline with the error above target.
    FailError,
}

impl ThreadStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ThreadStatus::Success => "success",
            ThreadStatus::FailDeadline => "fail-deadline",
            ThreadStatus::FailError => "fail-error",
        }
    }

    pub fn is_success(self) -> bool {
        self == ThreadStatus::Success
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreadOutcome {
    pub id: ThreadId,
    pub status: ThreadStatus,
    /// Completion timeslot `s_k`; set for successes only.
    pub switching_time: Option<usize>,
    /// Timeslot at which the outcome was decided.
    pub decided_at: usize,
    pub final_true_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreadSlot {
    pub thread_id: ThreadId,
    pub fraction: f64,
    pub granted_units: f64,
    pub processed_units: f64,
    pub cumulative_units: f64,
    pub true_error: f64,
    pub observed_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotRecord {
    pub timeslot: usize,
    pub capacity: f64,
    /// Data received this slot: the capacity, or the summed arrival caps
    /// when every thread in the formal alive set has one.
    pub received: f64,
    pub allocation: AllocationRow,
    /// One entry per effectively alive thread, by id.
    pub threads: Vec<ThreadSlot>,
}

impl SlotRecord {
    pub fn processed(&self) -> f64 {
        self.threads.iter().map(|t| t.processed_units).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    pub bundle_hash: String,
    pub params: SimParams,
    pub slots: Vec<SlotRecord>,
    /// One outcome per thread, by id.
    pub outcomes: Vec<ThreadOutcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    pub fn thread_count(&self) -> usize {
        self.outcomes.len()
    }

    pub fn slot(&self, t: usize) -> Option<&SlotRecord> {
        t.checked_sub(1).and_then(|i| self.slots.get(i))
    }

    pub fn outcome(&self, id: ThreadId) -> Option<&ThreadOutcome> {
        self.outcomes.iter().find(|o| o.id == id)
    }

    pub fn succeeded(&self) -> Vec<ThreadId> {
        self.outcomes
            .iter()
            .filter(|o| o.status.is_success())
            .map(|o| o.id)
            .collect()
    }

    /// Threads that were still competing for resources during slot `t`.
    pub fn effective_alive(&self, t: usize) -> Vec<ThreadId> {
        self.slot(t)
            .map(|s| s.threads.iter().map(|th| th.thread_id).collect())
            .unwrap_or_default()
    }

    /// `matrix[t - 1][k - 1]` of recorded fractions, suitable for a scripted
    /// replay.
    pub fn allocation_matrix(&self) -> Vec<Vec<f64>> {
        let k = self.thread_count();
        self.slots
            .iter()
            .map(|s| {
                let mut row = vec![0.0; k];
                for (&id, &f) in &s.allocation.fractions {
                    row[id as usize - 1] = f;
                }
                row
            })
            .collect()
    }

    /// Per-slot `(timeslot, id, cumulative)` ledger.
    pub fn processed_ledger(&self) -> Vec<(usize, ThreadId, f64, f64)> {
        self.slots
            .iter()
            .flat_map(|s| {
                s.threads.iter().map(move |th| {
                    (
                        s.timeslot,
                        th.thread_id,
                        th.processed_units,
                        th.cumulative_units,
                    )
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct ThreadState {
    cumulative: f64,
    history: Vec<Observation>,
    outcome: Option<ThreadOutcome>,
}

/// Mutable state of one run between timeslots.
#[derive(Debug, Clone)]
pub struct SimState<'a> {
    bundle: &'a TaskBundle,
    params: SimParams,
    next: usize,
    threads: Vec<ThreadState>,
    rng: ChaCha8Rng,
    slots: Vec<SlotRecord>,
    warnings: Vec<String>,
}

impl<'a> SimState<'a> {
    pub fn new(bundle: &'a TaskBundle, params: SimParams) -> Result<Self> {
        bundle.ensure_valid()?;
        params.check()?;
        Ok(Self {
            bundle,
            params,
            next: 1,
            threads: vec![
                ThreadState {
                    cumulative: 0.0,
                    history: Vec::new(),
                    outcome: None,
                };
                bundle.len()
            ],
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            slots: Vec::with_capacity(bundle.horizon),
            warnings: Vec::new(),
        })
    }

    /// The timeslot the next [`step`](Self::step) will execute.
    pub fn timeslot(&self) -> usize {
        self.next
    }

    pub fn is_finished(&self) -> bool {
        self.next > self.bundle.horizon
    }

    pub fn cumulative(&self, id: ThreadId) -> f64 {
        self.threads[id as usize - 1].cumulative
    }

    pub fn outcome(&self, id: ThreadId) -> Option<&ThreadOutcome> {
        self.threads[id as usize - 1].outcome.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Begun, not past deadline, not yet decided.
    pub fn effective_alive(&self) -> Vec<ThreadId> {
        let t = self.next;
        self.bundle
            .threads
            .iter()
            .filter(|th| {
                th.lifespan_contains(t) && self.threads[th.id as usize - 1].outcome.is_none()
            })
            .map(|th| th.id)
            .collect()
    }

    pub fn view(&self) -> SchedulerView {
        let t = self.next;
        let threads = self
            .effective_alive()
            .into_iter()
            .map(|id| {
                let spec = &self.bundle.threads[id as usize - 1];
                let st = &self.threads[id as usize - 1];
                ThreadView {
                    id,
                    begin: spec.begin,
                    deadline: spec.deadline,
                    weight: spec.weight,
                    cumulative: st.cumulative,
                    history: st.history.clone(),
                }
            })
            .collect();
        SchedulerView {
            timeslot: t,
            eta_cap: self.params.eta_cap,
            capacity: self.bundle.resource_profile.capacity(t),
            epsilon: self.params.epsilon,
            total_threads: self.bundle.len(),
            threads,
        }
    }

    /// Applies one allocation row and advances to the next timeslot.
    ///
    /// Fractions for threads that are not effectively alive are dropped with
    /// a warning; rows over the cap or naming unknown threads are rejected.
    pub fn step(&mut self, row: &AllocationRow) -> Result<&SlotRecord> {
        let t = self.next;
        if self.is_finished() {
            return Err(Error::Usage(format!(
                "run already finished at horizon {}",
                self.bundle.horizon
            )));
        }
        if row.timeslot != t {
            return Err(Error::Usage(format!(
                "allocation row is for timeslot {} but the run is at {t}",
                row.timeslot
            )));
        }
        for (&id, &f) in &row.fractions {
            if self.bundle.thread(id).is_none() {
                return Err(Error::UnknownThread {
                    timeslot: t,
                    thread: id,
                });
            }
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::Config(format!(
                    "fraction {f} for thread {id} at timeslot {t} must be finite and >= 0"
                )));
            }
        }
        let total = row.total();
        if total > self.params.eta_cap + BUDGET_TOLERANCE {
            return Err(Error::BudgetViolation {
                timeslot: t,
                allocated: total,
                cap: self.params.eta_cap,
            });
        }

        let alive = self.effective_alive();
        for (&id, &f) in &row.fractions {
            if f > 0.0 && !alive.contains(&id) {
                self.warnings.push(format!(
                    "timeslot {t}: ignored fraction {f} for thread {id}, which is not effectively alive"
                ));
            }
        }

        let capacity = self.bundle.resource_profile.capacity(t);
        let epsilon = self.params.epsilon;
        let mut recorded = AllocationRow::new(t);
        let mut entries = Vec::with_capacity(alive.len());
        for id in alive {
            let spec = &self.bundle.threads[id as usize - 1];
            let st = &mut self.threads[id as usize - 1];
            let fraction = row.fraction(id);
            let granted = fraction * capacity;
            let processed = granted.min(spec.arrival_at(t));
            st.cumulative += processed;
            let true_error = spec.curve.true_error(st.cumulative);
            let observed = spec.curve.observed_error(st.cumulative, &mut self.rng);
            st.history.push(Observation {
                timeslot: t,
                cumulative: st.cumulative,
                error: observed,
            });
            let status = if true_error <= epsilon {
                Some(ThreadStatus::Success)
            } else if t == spec.deadline {
                Some(if fraction > 0.0 {
                    ThreadStatus::FailDeadline
                } else {
                    ThreadStatus::FailError
                })
            } else {
                None
            };
            if let Some(status) = status {
                st.outcome = Some(ThreadOutcome {
                    id,
                    status,
                    switching_time: status.is_success().then_some(t),
                    decided_at: t,
                    final_true_error: true_error,
                });
            }
            recorded.set(id, fraction);
            entries.push(ThreadSlot {
                thread_id: id,
                fraction,
                granted_units: granted,
                processed_units: processed,
                cumulative_units: st.cumulative,
                true_error,
                observed_error: self.params.record_observed.then_some(observed),
            });
        }

        let formal = alive_set(self.bundle, t)?;
        let all_capped = !formal.is_empty()
            && formal
                .iter()
                .all(|&id| self.bundle.threads[id as usize - 1].arrival_cap.is_some());
        let received = if all_capped {
            formal
                .iter()
                .map(|&id| self.bundle.threads[id as usize - 1].arrival_at(t))
                .sum()
        } else {
            capacity
        };

        self.slots.push(SlotRecord {
            timeslot: t,
            capacity,
            received,
            allocation: recorded,
            threads: entries,
        });
        self.next += 1;
        Ok(self.slots.last().expect("just pushed"))
    }

    pub fn into_trace(self) -> Result<Trace> {
        if !self.is_finished() {
            return Err(Error::Usage(format!(
                "run stopped at timeslot {} before horizon {}",
                self.next, self.bundle.horizon
            )));
        }
        let outcomes = self
            .threads
            .into_iter()
            .map(|st| st.outcome.expect("every thread is decided by its deadline"))
            .collect();
        Ok(Trace {
            bundle_hash: self.bundle.content_hash(),
            params: self.params,
            slots: self.slots,
            outcomes,
            warnings: self.warnings,
        })
    }
}

/// Turns an oracle request into the scripted replay of its witness and
/// checks script dimensions against the bundle.
pub fn resolve_strategy(
    bundle: &TaskBundle,
    strategy: &StrategyConfig,
    params: &SimParams,
) -> Result<StrategyConfig> {
    strategy.check()?;
    match strategy {
        StrategyConfig::Oracle { quantum } => {
            let result = oracle_max_kappa(bundle, params.eta_cap, params.epsilon, *quantum)?;
            Ok(StrategyConfig::scripted(result.witness))
        }
        StrategyConfig::Scripted { matrix, .. } => {
            if matrix.len() < bundle.horizon {
                return Err(Error::Config(format!(
                    "scripted matrix has {} rows, horizon is {}",
                    matrix.len(),
                    bundle.horizon
                )));
            }
            Ok(strategy.clone())
        }
        _ => Ok(strategy.clone()),
    }
}

/// Runs `strategy` over `bundle` from timeslot 1 to the horizon.
pub fn run(bundle: &TaskBundle, strategy: &StrategyConfig, params: &SimParams) -> Result<Trace> {
    let mut state = SimState::new(bundle, *params)?;
    let strategy = resolve_strategy(bundle, strategy, params)?;
    while !state.is_finished() {
        let row = allocate(&strategy, &state.view())?;
        state.step(&row)?;
    }
    state.into_trace()
}

/// [`run`] plus its wall-clock duration. Timing is kept out of the trace so
/// that traces stay byte-reproducible.
pub fn run_timed(
    bundle: &TaskBundle,
    strategy: &StrategyConfig,
    params: &SimParams,
) -> Result<(Trace, Duration)> {
    let start = Instant::now();
    let trace = run(bundle, strategy, params)?;
    Ok((trace, start.elapsed()))
}

/// Seed for replicate `index` of a run seeded with `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
