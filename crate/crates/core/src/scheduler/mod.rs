//! Scheduling strategies: map the observable learning status at a timeslot
//! to per-thread fractions of that slot's capacity.
//!
//! Strategies see only a [`SchedulerView`], which carries lifespans,
//! cumulative data and noisy error observations but never curve parameters.
//! The oracle is the one exception: it is resolved offline against the full
//! bundle (see [`crate::learnability::oracle_max_kappa`]) and replayed as a
//! script.

mod signals;

use serde::{Deserialize, Serialize};

pub use signals::{detect_plateau, estimate_marginal_gain};

use crate::bundle::{AllocationRow, ThreadId};
use crate::error::{Error, Result};

/// Slack allowed on `sum(fractions) <= eta`.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub timeslot: usize,
    /// Cumulative data processed when the observation was taken.
    pub cumulative: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadView {
    pub id: ThreadId,
    pub begin: usize,
    pub deadline: usize,
    pub weight: f64,
    pub cumulative: f64,
    /// Observed errors, strictly increasing in timeslot.
    pub history: Vec<Observation>,
}

impl ThreadView {
    fn errors(&self) -> Vec<f64> {
        self.history.iter().map(|o| o.error).collect()
    }

    fn timed_errors(&self) -> Vec<(usize, f64)> {
        self.history.iter().map(|o| (o.timeslot, o.error)).collect()
    }
}

/// Everything a strategy may look at when deciding timeslot `timeslot`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerView {
    pub timeslot: usize,
    pub eta_cap: f64,
    pub capacity: f64,
    /// Target error level the threads are learning towards.
    pub epsilon: f64,
    /// Number of threads in the whole bundle.
    pub total_threads: usize,
    /// Effectively alive threads (begun, not past deadline, not decided),
    /// ordered by id.
    pub threads: Vec<ThreadView>,
}

fn default_window() -> usize {
    5
}
fn default_min_rel_drop() -> f64 {
    0.01
}
fn default_step() -> f64 {
    0.25
}
fn default_hopeless_factor() -> f64 {
    2.0
}
fn default_lookback() -> usize {
    3
}

/// Parameters of the plateau-aware adaptive strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveParams {
    /// Plateau detection window, in observations.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_min_rel_drop")]
    pub min_rel_drop: f64,
    /// Fraction of the cap moved away from each plateaued thread per slot.
    #[serde(default = "default_step")]
    pub step: f64,
    /// A thread is abandoned once the per-slot drop it still needs exceeds
    /// this multiple of what it has shown it can achieve.
    #[serde(default = "default_hopeless_factor")]
    pub hopeless_factor: f64,
    /// Observations used for the marginal-gain estimate.
    #[serde(default = "default_lookback")]
    pub lookback: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<u32>,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            window: default_window(),
            min_rel_drop: default_min_rel_drop(),
            step: default_step(),
            hopeless_factor: default_hopeless_factor(),
            lookback: default_lookback(),
            quantum: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrategyConfig {
    /// Even split of the cap over effectively alive threads.
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantum: Option<u32>,
    },
    /// Fixed per-thread fractions for the whole lifespan, scaled down
    /// proportionally when the alive threads' shares exceed the cap.
    /// Defaults to `eta / K` for every thread.
    ExclusiveStatic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shares: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantum: Option<u32>,
    },
    /// Earliest deadline first, each thread asking for what a linear
    /// extrapolation of its observed errors says it needs.
    EdfGreedy {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantum: Option<u32>,
    },
    Adaptive(AdaptiveParams),
    /// Replays `matrix[t - 1][k - 1]` verbatim.
    Scripted {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantum: Option<u32>,
    },
    /// Exhaustive-search witness on the `eta / quantum` grid.
    Oracle {
        quantum: u32,
    },
}

impl StrategyConfig {
    pub fn uniform() -> Self {
        StrategyConfig::Uniform { quantum: None }
    }

    pub fn adaptive() -> Self {
        StrategyConfig::Adaptive(AdaptiveParams::default())
    }

    pub fn edf_greedy() -> Self {
        StrategyConfig::EdfGreedy { quantum: None }
    }

    pub fn exclusive_static() -> Self {
        StrategyConfig::ExclusiveStatic {
            shares: None,
            quantum: None,
        }
    }

    pub fn scripted(matrix: Vec<Vec<f64>>) -> Self {
        StrategyConfig::Scripted {
            matrix,
            quantum: None,
        }
    }

    /// Built-in strategy with default parameters, by kind name.
    pub fn from_kind(name: &str) -> Option<Self> {
        Some(match name {
            "uniform" => Self::uniform(),
            "adaptive" => Self::adaptive(),
            "edf-greedy" => Self::edf_greedy(),
            "exclusive-static" => Self::exclusive_static(),
            _ => return None,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StrategyConfig::Uniform { .. } => "uniform",
            StrategyConfig::ExclusiveStatic { .. } => "exclusive-static",
            StrategyConfig::EdfGreedy { .. } => "edf-greedy",
            StrategyConfig::Adaptive(_) => "adaptive",
            StrategyConfig::Scripted { .. } => "scripted",
            StrategyConfig::Oracle { .. } => "oracle",
        }
    }

    pub fn quantum(&self) -> Option<u32> {
        match self {
            StrategyConfig::Uniform { quantum }
            | StrategyConfig::ExclusiveStatic { quantum, .. }
            | StrategyConfig::EdfGreedy { quantum }
            | StrategyConfig::Scripted { quantum, .. } => *quantum,
            StrategyConfig::Adaptive(p) => p.quantum,
            StrategyConfig::Oracle { quantum } => Some(*quantum),
        }
    }

    pub fn with_quantum(mut self, q: Option<u32>) -> Self {
        match &mut self {
            StrategyConfig::Uniform { quantum }
            | StrategyConfig::ExclusiveStatic { quantum, .. }
            | StrategyConfig::EdfGreedy { quantum }
            | StrategyConfig::Scripted { quantum, .. } => *quantum = q,
            StrategyConfig::Adaptive(p) => p.quantum = q,
            StrategyConfig::Oracle { quantum } => {
                if let Some(q) = q {
                    *quantum = q;
                }
            }
        }
        self
    }

    /// Checks parameter ranges that do not depend on a bundle.
    pub fn check(&self) -> Result<()> {
        if self.quantum() == Some(0) {
            return Err(Error::Config("quantum must be a positive integer".into()));
        }
        match self {
            StrategyConfig::Adaptive(p) => {
                if p.window < 2 {
                    return Err(Error::Config("adaptive.window must be >= 2".into()));
                }
                if p.lookback < 2 {
                    return Err(Error::Config("adaptive.lookback must be >= 2".into()));
                }
                if !(0.0..=1.0).contains(&p.step) {
                    return Err(Error::Config("adaptive.step must lie in [0, 1]".into()));
                }
                if !(p.min_rel_drop.is_finite() && p.min_rel_drop >= 0.0) {
                    return Err(Error::Config("adaptive.min_rel_drop must be >= 0".into()));
                }
                if !(p.hopeless_factor.is_finite() && p.hopeless_factor > 0.0) {
                    return Err(Error::Config("adaptive.hopeless_factor must be > 0".into()));
                }
            }
            StrategyConfig::ExclusiveStatic {
                shares: Some(shares),
                ..
            } => {
                if shares.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::Config(
                        "exclusive-static shares must be finite and >= 0".into(),
                    ));
                }
            }
            StrategyConfig::Scripted { matrix, .. }
                if matrix
                    .iter()
                    .flatten()
                    .any(|f| !(f.is_finite() && *f >= 0.0)) =>
            {
                return Err(Error::Config(
                    "scripted fractions must be finite and >= 0".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Fraction `q * eta / quanta`, the single place grid fractions are formed
/// so that strategies and the oracle produce bit-identical values.
pub fn grid_fraction(q: u32, eta: f64, quanta: u32) -> f64 {
    q as f64 * eta / quanta as f64
}

/// Rounds each fraction down to the `eta / quanta` grid, then hands the
/// quanta lost to rounding back by largest remainder (lowest id on ties),
/// never exceeding the original total.
pub fn quantize(row: &AllocationRow, eta: f64, quanta: u32) -> AllocationRow {
    let mut out = AllocationRow::new(row.timeslot);
    if eta <= 0.0 {
        for &id in row.fractions.keys() {
            out.set(id, 0.0);
        }
        return out;
    }
    let unit = eta / quanta as f64;
    let mut floors: Vec<(ThreadId, u32, f64)> = row
        .fractions
        .iter()
        .map(|(&id, &f)| {
            let x = f / unit;
            let q = (x + 1e-9).floor().max(0.0);
            (id, q as u32, (x - q).max(0.0))
        })
        .collect();
    let total_quanta = ((row.total() / unit + 1e-9).floor() as u32).min(quanta);
    let used: u32 = floors.iter().map(|f| f.1).sum();
    let mut spare = total_quanta.saturating_sub(used);
    if spare > 0 {
        let mut order: Vec<usize> = (0..floors.len()).filter(|&i| floors[i].2 > 1e-9).collect();
        order.sort_by(|&a, &b| {
            floors[b]
                .2
                .total_cmp(&floors[a].2)
                .then(floors[a].0.cmp(&floors[b].0))
        });
        for i in order {
            if spare == 0 {
                break;
            }
            floors[i].1 += 1;
            spare -= 1;
        }
    }
    for (id, q, _) in floors {
        out.set(id, grid_fraction(q, eta, quanta));
    }
    out
}

/// Computes the allocation row for `view.timeslot`.
///
/// The row names only effectively alive threads, is nonnegative, sums to at
/// most `eta_cap` (up to [`BUDGET_TOLERANCE`]) and is a pure function of
/// `(strategy, view)`.
pub fn allocate(strategy: &StrategyConfig, view: &SchedulerView) -> Result<AllocationRow> {
    strategy.check()?;
    let eta = view.eta_cap;
    let mut row = AllocationRow::new(view.timeslot);
    if view.threads.is_empty() {
        return Ok(row);
    }
    match strategy {
        StrategyConfig::Uniform { .. } => {
            let share = eta / view.threads.len() as f64;
            for th in &view.threads {
                row.set(th.id, share);
            }
        }
        StrategyConfig::ExclusiveStatic { shares, .. } => {
            let default = eta / view.total_threads.max(1) as f64;
            let wanted: Vec<(ThreadId, f64)> = view
                .threads
                .iter()
                .map(|th| {
                    let s = shares
                        .as_ref()
                        .and_then(|v| v.get(th.id as usize - 1).copied())
                        .unwrap_or(default);
                    (th.id, s)
                })
                .collect();
            let total: f64 = wanted.iter().map(|w| w.1).sum();
            let scale = if total > eta { eta / total } else { 1.0 };
            for (id, s) in wanted {
                row.set(id, s * scale);
            }
        }
        StrategyConfig::EdfGreedy { .. } => edf_greedy(view, &mut row),
        StrategyConfig::Adaptive(params) => adaptive(params, view, &mut row),
        StrategyConfig::Scripted { matrix, .. } => {
            let script = matrix.get(view.timeslot - 1).ok_or_else(|| {
                Error::Config(format!(
                    "scripted matrix has no row for timeslot {}",
                    view.timeslot
                ))
            })?;
            if script.len() != view.total_threads {
                return Err(Error::Config(format!(
                    "scripted row for timeslot {} has {} columns, expected {}",
                    view.timeslot,
                    script.len(),
                    view.total_threads
                )));
            }
            for th in &view.threads {
                row.set(th.id, script[th.id as usize - 1]);
            }
        }
        StrategyConfig::Oracle { .. } => {
            return Err(Error::Config(
                "oracle strategy must be resolved against its bundle before allocation".into(),
            ))
        }
    }
    Ok(match strategy.quantum() {
        Some(q) => quantize(&row, eta, q),
        None => row,
    })
}

/// Per-unit error slope from the secant between the earliest observation
/// and the latest one. A lone observation is paired with the worst-case
/// starting point `(0 data, error 1)`.
fn secant_slope(th: &ThreadView) -> Option<f64> {
    let last = th.history.last()?;
    let (n0, e0) = if th.history.len() >= 2 {
        let first = th.history[0];
        (first.cumulative, first.error)
    } else {
        (0.0, 1.0)
    };
    let dn = last.cumulative - n0;
    if dn <= 0.0 {
        return None;
    }
    let slope = (e0 - last.error) / dn;
    (slope > 0.0).then_some(slope)
}

fn edf_greedy(view: &SchedulerView, row: &mut AllocationRow) {
    let eta = view.eta_cap;
    let fallback = eta / view.threads.len() as f64;
    let mut order: Vec<&ThreadView> = view.threads.iter().collect();
    order.sort_by_key(|th| (th.deadline, th.id));
    let mut remaining = eta;
    for th in order {
        let request = match th.history.last() {
            None => fallback,
            Some(obs) if obs.error <= view.epsilon => 0.0,
            Some(obs) => match secant_slope(th) {
                None => fallback,
                Some(_) if view.capacity <= 0.0 => 0.0,
                Some(slope) => {
                    let slots_left = (th.deadline + 1 - view.timeslot) as f64;
                    let units = (obs.error - view.epsilon) / slope;
                    units / slots_left / view.capacity
                }
            },
        };
        let grant = request.min(remaining).max(0.0);
        remaining -= grant;
        row.set(th.id, grant);
    }
}

fn adaptive(p: &AdaptiveParams, view: &SchedulerView, row: &mut AllocationRow) {
    let eta = view.eta_cap;
    let hopeless = |th: &ThreadView| -> bool {
        if th.history.len() < p.window {
            return false;
        }
        let first = th.history[0];
        let last = th.history[th.history.len() - 1];
        if last.error <= view.epsilon {
            return false;
        }
        let slots_left = (th.deadline + 1 - view.timeslot) as f64;
        let required = (last.error - view.epsilon) / slots_left;
        let dn = last.cumulative - first.cumulative;
        let per_unit = if dn > 0.0 {
            ((first.error - last.error) / dn).max(0.0)
        } else {
            0.0
        };
        let achievable = per_unit * eta * view.capacity;
        required > p.hopeless_factor * achievable
    };

    let mut candidates: Vec<&ThreadView> = view.threads.iter().filter(|th| !hopeless(th)).collect();
    if candidates.is_empty() {
        candidates = view.threads.iter().collect();
    }
    for th in &view.threads {
        row.set(th.id, 0.0);
    }
    let base = eta / candidates.len() as f64;
    let plateaued: Vec<bool> = candidates
        .iter()
        .map(|th| detect_plateau(&th.errors(), p.window, p.min_rel_drop))
        .collect();

    let mut best: Option<(ThreadId, f64)> = None;
    for (th, &flat) in candidates.iter().zip(&plateaued) {
        if flat {
            continue;
        }
        let gain = estimate_marginal_gain(&th.timed_errors(), p.lookback) * th.weight;
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((th.id, gain));
        }
    }

    for th in &candidates {
        row.set(th.id, base);
    }
    if let Some((recipient, _)) = best {
        let give = (p.step * eta).min(base);
        let mut moved = 0.0;
        for (th, &flat) in candidates.iter().zip(&plateaued) {
            if flat {
                row.set(th.id, base - give);
                moved += give;
            }
        }
        row.set(recipient, base + moved);
    }
}
