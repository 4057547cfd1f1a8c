//! Exact maximum thread throughput over quantized allocation matrices.
//!
//! Depth-first search over timeslots with memoization on the per-thread
//! state (cumulative data, or done / out of reach). Two reductions keep the
//! search small without changing the optimum:
//!
//! * A thread that cannot reach the target error even if it received the
//!   whole cap for the rest of its lifespan is marked out of reach and gets
//!   nothing. Feeding it cannot help anyone else.
//! * Every slot hands out all `Q` quanta. Success is monotone in a thread's
//!   cumulative data, so an allocation that leaves quanta idle is dominated
//!   by one that gives them to any alive thread.
//!
//! A node stops enumerating once it matches the number of threads still in
//! reach, which is an upper bound on what the subtree can achieve.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bundle::{TaskBundle, ThreadId};
use crate::error::{Error, Result};
use crate::scheduler::grid_fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_threads: usize,
    pub max_horizon: usize,
    pub max_quantum: u32,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_threads: 4,
            max_horizon: 6,
            max_quantum: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub kappa_star: f64,
    pub succeeded: Vec<ThreadId>,
    /// `witness[t - 1][k - 1]`, every entry a multiple of `eta / quantum`.
    pub witness: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Active(f64),
    Done,
    OutOfReach,
}

impl Slot {
    fn key(self) -> u64 {
        match self {
            Slot::Active(n) => n.to_bits(),
            Slot::Done => u64::MAX,
            Slot::OutOfReach => u64::MAX - 1,
        }
    }
}

struct Search<'a> {
    bundle: &'a TaskBundle,
    eta: f64,
    epsilon: f64,
    quanta: u32,
    /// `reach[k][t - 1]`: most data thread k can still take in from slot t
    /// through its deadline.
    reach: Vec<Vec<f64>>,
    memo: HashMap<(usize, Vec<u64>), (u32, Vec<u32>)>,
}

impl<'a> Search<'a> {
    fn new(bundle: &'a TaskBundle, eta: f64, epsilon: f64, quanta: u32) -> Self {
        let horizon = bundle.horizon;
        let reach = bundle
            .threads
            .iter()
            .map(|th| {
                let mut suffix = vec![0.0; horizon + 1];
                for t in (1..=horizon).rev() {
                    let here = if th.lifespan_contains(t) {
                        (eta * bundle.resource_profile.capacity(t)).min(th.arrival_at(t))
                    } else {
                        0.0
                    };
                    suffix[t - 1] = suffix[t] + here;
                }
                suffix
            })
            .collect();
        Self {
            bundle,
            eta,
            epsilon,
            quanta,
            reach,
            memo: HashMap::new(),
        }
    }

    /// Marks threads that can no longer reach epsilon.
    fn normalize(&self, t: usize, state: &mut [Slot]) {
        for (k, slot) in state.iter_mut().enumerate() {
            if let Slot::Active(n) = *slot {
                let th = &self.bundle.threads[k];
                let best = if t > th.deadline {
                    n
                } else {
                    // Slack covers summation-order rounding.
                    (n + self.reach[k][t - 1]) * (1.0 + 1e-12) + 1e-9
                };
                if t > th.deadline || th.curve.true_error(best) > self.epsilon {
                    *slot = Slot::OutOfReach;
                }
            }
        }
    }

    /// Applies a quanta vector at slot `t`; returns the new state and the
    /// number of threads completed in this slot.
    fn apply(&self, t: usize, state: &[Slot], quanta: &[u32]) -> (Vec<Slot>, u32) {
        let capacity = self.bundle.resource_profile.capacity(t);
        let mut next = state.to_vec();
        let mut done = 0;
        for (k, slot) in next.iter_mut().enumerate() {
            let th = &self.bundle.threads[k];
            let Slot::Active(n) = *slot else { continue };
            if !th.lifespan_contains(t) {
                continue;
            }
            let granted = grid_fraction(quanta[k], self.eta, self.quanta) * capacity;
            let n = n + granted.min(th.arrival_at(t));
            *slot = if th.curve.true_error(n) <= self.epsilon {
                done += 1;
                Slot::Done
            } else if t == th.deadline {
                Slot::OutOfReach
            } else {
                Slot::Active(n)
            };
        }
        (next, done)
    }

    fn solve(&mut self, t: usize, state: &[Slot]) -> u32 {
        if t > self.bundle.horizon {
            return 0;
        }
        let mut state = state.to_vec();
        self.normalize(t, &mut state);
        let key = (t, state.iter().map(|s| s.key()).collect::<Vec<_>>());
        if let Some((v, _)) = self.memo.get(&key) {
            return *v;
        }

        let in_reach = state
            .iter()
            .filter(|s| matches!(s, Slot::Active(_)))
            .count() as u32;
        let feedable: Vec<usize> = state
            .iter()
            .enumerate()
            .filter(|(k, s)| {
                matches!(s, Slot::Active(_)) && self.bundle.threads[*k].lifespan_contains(t)
            })
            .map(|(k, _)| k)
            .collect();

        let k = state.len();
        let mut best = (0u32, vec![0u32; k]);
        let mut first = true;
        for_each_composition(self.quanta, feedable.len(), &mut |parts| {
            if !first && best.0 >= in_reach {
                return false;
            }
            let mut quanta = vec![0u32; k];
            for (&idx, &q) in feedable.iter().zip(parts) {
                quanta[idx] = q;
            }
            let (next, done) = self.apply(t, &state, &quanta);
            let value = done + self.solve(t + 1, &next);
            if first || value > best.0 {
                best = (value, quanta);
                first = false;
            }
            true
        });
        let value = best.0;
        self.memo.insert(key, best);
        value
    }

    fn witness(&mut self) -> (Vec<Vec<f64>>, Vec<ThreadId>) {
        let k = self.bundle.len();
        let mut state = vec![Slot::Active(0.0); k];
        let mut matrix = Vec::with_capacity(self.bundle.horizon);
        for t in 1..=self.bundle.horizon {
            self.normalize(t, &mut state);
            let key = (t, state.iter().map(|s| s.key()).collect::<Vec<_>>());
            let quanta = self.memo.get(&key).expect("solved state").1.clone();
            matrix.push(
                quanta
                    .iter()
                    .map(|&q| grid_fraction(q, self.eta, self.quanta))
                    .collect(),
            );
            state = self.apply(t, &state, &quanta).0;
        }
        let succeeded = state
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Slot::Done))
            .map(|(i, _)| i as ThreadId + 1)
            .collect();
        (matrix, succeeded)
    }
}

/// Calls `visit` with every way of writing `total` as an ordered sum of
/// `parts` nonnegative integers; `visit` returns false to stop early. With
/// zero parts it is called once with an empty slice.
fn for_each_composition(total: u32, parts: usize, visit: &mut dyn FnMut(&[u32]) -> bool) {
    fn rec(
        remaining: u32,
        idx: usize,
        buf: &mut Vec<u32>,
        visit: &mut dyn FnMut(&[u32]) -> bool,
    ) -> bool {
        if idx + 1 == buf.len() {
            buf[idx] = remaining;
            return visit(buf);
        }
        for q in (0..=remaining).rev() {
            buf[idx] = q;
            if !rec(remaining - q, idx + 1, buf, visit) {
                return false;
            }
        }
        true
    }
    if parts == 0 {
        visit(&[]);
        return;
    }
    let mut buf = vec![0; parts];
    rec(total, 0, &mut buf, visit);
}

/// [`oracle_max_kappa_with_limits`] under the default size limits.
pub fn oracle_max_kappa(
    bundle: &TaskBundle,
    eta: f64,
    epsilon: f64,
    quantum: u32,
) -> Result<OracleResult> {
    oracle_max_kappa_with_limits(bundle, eta, epsilon, quantum, OracleLimits::default())
}

/// Maximum achievable thread throughput over all allocation matrices whose
/// entries are multiples of `eta / quantum` with per-slot sums at most
/// `eta`, together with a matrix achieving it.
///
/// Only true errors matter for success, so observation noise on the curves
/// does not affect the result.
pub fn oracle_max_kappa_with_limits(
    bundle: &TaskBundle,
    eta: f64,
    epsilon: f64,
    quantum: u32,
    limits: OracleLimits,
) -> Result<OracleResult> {
    bundle.ensure_valid()?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Usage(format!("eta {eta} outside [0, 1]")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Usage(format!("epsilon {epsilon} outside (0, 1]")));
    }
    if quantum == 0 {
        return Err(Error::Usage("quantum must be >= 1".into()));
    }
    if bundle.len() > limits.max_threads
        || bundle.horizon > limits.max_horizon
        || quantum > limits.max_quantum
    {
        return Err(Error::OracleLimit {
            threads: bundle.len(),
            horizon: bundle.horizon,
            quantum,
            max_threads: limits.max_threads,
            max_horizon: limits.max_horizon,
            max_quantum: limits.max_quantum,
        });
    }
    if bundle.is_empty() {
        return Ok(OracleResult {
            kappa_star: 1.0,
            succeeded: Vec::new(),
            witness: vec![Vec::new(); bundle.horizon],
        });
    }
    let mut search = Search::new(bundle, eta, epsilon, quantum);
    let best = search.solve(1, &vec![Slot::Active(0.0); bundle.len()]);
    let (witness, succeeded) = search.witness();
    debug_assert_eq!(succeeded.len() as u32, best);
    Ok(OracleResult {
        kappa_star: best as f64 / bundle.len() as f64,
        succeeded,
        witness,
    })
}
