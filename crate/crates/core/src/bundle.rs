//! Task bundles: threads with lifespans and learning curves, plus the
//! per-timeslot processing capacity they share.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curve::LearningCurve;
use crate::error::{Error, Result};

/// Thread index, consecutive from 1.
pub type ThreadId = u32;

/// Per-timeslot data available to one thread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArrivalCap {
    Constant(f64),
    /// One entry per timeslot of the horizon, slot 1 first.
    PerSlot(Vec<f64>),
}

impl ArrivalCap {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            ArrivalCap::Constant(c) => *c,
            ArrivalCap::PerSlot(v) => v.get(t - 1).copied().unwrap_or(0.0),
        }
    }
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreadSpec {
    pub id: ThreadId,
    pub begin: usize,
    pub deadline: usize,
    pub curve: LearningCurve,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_cap: Option<ArrivalCap>,
}

impl ThreadSpec {
    pub fn new(id: ThreadId, begin: usize, deadline: usize, curve: LearningCurve) -> Self {
        Self {
            id,
            begin,
            deadline,
            curve,
            weight: 1.0,
            arrival_cap: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_arrival_cap(mut self, cap: ArrivalCap) -> Self {
        self.arrival_cap = Some(cap);
        self
    }

    pub fn lifespan_contains(&self, t: usize) -> bool {
        self.begin <= t && t <= self.deadline
    }

    /// Data this thread can absorb at `t`; unbounded when no cap is set.
    pub fn arrival_at(&self, t: usize) -> f64 {
        self.arrival_cap.as_ref().map_or(f64::INFINITY, |c| c.at(t))
    }
}

/// Capacities `N_t` in data units, slot 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceProfile(pub Vec<f64>);

impl ResourceProfile {
    pub fn constant(capacity: f64, horizon: usize) -> Self {
        Self(vec![capacity; horizon])
    }

    pub fn capacity(&self, t: usize) -> f64 {
        self.0[t - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBundle {
    pub horizon: usize,
    pub resource_profile: ResourceProfile,
    pub threads: Vec<ThreadSpec>,
}

impl TaskBundle {
    pub fn new(
        horizon: usize,
        resource_profile: ResourceProfile,
        threads: Vec<ThreadSpec>,
    ) -> Self {
        Self {
            horizon,
            resource_profile,
            threads,
        }
    }

    pub fn len(&self) -> usize {
        self.threads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threads.is_empty()
    }

    pub fn thread(&self, id: ThreadId) -> Option<&ThreadSpec> {
        let idx = (id as usize).checked_sub(1)?;
        self.threads.get(idx).filter(|t| t.id == id)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_bundle(self)
    }

    /// Validates and converts a non-empty report into an error.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_bundle(self);
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(report))
        }
    }

    /// Hex SHA-256 of the bundle's canonical JSON form.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("bundle serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Threads whose lifespan contains `t`: `{k | b_k <= t <= d_k}`.
///
/// Purely a function of lifespans; completion and failure are tracked by the
/// engine, which narrows this to the effective alive set.
pub fn alive_set(bundle: &TaskBundle, t: usize) -> Result<BTreeSet<ThreadId>> {
    if t == 0 || t > bundle.horizon {
        return Err(Error::Usage(format!(
            "timeslot {t} outside 1..={}",
            bundle.horizon
        )));
    }
    Ok(bundle
        .threads
        .iter()
        .filter(|th| th.lifespan_contains(t))
        .map(|th| th.id)
        .collect())
}

/// Per-thread fractions `eta_{k,t}` of the slot's capacity.
///
/// Threads missing from the map receive nothing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationRow {
    pub timeslot: usize,
    pub fractions: BTreeMap<ThreadId, f64>,
}

impl AllocationRow {
    pub fn new(timeslot: usize) -> Self {
        Self {
            timeslot,
            fractions: BTreeMap::new(),
        }
    }

    pub fn fraction(&self, id: ThreadId) -> f64 {
        self.fractions.get(&id).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.fractions.values().sum()
    }

    pub fn set(&mut self, id: ThreadId, fraction: f64) {
        self.fractions.insert(id, fraction);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thread: Option<ThreadId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeslot: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.thread, self.timeslot) {
            (Some(k), _) => write!(f, "thread {k}: {}: {}", self.field, self.message),
            (None, Some(t)) => write!(f, "timeslot {t}: {}: {}", self.field, self.message),
            (None, None) => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(
        &mut self,
        thread: Option<ThreadId>,
        timeslot: Option<usize>,
        field: &str,
        message: impl Into<String>,
    ) {
        self.violations.push(Violation {
            thread,
            timeslot,
            field: field.to_string(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Collects every invariant violation; an empty report means the bundle is
/// well formed. Curve parameters are checked when curves are built.
pub fn validate_bundle(bundle: &TaskBundle) -> ValidationReport {
    let mut report = ValidationReport::default();
    let horizon = bundle.horizon;
    if horizon == 0 {
        report.push(None, None, "horizon", "must be a positive integer");
    }
    if bundle.resource_profile.len() != horizon {
        report.push(
            None,
            None,
            "resource_profile",
            format!(
                "length {} does not match horizon {horizon}",
                bundle.resource_profile.len()
            ),
        );
    }
    for (i, &cap) in bundle.resource_profile.0.iter().enumerate() {
        if !(cap.is_finite() && cap >= 0.0) {
            report.push(
                None,
                Some(i + 1),
                "resource_profile",
                format!("capacity {cap} must be finite and >= 0"),
            );
        }
    }
    for (i, th) in bundle.threads.iter().enumerate() {
        let id = Some(th.id);
        if th.id as usize != i + 1 {
            report.push(
                id,
                None,
                "id",
                format!("expected id {} (ids are consecutive from 1)", i + 1),
            );
        }
        if th.begin > th.deadline {
            report.push(id, None, "begin", "begin > deadline");
        }
        if th.begin < 1 {
            report.push(id, None, "begin", "must be >= 1");
        }
        if th.deadline > horizon {
            report.push(
                id,
                None,
                "deadline",
                format!("deadline {} beyond horizon {horizon}", th.deadline),
            );
        }
        if !(th.weight.is_finite() && th.weight >= 0.0) {
            report.push(id, None, "weight", "must be finite and >= 0");
        }
        match &th.arrival_cap {
            Some(ArrivalCap::Constant(c)) if !(c.is_finite() && *c >= 0.0) => {
                report.push(id, None, "arrival_cap", "must be finite and >= 0");
            }
            Some(ArrivalCap::PerSlot(v)) => {
                if v.len() != horizon {
                    report.push(
                        id,
                        None,
                        "arrival_cap",
                        format!("length {} does not match horizon {horizon}", v.len()),
                    );
                }
                for (s, c) in v.iter().enumerate() {
                    if !(c.is_finite() && *c >= 0.0) {
                        report.push(id, Some(s + 1), "arrival_cap", "must be finite and >= 0");
                    }
                }
            }
            _ => {}
        }
    }
    report
}
