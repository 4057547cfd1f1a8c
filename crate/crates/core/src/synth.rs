//! Random bundle generation for property checks and benchmarks.

use rand::Rng;

use crate::bundle::{ArrivalCap, ResourceProfile, TaskBundle, ThreadSpec};
use crate::curve::{Family, LearningCurve, Segment};

#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    pub max_threads: usize,
    pub max_horizon: usize,
    /// Upper bound on observation-noise sigma; 0 keeps every curve noiseless.
    pub max_sigma: f64,
    /// Capacities are drawn from `{16, 32, 48, 64}`; needs scale with them.
    pub allow_arrival_caps: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            max_threads: 4,
            max_horizon: 6,
            max_sigma: 0.0,
            allow_arrival_caps: true,
        }
    }
}

fn random_curve<R: Rng + ?Sized>(rng: &mut R, scale: f64, max_sigma: f64) -> LearningCurve {
    let initial = if rng.random_bool(0.8) {
        1.0
    } else {
        rng.random_range(0.2..1.0)
    };
    let floor = if rng.random_bool(0.7) {
        0.0
    } else {
        rng.random_range(0.0..0.5) * initial
    };
    let family = match rng.random_range(0..4) {
        0 => Family::Exponential {
            initial,
            floor,
            rate: rng.random_range(0.2..4.0) / scale,
        },
        1 => Family::Power {
            initial,
            floor,
            exponent: rng.random_range(0.3..2.0),
        },
        2 => Family::LinearNeed {
            initial,
            floor,
            need: rng.random_range(0.2..3.0) * scale,
        },
        _ => {
            let mid_n = rng.random_range(0.1..1.5) * scale;
            let mid_e = rng.random_range(0.3..1.0) * initial;
            let end_n = mid_n + rng.random_range(0.1..2.0) * scale;
            Family::Piecewise {
                points: vec![
                    (0.0, initial),
                    (mid_n, mid_e),
                    (end_n, floor.min(mid_e) * rng.random_range(0.0..1.0)),
                ],
            }
        }
    };
    let segments = if rng.random_bool(0.3) {
        let start = rng.random_range(0.0..1.0) * scale;
        vec![Segment {
            start,
            end: start + rng.random_range(0.1..2.0) * scale,
            rate_multiplier: if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            },
        }]
    } else {
        Vec::new()
    };
    let noise = if max_sigma > 0.0 && rng.random_bool(0.5) {
        Some(rng.random_range(0.0..max_sigma))
    } else {
        None
    };
    let curve = LearningCurve::new(family, segments, None).expect("generated parameters are valid");
    match noise {
        Some(sigma) => curve.with_noise(sigma).expect("nonnegative sigma"),
        None => curve,
    }
}

/// Draws a valid bundle with `1..=max_threads` threads over
/// `1..=max_horizon` slots.
pub fn random_bundle<R: Rng + ?Sized>(rng: &mut R, spec: &SynthSpec) -> TaskBundle {
    let horizon = rng.random_range(1..=spec.max_horizon.max(1));
    let k = rng.random_range(1..=spec.max_threads.max(1));
    let capacities: Vec<f64> = (0..horizon)
        .map(|_| [16.0, 32.0, 48.0, 64.0][rng.random_range(0..4)])
        .collect();
    let scale = 32.0;
    let threads = (1..=k as u32)
        .map(|id| {
            let begin = rng.random_range(1..=horizon);
            let deadline = rng.random_range(begin..=horizon);
            let mut th = ThreadSpec::new(
                id,
                begin,
                deadline,
                random_curve(rng, scale, spec.max_sigma),
            );
            if rng.random_bool(0.25) {
                th.weight = rng.random_range(0.0..3.0);
            }
            if spec.allow_arrival_caps && rng.random_bool(0.2) {
                th.arrival_cap = Some(ArrivalCap::Constant(rng.random_range(4.0..40.0)));
            }
            th
        })
        .collect();
    TaskBundle::new(horizon, ResourceProfile(capacities), threads)
}
