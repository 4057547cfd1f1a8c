//! Parametric learning curves.
//!
//! A curve maps cumulative processed data `n` to the true error of the
//! thread's model after seeing that much data. Every family starts at its
//! initial error at `n = 0` and never increases. Plateau segments slow (or
//! stop) progress over a data range by warping the data axis: inside a
//! segment with multiplier `m`, each unit of data counts as `m` units of
//! progress for the base family.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::CurveError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Exponential,
    Power,
    LinearNeed,
    Piecewise,
}

/// Base error model before plateau warping.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `floor + (initial - floor) * exp(-rate * n)`
    Exponential { initial: f64, floor: f64, rate: f64 },
    /// `floor + (initial - floor) * (1 + n)^(-exponent)`
    Power {
        initial: f64,
        floor: f64,
        exponent: f64,
    },
    /// Linear decrease from `initial` to `floor`, reached after `need` units.
    LinearNeed { initial: f64, floor: f64, need: f64 },
    /// Linear interpolation through `(n, error)` breakpoints; constant after
    /// the last one.
    Piecewise { points: Vec<(f64, f64)> },
}

/// Data range `[start, end)` over which progress runs at `rate_multiplier`
/// times the base family's rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub rate_multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
}

/// Additive observation noise. Never applied to the true error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    #[serde(default)]
    pub distribution: NoiseDistribution,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct LearningCurve {
    family: Family,
    segments: Vec<Segment>,
    noise: Option<Noise>,
}

impl LearningCurve {
    pub fn new(
        family: Family,
        segments: Vec<Segment>,
        noise: Option<Noise>,
    ) -> Result<Self, CurveError> {
        validate_family(&family)?;
        validate_segments(&segments)?;
        if let Some(noise) = &noise {
            if !(noise.sigma.is_finite() && noise.sigma >= 0.0) {
                return Err(CurveError::new("noise.sigma", "must be finite and >= 0"));
            }
        }
        Ok(Self {
            family,
            segments,
            noise,
        })
    }

    pub fn exponential(initial: f64, floor: f64, rate: f64) -> Result<Self, CurveError> {
        Self::new(
            Family::Exponential {
                initial,
                floor,
                rate,
            },
            Vec::new(),
            None,
        )
    }

    pub fn power(initial: f64, floor: f64, exponent: f64) -> Result<Self, CurveError> {
        Self::new(
            Family::Power {
                initial,
                floor,
                exponent,
            },
            Vec::new(),
            None,
        )
    }

    /// Error falls linearly from 1 to 0 over `need` data units.
    pub fn linear_need(need: f64) -> Result<Self, CurveError> {
        Self::new(
            Family::LinearNeed {
                initial: 1.0,
                floor: 0.0,
                need,
            },
            Vec::new(),
            None,
        )
    }

    pub fn piecewise(points: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        Self::new(Family::Piecewise { points }, Vec::new(), None)
    }

    pub fn with_segments(self, segments: Vec<Segment>) -> Result<Self, CurveError> {
        Self::new(self.family, segments, self.noise)
    }

    pub fn with_noise(self, sigma: f64) -> Result<Self, CurveError> {
        let noise = Noise {
            distribution: NoiseDistribution::Gaussian,
            sigma,
        };
        Self::new(self.family, self.segments, Some(noise))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn noise(&self) -> Option<&Noise> {
        self.noise.as_ref()
    }

    /// Standard deviation of observation noise, zero when noiseless.
    pub fn sigma(&self) -> f64 {
        self.noise.map_or(0.0, |n| n.sigma)
    }

    pub fn initial_error(&self) -> f64 {
        match &self.family {
            Family::Exponential { initial, .. }
            | Family::Power { initial, .. }
            | Family::LinearNeed { initial, .. } => *initial,
            Family::Piecewise { points } => points[0].1,
        }
    }

    /// Noiseless error after `n` cumulative data units.
    pub fn true_error(&self, n: f64) -> f64 {
        debug_assert!(n >= 0.0, "cumulative data must be nonnegative");
        let progress = self.effective_progress(n.max(0.0));
        self.base_error(progress).clamp(0.0, 1.0)
    }

    /// True error plus one noise draw, clamped to `[0, 1]`.
    ///
    /// Consumes randomness only when the curve carries positive noise, so
    /// noiseless curves leave the generator untouched.
    pub fn observed_error<R: Rng + ?Sized>(&self, n: f64, rng: &mut R) -> f64 {
        let truth = self.true_error(n);
        match self.noise {
            Some(noise) if noise.sigma > 0.0 => {
                let normal = Normal::new(0.0, noise.sigma).expect("sigma validated");
                (truth + normal.sample(rng)).clamp(0.0, 1.0)
            }
            _ => truth,
        }
    }

    /// Maps raw data to base-family progress through the plateau segments.
    fn effective_progress(&self, n: f64) -> f64 {
        let mut progress = 0.0;
        let mut pos = 0.0;
        for seg in &self.segments {
            if n <= seg.start {
                break;
            }
            progress += seg.start - pos;
            let inside = n.min(seg.end) - seg.start;
            progress += inside * seg.rate_multiplier;
            pos = seg.end;
            if n <= seg.end {
                return progress;
            }
        }
        if n > pos {
            progress += n - pos;
        }
        progress
    }

    fn base_error(&self, n: f64) -> f64 {
        // Written as `initial - span * progress` so that n = 0 gives the
        // initial error exactly.
        match &self.family {
            Family::Exponential {
                initial,
                floor,
                rate,
            } => initial - (initial - floor) * -(-rate * n).exp_m1(),
            Family::Power {
                initial,
                floor,
                exponent,
            } => initial - (initial - floor) * (1.0 - (1.0 + n).powf(-exponent)),
            Family::LinearNeed {
                initial,
                floor,
                need,
            } => initial - (initial - floor) * (n / need).min(1.0),
            Family::Piecewise { points } => {
                let last = points[points.len() - 1];
                if n >= last.0 {
                    return last.1;
                }
                let idx = points.partition_point(|p| p.0 <= n);
                let (x0, y0) = points[idx - 1];
                let (x1, y1) = points[idx];
                y0 + (y1 - y0) * (n - x0) / (x1 - x0)
            }
        }
    }
}

fn check_initial_floor(initial: f64, floor: f64) -> Result<(), CurveError> {
    if !(initial > 0.0 && initial <= 1.0) {
        return Err(CurveError::new("initial", "must lie in (0, 1]"));
    }
    if !(floor >= 0.0 && floor < initial) {
        return Err(CurveError::new("floor", "must lie in [0, initial)"));
    }
    Ok(())
}

fn validate_family(family: &Family) -> Result<(), CurveError> {
    match family {
        Family::Exponential {
            initial,
            floor,
            rate,
        } => {
            check_initial_floor(*initial, *floor)?;
            if !(rate.is_finite() && *rate > 0.0) {
                return Err(CurveError::new("rate", "must be finite and > 0"));
            }
        }
        Family::Power {
            initial,
            floor,
            exponent,
        } => {
            check_initial_floor(*initial, *floor)?;
            if !(exponent.is_finite() && *exponent > 0.0) {
                return Err(CurveError::new("exponent", "must be finite and > 0"));
            }
        }
        Family::LinearNeed {
            initial,
            floor,
            need,
        } => {
            check_initial_floor(*initial, *floor)?;
            if !(need.is_finite() && *need > 0.0) {
                return Err(CurveError::new("need", "must be finite and > 0"));
            }
        }
        Family::Piecewise { points } => {
            let Some(first) = points.first() else {
                return Err(CurveError::new("points", "needs at least one breakpoint"));
            };
            if first.0 != 0.0 {
                return Err(CurveError::new(
                    "points",
                    "first breakpoint must be at n = 0",
                ));
            }
            if !(first.1 > 0.0 && first.1 <= 1.0) {
                return Err(CurveError::new(
                    "points",
                    "initial error must lie in (0, 1]",
                ));
            }
            for (i, w) in points.windows(2).enumerate() {
                let (a, b) = (w[0], w[1]);
                if !(b.0.is_finite() && b.0 > a.0) {
                    return Err(CurveError::new(
                        format!("points[{}]", i + 1),
                        "breakpoints must be strictly increasing in n",
                    ));
                }
                if !(b.1 >= 0.0 && b.1 <= a.1) {
                    return Err(CurveError::new(
                        format!("points[{}]", i + 1),
                        "errors must be non-increasing and >= 0",
                    ));
                }
            }
        }
    }
    Ok(())
}

fn validate_segments(segments: &[Segment]) -> Result<(), CurveError> {
    let mut prev_end = 0.0;
    for (i, seg) in segments.iter().enumerate() {
        let field = |f: &str| format!("segments[{i}].{f}");
        if !(seg.start.is_finite() && seg.start >= prev_end) {
            return Err(CurveError::new(
                field("start"),
                "segments must be ordered, non-overlapping and start at n >= 0",
            ));
        }
        if !(seg.end.is_finite() && seg.end > seg.start) {
            return Err(CurveError::new(field("end"), "must be finite and > start"));
        }
        if !(seg.rate_multiplier.is_finite() && seg.rate_multiplier >= 0.0) {
            return Err(CurveError::new(
                field("rate_multiplier"),
                "must be finite and >= 0",
            ));
        }
        prev_end = seg.end;
    }
    Ok(())
}

/// Flat wire form of a curve; family-specific fields are optional here and
/// checked against the family on conversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    need: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<Noise>,
}

impl TryFrom<RawCurve> for LearningCurve {
    type Error = CurveError;

    fn try_from(raw: RawCurve) -> Result<Self, Self::Error> {
        let required = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CurveError::new(name, "required for this family"))
        };
        let reject = |present: bool, name: &str| {
            if present {
                Err(CurveError::new(name, "not a parameter of this family"))
            } else {
                Ok(())
            }
        };
        let initial = raw.initial.unwrap_or(1.0);
        let floor = raw.floor.unwrap_or(0.0);
        let family = match raw.family {
            FamilyName::Exponential => {
                reject(raw.exponent.is_some(), "exponent")?;
                reject(raw.need.is_some(), "need")?;
                reject(raw.points.is_some(), "points")?;
                Family::Exponential {
                    initial,
                    floor,
                    rate: required(raw.rate, "rate")?,
                }
            }
            FamilyName::Power => {
                reject(raw.rate.is_some(), "rate")?;
                reject(raw.need.is_some(), "need")?;
                reject(raw.points.is_some(), "points")?;
                Family::Power {
                    initial,
                    floor,
                    exponent: required(raw.exponent, "exponent")?,
                }
            }
            FamilyName::LinearNeed => {
                reject(raw.rate.is_some(), "rate")?;
                reject(raw.exponent.is_some(), "exponent")?;
                reject(raw.points.is_some(), "points")?;
                Family::LinearNeed {
                    initial,
                    floor,
                    need: required(raw.need, "need")?,
                }
            }
            FamilyName::Piecewise => {
                reject(raw.initial.is_some(), "initial")?;
                reject(raw.floor.is_some(), "floor")?;
                reject(raw.rate.is_some(), "rate")?;
                reject(raw.exponent.is_some(), "exponent")?;
                reject(raw.need.is_some(), "need")?;
                Family::Piecewise {
                    points: raw
                        .points
                        .ok_or_else(|| CurveError::new("points", "required for this family"))?,
                }
            }
        };
        LearningCurve::new(family, raw.segments, raw.noise)
    }
}

impl From<LearningCurve> for RawCurve {
    fn from(curve: LearningCurve) -> Self {
        let mut raw = RawCurve {
            family: FamilyName::Piecewise,
            initial: None,
            floor: None,
            rate: None,
            exponent: None,
            need: None,
            points: None,
            segments: curve.segments,
            noise: curve.noise,
        };
        match curve.family {
            Family::Exponential {
                initial,
                floor,
                rate,
            } => {
                raw.family = FamilyName::Exponential;
                raw.initial = Some(initial);
                raw.floor = Some(floor);
                raw.rate = Some(rate);
            }
            Family::Power {
                initial,
                floor,
                exponent,
            } => {
                raw.family = FamilyName::Power;
                raw.initial = Some(initial);
                raw.floor = Some(floor);
                raw.exponent = Some(exponent);
            }
            Family::LinearNeed {
                initial,
                floor,
                need,
            } => {
                raw.family = FamilyName::LinearNeed;
                raw.initial = Some(initial);
                raw.floor = Some(floor);
                raw.need = Some(need);
            }
            Family::Piecewise { points } => raw.points = Some(points),
        }
        raw
    }
}
