//! Learning-status signals computed from observed error histories.

/// True when the last `window` errors fell by less than `min_rel_drop`
/// relative to the first of them. Shorter histories are never plateaued.
pub fn detect_plateau(errors: &[f64], window: usize, min_rel_drop: f64) -> bool {
    assert!(window >= 2, "plateau window must be at least 2");
    if errors.len() < window {
        return false;
    }
    let recent = &errors[errors.len() - window..];
    let first = recent[0];
    let last = recent[window - 1];
    if first <= 0.0 {
        // Already at zero error: nothing left to gain.
        return true;
    }
    (first - last) / first < min_rel_drop
}

/// Average per-timeslot error decrease over the last `lookback`
/// `(timeslot, error)` observations, clamped at zero.
pub fn estimate_marginal_gain(history: &[(usize, f64)], lookback: usize) -> f64 {
    assert!(lookback >= 2, "lookback must be at least 2");
    if history.len() < lookback {
        return 0.0;
    }
    let recent = &history[history.len() - lookback..];
    let (t0, e0) = recent[0];
    let (t1, e1) = recent[lookback - 1];
    if t1 <= t0 {
        return 0.0;
    }
    ((e0 - e1) / (t1 - t0) as f64).max(0.0)
}
