//! Numerical tolerances shared by every module.

/// Relative tolerance for regime boundaries and UP proportionality.
pub const REL_TOL: f64 = 1e-9;

/// Absolute slack allowed on capacity checks.
pub const ABS_CAP_TOL: f64 = 1e-9;

/// Relative proportionality tolerance for distributions measured from a
/// simulation run (stage hand-off in nested schedules).
pub const MEASURED_PROP_TOL: f64 = 1e-2;

/// `a == b` within [`REL_TOL`] relative to the larger magnitude.
pub fn approx_eq(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= REL_TOL * scale
}

/// `a <= b` allowing a relative slack.
pub fn approx_le(a: f64, b: f64) -> bool {
    a <= b || approx_eq(a, b)
}

/// `a < b` and not within tolerance of equality.
pub fn definitely_lt(a: f64, b: f64) -> bool {
    a < b && !approx_eq(a, b)
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
