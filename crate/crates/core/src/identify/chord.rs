use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{bisect_decreasing, golden_section_max};
use crate::profile::ConvexProfile;

/// Largest gap between a chord of a convex profile and the profile itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordExcess {
    pub excess: f64,
    pub argmax: f64,
}

pub(crate) fn finite_value<P: ConvexProfile + ?Sized>(e0: &P, x: f64) -> Result<f64> {
    let v = e0.value(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("profile value {v} at {x}")))
    }
}

/// Maximum over `[a, b]` of the chord through `(a, E0(a))`, `(b, E0(b))`
/// minus `E0`.
///
/// The gap is concave, so with a derivative the stationary point is found by
/// bisection on `slope − E0'`; without one a golden-section search is used.
/// The excess is clamped at zero and ties resolve to the smaller abscissa.
pub fn chord_error<P: ConvexProfile + ?Sized>(e0: &P, a: f64, b: f64) -> Result<ChordExcess> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(invalid(format!("chord interval requires a < b, got [{a}, {b}]")));
    }
    let (fa, fb) = (finite_value(e0, a)?, finite_value(e0, b)?);
    let s = (fb - fa) / (b - a);
    let tol_x = 1e-13 * (b - a).max(a.abs().max(b.abs()) * 1e-3);
    let x = match e0.slope(0.5 * (a + b)) {
        Some(d) if d.is_finite() => bisect_decreasing(|x| s - e0.slope(x).unwrap_or(f64::NAN), a, b, tol_x),
        _ => golden_section_max(|x| fa + s * (x - a) - e0.value(x), a, b, tol_x),
    };
    let fx = finite_value(e0, x)?;
    let gap = fa + s * (x - a) - fx;
    if gap > 0.0 {
        Ok(ChordExcess { excess: gap, argmax: x })
    } else {
        Ok(ChordExcess { excess: 0.0, argmax: a })
    }
}
