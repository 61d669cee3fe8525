//! Exactly scale-invariant field on the unit interval.
//!
//! `X_t(x) = √2 W(A_t(x))` with the cone
//! `A_t(x) = {(x', y') : y' ≥ max(e^{-t}, 2|x' − x|), |x' − x| ≤ 1/2}` and
//! hyperbolic white noise `W` of intensity `y'^{-2} dx' dy'`. At height `y'`
//! the slice of `A_t(x) ∩ A_t(x+D)` has length `max(0, min(y', 1) − D)`, so
//! the overlap area is `∫_{max(e^{-t}, D)}^∞ (min(y,1) − D) y^{-2} dy
//! = 1 − ln a − D/a` with `a = max(e^{-t}, D)`, for `D < 1`.

use crate::error::{Error, Result};

/// `2 · m_hyp(A_t(x) ∩ A_t(y))`.
pub fn exact_cone_cov_interval(t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidLevel(format!("cone level t must be > 0, got {t}")));
    }
    let d = (x - y).abs();
    if d >= 1.0 {
        return Ok(0.0);
    }
    let a = (-t).exp().max(d);
    Ok(2.0 * (1.0 - a.ln() - d / a))
}
