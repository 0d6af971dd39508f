//! Sigmoid / binary cross-entropy primitives in numerically stable forms.

use crate::error::{Error, Result};

/// +1 for a positive label, -1 for a negative one.
#[inline]
pub fn indicator(positive: bool) -> f64 {
    if positive {
        1.0
    } else {
        -1.0
    }
}

/// Logistic sigmoid, stable for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow: `max(x, 0) + log1p(e^{-|x|})`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Loss and d(loss)/d(logit) for `log(1 + e^{-ind * logit})`.
/// No input validation; callers on the hot path guarantee finite logits.
#[inline]
pub(crate) fn bce_raw(ind: f64, logit: f64) -> (f64, f64) {
    let z = ind * logit;
    (softplus(-z), -ind * sigmoid(-z))
}

/// Binary cross-entropy on a raw logit: `log(1 + e^{-I(y) * logit})`.
pub fn bce_with_logits(logit: f64, positive: bool) -> Result<f64> {
    if !logit.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite logit {logit}")));
    }
    Ok(bce_raw(indicator(positive), logit).0)
}

/// Same as [`bce_with_logits`] but also returns d(loss)/d(logit)
/// `= -I(y) * sigmoid(-I(y) * logit)`.
pub fn bce_with_logits_grad(logit: f64, positive: bool) -> Result<(f64, f64)> {
    if !logit.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite logit {logit}")));
    }
    Ok(bce_raw(indicator(positive), logit))
}
