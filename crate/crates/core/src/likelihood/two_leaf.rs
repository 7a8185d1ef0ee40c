//! Closed forms for a tree with two leaves.
//!
//! With `n1` and `n2` traits private to each leaf, `n12` shared, and
//! `e = exp(-mu * |g|)` for total branch length `|g|`, the likelihood is
//! `(lambda/mu)^N exp(-(lambda/mu)(2 - e)) (1 - e)^(n1 + n2) e^n12 / N!`.

use super::{check_rate, ln_factorial};
use crate::error::Result;

fn ln_one_minus_e(x: f64) -> f64 {
    (-(-x).exp_m1()).ln()
}

/// Maximum-likelihood total branch length, `ln(1 + (n1 + n2) / (2 n12)) / mu`.
///
/// Infinite when no trait is shared.
pub fn two_leaf_mle(n1: usize, n2: usize, n12: usize, mu: f64) -> Result<f64> {
    check_rate(mu, "death rate")?;
    if n12 == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(((n1 + n2) as f64 / (2.0 * n12 as f64)).ln_1p() / mu)
}

/// Log-likelihood from the closed form, including the `1/N!` term.
pub fn two_leaf_closed_form_log_likelihood(
    length: f64,
    mu: f64,
    lambda: f64,
    n1: usize,
    n2: usize,
    n12: usize,
) -> Result<f64> {
    check_rate(mu, "death rate")?;
    check_rate(lambda, "birth rate")?;
    let n = n1 + n2 + n12;
    let x = mu * length;
    let ratio = lambda / mu;
    let mut ll = -ratio * (2.0 - (-x).exp()) - ln_factorial(n);
    if n > 0 {
        ll += n as f64 * ratio.ln() - x * n12 as f64;
    }
    if n1 + n2 > 0 {
        ll += (n1 + n2) as f64 * ln_one_minus_e(x);
    }
    Ok(ll)
}

/// Unnormalized log posterior density of `|g|` after integrating out `lambda`
/// (prior `1/lambda`) and the root/leaf split (prior `1/|g|`).
///
/// `-ln(mu |g|) + n12 ln(e / (2 - e)) + (n1 + n2) ln((1 - e) / (2 - e))`.
pub fn two_leaf_posterior_logpdf(length: f64, mu: f64, n1: usize, n2: usize, n12: usize) -> f64 {
    if !(length > 0.0) || !(mu > 0.0) {
        return f64::NEG_INFINITY;
    }
    let x = mu * length;
    let ln_two_minus_e = (-(-x).exp_m1()).ln_1p();
    let mut lp = -x.ln() - n12 as f64 * (x + ln_two_minus_e);
    if n1 + n2 > 0 {
        lp += (n1 + n2) as f64 * (ln_one_minus_e(x) - ln_two_minus_e);
    }
    lp
}
