//! Gamma-family special functions.
//!
//! All three of `ln Γ`, `ψ₀` (digamma) and `ψ₁` (trigamma) are evaluated by
//! shifting the argument into the asymptotic regime with the recurrence
//! relations and then summing a Bernoulli-number series. The recurrence sums
//! are compensated so that the absolute error stays near a few ulps even for
//! small arguments. The multivariate gamma function is reduced to a product
//! of ordinary gamma functions.

use crate::{Error, Result};

/// Arguments at or above this threshold are handled by the asymptotic series
/// alone; smaller ones are shifted up by the recurrences first.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} requires a positive finite argument, got {x}")))
    }
}

/// Natural logarithm of the gamma function, `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive(x, "ln_gamma")?;
    Ok(ln_gamma_raw(x))
}

pub(crate) fn ln_gamma_raw(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    // ln Γ(x) = ln Γ(x + k) − Σ_{j=0}^{k−1} ln(x + j)
    let mut shift = 0.0f64;
    let mut shift_c = 0.0f64;
    let mut z = x;
    while z < ASYMPTOTIC_THRESHOLD {
        kahan_add(&mut shift, &mut shift_c, z.ln());
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Stirling series: coefficients B_{2n} / (2n (2n−1))
    let series = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2
                        * (1.0 / 1260.0
                            - inv2
                                * (1.0 / 1680.0
                                    - inv2 * (1.0 / 1188.0 - inv2 * (691.0 / 360360.0))))));
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - (shift + shift_c)
}

/// Digamma function `ψ₀(x) = d/dx ln Γ(x)`, `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x, "digamma")?;
    Ok(digamma_raw(x))
}

pub(crate) fn digamma_raw(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    // ψ₀(x) = ψ₀(x + k) − Σ_{j=0}^{k−1} 1/(x + j)
    let mut shift = 0.0f64;
    let mut shift_c = 0.0f64;
    let mut z = x;
    while z < ASYMPTOTIC_THRESHOLD {
        kahan_add(&mut shift, &mut shift_c, 1.0 / z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // ψ₀(z) ~ ln z − 1/(2z) − Σ B_{2n} / (2n z^{2n})
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    z.ln() - 0.5 * inv - series - (shift + shift_c)
}

/// Trigamma function `ψ₁(x) = d²/dx² ln Γ(x)`, `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive(x, "trigamma")?;
    Ok(trigamma_raw(x))
}

pub(crate) fn trigamma_raw(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    // ψ₁(x) = ψ₁(x + k) + Σ_{j=0}^{k−1} 1/(x + j)²
    let mut shift = 0.0f64;
    let mut shift_c = 0.0f64;
    let mut z = x;
    while z < ASYMPTOTIC_THRESHOLD {
        kahan_add(&mut shift, &mut shift_c, 1.0 / (z * z));
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // ψ₁(z) ~ 1/z + 1/(2z²) + Σ B_{2n} / z^{2n+1}
    let series = inv * inv2
        * (1.0 / 6.0
            - inv2
                * (1.0 / 30.0
                    - inv2
                        * (1.0 / 42.0
                            - inv2
                                * (1.0 / 30.0
                                    - inv2
                                        * (5.0 / 66.0
                                            - inv2 * (691.0 / 2730.0 - inv2 * (7.0 / 6.0)))))));
    inv + 0.5 * inv2 + series + shift + shift_c
}

/// Logarithm of the multivariate gamma function `Γ_d(a)`, `a > (d−1)/2`.
///
/// `Γ_d(a) = π^{d(d−1)/4} Π_{i=1}^{d} Γ(a − (i−1)/2)`.
pub fn ln_multigamma(d: usize, a: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("ln_multigamma requires d >= 1".into()));
    }
    let min = (d as f64 - 1.0) / 2.0;
    if !(a.is_finite() && a > min) {
        return Err(Error::Domain(format!(
            "ln_multigamma requires a > (d-1)/2 = {min}, got {a}"
        )));
    }
    let mut sum = (d * (d - 1)) as f64 / 4.0 * std::f64::consts::PI.ln();
    for i in 1..=d {
        sum += ln_gamma_raw(a - (i as f64 - 1.0) / 2.0);
    }
    Ok(sum)
}

/// Σ_{i=1}^{d} ψ₀((ν − d − i) / 2); the log-determinant moment term of the
/// inverse Wishart family. Requires `ν > 2d`.
pub(crate) fn digamma_dof_sum(d: usize, nu: f64) -> f64 {
    let df = d as f64;
    debug_assert!(nu > 2.0 * df);
    (1..=d).map(|i| digamma_raw((nu - df - i as f64) / 2.0)).sum()
}

/// Σ_{i=1}^{d} ψ₁((ν − d − i) / 2), divided by four: the curvature of the
/// log-multigamma term with respect to ν. Requires `ν > 2d`.
pub(crate) fn trigamma_dof_sum(d: usize, nu: f64) -> f64 {
    let df = d as f64;
    debug_assert!(nu > 2.0 * df);
    (1..=d).map(|i| trigamma_raw((nu - df - i as f64) / 2.0)).sum()
}

#[inline]
fn kahan_add(sum: &mut f64, comp: &mut f64, term: f64) {
    let y = term - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}
