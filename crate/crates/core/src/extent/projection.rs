//! Kullback-Leibler projection onto the inverse Wishart family and the
//! degrees-of-freedom solvers.
//!
//! Projecting a density `p(X)` over SPD matrices onto `IW_d(ν, V)` in
//! KL(p ‖ IW) reduces to matching the sufficient statistics `E[X⁻¹]` and
//! `E[ln|X|]`: stationarity in `V` gives `V* = (ν* − d − 1) E[X⁻¹]⁻¹`, and
//! stationarity in ν leaves one scalar equation
//!
//! ```text
//! g(ν) = d ln(ν − d − 1) − ln|E[X⁻¹]| − d ln 2
//!        − Σ_{i=1}^{d} ψ₀((ν − d − i)/2) − E[ln|X|] = 0.
//! ```
//!
//! `g` is strictly decreasing on `(2d, ∞)` (the trigamma sum dominates
//! `2d/(ν − d − 1)`), so the root is unique whenever it exists; it exists iff
//! `ln|E[X⁻¹]| + E[ln|X|] > 0`, which holds for every non-degenerate density
//! by concavity of the log-determinant. The root is found by a safeguarded
//! Newton iteration with a bisection fallback.

use crate::extent::ExtentState;
use crate::matvar::IwMoments;
use crate::numerics::{digamma_dof_sum, digamma_raw, trigamma_dof_sum, SpdMatrix};
use crate::{Error, Result};

/// Residual magnitude guaranteed at the returned root.
const ROOT_RESIDUAL_TOL: f64 = 1e-10;

/// Default upper end of the root bracket.
const ROOT_BRACKET_HI: f64 = 1e6;

/// Projects the moment pair `(E[X⁻¹], E[ln|X|])` onto the inverse Wishart
/// family, returning the unique KL-optimal `(ν*, V*)`.
pub fn kld_project_to_iw(e_inv: &SpdMatrix, e_lndet: f64) -> Result<ExtentState> {
    let nu = project_nu(e_inv, e_lndet, ROOT_BRACKET_HI)?;
    let d = e_inv.dim() as f64;
    let v = e_inv.inverse()?.scale(nu - d - 1.0)?;
    ExtentState::new(nu, v)
}

/// Convenience wrapper over [`kld_project_to_iw`] taking the moment struct.
pub fn kld_project_moments(m: &IwMoments) -> Result<ExtentState> {
    kld_project_to_iw(&m.e_inv, m.e_lndet)
}

fn project_nu(e_inv: &SpdMatrix, e_lndet: f64, hi: f64) -> Result<f64> {
    if !e_lndet.is_finite() {
        return Err(Error::InconsistentMoments(format!(
            "log-determinant moment is not finite: {e_lndet}"
        )));
    }
    let d = e_inv.dim();
    let df = d as f64;
    let ln_det_e_inv = e_inv.logdet()?;
    // Concavity of ln|·| forces E[ln|X|] ≥ −ln|E[X⁻¹]|; at equality the
    // distribution is degenerate and no finite-dof member matches it.
    if ln_det_e_inv + e_lndet <= 0.0 {
        return Err(Error::InconsistentMoments(format!(
            "ln|E[X^-1]| + E[ln|X|] = {:.3e} must be positive",
            ln_det_e_inv + e_lndet
        )));
    }
    let g = |nu: f64| {
        df * (nu - df - 1.0).ln()
            - ln_det_e_inv
            - df * std::f64::consts::LN_2
            - digamma_dof_sum(d, nu)
            - e_lndet
    };
    let dg = |nu: f64| df / (nu - df - 1.0) - 0.5 * trigamma_dof_sum(d, nu);
    solve_decreasing_root(&g, &dg, 2.0 * df + 1e-6, hi)
}

/// Root of the dof stationarity condition
///
/// ```text
/// d ln((ν − d − 1)/(v − d − 1)) + Σ ψ₀((v − d − i)/2)
///   − Σ ψ₀((ν − d − i)/2) − C₃ − ln|C₁| = 0,
/// ```
///
/// solved through the generic moment projection with
/// `E[X⁻¹] = (v − d − 1) C₁` and
/// `E[ln|X|] = C₃ − d ln 2 − Σ ψ₀((v − d − i)/2)`. Residual at the returned
/// root is below `1e-10`.
pub fn nu_optimal(v: f64, c1: &SpdMatrix, c3: f64) -> Result<f64> {
    let d = c1.dim();
    let df = d as f64;
    if !(v.is_finite() && v > 2.0 * df) {
        return Err(Error::DegreesOfFreedom { value: v, min: 2.0 * df });
    }
    let e_inv = c1.scale(v - df - 1.0)?;
    let e_lndet = c3 - df * std::f64::consts::LN_2 - digamma_dof_sum(d, v);
    project_nu(&e_inv, e_lndet, ROOT_BRACKET_HI.max(10.0 * v))
}

/// Closed-form predicted degrees of freedom matching the volume of the
/// expected extent:
///
/// ```text
/// ν = 2d + 2 + (d + 1) ρ / ((ρ + d + 1) |C₁C₂|^{1/d} − ρ),  ρ = v − 2d − 2.
/// ```
///
/// Always exceeds `2d + 2`; Jensen's inequality gives `|C₁C₂| ≥ 1` for
/// consistent expectations, which keeps the denominator positive.
pub fn nu_closed_form(v: f64, c1: &SpdMatrix, c2: &SpdMatrix) -> Result<f64> {
    let d = c1.dim();
    let df = d as f64;
    if c2.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c2.dim() });
    }
    if !(v.is_finite() && v > 2.0 * df + 2.0) {
        return Err(Error::DegreesOfFreedom { value: v, min: 2.0 * df + 2.0 });
    }
    let rho = v - 2.0 * df - 2.0;
    let det_root = ((c1.logdet()? + c2.logdet()?) / df).exp();
    let denom = (rho + df + 1.0) * det_root - rho;
    if denom <= 0.0 {
        return Err(Error::InconsistentMoments(format!(
            "(rho + d + 1)|C1 C2|^(1/d) - rho = {denom:.3e} must be positive"
        )));
    }
    Ok(2.0 * df + 2.0 + (df + 1.0) * rho / denom)
}

/// Residual of the dof stationarity condition at `nu`; exposed for tests and
/// the validation suite.
pub fn nu_optimal_residual(v: f64, c1: &SpdMatrix, c3: f64, nu: f64) -> Result<f64> {
    let d = c1.dim();
    let df = d as f64;
    if !(nu > 2.0 * df) {
        return Err(Error::DegreesOfFreedom { value: nu, min: 2.0 * df });
    }
    Ok(df * ((nu - df - 1.0) / (v - df - 1.0)).ln() + digamma_dof_sum(d, v)
        - digamma_dof_sum(d, nu)
        - c3
        - c1.logdet()?)
}

/// Safeguarded Newton iteration for a strictly decreasing `g` with
/// `g(lo⁺) > 0`. Expands the bracket geometrically up to `hi_max`, then
/// alternates Newton steps with bisection whenever a step leaves the bracket.
fn solve_decreasing_root(
    g: &dyn Fn(f64) -> f64,
    dg: &dyn Fn(f64) -> f64,
    lo: f64,
    hi_max: f64,
) -> Result<f64> {
    let mut a = lo;
    let ga = g(a);
    if !(ga > 0.0) {
        return Err(Error::NoRoot {
            lo,
            hi: hi_max,
            context: format!("residual at the lower bracket end is {ga:.3e}, expected positive"),
        });
    }

    let mut b = (lo + 1.0).min(hi_max);
    let mut gb = g(b);
    while gb > 0.0 && b < hi_max {
        a = b;
        b = (lo + (b - lo) * 4.0).min(hi_max);
        gb = g(b);
    }
    if gb > 0.0 {
        return Err(Error::NoRoot {
            lo,
            hi: hi_max,
            context: "no sign change found; inputs are pathological".into(),
        });
    }

    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let gx = g(x);
        if gx > 0.0 {
            a = x;
        } else {
            b = x;
        }
        if b - a <= 1e-13 * x.abs().max(1.0) {
            break;
        }
        let slope = dg(x);
        let newton = x - gx / slope;
        x = if slope < 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
    }

    let residual = g(x);
    if residual.abs() > ROOT_RESIDUAL_TOL {
        return Err(Error::NoRoot {
            lo,
            hi: hi_max,
            context: format!("refinement stalled with residual {residual:.3e}"),
        });
    }
    Ok(x)
}

/// Pure bisection solver over the same residual, used as an independent
/// cross-check of the Newton path.
pub fn nu_optimal_bisection(v: f64, c1: &SpdMatrix, c3: f64) -> Result<f64> {
    let d = c1.dim();
    let df = d as f64;
    let ln_c1 = c1.logdet()?;
    let g = |nu: f64| {
        df * ((nu - df - 1.0) / (v - df - 1.0)).ln() + digamma_dof_sum(d, v)
            - digamma_dof_sum(d, nu)
            - c3
            - ln_c1
    };
    let mut a = 2.0 * df + 1e-6;
    let mut b = (a + 1.0).min(ROOT_BRACKET_HI);
    while g(b) > 0.0 && b < ROOT_BRACKET_HI {
        b = (a + (b - a) * 4.0).min(ROOT_BRACKET_HI);
    }
    if g(b) > 0.0 {
        return Err(Error::NoRoot { lo: a, hi: b, context: "bisection bracket failed".into() });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Log-determinant moment of `IW_d(ν, V)` expressed from `(ν, ln|V|)`;
/// shared by the mixture collapse and the baseline prediction update.
pub(crate) fn iw_lndet_moment(d: usize, nu: f64, lndet_v: f64) -> f64 {
    lndet_v - d as f64 * std::f64::consts::LN_2 - digamma_dof_sum(d, nu)
}

/// `Σ ψ₀((n + 1 − i)/2)` for the Wishart log-determinant moment.
pub(crate) fn wishart_lndet_digamma_sum(d: usize, n: f64) -> f64 {
    (1..=d).map(|i| digamma_raw((n + 1.0 - i as f64) / 2.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matvar::{iw_entropy_moments, InverseWishartParams};

    #[test]
    fn projection_recovers_iw_moment_fixed_point() {
        let p = InverseWishartParams::new(
            12.0,
            SpdMatrix::from_diagonal(&[8.0, 4.0]).unwrap(),
        )
        .unwrap();
        let m = iw_entropy_moments(&p).unwrap();
        let out = kld_project_moments(&m).unwrap();
        assert!((out.nu() - 12.0).abs() < 1e-8, "nu = {}", out.nu());
        let err = (out.v_mat().as_matrix() - p.v_mat().as_matrix()).amax();
        assert!(err < 1e-8, "V error {err}");
    }

    #[test]
    fn projection_is_idempotent() {
        let p = InverseWishartParams::new(
            9.3,
            SpdMatrix::new(nalgebra::DMatrix::from_row_slice(2, 2, &[6.0, 1.5, 1.5, 3.0]))
                .unwrap(),
        )
        .unwrap();
        let m = iw_entropy_moments(&p).unwrap();
        let once = kld_project_moments(&m).unwrap();
        let p2 = InverseWishartParams::new(once.nu(), once.v_mat().clone()).unwrap();
        let twice = kld_project_moments(&iw_entropy_moments(&p2).unwrap()).unwrap();
        assert!((once.nu() - twice.nu()).abs() < 1e-8);
    }

    #[test]
    fn nu_optimal_exact_cancellation_returns_v() {
        // C₃ = −ln|C₁| makes ν* = v exactly.
        let c1 = SpdMatrix::from_diagonal(&[0.01, 0.04]).unwrap();
        let c3 = -c1.logdet().unwrap();
        for v in [6.5, 9.0, 30.0] {
            let nu = nu_optimal(v, &c1, c3).unwrap();
            assert!((nu - v).abs() < 1e-8, "v={v}: nu={nu}");
        }
    }

    #[test]
    fn nu_closed_form_unit_determinant_returns_v() {
        let c1 = SpdMatrix::from_diagonal(&[0.01, 0.04]).unwrap();
        let c2 = c1.inverse().unwrap();
        for v in [6.6, 12.0, 41.0] {
            let nu = nu_closed_form(v, &c1, &c2).unwrap();
            assert!((nu - v).abs() < 1e-10);
        }
    }

    #[test]
    fn nu_closed_form_rejects_jensen_violation() {
        // |C1 C2| far below one with small rho breaks the denominator.
        let c1 = SpdMatrix::from_diagonal(&[0.01, 0.04]).unwrap();
        let c2 = c1.inverse().unwrap().scale(0.05).unwrap();
        assert!(matches!(
            nu_closed_form(6.2, &c1, &c2),
            Err(Error::InconsistentMoments(_))
        ));
    }

    #[test]
    fn inconsistent_moments_are_rejected() {
        // E[ln|X|] below −ln|E[X⁻¹]| violates concavity.
        let e_inv = SpdMatrix::from_diagonal(&[2.0, 2.0]).unwrap();
        let e_lndet = -e_inv.logdet().unwrap() - 0.1;
        assert!(matches!(
            kld_project_to_iw(&e_inv, e_lndet),
            Err(Error::InconsistentMoments(_))
        ));
    }

    #[test]
    fn profiled_objective_is_unimodal_over_dof() {
        // With V held at its stationary value V*(ν) = (ν−d−1) E[X⁻¹]⁻¹ the
        // projection objective is a concave function of ν alone: a dense
        // grid must show exactly one rise-fall direction change.
        let p = InverseWishartParams::new(
            11.0,
            SpdMatrix::from_diagonal(&[40.0, 9.0]).unwrap(),
        )
        .unwrap();
        let m = iw_entropy_moments(&p).unwrap();
        let df = 2.0;
        let lndet_e_inv = m.e_inv.logdet().unwrap();
        let profiled = |nu: f64| {
            // tr(V* E[X⁻¹]) = (ν−d−1)·d
            let lndet_v = df * (nu - df - 1.0).ln() - lndet_e_inv;
            (nu - df - 1.0) / 2.0 * (lndet_v - df * std::f64::consts::LN_2)
                - nu / 2.0 * m.e_lndet
                - 0.5 * (nu - df - 1.0) * df
                - crate::numerics::ln_multigamma(2, (nu - df - 1.0) / 2.0).unwrap()
        };
        let n = 2000;
        let values: Vec<f64> =
            (0..=n).map(|i| profiled(4.05 + 56.0 * i as f64 / n as f64)).collect();
        let mut switches = 0;
        let mut rising = true;
        for w in values.windows(2) {
            let up = w[1] > w[0];
            if rising && !up {
                switches += 1;
                rising = false;
            } else if !rising && up {
                switches += 1;
                rising = true;
            }
        }
        assert_eq!(switches, 1, "profiled objective is not unimodal");
        // and the maximum sits at the solver's root
        let peak_idx =
            values.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        let peak_nu = 4.05 + 56.0 * peak_idx as f64 / n as f64;
        assert!((peak_nu - 11.0).abs() < 0.06, "peak at {peak_nu}");
    }

    #[test]
    fn newton_agrees_with_bisection() {
        let c1 = SpdMatrix::new(nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[0.012, 0.003, 0.003, 0.041],
        ))
        .unwrap();
        let c3 = -c1.logdet().unwrap() + 0.15;
        let v = 14.0;
        let newton = nu_optimal(v, &c1, c3).unwrap();
        let bisect = nu_optimal_bisection(v, &c1, c3).unwrap();
        assert!((newton - bisect).abs() < 1e-8, "{newton} vs {bisect}");
        let res = nu_optimal_residual(v, &c1, c3, newton).unwrap();
        assert!(res.abs() < 1e-10);
    }
}
