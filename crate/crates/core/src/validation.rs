//! Executable oracle suite.
//!
//! Every statistical or algebraic claim the library's updates rest on is
//! checked here by an independent route: brute-force sampling, quadrature,
//! finite differences or grid search. The suite backs `etrack validate` and
//! the acceptance tests; each check reports the worst observed statistic
//! against its threshold and carries tags linking it to the identity
//! register in [`COVERAGE_TAGS`].
//!
//! Checks are deterministic: every check derives its own counter-based RNG
//! stream from the suite seed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared as StatrsChi, ContinuousCDF};

use crate::correction::{correct, MeasurementSet, SensorModel};
use crate::extent::{
    intermediate_v, kld_project_to_iw, nu_closed_form, nu_optimal, nu_optimal_bisection,
    nu_optimal_residual, predict_conjugate, predict_wishart_baseline, predict_state_dependent,
    taylor_expectations, ConstantTransform, CurvatureWeight, ExtentState, RotationTransform,
    TransitionConfig, VRule,
};
use crate::kinematics::GaussianState;
use crate::matvar::{
    iw_entropy_moments, iw_logpdf, iw_sample, transition_sample, transition_sample_from_prior,
    wishart_sample, InverseWishartParams, WishartParams,
};
use crate::numerics::{
    digamma, ln_gamma, ln_multigamma, symmetrized, trigamma, SpdMatrix,
};
use crate::simharness::{
    anees, constant_turn_scenario, extent_error_ratio, generate_measurements, generate_truth,
    iw_element_variance, nees_kinematic, run_monte_carlo, Segment, TruthStep,
};
use crate::sweep::{nu_sweep, SweepGrid};

/// The identity register: claims the suite covers, with the checks mapping
/// to them through [`CheckResult::covers`].
pub const COVERAGE_TAGS: &[(&str, &str)] = &[
    ("L1", "factor-form extent transition model: noise moments and conditional/marginal laws"),
    ("L2", "KL projection onto the inverse Wishart family: stationarity, uniqueness, concavity"),
    ("L3", "inverse moment identity E[X^-1] = (v-d-1) C1"),
    ("L4", "log-determinant moment identity E[ln|X|] = C3 - d ln 2 - sum psi0"),
    ("L5", "vec-Kronecker contraction vec(V^-1)' (V (x) V) vec(V^-1) = d"),
    ("L6", "trigamma sum lower bound sum psi1((nu-d-i)/2) > 2d/(nu-d-1)"),
    ("C1", "trigamma bound against the vec-Kronecker quadratic form"),
    ("L7", "multivariate gamma log-derivative identity"),
    ("L8", "determinant power derivative identity"),
    ("L9", "volume coupling of the transition dof under the noise matrix"),
    ("T1", "volume-matched closed-form predicted dof"),
];

/// Outcome of one oracle check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub covers: Vec<&'static str>,
    pub passed: bool,
    /// Worst observed statistic (interpretation in `detail`).
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn from_stat(
        name: &str,
        covers: &[&'static str],
        statistic: f64,
        threshold: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            covers: covers.to_vec(),
            passed: statistic <= threshold && statistic.is_finite(),
            statistic,
            threshold,
            detail: detail.into(),
        }
    }

    fn error(name: &str, covers: &[&'static str], err: impl std::fmt::Display) -> Self {
        Self {
            name: name.into(),
            covers: covers.to_vec(),
            passed: false,
            statistic: f64::NAN,
            threshold: 0.0,
            detail: format!("check aborted: {err}"),
        }
    }
}

/// Full suite outcome.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Tag -> names of the checks exercising it.
    pub fn coverage(&self) -> Vec<(&'static str, &'static str, Vec<String>)> {
        COVERAGE_TAGS
            .iter()
            .map(|(tag, desc)| {
                let names = self
                    .checks
                    .iter()
                    .filter(|c| c.covers.contains(tag))
                    .map(|c| c.name.clone())
                    .collect();
                (*tag, *desc, names)
            })
            .collect()
    }
}

type CheckFn = fn(u64) -> CheckResult;

/// Registry of all checks in execution order.
pub fn check_registry() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("cholesky-reconstruction", check_cholesky_reconstruction as CheckFn),
        ("sym-sqrt-squaring", check_sym_sqrt_squaring),
        ("logdet-eigen-agreement", check_logdet_eigen_agreement),
        ("digamma-trigamma-recurrences", check_digamma_trigamma_recurrences),
        ("vec-kronecker-identity", check_vec_kronecker_identity),
        ("trigamma-sum-lower-bound", check_trigamma_sum_lower_bound),
        ("multigamma-log-derivative", check_multigamma_log_derivative),
        ("det-power-derivative", check_det_power_derivative),
        ("iw-density-normalization", check_iw_density_normalization),
        ("iw-sample-mean", check_iw_sample_mean),
        ("iw-inverse-sample-mean", check_iw_inverse_sample_mean),
        ("iw-moment-formulas-vs-sampling", check_iw_moment_formulas),
        ("iw-element-variance-vs-sampling", check_iw_element_variance),
        ("wishart-sample-mean", check_wishart_sample_mean),
        ("wishart-chi-square-ks", check_wishart_chi_square_ks),
        ("transition-noise-moments", check_transition_noise_moments),
        ("transition-fixed-state-mean", check_transition_fixed_state_mean),
        ("transition-conjugate-marginal", check_transition_conjugate_marginal),
        ("intermediate-matrix-identity", check_intermediate_matrix_identity),
        ("curvature-expectation-oracle", check_curvature_expectation_oracle),
        ("dof-root-residual-and-bisection", check_dof_root_residual),
        ("closed-form-dof-floor", check_closed_form_dof_floor),
        ("closed-vs-optimal-sweep", check_closed_vs_optimal_sweep),
        ("kl-projection-fixed-point", check_kl_projection_fixed_point),
        ("kl-projection-grid-oracle", check_kl_projection_grid_oracle),
        ("kl-objective-concavity", check_kl_objective_concavity),
        ("state-dependent-reduction-to-conjugate", check_state_dependent_reduction),
        ("state-dependent-volume-match", check_state_dependent_volume_match),
        ("state-dependent-end-to-end-ensemble", check_state_dependent_end_to_end),
        ("wishart-baseline-low-noise-limit", check_wishart_baseline_low_noise_limit),
        ("wishart-baseline-scalar-grid-oracle", check_wishart_baseline_scalar_grid),
        ("wishart-baseline-sampled-moments", check_wishart_baseline_sampled_moments),
        ("volume-coupled-transition", check_volume_coupled_transition),
        ("volume-preserving-transition", check_volume_preserving_transition),
        ("correction-consistency", check_correction_consistency),
        ("correction-loewner-and-psd", check_correction_loewner),
        ("truth-arc-length", check_truth_arc_length),
        ("measurement-covariance-quarter", check_measurement_covariance),
        ("poisson-count-mean", check_poisson_count_mean),
        ("gw-scalar-reduction", check_gw_scalar_reduction),
        ("anees-consistency", check_anees_consistency),
        ("mc-determinism-across-threads", check_mc_determinism),
    ]
}

/// Runs every check.
pub fn run_all(seed: u64) -> ValidationReport {
    run_filtered(seed, None)
}

/// Runs the checks whose name contains `filter` (all when `None`). Each
/// check's seed derives from its registry position, so a check behaves
/// identically whether run alone or as part of the full suite.
pub fn run_filtered(seed: u64, filter: Option<&str>) -> ValidationReport {
    let checks = check_registry()
        .into_iter()
        .enumerate()
        .filter(|(_, (name, _))| filter.map_or(true, |f| name.contains(f)))
        .map(|(idx, (_, f))| f(seed.wrapping_add(idx as u64)))
        .collect();
    ValidationReport { seed, checks }
}

fn rng_for(seed: u64, lane: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(0x5eed_0000 + lane);
    rng
}

/// Random SPD matrix with eigenvalues uniform in `[lo, hi]` under a random
/// orthogonal frame.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, d: usize, lo: f64, hi: f64) -> SpdMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let eig = DVector::from_fn(d, |_, _| lo + (hi - lo) * rng.random::<f64>());
    SpdMatrix::new(symmetrized(&(&q * DMatrix::from_diagonal(&eig) * q.transpose())))
        .expect("positive eigenvalues")
}

fn rel_err_matrix(got: &DMatrix<f64>, expect: &DMatrix<f64>) -> f64 {
    let scale = expect.amax().max(f64::MIN_POSITIVE);
    (got - expect).amax() / scale
}

// ---------------------------------------------------------------------------
// numerics
// ---------------------------------------------------------------------------

fn check_cholesky_reconstruction(seed: u64) -> CheckResult {
    let name = "cholesky-reconstruction";
    let mut rng = rng_for(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = 2 + (rng.random::<f64>() * 5.0) as usize;
        let a = random_spd(&mut rng, d, 0.1, 50.0);
        let l = match a.chol_lower() {
            Ok(l) => l,
            Err(e) => return CheckResult::error(name, &[], e),
        };
        let err = (l * l.transpose() - a.as_matrix()).norm() / a.as_matrix().norm();
        worst = worst.max(err);
    }
    CheckResult::from_stat(name, &[], worst, 1e-10, "max relative Frobenius reconstruction error")
}

fn check_sym_sqrt_squaring(seed: u64) -> CheckResult {
    let name = "sym-sqrt-squaring";
    let mut rng = rng_for(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = 2 + (rng.random::<f64>() * 5.0) as usize;
        let a = random_spd(&mut rng, d, 0.1, 50.0);
        let s = match a.sym_sqrt() {
            Ok(s) => s,
            Err(e) => return CheckResult::error(name, &[], e),
        };
        let err = (s.as_matrix() * s.as_matrix() - a.as_matrix()).norm() / a.as_matrix().norm();
        worst = worst.max(err);
    }
    CheckResult::from_stat(name, &[], worst, 1e-10, "max relative squaring error")
}

fn check_logdet_eigen_agreement(seed: u64) -> CheckResult {
    let name = "logdet-eigen-agreement";
    let mut rng = rng_for(seed, 3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = 2 + (rng.random::<f64>() * 5.0) as usize;
        let a = random_spd(&mut rng, d, 0.1, 50.0);
        let via_eig: f64 = a.as_matrix().clone().symmetric_eigenvalues().iter().map(|l| l.ln()).sum();
        let got = match a.logdet() {
            Ok(v) => v,
            Err(e) => return CheckResult::error(name, &[], e),
        };
        worst = worst.max((got - via_eig).abs());
    }
    CheckResult::from_stat(name, &[], worst, 1e-10, "max |logdet - sum of log-eigenvalues|")
}

fn check_digamma_trigamma_recurrences(seed: u64) -> CheckResult {
    let name = "digamma-trigamma-recurrences";
    let mut rng = rng_for(seed, 4);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let x = 0.1 * (1000.0f64).powf(rng.random::<f64>()); // log-uniform [0.1, 100]
        let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
        let t = trigamma(x + 1.0).unwrap() - trigamma(x).unwrap() + 1.0 / (x * x);
        worst = worst.max(d.abs()).max(t.abs());
    }
    CheckResult::from_stat(name, &[], worst, 1e-12, "max recurrence defect over [0.1, 100]")
}

fn check_vec_kronecker_identity(seed: u64) -> CheckResult {
    let name = "vec-kronecker-identity";
    let mut rng = rng_for(seed, 5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let d = 1 + (rng.random::<f64>() * 4.0) as usize;
        let v = random_spd(&mut rng, d, 0.05, 20.0);
        let value = vec_kron_quadratic(&v);
        worst = worst.max((value - d as f64).abs());
    }
    CheckResult::from_stat(name, &["L5"], worst, 1e-9, "max |vec(V^-1)' (V (x) V) vec(V^-1) - d|")
}

/// `vec(V⁻¹)ᵀ (V ⊗ V) vec(V⁻¹)`, formed explicitly.
pub fn vec_kron_quadratic(v: &SpdMatrix) -> f64 {
    let inv = v.inverse().expect("SPD");
    let d = v.dim();
    let vec_inv = DVector::from_fn(d * d, |k, _| inv.as_matrix()[(k % d, k / d)]);
    let kron = v.as_matrix().kronecker(v.as_matrix());
    (vec_inv.transpose() * kron * &vec_inv)[(0, 0)]
}

/// Margin of the trigamma lower bound at `(d, nu)` for an arbitrary
/// trigamma implementation; negative means the bound is violated. The
/// parameterization lets fault-injection tests confirm the check's power.
pub fn trigamma_bound_margin(trigamma_fn: &dyn Fn(f64) -> f64, d: usize, nu: f64) -> f64 {
    let df = d as f64;
    let sum: f64 = (1..=d).map(|i| trigamma_fn((nu - df - i as f64) / 2.0)).sum();
    sum - 2.0 * df / (nu - df - 1.0)
}

fn check_trigamma_sum_lower_bound(seed: u64) -> CheckResult {
    let name = "trigamma-sum-lower-bound";
    let mut rng = rng_for(seed, 6);
    let tri = |x: f64| trigamma(x).unwrap();
    let mut min_margin = f64::INFINITY;
    for _ in 0..10_000 {
        let d = 1 + (rng.random::<f64>() * 4.0) as usize;
        let nu = 2.0 * d as f64 + 1e-3 + rng.random::<f64>() * 50.0;
        min_margin = min_margin.min(trigamma_bound_margin(&tri, d, nu));

        // quadratic-form variant of the bound: the right side written through
        // the vec-Kronecker contraction
        let v = random_spd(&mut rng, d, 0.1, 10.0);
        let rhs = 2.0 / (nu - d as f64 - 1.0) * vec_kron_quadratic(&v);
        let lhs: f64 = (1..=d).map(|i| tri((nu - d as f64 - i as f64) / 2.0)).sum();
        min_margin = min_margin.min(lhs - rhs);
    }
    // pass iff every margin positive; encode as statistic = -min_margin <= 0
    CheckResult::from_stat(
        name,
        &["L6", "C1"],
        -min_margin,
        0.0,
        format!("negated minimum bound margin over 1e4 samples (margin {min_margin:.3e})"),
    )
}

fn check_multigamma_log_derivative(seed: u64) -> CheckResult {
    let name = "multigamma-log-derivative";
    let mut rng = rng_for(seed, 7);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = 1 + (rng.random::<f64>() * 4.0) as usize;
        let df = d as f64;
        let nu = 2.0 * df + 1.0 + rng.random::<f64>() * 30.0;
        let s = rng.random::<f64>() * 0.2 - 0.1;
        let f = |s: f64| ln_multigamma(d, (nu - 2.0 * s - df - 1.0) / 2.0).unwrap();
        let h = 1e-5;
        let fd = (f(s + h) - f(s - h)) / (2.0 * h);
        let analytic: f64 =
            -(1..=d).map(|i| digamma((nu - 2.0 * s - df - i as f64) / 2.0).unwrap()).sum::<f64>();
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(1.0));
    }
    CheckResult::from_stat(name, &["L7"], worst, 1e-6, "max relative defect vs central differences")
}

fn check_det_power_derivative(seed: u64) -> CheckResult {
    let name = "det-power-derivative";
    let mut rng = rng_for(seed, 8);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = 1 + (rng.random::<f64>() * 3.0) as usize;
        let v = random_spd(&mut rng, d, 0.2, 30.0);
        let lndet = v.logdet().unwrap();
        let s = rng.random::<f64>() * 2.0 - 1.0;
        let g = |s: f64| (s * (lndet - d as f64 * std::f64::consts::LN_2)).exp();
        let h = 1e-6;
        let fd = (g(s + h) - g(s - h)) / (2.0 * h);
        let analytic = (lndet - d as f64 * std::f64::consts::LN_2) * g(s);
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-12));
    }
    CheckResult::from_stat(name, &["L8"], worst, 1e-6, "max relative defect vs central differences")
}

// ---------------------------------------------------------------------------
// matrix-variate distributions
// ---------------------------------------------------------------------------

fn check_iw_density_normalization(_seed: u64) -> CheckResult {
    let name = "iw-density-normalization";
    let p = InverseWishartParams::new(5.0, SpdMatrix::from_diagonal(&[2.0]).unwrap()).unwrap();
    // integrate exp(logpdf) over x = e^u, du-grid on [-14, 14]
    let (lo, hi, n) = (-14.0f64, 14.0f64, 56_000usize);
    let h = (hi - lo) / n as f64;
    let f = |u: f64| {
        let x = u.exp();
        let lp = iw_logpdf(&SpdMatrix::from_diagonal(&[x]).unwrap(), &p).unwrap();
        (lp + u).exp() // jacobian dx = e^u du
    };
    // composite Simpson
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let u = lo + k as f64 * h;
        acc += f(u) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = acc * h / 3.0;
    CheckResult::from_stat(
        name,
        &[],
        (integral - 1.0).abs(),
        1e-6,
        format!("|quadrature mass - 1| (mass {integral:.9})"),
    )
}

fn check_iw_sample_mean(seed: u64) -> CheckResult {
    let name = "iw-sample-mean";
    let mut rng = rng_for(seed, 9);
    let p = InverseWishartParams::new(10.0, SpdMatrix::from_diagonal(&[8.0, 4.0]).unwrap())
        .unwrap();
    let n = 1_000_000usize;
    let mut acc = DMatrix::zeros(2, 2);
    for _ in 0..n {
        acc += iw_sample(&mut rng, &p).unwrap().as_matrix();
    }
    acc /= n as f64;
    let expect = p.mean().unwrap();
    CheckResult::from_stat(
        name,
        &[],
        rel_err_matrix(&acc, expect.as_matrix()),
        0.02,
        "max per-entry relative error of the sample mean vs V/(nu-2d-2), 1e6 draws",
    )
}

fn check_iw_inverse_sample_mean(seed: u64) -> CheckResult {
    let name = "iw-inverse-sample-mean";
    let mut rng = rng_for(seed, 10);
    let p = InverseWishartParams::new(12.0, SpdMatrix::from_diagonal(&[8.0, 4.0]).unwrap())
        .unwrap();
    let n = 1_000_000usize;
    let mut acc = DMatrix::zeros(2, 2);
    for _ in 0..n {
        acc += iw_sample(&mut rng, &p).unwrap().inverse().unwrap().as_matrix();
    }
    acc /= n as f64;
    let expect = p.v_mat().inverse().unwrap().scale(12.0 - 3.0).unwrap();
    CheckResult::from_stat(
        name,
        &["L3"],
        rel_err_matrix(&acc, expect.as_matrix()),
        0.02,
        "max per-entry relative error of E[X^-1] vs (nu-d-1)V^-1, 1e6 draws",
    )
}

fn check_iw_moment_formulas(seed: u64) -> CheckResult {
    let name = "iw-moment-formulas-vs-sampling";
    let mut rng = rng_for(seed, 11);
    let v = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[9.0, 2.5, 2.5, 5.0])).unwrap();
    let p = InverseWishartParams::new(11.0, v).unwrap();
    let analytic = iw_entropy_moments(&p).unwrap();
    let n = 1_000_000usize;
    let mut acc_inv = DMatrix::zeros(2, 2);
    let mut acc_ld = 0.0;
    for _ in 0..n {
        let x = iw_sample(&mut rng, &p).unwrap();
        acc_inv += x.inverse().unwrap().as_matrix();
        acc_ld += x.logdet().unwrap();
    }
    acc_inv /= n as f64;
    acc_ld /= n as f64;
    let err_inv = rel_err_matrix(&acc_inv, analytic.e_inv.as_matrix());
    let err_ld = (acc_ld - analytic.e_lndet).abs() / analytic.e_lndet.abs().max(1.0);
    CheckResult::from_stat(
        name,
        &["L3", "L4"],
        err_inv.max(err_ld),
        0.01,
        format!("worst of E[X^-1] ({err_inv:.2e}) and E[ln|X|] ({err_ld:.2e}) errors, 1e6 draws"),
    )
}

fn check_iw_element_variance(seed: u64) -> CheckResult {
    let name = "iw-element-variance-vs-sampling";
    let mut rng = rng_for(seed, 12);
    let v = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[12.0, 3.0, 3.0, 7.0])).unwrap();
    let nu = 14.0;
    let p = InverseWishartParams::new(nu, v.clone()).unwrap();
    let mean = p.mean().unwrap();
    let n = 1_000_000usize;
    let mut acc = DMatrix::zeros(2, 2);
    for _ in 0..n {
        let x = iw_sample(&mut rng, &p).unwrap();
        let d = x.as_matrix() - mean.as_matrix();
        acc += d.component_mul(&d);
    }
    acc /= n as f64;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            scale = scale.max(iw_element_variance(nu, &v, i, j).unwrap());
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            let expect = iw_element_variance(nu, &v, i, j).unwrap();
            worst = worst.max((acc[(i, j)] - expect).abs() / scale);
        }
    }
    CheckResult::from_stat(
        name,
        &[],
        worst,
        0.02,
        "max per-entry error of Var(X_ij) vs the closed form, relative to the largest variance",
    )
}

fn check_wishart_sample_mean(seed: u64) -> CheckResult {
    let name = "wishart-sample-mean";
    let mut rng = rng_for(seed, 13);
    let w_mat = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.2])).unwrap();
    let p = WishartParams::new(6.5, w_mat).unwrap();
    let n = 1_000_000usize;
    let mut acc = DMatrix::zeros(2, 2);
    for _ in 0..n {
        acc += wishart_sample(&mut rng, &p).unwrap().as_matrix();
    }
    acc /= n as f64;
    let expect = p.mean();
    CheckResult::from_stat(
        name,
        &[],
        rel_err_matrix(&acc, expect.as_matrix()),
        0.01,
        "max per-entry relative error of the sample mean vs wW, 1e6 draws",
    )
}

fn check_wishart_chi_square_ks(seed: u64) -> CheckResult {
    let name = "wishart-chi-square-ks";
    let mut rng = rng_for(seed, 14);
    let k = 4.0;
    let p = WishartParams::new(k, SpdMatrix::identity(1)).unwrap();
    let n = 100_000usize;
    let mut draws: Vec<f64> = (0..n)
        .map(|_| wishart_sample(&mut rng, &p).unwrap().as_matrix()[(0, 0)])
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let chi = StatrsChi::new(k).unwrap();
    let mut d_stat = 0.0f64;
    for (i, x) in draws.iter().enumerate() {
        let f = chi.cdf(*x);
        d_stat = d_stat.max((f - i as f64 / n as f64).abs());
        d_stat = d_stat.max(((i + 1) as f64 / n as f64 - f).abs());
    }
    let sqrt_n = (n as f64).sqrt();
    let t = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d_stat;
    let p_value = 2.0
        * (1..=100)
            .map(|j| {
                let jj = j as f64;
                (-1.0f64).powi(j as i32 - 1) * (-2.0 * jj * jj * t * t).exp()
            })
            .sum::<f64>();
    // statistic = 0.01 − p: passes when p > 0.01
    CheckResult::from_stat(
        name,
        &[],
        0.01 - p_value,
        0.0,
        format!("0.01 - KS p-value (p = {p_value:.4}, D = {d_stat:.5}, 1e5 draws vs chi-square 4)"),
    )
}

fn check_transition_noise_moments(seed: u64) -> CheckResult {
    let name = "transition-noise-moments";
    let mut rng = rng_for(seed, 15);
    let q = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[0.08, 0.02, 0.02, 0.05])).unwrap();
    let v = 17.0;
    let n_dof = v - 3.0; // d = 2
    let p = WishartParams::new(n_dof, q.scale(1.0 / n_dof).unwrap()).unwrap();
    let n = 1_000_000usize;
    let mut acc_mean = DMatrix::zeros(2, 2);
    let mut acc_var = DMatrix::zeros(2, 2);
    for _ in 0..n {
        let w = wishart_sample(&mut rng, &p).unwrap();
        let dm = w.as_matrix() - q.as_matrix();
        acc_mean += w.as_matrix();
        acc_var += &dm * &dm;
    }
    acc_mean /= n as f64;
    acc_var /= n as f64;
    let expect_var = (q.as_matrix() * q.as_matrix() + q.as_matrix().trace() * q.as_matrix())
        / n_dof;
    let err_mean = rel_err_matrix(&acc_mean, q.as_matrix());
    let err_var = rel_err_matrix(&symmetrized(&acc_var), &expect_var);
    CheckResult::from_stat(
        name,
        &["L1"],
        err_mean.max(err_var),
        0.02,
        format!("worst of E[W] ({err_mean:.2e}) and Var(W) ({err_var:.2e}) errors, 1e6 draws"),
    )
}

fn check_transition_fixed_state_mean(seed: u64) -> CheckResult {
    let name = "transition-fixed-state-mean";
    let mut rng = rng_for(seed, 16);
    let x_prev = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[400.0, 60.0, 60.0, 120.0]))
        .unwrap();
    let q = SpdMatrix::from_diagonal(&[0.01, 0.03]).unwrap();
    let v = 17.0;
    let n_dof = v - 3.0;
    let angle = 0.2f64;
    let m = DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
    let n = 1_000_000usize;
    let mut acc = DMatrix::zeros(2, 2);
    for _ in 0..n {
        let x = transition_sample(&mut rng, &x_prev, &m, &q, v).unwrap();
        acc += x.inverse().unwrap().as_matrix();
    }
    acc /= n as f64;
    let m_inv_t = m.clone().try_inverse().unwrap().transpose();
    let expect = symmetrized(
        &(&m_inv_t * (x_prev.inverse().unwrap().as_matrix() + n_dof * q.as_matrix()) * m_inv_t.transpose()),
    );
    CheckResult::from_stat(
        name,
        &["L1"],
        rel_err_matrix(&acc, &expect),
        0.02,
        "E[X_next^-1 | X_prev] vs M^-T (X_prev^-1 + nQ) M^-1, 1e6 draws",
    )
}

fn check_transition_conjugate_marginal(seed: u64) -> CheckResult {
    let name = "transition-conjugate-marginal";
    let mut rng = rng_for(seed, 17);
    let nu = 20.0;
    let v_mat = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1400.0, 200.0, 200.0, 420.0]))
        .unwrap();
    let prior = InverseWishartParams::new(nu, v_mat.clone()).unwrap();
    let q = SpdMatrix::from_diagonal(&[0.004, 0.011]).unwrap();
    let v = 14.0;
    let eye = DMatrix::identity(2, 2);
    let n = 1_000_000usize;

    // coupled factor route: the transition consumes the prior's factor
    // columns, so the marginal is exactly IW(v, V(I+QV)^-1) for v < nu
    let mut acc_inv = DMatrix::zeros(2, 2);
    let mut acc_ld = 0.0;
    for _ in 0..n {
        let (_, x_next) =
            transition_sample_from_prior(&mut rng, &prior, &eye, &q, v).unwrap();
        acc_inv += x_next.inverse().unwrap().as_matrix();
        acc_ld += x_next.logdet().unwrap();
    }
    acc_inv /= n as f64;
    acc_ld /= n as f64;
    let v_bar = intermediate_v(&v_mat, &q).unwrap();
    let expect = iw_entropy_moments(&InverseWishartParams::new(v, v_bar.clone()).unwrap()).unwrap();
    let err_inv = rel_err_matrix(&acc_inv, expect.e_inv.as_matrix());
    let err_ld = (acc_ld - expect.e_lndet).abs() / expect.e_lndet.abs().max(1.0);

    // fixed-extent route: the per-state sampler reproduces the same marginal
    // when the transition dof equals the prior dof
    let prior_eq = InverseWishartParams::new(v, v_mat.clone()).unwrap();
    let mut acc_inv2 = DMatrix::zeros(2, 2);
    let mut acc_ld2 = 0.0;
    for _ in 0..n {
        let x_prev = iw_sample(&mut rng, &prior_eq).unwrap();
        let x_next = transition_sample(&mut rng, &x_prev, &eye, &q, v).unwrap();
        acc_inv2 += x_next.inverse().unwrap().as_matrix();
        acc_ld2 += x_next.logdet().unwrap();
    }
    acc_inv2 /= n as f64;
    acc_ld2 /= n as f64;
    let err_inv2 = rel_err_matrix(&acc_inv2, expect.e_inv.as_matrix());
    let err_ld2 = (acc_ld2 - expect.e_lndet).abs() / expect.e_lndet.abs().max(1.0);

    CheckResult::from_stat(
        name,
        &["L1", "L3", "L4"],
        err_inv.max(err_ld).max(err_inv2).max(err_ld2),
        0.02,
        format!(
            "marginal vs conjugate prediction IW(v, V(I+QV)^-1), 1e6 draws each: coupled \
             factor route (v {v} < nu {nu}) E[X^-1] err {err_inv:.2e}, E[ln|X|] err \
             {err_ld:.2e}; fixed-extent route at v = nu: {err_inv2:.2e}, {err_ld2:.2e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// extent updates
// ---------------------------------------------------------------------------

fn check_intermediate_matrix_identity(seed: u64) -> CheckResult {
    let name = "intermediate-matrix-identity";
    let mut rng = rng_for(seed, 18);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let v = random_spd(&mut rng, 2, 0.5, 100.0);
        let q = random_spd(&mut rng, 2, 1e-5, 0.8);
        let direct = v.as_matrix()
            * (DMatrix::identity(2, 2) + q.as_matrix() * v.as_matrix())
                .try_inverse()
                .unwrap();
        let got = intermediate_v(&v, &q).unwrap();
        worst = worst.max(rel_err_matrix(got.as_matrix(), &symmetrized(&direct)));
    }
    CheckResult::from_stat(name, &[], worst, 1e-10, "symmetric route vs direct product V(I+QV)^-1")
}

fn check_curvature_expectation_oracle(seed: u64) -> CheckResult {
    let name = "curvature-expectation-oracle";
    let mut rng = rng_for(seed, 19);
    let v_bar = SpdMatrix::from_diagonal(&[100.0, 25.0]).unwrap();
    let omega = 10f64.to_radians();
    let rotation = RotationTransform::new(1.0, 4);
    let n = 10_000_000usize;

    let mut worst_half = 0.0f64;
    let mut detail = String::new();
    for std_deg in [2.0f64, 10.0] {
        let sigma = std_deg.to_radians();
        // exact Monte-Carlo expectations over omega ~ N(omega, sigma^2)
        let mut mc_v = DMatrix::zeros(2, 2);
        let mut mc_inv = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let w = omega + sigma * rng.sample::<f64, _>(StandardNormal);
            let (s, c) = w.sin_cos();
            let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            let vm = &rot * v_bar.as_matrix() * rot.transpose();
            mc_inv += vm.clone().try_inverse().unwrap();
            mc_v += vm;
        }
        mc_v /= n as f64;
        mc_inv /= n as f64;

        let mut p = DMatrix::zeros(5, 5);
        p[(4, 4)] = sigma * sigma;
        let kin = GaussianState {
            mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, omega]),
            cov: SpdMatrix::new_semidefinite(p).unwrap(),
        };
        for weight in [CurvatureWeight::Half, CurvatureWeight::Full] {
            let tay = taylor_expectations(&rotation, &v_bar, &kin, weight).unwrap();
            let e1 = rel_err_matrix(tay.c1.as_matrix(), &mc_inv);
            let e2 = rel_err_matrix(tay.c2.as_matrix(), &mc_v);
            if weight == CurvatureWeight::Half {
                worst_half = worst_half.max(e1).max(e2);
            }
            detail.push_str(&format!(
                "std {std_deg} deg, {weight:?}: C1 err {e1:.4}, C2 err {e2:.4}; "
            ));
        }
    }
    CheckResult::from_stat(
        name,
        &[],
        worst_half,
        0.02,
        format!("half-weight expansion vs 1e7-sample expectations; {detail}"),
    )
}

fn check_dof_root_residual(seed: u64) -> CheckResult {
    let name = "dof-root-residual-and-bisection";
    let mut rng = rng_for(seed, 20);
    let mut worst_res = 0.0f64;
    let mut worst_gap = 0.0f64;
    for _ in 0..200 {
        let c1 = random_spd(&mut rng, 2, 1e-3, 0.2);
        // keep the moment pair consistent: C3 >= -ln|C1|
        let c3 = -c1.logdet().unwrap() + rng.random::<f64>() * 0.8 + 1e-4;
        let v = 6.6 + rng.random::<f64>() * 40.0;
        let nu = match nu_optimal(v, &c1, c3) {
            Ok(nu) => nu,
            Err(e) => return CheckResult::error(name, &["L2"], e),
        };
        worst_res = worst_res.max(nu_optimal_residual(v, &c1, c3, nu).unwrap().abs());
        let bis = nu_optimal_bisection(v, &c1, c3).unwrap();
        worst_gap = worst_gap.max((nu - bis).abs());
    }
    CheckResult::from_stat(
        name,
        &["L2"],
        worst_res.max(worst_gap / 100.0),
        1e-10,
        format!("max residual {worst_res:.2e}; max Newton-bisection gap {worst_gap:.2e} (scaled 1e-2)"),
    )
}

fn check_closed_form_dof_floor(seed: u64) -> CheckResult {
    let name = "closed-form-dof-floor";
    let mut rng = rng_for(seed, 21);
    let mut min_excess = f64::INFINITY;
    for _ in 0..10_000 {
        let c1 = random_spd(&mut rng, 2, 1e-3, 0.5);
        // scale a random C2 so ln|C1 C2| lands uniformly in [0, 4]
        let base = random_spd(&mut rng, 2, 0.5, 50.0);
        let target = rng.random::<f64>() * 4.0;
        let adjust = ((target - c1.logdet().unwrap() - base.logdet().unwrap()) / 2.0).exp();
        let c2 = base.scale(adjust).unwrap();
        let v = 6.0 + 1e-3 + rng.random::<f64>() * 50.0;
        match nu_closed_form(v, &c1, &c2) {
            Ok(nu) => min_excess = min_excess.min(nu - 6.0),
            Err(e) => return CheckResult::error(name, &["T1"], e),
        }
    }
    CheckResult::from_stat(
        name,
        &["T1"],
        -min_excess,
        0.0,
        format!("negated min (nu - 2d - 2) over 1e4 cases with |C1C2| >= 1 (excess {min_excess:.3e})"),
    )
}

fn check_closed_vs_optimal_sweep(_seed: u64) -> CheckResult {
    let name = "closed-vs-optimal-sweep";
    let rows = match nu_sweep(&SweepGrid::default(), CurvatureWeight::Full) {
        Ok(r) => r,
        Err(e) => return CheckResult::error(name, &["T1", "L2"], e),
    };
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
    CheckResult::from_stat(
        name,
        &["T1", "L2"],
        worst,
        0.10,
        format!("max relative closed-vs-optimal dof deviation over {} grid points", rows.len()),
    )
}

fn check_kl_projection_fixed_point(seed: u64) -> CheckResult {
    let name = "kl-projection-fixed-point";
    let mut rng = rng_for(seed, 22);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let nu = 6.5 + rng.random::<f64>() * 53.5;
        let v = random_spd(&mut rng, 2, 0.2, 200.0);
        let p = InverseWishartParams::new(nu, v.clone()).unwrap();
        let m = iw_entropy_moments(&p).unwrap();
        let out = match kld_project_to_iw(&m.e_inv, m.e_lndet) {
            Ok(o) => o,
            Err(e) => return CheckResult::error(name, &["L2"], e),
        };
        worst = worst.max((out.nu() - nu).abs() / nu);
        worst = worst.max(rel_err_matrix(out.v_mat().as_matrix(), v.as_matrix()));
    }
    CheckResult::from_stat(name, &["L2"], worst, 1e-8, "max relative recovery error over 1e3 cases")
}

fn check_kl_projection_grid_oracle(_seed: u64) -> CheckResult {
    let name = "kl-projection-grid-oracle";
    // moments of a two-component inverse-gamma mixture (d = 1)
    let comps: [(f64, f64, f64); 2] = [(0.55, 4.0, 6.0), (0.45, 7.0, 18.0)]; // (w, shape, scale)
    let e_inv: f64 = comps.iter().map(|(w, a, b)| w * a / b).sum();
    let e_lndet: f64 = comps
        .iter()
        .map(|(w, a, b)| w * (b.ln() - digamma(*a).unwrap()))
        .sum();

    let e_inv_m = SpdMatrix::from_diagonal(&[e_inv]).unwrap();
    let projected = match kld_project_to_iw(&e_inv_m, e_lndet) {
        Ok(p) => p,
        Err(e) => return CheckResult::error(name, &["L2"], e),
    };

    // dense independent grid over (nu, V)
    let objective = |nu: f64, v: f64| -> f64 {
        (nu - 2.0) / 2.0 * (v.ln() - std::f64::consts::LN_2) - nu / 2.0 * e_lndet
            - 0.5 * v * e_inv
            - ln_gamma((nu - 2.0) / 2.0).unwrap()
    };
    let (mut best_nu, mut best_v, mut best) = (0.0, 0.0, f64::NEG_INFINITY);
    let (nu_lo, nu_hi, nu_n) = (2.2f64, 40.0f64, 1200usize);
    let v_center = projected.v_mat().as_matrix()[(0, 0)];
    let (v_lo, v_hi, v_n) = (0.3 * v_center, 3.0 * v_center, 1200usize);
    for i in 0..=nu_n {
        let nu = nu_lo + (nu_hi - nu_lo) * i as f64 / nu_n as f64;
        for j in 0..=v_n {
            let v = v_lo + (v_hi - v_lo) * j as f64 / v_n as f64;
            let f = objective(nu, v);
            if f > best {
                best = f;
                best_nu = nu;
                best_v = v;
            }
        }
    }
    let d_nu = (nu_hi - nu_lo) / nu_n as f64;
    let d_v = (v_hi - v_lo) / v_n as f64;
    let v_proj = projected.v_mat().as_matrix()[(0, 0)];
    let err_nu = (projected.nu() - best_nu).abs() / d_nu;
    // the optimum sits on the ridge V*(nu) = (nu-d-1)/E[X^-1]; grid
    // quantization in nu displaces the grid argmax along it
    let ridge_slope = v_proj / (projected.nu() - 2.0);
    let err_v = (v_proj - best_v).abs() / (d_v + ridge_slope * d_nu);
    // optimality certificate: the projector's point must not be beaten by
    // any grid point (up to evaluation roundoff)
    let f_proj = objective(projected.nu(), v_proj);
    let certificate = (best - f_proj) / f_proj.abs().max(1.0);
    let stat = (err_nu.max(err_v) / 2.0).max(certificate / 1e-9);
    CheckResult::from_stat(
        name,
        &["L2"],
        stat,
        1.0,
        format!(
            "argmax within two ridge-adjusted grid steps and objective certificate 1e-9 \
             (nu* {:.4} vs grid {best_nu:.4}, certificate {certificate:.1e})",
            projected.nu()
        ),
    )
}

fn check_kl_objective_concavity(seed: u64) -> CheckResult {
    let name = "kl-objective-concavity";
    let mut rng = rng_for(seed, 23);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let nu_true = 7.0 + rng.random::<f64>() * 20.0;
        let v_true = random_spd(&mut rng, 2, 0.5, 40.0);
        let p = InverseWishartParams::new(nu_true, v_true).unwrap();
        let m = iw_entropy_moments(&p).unwrap();
        let opt = kld_project_to_iw(&m.e_inv, m.e_lndet).unwrap();

        // objective over theta = (nu, V11, V12, V22)
        let e_inv = m.e_inv.as_matrix().clone();
        let e_ld = m.e_lndet;
        let f = |th: &[f64; 4]| -> f64 {
            let v = DMatrix::from_row_slice(2, 2, &[th[1], th[2], th[2], th[3]]);
            let chol = match crate::numerics::cholesky_lower(&v) {
                Ok(c) => c,
                Err(_) => return f64::NEG_INFINITY,
            };
            let lndet = 2.0 * (chol[(0, 0)].ln() + chol[(1, 1)].ln());
            (th[0] - 3.0) / 2.0 * (lndet - 2.0 * std::f64::consts::LN_2)
                - th[0] / 2.0 * e_ld
                - 0.5 * (&v * &e_inv).trace()
                - ln_multigamma(2, (th[0] - 3.0) / 2.0).unwrap()
        };
        let v0 = opt.v_mat().as_matrix();
        let th0 = [opt.nu(), v0[(0, 0)], v0[(0, 1)], v0[(1, 1)]];
        let mut hess = DMatrix::zeros(4, 4);
        for a in 0..4 {
            for b in 0..4 {
                let ha = 1e-4 * th0[a].abs().max(1.0);
                let hb = 1e-4 * th0[b].abs().max(1.0);
                let mut tpp = th0;
                let mut tpm = th0;
                let mut tmp = th0;
                let mut tmm = th0;
                tpp[a] += ha;
                tpp[b] += hb;
                tpm[a] += ha;
                tpm[b] -= hb;
                tmp[a] -= ha;
                tmp[b] += hb;
                tmm[a] -= ha;
                tmm[b] -= hb;
                hess[(a, b)] = (f(&tpp) - f(&tpm) - f(&tmp) + f(&tmm)) / (4.0 * ha * hb);
            }
        }
        let max_eig = symmetrized(&hess).symmetric_eigenvalues().max();
        worst = worst.max(max_eig);
    }
    CheckResult::from_stat(
        name,
        &["L2", "C1"],
        worst,
        -1e-8,
        "largest Hessian eigenvalue at the optimum (must be negative)",
    )
}

fn check_state_dependent_reduction(seed: u64) -> CheckResult {
    let name = "state-dependent-reduction-to-conjugate";
    let mut rng = rng_for(seed, 24);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v_mat = random_spd(&mut rng, 2, 0.5, 80.0);
        let extent = ExtentState::new(8.0 + rng.random::<f64>() * 40.0, v_mat).unwrap();
        let q = random_spd(&mut rng, 2, 1e-4, 0.4);
        let angle: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let scale = 0.6 + rng.random::<f64>();
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()],
        ) * scale;
        let mut p = DMatrix::zeros(5, 5);
        p[(2, 2)] = 4.0;
        p[(3, 3)] = 4.0;
        p[(4, 4)] = 0.05;
        let kin = GaussianState {
            mean: DVector::from_row_slice(&[0.0, 0.0, 20.0, 5.0, 0.2]),
            cov: SpdMatrix::new_semidefinite(p).unwrap(),
        };
        let v_dof = 6.5 + rng.random::<f64>() * 20.0;
        let transform = ConstantTransform(m.clone());
        let cfg = TransitionConfig::new(q.clone(), &transform, VRule::Fixed(v_dof));
        let a = match predict_state_dependent(&extent, &kin, &cfg) {
            Ok(a) => a,
            Err(e) => return CheckResult::error(name, &[], e),
        };
        let b = predict_conjugate(&extent, &m, &q, v_dof).unwrap();
        worst = worst.max((a.nu() - b.nu()).abs() / b.nu());
        worst = worst.max(rel_err_matrix(a.v_mat().as_matrix(), b.v_mat().as_matrix()));
    }
    CheckResult::from_stat(
        name,
        &[],
        worst,
        1e-10,
        "max relative (nu, V) gap between the state-dependent and conjugate updates, 1e3 cases",
    )
}

fn check_state_dependent_volume_match(seed: u64) -> CheckResult {
    let name = "state-dependent-volume-match";
    let mut rng = rng_for(seed, 25);
    let rotation = RotationTransform::new(1.0, 4);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let v_mat = random_spd(&mut rng, 2, 1.0, 120.0);
        let extent = ExtentState::new(9.0 + rng.random::<f64>() * 30.0, v_mat).unwrap();
        let q = random_spd(&mut rng, 2, 1e-4, 0.25);
        let mut p = DMatrix::zeros(5, 5);
        p[(4, 4)] = (rng.random::<f64>() * 10f64.to_radians()).powi(2);
        let kin = GaussianState {
            mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, 0.17]),
            cov: SpdMatrix::new_semidefinite(p).unwrap(),
        };
        let v_dof = 7.0 + rng.random::<f64>() * 15.0;
        let cfg = TransitionConfig::new(q.clone(), &rotation, VRule::Fixed(v_dof));
        let out = match predict_state_dependent(&extent, &kin, &cfg) {
            Ok(o) => o,
            Err(e) => return CheckResult::error(name, &["T1"], e),
        };
        let v_bar = intermediate_v(extent.v_mat(), &q).unwrap();
        let tay = taylor_expectations(&rotation, &v_bar, &kin, CurvatureWeight::Full).unwrap();
        let lhs = out.mean().unwrap().logdet().unwrap();
        let rhs = tay.c2.logdet().unwrap() - 2.0 * (v_dof - 6.0).ln();
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    CheckResult::from_stat(
        name,
        &["T1"],
        worst,
        1e-9,
        "relative log-volume gap |E[X']| vs |C2/(v-2d-2)|",
    )
}

fn check_state_dependent_end_to_end(seed: u64) -> CheckResult {
    let name = "state-dependent-end-to-end-ensemble";
    let mut rng = rng_for(seed, 26);
    let nu = 20.0;
    let v_mat = SpdMatrix::from_diagonal(&[1400.0, 350.0]).unwrap(); // E[X] = diag(100, 25)
    let extent = ExtentState::new(nu, v_mat.clone()).unwrap();
    let q = extent.v_mat().inverse().unwrap().scale(0.05).unwrap();
    let v_dof = 17.0; // integer-compatible transition dof
    let omega = 10f64.to_radians();
    let sigma = 10f64.to_radians();
    let mut p = DMatrix::zeros(5, 5);
    p[(4, 4)] = sigma * sigma;
    let kin = GaussianState {
        mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, omega]),
        cov: SpdMatrix::new_semidefinite(p).unwrap(),
    };
    let rotation = RotationTransform::new(1.0, 4);
    let cfg = TransitionConfig::new(q.clone(), &rotation, VRule::Fixed(v_dof))
        .with_curvature(CurvatureWeight::Half);
    let analytic = match predict_state_dependent(&extent, &kin, &cfg) {
        Ok(a) => a,
        Err(e) => return CheckResult::error(name, &["L1", "L2", "T1"], e),
    };

    // brute force: sample the kinematic state, then one coupled draw of the
    // previous extent and the transition
    let prior = InverseWishartParams::new(nu, v_mat).unwrap();
    let n = 1_000_000usize;
    let mut acc_inv = DMatrix::zeros(2, 2);
    let mut acc_ld = 0.0;
    for _ in 0..n {
        let w = omega + sigma * rng.sample::<f64, _>(StandardNormal);
        let (s, c) = w.sin_cos();
        let m = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let (_, x_next) =
            transition_sample_from_prior(&mut rng, &prior, &m, &q, v_dof).unwrap();
        acc_inv += x_next.inverse().unwrap().as_matrix();
        acc_ld += x_next.logdet().unwrap();
    }
    acc_inv /= n as f64;
    acc_ld /= n as f64;
    let ensemble = match kld_project_to_iw(
        &SpdMatrix::new(symmetrized(&acc_inv)).unwrap(),
        acc_ld,
    ) {
        Ok(e) => e,
        Err(e) => return CheckResult::error(name, &["L1", "L2", "T1"], e),
    };

    // compare expected extents through the transport distance at zero offset
    let ea = analytic.mean().unwrap();
    let eb = ensemble.mean().unwrap();
    let cross = eb.congruence(ea.sym_sqrt().unwrap().as_matrix()).sym_sqrt().unwrap();
    let gw2 = (ea.as_matrix().trace() + eb.as_matrix().trace()
        - 2.0 * cross.as_matrix().trace())
    .max(0.0);
    let eig = ea.as_matrix().clone().symmetric_eigenvalues();
    let scale = eig.iter().map(|l| l.sqrt()).sum::<f64>() / 2.0;
    CheckResult::from_stat(
        name,
        &["L1", "L2", "T1"],
        gw2.sqrt() / scale,
        0.05,
        format!(
            "transport distance between expected extents over the extent scale \
             (analytic nu' {:.3}, ensemble nu' {:.3})",
            analytic.nu(),
            ensemble.nu()
        ),
    )
}

fn check_wishart_baseline_low_noise_limit(_seed: u64) -> CheckResult {
    let name = "wishart-baseline-low-noise-limit";
    let extent = ExtentState::new(18.0, SpdMatrix::from_diagonal(&[36.0, 9.0]).unwrap()).unwrap();
    let kin = GaussianState {
        mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, 0.1]),
        cov: SpdMatrix::new_semidefinite(DMatrix::zeros(5, 5)).unwrap(),
    };
    let eye = ConstantTransform::identity(2);
    let out = match predict_wishart_baseline(&extent, &kin, &eye, 1e9, CurvatureWeight::Full) {
        Ok(o) => o,
        Err(e) => return CheckResult::error(name, &[], e),
    };
    let err = ((out.nu() - extent.nu()).abs() / extent.nu())
        .max(rel_err_matrix(out.v_mat().as_matrix(), extent.v_mat().as_matrix()));
    CheckResult::from_stat(name, &[], err, 1e-4, "prediction vs posterior in the n -> inf limit")
}

fn check_wishart_baseline_scalar_grid(_seed: u64) -> CheckResult {
    let name = "wishart-baseline-scalar-grid-oracle";
    // d = 1, M = 1, P = 0, finite n: the marginal is a scaled beta-prime with
    // parameters (n/2, (nu-2)/2) and scale V/n, giving exact moments
    //   E[1/X]   = n (nu-2) / ((n-2) V),
    //   E[ln X]  = ln(V/n) + psi0(n/2) - psi0((nu-2)/2).
    let (nu, v, n) = (11.0f64, 7.0f64, 9.0f64);
    let e_inv = n * (nu - 2.0) / ((n - 2.0) * v);
    let e_lndet = (v / n).ln() + digamma(n / 2.0).unwrap() - digamma((nu - 2.0) / 2.0).unwrap();

    let extent = ExtentState::new(nu, SpdMatrix::from_diagonal(&[v]).unwrap()).unwrap();
    let kin = GaussianState {
        mean: DVector::from_row_slice(&[0.0, 0.0, 0.0, 0.0, 0.0]),
        cov: SpdMatrix::new_semidefinite(DMatrix::zeros(5, 5)).unwrap(),
    };
    let eye = ConstantTransform::identity(1);
    let predicted = match predict_wishart_baseline(&extent, &kin, &eye, n, CurvatureWeight::Full) {
        Ok(p) => p,
        Err(e) => return CheckResult::error(name, &["L2"], e),
    };

    // independent dense grid over the KL objective built from the exact moments
    let objective = |nu: f64, vv: f64| -> f64 {
        (nu - 2.0) / 2.0 * (vv.ln() - std::f64::consts::LN_2) - nu / 2.0 * e_lndet
            - 0.5 * vv * e_inv
            - ln_gamma((nu - 2.0) / 2.0).unwrap()
    };
    let (mut best_nu, mut best_v, mut best) = (0.0, 0.0, f64::NEG_INFINITY);
    let v_center = predicted.v_mat().as_matrix()[(0, 0)];
    for i in 0..=1200usize {
        let nu = 2.2 + (50.0 - 2.2) * i as f64 / 1200.0;
        for j in 0..=1200usize {
            let vv = v_center * (0.3 + 2.7 * j as f64 / 1200.0);
            let f = objective(nu, vv);
            if f > best {
                best = f;
                best_nu = nu;
                best_v = vv;
            }
        }
    }
    let d_nu = (50.0 - 2.2) / 1200.0;
    let d_v = v_center * 2.7 / 1200.0;
    let v_pred = predicted.v_mat().as_matrix()[(0, 0)];
    let err_nu = (predicted.nu() - best_nu).abs() / d_nu;
    let ridge_slope = v_pred / (predicted.nu() - 2.0);
    let err_v = (v_pred - best_v).abs() / (d_v + ridge_slope * d_nu);
    let f_pred = objective(predicted.nu(), v_pred);
    let certificate = (best - f_pred) / f_pred.abs().max(1.0);
    let stat = (err_nu.max(err_v) / 2.0).max(certificate / 1e-9);
    CheckResult::from_stat(
        name,
        &["L2"],
        stat,
        1.0,
        format!(
            "argmax within two ridge-adjusted grid steps and objective certificate 1e-9 \
             (predicted nu' {:.4} vs grid {best_nu:.4}, V' {:.4} vs {best_v:.4}, \
             certificate {certificate:.1e})",
            predicted.nu(),
            v_pred
        ),
    )
}

fn check_wishart_baseline_sampled_moments(seed: u64) -> CheckResult {
    let name = "wishart-baseline-sampled-moments";
    let mut rng = rng_for(seed, 27);
    let nu = 16.0;
    let v_mat = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[900.0, 150.0, 150.0, 300.0]))
        .unwrap();
    let n_dof = 20.0;
    let angle = 10f64.to_radians();
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()],
    );

    // composition draws: X_k ~ IW, then X_next ~ W(n, M X_k M' / n)
    let prior = InverseWishartParams::new(nu, v_mat.clone()).unwrap();
    let n = 1_000_000usize;
    let mut acc_inv = DMatrix::zeros(2, 2);
    let mut acc_ld = 0.0;
    for _ in 0..n {
        let x_prev = iw_sample(&mut rng, &prior).unwrap();
        let scale = x_prev.congruence(&m).scale(1.0 / n_dof).unwrap();
        let w = wishart_sample(&mut rng, &WishartParams::new(n_dof, scale).unwrap()).unwrap();
        acc_inv += w.inverse().unwrap().as_matrix();
        acc_ld += w.logdet().unwrap();
    }
    acc_inv /= n as f64;
    acc_ld /= n as f64;

    // closed-form statistics at P = 0
    let c1 = v_mat.congruence(&m).inverse().unwrap();
    let c3 = v_mat.congruence(&m).logdet().unwrap();
    let e_inv = c1.scale(n_dof * (nu - 3.0) / (n_dof - 3.0)).unwrap();
    let e_ld = c3 - crate::numerics::digamma_dof_sum(2, nu) - 2.0 * n_dof.ln()
        + crate::extent::wishart_lndet_digamma_sum(2, n_dof);
    let err_inv = rel_err_matrix(&acc_inv, e_inv.as_matrix());
    let err_ld = (acc_ld - e_ld).abs() / e_ld.abs().max(1.0);
    CheckResult::from_stat(
        name,
        &[],
        err_inv.max(err_ld),
        0.02,
        format!("1e6 compositions vs closed-form stats: E[X^-1] err {err_inv:.2e}, E[ln|X|] err {err_ld:.2e}"),
    )
}

fn check_volume_coupled_transition(seed: u64) -> CheckResult {
    let name = "volume-coupled-transition";
    let mut rng = rng_for(seed, 28);
    let nu = 18.0;
    let v_mat = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1200.0, -150.0, -150.0, 500.0]))
        .unwrap();
    let extent = ExtentState::new(nu, v_mat.clone()).unwrap();
    let q = random_spd(&mut rng, 2, 5e-4, 5e-3);
    let omega = 10f64.to_radians();
    let sigma = 5f64.to_radians();
    let mut p = DMatrix::zeros(5, 5);
    p[(4, 4)] = sigma * sigma;
    let kin = GaussianState {
        mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, omega]),
        cov: SpdMatrix::new_semidefinite(p).unwrap(),
    };
    let rotation = RotationTransform::new(1.0, 4);
    let cfg = TransitionConfig::new(q.clone(), &rotation, VRule::VolumeCoupled)
        .with_curvature(CurvatureWeight::Half);
    let out = match predict_state_dependent(&extent, &kin, &cfg) {
        Ok(o) => o,
        Err(e) => return CheckResult::error(name, &["L9"], e),
    };

    // independent route: Vol(E[X']) must equal the volume of
    // E_x[M E[X] H M'] with H = (I+QV)^-1 |I+QV|^{1/d}
    let iqv = DMatrix::identity(2, 2) + q.as_matrix() * v_mat.as_matrix();
    let h = iqv.clone().try_inverse().unwrap() * iqv.determinant().powf(0.5);
    let ex = extent.mean().unwrap();
    let core = ex.as_matrix() * &h;
    let n = 1_000_000usize;
    let mut acc = DMatrix::zeros(2, 2);
    for _ in 0..n {
        let w = omega + sigma * rng.sample::<f64, _>(StandardNormal);
        let (s, c) = w.sin_cos();
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        acc += &rot * &core * rot.transpose();
    }
    acc /= n as f64;
    let lhs = out.mean().unwrap().logdet().unwrap();
    let rhs = symmetrized(&acc).determinant().ln();
    // compare d-th roots of the determinants (linear scale of the volume)
    let stat = ((lhs - rhs) / 2.0).exp() - 1.0;
    CheckResult::from_stat(
        name,
        &["L9"],
        stat.abs(),
        0.02,
        format!("relative volume gap vs the sampled transformed-expectation route ({stat:+.3e})"),
    )
}

fn check_volume_preserving_transition(seed: u64) -> CheckResult {
    let name = "volume-preserving-transition";
    let mut rng = rng_for(seed, 29);
    let rotation = RotationTransform::new(1.0, 4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v_mat = random_spd(&mut rng, 2, 1.0, 150.0);
        let extent = ExtentState::new(8.0 + rng.random::<f64>() * 30.0, v_mat).unwrap();
        let q = random_spd(&mut rng, 2, 1e-4, 0.3);
        let mut p = DMatrix::zeros(5, 5);
        p[(4, 4)] = (rng.random::<f64>() * 12f64.to_radians()).powi(2);
        let kin = GaussianState {
            mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, (rng.random::<f64>() - 0.5) * 0.5]),
            cov: SpdMatrix::new_semidefinite(p).unwrap(),
        };
        let cfg = TransitionConfig::new(q, &rotation, VRule::VolumePreserving);
        let out = match predict_state_dependent(&extent, &kin, &cfg) {
            Ok(o) => o,
            Err(e) => return CheckResult::error(name, &["T1"], e),
        };
        let before = extent.mean().unwrap().logdet().unwrap();
        let after = out.mean().unwrap().logdet().unwrap();
        worst = worst.max((after - before).abs() / before.abs().max(1.0));
    }
    CheckResult::from_stat(
        name,
        &["T1"],
        worst,
        1e-9,
        "relative log-volume drift of the expected extent across prediction, 1e3 cases",
    )
}

// ---------------------------------------------------------------------------
// correction and harness
// ---------------------------------------------------------------------------

fn check_correction_consistency(seed: u64) -> CheckResult {
    let name = "correction-consistency";
    let mut rng = rng_for(seed, 30);
    let x_true = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[625.0, 120.0, 120.0, 196.0]))
        .unwrap();
    let pos = DVector::from_row_slice(&[50.0, -20.0]);
    let kin = GaussianState::new(
        DVector::from_row_slice(&[50.0, -20.0, 0.0, 0.0]),
        SpdMatrix::from_diagonal(&[25.0, 25.0, 4.0, 4.0]).unwrap(),
    )
    .unwrap();
    let extent = ExtentState::new(10.0, SpdMatrix::from_diagonal(&[4.0 * 400.0, 4.0 * 150.0]).unwrap())
        .unwrap();
    // lambda = 1, R = 0 and Gaussian measurements with covariance X
    let sensor = SensorModel::position_sensor(4, SpdMatrix::zeros(2), 1.0).unwrap();
    let l = x_true.chol_lower().unwrap().clone();
    let m_count = 100_000usize;
    let points: Vec<DVector<f64>> = (0..m_count)
        .map(|_| {
            let g = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            &pos + &l * g
        })
        .collect();
    let meas = MeasurementSet::new(points).unwrap();
    let (_, posterior) = match correct(&kin, &extent, &meas, &sensor) {
        Ok(o) => o,
        Err(e) => return CheckResult::error(name, &[], e),
    };
    let estimate = posterior.mean().unwrap();
    CheckResult::from_stat(
        name,
        &[],
        rel_err_matrix(estimate.as_matrix(), x_true.as_matrix()),
        0.03,
        "posterior expected extent vs the generating covariance after a 1e5-point batch",
    )
}

fn check_correction_loewner(seed: u64) -> CheckResult {
    let name = "correction-loewner-and-psd";
    let mut rng = rng_for(seed, 31);
    let sensor = SensorModel::position_sensor(
        4,
        SpdMatrix::from_diagonal(&[2.25, 2.25]).unwrap(),
        0.25,
    )
    .unwrap();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let kin = GaussianState::new(
            DVector::from_row_slice(&[0.0, 0.0, 10.0, 0.0]),
            random_spd(&mut rng, 4, 0.5, 30.0),
        )
        .unwrap();
        let extent =
            ExtentState::new(9.0 + rng.random::<f64>() * 20.0, random_spd(&mut rng, 2, 20.0, 900.0))
                .unwrap();
        let count = 1 + (rng.random::<f64>() * 15.0) as usize;
        let points: Vec<DVector<f64>> = (0..count)
            .map(|_| {
                DVector::from_fn(2, |i, _| {
                    15.0 * rng.sample::<f64, _>(StandardNormal) + if i == 0 { 0.0 } else { 1.0 }
                })
            })
            .collect();
        let meas = MeasurementSet::new(points).unwrap();
        let (kin2, ext2) = match correct(&kin, &extent, &meas, &sensor) {
            Ok(o) => o,
            Err(e) => return CheckResult::error(name, &[], e),
        };
        let p_drop = kin.cov.as_matrix() - kin2.cov.as_matrix();
        worst = worst.max(-p_drop.symmetric_eigenvalues().min());
        let v_rise = ext2.v_mat().as_matrix() - extent.v_mat().as_matrix();
        worst = worst.max(-v_rise.symmetric_eigenvalues().min());
        worst = worst.max((ext2.nu() - extent.nu() - count as f64).abs());
    }
    CheckResult::from_stat(
        name,
        &[],
        worst,
        1e-9,
        "worst violation of P' <= P, V' >= V (eigenvalue) and the dof increment",
    )
}

fn check_truth_arc_length(_seed: u64) -> CheckResult {
    let name = "truth-arc-length";
    let cfg = constant_turn_scenario(1, 1);
    let truth = match generate_truth(&cfg) {
        Ok(t) => t,
        Err(e) => return CheckResult::error(name, &[], e),
    };
    let mut worst = 0.0f64;
    for w in truth.steps.windows(2) {
        worst = worst.max(((&w[1].position - &w[0].position).norm() - 30.0).abs());
    }
    CheckResult::from_stat(name, &[], worst, 1e-12, "max |step displacement - speed*T|")
}

fn check_measurement_covariance(seed: u64) -> CheckResult {
    let name = "measurement-covariance-quarter";
    let mut rng = rng_for(seed, 32);
    let x = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[625.0, 90.0, 90.0, 64.0])).unwrap();
    let truth = TruthStep {
        position: DVector::from_row_slice(&[10.0, 20.0]),
        velocity: DVector::zeros(2),
        heading: 0.0,
        turn_rate: 0.0,
        extent: x.clone(),
    };
    let r = SpdMatrix::zeros(2);
    let n_target = 1_000_000usize;
    let mut acc = DMatrix::zeros(2, 2);
    let mut count = 0usize;
    while count < n_target {
        let scan = generate_measurements(&mut rng, &truth, &r, 50.0).unwrap();
        for z in scan.points() {
            let d = z - &truth.position;
            acc += &d * d.transpose();
            count += 1;
        }
    }
    acc /= count as f64;
    let expect = x.scale(0.25).unwrap();
    CheckResult::from_stat(
        name,
        &[],
        rel_err_matrix(&acc, expect.as_matrix()),
        0.01,
        "covariance of noiseless centres vs X/4 (uniform-over-ellipse), ~1e6 points",
    )
}

fn check_poisson_count_mean(seed: u64) -> CheckResult {
    let name = "poisson-count-mean";
    let mut rng = rng_for(seed, 33);
    let truth = TruthStep {
        position: DVector::zeros(2),
        velocity: DVector::zeros(2),
        heading: 0.0,
        turn_rate: 0.0,
        extent: SpdMatrix::from_diagonal(&[625.0, 64.0]).unwrap(),
    };
    let r = SpdMatrix::zeros(2);
    let n = 100_000usize;
    let mut total = 0usize;
    for _ in 0..n {
        total += generate_measurements(&mut rng, &truth, &r, 10.0).unwrap().len();
    }
    let mean = total as f64 / n as f64;
    CheckResult::from_stat(
        name,
        &[],
        (mean - 10.0).abs(),
        0.05,
        format!("per-scan count mean over 1e5 scans ({mean:.4})"),
    )
}

fn check_gw_scalar_reduction(seed: u64) -> CheckResult {
    let name = "gw-scalar-reduction";
    let mut rng = rng_for(seed, 34);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x_true = 0.5 + rng.random::<f64>() * 50.0;
        let x_est = 0.5 + rng.random::<f64>() * 50.0;
        let offset = rng.random::<f64>() * 20.0 - 10.0;
        let nu = 9.0;
        let extent = ExtentState::new(
            nu,
            SpdMatrix::from_diagonal(&[x_est * (nu - 4.0)]).unwrap(),
        )
        .unwrap();
        let truth = SpdMatrix::from_diagonal(&[x_true]).unwrap();
        // matrix route
        let cross = extent
            .mean()
            .unwrap()
            .congruence(truth.sym_sqrt().unwrap().as_matrix())
            .sym_sqrt()
            .unwrap();
        let d2 = x_true + x_est - 2.0 * cross.as_matrix()[(0, 0)] + offset * offset;
        // scalar closed form
        let expect = (x_true.sqrt() - x_est.sqrt()).powi(2) + offset * offset;
        worst = worst.max((d2 - expect).abs());
    }
    CheckResult::from_stat(name, &[], worst, 1e-12, "matrix route vs scalar closed form, 200 cases")
}

fn check_anees_consistency(seed: u64) -> CheckResult {
    let name = "anees-consistency";
    let mut rng = rng_for(seed, 35);

    // kinematic: truths drawn from the estimated Gaussian push ANEES to one
    let kin = GaussianState::new(
        DVector::from_row_slice(&[3.0, -1.0, 2.0, 0.5]),
        SpdMatrix::new(DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 0.5, 0.0, 0.0, 0.5, 3.0, 0.2, 0.0, 0.0, 0.2, 2.0, -0.1, 0.0, 0.0, -0.1, 1.0,
            ],
        ))
        .unwrap(),
    )
    .unwrap();
    let l = kin.cov.chol_lower().unwrap().clone();
    let n = 40_000usize;
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let g = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let truth = &kin.mean + &l * g;
            nees_kinematic(&kin, &truth).unwrap()
        })
        .collect();
    let anees_x = anees(values);
    let err_x = (anees_x - 1.0).abs();

    // extent: truths drawn from the estimated inverse Wishart plateau at the
    // ratio of total to diagonal variance mass
    let extent = ExtentState::new(
        16.0,
        SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[900.0, 120.0, 120.0, 400.0])).unwrap(),
    )
    .unwrap();
    let p = InverseWishartParams::new(extent.nu(), extent.v_mat().clone()).unwrap();
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let truth = iw_sample(&mut rng, &p).unwrap();
            extent_error_ratio(&extent, &truth).unwrap()
        })
        .collect();
    let anees_ext = anees(values);
    let mut total = 0.0;
    let mut diag = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let var = iw_element_variance(extent.nu(), extent.v_mat(), i, j).unwrap();
            total += var;
            if i == j {
                diag += var;
            }
        }
    }
    // E[Tr((X̄−X)²)] adds Var(trace cross terms): total includes both
    // off-diagonal contributions already via the double loop
    let plateau = total / diag;
    let err_ext = (anees_ext - plateau).abs() / plateau;

    CheckResult::from_stat(
        name,
        &[],
        err_x.max(err_ext),
        0.05,
        format!(
            "kinematic ANEES {anees_x:.4} (target 1), extent ANEES {anees_ext:.4} \
             (plateau {plateau:.4})"
        ),
    )
}

fn check_mc_determinism(_seed: u64) -> CheckResult {
    let name = "mc-determinism-across-threads";
    let mut cfg = constant_turn_scenario(8, 20260809);
    cfg.segments = vec![
        Segment { steps: 5, speed: 30.0, turn_rate: 0.0 },
        Segment { steps: 7, speed: 30.0, turn_rate: 10f64.to_radians() },
    ];
    let a = match run_monte_carlo(&cfg, Some(1)) {
        Ok(a) => a,
        Err(e) => return CheckResult::error(name, &[], e),
    };
    let b = match run_monte_carlo(&cfg, Some(4)) {
        Ok(b) => b,
        Err(e) => return CheckResult::error(name, &[], e),
    };
    let identical = a == b;
    CheckResult::from_stat(
        name,
        &[],
        if identical { 0.0 } else { 1.0 },
        0.0,
        "metrics reports compared field-by-field for 1 vs 4 worker threads",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        for (name, f) in check_registry() {
            // exercise only the cheap deterministic checks here; the heavy
            // sampling checks run through the acceptance suite
            let cheap = [
                "cholesky-reconstruction",
                "sym-sqrt-squaring",
                "logdet-eigen-agreement",
                "digamma-trigamma-recurrences",
                "vec-kronecker-identity",
                "multigamma-log-derivative",
                "det-power-derivative",
                "iw-density-normalization",
                "intermediate-matrix-identity",
                "dof-root-residual-and-bisection",
                "wishart-baseline-low-noise-limit",
                "truth-arc-length",
                "gw-scalar-reduction",
            ];
            if cheap.contains(&name) {
                let res = f(20260809);
                assert!(res.passed, "{name}: {} (stat {:.3e})", res.detail, res.statistic);
            }
        }
    }

    #[test]
    fn tampered_trigamma_is_detected() {
        // A trigamma deficit of 1e-3 flips the bound at large dof where the
        // margin decays like 2/(nu-2)^2.
        let tampered = |x: f64| trigamma(x).unwrap() - 1e-3;
        let mut min_margin = f64::INFINITY;
        for i in 0..10_000 {
            let nu = 2.0 + 1e-3 + 50.0 * (i as f64 / 9999.0);
            min_margin = min_margin.min(trigamma_bound_margin(&tampered, 1, nu));
        }
        assert!(min_margin < 0.0, "fault not detected: margin {min_margin}");

        // the untampered margin stays positive on the same grid
        let clean = |x: f64| trigamma(x).unwrap();
        let mut clean_margin = f64::INFINITY;
        for i in 0..10_000 {
            let nu = 2.0 + 1e-3 + 50.0 * (i as f64 / 9999.0);
            clean_margin = clean_margin.min(trigamma_bound_margin(&clean, 1, nu));
        }
        assert!(clean_margin > 0.0);
    }

    #[test]
    fn coverage_lists_every_tag() {
        let report = run_filtered(1, Some("vec-kronecker"));
        let coverage = report.coverage();
        assert_eq!(coverage.len(), COVERAGE_TAGS.len());
    }
}
