//! Prediction updates of the inverse Wishart extent density.
//!
//! Four updates are implemented:
//!
//! * [`predict_forgetting`] — exponential forgetting: the expected extent is
//!   preserved while the spread is inflated through a dof decay;
//! * [`predict_conjugate`] — the conjugate noise-matrix update for
//!   transformations independent of the kinematic state:
//!   `ν' = v`, `V' = M V (I + Q V)⁻¹ Mᵀ`;
//! * [`predict_state_dependent`] — the kinematic-state-dependent generalisation:
//!   curvature-corrected expectations `C₁`, `C₂`, `C₃` of the transformed
//!   intermediate matrix feed a single KL projection whose dof is either the
//!   volume-matching closed form or the root of the stationarity condition;
//! * [`predict_wishart_baseline`] — the Wishart-transition baseline, realised by
//!   projecting the exact sufficient statistics of the marginalised
//!   prediction density onto the inverse Wishart family.
//!
//! Two rules for the transition degrees of freedom `v` are provided:
//! volume-coupled (`v = 2d + 2 + (ν − 2d − 2)|I + QV|^{−1/d}`), which keeps
//! the expected volume invariant to the noise matrix alone, and
//! volume-preserving (`v = 2d + 2 + (ν − 2d − 2)|C₂⁻¹V|^{−1/d}`), which keeps
//! it invariant to the transformation as well.

mod projection;
mod taylor;

pub use projection::{
    kld_project_moments, kld_project_to_iw, nu_closed_form, nu_optimal, nu_optimal_bisection,
    nu_optimal_residual,
};
pub use taylor::{
    taylor_expectations, ConstantTransform, CurvatureWeight, ExtentTransform, RotationTransform,
    TaylorExpectations,
};

pub(crate) use projection::{iw_lndet_moment, wishart_lndet_digamma_sum};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kinematics::GaussianState;
use crate::matvar::invert_transform;
use crate::numerics::{digamma_dof_sum, SpdMatrix};
use crate::{Error, Result};

/// Guard band over `2d + 2`: a state entering a predictor at or below this
/// has an undefined (or numerically meaningless) mean and is rejected rather
/// than clamped, so filter divergence surfaces instead of being hidden.
const NU_FLOOR_MARGIN: f64 = 1e-9;

/// Inverse Wishart extent state `(ν, V)` with `ν > 2d`.
#[derive(Debug, Clone)]
pub struct ExtentState {
    nu: f64,
    v_mat: SpdMatrix,
}

impl ExtentState {
    pub fn new(nu: f64, v_mat: SpdMatrix) -> Result<Self> {
        let min = 2.0 * v_mat.dim() as f64;
        if !(nu.is_finite() && nu > min) {
            return Err(Error::DegreesOfFreedom { value: nu, min });
        }
        Ok(Self { nu, v_mat })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn v_mat(&self) -> &SpdMatrix {
        &self.v_mat
    }

    pub fn dim(&self) -> usize {
        self.v_mat.dim()
    }

    /// Expected extent `V / (ν − 2d − 2)`; requires `ν > 2d + 2`.
    pub fn mean(&self) -> Result<SpdMatrix> {
        let denom = self.nu - 2.0 * self.dim() as f64 - 2.0;
        if denom <= 0.0 {
            return Err(Error::DegreesOfFreedom {
                value: self.nu,
                min: 2.0 * self.dim() as f64 + 2.0,
            });
        }
        self.v_mat.scale(1.0 / denom)
    }

    fn require_defined_mean(&self, what: &str) -> Result<()> {
        let min = 2.0 * self.dim() as f64 + 2.0 + NU_FLOOR_MARGIN;
        if self.nu <= min {
            return Err(Error::Domain(format!(
                "{what}: extent dof {} at or below the mean-definedness floor {min}",
                self.nu
            )));
        }
        Ok(())
    }
}

/// Rule for the transition degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VRule {
    Fixed(f64),
    VolumeCoupled,
    VolumePreserving,
}

/// Which dof solver the state-dependent update uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NuSolver {
    #[default]
    ClosedForm,
    Optimal,
}

/// Extent transition parameters: the noise matrix `Q` (zero allowed), the
/// transformation `M(x)`, and the dof rule.
pub struct TransitionConfig<'a> {
    pub q: SpdMatrix,
    pub m_fn: &'a dyn ExtentTransform,
    pub v_rule: VRule,
    pub curvature: CurvatureWeight,
    pub nu_solver: NuSolver,
}

impl<'a> TransitionConfig<'a> {
    pub fn new(q: SpdMatrix, m_fn: &'a dyn ExtentTransform, v_rule: VRule) -> Self {
        Self { q, m_fn, v_rule, curvature: CurvatureWeight::default(), nu_solver: NuSolver::default() }
    }

    pub fn with_curvature(mut self, w: CurvatureWeight) -> Self {
        self.curvature = w;
        self
    }

    pub fn with_solver(mut self, s: NuSolver) -> Self {
        self.nu_solver = s;
        self
    }
}

/// Planar rotation by `T·ω` with ω the fifth state entry; determinant one.
pub fn rotation_m(x: &DVector<f64>, time_step: f64) -> DMatrix<f64> {
    assert!(x.len() >= 5, "rotation transform expects a turn-rate state entry");
    let (s, c) = (time_step * x[4]).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Intermediate parameter matrix `V̄ = V (I + Q V)⁻¹`.
///
/// `Q = 0` returns `V` exactly; otherwise the algebraically identical
/// symmetric form `(V⁻¹ + Q)⁻¹` is evaluated, which stays SPD when `I + QV`
/// is ill-conditioned under large noise.
pub fn intermediate_v(v_mat: &SpdMatrix, q: &SpdMatrix) -> Result<SpdMatrix> {
    if q.dim() != v_mat.dim() {
        return Err(Error::DimensionMismatch { expected: v_mat.dim(), got: q.dim() });
    }
    if q.is_zero() {
        return Ok(v_mat.clone());
    }
    SpdMatrix::new(v_mat.inverse()?.as_matrix() + q.as_matrix())?.inverse()
}

/// Transition dof preserving the expected-volume under the noise matrix:
/// `v = 2d + 2 + (ν − 2d − 2) |I + Q V|^{−1/d}`.
pub fn v_setting_volume_coupled(nu: f64, q: &SpdMatrix, v_mat: &SpdMatrix) -> Result<f64> {
    let d = v_mat.dim();
    let df = d as f64;
    if !(nu > 2.0 * df + 2.0) {
        return Err(Error::DegreesOfFreedom { value: nu, min: 2.0 * df + 2.0 });
    }
    // |I + QV| = |V⁻¹ + Q| · |V|
    let lndet = if q.is_zero() {
        0.0
    } else {
        SpdMatrix::new(v_mat.inverse()?.as_matrix() + q.as_matrix())?.logdet()? + v_mat.logdet()?
    };
    Ok(2.0 * df + 2.0 + (nu - 2.0 * df - 2.0) * (-lndet / df).exp())
}

/// Transition dof preserving the expected-volume under both the noise matrix
/// and the transformation: `v = 2d + 2 + (ν − 2d − 2) |C₂⁻¹ V|^{−1/d}`.
pub fn v_setting_volume_preserving(nu: f64, v_mat: &SpdMatrix, c2: &SpdMatrix) -> Result<f64> {
    let d = v_mat.dim();
    let df = d as f64;
    if !(nu > 2.0 * df + 2.0) {
        return Err(Error::DegreesOfFreedom { value: nu, min: 2.0 * df + 2.0 });
    }
    let lndet = v_mat.logdet()? - c2.logdet()?;
    Ok(2.0 * df + 2.0 + (nu - 2.0 * df - 2.0) * (-lndet / df).exp())
}

/// Exponential forgetting of the extent over a `time_step` with decay
/// constant `tau`: `ν' = 2d + 4 + e^{−T/τ}(ν − 2d − 4)` and
/// `V' = V (ν' − 2d − 2)/(ν − 2d − 2)`, preserving the expected extent while
/// inflating its spread.
pub fn predict_forgetting(extent: &ExtentState, time_step: f64, tau: f64) -> Result<ExtentState> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("decay constant must be positive, got {tau}")));
    }
    extent.require_defined_mean("exponential-forgetting prediction")?;
    let d2 = 2.0 * extent.dim() as f64;
    let decay = (-time_step / tau).exp();
    let nu_next = d2 + 4.0 + decay * (extent.nu - d2 - 4.0);
    let v_next = extent.v_mat.scale((nu_next - d2 - 2.0) / (extent.nu - d2 - 2.0))?;
    ExtentState::new(nu_next, v_next)
}

/// Conjugate noise-matrix update for a state-independent transformation:
/// `ν' = v`, `V' = M V (I + Q V)⁻¹ Mᵀ`.
pub fn predict_conjugate(
    extent: &ExtentState,
    m: &DMatrix<f64>,
    q: &SpdMatrix,
    v: f64,
) -> Result<ExtentState> {
    extent.require_defined_mean("conjugate noise update")?;
    let d = extent.dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.nrows().max(m.ncols()) });
    }
    invert_transform(m)?;
    let v_bar = intermediate_v(&extent.v_mat, q)?;
    ExtentState::new(v, v_bar.congruence(m))
}

/// Kinematic-state-dependent prediction update.
///
/// Computes `V̄ = V (I + Q V)⁻¹`, the expectations `C₁`, `C₂`, `C₃` of the
/// transformed intermediate matrix under the kinematic Gaussian, resolves
/// the transition dof `v` from the configured rule, obtains `ν'` from the
/// closed form (or the stationarity root when so configured) and sets
/// `V' = ((ν' − d − 1)/(v − d − 1)) C₁⁻¹`.
pub fn predict_state_dependent(
    extent: &ExtentState,
    kin: &GaussianState,
    cfg: &TransitionConfig<'_>,
) -> Result<ExtentState> {
    extent.require_defined_mean("state-dependent prediction")?;
    let d = extent.dim();
    let df = d as f64;

    let v_bar = intermediate_v(&extent.v_mat, &cfg.q)?;
    let tay = taylor_expectations(cfg.m_fn, &v_bar, kin, cfg.curvature)?;

    let v = match cfg.v_rule {
        VRule::Fixed(v) => v,
        VRule::VolumeCoupled => v_setting_volume_coupled(extent.nu, &cfg.q, &extent.v_mat)?,
        VRule::VolumePreserving => {
            v_setting_volume_preserving(extent.nu, &extent.v_mat, &tay.c2)?
        }
    };
    let min_v = match cfg.nu_solver {
        NuSolver::ClosedForm => 2.0 * df + 2.0,
        NuSolver::Optimal => 2.0 * df,
    };
    if !(v.is_finite() && v > min_v) {
        return Err(Error::DegreesOfFreedom { value: v, min: min_v });
    }

    let nu_next = match cfg.nu_solver {
        NuSolver::ClosedForm => nu_closed_form(v, &tay.c1, &tay.c2)?,
        NuSolver::Optimal => nu_optimal(v, &tay.c1, tay.c3)?,
    };
    let v_next = tay.c1.inverse()?.scale((nu_next - df - 1.0) / (v - df - 1.0))?;
    ExtentState::new(nu_next, v_next)
}

/// Wishart-transition baseline prediction.
///
/// The transition draws the next extent from a Wishart with dof `n` centred
/// on the transformed current extent. Marginalising over the extent and the
/// kinematic state gives the exact sufficient statistics
///
/// ```text
/// E[X⁻¹]   = n (ν − d − 1) / (n − d − 1) · E[(M V Mᵀ)⁻¹],
/// E[ln|X|] = E[ln|M V Mᵀ|] − Σ ψ₀((ν − d − i)/2)
///            − d ln n + Σ ψ₀((n + 1 − i)/2),
/// ```
///
/// which are then projected onto the inverse Wishart family in one step.
/// The state expectations are evaluated with the same curvature-corrected
/// expansion as the state-dependent update, over `V` (no noise matrix).
pub fn predict_wishart_baseline(
    extent: &ExtentState,
    kin: &GaussianState,
    m_fn: &dyn ExtentTransform,
    n: f64,
    curvature: CurvatureWeight,
) -> Result<ExtentState> {
    extent.require_defined_mean("transition-matrix baseline prediction")?;
    let d = extent.dim();
    let df = d as f64;
    if !(n.is_finite() && n > df + 1.0) {
        return Err(Error::DegreesOfFreedom { value: n, min: df + 1.0 });
    }

    let tay = taylor_expectations(m_fn, &extent.v_mat, kin, curvature)?;
    let e_inv = tay.c1.scale(n * (extent.nu - df - 1.0) / (n - df - 1.0))?;
    let e_lndet = tay.c3 - digamma_dof_sum(d, extent.nu) - df * n.ln()
        + wishart_lndet_digamma_sum(d, n);
    kld_project_to_iw(&e_inv, e_lndet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::symmetrized;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn ct_state(omega: f64, omega_var: f64) -> GaussianState {
        let mut p = DMatrix::zeros(5, 5);
        p[(4, 4)] = omega_var;
        GaussianState {
            mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, omega]),
            cov: SpdMatrix::new_semidefinite(p).unwrap(),
        }
    }

    fn random_spd(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> SpdMatrix {
        let g = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let qr = g.qr();
        let q = qr.q();
        let eig = DVector::from_fn(d, |_, _| lo + (hi - lo) * rng.random::<f64>());
        SpdMatrix::new(symmetrized(&(&q * DMatrix::from_diagonal(&eig) * q.transpose()))).unwrap()
    }

    #[test]
    fn rotation_m_basics() {
        let x0 = DVector::from_row_slice(&[0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(rotation_m(&x0, 1.0), DMatrix::identity(2, 2));

        let x = DVector::from_row_slice(&[0.0, 0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2]);
        let m = rotation_m(&x, 1.0);
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((m - expect).norm() < 1e-15);

        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..50 {
            let w: f64 = (rng.random::<f64>() - 0.5) * 20.0;
            let x = DVector::from_row_slice(&[0.0, 0.0, 0.0, 0.0, w]);
            let m = rotation_m(&x, 0.7);
            assert!((m.transpose() * &m - DMatrix::identity(2, 2)).amax() < 1e-14);
            assert!((m.determinant() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn intermediate_v_identities() {
        let v = SpdMatrix::from_diagonal(&[9.0, 4.0]).unwrap();
        // zero noise is exact
        let out = intermediate_v(&v, &SpdMatrix::zeros(2)).unwrap();
        assert_eq!(out.as_matrix(), v.as_matrix());

        // Q = c V⁻¹ scales V by 1/(1+c); c = 0.33
        let c = 0.33;
        let q = v.inverse().unwrap().scale(c).unwrap();
        let out = intermediate_v(&v, &q).unwrap();
        let expect = v.scale(1.0 / (1.0 + c)).unwrap();
        assert!((out.as_matrix() - expect.as_matrix()).amax() < 1e-12);

        // random inputs: agree with the direct product form V(I+QV)⁻¹
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..50 {
            let v = random_spd(&mut rng, 2, 0.5, 50.0);
            let q = random_spd(&mut rng, 2, 1e-4, 0.5);
            let direct = v.as_matrix()
                * (DMatrix::identity(2, 2) + q.as_matrix() * v.as_matrix())
                    .try_inverse()
                    .unwrap();
            let out = intermediate_v(&v, &q).unwrap();
            let err = (out.as_matrix() - symmetrized(&direct)).norm() / direct.norm();
            assert!(err < 1e-10, "relative error {err}");
        }
    }

    #[test]
    fn forgetting_direct_evaluation() {
        let extent = ExtentState::new(20.0, SpdMatrix::from_diagonal(&[70.0, 14.0]).unwrap()).unwrap();
        let out = predict_forgetting(&extent, 1.0, 5.0).unwrap();
        let expect_nu = 8.0 + 12.0 * (-0.2f64).exp();
        assert!((out.nu() - expect_nu).abs() < 1e-12);
        let factor = (expect_nu - 6.0) / 14.0;
        assert!((out.v_mat().as_matrix() - extent.v_mat().scale(factor).unwrap().as_matrix()).amax() < 1e-12);

        // expected extent preserved for any tau
        for tau in [0.3, 2.0, 1e6] {
            let out = predict_forgetting(&extent, 1.0, tau).unwrap();
            let err = (out.mean().unwrap().as_matrix() - extent.mean().unwrap().as_matrix()).amax();
            assert!(err < 1e-12, "tau={tau}");
        }

        // infinite decay constant leaves the state unchanged
        let out = predict_forgetting(&extent, 1.0, f64::INFINITY).unwrap();
        assert!((out.nu() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn forgetting_rejects_undefined_mean() {
        let extent = ExtentState::new(5.9, SpdMatrix::identity(2)).unwrap();
        assert!(predict_forgetting(&extent, 1.0, 5.0).is_err());
    }

    #[test]
    fn conjugate_reductions() {
        let extent = ExtentState::new(14.0, SpdMatrix::from_diagonal(&[25.0, 9.0]).unwrap()).unwrap();
        let eye = DMatrix::identity(2, 2);

        // Q = 0, M = I, v = ν: unchanged
        let out = predict_conjugate(&extent, &eye, &SpdMatrix::zeros(2), extent.nu()).unwrap();
        assert_eq!(out.nu(), extent.nu());
        assert!((out.v_mat().as_matrix() - extent.v_mat().as_matrix()).amax() < 1e-12);

        // Q = cV⁻¹: V' = M V Mᵀ / (1+c)
        let c = 0.4;
        let q = extent.v_mat().inverse().unwrap().scale(c).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let out = predict_conjugate(&extent, &m, &q, 11.0).unwrap();
        let expect = extent.v_mat().scale(1.0 / (1.0 + c)).unwrap().congruence(&m);
        assert!((out.v_mat().as_matrix() - expect.as_matrix()).amax() < 1e-10);
        assert_eq!(out.nu(), 11.0);
    }

    #[test]
    fn state_dependent_reduces_to_conjugate_for_constant_m() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..50 {
            let v = random_spd(&mut rng, 2, 1.0, 80.0);
            let nu = 9.0 + rng.random::<f64>() * 30.0;
            let extent = ExtentState::new(nu, v).unwrap();
            let q = random_spd(&mut rng, 2, 1e-4, 0.3);
            let angle: f64 = rng.random::<f64>() * 3.0;
            let m = DMatrix::from_row_slice(
                2,
                2,
                &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()],
            ) * (0.7 + rng.random::<f64>());
            let kin = ct_state(0.1, 0.02); // P arbitrary; M ignores the state
            let v_dof = 2.0 * 2.0 + 2.5 + rng.random::<f64>() * 10.0;

            let transform = ConstantTransform(m.clone());
            let cfg = TransitionConfig::new(q.clone(), &transform, VRule::Fixed(v_dof));
            let a = predict_state_dependent(&extent, &kin, &cfg).unwrap();
            let b = predict_conjugate(&extent, &m, &q, v_dof).unwrap();

            assert!((a.nu() - b.nu()).abs() / b.nu() < 1e-10, "{} vs {}", a.nu(), b.nu());
            let scale = b.v_mat().as_matrix().amax();
            let err = (a.v_mat().as_matrix() - b.v_mat().as_matrix()).amax() / scale;
            assert!(err < 1e-10, "V relative error {err}");
        }
    }

    #[test]
    fn state_dependent_matches_volume_of_expected_transformed_extent() {
        // |E[X']| = |C₂ / (v − 2d − 2)| by the volume-matched dof.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v = random_spd(&mut rng, 2, 1.0, 100.0);
            let extent = ExtentState::new(12.0 + rng.random::<f64>() * 20.0, v).unwrap();
            let q = random_spd(&mut rng, 2, 1e-4, 0.2);
            let kin = ct_state(0.17, (5f64.to_radians()).powi(2));
            let rot = RotationTransform::new(1.0, 4);
            let v_dof = 8.0 + rng.random::<f64>() * 6.0;
            let cfg = TransitionConfig::new(q.clone(), &rot, VRule::Fixed(v_dof));

            let v_bar = intermediate_v(extent.v_mat(), &q).unwrap();
            let tay = taylor_expectations(&rot, &v_bar, &kin, CurvatureWeight::Full).unwrap();
            let out = predict_state_dependent(&extent, &kin, &cfg).unwrap();

            let lhs = out.mean().unwrap().logdet().unwrap();
            let rhs = tay.c2.scale(1.0 / (v_dof - 6.0)).unwrap().logdet().unwrap();
            assert!((lhs - rhs).abs() < 1e-9, "volume mismatch {lhs} vs {rhs}");
        }
    }

    #[test]
    fn volume_coupled_setting_identities() {
        let v = SpdMatrix::from_diagonal(&[16.0, 4.0]).unwrap();
        // Q = 0 keeps v = ν
        assert!((v_setting_volume_coupled(12.0, &SpdMatrix::zeros(2), &v).unwrap() - 12.0).abs() < 1e-12);
        // Q = cV⁻¹: v = 2d + 2 + (ν − 2d − 2)/(1 + c)
        let c = 0.25;
        let q = v.inverse().unwrap().scale(c).unwrap();
        let got = v_setting_volume_coupled(12.0, &q, &v).unwrap();
        assert!((got - (6.0 + 6.0 / 1.25)).abs() < 1e-10);
    }

    #[test]
    fn volume_preserving_setting_identities() {
        let v = SpdMatrix::from_diagonal(&[16.0, 4.0]).unwrap();
        // M = I, Q = 0, P = 0 gives C₂ = V and v = ν
        assert!((v_setting_volume_preserving(12.0, &v, &v).unwrap() - 12.0).abs() < 1e-12);

        // constant |M| = 1 reduces to the volume-coupled setting
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..20 {
            let v = random_spd(&mut rng, 2, 1.0, 50.0);
            let q = random_spd(&mut rng, 2, 1e-3, 0.3);
            let angle: f64 = rng.random::<f64>() * 3.0;
            let m = DMatrix::from_row_slice(
                2,
                2,
                &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()],
            );
            let v_bar = intermediate_v(&v, &q).unwrap();
            let c2 = v_bar.congruence(&m);
            let nu = 15.0;
            let a = v_setting_volume_preserving(nu, &v, &c2).unwrap();
            let b = v_setting_volume_coupled(nu, &q, &v).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn volume_preserved_through_full_prediction() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v = random_spd(&mut rng, 2, 1.0, 100.0);
            let extent = ExtentState::new(10.0 + rng.random::<f64>() * 25.0, v).unwrap();
            let q = random_spd(&mut rng, 2, 1e-4, 0.3);
            let kin = ct_state(
                (rng.random::<f64>() - 0.5) * 0.4,
                (rng.random::<f64>() * 8f64.to_radians()).powi(2),
            );
            let rot = RotationTransform::new(1.0, 4);
            let cfg = TransitionConfig::new(q, &rot, VRule::VolumePreserving);
            let out = predict_state_dependent(&extent, &kin, &cfg).unwrap();
            let before = extent.mean().unwrap().logdet().unwrap();
            let after = out.mean().unwrap().logdet().unwrap();
            assert!(
                ((after - before) / before.abs().max(1.0)).abs() < 1e-9,
                "{before} vs {after}"
            );
        }
    }

    #[test]
    fn state_dependent_closed_form_dof_exceeds_mean_floor() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..200 {
            let v = random_spd(&mut rng, 2, 0.5, 60.0);
            let extent = ExtentState::new(6.0 + 1e-6 + rng.random::<f64>() * 40.0, v).unwrap();
            if extent.nu() <= 6.0 + 1e-9 {
                continue;
            }
            let q = random_spd(&mut rng, 2, 1e-4, 0.5);
            let kin = ct_state(0.2, (rng.random::<f64>() * 0.3).powi(2));
            let rot = RotationTransform::new(1.0, 4);
            let cfg = TransitionConfig::new(q, &rot, VRule::VolumeCoupled);
            match predict_state_dependent(&extent, &kin, &cfg) {
                Ok(out) => assert!(out.nu() > 6.0 + 1e-12, "nu = {}", out.nu()),
                Err(Error::Domain(_)) | Err(Error::DegreesOfFreedom { .. }) => {}
                Err(e) => panic!("unexpected error {e:?}"),
            }
        }
    }

    #[test]
    fn wishart_baseline_noise_free_limit_returns_posterior() {
        let extent = ExtentState::new(18.0, SpdMatrix::from_diagonal(&[36.0, 9.0]).unwrap()).unwrap();
        let kin = ct_state(0.1, 0.0);
        let eye = ConstantTransform::identity(2);
        let out = predict_wishart_baseline(&extent, &kin, &eye, 1e9, CurvatureWeight::Full).unwrap();
        assert!((out.nu() - extent.nu()).abs() < 1e-4, "nu = {}", out.nu());
        let err = (out.v_mat().as_matrix() - extent.v_mat().as_matrix()).amax()
            / extent.v_mat().as_matrix().amax();
        assert!(err < 1e-4, "V error {err}");
    }

    #[test]
    fn wishart_baseline_rejects_low_transition_dof() {
        let extent = ExtentState::new(18.0, SpdMatrix::identity(2)).unwrap();
        let kin = ct_state(0.0, 0.0);
        let eye = ConstantTransform::identity(2);
        assert!(matches!(
            predict_wishart_baseline(&extent, &kin, &eye, 3.0, CurvatureWeight::Full),
            Err(Error::DegreesOfFreedom { .. })
        ));
    }

    #[test]
    fn nu_solvers_agree_when_transform_is_state_independent() {
        let extent = ExtentState::new(16.0, SpdMatrix::from_diagonal(&[49.0, 16.0]).unwrap()).unwrap();
        let kin = ct_state(0.3, 0.05);
        let q = SpdMatrix::from_diagonal(&[0.01, 0.02]).unwrap();
        let transform = ConstantTransform(DMatrix::from_row_slice(2, 2, &[0.8, -0.6, 0.6, 0.8]));
        let base = TransitionConfig::new(q.clone(), &transform, VRule::Fixed(12.0));
        let closed = predict_state_dependent(&extent, &kin, &base).unwrap();
        let optimal = predict_state_dependent(
            &extent,
            &kin,
            &TransitionConfig::new(q, &transform, VRule::Fixed(12.0)).with_solver(NuSolver::Optimal),
        )
        .unwrap();
        assert!((closed.nu() - optimal.nu()).abs() < 1e-7);
    }
}
