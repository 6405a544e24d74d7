//! Mean-and-spread measurement update.
//!
//! Scattering measurements are modelled as Gaussian around the target
//! position with covariance `λX + R`: the extent contributes a scaled spread
//! term on top of the sensor noise. The update processes the measurement
//! centroid through a Kalman step and feeds the innovation and the spread
//! around the centroid into the extent parameters:
//!
//! ```text
//! z̄ = mean(zᵣ),  Z̄ = Σ (zᵣ − z̄)(zᵣ − z̄)ᵀ,  X̂ = V/(ν − 2d − 2),
//! Y = λX̂ + R,  S = H P Hᵀ + Y/m,  K = P Hᵀ S⁻¹,
//! m' = m + K(z̄ − Hm),  P' = P − K S Kᵀ,  N = (z̄ − Hm)(z̄ − Hm)ᵀ,
//! N̂ = X̂^{1/2} S^{−1/2} N S^{−1/2} X̂^{1/2},
//! ν' = ν + m,  V' = V + N̂ + X̂^{1/2} Y^{−1/2} Z̄ Y^{−1/2} X̂^{1/2},
//! ```
//!
//! with symmetric square roots throughout. An empty measurement set is the
//! identity update.

use nalgebra::{DMatrix, DVector};

use crate::extent::ExtentState;
use crate::kinematics::GaussianState;
use crate::numerics::{symmetrized, SpdMatrix};
use crate::{Error, Result};

/// A scan: the measurements attributed to the target at one time step.
#[derive(Debug, Clone, Default)]
pub struct MeasurementSet {
    points: Vec<DVector<f64>>,
}

impl MeasurementSet {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Domain("measurement coordinates must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    /// Centroid; `None` for an empty set.
    pub fn centroid(&self) -> Option<DVector<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let dim = self.points[0].len();
        let mut acc = DVector::zeros(dim);
        for p in &self.points {
            acc += p;
        }
        Some(acc / self.points.len() as f64)
    }

    /// Scatter around the centroid, `Σ (z − z̄)(z − z̄)ᵀ`.
    pub fn scatter(&self) -> Option<DMatrix<f64>> {
        let centroid = self.centroid()?;
        let dim = centroid.len();
        let mut acc = DMatrix::zeros(dim, dim);
        for p in &self.points {
            let d = p - &centroid;
            acc += &d * d.transpose();
        }
        Some(symmetrized(&acc))
    }
}

/// Linear position sensor: observation matrix `H`, noise covariance `R`
/// (semidefinite; zero models a noise-free sensor) and the spread scaling
/// factor `λ ∈ (0, 1]`.
#[derive(Debug, Clone)]
pub struct SensorModel {
    pub h: DMatrix<f64>,
    pub r: SpdMatrix,
    pub lambda: f64,
}

impl SensorModel {
    pub fn new(h: DMatrix<f64>, r: SpdMatrix, lambda: f64) -> Result<Self> {
        if h.nrows() != r.dim() {
            return Err(Error::DimensionMismatch { expected: r.dim(), got: h.nrows() });
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Domain(format!("spread scaling must lie in (0, 1], got {lambda}")));
        }
        Ok(Self { h, r, lambda })
    }

    /// Position-picking sensor for an `n_x`-dimensional kinematic state.
    pub fn position_sensor(n_x: usize, r: SpdMatrix, lambda: f64) -> Result<Self> {
        let d = r.dim();
        let mut h = DMatrix::zeros(d, n_x);
        for i in 0..d {
            h[(i, i)] = 1.0;
        }
        Self::new(h, r, lambda)
    }

    /// Spread covariance `Y = λ X̂ + R`.
    pub fn spread_cov(&self, x_hat: &SpdMatrix) -> Result<SpdMatrix> {
        SpdMatrix::new(self.lambda * x_hat.as_matrix() + self.r.as_matrix())
    }
}

/// One measurement update of the kinematic and extent states.
pub fn correct(
    kin: &GaussianState,
    extent: &ExtentState,
    meas: &MeasurementSet,
    sensor: &SensorModel,
) -> Result<(GaussianState, ExtentState)> {
    if meas.is_empty() {
        return Ok((kin.clone(), extent.clone()));
    }
    let m_count = meas.len() as f64;
    if sensor.h.ncols() != kin.dim() {
        return Err(Error::DimensionMismatch { expected: kin.dim(), got: sensor.h.ncols() });
    }

    let x_hat = extent.mean()?; // requires ν > 2d + 2
    let y = sensor.spread_cov(&x_hat)?;
    let centroid = meas.centroid().expect("non-empty");
    let scatter = meas.scatter().expect("non-empty");

    let p = kin.cov.as_matrix();
    let h = &sensor.h;
    // Non-SPD innovation covariance signals a divergent state.
    let s = SpdMatrix::new(symmetrized(&(h * p * h.transpose() + y.as_matrix() / m_count)))?;
    let gain = s.solve(&(h * p))?.transpose(); // K = P Hᵀ S⁻¹

    let innovation = &centroid - h * &kin.mean;
    let mean_next = &kin.mean + &gain * &innovation;
    let cov_next = SpdMatrix::new(symmetrized(
        &(p - &gain * s.as_matrix() * gain.transpose()),
    ))?;

    let x_sqrt = x_hat.sym_sqrt()?;
    let s_inv_sqrt = s.sym_sqrt()?.inverse()?;
    let y_inv_sqrt = y.sym_sqrt()?.inverse()?;

    let innov_outer = &innovation * innovation.transpose();
    let n_hat = symmetrized(
        &(x_sqrt.as_matrix()
            * s_inv_sqrt.as_matrix()
            * innov_outer
            * s_inv_sqrt.as_matrix()
            * x_sqrt.as_matrix()),
    );
    let spread = symmetrized(
        &(x_sqrt.as_matrix()
            * y_inv_sqrt.as_matrix()
            * scatter
            * y_inv_sqrt.as_matrix()
            * x_sqrt.as_matrix()),
    );

    let v_next = SpdMatrix::new(extent.v_mat().as_matrix() + n_hat + spread)?;
    let extent_next = ExtentState::new(extent.nu() + m_count, v_next)?;
    Ok((GaussianState { mean: mean_next, cov: cov_next }, extent_next))
}

/// Log-likelihood of a scan under the predicted state: the centroid is
/// Gaussian with covariance `S` and the residuals around the centroid carry
/// the spread covariance `Y`. Used to weight the modes of the
/// multiple-model estimator.
pub fn measurement_loglik(
    kin: &GaussianState,
    extent: &ExtentState,
    meas: &MeasurementSet,
    sensor: &SensorModel,
) -> Result<f64> {
    if meas.is_empty() {
        return Ok(0.0);
    }
    let m_count = meas.len() as f64;
    let x_hat = extent.mean()?;
    let y = sensor.spread_cov(&x_hat)?;
    let p = kin.cov.as_matrix();
    let h = &sensor.h;
    let s = SpdMatrix::new(symmetrized(&(h * p * h.transpose() + y.as_matrix() / m_count)))?;
    let centroid = meas.centroid().expect("non-empty");

    let mut ll = gaussian_loglik(&(&centroid - h * &kin.mean), &s)?;
    for z in meas.points() {
        ll += gaussian_loglik(&(z - &centroid), &y)?;
    }
    Ok(ll)
}

fn gaussian_loglik(residual: &DVector<f64>, cov: &SpdMatrix) -> Result<f64> {
    let d = residual.len() as f64;
    Ok(-0.5
        * (cov.inv_quadratic_form(residual)?
            + cov.logdet()?
            + d * (2.0 * std::f64::consts::PI).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn setup() -> (GaussianState, ExtentState, SensorModel) {
        let kin = GaussianState::new(
            DVector::from_row_slice(&[10.0, -5.0, 3.0, 0.5]),
            SpdMatrix::from_diagonal(&[4.0, 4.0, 1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let extent = ExtentState::new(
            20.0,
            SpdMatrix::from_diagonal(&[14.0 * 25.0, 14.0 * 9.0]).unwrap(),
        )
        .unwrap();
        let sensor = SensorModel::position_sensor(
            4,
            SpdMatrix::from_diagonal(&[2.25, 2.25]).unwrap(),
            0.25,
        )
        .unwrap();
        (kin, extent, sensor)
    }

    #[test]
    fn empty_set_is_identity_update() {
        let (kin, extent, sensor) = setup();
        let (k2, e2) = correct(&kin, &extent, &MeasurementSet::empty(), &sensor).unwrap();
        assert_eq!(k2.mean, kin.mean);
        assert_eq!(e2.nu(), extent.nu());
    }

    #[test]
    fn zero_innovation_single_measurement() {
        let (kin, extent, sensor) = setup();
        let z = DVector::from_row_slice(&[10.0, -5.0]);
        let meas = MeasurementSet::new(vec![z]).unwrap();
        let (k2, e2) = correct(&kin, &extent, &meas, &sensor).unwrap();
        assert!((k2.mean - &kin.mean).norm() < 1e-12);
        assert!((e2.nu() - (extent.nu() + 1.0)).abs() < 1e-12);
        // single point has zero scatter and zero innovation: V unchanged
        assert!((e2.v_mat().as_matrix() - extent.v_mat().as_matrix()).amax() < 1e-10);
    }

    #[test]
    fn covariance_never_increases() {
        let (kin, extent, sensor) = setup();
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..100 {
            let m = 1 + (rng.random::<f64>() * 20.0) as usize;
            let pts: Vec<_> = (0..m)
                .map(|_| {
                    DVector::from_row_slice(&[
                        10.0 + 8.0 * rng.sample::<f64, _>(StandardNormal),
                        -5.0 + 4.0 * rng.sample::<f64, _>(StandardNormal),
                    ])
                })
                .collect();
            let meas = MeasurementSet::new(pts).unwrap();
            let (k2, e2) = correct(&kin, &extent, &meas, &sensor).unwrap();
            // P − P' must be positive semidefinite
            let diff = kin.cov.as_matrix() - k2.cov.as_matrix();
            let min_eig = diff.symmetric_eigenvalues().min();
            assert!(min_eig > -1e-10, "Loewner order violated: {min_eig}");
            // V' − V must be positive semidefinite
            let vdiff = e2.v_mat().as_matrix() - extent.v_mat().as_matrix();
            assert!(vdiff.symmetric_eigenvalues().min() > -1e-10);
            // dof bookkeeping
            assert!((e2.nu() - extent.nu() - m as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn update_is_permutation_invariant() {
        let (kin, extent, sensor) = setup();
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let mut pts: Vec<_> = (0..9)
            .map(|_| {
                DVector::from_row_slice(&[
                    10.0 + rng.sample::<f64, _>(StandardNormal),
                    -5.0 + rng.sample::<f64, _>(StandardNormal),
                ])
            })
            .collect();
        let (k1, e1) = correct(&kin, &extent, &MeasurementSet::new(pts.clone()).unwrap(), &sensor)
            .unwrap();
        pts.reverse();
        pts.swap(0, 4);
        let (k2, e2) = correct(&kin, &extent, &MeasurementSet::new(pts).unwrap(), &sensor).unwrap();
        assert!((k1.mean - k2.mean).norm() < 1e-12);
        assert!((e1.v_mat().as_matrix() - e2.v_mat().as_matrix()).amax() < 1e-10);
    }

    #[test]
    fn rejects_undefined_extent_mean() {
        let (kin, _, sensor) = setup();
        let extent = ExtentState::new(5.5, SpdMatrix::identity(2)).unwrap();
        let meas = MeasurementSet::new(vec![DVector::from_row_slice(&[0.0, 0.0])]).unwrap();
        assert!(correct(&kin, &extent, &meas, &sensor).is_err());
    }
}
