//! The simulated estimators.
//!
//! All three share the mean-and-spread correction; they differ in the
//! kinematic model and the extent prediction:
//!
//! * `ConjugateImm` — constant-velocity kinematics with three process-noise
//!   modes mixed by an interacting-multiple-model scheme; per-mode extent
//!   prediction is the conjugate noise-matrix update with the volume-coupled
//!   transition dof. Mode mixtures of inverse Wishart states are collapsed
//!   through the moment projection.
//! * `WishartBaseline` — coordinated-turn kinematics with the Wishart-transition
//!   baseline prediction.
//! * `StateDependent` — coordinated-turn kinematics with the state-dependent
//!   prediction update.

use nalgebra::{DMatrix, DVector};

use crate::correction::{correct, measurement_loglik, MeasurementSet, SensorModel};
use crate::extent::{
    iw_lndet_moment, kld_project_to_iw, predict_conjugate, predict_state_dependent,
    predict_wishart_baseline, v_setting_volume_coupled, CurvatureWeight, ExtentState, NuSolver,
    RotationTransform, TransitionConfig, VRule,
};
use crate::kinematics::{predict_kinematic, GaussianState, MotionModel};
use crate::numerics::{symmetrized, SpdMatrix};
use crate::simharness::{EstimatorConfig, InitMode, QRule, ScenarioConfig, TruthStep};
use crate::{Error, Result};

/// Floor of the prior extent dof used by first-scan initialization; the
/// actual prior carries the first scan's information, `2d + 2 + m_0`.
const INIT_EXTENT_DOF_FLOOR: f64 = 10.0;

/// Eigenvalue floor (m²) applied to the first-scan extent estimate.
const INIT_EXTENT_FLOOR: f64 = 1.0;

/// Turn-rate prior standard deviation, rad/s. Sized to cover manoeuvre
/// onset while keeping the first prediction of the Wishart-transition
/// baseline above the mean-definedness floor.
const INIT_TURN_RATE_STD: f64 = 0.05235987755982988; // 3 deg/s

/// A recursive extended-target estimator.
pub trait Estimator: Send {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn predict(&mut self) -> Result<()>;
    fn correct(&mut self, meas: &MeasurementSet) -> Result<()>;
    /// Collapsed posterior estimate.
    fn posterior(&self) -> Result<(GaussianState, ExtentState)>;
}

/// Builds an estimator from its configuration, initialized from the first
/// scan (or the ground truth, per the scenario's init mode).
pub fn build_estimator(
    cfg: &EstimatorConfig,
    scenario: &ScenarioConfig,
    first_scan: &MeasurementSet,
    truth0: &TruthStep,
) -> Result<Box<dyn Estimator>> {
    match cfg {
        EstimatorConfig::ConjugateImm { name, stay_probability, modes } => {
            let (kin, extent) = initial_states(4, scenario, first_scan, truth0)?;
            let sensor = SensorModel::position_sensor(4, scenario.noise_cov(), scenario.spread_scaling)?;
            let mode_states = modes
                .iter()
                .map(|m| ImmMode {
                    motion: MotionModel::ConstantVelocity {
                        time_step: scenario.time_step,
                        accel_psd: m.accel_psd,
                    },
                    q_rule: m.extent_noise.clone(),
                    kin: kin.clone(),
                    extent: extent.clone(),
                })
                .collect::<Vec<_>>();
            let n = mode_states.len();
            Ok(Box::new(ConjugateImmEstimator {
                name: name.clone(),
                modes: mode_states,
                weights: vec![1.0 / n as f64; n],
                stay_probability: *stay_probability,
                sensor,
            }))
        }
        EstimatorConfig::WishartBaseline { name, accel_std, turn_rate_std, transition_dof, curvature } => {
            let (kin, extent) = initial_states(5, scenario, first_scan, truth0)?;
            Ok(Box::new(WishartBaselineEstimator {
                name: name.clone(),
                kin,
                extent,
                motion: MotionModel::ConstantTurn {
                    time_step: scenario.time_step,
                    accel_std: *accel_std,
                    turn_rate_std: *turn_rate_std,
                },
                sensor: SensorModel::position_sensor(5, scenario.noise_cov(), scenario.spread_scaling)?,
                rotation: RotationTransform::new(scenario.time_step, 4),
                transition_dof: *transition_dof,
                curvature: *curvature,
            }))
        }
        EstimatorConfig::StateDependent {
            name,
            accel_std,
            turn_rate_std,
            extent_noise,
            v_rule,
            nu_solver,
            curvature,
        } => {
            let (kin, extent) = initial_states(5, scenario, first_scan, truth0)?;
            Ok(Box::new(StateDependentEstimator {
                name: name.clone(),
                kin,
                extent,
                motion: MotionModel::ConstantTurn {
                    time_step: scenario.time_step,
                    accel_std: *accel_std,
                    turn_rate_std: *turn_rate_std,
                },
                sensor: SensorModel::position_sensor(5, scenario.noise_cov(), scenario.spread_scaling)?,
                rotation: RotationTransform::new(scenario.time_step, 4),
                q_rule: extent_noise.clone(),
                v_rule: *v_rule,
                nu_solver: *nu_solver,
                curvature: *curvature,
            }))
        }
    }
}

/// Shared initialization. First-scan mode centres the position on the scan
/// centroid, backs the extent out of the scan scatter (`cov ≈ λX + R` for
/// centres uniform over the ellipse), and leaves diffuse velocity and
/// turn-rate priors sized by the fastest scenario segment.
fn initial_states(
    n_x: usize,
    scenario: &ScenarioConfig,
    first_scan: &MeasurementSet,
    truth0: &TruthStep,
) -> Result<(GaussianState, ExtentState)> {
    let d = 2usize;
    match scenario.init {
        InitMode::Truth => {
            let mean = truth0.kinematic(n_x);
            let mut p = DMatrix::zeros(n_x, n_x);
            for i in 0..n_x {
                p[(i, i)] = if i < 2 { 1.0 } else if i < 4 { 0.25 } else { 1e-6 };
            }
            let nu0 = 200.0;
            let v0 = truth0.extent.scale(nu0 - 2.0 * d as f64 - 2.0)?;
            Ok((GaussianState::new(mean, SpdMatrix::new(p)?)?, ExtentState::new(nu0, v0)?))
        }
        InitMode::FirstScan => {
            let speed_prior = scenario
                .segments
                .iter()
                .map(|s| s.speed)
                .fold(1.0f64, f64::max);
            let r = scenario.noise_cov();

            let (centre, x_hat) = match (first_scan.centroid(), first_scan.scatter()) {
                (Some(c), Some(scatter)) if first_scan.len() >= 3 => {
                    let cov = scatter / (first_scan.len() as f64 - 1.0);
                    let raw = (cov - r.as_matrix()) / scenario.spread_scaling;
                    (c, floor_spd(&raw, INIT_EXTENT_FLOOR))
                }
                (Some(c), _) => (c, SpdMatrix::from_diagonal(&[100.0, 100.0])?),
                (None, _) => (
                    DVector::from_row_slice(&scenario.start_position),
                    SpdMatrix::from_diagonal(&[100.0, 100.0])?,
                ),
            };

            let mut mean = DVector::zeros(n_x);
            mean[0] = centre[0];
            mean[1] = centre[1];
            let mut p = DMatrix::zeros(n_x, n_x);
            let m_count = first_scan.len().max(1) as f64;
            let pos_var = (scenario.spread_scaling * x_hat.as_matrix().trace() / 2.0
                + r.as_matrix().trace() / 2.0)
                / m_count
                + 1.0;
            p[(0, 0)] = pos_var;
            p[(1, 1)] = pos_var;
            p[(2, 2)] = speed_prior * speed_prior;
            p[(3, 3)] = speed_prior * speed_prior;
            if n_x > 4 {
                p[(4, 4)] = INIT_TURN_RATE_STD * INIT_TURN_RATE_STD;
            }

            let nu0 = (2.0 * d as f64 + 2.0 + first_scan.len() as f64).max(INIT_EXTENT_DOF_FLOOR);
            let v0 = x_hat.scale(nu0 - 2.0 * d as f64 - 2.0)?;
            Ok((
                GaussianState::new(mean, SpdMatrix::new(p)?)?,
                ExtentState::new(nu0, v0)?,
            ))
        }
    }
}

/// Projects a symmetric matrix onto the SPD cone with an eigenvalue floor.
fn floor_spd(m: &DMatrix<f64>, floor: f64) -> SpdMatrix {
    let eig = nalgebra::SymmetricEigen::new(symmetrized(m));
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    SpdMatrix::new(symmetrized(&out)).expect("floored eigenvalues are positive")
}

struct StateDependentEstimator {
    name: String,
    kin: GaussianState,
    extent: ExtentState,
    motion: MotionModel,
    sensor: SensorModel,
    rotation: RotationTransform,
    q_rule: QRule,
    v_rule: VRule,
    nu_solver: NuSolver,
    curvature: CurvatureWeight,
}

impl Estimator for StateDependentEstimator {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        5
    }

    fn predict(&mut self) -> Result<()> {
        // The extent prediction marginalises over the posterior kinematic
        // density, so it runs before the kinematic prediction.
        let q = self.q_rule.materialize(self.extent.v_mat())?;
        let cfg = TransitionConfig::new(q, &self.rotation, self.v_rule)
            .with_curvature(self.curvature)
            .with_solver(self.nu_solver);
        let extent_next = predict_state_dependent(&self.extent, &self.kin, &cfg)?;
        let kin_next = predict_kinematic(&self.kin, &self.motion)?;
        self.extent = extent_next;
        self.kin = kin_next;
        Ok(())
    }

    fn correct(&mut self, meas: &MeasurementSet) -> Result<()> {
        let (kin, extent) = correct(&self.kin, &self.extent, meas, &self.sensor)?;
        self.kin = kin;
        self.extent = extent;
        Ok(())
    }

    fn posterior(&self) -> Result<(GaussianState, ExtentState)> {
        Ok((self.kin.clone(), self.extent.clone()))
    }
}

struct WishartBaselineEstimator {
    name: String,
    kin: GaussianState,
    extent: ExtentState,
    motion: MotionModel,
    sensor: SensorModel,
    rotation: RotationTransform,
    transition_dof: f64,
    curvature: CurvatureWeight,
}

impl Estimator for WishartBaselineEstimator {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        5
    }

    fn predict(&mut self) -> Result<()> {
        let extent_next = predict_wishart_baseline(
            &self.extent,
            &self.kin,
            &self.rotation,
            self.transition_dof,
            self.curvature,
        )?;
        let kin_next = predict_kinematic(&self.kin, &self.motion)?;
        self.extent = extent_next;
        self.kin = kin_next;
        Ok(())
    }

    fn correct(&mut self, meas: &MeasurementSet) -> Result<()> {
        let (kin, extent) = correct(&self.kin, &self.extent, meas, &self.sensor)?;
        self.kin = kin;
        self.extent = extent;
        Ok(())
    }

    fn posterior(&self) -> Result<(GaussianState, ExtentState)> {
        Ok((self.kin.clone(), self.extent.clone()))
    }
}

struct ImmMode {
    motion: MotionModel,
    q_rule: QRule,
    kin: GaussianState,
    extent: ExtentState,
}

struct ConjugateImmEstimator {
    name: String,
    modes: Vec<ImmMode>,
    weights: Vec<f64>,
    stay_probability: f64,
    sensor: SensorModel,
}

impl ConjugateImmEstimator {
    fn transition_prob(&self, i: usize, j: usize) -> f64 {
        let n = self.modes.len();
        if i == j {
            self.stay_probability
        } else {
            (1.0 - self.stay_probability) / (n - 1) as f64
        }
    }
}

impl Estimator for ConjugateImmEstimator {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn predict(&mut self) -> Result<()> {
        let n = self.modes.len();

        // Mixing step: mode-conditioned priors under the transition matrix.
        let mut predicted_weights = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                predicted_weights[j] += self.transition_prob(i, j) * self.weights[i];
            }
        }

        let mut mixed: Vec<(GaussianState, ExtentState)> = Vec::with_capacity(n);
        for j in 0..n {
            let mut w = vec![0.0; n];
            for i in 0..n {
                w[i] = self.transition_prob(i, j) * self.weights[i] / predicted_weights[j];
            }
            let kins: Vec<&GaussianState> = self.modes.iter().map(|m| &m.kin).collect();
            let extents: Vec<&ExtentState> = self.modes.iter().map(|m| &m.extent).collect();
            mixed.push((collapse_gaussian(&w, &kins)?, collapse_iw(&w, &extents)?));
        }

        for (j, mode) in self.modes.iter_mut().enumerate() {
            let (kin0, extent0) = &mixed[j];
            let q = mode.q_rule.materialize(extent0.v_mat())?;
            let v = v_setting_volume_coupled(extent0.nu(), &q, extent0.v_mat())?;
            let eye = DMatrix::identity(2, 2);
            mode.extent = predict_conjugate(extent0, &eye, &q, v)?;
            mode.kin = predict_kinematic(kin0, &mode.motion)?;
        }
        self.weights = predicted_weights;
        Ok(())
    }

    fn correct(&mut self, meas: &MeasurementSet) -> Result<()> {
        let mut log_weights = Vec::with_capacity(self.modes.len());
        for (mode, w) in self.modes.iter_mut().zip(&self.weights) {
            let ll = measurement_loglik(&mode.kin, &mode.extent, meas, &self.sensor)?;
            let (kin, extent) = correct(&mode.kin, &mode.extent, meas, &self.sensor)?;
            mode.kin = kin;
            mode.extent = extent;
            log_weights.push(w.max(1e-300).ln() + ll);
        }
        let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Domain("all mode likelihoods vanished".into()));
        }
        let mut total = 0.0;
        for lw in &mut log_weights {
            *lw = (*lw - max).exp();
            total += *lw;
        }
        for (w, lw) in self.weights.iter_mut().zip(&log_weights) {
            *w = lw / total;
        }
        Ok(())
    }

    fn posterior(&self) -> Result<(GaussianState, ExtentState)> {
        let kins: Vec<&GaussianState> = self.modes.iter().map(|m| &m.kin).collect();
        let extents: Vec<&ExtentState> = self.modes.iter().map(|m| &m.extent).collect();
        Ok((collapse_gaussian(&self.weights, &kins)?, collapse_iw(&self.weights, &extents)?))
    }
}

/// Moment-matched collapse of a Gaussian mixture.
fn collapse_gaussian(weights: &[f64], states: &[&GaussianState]) -> Result<GaussianState> {
    let n_x = states[0].dim();
    let mut mean = DVector::zeros(n_x);
    for (w, s) in weights.iter().zip(states) {
        mean += *w * &s.mean;
    }
    let mut cov = DMatrix::zeros(n_x, n_x);
    for (w, s) in weights.iter().zip(states) {
        let dm = &s.mean - &mean;
        cov += *w * (s.cov.as_matrix() + &dm * dm.transpose());
    }
    GaussianState::new(mean, SpdMatrix::new(symmetrized(&cov))?)
}

/// Collapse of an inverse Wishart mixture through its projection moments:
/// the mixture's `E[X⁻¹]` and `E[ln|X|]` are weight-averaged and projected
/// back onto the family.
fn collapse_iw(weights: &[f64], states: &[&ExtentState]) -> Result<ExtentState> {
    let d = states[0].dim();
    let df = d as f64;
    let mut e_inv = DMatrix::zeros(d, d);
    let mut e_lndet = 0.0;
    for (w, s) in weights.iter().zip(states) {
        e_inv += *w * (s.nu() - df - 1.0) * s.v_mat().inverse()?.as_matrix();
        e_lndet += *w * iw_lndet_moment(d, s.nu(), s.v_mat().logdet()?);
    }
    kld_project_to_iw(&SpdMatrix::new(symmetrized(&e_inv))?, e_lndet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simharness::constant_turn_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn first_scan(truth: &TruthStep, cfg: &ScenarioConfig) -> MeasurementSet {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        crate::simharness::generate_measurements(&mut rng, truth, &cfg.noise_cov(), cfg.poisson_mean)
            .unwrap()
    }

    #[test]
    fn estimators_run_a_few_steps() {
        let cfg = constant_turn_scenario(1, 7);
        let truth = crate::simharness::generate_truth(&cfg).unwrap();
        let scan0 = first_scan(&truth.steps[0], &cfg);
        let mut rng = ChaCha12Rng::seed_from_u64(100);

        for est_cfg in &cfg.estimators {
            let mut est = build_estimator(est_cfg, &cfg, &scan0, &truth.steps[0]).unwrap();
            for k in 1..=10usize {
                est.predict().unwrap();
                let scan = crate::simharness::generate_measurements(
                    &mut rng,
                    &truth.steps[k],
                    &cfg.noise_cov(),
                    cfg.poisson_mean,
                )
                .unwrap();
                est.correct(&scan).unwrap();
                let (kin, extent) = est.posterior().unwrap();
                assert!(kin.cov.chol_lower().is_ok());
                assert!(extent.nu() > 6.0);
            }
        }
    }

    #[test]
    fn imm_weights_stay_normalized() {
        let cfg = constant_turn_scenario(1, 8);
        let truth = crate::simharness::generate_truth(&cfg).unwrap();
        let scan0 = first_scan(&truth.steps[0], &cfg);
        let est_cfg = &cfg.estimators[0];
        let mut est = build_estimator(est_cfg, &cfg, &scan0, &truth.steps[0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        for k in 1..=15usize {
            est.predict().unwrap();
            let scan = crate::simharness::generate_measurements(
                &mut rng,
                &truth.steps[k],
                &cfg.noise_cov(),
                cfg.poisson_mean,
            )
            .unwrap();
            est.correct(&scan).unwrap();
        }
        let imm = est;
        let (_, extent) = imm.posterior().unwrap();
        assert!(extent.nu() > 6.0);
    }

    #[test]
    fn mixture_collapse_is_exact_for_single_component() {
        let kin = GaussianState::new(
            DVector::from_row_slice(&[1.0, 2.0, 3.0, 4.0]),
            SpdMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
        )
        .unwrap();
        let out = collapse_gaussian(&[1.0], &[&kin]).unwrap();
        assert_eq!(out.mean, kin.mean);

        let extent = ExtentState::new(14.0, SpdMatrix::from_diagonal(&[30.0, 10.0]).unwrap())
            .unwrap();
        let out = collapse_iw(&[1.0], &[&extent]).unwrap();
        assert!((out.nu() - 14.0).abs() < 1e-7);
        assert!(
            (out.v_mat().as_matrix() - extent.v_mat().as_matrix()).amax() < 1e-6,
            "collapse drifted"
        );
    }
}
