//! Kinematic state transition models and the extended Kalman prediction.
//!
//! Two motion models are provided: a constant-velocity model over
//! `[x, y, ẋ, ẏ]` driven by white-noise acceleration of intensity `q̃`, and a
//! nearly-constant-turn model over `[x, y, ẋ, ẏ, ω]` that propagates the
//! velocity along an exact circular arc and carries the turn rate unchanged.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::numerics::{symmetrized, SpdMatrix};
use crate::{Error, Result};

/// Gaussian kinematic state `(m, P)`.
#[derive(Debug, Clone)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: SpdMatrix,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: cov.dim() });
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Position components (the leading two states).
    pub fn position(&self) -> DVector<f64> {
        self.mean.rows(0, 2).into_owned()
    }
}

/// Discrete-time motion model of the target centre.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum MotionModel {
    /// Constant velocity over `[x, y, ẋ, ẏ]`; `accel_psd` is the white-noise
    /// acceleration intensity q̃ in m²/s³.
    ConstantVelocity { time_step: f64, accel_psd: f64 },
    /// Nearly-constant turn over `[x, y, ẋ, ẏ, ω]`; `accel_std` is the
    /// acceleration standard deviation σ_a in m/s² (converted internally to
    /// the equivalent intensity q̃ = 0.75 T σ_a²), `turn_rate_std` is σ_ω in
    /// rad/s feeding the turn-rate random walk.
    ConstantTurn { time_step: f64, accel_std: f64, turn_rate_std: f64 },
}

impl MotionModel {
    pub fn state_dim(&self) -> usize {
        match self {
            MotionModel::ConstantVelocity { .. } => 4,
            MotionModel::ConstantTurn { .. } => 5,
        }
    }

    pub fn time_step(&self) -> f64 {
        match self {
            MotionModel::ConstantVelocity { time_step, .. }
            | MotionModel::ConstantTurn { time_step, .. } => *time_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.time_step();
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {t}")));
        }
        let ok = match self {
            MotionModel::ConstantVelocity { accel_psd, .. } => *accel_psd >= 0.0,
            MotionModel::ConstantTurn { accel_std, turn_rate_std, .. } => {
                *accel_std >= 0.0 && *turn_rate_std >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain("noise parameters must be non-negative".into()))
        }
    }

    /// Propagates a state vector one step.
    pub fn transition(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            MotionModel::ConstantVelocity { time_step, .. } => {
                let t = *time_step;
                DVector::from_row_slice(&[
                    x[0] + t * x[2],
                    x[1] + t * x[3],
                    x[2],
                    x[3],
                ])
            }
            MotionModel::ConstantTurn { time_step, .. } => ct_transition(x, *time_step).0,
        }
    }

    /// Jacobian of [`MotionModel::transition`] at `x`.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            MotionModel::ConstantVelocity { time_step, .. } => {
                let t = *time_step;
                let mut f = DMatrix::identity(4, 4);
                f[(0, 2)] = t;
                f[(1, 3)] = t;
                f
            }
            MotionModel::ConstantTurn { time_step, .. } => ct_transition(x, *time_step).1,
        }
    }

    /// Process noise covariance `D` for one step.
    pub fn process_noise(&self) -> DMatrix<f64> {
        match self {
            MotionModel::ConstantVelocity { time_step, accel_psd } => {
                wna_block(*time_step, *accel_psd)
            }
            MotionModel::ConstantTurn { time_step, accel_std, turn_rate_std } => {
                let t = *time_step;
                let q_tilde = 0.75 * t * accel_std * accel_std;
                let mut d = DMatrix::zeros(5, 5);
                d.view_mut((0, 0), (4, 4)).copy_from(&wna_block(t, q_tilde));
                d[(4, 4)] = t * turn_rate_std * turn_rate_std;
                d
            }
        }
    }
}

/// White-noise-acceleration covariance block over `[x, y, ẋ, ẏ]`.
fn wna_block(t: f64, q: f64) -> DMatrix<f64> {
    let t2 = t * t;
    let t3 = t2 * t;
    DMatrix::from_row_slice(
        4,
        4,
        &[
            q * t3 / 3.0, 0.0,          q * t2 / 2.0, 0.0,
            0.0,          q * t3 / 3.0, 0.0,          q * t2 / 2.0,
            q * t2 / 2.0, 0.0,          q * t,        0.0,
            0.0,          q * t2 / 2.0, 0.0,          q * t,
        ],
    )
}

/// Nearly-constant-turn propagation of `[x, y, ẋ, ẏ, ω]` over `t` seconds,
/// returning the propagated state and the Jacobian. Total over all turn
/// rates; below `|ω| < 1e-6` rad/s the arc coefficients switch to their
/// series expansion.
pub fn ct_transition(x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
    assert_eq!(x.len(), 5, "constant-turn state must be 5-dimensional");
    let (px, py, vx, vy, w) = (x[0], x[1], x[2], x[3], x[4]);
    let wt = w * t;
    let (s, c) = (wt.sin(), wt.cos());

    // a = sin(ωt)/ω, b = (1 − cos(ωt))/ω and their ω-derivatives. The
    // series branch covers |ωt| < 1e-3 to machine accuracy, which keeps the
    // arc formulas cancellation-free and makes the constant-velocity limit
    // (engaged below |ω| = 1e-6 rad/s) continuous.
    let (a, b, da, db) = if wt.abs() >= 1e-3 {
        let one_minus_c = 2.0 * (0.5 * wt).sin().powi(2);
        let a = s / w;
        let b = one_minus_c / w;
        let da = (wt * c - s) / (w * w);
        let db = (wt * s - one_minus_c) / (w * w);
        (a, b, da, db)
    } else {
        let z2 = wt * wt;
        let t2 = t * t;
        let a = t * (1.0 - z2 / 6.0 + z2 * z2 / 120.0);
        let b = t * wt * (0.5 - z2 / 24.0 + z2 * z2 / 720.0);
        let da = t2 * wt * (-1.0 / 3.0 + z2 / 30.0 - z2 * z2 / 840.0);
        let db = t2 * (0.5 - z2 / 8.0 + z2 * z2 / 144.0);
        (a, b, da, db)
    };

    let next = DVector::from_row_slice(&[
        px + a * vx - b * vy,
        py + b * vx + a * vy,
        c * vx - s * vy,
        s * vx + c * vy,
        w,
    ]);

    let mut f = DMatrix::identity(5, 5);
    f[(0, 2)] = a;
    f[(0, 3)] = -b;
    f[(0, 4)] = vx * da - vy * db;
    f[(1, 2)] = b;
    f[(1, 3)] = a;
    f[(1, 4)] = vx * db + vy * da;
    f[(2, 2)] = c;
    f[(2, 3)] = -s;
    f[(2, 4)] = t * (-vx * s - vy * c);
    f[(3, 2)] = s;
    f[(3, 3)] = c;
    f[(3, 4)] = t * (vx * c - vy * s);
    (next, f)
}

/// Extended Kalman prediction: `m ← f(m)`, `P ← F P Fᵀ + D`.
pub fn predict_kinematic(state: &GaussianState, model: &MotionModel) -> Result<GaussianState> {
    model.validate()?;
    if state.dim() != model.state_dim() {
        return Err(Error::DimensionMismatch { expected: model.state_dim(), got: state.dim() });
    }
    let mean = model.transition(&state.mean);
    let f = model.jacobian(&state.mean);
    let cov = symmetrized(&(&f * state.cov.as_matrix() * f.transpose() + model.process_noise()));
    Ok(GaussianState { mean, cov: SpdMatrix::new(cov)? })
}
