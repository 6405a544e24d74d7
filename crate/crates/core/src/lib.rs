//! Extended-target tracking with the random matrix model.
//!
//! An extended target is described by a Gaussian kinematic state vector
//! (position, velocity and optionally turn-rate) together with a symmetric
//! positive definite *extent matrix* whose unit level set is the ellipse
//! occupied by the target. The extent is modelled as inverse Wishart
//! distributed, and the filter recursion updates the parameter pairs
//! `(m, P)` and `(ν, V)` through alternating prediction and correction steps.
//!
//! The crate provides:
//!
//! * [`numerics`] — SPD matrix primitives and the gamma-family special
//!   functions everything else is built on;
//! * [`matvar`] — inverse Wishart / Wishart densities, moments and samplers,
//!   including the factor-form transition sampler used as a ground-truth
//!   oracle for the extent evolution model;
//! * [`kinematics`] — constant-velocity and coordinated-turn motion models
//!   with an extended Kalman prediction;
//! * [`extent`] — the extent-matrix prediction updates (exponential
//!   forgetting, conjugate noise update, Wishart-transition baseline, and the
//!   kinematic-state-dependent update built on a single KL projection),
//!   together with the degrees-of-freedom solvers and transition-dof rules;
//! * [`correction`] — the mean-and-spread measurement update shared by all
//!   simulated estimators;
//! * [`simharness`] — scenario generation, measurement simulation, metrics
//!   (Gaussian-Wasserstein distance, ANEES) and a deterministic parallel
//!   Monte-Carlo driver;
//! * [`validation`] — the executable oracle suite (`etrack validate`);
//! * [`sweep`] — the closed-form vs. root-found degrees-of-freedom sweep.

pub mod correction;
mod error;
pub mod extent;
pub mod kinematics;
pub mod matvar;
pub mod numerics;
pub mod simharness;
pub mod sweep;
pub mod validation;

pub use error::{Error, Result};
pub use extent::{ExtentState, TransitionConfig};
pub use kinematics::{GaussianState, MotionModel};
pub use numerics::SpdMatrix;
pub use simharness::{MetricsReport, ScenarioConfig};
