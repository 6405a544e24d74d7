//! Hot-path benchmarks: the extent prediction updates, the KL projection,
//! the measurement update and a full Monte-Carlo run.

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use etrack_core::correction::{correct, MeasurementSet, SensorModel};
use etrack_core::extent::{
    kld_project_to_iw, predict_wishart_baseline, predict_state_dependent, taylor_expectations, CurvatureWeight,
    ExtentState, NuSolver, RotationTransform, TransitionConfig, VRule,
};
use etrack_core::kinematics::GaussianState;
use etrack_core::matvar::{iw_entropy_moments, InverseWishartParams};
use etrack_core::simharness::{constant_turn_scenario, run_monte_carlo};
use etrack_core::SpdMatrix;

fn fixture() -> (ExtentState, GaussianState, SpdMatrix, RotationTransform) {
    let extent = ExtentState::new(
        20.0,
        SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1400.0, 180.0, 180.0, 360.0])).unwrap(),
    )
    .unwrap();
    let mut p = DMatrix::zeros(5, 5);
    p[(0, 0)] = 25.0;
    p[(1, 1)] = 25.0;
    p[(2, 2)] = 4.0;
    p[(3, 3)] = 4.0;
    p[(4, 4)] = 1e-3;
    let kin = GaussianState {
        mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, 0.17]),
        cov: SpdMatrix::new_semidefinite(p).unwrap(),
    };
    let q = extent.v_mat().inverse().unwrap().scale(0.33).unwrap();
    (extent, kin, q, RotationTransform::new(1.0, 4))
}

fn bench_predictions(c: &mut Criterion) {
    let (extent, kin, q, rot) = fixture();

    c.bench_function("predict_state_dependent_closed_form", |b| {
        let cfg = TransitionConfig::new(q.clone(), &rot, VRule::VolumePreserving);
        b.iter(|| predict_state_dependent(&extent, &kin, &cfg).unwrap())
    });

    c.bench_function("predict_state_dependent_root_found", |b| {
        let cfg = TransitionConfig::new(q.clone(), &rot, VRule::VolumePreserving)
            .with_solver(NuSolver::Optimal);
        b.iter(|| predict_state_dependent(&extent, &kin, &cfg).unwrap())
    });

    c.bench_function("predict_wishart_baseline", |b| {
        b.iter(|| predict_wishart_baseline(&extent, &kin, &rot, 30.0, CurvatureWeight::Full).unwrap())
    });

    c.bench_function("taylor_expectations_rotation", |b| {
        b.iter(|| taylor_expectations(&rot, extent.v_mat(), &kin, CurvatureWeight::Full).unwrap())
    });

    c.bench_function("kld_project_to_iw", |b| {
        let p = InverseWishartParams::new(extent.nu(), extent.v_mat().clone()).unwrap();
        let m = iw_entropy_moments(&p).unwrap();
        b.iter(|| kld_project_to_iw(&m.e_inv, m.e_lndet).unwrap())
    });
}

fn bench_correction(c: &mut Criterion) {
    let (extent, kin, _, _) = fixture();
    let kin4 = GaussianState {
        mean: kin.mean.rows(0, 4).into_owned(),
        cov: SpdMatrix::new_semidefinite(kin.cov.as_matrix().view((0, 0), (4, 4)).into_owned())
            .unwrap(),
    };
    let sensor =
        SensorModel::position_sensor(4, SpdMatrix::from_diagonal(&[2.25, 2.25]).unwrap(), 0.25)
            .unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let points: Vec<DVector<f64>> = (0..10)
        .map(|_| DVector::from_fn(2, |_, _| 10.0 * (rng.random::<f64>() - 0.5)))
        .collect();
    let meas = MeasurementSet::new(points).unwrap();
    c.bench_function("correct_ten_measurements", |b| {
        b.iter(|| correct(&kin4, &extent, &meas, &sensor).unwrap())
    });
}

fn bench_monte_carlo(c: &mut Criterion) {
    let cfg = constant_turn_scenario(1, 7);
    c.bench_function("monte_carlo_single_run", |b| {
        b.iter(|| run_monte_carlo(&cfg, Some(1)).unwrap())
    });
}

criterion_group!(benches, bench_predictions, bench_correction, bench_monte_carlo);
criterion_main!(benches);
