//! Acceptance suite: one test per exit criterion, each printing a pass/fail
//! line. Run with
//!
//! ```text
//! cargo test -p etrack-core --test acceptance -- --nocapture
//! ```
//!
//! The statistical criteria use fixed seeds and are deterministic.

use std::time::Instant;

use etrack_core::extent::CurvatureWeight;
use etrack_core::simharness::{constant_turn_scenario, run_monte_carlo, variable_turn_scenario};
use etrack_core::sweep::{nu_sweep, SweepGrid};
use etrack_core::validation;

const SEED: u64 = 20260809;

fn report(criterion: &str, passed: bool, detail: &str) {
    println!("criterion {criterion}: {} — {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {criterion} failed: {detail}");
}

fn run_checks(criterion: &str, names: &[&str], budget_s: f64) {
    let start = Instant::now();
    let mut all = true;
    let mut parts = Vec::new();
    for name in names {
        let report = validation::run_filtered(SEED, Some(name));
        assert!(!report.checks.is_empty(), "no check named {name}");
        for c in &report.checks {
            all &= c.passed;
            parts.push(format!(
                "{} {} (stat {:.3e}, tol {:.1e})",
                c.name,
                if c.passed { "ok" } else { "FAILED" },
                c.statistic,
                c.threshold
            ));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let within_budget = elapsed < budget_s;
    report(
        criterion,
        all && within_budget,
        &format!("{}; elapsed {elapsed:.1} s (budget {budget_s} s)", parts.join("; ")),
    );
}

// Closed-form dof tracks the root-found dof within ten percent over the
// whole dof / turn-rate-variance grid.
#[test]
fn criterion_1_closed_form_dof_accuracy() {
    let start = Instant::now();
    let rows = nu_sweep(&SweepGrid::default(), CurvatureWeight::Full).expect("sweep");
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "1 (closed-form dof accuracy)",
        worst < 0.10 && elapsed < 5.0,
        &format!(
            "max relative error {worst:.4} over {} grid points (< 0.10); elapsed {elapsed:.2} s (< 5 s)",
            rows.len()
        ),
    );
}

// With a state-independent transformation the state-dependent update reduces
// to the conjugate noise-matrix update to 1e-10 relative on (nu, V).
#[test]
fn criterion_2_reduction_identity() {
    run_checks("2 (reduction identity)", &["state-dependent-reduction-to-conjugate"], 1.0);
}

// The volume-preserving transition dof keeps the expected-extent volume
// constant across prediction to 1e-9 relative.
#[test]
fn criterion_3_volume_preservation() {
    run_checks("3 (volume preservation)", &["volume-preserving-transition"], 5.0);
}

// The KL projection recovers exact inverse Wishart moments to 1e-8 and
// agrees with a dense independent grid search at d = 1.
#[test]
fn criterion_4_kl_projection_fixed_point() {
    run_checks(
        "4 (KL projection fixed point)",
        &["kl-projection-fixed-point", "kl-projection-grid-oracle"],
        30.0,
    );
}

// Appendix property suite: the vec-Kronecker identity, the trigamma lower
// bound, the transition-model moment oracles and the inverse Wishart moment
// formulas, at their stated draw counts and tolerances.
#[test]
fn criterion_5_appendix_property_suite() {
    run_checks(
        "5 (appendix property suite)",
        &[
            "vec-kronecker-identity",
            "trigamma-sum-lower-bound",
            "transition-noise-moments",
            "transition-fixed-state-mean",
            "transition-conjugate-marginal",
            "iw-moment-formulas-vs-sampling",
        ],
        300.0,
    );
}

// Curvature-corrected expectations against 1e7-sample Monte-Carlo
// expectations at the reference operating point, within 2% for turn-rate
// std up to 10 deg (validated variant: half curvature weight).
#[test]
fn criterion_6_curvature_expectation_oracle() {
    run_checks("6 (curvature expectation oracle)", &["curvature-expectation-oracle"], 120.0);
}

// Qualitative simulation reproduction over 900 Monte-Carlo runs:
// (a) both coordinated-turn estimators beat the multiple-model baseline on
//     turn-segment GW distance;
// (b) the state-dependent update matches or beats the Wishart-transition
//     baseline on at least half of the variable-turn steps;
// (c) the multiple-model baseline is the most extent-overconfident during
//     the turn.
// Soft numeric targets (reported, not gated): peak M3-over-M2 GW improvement
// near 8.7% and peak extent-ANEES relative difference near 32.7%.
#[test]
fn criterion_7_simulation_qualitative() {
    let start = Instant::now();

    let ct = run_monte_carlo(&constant_turn_scenario(900, SEED), None).expect("constant turn");
    let find = |r: &etrack_core::MetricsReport, n: &str| {
        r.estimators.iter().find(|e| e.name == n).cloned().expect("estimator present")
    };
    let (m1, m2, m3) = (find(&ct, "M1"), find(&ct, "M2"), find(&ct, "M3"));
    let turn: Vec<usize> = (18..ct.n_steps).collect();
    let seg = |v: &Vec<f64>| turn.iter().map(|&k| v[k]).sum::<f64>() / turn.len() as f64;

    let gate_a = seg(&m2.gw) < seg(&m1.gw) && seg(&m3.gw) < seg(&m1.gw);
    let gate_c = seg(&m1.anees_ext) > seg(&m2.anees_ext) && seg(&m1.anees_ext) > seg(&m3.anees_ext);

    let vt = run_monte_carlo(&variable_turn_scenario(900, SEED), None).expect("variable turn");
    let (v2, v3) = (find(&vt, "M2"), find(&vt, "M3"));
    let wins = (0..vt.n_steps).filter(|&k| v3.gw[k] <= v2.gw[k]).count();
    let gate_b = wins * 2 >= vt.n_steps;

    let peak_impr = (0..vt.n_steps)
        .map(|k| (v2.gw[k] - v3.gw[k]) / v2.gw[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let peak_anees_diff = (0..vt.n_steps)
        .map(|k| (v3.anees_ext[k] - v2.anees_ext[k]) / v2.anees_ext[k])
        .fold(f64::NEG_INFINITY, f64::max);

    let elapsed = start.elapsed().as_secs_f64();
    report(
        "7 (simulation qualitative reproduction)",
        gate_a && gate_b && gate_c && elapsed < 600.0,
        &format!(
            "(a) turn-segment gw M1 {:.2} / M2 {:.2} / M3 {:.2} m: {}; \
             (b) M3 <= M2 on {wins}/{} variable-turn steps: {}; \
             (c) turn extent-ANEES M1 {:.2} / M2 {:.2} / M3 {:.2}: {}; \
             soft targets: peak M3-over-M2 gw improvement {:.1}% (near 8.7%), \
             peak extent-ANEES relative difference {:.1}% (near 32.7%); \
             diverged runs M1 {} M2 {} M3 {} of 900; elapsed {elapsed:.0} s (< 600 s)",
            seg(&m1.gw),
            seg(&m2.gw),
            seg(&m3.gw),
            gate_a,
            vt.n_steps,
            gate_b,
            seg(&m1.anees_ext),
            seg(&m2.anees_ext),
            seg(&m3.anees_ext),
            gate_c,
            peak_impr * 100.0,
            peak_anees_diff * 100.0,
            m1.diverged_runs,
            m2.diverged_runs,
            m3.diverged_runs,
        ),
    );
}

// Identical report bytes for a fixed seed, independent of worker threads.
#[test]
fn criterion_8_determinism_across_threads() {
    let cfg = constant_turn_scenario(100, SEED);
    let a = run_monte_carlo(&cfg, Some(1)).expect("single-threaded run");
    let b = run_monte_carlo(&cfg, Some(8)).expect("eight-threaded run");
    let bytes_a = serde_json::to_vec(&a).expect("serialize");
    let bytes_b = serde_json::to_vec(&b).expect("serialize");
    report(
        "8 (determinism across threads)",
        bytes_a == bytes_b,
        &format!("serialized reports identical over {} bytes (1 vs 8 threads)", bytes_a.len()),
    );
}
