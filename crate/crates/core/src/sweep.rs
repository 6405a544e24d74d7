//! Closed-form vs. root-found degrees-of-freedom comparison over a grid of
//! transition dof and turn-rate variance, at a fixed intermediate matrix and
//! expected turn rate.

use nalgebra::{DMatrix, DVector};

use crate::extent::{
    nu_closed_form, nu_optimal, taylor_expectations, CurvatureWeight, RotationTransform,
};
use crate::kinematics::GaussianState;
use crate::numerics::SpdMatrix;
use crate::{Error, Result};

/// Grid description. Angles are radians internally.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub v_min: f64,
    pub v_max: f64,
    pub v_count: usize,
    /// Turn-rate standard deviations from 0 to this bound (rad/s).
    pub turn_rate_std_max: f64,
    pub std_count: usize,
    pub v_bar: SpdMatrix,
    /// Expected turn rate (rad/s).
    pub turn_rate_mean: f64,
    pub time_step: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            v_min: 6.5,
            v_max: 60.0,
            v_count: 40,
            turn_rate_std_max: 20f64.to_radians(),
            std_count: 41,
            v_bar: SpdMatrix::from_diagonal(&[100.0, 25.0]).expect("diagonal"),
            turn_rate_mean: 10f64.to_radians(),
            time_step: 1.0,
        }
    }
}

/// One grid point: both dof solutions and their relative deviation.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub v: f64,
    pub turn_rate_var_deg2: f64,
    pub nu_optimal: f64,
    pub nu_closed: f64,
    pub rel_err: f64,
}

/// Evaluates the grid. Rows are ordered by turn-rate variance, then by `v`.
pub fn nu_sweep(grid: &SweepGrid, weight: CurvatureWeight) -> Result<Vec<SweepRow>> {
    let d = grid.v_bar.dim() as f64;
    if !(grid.v_min > 2.0 * d + 2.0 && grid.v_max > grid.v_min) {
        return Err(Error::Config(format!(
            "sweep dof bounds must satisfy 2d + 2 < v_min < v_max, got [{}, {}]",
            grid.v_min, grid.v_max
        )));
    }
    if grid.v_count < 2 || grid.std_count < 1 {
        return Err(Error::Config("sweep grid must have at least 2 x 1 points".into()));
    }
    if grid.turn_rate_std_max < 0.0 {
        return Err(Error::Config("turn-rate std bound must be non-negative".into()));
    }

    let rotation = RotationTransform::new(grid.time_step, 4);
    let mut rows = Vec::with_capacity(grid.v_count * grid.std_count);
    for si in 0..grid.std_count {
        let std = if grid.std_count == 1 {
            grid.turn_rate_std_max
        } else {
            grid.turn_rate_std_max * si as f64 / (grid.std_count - 1) as f64
        };
        let mut p = DMatrix::zeros(5, 5);
        p[(4, 4)] = std * std;
        let kin = GaussianState {
            mean: DVector::from_row_slice(&[0.0, 0.0, 30.0, 0.0, grid.turn_rate_mean]),
            cov: SpdMatrix::new_semidefinite(p)?,
        };
        let tay = taylor_expectations(&rotation, &grid.v_bar, &kin, weight)?;
        let var_deg2 = std.to_degrees().powi(2);

        for vi in 0..grid.v_count {
            let v = grid.v_min + (grid.v_max - grid.v_min) * vi as f64 / (grid.v_count - 1) as f64;
            let optimal = nu_optimal(v, &tay.c1, tay.c3)?;
            let closed = nu_closed_form(v, &tay.c1, &tay.c2)?;
            rows.push(SweepRow {
                v,
                turn_rate_var_deg2: var_deg2,
                nu_optimal: optimal,
                nu_closed: closed,
                rel_err: (closed - optimal).abs() / optimal,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_degenerates_to_v() {
        let grid = SweepGrid { std_count: 1, turn_rate_std_max: 0.0, ..SweepGrid::default() };
        let rows = nu_sweep(&grid, CurvatureWeight::Full).unwrap();
        for r in rows {
            assert!((r.nu_optimal - r.v).abs() < 1e-7, "optimal {} at v {}", r.nu_optimal, r.v);
            assert!((r.nu_closed - r.v).abs() < 1e-9);
            assert!(r.rel_err < 1e-8);
        }
    }

    #[test]
    fn closed_form_tracks_optimal_within_ten_percent() {
        let rows = nu_sweep(&SweepGrid::default(), CurvatureWeight::Full).unwrap();
        let worst = rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
        assert!(worst < 0.10, "max relative deviation {worst}");
    }

    #[test]
    fn optimal_dof_decreases_with_turn_rate_variance() {
        let grid = SweepGrid { v_count: 3, ..SweepGrid::default() };
        let rows = nu_sweep(&grid, CurvatureWeight::Full).unwrap();
        // rows are variance-major, v-minor
        for vi in 0..3 {
            let series: Vec<f64> =
                rows.iter().skip(vi).step_by(3).map(|r| r.nu_optimal).collect();
            for w in series.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "dof increased with variance: {w:?}");
            }
        }
    }

    #[test]
    fn invalid_bounds_rejected() {
        let grid = SweepGrid { v_min: 5.0, ..SweepGrid::default() };
        assert!(nu_sweep(&grid, CurvatureWeight::Full).is_err());
    }
}
