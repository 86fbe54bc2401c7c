//! Search for the least-noisy generalised two-mode quadrature.
//!
//! For each state the symmetrised quadrature covariance is computed once; the
//! variance of `X_{θ,φ_q,η}` is then a quadratic form in the angle-dependent
//! weights. The minimum is located by a coarse grid over the canonical angle
//! ranges followed by Nelder–Mead refinement from the best cell.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{ladder_ops, Basis, LadderOps, TwoModeSpace};
use crate::metrics::{QuadratureAngles, QuadratureCovariance, VACUUM_VARIANCE};
use crate::model::{build_hamiltonian, BatteryModelParams};
use crate::propagate::{charging_cutoffs, Leakage, Propagator, QState};
use crate::simplex::{self, SimplexOptions};

/// Grid points per angle in the global scan.
pub const GRID_POINTS: usize = 24;
/// In warm-start mode, every this many time points the global grid is rescanned.
pub const RESCAN_EVERY: usize = 10;
/// Improvements smaller than this do not displace an earlier (canonically smaller) optimum.
const TIE_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerStatus {
    Converged,
    GridOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SqueezePoint {
    pub t: f64,
    pub var_min: f64,
    pub angles: QuadratureAngles,
    pub status: OptimizerStatus,
    pub leakage: Leakage,
}

impl SqueezePoint {
    pub fn truncation_contaminated(&self) -> bool {
        self.leakage.contaminated()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMode {
    /// Sequential; refine from the previous optimum, rescanning periodically.
    #[default]
    WarmStart,
    /// Every time point gets the full grid + refinement, evaluated in parallel.
    Independent,
}

#[derive(Clone, Debug, Serialize)]
pub struct SqueezeTrajectory {
    pub params: BatteryModelParams,
    pub alpha: C64,
    pub beta: C64,
    pub cutoffs: (usize, usize),
    pub mode: TrajectoryMode,
    pub points: Vec<SqueezePoint>,
}

impl SqueezeTrajectory {
    pub fn any_contaminated(&self) -> bool {
        self.points.iter().any(|p| p.truncation_contaminated())
    }

    /// Index of the smallest `var_min`.
    pub fn argmin(&self) -> Option<usize> {
        self.points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.var_min.total_cmp(&b.1.var_min))
            .map(|(i, _)| i)
    }

    /// The global minimum, when it is squeezed and lies strictly inside the window.
    pub fn finite_time_minimum(&self) -> Option<&SqueezePoint> {
        let i = self.argmin()?;
        let p = &self.points[i];
        (i > 0 && i + 1 < self.points.len() && p.var_min < VACUUM_VARIANCE && p.t > 0.0).then_some(p)
    }
}

fn grid_angles() -> impl Iterator<Item = QuadratureAngles> {
    let g = GRID_POINTS;
    (0..g).flat_map(move |i| {
        (0..g).flat_map(move |j| {
            (0..g).map(move |k| {
                QuadratureAngles::new(
                    (PI / 2.0) * i as f64 / (g - 1) as f64,
                    PI * j as f64 / g as f64,
                    2.0 * PI * k as f64 / g as f64,
                )
            })
        })
    })
}

fn grid_scan(cov: &QuadratureCovariance) -> (f64, QuadratureAngles) {
    let mut best = (f64::INFINITY, QuadratureAngles::new(0.0, 0.0, 0.0));
    for ang in grid_angles() {
        let v = cov.variance(&ang);
        if v < best.0 - TIE_TOL {
            best = (v, ang);
        }
    }
    best
}

fn refine(cov: &QuadratureCovariance, start: QuadratureAngles, start_val: f64) -> (f64, QuadratureAngles, OptimizerStatus) {
    let res = simplex::minimize(
        |x: &[f64; 3]| cov.variance(&QuadratureAngles::new(x[0], x[1], x[2])),
        [start.theta, start.phi_q, start.eta],
        SimplexOptions { initial_step: 0.1, ..Default::default() },
    );
    let status = if res.converged { OptimizerStatus::Converged } else { OptimizerStatus::GridOnly };
    if res.f < start_val - TIE_TOL {
        (res.f, QuadratureAngles::new(res.x[0], res.x[1], res.x[2]).canonical(), status)
    } else {
        (start_val, start, status)
    }
}

/// Global grid scan followed by simplex refinement.
pub fn minimize_covariance(cov: &QuadratureCovariance) -> (f64, QuadratureAngles, OptimizerStatus) {
    let (v, a) = grid_scan(cov);
    refine(cov, a, v)
}

/// Refinement only, from a supplied starting point.
pub fn minimize_covariance_from(cov: &QuadratureCovariance, start: QuadratureAngles) -> (f64, QuadratureAngles, OptimizerStatus) {
    let start = start.canonical();
    refine(cov, start, cov.variance(&start))
}

/// Least quadrature variance of a product-space state; `t` is recorded as given.
pub fn min_variance(state: &QState, t: f64) -> Result<SqueezePoint> {
    let ops = ladder_ops(state.basis())?;
    let cov = QuadratureCovariance::from_state(state, &ops)?;
    let (var_min, angles, status) = minimize_covariance(&cov);
    Ok(SqueezePoint { t, var_min, angles, status, leakage: state.leakage() })
}

/// Optimal quadrature along a time grid, starting from `|α>|β>` evolved under
/// the charging Hamiltonian. Cutoffs default to [`charging_cutoffs`].
pub fn squeeze_trajectory(
    model: &BatteryModelParams,
    alpha: C64,
    beta: C64,
    times: &[f64],
    mode: TrajectoryMode,
    cutoffs: Option<(usize, usize)>,
) -> Result<SqueezeTrajectory> {
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let (ca, cb) = cutoffs.unwrap_or_else(|| charging_cutoffs(alpha, beta, model.n));
    let basis = Arc::new(Basis::Product(TwoModeSpace::new(ca, cb)));
    let psi0 = QState::coherent(alpha, beta, &basis)?;
    let h = build_hamiltonian(model, true, &basis);
    let prop = Propagator::new(&h)?;
    let spectral = prop.project(&psi0)?;
    let ops = ladder_ops(&basis)?;

    let moments = |t: f64| -> Result<(QuadratureCovariance, Leakage)> {
        let ev = prop.at(&spectral, t);
        Ok((QuadratureCovariance::from_state(&ev.state, &ops)?, ev.leakage))
    };

    let points = match mode {
        TrajectoryMode::Independent => times
            .par_iter()
            .map(|&t| {
                let (cov, leakage) = moments(t)?;
                let (var_min, angles, status) = minimize_covariance(&cov);
                Ok(SqueezePoint { t, var_min, angles, status, leakage })
            })
            .collect::<Result<Vec<_>>>()?,
        TrajectoryMode::WarmStart => {
            let covs: Vec<(QuadratureCovariance, Leakage)> =
                times.par_iter().map(|&t| moments(t)).collect::<Result<_>>()?;
            let mut out: Vec<SqueezePoint> = Vec::with_capacity(times.len());
            for (i, (&t, (cov, leakage))) in times.iter().zip(&covs).enumerate() {
                let (var_min, angles, status) = match out.last() {
                    Some(prev) if i % RESCAN_EVERY != 0 => minimize_covariance_from(cov, prev.angles),
                    _ => minimize_covariance(cov),
                };
                out.push(SqueezePoint { t, var_min, angles, status, leakage: *leakage });
            }
            out
        }
    };

    Ok(SqueezeTrajectory { params: model.clone(), alpha, beta, cutoffs: (ca, cb), mode, points })
}

/// Ladder operators for a state's basis (re-exported for callers that reuse them).
pub fn ladders_for(state: &QState) -> Result<LadderOps> {
    ladder_ops(state.basis())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_unsqueezed_with_canonical_tie_break() {
        let basis = Basis::product(2, 2);
        let p = min_variance(&QState::fock(&basis, 0, 0).unwrap(), 0.0).unwrap();
        assert!((p.var_min - 0.25).abs() < 1e-15);
        assert_eq!((p.angles.theta, p.angles.phi_q, p.angles.eta), (0.0, 0.0, 0.0));
        assert_eq!(p.status, OptimizerStatus::Converged);
    }

    #[test]
    fn coherent_state_is_unsqueezed() {
        let alpha = C64::new(0.3, -1.2);
        let beta = C64::new(0.8, 0.5);
        let basis = crate::propagate::charging_space(alpha, beta, 2);
        let p = min_variance(&QState::coherent(alpha, beta, &basis).unwrap(), 0.0).unwrap();
        assert!((p.var_min - 0.25).abs() < 1e-12);
        assert!(p.var_min <= 0.25 + 1e-12);
    }

    #[test]
    fn zero_coupling_stays_coherent() {
        let model = BatteryModelParams::with_coupling(3, 1.0, 0.0).unwrap();
        let times = crate::propagate::uniform_grid(0.0, 2.0, 9);
        let traj = squeeze_trajectory(&model, C64::new(1.0, 0.5), C64::new(0.0, 1.0), &times, TrajectoryMode::WarmStart, None).unwrap();
        for p in &traj.points {
            assert!((p.var_min - 0.25).abs() < 1e-12, "t = {}: {}", p.t, p.var_min);
        }
        assert!(traj.finite_time_minimum().is_none());
    }

    #[test]
    fn rejects_unsorted_grid() {
        let model = BatteryModelParams::with_coupling(2, 1.0, 0.1).unwrap();
        let r = squeeze_trajectory(&model, C64::new(0.5, 0.0), C64::new(0.5, 0.0), &[0.0, 0.2, 0.1], TrajectoryMode::Independent, None);
        assert!(r.is_err());
    }
}
