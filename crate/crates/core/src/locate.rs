//! Hyperbolic 2D positioning from signed range differences.
//!
//! The model for base station `k` against reference `e` at position `p` is
//! `|p - p_k| - |p - p_e|`; the solver minimises half the squared residual
//! norm with Levenberg-damped Gauss-Newton.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::scene::Rect;

/// Positions closer than this to a base station are singular.
pub const COINCIDENT_TOL_M: f64 = 1e-9;

/// Above this Jacobian condition number at the initial point the layout is
/// treated as collinear.
pub const MAX_CONDITION: f64 = 1e12;

pub const GRADIENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitStrategy {
    BsCentroid,
    /// Centre of the base stations' bounding rectangle.
    AoiCenter,
    Explicit(Vec2),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: u32,
    pub step_tolerance_m: f64,
    pub initial_damping: f64,
    pub init: InitStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iterations: 100, step_tolerance_m: 1e-6, initial_damping: 1e-3, init: InitStrategy::BsCentroid }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub position: Vec2,
    pub residual_norm_m: f64,
    pub iterations: u32,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocateError {
    #[error("K < 3: need at least three base stations, have {0}")]
    TooFewBaseStations(usize),
    #[error("expected {expected} range differences, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("reference index {0} out of range")]
    BadReference(usize),
    #[error("position coincides with base station index {0}")]
    CoincidentWithBs(usize),
    #[error("base station geometry is collinear (condition number {0:e})")]
    CollinearGeometry(f64),
}

fn check_shapes(bs: &[Vec2], reference: usize, observed: Option<&[f64]>) -> Result<(), LocateError> {
    if reference >= bs.len() {
        return Err(LocateError::BadReference(reference));
    }
    if let Some(obs) = observed {
        if obs.len() + 1 != bs.len() {
            return Err(LocateError::LengthMismatch { expected: bs.len().saturating_sub(1), got: obs.len() });
        }
    }
    Ok(())
}

/// Unit vectors from every base station towards `p`.
fn unit_vectors(p: Vec2, bs: &[Vec2]) -> Result<Vec<(f64, Vec2)>, LocateError> {
    bs.iter()
        .enumerate()
        .map(|(i, b)| {
            let d = p - *b;
            let n = d.norm();
            if n < COINCIDENT_TOL_M {
                Err(LocateError::CoincidentWithBs(i))
            } else {
                Ok((n, d / n))
            }
        })
        .collect()
}

/// `observed_k - (|p - p_k| - |p - p_e|)` for every `k != e`, in index order.
pub fn residuals(p: Vec2, bs: &[Vec2], reference: usize, observed: &[f64]) -> Result<Vec<f64>, LocateError> {
    check_shapes(bs, reference, Some(observed))?;
    let u = unit_vectors(p, bs)?;
    let de = u[reference].0;
    Ok((0..bs.len()).filter(|k| *k != reference).zip(observed).map(|(k, obs)| obs - (u[k].0 - de)).collect())
}

/// Residual Jacobian: row `k` is `-(u_k - u_e)`.
pub fn jacobian(p: Vec2, bs: &[Vec2], reference: usize) -> Result<Vec<[f64; 2]>, LocateError> {
    check_shapes(bs, reference, None)?;
    let u = unit_vectors(p, bs)?;
    let ue = u[reference].1;
    Ok((0..bs.len())
        .filter(|k| *k != reference)
        .map(|k| {
            let d = u[k].1 - ue;
            [-d.x, -d.y]
        })
        .collect())
}

/// `J^T J` and `J^T r`.
fn normal_equations(j: &[[f64; 2]], r: &[f64]) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut a = [[0.0; 2]; 2];
    let mut g = [0.0; 2];
    for (row, ri) in j.iter().zip(r) {
        a[0][0] += row[0] * row[0];
        a[0][1] += row[0] * row[1];
        a[1][1] += row[1] * row[1];
        g[0] += row[0] * ri;
        g[1] += row[1] * ri;
    }
    a[1][0] = a[0][1];
    (a, g)
}

/// Condition number of `J` from the eigenvalues of `J^T J`.
fn condition_number(j: &[[f64; 2]]) -> f64 {
    let (a, _) = normal_equations(j, &alloc::vec![0.0; j.len()]);
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = libm::sqrt((0.25 * tr * tr - det).max(0.0));
    let hi = 0.5 * tr + disc;
    let lo = 0.5 * tr - disc;
    if lo <= hi * 1e-32 {
        f64::INFINITY
    } else {
        libm::sqrt(hi / lo)
    }
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn initial_point(bs: &[Vec2], init: InitStrategy) -> Vec2 {
    match init {
        InitStrategy::BsCentroid => bs.iter().fold(Vec2::default(), |acc, b| acc + *b) / bs.len() as f64,
        InitStrategy::AoiCenter => Rect::enclosing(bs.iter().copied()).map(|r| r.center()).unwrap_or_default(),
        InitStrategy::Explicit(p) => p,
    }
}

/// Solves for the 2D position. `observed` holds the signed range differences
/// of every base station except `reference`, in index order.
pub fn solve(
    observed: &[f64],
    bs: &[Vec2],
    reference: usize,
    config: &SolverConfig,
) -> Result<PositionEstimate, LocateError> {
    solve_with_history(observed, bs, reference, config).map(|(e, _)| e)
}

/// Like [`solve`], also returning the cost after every accepted step
/// (starting with the initial cost).
pub fn solve_with_history(
    observed: &[f64],
    bs: &[Vec2],
    reference: usize,
    config: &SolverConfig,
) -> Result<(PositionEstimate, Vec<f64>), LocateError> {
    if bs.len() < 3 {
        return Err(LocateError::TooFewBaseStations(bs.len()));
    }
    check_shapes(bs, reference, Some(observed))?;
    let bounds = Rect::enclosing(bs.iter().copied()).expect("non-empty").scaled(2.0);
    let clamp = |p: Vec2| Vec2::new(p.x.clamp(bounds.min.x, bounds.max.x), p.y.clamp(bounds.min.y, bounds.max.y));

    let mut p = initial_point(bs, config.init);
    let cond = condition_number(&jacobian(p, bs, reference)?);
    if !(cond <= MAX_CONDITION) {
        return Err(LocateError::CollinearGeometry(cond));
    }

    let mut r = residuals(p, bs, reference, observed)?;
    let mut c = cost(&r);
    let mut history = alloc::vec![c];
    let mut lambda = config.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let j = jacobian(p, bs, reference)?;
        let (a, g) = normal_equations(&j, &r);
        if libm::hypot(g[0], g[1]) < GRADIENT_TOL {
            converged = true;
            break;
        }
        let (a00, a01, a11) = (a[0][0] + lambda, a[0][1], a[1][1] + lambda);
        let det = a00 * a11 - a01 * a01;
        if !(det.abs() > 0.0) {
            lambda *= 10.0;
            continue;
        }
        let step = Vec2::new(-(a11 * g[0] - a01 * g[1]) / det, -(a00 * g[1] - a01 * g[0]) / det);
        let candidate = clamp(p + step);
        let moved = candidate.distance(p);
        let trial = residuals(candidate, bs, reference, observed).map(|r| (cost(&r), r));
        match trial {
            Ok((c_new, r_new)) if c_new < c => {
                p = candidate;
                r = r_new;
                c = c_new;
                history.push(c);
                lambda *= 0.1;
                if moved < config.step_tolerance_m {
                    converged = true;
                    break;
                }
            }
            _ => {
                lambda *= 10.0;
                // No decrease even for a vanishing step: we sit at the minimum.
                if moved < config.step_tolerance_m {
                    converged = true;
                    break;
                }
                if lambda > 1e16 {
                    break;
                }
            }
        }
    }

    let estimate = PositionEstimate { position: p, residual_norm_m: libm::sqrt(2.0 * c), iterations, converged };
    Ok((estimate, history))
}

/// Euclidean distance between estimate and ground truth in the plane.
pub fn error_2d(estimate: Vec2, ground_truth: Vec2) -> f64 {
    estimate.distance(ground_truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn square() -> Vec<Vec2> {
        vec![Vec2::new(0.0, 0.0), Vec2::new(29.0, 0.0), Vec2::new(0.0, 25.0), Vec2::new(29.0, 25.0)]
    }

    /// Noise-free range differences computed straight from the geometry.
    fn observe(truth: Vec2, bs: &[Vec2], reference: usize) -> Vec<f64> {
        let de = truth.distance(bs[reference]);
        (0..bs.len()).filter(|k| *k != reference).map(|k| truth.distance(bs[k]) - de).collect()
    }

    #[test]
    fn residuals_vanish_at_truth() {
        let truth = Vec2::new(10.0, 12.0);
        let obs = observe(truth, &square(), 0);
        assert!(residuals(truth, &square(), 0, &obs).unwrap().iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn residuals_zero_at_centre_with_zero_obs() {
        let r = residuals(Vec2::new(14.5, 12.5), &square(), 0, &[0.0; 3]).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn residuals_match_direct_formula_when_perturbed() {
        let truth = Vec2::new(10.0, 12.0);
        let bs = square();
        let obs = observe(truth, &bs, 0);
        let p = truth + Vec2::new(0.5, 0.0);
        let r = residuals(p, &bs, 0, &obs).unwrap();
        for (i, k) in [1usize, 2, 3].iter().enumerate() {
            let dk = libm::hypot(p.x - bs[*k].x, p.y - bs[*k].y);
            let de = libm::hypot(p.x - bs[0].x, p.y - bs[0].y);
            assert!((r[i] - (obs[i] - (dk - de))).abs() < 1e-12);
        }
        assert!(r.iter().any(|x| x.abs() > 0.01));
    }

    #[test]
    fn coincident_position_rejected() {
        assert_eq!(residuals(Vec2::new(29.0, 0.0), &square(), 0, &[0.0; 3]), Err(LocateError::CoincidentWithBs(1)));
        assert!(jacobian(Vec2::new(0.0, 0.0), &square(), 0).is_err());
    }

    #[test]
    fn jacobian_rows_bounded_and_match_fd() {
        let bs = square();
        let p = Vec2::new(7.3, 18.1);
        let obs = [0.3, -1.2, 2.0];
        let j = jacobian(p, &bs, 0).unwrap();
        let h = 1e-6;
        for (axis, dp) in [Vec2::new(h, 0.0), Vec2::new(0.0, h)].into_iter().enumerate() {
            let rp = residuals(p + dp, &bs, 0, &obs).unwrap();
            let rm = residuals(p - dp, &bs, 0, &obs).unwrap();
            for k in 0..3 {
                let fd = (rp[k] - rm[k]) / (2.0 * h);
                assert!((fd - j[k][axis]).abs() < 1e-5);
            }
        }
        assert!(j.iter().all(|r| libm::hypot(r[0], r[1]) <= 2.0 + 1e-12));
    }

    #[test]
    fn jacobian_on_bisector_is_symmetric() {
        // On the perpendicular bisector of bs0-bs1 (x = 14.5) the row for bs1
        // has no y component: the two unit vectors mirror each other.
        let j = jacobian(Vec2::new(14.5, 9.0), &square(), 0).unwrap();
        assert!(j[0][1].abs() < 1e-15);
        assert!(j[0][0].abs() > 0.1);
    }

    #[test]
    fn exact_recovery() {
        let truth = Vec2::new(10.0, 12.0);
        let est = solve(&observe(truth, &square(), 0), &square(), 0, &SolverConfig::default()).unwrap();
        assert!(est.converged);
        assert!(error_2d(est.position, truth) < 1e-6);
    }

    #[test]
    fn nlos_excess_pulls_estimate() {
        let truth = Vec2::new(10.0, 12.0);
        let mut obs = observe(truth, &square(), 0);
        obs[1] += 2.0;
        let est = solve(&obs, &square(), 0, &SolverConfig::default()).unwrap();
        assert!(error_2d(est.position, truth) > 0.1);
    }

    #[test]
    fn too_few_bs() {
        let bs = &square()[..2];
        assert_eq!(solve(&[0.0], bs, 0, &SolverConfig::default()), Err(LocateError::TooFewBaseStations(2)));
    }

    #[test]
    fn collinear_rejected() {
        let bs = vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(20.0, 0.0), Vec2::new(30.0, 0.0)];
        assert!(matches!(
            solve(&[1.0, 2.0, 3.0], &bs, 0, &SolverConfig::default()),
            Err(LocateError::CollinearGeometry(_))
        ));
    }

    #[test]
    fn cost_never_increases() {
        let truth = Vec2::new(3.0, 21.0);
        let mut obs = observe(truth, &square(), 0);
        obs[0] += 1.3;
        obs[2] -= 0.7;
        let (_, hist) = solve_with_history(&obs, &square(), 0, &SolverConfig::default()).unwrap();
        assert!(hist.len() > 1);
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn error_2d_basics() {
        assert_eq!(error_2d(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)), 0.0);
        assert_eq!(error_2d(Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0)), 5.0);
    }
}
