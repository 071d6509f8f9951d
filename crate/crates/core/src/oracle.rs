//! Centralized ground truth: Newton optimum, closed-form tracking
//! reference, and the scalar predefined-time decay.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::costs::Cost;
use crate::error::{Error, Result};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 200;
/// Residual above which a capped Newton run is reported as a failure.
pub const ORACLE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub x_star: Vec<f64>,
    /// `‖Σ ∇f_i(x_star)‖`.
    pub residual: f64,
    pub iterations: usize,
}

impl OracleSolution {
    pub fn point(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x_star)
    }
}

fn total(costs: &[Cost], x: &DVector<f64>, t: f64) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let mut v = 0.0;
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    for f in costs {
        v += f.value(x, t);
        g += f.gradient(x, t);
        h += f.hessian(x, t);
    }
    (v, g, h)
}

/// Damped Newton on `F(x) = Σ f_i(x, t)`; the step is halved while `F` increases.
pub fn centralized_minimize(costs: &[Cost], x0: &DVector<f64>, t: f64) -> Result<OracleSolution> {
    if costs.is_empty() {
        return Err(Error::Validation("no cost functions given".into()));
    }
    let mut x = x0.clone();
    let (mut fx, mut g, mut h) = total(costs, &x, t);
    let mut iterations = 0;
    while g.norm() > NEWTON_TOL && iterations < NEWTON_MAX_ITER {
        let chol = h.clone().cholesky().ok_or_else(|| {
            Error::Convexity(format!(
                "aggregate Hessian is not positive definite at {:?}",
                x.as_slice()
            ))
        })?;
        let dir = -chol.solve(&g);
        let mut step = 1.0;
        let mut candidate = &x + &dir * step;
        // near the optimum F is flat to roundoff, so a smaller gradient also counts as progress
        let gnorm = g.norm();
        let accept = |c: &DVector<f64>| {
            total_value(costs, c, t) <= fx || total_gradient(costs, c, t).norm() < gnorm
        };
        while !accept(&candidate) && step > 1e-12 {
            step *= 0.5;
            candidate = &x + &dir * step;
        }
        iterations += 1;
        if candidate == x {
            // no representable progress left
            break;
        }
        x = candidate;
        (fx, g, h) = total(costs, &x, t);
    }
    let residual = g.norm();
    if residual > ORACLE_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "Newton stopped after {iterations} iterations with residual {residual:e}"
        )));
    }
    Ok(OracleSolution {
        x_star: x.as_slice().to_vec(),
        residual,
        iterations,
    })
}

fn total_value(costs: &[Cost], x: &DVector<f64>, t: f64) -> f64 {
    costs.iter().map(|f| f.value(x, t)).sum()
}

fn total_gradient(costs: &[Cost], x: &DVector<f64>, t: f64) -> DVector<f64> {
    costs
        .iter()
        .fold(DVector::zeros(x.len()), |g, f| g + f.gradient(x, t))
}

pub const DECAY_STEP: f64 = 1e-5;
pub const DECAY_FLOOR: f64 = 1e-12;

/// Euler-integrate `V̇ = -exp(αV^p) V^{1-p} / (αpT_m)` from `v0` and return
/// the first time `V <= 1e-12`.
pub fn scalar_pdt_decay(v0: f64, alpha: f64, p: f64, t_m: f64) -> Result<f64> {
    if !(alpha > 0.0 && p > 0.0 && p < 1.0 && t_m > 0.0 && v0 >= 0.0) {
        return Err(Error::Parameter(format!(
            "decay needs alpha > 0, 0 < p < 1, T_m > 0, V0 >= 0 (got {alpha}, {p}, {t_m}, {v0})"
        )));
    }
    let gain = 1.0 / (alpha * p * t_m);
    let mut v = v0;
    let mut steps: u64 = 0;
    while v > DECAY_FLOOR {
        let rate = gain * (alpha * v.powf(p)).min(700.0).exp() * v.powf(1.0 - p);
        v = (v - DECAY_STEP * rate).max(0.0);
        steps += 1;
    }
    Ok(steps as f64 * DECAY_STEP)
}

pub type TimeFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// `t ↦ p*(t) + mean(biases)`: the minimizer of `Σ‖x - p*(t) - ϖ_i‖²`.
pub fn tracking_reference(biases: &[DVector<f64>], p_star: TimeFn) -> TimeFn {
    let dim = biases.first().map_or(0, |b| b.len());
    let mut offset = DVector::zeros(dim);
    for b in biases {
        offset += b;
    }
    if !biases.is_empty() {
        offset /= biases.len() as f64;
    }
    Arc::new(move |t| p_star(t) + &offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{benchmark_suite_a, MovingTarget, Quadratic, QuadraticTracking};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn suite_a_optimum() {
        let sol = centralized_minimize(&benchmark_suite_a(), &dv(&[0.0, 0.0]), 0.0).unwrap();
        assert!((sol.x_star[0] - 0.7858).abs() < 5e-4);
        assert!((sol.x_star[1] + 0.9551).abs() < 5e-4);
        assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn quadratic_in_one_step() {
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let a = dv(&[0.4, -2.0]);
        let f: Cost = Arc::new(Quadratic::centered(q, &a).unwrap());
        let sol = centralized_minimize(&[f], &dv(&[4.0, 4.0]), 0.0).unwrap();
        assert!(sol.iterations <= 2);
        assert!((sol.point() - a).amax() < 1e-12);
    }

    #[test]
    fn tracking_optimum_is_mean_observation() {
        let biases = [
            dv(&[1.0, 1.0]),
            dv(&[-1.0, -1.0]),
            dv(&[0.5, 0.5]),
            dv(&[-0.3, -0.3]),
        ];
        let target = MovingTarget::encirclement();
        let costs: Vec<Cost> = biases
            .iter()
            .map(|b| Arc::new(QuadraticTracking::new(target.offset(b))) as Cost)
            .collect();
        let t = 1.3;
        let sol = centralized_minimize(&costs, &dv(&[0.0, 0.0]), t).unwrap();
        let expected = target.position(t) + dv(&[0.05, 0.05]);
        assert!((sol.point() - expected).amax() < 1e-12);
    }

    #[test]
    fn decay_respects_the_bound() {
        assert!(scalar_pdt_decay(1.0, 1.0, 0.5, 1.0).unwrap() <= 1.0);
        assert!(scalar_pdt_decay(1e6, 1.0, 0.5, 1.0).unwrap() <= 1.0);
        assert_eq!(scalar_pdt_decay(0.0, 1.0, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn decay_matches_closed_form() {
        // with w = αV^p the ODE becomes d(e^{-w})/dt = 1/T_m
        let (v0, alpha, p, t_m) = (2.0_f64, 0.7, 0.3, 1.5);
        let exact = t_m * (1.0 - (-alpha * v0.powf(p)).exp());
        let got = scalar_pdt_decay(v0, alpha, p, t_m).unwrap();
        assert!((got - exact).abs() < 1e-3, "{got} vs {exact}");
    }

    #[test]
    fn reference_offsets() {
        let target = MovingTarget::encirclement();
        let p = target.clone();
        let biased = tracking_reference(
            &[
                dv(&[1.0, 1.0]),
                dv(&[-1.0, -1.0]),
                dv(&[0.5, 0.5]),
                dv(&[-0.3, -0.3]),
            ],
            Arc::new(move |t| p.position(t)),
        );
        assert!((biased(0.0) - dv(&[0.05, 0.05])).amax() < 1e-15);
        let p = target.clone();
        let unbiased =
            tracking_reference(&vec![dv(&[0.0, 0.0]); 4], Arc::new(move |t| p.position(t)));
        assert_eq!(unbiased(2.2), target.position(2.2));
    }
}
