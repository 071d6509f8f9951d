//! Local objective functions with closed-form derivatives.
//!
//! Every cost exposes value, gradient, Hessian and the time partial of the
//! gradient. [`check_derivatives`] compares them against central finite
//! differences, and [`estimate_constants`] samples the Hessian over a box to
//! recover the strong-convexity and Lipschitz constants that the gain bounds
//! in [`crate::dynamics::validate_params`] consume.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::symmetric_eigenvalues;

/// A twice continuously differentiable local cost `f(x, t)`.
pub trait CostFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>, t: f64) -> f64;
    fn gradient(&self, x: &DVector<f64>, t: f64) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64>;

    /// Partial derivative of the gradient with respect to time.
    fn dgrad_dt(&self, _x: &DVector<f64>, _t: f64) -> DVector<f64> {
        DVector::zeros(self.dim())
    }

    fn time_varying(&self) -> bool {
        false
    }

    fn name(&self) -> String;
}

pub type Cost = Arc<dyn CostFunction>;

/// The six two-dimensional benchmark costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteA {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
}

impl SuiteA {
    pub const ALL: [SuiteA; 6] = [
        SuiteA::F1,
        SuiteA::F2,
        SuiteA::F3,
        SuiteA::F4,
        SuiteA::F5,
        SuiteA::F6,
    ];

    /// `index` in `0..6`.
    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl CostFunction for SuiteA {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &DVector<f64>, _t: f64) -> f64 {
        let (a, b) = (x[0], x[1]);
        match self {
            SuiteA::F1 => (a - 0.5).powi(2) + 2.0 * (b + 1.3).powi(2) - 0.5 * a * b,
            SuiteA::F2 => {
                2.0 * (a + 0.7).powi(2)
                    + 1.5 * (b + 1.7).powi(2)
                    + 0.3 * a * b
                    + 0.3 * (0.3 * a + 1.8).sin()
                    + 0.73 * (0.5 * b + 1.0).cos()
            }
            SuiteA::F3 => {
                2.0 * (a - 1.5).powi(2)
                    + 2.0 * (b - 0.3).powi(2)
                    + (2.0 + 0.1 * a * a).ln()
                    + (4.0 + 0.6 * b * b).ln()
            }
            SuiteA::F4 => {
                0.5 * (a - 1.5).powi(2)
                    + 1.5 * (b + 1.6).powi(2)
                    + 0.5 * a * b
                    + a / (2.0 + 0.4 * a * a).sqrt()
                    + 0.6 * b / (1.0 + b * b).sqrt()
            }
            SuiteA::F5 => {
                (a - 2.0).powi(2)
                    + (b - 0.9).powi(2)
                    + 0.7 * a * b
                    + 0.3 * (-0.4 * a * a).exp()
                    + 0.7 * (-0.5 * b * b).exp()
            }
            SuiteA::F6 => 1.5 * (a - 0.8).powi(2) + 2.0 * (b + 1.5).powi(2),
        }
    }

    fn gradient(&self, x: &DVector<f64>, _t: f64) -> DVector<f64> {
        let (a, b) = (x[0], x[1]);
        let (ga, gb) = match self {
            SuiteA::F1 => (2.0 * (a - 0.5) - 0.5 * b, 4.0 * (b + 1.3) - 0.5 * a),
            SuiteA::F2 => (
                4.0 * (a + 0.7) + 0.3 * b + 0.09 * (0.3 * a + 1.8).cos(),
                3.0 * (b + 1.7) + 0.3 * a - 0.365 * (0.5 * b + 1.0).sin(),
            ),
            SuiteA::F3 => (
                4.0 * (a - 1.5) + 0.2 * a / (2.0 + 0.1 * a * a),
                4.0 * (b - 0.3) + 1.2 * b / (4.0 + 0.6 * b * b),
            ),
            SuiteA::F4 => (
                (a - 1.5) + 0.5 * b + 2.0 / (2.0 + 0.4 * a * a).powf(1.5),
                3.0 * (b + 1.6) + 0.5 * a + 0.6 / (1.0 + b * b).powf(1.5),
            ),
            SuiteA::F5 => (
                2.0 * (a - 2.0) + 0.7 * b - 0.24 * a * (-0.4 * a * a).exp(),
                2.0 * (b - 0.9) + 0.7 * a - 0.7 * b * (-0.5 * b * b).exp(),
            ),
            SuiteA::F6 => (3.0 * (a - 0.8), 4.0 * (b + 1.5)),
        };
        DVector::from_vec(vec![ga, gb])
    }

    fn hessian(&self, x: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        let (a, b) = (x[0], x[1]);
        let (haa, hab, hbb) = match self {
            SuiteA::F1 => (2.0, -0.5, 4.0),
            SuiteA::F2 => (
                4.0 - 0.027 * (0.3 * a + 1.8).sin(),
                0.3,
                3.0 - 0.1825 * (0.5 * b + 1.0).cos(),
            ),
            SuiteA::F3 => {
                let da = 2.0 + 0.1 * a * a;
                let db = 4.0 + 0.6 * b * b;
                (
                    4.0 + (0.2 * da - 0.04 * a * a) / (da * da),
                    0.0,
                    4.0 + (1.2 * db - 1.44 * b * b) / (db * db),
                )
            }
            SuiteA::F4 => (
                1.0 - 2.4 * a / (2.0 + 0.4 * a * a).powf(2.5),
                0.5,
                3.0 - 1.8 * b / (1.0 + b * b).powf(2.5),
            ),
            SuiteA::F5 => (
                2.0 - 0.24 * (-0.4 * a * a).exp() * (1.0 - 0.8 * a * a),
                0.7,
                2.0 - 0.7 * (-0.5 * b * b).exp() * (1.0 - b * b),
            ),
            SuiteA::F6 => (3.0, 0.0, 4.0),
        };
        DMatrix::from_row_slice(2, 2, &[haa, hab, hab, hbb])
    }

    fn name(&self) -> String {
        let k = SuiteA::ALL.iter().position(|s| s == self).unwrap() + 1;
        format!("suiteA.f{k}")
    }
}

/// The full six-cost benchmark as shared handles.
pub fn benchmark_suite_a() -> Vec<Cost> {
    SuiteA::ALL.iter().map(|&f| Arc::new(f) as Cost).collect()
}

/// `f(x) = ½ xᵀQx + bᵀx` with symmetric `Q`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: DMatrix<f64>,
    b: DVector<f64>,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = b.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Validation(format!(
                "quadratic: Q is {}x{} but b has length {n}",
                q.nrows(),
                q.ncols()
            )));
        }
        if (&q - q.transpose()).abs().max() > 1e-12 * q.abs().max().max(1.0) {
            return Err(Error::Validation("quadratic: Q must be symmetric".into()));
        }
        Ok(Quadratic { q, b })
    }

    /// `½ (x - a)ᵀ Q (x - a)` up to a constant.
    pub fn centered(q: DMatrix<f64>, center: &DVector<f64>) -> Result<Self> {
        let b = -(&q * center);
        Self::new(q, b)
    }
}

impl CostFunction for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &DVector<f64>, _t: f64) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.b.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>, _t: f64) -> DVector<f64> {
        &self.q * x + &self.b
    }

    fn hessian(&self, _x: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        self.q.clone()
    }

    fn name(&self) -> String {
        "quadratic".into()
    }
}

type PathFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A continuously differentiable trajectory with its velocity.
#[derive(Clone)]
pub struct MovingTarget {
    position: PathFn,
    velocity: PathFn,
    label: String,
}

impl MovingTarget {
    pub fn new(
        label: impl Into<String>,
        position: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
        velocity: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        MovingTarget {
            position: Arc::new(position),
            velocity: Arc::new(velocity),
            label: label.into(),
        }
    }

    /// `p*(t) = (2 sin t + 0.5 t, t)`.
    pub fn encirclement() -> Self {
        Self::new(
            "(2 sin t + 0.5 t, t)",
            |t| DVector::from_vec(vec![2.0 * t.sin() + 0.5 * t, t]),
            |t| DVector::from_vec(vec![2.0 * t.cos() + 0.5, 1.0]),
        )
    }

    pub fn stationary(point: DVector<f64>) -> Self {
        let n = point.len();
        let label = format!("{:?}", point.as_slice());
        Self::new(label, move |_| point.clone(), move |_| DVector::zeros(n))
    }

    /// The same path shifted by a constant.
    pub fn offset(&self, by: &DVector<f64>) -> Self {
        let pos = self.position.clone();
        let shift = by.clone();
        MovingTarget {
            position: Arc::new(move |t| pos(t) + &shift),
            velocity: self.velocity.clone(),
            label: format!("{} + {:?}", self.label, by.as_slice()),
        }
    }

    pub fn position(&self, t: f64) -> DVector<f64> {
        (self.position)(t)
    }

    pub fn velocity(&self, t: f64) -> DVector<f64> {
        (self.velocity)(t)
    }
}

impl fmt::Debug for MovingTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MovingTarget")
            .field("path", &self.label)
            .finish()
    }
}

/// `f(x, t) = ‖x - p̂(t)‖²` for an observed target `p̂`.
#[derive(Debug, Clone)]
pub struct QuadraticTracking {
    observation: MovingTarget,
    dim: usize,
}

impl QuadraticTracking {
    pub fn new(observation: MovingTarget) -> Self {
        let dim = observation.position(0.0).len();
        QuadraticTracking { observation, dim }
    }

    pub fn observation(&self) -> &MovingTarget {
        &self.observation
    }
}

impl CostFunction for QuadraticTracking {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        (x - self.observation.position(t)).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        2.0 * (x - self.observation.position(t))
    }

    fn hessian(&self, _x: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * 2.0
    }

    fn dgrad_dt(&self, _x: &DVector<f64>, t: f64) -> DVector<f64> {
        -2.0 * self.observation.velocity(t)
    }

    fn time_varying(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        format!("tracking[{}]", self.observation.label)
    }
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        DomainBox {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(Error::Validation(format!(
                "box dimension {} does not match cost dimension {dim}",
                self.lower.len()
            )));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(Error::Validation(
                "box bounds must be finite with lower <= upper".into(),
            ));
        }
        Ok(())
    }

    /// Tensor grid with `per_axis` points along each axis, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Vec<DVector<f64>> {
        let n = self.dim();
        let total = per_axis.pow(n as u32);
        (0..total)
            .map(|mut flat| {
                let coords: Vec<f64> = (0..n)
                    .map(|k| {
                        let idx = flat % per_axis;
                        flat /= per_axis;
                        let frac = if per_axis > 1 {
                            idx as f64 / (per_axis - 1) as f64
                        } else {
                            0.5
                        };
                        self.lower[k] + frac * (self.upper[k] - self.lower[k])
                    })
                    .collect();
                DVector::from_vec(coords)
            })
            .collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(&l, &u)| l + (u - l) * rng.random::<f64>()),
        )
    }
}

/// Worst-case relative finite-difference errors found by [`check_derivatives`].
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub cost: String,
    pub samples: usize,
    pub max_gradient_error: f64,
    pub max_hessian_error: f64,
    pub max_time_error: f64,
}

pub const GRADIENT_FD_TOL: f64 = 1e-5;
pub const HESSIAN_FD_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-4;

fn rel_err(fd: f64, exact: f64) -> f64 {
    (fd - exact).abs() / exact.abs().max(1.0)
}

/// Central finite differences of value vs gradient, gradient vs Hessian, and
/// (for time-varying costs) gradient vs `dgrad_dt`, at `samples` uniform points.
pub fn check_derivatives(
    f: &dyn CostFunction,
    samples: usize,
    domain: &DomainBox,
    seed: u64,
) -> Result<DerivativeReport> {
    if samples == 0 {
        return Err(Error::Validation(
            "check_derivatives needs at least one sample".into(),
        ));
    }
    let n = f.dim();
    domain.check(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DerivativeReport {
        cost: f.name(),
        samples,
        max_gradient_error: 0.0,
        max_hessian_error: 0.0,
        max_time_error: 0.0,
    };
    let mismatch = |x: &DVector<f64>, component: String, fd: f64, exact: f64| Error::Derivative {
        cost: f.name(),
        point: x.as_slice().to_vec(),
        component,
        detail: format!("finite difference {fd:.10e} vs analytic {exact:.10e}"),
    };

    for _ in 0..samples {
        let x = domain.sample(&mut rng);
        let t = if f.time_varying() {
            rng.random::<f64>() * 6.0
        } else {
            0.0
        };
        let g = f.gradient(&x, t);
        let h = f.hessian(&x, t);
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += FD_STEP;
            xm[k] -= FD_STEP;
            let fd = (f.value(&xp, t) - f.value(&xm, t)) / (2.0 * FD_STEP);
            let e = rel_err(fd, g[k]);
            report.max_gradient_error = report.max_gradient_error.max(e);
            if e > GRADIENT_FD_TOL {
                return Err(mismatch(&x, format!("gradient[{k}]"), fd, g[k]));
            }
            let gp = f.gradient(&xp, t);
            let gm = f.gradient(&xm, t);
            for r in 0..n {
                let fd = (gp[r] - gm[r]) / (2.0 * FD_STEP);
                let e = rel_err(fd, h[(r, k)]);
                report.max_hessian_error = report.max_hessian_error.max(e);
                if e > HESSIAN_FD_TOL {
                    return Err(mismatch(&x, format!("hessian[{r}][{k}]"), fd, h[(r, k)]));
                }
            }
        }
        let dt = f.dgrad_dt(&x, t);
        let gp = f.gradient(&x, t + FD_STEP);
        let gm = f.gradient(&x, t - FD_STEP);
        for r in 0..n {
            let fd = (gp[r] - gm[r]) / (2.0 * FD_STEP);
            let e = rel_err(fd, dt[r]);
            report.max_time_error = report.max_time_error.max(e);
            if e > GRADIENT_FD_TOL {
                return Err(mismatch(&x, format!("dgrad_dt[{r}]"), fd, dt[r]));
            }
        }
    }
    Ok(report)
}

/// Sampled curvature and rate constants of one cost over a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityConstants {
    /// Smallest Hessian eigenvalue seen (strong convexity).
    pub psi: f64,
    /// Largest Hessian eigenvalue seen (gradient Lipschitz constant).
    pub psi_upper: f64,
    /// Largest `‖∂t ∇f‖_∞` seen.
    pub omega: f64,
    /// Largest induced 1-norm of the Hessian seen.
    pub hess_norm1: f64,
    /// Hessian identical at every sample, so the constants are exact rather than estimates.
    pub exact: bool,
    pub domain: DomainBox,
    pub grid: usize,
    pub time_samples: usize,
}

impl ConvexityConstants {
    /// Worst case over a set of agents: min ψ, max Ψ, ω, H.
    pub fn aggregate(all: &[ConvexityConstants]) -> Option<ConvexityConstants> {
        let first = all.first()?.clone();
        Some(all.iter().skip(1).fold(first, |acc, c| ConvexityConstants {
            psi: acc.psi.min(c.psi),
            psi_upper: acc.psi_upper.max(c.psi_upper),
            omega: acc.omega.max(c.omega),
            hess_norm1: acc.hess_norm1.max(c.hess_norm1),
            exact: acc.exact && c.exact,
            ..acc
        }))
    }
}

fn induced_norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Sample the Hessian on a `grid`-per-axis lattice over `domain` at each of `times`.
pub fn estimate_constants(
    f: &dyn CostFunction,
    domain: &DomainBox,
    grid: usize,
    times: &[f64],
) -> Result<ConvexityConstants> {
    if grid < 2 {
        return Err(Error::Validation(format!(
            "grid must have at least 2 points per axis, got {grid}"
        )));
    }
    domain.check(f.dim())?;
    let times: Vec<f64> = if times.is_empty() {
        vec![0.0]
    } else {
        times.to_vec()
    };
    let mut psi = f64::INFINITY;
    let mut psi_upper = f64::NEG_INFINITY;
    let mut omega: f64 = 0.0;
    let mut hess_norm1: f64 = 0.0;
    let mut reference: Option<DMatrix<f64>> = None;
    let mut exact = true;

    for &t in &times {
        for x in domain.grid(grid) {
            let h = f.hessian(&x, t);
            let eig = symmetric_eigenvalues(&h)?;
            let lo = eig[0];
            if !(lo > 0.0) {
                return Err(Error::Convexity(format!(
                    "{}: Hessian eigenvalue {lo:.6} <= 0 at x = {:?}, t = {t}",
                    f.name(),
                    x.as_slice()
                )));
            }
            psi = psi.min(lo);
            psi_upper = psi_upper.max(eig[eig.len() - 1]);
            hess_norm1 = hess_norm1.max(induced_norm1(&h));
            if f.time_varying() {
                omega = omega.max(f.dgrad_dt(&x, t).amax());
            }
            match &reference {
                None => reference = Some(h),
                Some(r) => exact &= *r == h,
            }
        }
    }
    Ok(ConvexityConstants {
        psi,
        psi_upper,
        omega,
        hess_norm1,
        exact,
        domain: domain.clone(),
        grid,
        time_samples: times.len(),
    })
}

/// Whether all costs share one Hessian (to `tol`) at the sampled points.
pub fn check_identical_hessians(
    costs: &[Cost],
    points: &[DVector<f64>],
    times: &[f64],
    tol: f64,
) -> Result<()> {
    let Some(first) = costs.first() else {
        return Ok(());
    };
    for &t in times {
        for x in points {
            let h0 = first.hessian(x, t);
            for (i, c) in costs.iter().enumerate().skip(1) {
                let diff = (c.hessian(x, t) - &h0).amax();
                if diff > tol {
                    return Err(Error::Assumption(format!(
                        "Hessian of agent {i} differs from agent 0 by {diff:.3e} at x = {:?}, t = {t}; \
                         the time-varying variant requires identical Hessians",
                        x.as_slice()
                    )));
                }
            }
        }
    }
    Ok(())
}
