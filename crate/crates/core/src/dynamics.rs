//! Right-hand sides of the sliding-manifold ZGS update laws.
//!
//! Every agent carries `x_i`, the accumulator `ζ_i` (so the sliding
//! variable is `s_i = ∇f_i(x_i, t) + ζ_i`), and for the smoothed
//! time-varying law a boundary-layer width `ε_i`. The RHS of agent `i`
//! reads its neighbours immutably and returns `(ẋ_i, ζ̇_i, ε̇_i)`.
//!
//! All variants share the reach term
//! `r_i = exp(‖s_i‖^{2p}) sig^{1-2p}(s_i) / (2pηT_m)` and (except the
//! free-will law) the consensus term
//! `u_i = 2c/(p(1-η)T_m) Σ_j exp((a_ij‖x_i-x_j‖²)^p) a_ij^{1-p} sig^{1-2p}(x_i-x_j)`.
//! The pairwise consensus contributions are odd in `x_i - x_j`, so
//! `Σ_i ζ̇_i = 0` and `Σ_i ∇f_i = Σ_i s_i` holds along every run.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::costs::{ConvexityConstants, CostFunction};
use crate::error::{Error, Result};
use crate::graph::Topology;

// Signum calculus.

/// Componentwise `|z|^α sgn(z)`, zero at zero.
pub fn sig_alpha(z: &DVector<f64>, alpha: f64) -> DVector<f64> {
    sig_alpha_dz(z, alpha, 0.0)
}

/// [`sig_alpha`] with components of magnitude `<= deadzone` mapped to zero.
pub fn sig_alpha_dz(z: &DVector<f64>, alpha: f64, deadzone: f64) -> DVector<f64> {
    z.map(|v| {
        if v.abs() <= deadzone || v == 0.0 {
            0.0
        } else {
            v.abs().powf(alpha) * v.signum()
        }
    })
}

/// Componentwise sign, zero at zero.
pub fn sgn(z: &DVector<f64>) -> DVector<f64> {
    sgn_dz(z, 0.0)
}

pub fn sgn_dz(z: &DVector<f64>, deadzone: f64) -> DVector<f64> {
    z.map(|v| {
        if v.abs() <= deadzone || v == 0.0 {
            0.0
        } else {
            v.signum()
        }
    })
}

/// Norm-normalized signum `z / ‖z‖`, zero at zero.
pub fn sgn_norm(z: &DVector<f64>) -> DVector<f64> {
    sgn_norm_dz(z, 0.0)
}

pub fn sgn_norm_dz(z: &DVector<f64>, deadzone: f64) -> DVector<f64> {
    let n = z.norm();
    if n <= deadzone || n == 0.0 {
        DVector::zeros(z.len())
    } else {
        z / n
    }
}

/// `‖z‖^α z / ‖z‖`, zero at zero.
pub fn sig_norm(z: &DVector<f64>, alpha: f64) -> DVector<f64> {
    sig_norm_dz(z, alpha, 0.0)
}

pub fn sig_norm_dz(z: &DVector<f64>, alpha: f64, deadzone: f64) -> DVector<f64> {
    let n = z.norm();
    if n <= deadzone || n == 0.0 {
        DVector::zeros(z.len())
    } else {
        z * (n.powf(alpha) / n)
    }
}

/// Boundary-layer replacement for `sgn_norm`: `z / (‖z‖ + ε)`.
pub fn sgn_norm_smooth(z: &DVector<f64>, epsilon: f64, deadzone: f64) -> DVector<f64> {
    let n = z.norm();
    if n <= deadzone || n == 0.0 {
        DVector::zeros(z.len())
    } else {
        z / (n + epsilon)
    }
}

/// Power-sum inequality for nonnegative `z`: returns `(Σ z_i^p, bound)` where
/// the bound is `(Σ z_i)^p` for `0 < p <= 1` and `n^{1-p} (Σ z_i)^p` for `p > 1`.
pub fn power_sum_bound(z: &[f64], p: f64) -> (f64, f64) {
    let lhs: f64 = z.iter().map(|v| v.powf(p)).sum();
    let total: f64 = z.iter().sum();
    let rhs = if p <= 1.0 {
        total.powf(p)
    } else {
        (z.len() as f64).powf(1.0 - p) * total.powf(p)
    };
    (lhs, rhs)
}

// Parameters and state.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Static costs, predefined-time reach + consensus.
    ZgsStatic,
    /// Arbitrary-time law with `k/(T - t)` gains.
    Freewill,
    /// Static law plus `k sgn(s)` compensation of an additive disturbance.
    Disturbance,
    /// Time-varying costs with gradient prediction and a non-smooth consensus term.
    TimeVarying,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::ZgsStatic => "zgs_static",
            Variant::Freewill => "freewill",
            Variant::Disturbance => "disturbance",
            Variant::TimeVarying => "time_varying",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub variant: Variant,
    pub eta: f64,
    pub p: f64,
    pub t_m: f64,
    pub c: f64,
    /// Gain of the non-smooth consensus term (time-varying law).
    pub mu: f64,
    /// Disturbance compensation gain, or the reach gain of the free-will law.
    pub k: f64,
    /// Upper clamp on every exponential's argument.
    pub exp_clamp: f64,
    /// Radius below which the non-Lipschitz signum terms output zero.
    pub deadzone: f64,
    pub boundary_layer: bool,
    /// Initial boundary-layer width.
    pub epsilon0: f64,
    /// Floor on the free-will denominators `ηT_m - t` and `(1-η)T_m - t`.
    pub gain_floor: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams {
            variant: Variant::ZgsStatic,
            eta: 0.4,
            p: 0.3,
            t_m: 2.0,
            c: 3.0,
            mu: 0.0,
            k: 0.0,
            exp_clamp: 50.0,
            deadzone: 1e-9,
            boundary_layer: false,
            epsilon0: 1.0,
            gain_floor: 1e-2,
        }
    }
}

impl AlgorithmParams {
    /// Hard range checks; gain bounds are handled by [`validate_params`].
    pub fn check_ranges(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta = {} must lie in (0, 1)", self.eta));
        }
        if self.variant != Variant::Freewill && !(self.p > 0.0 && self.p < 0.5) {
            return bad(format!(
                "p = {} must lie in (0, 1/2) for predefined-time convergence",
                self.p
            ));
        }
        if !(self.t_m > 0.0 && self.t_m.is_finite()) {
            return bad(format!("T_m = {} must be positive", self.t_m));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c = {} must be positive", self.c));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu = {} must be nonnegative", self.mu));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return bad(format!("k = {} must be nonnegative", self.k));
        }
        if self.variant == Variant::Freewill && self.k < 1.0 {
            return bad(format!("free-will law needs k >= 1, got {}", self.k));
        }
        if !(self.exp_clamp > 0.0) {
            return bad(format!("exp_clamp = {} must be positive", self.exp_clamp));
        }
        if !(self.deadzone >= 0.0) {
            return bad(format!("deadzone = {} must be nonnegative", self.deadzone));
        }
        if self.boundary_layer && !(self.epsilon0 > 0.0) {
            return bad(format!(
                "boundary layer needs epsilon0 > 0, got {}",
                self.epsilon0
            ));
        }
        if !(self.gain_floor > 0.0) {
            return bad(format!("gain_floor = {} must be positive", self.gain_floor));
        }
        Ok(())
    }

    /// `1 / (2pηT_m)`.
    pub fn reach_gain(&self) -> f64 {
        1.0 / (2.0 * self.p * self.eta * self.t_m)
    }

    /// `2c / (p(1-η)T_m)`.
    pub fn consensus_gain(&self) -> f64 {
        2.0 * self.c / (self.p * (1.0 - self.eta) * self.t_m)
    }

    /// End of the reach phase, `ηT_m`.
    pub fn reach_deadline(&self) -> f64 {
        self.eta * self.t_m
    }

    #[inline]
    fn exp(&self, arg: f64) -> f64 {
        arg.min(self.exp_clamp).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: DVector<f64>,
    /// Integral of the consensus terms; `s = ∇f(x, t) + zeta`.
    pub zeta: DVector<f64>,
    pub epsilon: f64,
}

impl AgentState {
    pub fn new(x: DVector<f64>, epsilon: f64) -> Self {
        let n = x.len();
        AgentState {
            x,
            zeta: DVector::zeros(n),
            epsilon,
        }
    }

    pub fn sliding(&self, cost: &dyn CostFunction, t: f64) -> DVector<f64> {
        cost.gradient(&self.x, t) + &self.zeta
    }
}

type DisturbanceFn = Arc<dyn Fn(usize, f64) -> DVector<f64> + Send + Sync>;

/// Additive disturbance `d_i(t)` with `‖d_i(t)‖₁ <= bound`.
#[derive(Clone)]
pub struct Disturbance {
    signal: DisturbanceFn,
    bound: f64,
}

impl Disturbance {
    pub fn new(
        bound: f64,
        signal: impl Fn(usize, f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Disturbance {
            signal: Arc::new(signal),
            bound,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(0.0, move |_, _| DVector::zeros(dim))
    }

    pub fn eval(&self, agent: usize, t: f64) -> DVector<f64> {
        (self.signal)(agent, t)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

impl fmt::Debug for Disturbance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Disturbance")
            .field("bound", &self.bound)
            .finish()
    }
}

/// Time derivatives of one agent's state.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub xdot: DVector<f64>,
    pub zetadot: DVector<f64>,
    pub epsdot: f64,
}

// Building blocks.

fn solve_hessian(h: DMatrix<f64>, rhs: &DVector<f64>, agent: usize) -> Result<DVector<f64>> {
    let chol = h.cholesky().ok_or(Error::SingularHessian {
        agent,
        time: f64::NAN,
    })?;
    Ok(chol.solve(rhs))
}

/// `exp(‖s‖^{2p}) sig^{1-2p}(s) / (2pηT_m)`.
pub fn reach_term(s: &DVector<f64>, params: &AlgorithmParams) -> DVector<f64> {
    let gain = params.reach_gain() * params.exp(s.norm().powf(2.0 * params.p));
    sig_alpha_dz(s, 1.0 - 2.0 * params.p, params.deadzone) * gain
}

fn consensus_sum(
    i: usize,
    states: &[AgentState],
    topo: &Topology,
    params: &AlgorithmParams,
    odd_power: impl Fn(&DVector<f64>, f64, f64) -> DVector<f64>,
) -> DVector<f64> {
    let p = params.p;
    let mut u = DVector::zeros(states[i].x.len());
    for &(j, a) in topo.neighbors(i) {
        let d = &states[i].x - &states[j].x;
        let w = params.exp((a * d.norm_squared()).powf(p)) * a.powf(1.0 - p);
        u += odd_power(&d, 1.0 - 2.0 * p, params.deadzone) * w;
    }
    u * params.consensus_gain()
}

/// Consensus term with componentwise `sig^{1-2p}`.
pub fn consensus_term(
    i: usize,
    states: &[AgentState],
    topo: &Topology,
    params: &AlgorithmParams,
) -> DVector<f64> {
    consensus_sum(i, states, topo, params, sig_alpha_dz)
}

/// Consensus term with the norm-normalized `SIG^{1-2p}`.
pub fn consensus_term_norm(
    i: usize,
    states: &[AgentState],
    topo: &Topology,
    params: &AlgorithmParams,
) -> DVector<f64> {
    consensus_sum(i, states, topo, params, sig_norm_dz)
}

/// `μ Σ_j a_ij SGN(x_i - x_j)`, or its boundary-layer approximation.
pub fn signed_consensus_term(
    i: usize,
    states: &[AgentState],
    topo: &Topology,
    params: &AlgorithmParams,
) -> DVector<f64> {
    let mut v = DVector::zeros(states[i].x.len());
    for &(j, a) in topo.neighbors(i) {
        let d = &states[i].x - &states[j].x;
        let dir = if params.boundary_layer {
            sgn_norm_smooth(&d, states[i].epsilon, params.deadzone)
        } else {
            sgn_norm_dz(&d, params.deadzone)
        };
        v += dir * a;
    }
    v * params.mu
}

/// `ε̇ = -exp(ε^{2p}) sig^{1-2p}(ε) / (2pηT_m)`.
pub fn boundary_layer_rate(epsilon: f64, params: &AlgorithmParams) -> f64 {
    if epsilon.abs() <= params.deadzone || epsilon == 0.0 {
        return 0.0;
    }
    let mag = epsilon.abs();
    -params.reach_gain()
        * params.exp(mag.powf(2.0 * params.p))
        * mag.powf(1.0 - 2.0 * params.p)
        * epsilon.signum()
}

// Update laws.

/// Static predefined-time law.
pub fn zgs_rhs(
    i: usize,
    states: &[AgentState],
    cost: &dyn CostFunction,
    topo: &Topology,
    params: &AlgorithmParams,
) -> Result<Derivative> {
    let x = &states[i].x;
    let s = states[i].sliding(cost, 0.0);
    let u = consensus_term(i, states, topo, params);
    let drive = reach_term(&s, params) + &u;
    let xdot = -solve_hessian(cost.hessian(x, 0.0), &drive, i)?;
    Ok(Derivative {
        xdot,
        zetadot: u,
        epsdot: 0.0,
    })
}

/// `1 - exp(-v)` componentwise, with the exponent clamped.
fn one_minus_exp_neg(v: &DVector<f64>, params: &AlgorithmParams) -> DVector<f64> {
    v.map(|c| 1.0 - params.exp(-c))
}

fn freewill_chi(
    j: usize,
    states: &[AgentState],
    topo: &Topology,
    params: &AlgorithmParams,
) -> DVector<f64> {
    let mut v = DVector::zeros(states[j].x.len());
    for &(l, a) in topo.neighbors(j) {
        v += (&states[j].x - &states[l].x) * a;
    }
    one_minus_exp_neg(&v, params)
}

/// Arbitrary-time law with `k/(ηT_m - t)` and `c/((1-η)T_m - t)` gains.
///
/// Denominators are floored at `params.gain_floor`, so the gains freeze at
/// `k/δ` and `c/δ` once the deadlines are reached.
pub fn freewill_rhs(
    i: usize,
    states: &[AgentState],
    cost: &dyn CostFunction,
    topo: &Topology,
    params: &AlgorithmParams,
    t: f64,
) -> Result<Derivative> {
    let x = &states[i].x;
    let s = states[i].sliding(cost, t);
    let reach_gain = params.k / (params.eta * params.t_m - t).max(params.gain_floor);
    let cons_gain = params.c / ((1.0 - params.eta) * params.t_m - t).max(params.gain_floor);

    let chi_i = freewill_chi(i, states, topo, params);
    let mut u = DVector::zeros(x.len());
    for &(j, a) in topo.neighbors(i) {
        u += (&chi_i - freewill_chi(j, states, topo, params)) * a;
    }
    u *= cons_gain;
    let drive = one_minus_exp_neg(&s, params) * reach_gain + &u;
    let xdot = -solve_hessian(cost.hessian(x, t), &drive, i)?;
    Ok(Derivative {
        xdot,
        zetadot: u,
        epsdot: 0.0,
    })
}

/// Static law with `k sgn(s)` compensation; `d_i(t)` enters `ẋ` outside the Hessian inverse.
pub fn disturbance_rhs(
    i: usize,
    states: &[AgentState],
    cost: &dyn CostFunction,
    topo: &Topology,
    params: &AlgorithmParams,
    disturbance: &Disturbance,
    t: f64,
) -> Result<Derivative> {
    let x = &states[i].x;
    let s = states[i].sliding(cost, t);
    let u = consensus_term(i, states, topo, params);
    let drive = reach_term(&s, params) + sgn_dz(&s, params.deadzone) * params.k + &u;
    let xdot = -solve_hessian(cost.hessian(x, t), &drive, i)? + disturbance.eval(i, t);
    Ok(Derivative {
        xdot,
        zetadot: u,
        epsdot: 0.0,
    })
}

/// Time-varying law: norm-normalized consensus, `μ`-weighted `SGN` term and
/// gradient prediction `∂t∇f` (the prediction does not enter `ζ`).
pub fn timevarying_rhs(
    i: usize,
    states: &[AgentState],
    cost: &dyn CostFunction,
    topo: &Topology,
    params: &AlgorithmParams,
    t: f64,
) -> Result<Derivative> {
    let x = &states[i].x;
    let s = states[i].sliding(cost, t);
    let zetadot = consensus_term_norm(i, states, topo, params)
        + signed_consensus_term(i, states, topo, params);
    let drive = reach_term(&s, params) + &zetadot + cost.dgrad_dt(x, t);
    let xdot = -solve_hessian(cost.hessian(x, t), &drive, i)?;
    let epsdot = if params.boundary_layer {
        boundary_layer_rate(states[i].epsilon, params)
    } else {
        0.0
    };
    Ok(Derivative {
        xdot,
        zetadot,
        epsdot,
    })
}

/// Dispatch on `params.variant`.
pub fn agent_rhs(
    i: usize,
    states: &[AgentState],
    cost: &dyn CostFunction,
    topo: &Topology,
    params: &AlgorithmParams,
    disturbance: Option<&Disturbance>,
    t: f64,
) -> Result<Derivative> {
    match params.variant {
        Variant::ZgsStatic => zgs_rhs(i, states, cost, topo, params),
        Variant::Freewill => freewill_rhs(i, states, cost, topo, params, t),
        Variant::Disturbance => match disturbance {
            Some(d) => disturbance_rhs(i, states, cost, topo, params, d, t),
            None => disturbance_rhs(
                i,
                states,
                cost,
                topo,
                params,
                &Disturbance::zero(states[i].x.len()),
                t,
            ),
        },
        Variant::TimeVarying => timevarying_rhs(i, states, cost, topo, params, t),
    }
    .map_err(|e| e.at_time(t))
}

// Gain validation.

/// Margin applied to a sampled Lipschitz constant.
pub const LIPSCHITZ_SAFETY: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub rule: String,
    pub required: f64,
    pub actual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub variant: Variant,
    pub psi_min: f64,
    pub psi_bar: f64,
    /// `psi_bar` times the sampling margin used in the bounds.
    pub psi_bar_used: f64,
    pub omega: f64,
    pub hess_norm1: f64,
    pub lambda2_min: f64,
    pub a_min: f64,
    pub n_agents: usize,
    pub disturbance_bound: Option<f64>,
    pub checks: Vec<BoundCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// In strict mode, turn any failed gain bound into a [`Error::Parameter`].
    pub fn enforce(&self, strict: bool) -> Result<()> {
        if !strict {
            return Ok(());
        }
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| {
                format!(
                    "{} = {} violates {} (needs >= {:.6})",
                    c.name, c.actual, c.rule, c.required
                )
            })
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Parameter(failed.join("; ")))
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("variant = {}\n", self.variant));
        out.push_str(&format!("n_agents = {}\n", self.n_agents));
        out.push_str(&format!("psi_min = {:.6}\n", self.psi_min));
        out.push_str(&format!("psi_bar = {:.6}\n", self.psi_bar));
        out.push_str(&format!("psi_bar_used = {:.6}\n", self.psi_bar_used));
        out.push_str(&format!("omega = {:.6}\n", self.omega));
        out.push_str(&format!("hess_norm1 = {:.6}\n", self.hess_norm1));
        out.push_str(&format!("lambda2_min = {:.6}\n", self.lambda2_min));
        out.push_str(&format!("a_min = {:.6}\n", self.a_min));
        if let Some(d) = self.disturbance_bound {
            out.push_str(&format!("disturbance_bound = {d:.6}\n"));
        }
        for c in &self.checks {
            out.push_str(&format!(
                "bound {}: {} ; required >= {:.6}, actual = {:.6} [{}]\n",
                c.name,
                c.rule,
                c.required,
                c.actual,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Check the gain conditions of the selected variant.
///
/// Range violations (η, p, T_m, ...) are hard errors. Gain bounds are
/// recorded in the report; see [`ValidationReport::enforce`].
pub fn validate_params(
    params: &AlgorithmParams,
    constants: &ConvexityConstants,
    lambda2_min: f64,
    n_agents: usize,
    a_min: f64,
    disturbance_bound: Option<f64>,
) -> Result<ValidationReport> {
    params.check_ranges()?;
    if !(lambda2_min > 0.0) {
        return Err(Error::Connectivity(format!(
            "lambda2 = {lambda2_min} is not positive"
        )));
    }
    let margin = if constants.exact {
        1.0
    } else {
        LIPSCHITZ_SAFETY
    };
    let psi_bar_used = constants.psi_upper * margin;
    let mut checks = Vec::new();
    let mut push = |name: &str, rule: &str, required: f64, actual: f64| {
        checks.push(BoundCheck {
            name: name.into(),
            rule: rule.into(),
            required,
            actual,
            passed: actual >= required,
        });
    };

    match params.variant {
        Variant::Freewill => {
            push(
                "c",
                "c >= psi_bar / lambda2^2",
                psi_bar_used / (lambda2_min * lambda2_min),
                params.c,
            );
            push("k", "k >= 1", 1.0, params.k);
        }
        _ => push(
            "c",
            "c >= psi_bar / (4 lambda2)",
            psi_bar_used / (4.0 * lambda2_min),
            params.c,
        ),
    }
    if params.variant == Variant::Disturbance {
        let d = disturbance_bound.unwrap_or(0.0);
        push("k", "k >= H * D", constants.hess_norm1 * d, params.k);
    }
    if params.variant == Variant::TimeVarying {
        let required =
            2.0 * n_agents as f64 * constants.omega * psi_bar_used / (a_min * constants.psi);
        push(
            "mu",
            "mu >= 2 N omega psi_bar / (a_min psi_min)",
            required,
            params.mu,
        );
    }
    Ok(ValidationReport {
        variant: params.variant,
        psi_min: constants.psi,
        psi_bar: constants.psi_upper,
        psi_bar_used,
        omega: constants.omega,
        hess_norm1: constants.hess_norm1,
        lambda2_min,
        a_min,
        n_agents,
        disturbance_bound,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{DomainBox, MovingTarget, Quadratic, QuadraticTracking, SuiteA};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn sig_examples() {
        assert_eq!(
            sig_alpha(&dv(&[-1.0, 0.0, 1.0]), 0.4),
            dv(&[-1.0, 0.0, 1.0])
        );
        let r = sig_alpha(&dv(&[-32.0]), 0.4);
        assert!((r[0] + 4.0).abs() < 1e-12);
        // negative exponents still map zero to zero
        assert_eq!(sig_alpha(&dv(&[0.0, 0.0]), -0.2), dv(&[0.0, 0.0]));
    }

    #[test]
    fn normalized_signum_examples() {
        let s = sgn_norm(&dv(&[3.0, 4.0]));
        assert!((s[0] - 0.6).abs() < 1e-15 && (s[1] - 0.8).abs() < 1e-15);
        let g = 5f64.powf(0.4);
        let s = sig_norm(&dv(&[3.0, 4.0]), 0.4);
        assert!((s[0] - 0.6 * g).abs() < 1e-12 && (s[1] - 0.8 * g).abs() < 1e-12);
        assert!((s[0] - 1.1422).abs() < 1e-4 && (s[1] - 1.5229).abs() < 1e-4);
        assert_eq!(sgn_norm(&dv(&[0.0, 0.0])), dv(&[0.0, 0.0]));
        assert_eq!(sig_norm(&dv(&[0.0, 0.0]), 0.4), dv(&[0.0, 0.0]));
    }

    #[test]
    fn equilibrium_has_zero_derivative() {
        let topo = Topology::ring(4).unwrap();
        let f = Quadratic::centered(DMatrix::identity(2, 2) * 2.0, &dv(&[1.0, -1.0])).unwrap();
        let states: Vec<_> = (0..4)
            .map(|_| AgentState::new(dv(&[1.0, -1.0]), 0.0))
            .collect();
        let params = AlgorithmParams::default();
        for i in 0..4 {
            let d = zgs_rhs(i, &states, &f, &topo, &params).unwrap();
            assert_eq!(d.xdot, DVector::zeros(2));
            assert_eq!(d.zetadot, DVector::zeros(2));
        }
    }

    #[test]
    fn single_agent_reach_step() {
        // f(x) = x², x = 1: s = 2, H = 2
        let topo = Topology::from_edges(1, &[]).unwrap();
        let f = Quadratic::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1)).unwrap();
        let states = vec![AgentState::new(dv(&[1.0]), 0.0)];
        let params = AlgorithmParams {
            p: 0.3,
            eta: 0.4,
            t_m: 2.0,
            ..Default::default()
        };
        let d = zgs_rhs(0, &states, &f, &topo, &params).unwrap();
        let expected = -0.5 * (1.0 / (2.0 * 0.3 * 0.8)) * 2f64.powf(0.6).exp() * 2f64.powf(0.4);
        assert!((d.xdot[0] - expected).abs() < 1e-12);
        assert!((d.xdot[0] + 6.2576).abs() < 1e-4);
    }

    #[test]
    fn symmetric_pair_moves_antisymmetrically() {
        let topo = Topology::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let f = Quadratic::new(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2)).unwrap();
        let states = vec![
            AgentState::new(dv(&[0.7, -1.2]), 0.0),
            AgentState::new(dv(&[-0.7, 1.2]), 0.0),
        ];
        let params = AlgorithmParams::default();
        let a = zgs_rhs(0, &states, &f, &topo, &params).unwrap();
        let b = zgs_rhs(1, &states, &f, &topo, &params).unwrap();
        assert!((a.xdot + b.xdot).amax() < 1e-12);
    }

    #[test]
    fn freewill_chi_vanishes_at_consensus() {
        let topo = Topology::ring(3).unwrap();
        let states: Vec<_> = (0..3)
            .map(|_| AgentState::new(dv(&[0.3, 0.3]), 0.0))
            .collect();
        let params = AlgorithmParams {
            variant: Variant::Freewill,
            k: 1.0,
            ..Default::default()
        };
        assert_eq!(freewill_chi(0, &states, &topo, &params), DVector::zeros(2));
        assert_eq!(one_minus_exp_neg(&dv(&[2f64.ln()]), &params)[0], 0.5);
    }

    #[test]
    fn freewill_gain_is_floored_at_the_deadline() {
        let topo = Topology::from_edges(1, &[]).unwrap();
        let f = Quadratic::new(DMatrix::identity(1, 1), DVector::zeros(1)).unwrap();
        let states = vec![AgentState::new(dv(&[1.0]), 0.0)];
        let params = AlgorithmParams {
            variant: Variant::Freewill,
            k: 1.0,
            gain_floor: 1e-2,
            ..Default::default()
        };
        let deadline = params.reach_deadline();
        let at = freewill_rhs(0, &states, &f, &topo, &params, deadline).unwrap();
        let past = freewill_rhs(0, &states, &f, &topo, &params, deadline + 5.0).unwrap();
        let expected = -(1.0 - (-1f64).exp()) * 1.0 / 1e-2;
        assert!(at.xdot[0].is_finite());
        assert!((at.xdot[0] - expected).abs() < 1e-9);
        assert_eq!(at.xdot, past.xdot);
    }

    #[test]
    fn disturbance_law_reduces_to_static_law() {
        let topo = Topology::ring(6).unwrap();
        let states: Vec<_> = (0..6)
            .map(|i| AgentState::new(dv(&[i as f64 - 2.0, 0.5 * i as f64]), 0.0))
            .collect();
        let params = AlgorithmParams::default();
        let dparams = AlgorithmParams {
            variant: Variant::Disturbance,
            k: 0.0,
            ..params.clone()
        };
        for i in 0..6 {
            let f = SuiteA::from_index(i).unwrap();
            let a = zgs_rhs(i, &states, &f, &topo, &params).unwrap();
            let b = disturbance_rhs(i, &states, &f, &topo, &dparams, &Disturbance::zero(2), 0.0)
                .unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(sgn(&dv(&[0.0, 0.0])), dv(&[0.0, 0.0]));
    }

    #[test]
    fn prediction_term_recovers_target_velocity() {
        // all agents agree and s = 0: only the prediction term is left
        let target = MovingTarget::encirclement();
        let f = QuadraticTracking::new(target.clone());
        let topo = Topology::ring(4).unwrap();
        let t = 0.7;
        let x = target.position(t);
        let states: Vec<_> = (0..4).map(|_| AgentState::new(x.clone(), 0.0)).collect();
        let params = AlgorithmParams {
            variant: Variant::TimeVarying,
            mu: 44.0,
            ..Default::default()
        };
        let d = timevarying_rhs(0, &states, &f, &topo, &params, t).unwrap();
        assert!((d.xdot - target.velocity(t)).amax() < 1e-12);

        let still = QuadraticTracking::new(MovingTarget::stationary(dv(&[1.0, 2.0])));
        let states: Vec<_> = (0..4)
            .map(|_| AgentState::new(dv(&[1.0, 2.0]), 0.0))
            .collect();
        let d = timevarying_rhs(2, &states, &still, &topo, &params, 3.0).unwrap();
        assert_eq!(d.xdot, DVector::zeros(2));
    }

    #[test]
    fn boundary_layer_width_vanishes_by_reach_deadline() {
        let params = AlgorithmParams {
            variant: Variant::TimeVarying,
            p: 0.3,
            eta: 0.5,
            t_m: 2.0,
            boundary_layer: true,
            ..Default::default()
        };
        // integrate the scalar width ODE with a fine Euler step
        let dt = 1e-5;
        let mut eps = 1.0;
        let mut t = 0.0;
        while eps > 1e-9 {
            eps = (eps + dt * boundary_layer_rate(eps, &params)).max(0.0);
            t += dt;
            assert!(t < 2.0);
        }
        assert!(t <= params.reach_deadline(), "zero crossing at {t}");
    }

    #[test]
    fn singular_hessian_is_reported() {
        let topo = Topology::from_edges(1, &[]).unwrap();
        let f = Quadratic::new(DMatrix::zeros(2, 2), DVector::zeros(2)).unwrap();
        let states = vec![AgentState::new(dv(&[1.0, 1.0]), 0.0)];
        let err = agent_rhs(
            0,
            &states,
            &f,
            &topo,
            &AlgorithmParams::default(),
            None,
            0.25,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularHessian { agent: 0, time } if time == 0.25));
    }

    fn exact_constants(psi: f64, psi_upper: f64, omega: f64, h: f64) -> ConvexityConstants {
        ConvexityConstants {
            psi,
            psi_upper,
            omega,
            hess_norm1: h,
            exact: true,
            domain: DomainBox::cube(2, -5.0, 5.0),
            grid: 41,
            time_samples: 1,
        }
    }

    #[test]
    fn encirclement_mu_bound() {
        let params = AlgorithmParams {
            variant: Variant::TimeVarying,
            eta: 0.5,
            mu: 44.0,
            ..Default::default()
        };
        let r = validate_params(
            &params,
            &exact_constants(2.0, 2.0, 5.0, 2.0),
            2.0,
            4,
            1.0,
            None,
        )
        .unwrap();
        let mu = r.checks.iter().find(|c| c.name == "mu").unwrap();
        assert!((mu.required - 40.0).abs() < 1e-12);
        assert!(r.passed());
    }

    #[test]
    fn disturbance_gain_bound() {
        let params = AlgorithmParams {
            variant: Variant::Disturbance,
            k: 2.5,
            ..Default::default()
        };
        let r = validate_params(
            &params,
            &exact_constants(2.0, 2.0, 0.0, 2.0),
            1.0,
            6,
            1.0,
            Some(1.0),
        )
        .unwrap();
        assert!(r.passed());
        let weak = AlgorithmParams { k: 1.5, ..params };
        let r = validate_params(
            &weak,
            &exact_constants(2.0, 2.0, 0.0, 2.0),
            1.0,
            6,
            1.0,
            Some(1.0),
        )
        .unwrap();
        assert!(!r.passed());
        assert!(matches!(r.enforce(true), Err(Error::Parameter(_))));
        assert!(r.enforce(false).is_ok());
    }

    #[test]
    fn out_of_range_p_is_rejected() {
        let params = AlgorithmParams {
            p: 0.6,
            ..Default::default()
        };
        let err = validate_params(
            &params,
            &exact_constants(1.0, 1.0, 0.0, 1.0),
            1.0,
            6,
            1.0,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn sampled_constants_get_a_margin() {
        let mut c = exact_constants(1.0, 4.0, 0.0, 4.0);
        c.exact = false;
        let r = validate_params(&AlgorithmParams::default(), &c, 1.0, 6, 1.0, None).unwrap();
        assert!((r.checks[0].required - 4.0 * LIPSCHITZ_SAFETY / 4.0).abs() < 1e-12);
    }
}
