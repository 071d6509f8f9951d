//! Forward-Euler integration of the agent network, built-in scenarios and
//! trajectory diagnostics.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::costs::{
    check_identical_hessians, estimate_constants, ConvexityConstants, Cost, DomainBox,
    MovingTarget, QuadraticTracking, SuiteA,
};
use crate::dynamics::{
    agent_rhs, validate_params, AgentState, AlgorithmParams, Derivative, Disturbance,
    ValidationReport, Variant,
};
use crate::error::{Error, Result};
use crate::graph::{spectrum, SwitchingSchedule, Topology};
use crate::oracle::{centralized_minimize, OracleSolution, TimeFn};

/// Agents evaluated in parallel at or above this network size.
const PARALLEL_AGENTS: usize = 32;

pub const STATIC_SETTLE_TOL: f64 = 1e-2;
pub const TRACKING_SETTLE_TOL: f64 = 5e-2;
pub const ZGS_TOL: f64 = 5e-3;

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub costs: Vec<Cost>,
    pub schedule: SwitchingSchedule,
    pub params: AlgorithmParams,
    pub x0: Vec<DVector<f64>>,
    pub t_end: f64,
    pub step: f64,
    pub disturbance: Option<Disturbance>,
    /// Known optimal trajectory; static runs fall back to the Newton oracle.
    pub reference: Option<TimeFn>,
    pub settle_tol: f64,
    pub zgs_tol: f64,
    /// Box and lattice used for the curvature constants.
    pub domain: DomainBox,
    pub grid: usize,
    pub seed: u64,
    /// Substitutions and guards worth flagging in run reports.
    pub notes: Vec<String>,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("n_agents", &self.costs.len())
            .field("params", &self.params)
            .field("t_end", &self.t_end)
            .field("step", &self.step)
            .field("disturbance", &self.disturbance)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.costs.len()
    }

    pub fn dim(&self) -> usize {
        self.costs.first().map_or(0, |c| c.dim())
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n_agents();
        if n == 0 {
            return Err(Error::Validation("scenario has no agents".into()));
        }
        if self.schedule.n_agents() != n {
            return Err(Error::Validation(format!(
                "{} costs but the topology has {} agents",
                n,
                self.schedule.n_agents()
            )));
        }
        if self.x0.len() != n {
            return Err(Error::Validation(format!(
                "{} initial states for {} agents",
                self.x0.len(),
                n
            )));
        }
        let dim = self.dim();
        if let Some(i) = (0..n).find(|&i| self.costs[i].dim() != dim || self.x0[i].len() != dim) {
            return Err(Error::Validation(format!(
                "agent {i} has inconsistent dimension"
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Validation(format!(
                "step = {} must be positive",
                self.step
            )));
        }
        if !(self.t_end >= self.params.t_m) {
            return Err(Error::Validation(format!(
                "t_end = {} must be at least T_m = {}",
                self.t_end, self.params.t_m
            )));
        }
        if !(self.settle_tol > 0.0 && self.zgs_tol > 0.0) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn time_varying(&self) -> bool {
        self.costs.iter().any(|c| c.time_varying())
    }

    fn constant_times(&self) -> Vec<f64> {
        if self.time_varying() {
            (0..=24).map(|k| self.t_end * k as f64 / 24.0).collect()
        } else {
            vec![0.0]
        }
    }

    /// Worst-case curvature constants over all agents.
    pub fn constants(&self) -> Result<ConvexityConstants> {
        let times = self.constant_times();
        let all = self
            .costs
            .iter()
            .map(|c| estimate_constants(c.as_ref(), &self.domain, self.grid, &times))
            .collect::<Result<Vec<_>>>()?;
        ConvexityConstants::aggregate(&all)
            .ok_or_else(|| Error::Validation("scenario has no agents".into()))
    }

    pub fn validation_report(&self) -> Result<ValidationReport> {
        self.check()?;
        if self.params.variant == Variant::TimeVarying {
            let points = self.domain.grid(5);
            check_identical_hessians(&self.costs, &points, &self.constant_times(), 1e-9)?;
        }
        validate_params(
            &self.params,
            &self.constants()?,
            self.schedule.lambda2_min(),
            self.n_agents(),
            self.schedule.min_weight(),
            self.disturbance.as_ref().map(|d| d.bound()),
        )
    }

    /// Change the step and re-derive the step-dependent free-will floor.
    pub fn set_step(&mut self, step: f64) -> Result<()> {
        self.step = step;
        self.refresh_guards()
    }

    /// Free-will gain floor: at least `10·step`, raised so that the frozen
    /// post-deadline consensus gain stays inside the Euler stability region.
    pub fn refresh_guards(&mut self) -> Result<()> {
        let mut floor = 10.0 * self.step;
        if self.params.variant == Variant::Freewill {
            let lambda_n = self
                .schedule
                .segments()
                .iter()
                .map(|s| spectrum(&s.topology).map(|sp| sp.lambda_n))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let psi = self.constants()?.psi;
            floor = floor.max(self.step * self.params.c * lambda_n * lambda_n / psi);
        }
        self.params.gain_floor = floor;
        Ok(())
    }

    /// Static runs: the Newton optimum of the summed costs.
    pub fn oracle(&self) -> Result<OracleSolution> {
        let n = self.n_agents() as f64;
        let mean = self
            .x0
            .iter()
            .fold(DVector::zeros(self.dim()), |acc, x| acc + x)
            / n;
        centralized_minimize(&self.costs, &mean, 0.0)
    }

    /// Optimal trajectory `t ↦ x*(t)`, if one can be computed.
    pub fn reference_fn(&self) -> Result<Option<TimeFn>> {
        if let Some(r) = &self.reference {
            return Ok(Some(r.clone()));
        }
        if self.time_varying() {
            return Ok(None);
        }
        let x = self.oracle()?.point();
        Ok(Some(Arc::new(move |_| x.clone())))
    }
}

/// Recorded run. Per-agent vectors are stored flat, `[time][agent][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_agents: usize,
    pub dim: usize,
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub sliding: Vec<f64>,
    pub grad_sum_norm: Vec<f64>,
    pub global_cost: Vec<f64>,
    pub consensus_err: Vec<f64>,
    /// `max_i ‖x_i(t_k) - x_i(t_{k-1})‖`, zero at `k = 0`.
    pub step_jump: Vec<f64>,
    /// `‖Σ_i ζ̇_i‖` of the derivatives evaluated at `t_k`.
    pub zeta_sum: Vec<f64>,
    /// `Σ_i ‖ζ̇_i‖` at `t_k`, the natural scale of `zeta_sum`.
    pub zeta_scale: Vec<f64>,
    /// Boundary-layer width of agent 0.
    pub epsilon: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n_agents: usize, dim: usize, step: f64, len: usize) -> Self {
        let block = n_agents * dim;
        Trajectory {
            n_agents,
            dim,
            step,
            times: Vec::with_capacity(len),
            states: Vec::with_capacity(len * block),
            sliding: Vec::with_capacity(len * block),
            grad_sum_norm: Vec::with_capacity(len),
            global_cost: Vec::with_capacity(len),
            consensus_err: Vec::with_capacity(len),
            step_jump: Vec::with_capacity(len),
            zeta_sum: Vec::with_capacity(len),
            zeta_scale: Vec::with_capacity(len),
            epsilon: Vec::with_capacity(len),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x(&self, k: usize, i: usize) -> DVector<f64> {
        let at = (k * self.n_agents + i) * self.dim;
        DVector::from_column_slice(&self.states[at..at + self.dim])
    }

    pub fn s(&self, k: usize, i: usize) -> DVector<f64> {
        let at = (k * self.n_agents + i) * self.dim;
        DVector::from_column_slice(&self.sliding[at..at + self.dim])
    }

    /// Index of the first recorded time `>= t` (clamped to the last sample).
    pub fn index_at(&self, t: f64) -> usize {
        let k = (t / self.step - 1e-9).ceil().max(0.0) as usize;
        k.min(self.len().saturating_sub(1))
    }

    pub fn mean_state(&self, k: usize) -> DVector<f64> {
        (0..self.n_agents).fold(DVector::zeros(self.dim), |acc, i| acc + self.x(k, i))
            / self.n_agents as f64
    }

    /// `max_i ‖x_i(t_k) - x_ref(t_k)‖` for every recorded time.
    pub fn distance_series(
        &self,
        reference: &(dyn Fn(f64) -> DVector<f64> + Send + Sync),
    ) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let r = reference(self.times[k]);
                (0..self.n_agents)
                    .map(|i| (self.x(k, i) - &r).norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn max_sliding_norm(&self, k: usize) -> f64 {
        (0..self.n_agents)
            .map(|i| self.s(k, i).norm())
            .fold(0.0, f64::max)
    }

    /// `V = Σ_i [f_i(x*) - f_i(x_i) - ∇f_i(x_i)ᵀ(x* - x_i)]` along the run (static costs).
    pub fn lyapunov(&self, costs: &[Cost], x_star: &DVector<f64>) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                costs
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let x = self.x(k, i);
                        f.value(x_star, 0.0)
                            - f.value(&x, 0.0)
                            - f.gradient(&x, 0.0).dot(&(x_star - &x))
                    })
                    .sum()
            })
            .collect()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for i in 0..self.n_agents {
            for c in 0..self.dim {
                h.push(format!("x{i}_{c}"));
            }
        }
        for i in 0..self.n_agents {
            h.push(format!("s{i}_norm"));
        }
        h.extend(["grad_sum_norm", "global_cost", "consensus_err"].map(String::from));
        h
    }

    /// CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        let block = self.n_agents * self.dim;
        let mut row = Vec::with_capacity(2 + block + self.n_agents + 3);
        for k in 0..self.len() {
            row.clear();
            row.push(fmt17(self.times[k]));
            row.extend(
                self.states[k * block..(k + 1) * block]
                    .iter()
                    .map(|&v| fmt17(v)),
            );
            row.extend((0..self.n_agents).map(|i| fmt17(self.s(k, i).norm())));
            row.push(fmt17(self.grad_sum_norm[k]));
            row.push(fmt17(self.global_cost[k]));
            row.push(fmt17(self.consensus_err[k]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn initial_states(sc: &Scenario) -> Vec<AgentState> {
    let eps0 = if sc.params.boundary_layer {
        sc.params.epsilon0
    } else {
        0.0
    };
    sc.x0
        .iter()
        .map(|x| AgentState::new(x.clone(), eps0))
        .collect()
}

fn record(
    traj: &mut Trajectory,
    sc: &Scenario,
    states: &[AgentState],
    t: f64,
    prev: Option<&[AgentState]>,
) {
    let dim = traj.dim;
    let mut grad_sum = DVector::zeros(dim);
    let mut cost = 0.0;
    for (f, st) in sc.costs.iter().zip(states) {
        let g = f.gradient(&st.x, t);
        traj.states.extend_from_slice(st.x.as_slice());
        traj.sliding.extend_from_slice((&g + &st.zeta).as_slice());
        grad_sum += g;
        cost += f.value(&st.x, t);
    }
    let mut spread: f64 = 0.0;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            spread = spread.max((&states[i].x - &states[j].x).norm());
        }
    }
    let jump = prev.map_or(0.0, |p| {
        p.iter()
            .zip(states)
            .map(|(a, b)| (&b.x - &a.x).norm())
            .fold(0.0, f64::max)
    });
    traj.times.push(t);
    traj.grad_sum_norm.push(grad_sum.norm());
    traj.global_cost.push(cost);
    traj.consensus_err.push(spread);
    traj.step_jump.push(jump);
    traj.epsilon.push(states[0].epsilon);
}

fn derivatives(
    sc: &Scenario,
    states: &[AgentState],
    topo: &Topology,
    t: f64,
) -> Result<Vec<Derivative>> {
    let eval = |i: usize| {
        agent_rhs(
            i,
            states,
            sc.costs[i].as_ref(),
            topo,
            &sc.params,
            sc.disturbance.as_ref(),
            t,
        )
    };
    if states.len() >= PARALLEL_AGENTS {
        (0..states.len()).into_par_iter().map(eval).collect()
    } else {
        (0..states.len()).map(eval).collect()
    }
}

/// Fixed-step forward Euler with simultaneous updates of `x`, `ζ` and `ε`.
pub fn simulate(sc: &Scenario) -> Result<Trajectory> {
    sc.check()?;
    let steps = (sc.t_end / sc.step).round() as usize;
    let mut traj = Trajectory::with_capacity(sc.n_agents(), sc.dim(), sc.step, steps + 1);
    let mut states = initial_states(sc);
    let mut prev: Option<Vec<AgentState>> = None;

    for k in 0..=steps {
        let t = k as f64 * sc.step;
        record(&mut traj, sc, &states, t, prev.as_deref());
        let derivs = derivatives(sc, &states, sc.schedule.topology_at(t), t)?;
        let zsum = derivs
            .iter()
            .fold(DVector::zeros(sc.dim()), |acc, d| acc + &d.zetadot);
        traj.zeta_sum.push(zsum.norm());
        traj.zeta_scale
            .push(derivs.iter().map(|d| d.zetadot.norm()).sum());
        if k == steps {
            break;
        }
        let mut next = states.clone();
        for (i, (st, d)) in next.iter_mut().zip(&derivs).enumerate() {
            st.x += &d.xdot * sc.step;
            st.zeta += &d.zetadot * sc.step;
            st.epsilon = (st.epsilon + d.epsdot * sc.step).max(0.0);
            if !st.x.iter().chain(st.zeta.iter()).all(|v| v.is_finite()) {
                return Err(Error::Divergence {
                    agent: i,
                    time: t + sc.step,
                });
            }
        }
        prev = Some(std::mem::replace(&mut states, next));
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub variant: Variant,
    pub n_agents: usize,
    pub step: f64,
    pub t_end: f64,
    pub t_m: f64,
    pub settle_tol: f64,
    pub zgs_tol: f64,
    /// First time after which every agent stays within `settle_tol` of the reference.
    pub settle_time: Option<f64>,
    /// First time after which `‖Σ∇f_i‖` stays within `zgs_tol`.
    pub zgs_time: Option<f64>,
    pub within_tm: bool,
    /// Largest single-step state change of any agent.
    pub max_step_diag: f64,
    /// Largest single-step state change after `T_m`.
    pub max_step_after_tm: f64,
    pub final_max_error: Option<f64>,
    pub max_error_after_tm: Option<f64>,
    pub final_consensus_err: f64,
    pub final_grad_sum_norm: f64,
    pub max_sliding_at_reach_deadline: f64,
    pub max_zeta_sum: f64,
    pub oracle: Option<OracleSolution>,
    pub mean_point: Vec<f64>,
    pub notes: Vec<String>,
}

/// First index `k` such that `series[k..]` all satisfy `ok`.
fn first_settled(series: &[f64], tol: f64) -> Option<usize> {
    let mut k = series.len();
    while k > 0 && series[k - 1] <= tol {
        k -= 1;
    }
    (k < series.len()).then_some(k)
}

pub fn summarize(
    sc: &Scenario,
    traj: &Trajectory,
    reference: Option<&TimeFn>,
    oracle: Option<OracleSolution>,
) -> RunSummary {
    let t_m = sc.params.t_m;
    let k_tm = traj.index_at(t_m);
    let dist = reference.map(|r| traj.distance_series(r.as_ref()));
    let settle_time = dist
        .as_ref()
        .and_then(|d| first_settled(d, sc.settle_tol))
        .map(|k| traj.times[k]);
    let zgs_time = first_settled(&traj.grad_sum_norm, sc.zgs_tol).map(|k| traj.times[k]);
    let last = traj.len() - 1;
    let fold_max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    RunSummary {
        scenario: sc.name.clone(),
        variant: sc.params.variant,
        n_agents: sc.n_agents(),
        step: sc.step,
        t_end: sc.t_end,
        t_m,
        settle_tol: sc.settle_tol,
        zgs_tol: sc.zgs_tol,
        settle_time,
        zgs_time,
        within_tm: settle_time.is_some_and(|t| t <= t_m + 1e-12),
        max_step_diag: fold_max(&traj.step_jump),
        max_step_after_tm: fold_max(&traj.step_jump[(k_tm + 1).min(last)..]),
        final_max_error: dist.as_ref().map(|d| d[last]),
        max_error_after_tm: dist.as_ref().map(|d| fold_max(&d[k_tm..])),
        final_consensus_err: traj.consensus_err[last],
        final_grad_sum_norm: traj.grad_sum_norm[last],
        max_sliding_at_reach_deadline: traj
            .max_sliding_norm(traj.index_at(sc.params.reach_deadline())),
        max_zeta_sum: fold_max(&traj.zeta_sum),
        oracle,
        mean_point: traj.mean_state(last).as_slice().to_vec(),
        notes: sc.notes.clone(),
    }
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.6}"));
        let mut out = String::new();
        out.push_str(&format!("scenario = {}\n", self.scenario));
        out.push_str(&format!("variant = {}\n", self.variant));
        out.push_str(&format!("n_agents = {}\n", self.n_agents));
        out.push_str(&format!("step = {:e}\n", self.step));
        out.push_str(&format!("t_end = {}\n", self.t_end));
        out.push_str(&format!("t_m = {}\n", self.t_m));
        out.push_str(&format!("settle_tol = {:e}\n", self.settle_tol));
        out.push_str(&format!("zgs_tol = {:e}\n", self.zgs_tol));
        out.push_str(&format!("settle_time = {}\n", opt(self.settle_time)));
        out.push_str(&format!("zgs_time = {}\n", opt(self.zgs_time)));
        out.push_str(&format!("within_tm = {}\n", self.within_tm));
        out.push_str(&format!("max_step_diag = {:.6e}\n", self.max_step_diag));
        out.push_str(&format!(
            "max_step_after_tm = {:.6e}\n",
            self.max_step_after_tm
        ));
        out.push_str(&format!(
            "final_max_error = {}\n",
            opt(self.final_max_error)
        ));
        out.push_str(&format!(
            "max_error_after_tm = {}\n",
            opt(self.max_error_after_tm)
        ));
        out.push_str(&format!(
            "final_consensus_err = {:.6e}\n",
            self.final_consensus_err
        ));
        out.push_str(&format!(
            "final_grad_sum_norm = {:.6e}\n",
            self.final_grad_sum_norm
        ));
        out.push_str(&format!(
            "max_sliding_at_reach_deadline = {:.6e}\n",
            self.max_sliding_at_reach_deadline
        ));
        out.push_str(&format!("max_zeta_sum = {:.6e}\n", self.max_zeta_sum));
        if let Some(o) = &self.oracle {
            out.push_str(&format!("oracle_x_star = {:?}\n", o.x_star));
            out.push_str(&format!("oracle_residual = {:.3e}\n", o.residual));
        }
        out.push_str(&format!("mean_point = {:?}\n", self.mean_point));
        for n in &self.notes {
            out.push_str(&format!("note = {n}\n"));
        }
        out
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ValidationReport,
    pub trajectory: Trajectory,
    pub summary: RunSummary,
}

/// Validate, simulate and compare against the oracle.
pub fn run(sc: &Scenario, strict: bool) -> Result<RunOutput> {
    let report = sc.validation_report()?;
    report.enforce(strict)?;
    let trajectory = simulate(sc)?;
    let oracle = if sc.time_varying() {
        None
    } else {
        Some(sc.oracle()?)
    };
    let reference = sc.reference_fn()?;
    let summary = summarize(sc, &trajectory, reference.as_ref(), oracle);
    Ok(RunOutput {
        report,
        trajectory,
        summary,
    })
}

// Built-in scenarios.

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn suite_a_costs(n_agents: usize) -> Vec<Cost> {
    let per = n_agents / 6;
    (0..n_agents)
        .map(|j| Arc::new(SuiteA::ALL[(j / per).min(5)]) as Cost)
        .collect()
}

fn numerical_a_x0() -> Vec<DVector<f64>> {
    let x1 = [-2.0, -1.0, 1.0, 2.0, 3.0, 4.0];
    let x2 = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
    x1.iter().zip(x2).map(|(&a, b)| dv(&[a, b])).collect()
}

/// Second six-node cycle 0-2-4-1-3-5-0 used as the switching partner of the ring.
pub fn permuted_cycle6() -> Result<Topology> {
    let order = [0, 2, 4, 1, 3, 5];
    let edges: Vec<_> = (0..6)
        .map(|k| (order[k], order[(k + 1) % 6], 1.0))
        .collect();
    Topology::from_edges(6, &edges)
}

/// Six agents with the benchmark costs on a given topology.
pub fn scenario_numerical_a_on(topology: Topology, label: &str) -> Result<Scenario> {
    let mut sc = Scenario {
        name: "numerical_A".into(),
        description: format!("6 agents, benchmark suite A, {label}"),
        costs: suite_a_costs(6),
        schedule: SwitchingSchedule::fixed(topology)?,
        params: AlgorithmParams {
            variant: Variant::ZgsStatic,
            eta: 0.4,
            p: 0.3,
            t_m: 2.0,
            c: 3.0,
            ..Default::default()
        },
        x0: numerical_a_x0(),
        t_end: 2.5,
        step: 1e-3,
        disturbance: None,
        reference: None,
        settle_tol: STATIC_SETTLE_TOL,
        zgs_tol: ZGS_TOL,
        domain: DomainBox::cube(2, -5.0, 5.0),
        grid: 41,
        seed: 0,
        notes: vec![format!("topology: {label}")],
    };
    sc.refresh_guards()?;
    Ok(sc)
}

pub fn scenario_numerical_a() -> Result<Scenario> {
    scenario_numerical_a_on(Topology::ring(6)?, "ring C6")
}

/// Ring C6 alternating with the permuted cycle every 0.5 s.
pub fn scenario_switching() -> Result<Scenario> {
    let mut sc = scenario_numerical_a()?;
    sc.name = "switching".into();
    sc.description =
        "6 agents, benchmark suite A, ring C6 and cycle 0-2-4-1-3-5 alternating every 0.5 s".into();
    sc.schedule =
        SwitchingSchedule::periodic(&[Topology::ring(6)?, permuted_cycle6()?], 0.5, sc.t_end)?;
    sc.notes = vec!["topology: two 6-cycles with lambda2 = 1 alternating every 0.5 s".into()];
    Ok(sc)
}

/// Arbitrary-time law on the six-agent benchmark.
pub fn scenario_freewill() -> Result<Scenario> {
    let mut sc = scenario_numerical_a()?;
    sc.name = "freewill".into();
    sc.description = "6 agents, benchmark suite A, ring C6, arbitrary-time law".into();
    sc.params.variant = Variant::Freewill;
    sc.params.c = 5.0;
    // with k = 1 a large s only decays logarithmically and misses ηT_m
    sc.params.k = 5.0;
    sc.set_step(1e-4)?;
    sc.notes.push(format!(
        "gain denominators floored at {:.4} s; gains frozen past each deadline",
        sc.params.gain_floor
    ));
    Ok(sc)
}

/// `d_i(t) = 0.4 (sin(3t + i), cos(2t + i))` for agents `i = 1..N`.
pub fn benchmark_disturbance() -> Disturbance {
    Disturbance::new(0.8, |i, t| {
        let phase = (i + 1) as f64;
        dv(&[0.4 * (3.0 * t + phase).sin(), 0.4 * (2.0 * t + phase).cos()])
    })
}

/// Disturbed benchmark with `k = 1.05 H D`.
pub fn scenario_disturbance() -> Result<Scenario> {
    let mut sc = scenario_numerical_a()?;
    sc.name = "disturbance".into();
    sc.description =
        "6 agents, benchmark suite A, ring C6, additive disturbance with sgn compensation".into();
    sc.params.variant = Variant::Disturbance;
    let d = benchmark_disturbance();
    sc.params.k = 1.05 * sc.constants()?.hess_norm1 * d.bound();
    sc.disturbance = Some(d);
    sc.settle_tol = 2e-2;
    Ok(sc)
}

/// Sixty agents, ten copies of each benchmark cost, on a seeded random graph.
pub fn scenario_scale_60(seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topology = Topology::random_connected_with(60, 0.1, &mut rng)?;
    let x0 = (0..60)
        .map(|_| dv(&[rng.random_range(-5.0..=5.0), rng.random_range(-5.0..=5.0)]))
        .collect();
    let mut sc = scenario_numerical_a()?;
    sc.name = "scale_60".into();
    sc.description =
        format!("60 agents, suite A tiled 10x, Erdos-Renyi p = 0.1 graph (seed {seed})");
    sc.costs = suite_a_costs(60);
    sc.schedule = SwitchingSchedule::fixed(topology)?;
    sc.x0 = x0;
    sc.seed = seed;
    sc.set_step(2.5e-4)?;
    sc.settle_tol = 2e-2;
    sc.notes = vec![
        format!("topology: connected Erdos-Renyi graph, p = 0.1, seed {seed}"),
        "step 2.5e-4: at 1e-3 Euler is unstable at the densest nodes".into(),
    ];
    Ok(sc)
}

pub const ENCIRCLEMENT_BIASES: [[f64; 2]; 4] = [[1.0, 1.0], [-1.0, -1.0], [0.5, 0.5], [-0.3, -0.3]];

/// Four robots tracking a moving source through biased observations.
pub fn scenario_encirclement(boundary_layer: bool) -> Result<Scenario> {
    let n = 4;
    let target = MovingTarget::encirclement();
    let costs: Vec<Cost> = ENCIRCLEMENT_BIASES
        .iter()
        .map(|b| Arc::new(QuadraticTracking::new(target.offset(&dv(b)))) as Cost)
        .collect();
    let p0 = [[0.0, 0.0], [0.0, -1.0], [-1.0, 0.0], [0.0, 1.0]];
    let x0 = (0..n)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * (i + 1) as f64 / n as f64;
            dv(&p0[i]) - dv(&[2.0 * angle.cos(), 2.0 * angle.sin()])
        })
        .collect();
    let biases: Vec<_> = ENCIRCLEMENT_BIASES.iter().map(|b| dv(b)).collect();
    let path = target.clone();
    let reference = crate::oracle::tracking_reference(&biases, Arc::new(move |t| path.position(t)));
    let mut sc = Scenario {
        name: "encirclement".into(),
        description:
            "4 robots, ring C4, moving source (2 sin t + 0.5 t, t) with biased observations".into(),
        costs,
        schedule: SwitchingSchedule::fixed(Topology::ring(n)?)?,
        params: AlgorithmParams {
            variant: Variant::TimeVarying,
            eta: 0.5,
            p: 0.3,
            t_m: 2.0,
            c: 3.0,
            mu: 44.0,
            boundary_layer,
            epsilon0: 1.0,
            ..Default::default()
        },
        x0,
        t_end: 6.0,
        step: 1e-3,
        disturbance: None,
        reference: Some(reference),
        settle_tol: TRACKING_SETTLE_TOL,
        zgs_tol: ZGS_TOL,
        domain: DomainBox::cube(2, -5.0, 5.0),
        grid: 41,
        seed: 0,
        notes: vec!["topology: ring C4".into()],
    };
    sc.refresh_guards()?;
    Ok(sc)
}

/// Names accepted by [`builtin`], with one-line descriptions.
pub const BUILTIN_SCENARIOS: [(&str, &str); 6] = [
    ("numerical_A", "6 agents, suite A, ring C6, static law"),
    ("switching", "numerical_A with two alternating 6-cycles"),
    ("freewill", "numerical_A with the arbitrary-time law"),
    (
        "disturbance",
        "numerical_A with an additive disturbance and sgn compensation",
    ),
    ("scale_60", "60 agents on a seeded random connected graph"),
    (
        "encirclement",
        "4 robots tracking a moving source (time-varying law)",
    ),
];

pub fn builtin(name: &str, seed: u64) -> Result<Scenario> {
    match name {
        "numerical_A" => scenario_numerical_a(),
        "switching" => scenario_switching(),
        "freewill" => scenario_freewill(),
        "disturbance" => scenario_disturbance(),
        "scale_60" => scenario_scale_60(seed),
        "encirclement" => scenario_encirclement(false),
        other => Err(Error::Config(format!(
            "unknown scenario '{other}'; expected one of {}",
            BUILTIN_SCENARIOS.map(|(n, _)| n).join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostFunction;

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let mut sc = scenario_numerical_a().unwrap();
        let x_star = sc.oracle().unwrap().point();
        // identical costs centred at the common start, so s(0) = 0
        let q = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let f: Cost = Arc::new(crate::costs::Quadratic::centered(q, &x_star).unwrap());
        sc.costs = vec![f; 6];
        sc.x0 = vec![x_star.clone(); 6];
        sc.t_end = 2.0;
        let traj = simulate(&sc).unwrap();
        assert!(traj.states.chunks(2).all(|c| c == x_star.as_slice()));
        assert!(traj.grad_sum_norm.iter().all(|&g| g == 0.0));
        assert!(traj.consensus_err.iter().all(|&e| e == 0.0));
        assert!(traj.global_cost.iter().all(|&c| c == traj.global_cost[0]));
    }

    #[test]
    fn series_share_length_and_spacing() {
        let mut sc = scenario_numerical_a().unwrap();
        sc.t_end = 2.0;
        sc.step = 1e-2;
        let traj = simulate(&sc).unwrap();
        assert_eq!(traj.len(), 201);
        for v in [
            &traj.grad_sum_norm,
            &traj.global_cost,
            &traj.consensus_err,
            &traj.step_jump,
            &traj.zeta_sum,
        ] {
            assert_eq!(v.len(), traj.len());
        }
        assert_eq!(traj.states.len(), 201 * 12);
        assert_eq!(traj.times[0], 0.0);
        assert!((traj.times[200] - 2.0).abs() < 1e-12);
        assert_eq!(traj.index_at(0.8), 80);
    }

    #[test]
    fn sliding_starts_at_gradient() {
        let mut sc = scenario_numerical_a().unwrap();
        sc.t_end = 2.0;
        sc.step = 0.1;
        let traj = simulate(&sc).unwrap();
        for i in 0..6 {
            assert_eq!(traj.s(0, i), sc.costs[i].gradient(&sc.x0[i], 0.0));
        }
    }

    #[test]
    fn settling_index() {
        assert_eq!(first_settled(&[1.0, 0.5, 0.1, 0.2, 0.05], 0.3), Some(2));
        assert_eq!(first_settled(&[1.0, 0.5], 0.3), None);
        assert_eq!(first_settled(&[0.0, 0.0], 0.3), Some(0));
    }

    #[test]
    fn csv_layout() {
        let mut sc = scenario_numerical_a().unwrap();
        sc.step = 0.25;
        let traj = simulate(&sc).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,x0_0,x0_1,x1_0"));
        assert!(header.ends_with("s5_norm,grad_sum_norm,global_cost,consensus_err"));
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(first.len(), 1 + 12 + 6 + 3);
        assert_eq!(first[1], -2.0);
        assert_eq!(lines.count(), traj.len() - 1);
    }

    #[test]
    fn scale_60_tiles_the_benchmark() {
        let sc = scenario_scale_60(1).unwrap();
        assert_eq!(sc.n_agents(), 60);
        assert_eq!(sc.costs[0].name(), sc.costs[9].name());
        assert_eq!(sc.costs[10].name(), SuiteA::F2.name());
        assert_eq!(sc.costs[59].name(), SuiteA::F6.name());
        assert!(sc.x0.iter().all(|x| x.amax() <= 5.0));
    }

    #[test]
    fn unknown_scenario_is_a_config_error() {
        assert!(matches!(builtin("nope", 0), Err(Error::Config(_))));
    }
}
