//! Coefficient identification: recover `u` and `σ` of the nonlinear problem
//! from point observations of `u`.
//!
//! Training runs in three steps: fit the state network to the data, fit the
//! coefficient network to the residual with the state frozen, then train
//! both on `misfit + α Σ|r|` for an increasing sequence of `α`.

use std::ops::ControlFlow;
use std::time::Instant;

use super::optim::{optimize, OptimizerOptions};
use super::TrainError;
use crate::fespace::{Discretization, InterpolationNodes};
use crate::geometry::LevelSet;
use crate::linalg::dot;
use crate::nn::{sign, Mlp};
use crate::weakforms::{error_norms, Assembler, Coefficient, ErrorNorms, NitscheParams, ProblemDef};
use crate::Point;

/// Observed values of the state at points inside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    points: Vec<Point>,
    values: Vec<f64>,
}

impl ObservationSet {
    pub fn new(points: Vec<Point>, values: Vec<f64>, phi: &dyn LevelSet) -> Result<Self, TrainError> {
        if points.len() != values.len() {
            return Err(TrainError::Config(format!("{} observation points but {} values", points.len(), values.len())));
        }
        if points.is_empty() {
            return Err(TrainError::Config("no observation points".into()));
        }
        if let Some(p) = points.iter().find(|&&p| !(phi.value(p) < 0.0)) {
            return Err(TrainError::Config(format!("observation point {p:?} lies outside the domain")));
        }
        Ok(ObservationSet { points, values })
    }

    /// Samples `u` at the given points.
    pub fn sample(points: Vec<Point>, phi: &dyn LevelSet, u: impl Fn(Point) -> f64) -> Result<Self, TrainError> {
        let values = points.iter().map(|&p| u(p)).collect();
        Self::new(points, values, phi)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Iteration budget of the three training steps.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseSchedule {
    step1: usize,
    step2: usize,
    step3: Vec<(usize, f64)>,
}

impl InverseSchedule {
    /// `step3` lists `(iterations, α)`; `α` must be positive and strictly
    /// increasing.
    pub fn new(step1: usize, step2: usize, step3: Vec<(usize, f64)>) -> Result<Self, TrainError> {
        if let Some(&(_, a)) = step3.iter().find(|(_, a)| !(*a > 0.0)) {
            return Err(TrainError::Config(format!("penalty weight must be positive, got {a}")));
        }
        if step3.windows(2).any(|w| !(w[1].1 > w[0].1)) {
            return Err(TrainError::Config("penalty weights must be strictly increasing".into()));
        }
        Ok(InverseSchedule { step1, step2, step3 })
    }

    pub fn step1(&self) -> usize {
        self.step1
    }

    pub fn step2(&self) -> usize {
        self.step2
    }

    pub fn step3(&self) -> &[(usize, f64)] {
        &self.step3
    }

    pub fn total(&self) -> usize {
        self.step1 + self.step2 + self.step3.iter().map(|s| s.0).sum::<usize>()
    }
}

impl Default for InverseSchedule {
    fn default() -> Self {
        InverseSchedule { step1: 400, step2: 100, step3: vec![(500, 0.01), (500, 0.03), (500, 0.09)] }
    }
}

/// The discretised nonlinear problem with unknown `σ`, plus the data.
///
/// `problem` carries the true state and coefficient; they generate the
/// source term and the Dirichlet data and are used to report errors only.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub disc: Discretization,
    pub problem: ProblemDef,
    pub assembler: Assembler,
    pub nodes: InterpolationNodes,
    pub observations: ObservationSet,
    state_norm: f64,
    sigma_norm: f64,
}

impl InverseProblem {
    pub fn new(
        disc: Discretization,
        problem: ProblemDef,
        nitsche: NitscheParams,
        observations: ObservationSet,
    ) -> Result<Self, TrainError> {
        if problem.is_linear() {
            return Err(TrainError::Config("coefficient identification needs the nonlinear problem".into()));
        }
        let assembler = Assembler::new(&problem, &disc, nitsche)?;
        let nodes = disc.interpolation_nodes();
        let degree = 2 * disc.order + 3;
        let zero = |_: usize, _: Point| (0.0, [0.0, 0.0]);
        let state_norm = error_norms(&disc.fine, degree, zero, |p| problem.solution.value_grad(p))?.l2;
        let sigma = true_sigma(&problem);
        let sigma_norm = error_norms(&disc.fine, degree, zero, |p| (sigma.value(p), [0.0, 0.0]))?.l2;
        Ok(InverseProblem { disc, problem, assembler, nodes, observations, state_norm, sigma_norm })
    }

    fn nodal(&self, net: &Mlp) -> Vec<f64> {
        let vals = net.forward(&self.nodes.points);
        let mut u = vec![0.0; self.assembler.n_trial()];
        for (&d, v) in self.nodes.dofs.iter().zip(vals) {
            u[d] = v;
        }
        u
    }

    fn to_nodes(&self, g: &[f64]) -> Vec<f64> {
        self.nodes.dofs.iter().map(|&d| g[d]).collect()
    }

    /// `‖d − u_N(x_obs)‖` and its parameter gradient.
    pub fn misfit(&self, u_net: &Mlp) -> Result<(f64, Vec<f64>), TrainError> {
        let pred = u_net.forward(&self.observations.points);
        let diff: Vec<f64> = self.observations.values.iter().zip(&pred).map(|(d, p)| d - p).collect();
        let norm = dot(&diff, &diff).sqrt();
        let w: Vec<f64> = if norm > 0.0 { diff.iter().map(|d| -d / norm).collect() } else { vec![0.0; diff.len()] };
        Ok((norm, u_net.vjp_params(&self.observations.points, &w)?))
    }

    /// `Σ |r(π_h u_N, π_h σ_N)|` and its gradients with respect to both
    /// parameter sets (the state gradient only if `want_state`).
    pub fn residual_l1(
        &self,
        u_net: &Mlp,
        sigma_net: &Mlp,
        want_state: bool,
    ) -> Result<(f64, Option<Vec<f64>>, Vec<f64>), TrainError> {
        let u = self.nodal(u_net);
        let sigma = self.nodal(sigma_net);
        let r = self.assembler.residual_with_sigma(&u, Some(&sigma))?;
        let loss = r.iter().map(|x| x.abs()).sum();
        let s: Vec<f64> = r.iter().map(|&x| sign(x)).collect();
        let (du, ds) = self.assembler.vjp_with_sigma(&u, Some(&sigma), &s, true)?;
        let ds = ds.expect("requested sigma cotangent");
        let g_sigma = sigma_net.vjp_params(&self.nodes.points, &self.to_nodes(&ds))?;
        let g_state = if want_state { Some(u_net.vjp_params(&self.nodes.points, &self.to_nodes(&du))?) } else { None };
        Ok((loss, g_state, g_sigma))
    }

    /// Relative `L²`/`H¹` errors of `π_h u_N` and relative `L²` error of
    /// `π_h σ_N`.
    pub fn relative_errors(&self, u_net: &Mlp, sigma_net: &Mlp) -> Result<(ErrorNorms, f64), TrainError> {
        let degree = 2 * self.disc.order + 3;
        let u = self.nodal(u_net);
        let sigma = self.nodal(sigma_net);
        let trial = &self.disc.trial;
        let eu = error_norms(
            &self.disc.fine,
            degree,
            |c, p| trial.evaluate_in_cell(self.disc.parent(c), &u, p),
            |p| self.problem.solution.value_grad(p),
        )?;
        let zero = |_: usize, _: Point| (0.0, [0.0, 0.0]);
        let u_h1 = error_norms(&self.disc.fine, degree, zero, |p| self.problem.solution.value_grad(p))?.h1;
        let truth = true_sigma(&self.problem);
        let es = error_norms(
            &self.disc.fine,
            degree,
            |c, p| (trial.evaluate_in_cell(self.disc.parent(c), &sigma, p).0, [0.0, 0.0]),
            |p| (truth.value(p), [0.0, 0.0]),
        )?;
        Ok((ErrorNorms { l2: eu.l2 / self.state_norm, h1: eu.h1 / u_h1 }, es.l2 / self.sigma_norm))
    }
}

fn true_sigma(problem: &ProblemDef) -> Coefficient {
    match &problem.kind {
        crate::weakforms::ProblemKind::Nonlinear { sigma, .. } => sigma.clone(),
        crate::weakforms::ProblemKind::Poisson => Coefficient::Constant(0.0),
    }
}

/// One accepted iterate of the inverse training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseRow {
    /// Global iteration index across all steps; each step restarts the
    /// optimizer, so a step's starting point is not repeated.
    pub iter: usize,
    /// 1, 2 or 3.
    pub step: u8,
    /// Penalty weight of the current substep (0 outside step 3).
    pub alpha: f64,
    pub loss: f64,
    pub grad_inf: f64,
    /// Relative errors, present at checkpoints.
    pub state: Option<ErrorNorms>,
    pub sigma_l2: Option<f64>,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseReport {
    pub rows: Vec<InverseRow>,
    /// Accepted iterations per phase (step 1, step 2, each substep).
    pub phase_iterations: Vec<usize>,
}

impl InverseReport {
    pub fn iterations(&self) -> usize {
        self.phase_iterations.iter().sum()
    }

    pub fn last(&self) -> &InverseRow {
        self.rows.last().expect("a report always holds the starting point")
    }
}

#[derive(Clone, Copy)]
enum Phase {
    State,
    Coefficient,
    Joint(f64),
}

/// Runs the three-step schedule, updating both networks in place.
pub fn train_inverse(
    inv: &InverseProblem,
    u_net: &mut Mlp,
    sigma_net: &mut Mlp,
    schedule: &InverseSchedule,
    optimizer: &OptimizerOptions,
    checkpoint_stride: usize,
    wall_clock: bool,
) -> Result<InverseReport, TrainError> {
    if !sigma_net.rectify() {
        return Err(TrainError::Config("the coefficient network must have a rectified output".into()));
    }
    let start = Instant::now();
    let mut rows: Vec<InverseRow> = Vec::new();
    let mut phase_iterations = Vec::new();
    let (u_errs, s_err) = inv.relative_errors(u_net, sigma_net)?;
    rows.push(InverseRow {
        iter: 0,
        step: 1,
        alpha: 0.0,
        loss: inv.misfit(u_net)?.0,
        grad_inf: f64::NAN,
        state: Some(u_errs),
        sigma_l2: Some(s_err),
        wall_s: 0.0,
    });
    let mut phases = vec![(Phase::State, schedule.step1), (Phase::Coefficient, schedule.step2)];
    phases.extend(schedule.step3.iter().map(|&(n, a)| (Phase::Joint(a), n)));
    for (phase, iters) in phases {
        let (step, alpha) = match phase {
            Phase::State => (1, 0.0),
            Phase::Coefficient => (2, 0.0),
            Phase::Joint(a) => (3, a),
        };
        let nu = u_net.num_params();
        let theta0: Vec<f64> = match phase {
            Phase::State => u_net.params().to_vec(),
            Phase::Coefficient => sigma_net.params().to_vec(),
            Phase::Joint(_) => [u_net.params(), sigma_net.params()].concat(),
        };
        let (u_ref, s_ref) = (&*u_net, &*sigma_net);
        let split = |theta: &[f64]| -> Result<(Mlp, Mlp), TrainError> {
            let (mut u, mut s) = (u_ref.clone(), s_ref.clone());
            match phase {
                Phase::State => u.set_params(theta)?,
                Phase::Coefficient => s.set_params(theta)?,
                Phase::Joint(_) => {
                    u.set_params(&theta[..nu])?;
                    s.set_params(&theta[nu..])?;
                }
            }
            Ok((u, s))
        };
        let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>), TrainError> {
            let (u, s) = split(theta)?;
            match phase {
                Phase::State => inv.misfit(&u),
                Phase::Coefficient => {
                    let (l, _, gs) = inv.residual_l1(&u, &s, false)?;
                    Ok((l, gs))
                }
                Phase::Joint(a) => {
                    let (m, gm) = inv.misfit(&u)?;
                    let (l, gu, gs) = inv.residual_l1(&u, &s, true)?;
                    let mut g = gm;
                    for (gi, x) in g.iter_mut().zip(gu.expect("requested state gradient")) {
                        *gi += a * x;
                    }
                    g.extend(gs.iter().map(|x| a * x));
                    Ok((m + a * l, g))
                }
            }
        };
        let offset = rows.last().map_or(0, |r| r.iter);
        let mut failure = None;
        let opts = OptimizerOptions { max_iters: iters, ..*optimizer };
        let result = optimize(objective, &theta0, &opts, |info| {
            if info.iter == 0 {
                return ControlFlow::Continue(());
            }
            let mut row = InverseRow {
                iter: offset + info.iter,
                step,
                alpha,
                loss: info.loss,
                grad_inf: info.grad_inf,
                state: None,
                sigma_l2: None,
                wall_s: 0.0,
            };
            if checkpoint_stride > 0 && row.iter.is_multiple_of(checkpoint_stride) {
                match split(info.theta).and_then(|(u, s)| inv.relative_errors(&u, &s)) {
                    Ok((e, s)) => {
                        row.state = Some(e);
                        row.sigma_l2 = Some(s);
                    }
                    Err(e) => {
                        failure = Some(e);
                        return ControlFlow::Break(());
                    }
                }
            }
            row.wall_s = if wall_clock { start.elapsed().as_secs_f64() } else { 0.0 };
            rows.push(row);
            ControlFlow::Continue(())
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let (u, s) = split(&result.theta)?;
        *u_net = u;
        *sigma_net = s;
        phase_iterations.push(result.iters);
        // Errors at every phase boundary.
        let last = rows.last_mut().expect("report holds the starting point");
        if last.state.is_none() {
            let (e, s) = inv.relative_errors(u_net, sigma_net)?;
            last.state = Some(e);
            last.sigma_l2 = Some(s);
        }
    }
    Ok(InverseReport { rows, phase_iterations })
}
