//! Forward problems: train `u_N` so that `π_h u_N` minimises a residual norm.

use std::ops::ControlFlow;
use std::time::Instant;

use super::optim::{optimize, OptimizerOptions, Termination};
use super::{LossConfig, LossKind, TrainError};
use crate::fespace::{Discretization, InterpolationNodes};
use crate::nn::Mlp;
use crate::weakforms::{error_norms, fe_error_norms, Assembler, ErrorNorms, NitscheParams, ProblemDef};

/// A discretised forward problem together with its training loss.
#[derive(Debug, Clone)]
pub struct Feinn {
    pub disc: Discretization,
    pub problem: ProblemDef,
    pub assembler: Assembler,
    pub nodes: InterpolationNodes,
    pub loss: LossConfig,
}

impl Feinn {
    pub fn new(
        disc: Discretization,
        problem: ProblemDef,
        nitsche: NitscheParams,
        loss: LossConfig,
    ) -> Result<Self, TrainError> {
        let assembler = Assembler::new(&problem, &disc, nitsche)?;
        if let Some(g) = loss.gram() {
            if g.n_test() != assembler.n_test() {
                return Err(TrainError::Config(format!(
                    "Gram operator acts on {} test dofs, the residual has {}",
                    g.n_test(),
                    assembler.n_test()
                )));
            }
        } else if loss.kind() == LossKind::Dual {
            return Err(TrainError::Config("dual loss needs a Gram operator".into()));
        }
        let nodes = disc.interpolation_nodes();
        Ok(Feinn { disc, problem, assembler, nodes, loss })
    }

    /// Nodal values of `π_h u_N`.
    pub fn interpolant(&self, net: &Mlp) -> Vec<f64> {
        let vals = net.forward(&self.nodes.points);
        let mut u = vec![0.0; self.assembler.n_trial()];
        for (&d, v) in self.nodes.dofs.iter().zip(vals) {
            u[d] = v;
        }
        u
    }

    /// Loss at trial coefficients `u` and its gradient with respect to `u`.
    pub fn loss_of_coeffs(&self, u: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
        let r = self.assembler.residual(u)?;
        let (loss, s) = self.loss.evaluate(&r)?;
        Ok((loss, self.assembler.vjp(u, &s)?))
    }

    /// Loss of `π_h u_N` and its gradient with respect to the parameters.
    pub fn loss_and_grad(&self, net: &Mlp) -> Result<(f64, Vec<f64>), TrainError> {
        let u = self.interpolant(net);
        let (loss, du) = self.loss_of_coeffs(&u)?;
        let w: Vec<f64> = self.nodes.dofs.iter().map(|&d| du[d]).collect();
        Ok((loss, net.vjp_params(&self.nodes.points, &w)?))
    }

    /// Errors of `π_h u*`, the best the trained interpolant can do.
    pub fn interpolation_baseline(&self) -> Result<ErrorNorms, TrainError> {
        let u = &self.problem.solution;
        let coeffs = self.disc.trial.interpolate(|p| u.value(p));
        Ok(fe_error_norms(&self.disc, &coeffs, |p| u.value_grad(p))?)
    }

    /// Errors of `π_h u_N`.
    pub fn interpolant_errors(&self, net: &Mlp) -> Result<ErrorNorms, TrainError> {
        let u = &self.problem.solution;
        Ok(fe_error_norms(&self.disc, &self.interpolant(net), |p| u.value_grad(p))?)
    }

    /// Errors of `u_N` itself.
    pub fn network_errors(&self, net: &Mlp) -> Result<ErrorNorms, TrainError> {
        let u = &self.problem.solution;
        Ok(error_norms(
            &self.disc.fine,
            2 * self.disc.order + 3,
            |_, p| net.value_and_gradient(p),
            |p| u.value_grad(p),
        )?)
    }
}

/// Free-function form of [`Feinn::loss_and_grad`].
pub fn loss_and_grad(net: &Mlp, feinn: &Feinn) -> Result<(f64, Vec<f64>), TrainError> {
    feinn.loss_and_grad(net)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub optimizer: OptimizerOptions,
    /// Error checkpoints every `checkpoint_stride` iterations; 0 disables them.
    /// The final iterate is always checkpointed when the stride is positive.
    pub checkpoint_stride: usize,
    /// Also measure the errors of `u_N` at checkpoints.
    pub network_errors: bool,
    /// Record wall-clock stamps; when false every stamp is 0 so that reports
    /// are reproducible bit for bit.
    pub wall_clock: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            optimizer: OptimizerOptions::default(),
            checkpoint_stride: 25,
            network_errors: false,
            wall_clock: true,
        }
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub iter: usize,
    pub loss: f64,
    pub grad_inf: f64,
    pub interp: Option<ErrorNorms>,
    pub network: Option<ErrorNorms>,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<ReportRow>,
    pub termination: Termination,
    /// Steepest-descent fallback steps taken.
    pub fallbacks: usize,
}

impl TrainReport {
    pub fn last(&self) -> &ReportRow {
        self.rows.last().expect("a report always holds the starting point")
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    /// The last checkpointed `π_h u_N` errors.
    pub fn final_interp(&self) -> Option<ErrorNorms> {
        self.rows.iter().rev().find_map(|r| r.interp)
    }

    pub fn iterations(&self) -> usize {
        self.last().iter
    }
}

fn checkpoint(feinn: &Feinn, net: &Mlp, opts: &TrainOptions) -> Result<(ErrorNorms, Option<ErrorNorms>), TrainError> {
    let interp = feinn.interpolant_errors(net)?;
    let network = if opts.network_errors { Some(feinn.network_errors(net)?) } else { None };
    Ok((interp, network))
}

/// Trains `net` in place. `on_row` sees every report row as it is produced
/// and may stop the run early.
pub fn train_forward(
    feinn: &Feinn,
    net: &mut Mlp,
    opts: &TrainOptions,
    mut on_row: impl FnMut(&ReportRow) -> ControlFlow<()>,
) -> Result<TrainReport, TrainError> {
    let start = Instant::now();
    let stamp = || if opts.wall_clock { start.elapsed().as_secs_f64() } else { 0.0 };
    let mut rows = Vec::new();
    let mut failure = None;
    let mut probe = net.clone();
    let theta0 = net.params().to_vec();
    let objective = |theta: &[f64]| {
        let mut n = net.clone();
        n.set_params(theta)?;
        feinn.loss_and_grad(&n)
    };
    let result = optimize(objective, &theta0, &opts.optimizer, |info| {
        let mut row = ReportRow {
            iter: info.iter,
            loss: info.loss,
            grad_inf: info.grad_inf,
            interp: None,
            network: None,
            wall_s: 0.0,
        };
        if opts.checkpoint_stride > 0 && info.iter % opts.checkpoint_stride == 0 {
            let errs =
                probe.set_params(info.theta).map_err(TrainError::from).and_then(|_| checkpoint(feinn, &probe, opts));
            match errs {
                Ok((i, n)) => {
                    row.interp = Some(i);
                    row.network = n;
                }
                Err(e) => {
                    failure = Some(e);
                    return ControlFlow::Break(());
                }
            }
        }
        row.wall_s = stamp();
        let flow = on_row(&row);
        rows.push(row);
        flow
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    net.set_params(&result.theta)?;
    if opts.checkpoint_stride > 0 {
        let last = rows.last_mut().expect("optimizer reports the start point");
        if last.interp.is_none() {
            let (i, n) = checkpoint(feinn, net, opts)?;
            last.interp = Some(i);
            last.network = n;
        }
    }
    Ok(TrainReport { rows, termination: result.termination, fallbacks: result.fallbacks })
}
