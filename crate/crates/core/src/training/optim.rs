//! Quasi-Newton minimisation with a Wolfe line search.

use std::ops::ControlFlow;

use super::TrainError;
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Dense inverse-Hessian BFGS.
    Bfgs,
    /// Limited-memory BFGS with `memory` correction pairs.
    Lbfgs { memory: usize },
}

impl Default for Method {
    fn default() -> Self {
        Method::Lbfgs { memory: 20 }
    }
}

/// Line search used along quasi-Newton directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LineSearch {
    /// Bracketing and cubic zoom until `|φ'(α)| ≤ c2 |φ'(0)|`.
    #[default]
    StrongWolfe,
    /// Bisection until `φ'(α) ≥ c2 φ'(0)`. Suited to objectives with kinks
    /// (`ℓ¹` losses), where the strong condition may be unattainable.
    WeakWolfe,
}

impl LineSearch {
    pub fn name(self) -> &'static str {
        match self {
            LineSearch::StrongWolfe => "strong-wolfe",
            LineSearch::WeakWolfe => "weak-wolfe",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "strong-wolfe" => Some(LineSearch::StrongWolfe),
            "weak-wolfe" => Some(LineSearch::WeakWolfe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub method: Method,
    pub line_search: LineSearch,
    pub max_iters: usize,
    /// Stop once `‖∇f‖_∞` falls to this value.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Function evaluations allowed per line search.
    pub max_line_evals: usize,
    /// `‖·‖_∞` length of the first trial step whenever the curvature model is
    /// empty (the first iteration and after a reset).
    pub first_step: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            method: Method::default(),
            line_search: LineSearch::default(),
            max_iters: 1000,
            grad_tol: 1e-9,
            c1: 1e-4,
            c2: 0.9,
            max_line_evals: 25,
            first_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIters,
    GradTol,
    /// The per-iteration callback asked to stop.
    Callback,
    /// Neither the Wolfe search nor the steepest-descent fallback decreased
    /// the objective.
    Stalled,
}

/// State passed to the per-iteration callback; iteration 0 is the start point.
#[derive(Debug)]
pub struct IterInfo<'a> {
    pub iter: usize,
    pub loss: f64,
    pub grad_inf: f64,
    pub theta: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub grad_inf: f64,
    /// Accepted iterations.
    pub iters: usize,
    pub evals: usize,
    pub fallbacks: usize,
    pub termination: Termination,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

/// Curvature pairs of the quasi-Newton model.
enum Model {
    Dense { n: usize, h: Vec<f64>, scaled: bool },
    Limited { memory: usize, s: Vec<Vec<f64>>, y: Vec<Vec<f64>>, rho: Vec<f64> },
}

impl Model {
    fn new(method: Method, n: usize) -> Self {
        match method {
            Method::Bfgs => Model::Dense { n, h: identity(n), scaled: false },
            Method::Lbfgs { memory } => {
                Model::Limited { memory: memory.max(1), s: Vec::new(), y: Vec::new(), rho: Vec::new() }
            }
        }
    }

    fn reset(&mut self) {
        match self {
            Model::Dense { n, h, scaled } => {
                *h = identity(*n);
                *scaled = false;
            }
            Model::Limited { s, y, rho, .. } => {
                s.clear();
                y.clear();
                rho.clear();
            }
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Model::Dense { scaled, .. } => !*scaled,
            Model::Limited { s, .. } => s.is_empty(),
        }
    }

    /// `-H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        match self {
            Model::Dense { n, h, .. } => (0..*n).map(|i| -dot(&h[i * n..(i + 1) * n], g)).collect(),
            Model::Limited { s, y, rho, .. } => {
                let mut q = g.to_vec();
                let m = s.len();
                let mut alpha = vec![0.0; m];
                for i in (0..m).rev() {
                    alpha[i] = rho[i] * dot(&s[i], &q);
                    for (qj, yj) in q.iter_mut().zip(&y[i]) {
                        *qj -= alpha[i] * yj;
                    }
                }
                if m > 0 {
                    let gamma = dot(&s[m - 1], &y[m - 1]) / dot(&y[m - 1], &y[m - 1]);
                    q.iter_mut().for_each(|v| *v *= gamma);
                }
                for i in 0..m {
                    let beta = rho[i] * dot(&y[i], &q);
                    for (qj, sj) in q.iter_mut().zip(&s[i]) {
                        *qj += (alpha[i] - beta) * sj;
                    }
                }
                q.iter_mut().for_each(|v| *v = -*v);
                q
            }
        }
    }

    fn update(&mut self, sv: Vec<f64>, yv: Vec<f64>) {
        let sy = dot(&sv, &yv);
        let yy = dot(&yv, &yv);
        if !(sy > 1e-12 * dot(&sv, &sv).sqrt() * yy.sqrt()) {
            return;
        }
        let r = 1.0 / sy;
        match self {
            Model::Dense { n, h, scaled } => {
                let n = *n;
                if !*scaled {
                    let gamma = sy / yy;
                    h.iter_mut().for_each(|v| *v *= gamma);
                    *scaled = true;
                }
                let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &yv)).collect();
                let yhy = dot(&yv, &hy);
                let c = r * r * yhy + r;
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] += -r * (sv[i] * hy[j] + hy[i] * sv[j]) + c * sv[i] * sv[j];
                    }
                }
            }
            Model::Limited { memory, s, y, rho } => {
                if s.len() == *memory {
                    s.remove(0);
                    y.remove(0);
                    rho.remove(0);
                }
                s.push(sv);
                y.push(yv);
                rho.push(r);
            }
        }
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

struct Point1d {
    alpha: f64,
    phi: f64,
    dphi: f64,
    theta: Vec<f64>,
    grad: Vec<f64>,
}

/// Minimiser of the cubic through `(a, fa, da)` and `(b, fb, db)`, if any.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Minimises `f` from `theta0`. `f` returns the objective and its gradient.
///
/// The callback sees the start point (iteration 0) and every accepted
/// iterate; returning `ControlFlow::Break` stops the run.
pub fn optimize<F, C>(
    mut f: F,
    theta0: &[f64],
    opts: &OptimizerOptions,
    mut callback: C,
) -> Result<OptimResult, TrainError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), TrainError>,
    C: FnMut(&IterInfo) -> ControlFlow<()>,
{
    let n = theta0.len();
    let mut theta = theta0.to_vec();
    let (mut loss, mut grad) = f(&theta)?;
    let mut evals = 1;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::NonFinite { iter: 0, loss });
    }
    let mut model = Model::new(opts.method, n);
    let mut fallbacks = 0;
    let mut iters = 0;
    let mut termination = Termination::MaxIters;
    let mut gi = inf_norm(&grad);
    if callback(&IterInfo { iter: 0, loss, grad_inf: gi, theta: &theta }).is_break() {
        termination = Termination::Callback;
    } else if gi <= opts.grad_tol {
        termination = Termination::GradTol;
    }
    while termination == Termination::MaxIters && iters < opts.max_iters {
        let mut d = model.direction(&grad);
        let mut dphi0 = dot(&grad, &d);
        if !(dphi0 < 0.0) {
            model.reset();
            d = grad.iter().map(|g| -g).collect();
            dphi0 = -dot(&grad, &grad);
        }
        let alpha0 = if model.is_empty() { (opts.first_step / inf_norm(&d)).min(1.0) } else { 1.0 };
        let (found, used) = match opts.line_search {
            LineSearch::StrongWolfe => line_search(&mut f, &theta, loss, dphi0, &d, alpha0, opts)?,
            LineSearch::WeakWolfe => weak_wolfe(&mut f, &theta, loss, dphi0, &d, alpha0, opts)?,
        };
        evals += used;
        let next = match found {
            Some(p) => p,
            None => {
                fallbacks += 1;
                model.reset();
                let (fb, used) = steepest_descent(&mut f, &theta, loss, &grad, opts)?;
                evals += used;
                match fb {
                    Some(p) => p,
                    None => {
                        termination = Termination::Stalled;
                        break;
                    }
                }
            }
        };
        let s: Vec<f64> = next.theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        model.update(s, y);
        theta = next.theta;
        loss = next.phi;
        grad = next.grad;
        iters += 1;
        gi = inf_norm(&grad);
        if callback(&IterInfo { iter: iters, loss, grad_inf: gi, theta: &theta }).is_break() {
            termination = Termination::Callback;
        } else if gi <= opts.grad_tol {
            termination = Termination::GradTol;
        }
    }
    Ok(OptimResult { theta, loss, grad_inf: gi, iters, evals, fallbacks, termination })
}

type LineResult = Result<(Option<Point1d>, usize), TrainError>;

fn probe<F>(f: &mut F, theta: &[f64], d: &[f64], alpha: f64) -> Result<Point1d, TrainError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), TrainError>,
{
    let t = axpy(theta, alpha, d);
    let (phi, grad) = f(&t)?;
    let finite = phi.is_finite() && grad.iter().all(|g| g.is_finite());
    let (phi, dphi) = if finite { (phi, dot(&grad, d)) } else { (f64::INFINITY, f64::NAN) };
    Ok(Point1d { alpha, phi, dphi, theta: t, grad })
}

/// Strong-Wolfe search (bracketing then zoom with cubic interpolation).
/// Non-finite trial values count as too long a step.
fn line_search<F>(
    f: &mut F,
    theta: &[f64],
    phi0: f64,
    dphi0: f64,
    d: &[f64],
    alpha0: f64,
    opts: &OptimizerOptions,
) -> LineResult
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), TrainError>,
{
    let armijo = |p: &Point1d| p.phi <= phi0 + opts.c1 * p.alpha * dphi0;
    let curvature = |p: &Point1d| p.dphi.abs() <= -opts.c2 * dphi0;
    let mut evals = 0;
    let mut prev = Point1d { alpha: 0.0, phi: phi0, dphi: dphi0, theta: theta.to_vec(), grad: Vec::new() };
    let mut alpha = alpha0;
    let (mut lo, mut hi);
    loop {
        if evals >= opts.max_line_evals {
            return Ok((None, evals));
        }
        let p = probe(f, theta, d, alpha)?;
        evals += 1;
        if !p.phi.is_finite() {
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if !armijo(&p) || (prev.alpha > 0.0 && p.phi >= prev.phi) {
            lo = prev;
            hi = p;
            break;
        }
        if curvature(&p) {
            return Ok((Some(p), evals));
        }
        if p.dphi >= 0.0 {
            lo = p;
            hi = prev;
            break;
        }
        alpha = 2.0 * p.alpha;
        prev = p;
    }
    // zoom: lo satisfies sufficient decrease and has the lowest value so far.
    while evals < opts.max_line_evals {
        let (a, b) = (lo.alpha, hi.alpha);
        let width = (b - a).abs();
        let mut t = if hi.phi.is_finite() && hi.dphi.is_finite() {
            cubic_min(a, lo.phi, lo.dphi, b, hi.phi, hi.dphi).unwrap_or(0.5 * (a + b))
        } else {
            0.5 * (a + b)
        };
        let (mn, mx) = (a.min(b), a.max(b));
        if !(t > mn + 0.1 * width && t < mx - 0.1 * width) {
            t = 0.5 * (a + b);
        }
        if width <= 1e-16 * mx.max(1.0) {
            break;
        }
        let p = probe(f, theta, d, t)?;
        evals += 1;
        if !p.phi.is_finite() || !armijo(&p) || p.phi >= lo.phi {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok((Some(p), evals));
            }
            if p.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    // Out of budget: keep the best point if it decreased the objective.
    if lo.alpha > 0.0 && lo.phi < phi0 {
        Ok((Some(lo), evals))
    } else {
        Ok((None, evals))
    }
}

/// Weak-Wolfe bisection: shrink on failed sufficient decrease, grow on
/// failed curvature. Non-finite trial values count as too long a step.
fn weak_wolfe<F>(
    f: &mut F,
    theta: &[f64],
    phi0: f64,
    dphi0: f64,
    d: &[f64],
    alpha0: f64,
    opts: &OptimizerOptions,
) -> LineResult
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), TrainError>,
{
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut alpha = alpha0;
    let mut best: Option<Point1d> = None;
    for evals in 1..=opts.max_line_evals {
        let p = probe(f, theta, d, alpha)?;
        if !p.phi.is_finite() || p.phi > phi0 + opts.c1 * alpha * dphi0 {
            hi = alpha;
        } else if p.dphi < opts.c2 * dphi0 {
            lo = alpha;
            if best.as_ref().is_none_or(|b| p.phi < b.phi) {
                best = Some(p);
            }
        } else {
            return Ok((Some(p), evals));
        }
        alpha = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
    }
    Ok((best.filter(|b| b.phi < phi0), opts.max_line_evals))
}

/// Backtracking Armijo search along `-∇f`.
fn steepest_descent<F>(f: &mut F, theta: &[f64], phi0: f64, grad: &[f64], opts: &OptimizerOptions) -> LineResult
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), TrainError>,
{
    let d: Vec<f64> = grad.iter().map(|g| -g).collect();
    let dphi0 = -dot(grad, grad);
    if dphi0 == 0.0 {
        return Ok((None, 0));
    }
    let mut alpha = 1.0 / inf_norm(grad).max(1.0);
    for k in 0..60 {
        let p = probe(f, theta, &d, alpha)?;
        if p.phi.is_finite() && p.phi <= phi0 + opts.c1 * alpha * dphi0 && p.phi < phi0 {
            return Ok((Some(p), k + 1));
        }
        alpha *= 0.5;
    }
    Ok((None, 60))
}
