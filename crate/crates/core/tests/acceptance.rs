//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p feinn-core --test acceptance -- 1 8`.

use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::time::Instant;

use feinn_core::fespace::{aggregate, FeSpace};
use feinn_core::geometry::{CutOptions, LevelSet};
use feinn_core::mesh::skeleton_faces_near_boundary;
use feinn_core::nn::{Activation, Mlp};
use feinn_core::training::{
    train_forward, train_inverse, Feinn, InverseProblem, InverseSchedule, LineSearch, LossConfig, Method,
    ObservationSet, OptimizerOptions, TrainOptions, TrainReport,
};
use feinn_core::weakforms::{
    assemble_ghost_penalty, Coefficient, GramOperator, Manufactured, NitscheParams, NitscheScale, ProblemDef,
};
use feinn_core::{BackgroundMesh, CutDecomposition, Discretization, FactorRule, Point, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn disk() -> Shape {
    Shape::disk([0.5, 0.5], 0.4)
}

fn disc(n: usize, shape: &Shape, k: usize) -> Discretization {
    Discretization::build(&BackgroundMesh::unit_square(n).unwrap(), shape, k, FactorRule::Pow2, CutOptions::default())
        .unwrap()
}

fn feinn(d: Discretization, problem: ProblemDef, gamma: f64, loss: LossConfig) -> Feinn {
    let nit = NitscheParams::for_discretization(gamma, &d, NitscheScale::Coarse).unwrap();
    Feinn::new(d, problem, nit, loss).unwrap()
}

/// Network with inputs normalised over the bounding box of the discrete domain.
fn net(arch: &[usize], act: Activation, rectify: bool, seed: u64, d: &Discretization) -> Mlp {
    let (lo, hi) = d.fine.bounds();
    Mlp::init(arch, act, rectify, seed).unwrap().with_input_box(lo, hi).unwrap()
}

fn options(method: Method, line_search: LineSearch, iters: usize, stride: usize) -> TrainOptions {
    TrainOptions {
        optimizer: OptimizerOptions { method, line_search, max_iters: iters, grad_tol: 0.0, ..Default::default() },
        checkpoint_stride: stride,
        network_errors: false,
        wall_clock: false,
    }
}

fn lbfgs(iters: usize, stride: usize) -> TrainOptions {
    options(Method::Lbfgs { memory: 20 }, LineSearch::StrongWolfe, iters, stride)
}

fn train(f: &Feinn, n: &mut Mlp, opts: &TrainOptions) -> Result<TrainReport, String> {
    train_forward(f, n, opts, |_| ControlFlow::Continue(())).map_err(|e| e.to_string())
}

/// Least-squares slope of `log y` against `log h`.
fn slope(h: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Interpolation-error slopes `(L², H¹)` over the given mesh sizes.
fn baseline_slopes(shape: &Shape, problem: &ProblemDef, k: usize, sizes: &[usize]) -> (f64, f64) {
    let mut h = Vec::new();
    let (mut l2, mut h1) = (Vec::new(), Vec::new());
    for &n in sizes {
        let f = feinn(disc(n, shape, k), problem.clone(), 1e-2, LossConfig::l2());
        let e = f.interpolation_baseline().unwrap();
        h.push(1.0 / n as f64);
        l2.push(e.l2);
        h1.push(e.h1);
    }
    (slope(&h, &l2), slope(&h, &h1))
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn criterion_1() -> Outcome {
    let problem = ProblemDef::poisson(Manufactured::Smooth2d);
    let (l2_2, h1_2) = baseline_slopes(&disk(), &problem, 2, &[10, 20, 40]);
    let (l2_3, h1_3) = baseline_slopes(&disk(), &problem, 3, &[8, 16, 32]);
    let pass = within(l2_2, 3.0, 0.2) && within(h1_2, 2.0, 0.2) && within(l2_3, 4.0, 0.3) && within(h1_3, 3.0, 0.3);
    Ok((pass, format!("k=2 slopes L2 {l2_2:.2} H1 {h1_2:.2}; k=3 slopes L2 {l2_3:.2} H1 {h1_3:.2}")))
}

fn criterion_2() -> Outcome {
    let f = feinn(disc(20, &disk(), 2), ProblemDef::poisson(Manufactured::Smooth2d), 1e-2, LossConfig::l2());
    let base = f.interpolation_baseline().map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    for seed in 1..=3 {
        let mut n = net(&[2, 20, 20, 20, 1], Activation::Tanh, false, seed, &f.disc);
        train(&f, &mut n, &lbfgs(500, 0))?;
        ratios.push(f.interpolant_errors(&n).map_err(|e| e.to_string())?.h1 / base.h1);
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[1];
    Ok((median <= 3.0, format!("H1 ratio to interpolation per seed {ratios:.2?}, median {median:.2} (limit 3)")))
}

fn criterion_3() -> Outcome {
    let mut losses = Vec::new();
    for gamma in [1e-4, 1e-2, 1e2] {
        let f = feinn(disc(20, &disk(), 2), ProblemDef::poisson(Manufactured::Smooth2d), gamma, LossConfig::l2());
        let mut n = net(&[2, 20, 20, 20, 1], Activation::Tanh, false, 1, &f.disc);
        losses.push(train(&f, &mut n, &lbfgs(300, 0))?.last().loss);
    }
    let pass = losses[2] > losses[0] && losses[2] > losses[1];
    Ok((
        pass,
        format!(
            "final loss after 300 iterations: γ=1e-4 {:.2e}, γ=1e-2 {:.2e}, γ=1e2 {:.2e}",
            losses[0], losses[1], losses[2]
        ),
    ))
}

fn criterion_4() -> Outcome {
    let mut h1 = Vec::new();
    let mut worst_reduction = f64::INFINITY;
    let mut all_trained = true;
    for i in 0..13 {
        let x = 0.2 + 0.05 * i as f64;
        let f = feinn(
            disc(20, &Shape::disk([x, x], 0.19), 2),
            ProblemDef::poisson(Manufactured::Smooth2d),
            1e-2,
            LossConfig::l2(),
        );
        let mut n = net(&[2, 20, 20, 20, 1], Activation::Tanh, false, 1, &f.disc);
        let report = train(&f, &mut n, &lbfgs(300, 0))?;
        let e = f.interpolant_errors(&n).map_err(|e| e.to_string())?.h1;
        let reduction = report.rows[0].loss / report.last().loss;
        all_trained &= e.is_finite() && reduction.is_finite() && reduction >= 100.0;
        worst_reduction = worst_reduction.min(reduction);
        h1.push(e);
    }
    let (lo, hi) = h1.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let ratio = hi / lo;
    Ok((
        ratio <= 2.0 && all_trained,
        format!("H1 max/min over 13 positions {ratio:.2} (limit 2), smallest loss reduction {worst_reduction:.1e} (need 1e2)"),
    ))
}

/// First checkpointed iteration with `L² ≤ target`, stopping there.
fn iterations_to_reach(f: &Feinn, target: f64, cap: usize) -> Result<(Option<usize>, f64), String> {
    let mut n = net(&[2, 20, 20, 20, 1], Activation::Tanh, false, 1, &f.disc);
    let mut reached = None;
    let report = train_forward(f, &mut n, &lbfgs(cap, 10), |row| match row.interp {
        Some(e) if e.l2 <= target => {
            reached = Some(row.iter);
            ControlFlow::Break(())
        }
        _ => ControlFlow::Continue(()),
    })
    .map_err(|e| e.to_string())?;
    let last = report.final_interp().map_or(f64::NAN, |e| e.l2);
    Ok((reached, last))
}

fn criterion_5() -> Outcome {
    let d = disc(30, &disk(), 2);
    let problem = ProblemDef::poisson(Manufactured::Sharp2d);
    let ghost = GramOperator::ghost(&d.test, &d.fine, 0.1).map_err(|e| e.to_string())?;
    let agg = aggregate(&d.fine, &d.test).map_err(|e| e.to_string())?;
    let aggregated = GramOperator::aggregated(&d.test, &d.fine, &agg).map_err(|e| e.to_string())?;
    let dual = feinn(d.clone(), problem.clone(), 1e2, LossConfig::dual(ghost));
    let dual_ag = feinn(d.clone(), problem.clone(), 1e2, LossConfig::dual(aggregated));
    let l2 = feinn(d, problem, 1e2, LossConfig::l2());
    let base = l2.interpolation_baseline().map_err(|e| e.to_string())?.l2;
    let target = 2.0 * base;
    let cap = 2000;
    let (it_dual, e_dual) = iterations_to_reach(&dual, target, cap)?;
    let (it_l2, e_l2) = iterations_to_reach(&l2, target, cap)?;
    let (_, e_ag) = iterations_to_reach(&dual_ag, target, cap)?;
    let show = |it: Option<usize>| it.map_or(format!(">{cap}"), |i| i.to_string());
    let faster = match (it_dual, it_l2) {
        (Some(a), Some(b)) => 2 * a <= b,
        (Some(a), None) => 2 * a <= cap,
        (None, _) => false,
    };
    let agree = e_dual.max(e_ag) <= 2.0 * e_dual.min(e_ag);
    Ok((
        faster && agree,
        format!(
            "iterations to L2 <= 2x interpolation ({target:.2e}): dual {}, l2 {}; final L2 ratio dual {:.0}, l2 {:.0}; V_std vs V_ag final L2 {:.2e} vs {:.2e}",
            show(it_dual),
            show(it_l2),
            e_dual / base,
            e_l2 / base,
            e_dual,
            e_ag
        ),
    ))
}

fn criterion_6() -> Outcome {
    let flower = Shape::flower([0.5, 0.5]);
    let problem = ProblemDef::nonlinear(Manufactured::Nonlinear2d, [2.0, 3.0], Coefficient::Constant(4.0));
    let (sl2, sh1) = baseline_slopes(&flower, &problem, 2, &[20, 40]);
    let f = feinn(disc(20, &flower, 2), problem, 1e-2, LossConfig::l1());
    let base = f.interpolation_baseline().map_err(|e| e.to_string())?;
    let mut n = net(&[2, 20, 20, 20, 1], Activation::Tanh, false, 1, &f.disc);
    train(&f, &mut n, &options(Method::Bfgs, LineSearch::WeakWolfe, 500, 0))?;
    let e = f.interpolant_errors(&n).map_err(|e| e.to_string())?;
    let (rl2, rh1) = (e.l2 / base.l2, e.h1 / base.h1);
    let pass = within(sl2, 3.0, 0.3) && within(sh1, 2.0, 0.3) && rl2 <= 3.0 && rh1 <= 3.0;
    Ok((pass, format!("baseline slopes L2 {sl2:.2} H1 {sh1:.2}; trained/interpolation at h=1/20: L2 {rl2:.2}, H1 {rh1:.2} (limit 3)")))
}

fn bump(p: Point) -> f64 {
    1.0 + 9.0 * (-5.0 * ((p[0] - 0.5).powi(2) + (2.0 * p[1] - 1.0).powi(2))).exp()
}

fn criterion_7() -> Outcome {
    let flower = Shape::flower([0.5, 0.5]);
    let d = disc(30, &flower, 1);
    let problem = ProblemDef::nonlinear(Manufactured::InvState2d, [2.0, 3.0], Coefficient::field(bump));
    let nit = NitscheParams::for_discretization(1e-2, &d, NitscheScale::Coarse).map_err(|e| e.to_string())?;
    let central = |p: Point| (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) < 0.04;
    let points: Vec<Point> = d.trial.nodes().iter().copied().filter(|&p| flower.value(p) < 0.0 && central(p)).collect();
    let obs = ObservationSet::sample(points, &flower, |p| problem.solution.value(p)).map_err(|e| e.to_string())?;
    let n_obs = obs.len();
    let mut u = net(&[2, 20, 20, 1], Activation::Softplus, false, 1, &d);
    let mut s = net(&[2, 20, 20, 1], Activation::Softplus, true, 2, &d);
    let inv = InverseProblem::new(d, problem, nit, obs).map_err(|e| e.to_string())?;
    let schedule =
        InverseSchedule::new(400, 100, vec![(300, 0.01), (300, 0.03), (300, 0.09)]).map_err(|e| e.to_string())?;
    let opts = OptimizerOptions {
        method: Method::Bfgs,
        line_search: LineSearch::WeakWolfe,
        grad_tol: 0.0,
        ..Default::default()
    };
    train_inverse(&inv, &mut u, &mut s, &schedule, &opts, 0, false).map_err(|e| e.to_string())?;
    let (state, sigma) = inv.relative_errors(&u, &s).map_err(|e| e.to_string())?;
    Ok((
        state.l2 <= 0.01 && sigma <= 0.10,
        format!(
            "{n_obs} observations in r < 0.2; relative L2 error state {:.2}% (limit 1%), coefficient {:.1}% (limit 10%)",
            100.0 * state.l2,
            100.0 * sigma
        ),
    ))
}

/// Relative error of the analytic directional derivative against central
/// differences, over a few random directions.
fn fd_gradient_error(f: &Feinn, n: &Mlp, rng: &mut ChaCha8Rng) -> f64 {
    let (_, g) = f.loss_and_grad(n).unwrap();
    let theta = n.params().to_vec();
    let eps = 1e-6;
    let r0 = f.assembler.residual(&f.interpolant(n)).unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 4 {
        let v: Vec<f64> = (0..theta.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let at = |s: f64| {
            let mut m = n.clone();
            let t: Vec<f64> = theta.iter().zip(&v).map(|(a, b)| a + s * b).collect();
            m.set_params(&t).unwrap();
            m
        };
        let (plus, minus) = (at(eps), at(-eps));
        // The ℓ¹ loss is only differentiable where no residual changes sign.
        let same_signs = |m: &Mlp| {
            let r = f.assembler.residual(&f.interpolant(m)).unwrap();
            r.iter().zip(&r0).all(|(a, b)| a.signum() == b.signum())
        };
        if !(same_signs(&plus) && same_signs(&minus)) {
            continue;
        }
        let fd = (f.loss_and_grad(&plus).unwrap().0 - f.loss_and_grad(&minus).unwrap().0) / (2.0 * eps);
        let exact: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-8));
        checked += 1;
    }
    worst
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        if !ok {
            failures.push(format!("{name}: {detail}"));
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_fd = 0.0f64;

    // End-to-end parameter gradients.
    let d = disc(6, &disk(), 2);
    let problem = ProblemDef::nonlinear(Manufactured::Nonlinear2d, [2.0, 3.0], Coefficient::Constant(4.0));
    let ghost = GramOperator::ghost(&d.test, &d.fine, 0.1).map_err(|e| e.to_string())?;
    let agg = aggregate(&d.fine, &d.test).map_err(|e| e.to_string())?;
    let aggregated = GramOperator::aggregated(&d.test, &d.fine, &agg).map_err(|e| e.to_string())?;
    for (name, loss) in [
        ("l1", LossConfig::l1()),
        ("l2", LossConfig::l2()),
        ("dual (ghost)", LossConfig::dual(ghost.clone())),
        ("dual (aggregated)", LossConfig::dual(aggregated.clone())),
    ] {
        let f = feinn(d.clone(), problem.clone(), 10.0, loss);
        let n = net(&[2, 6, 6, 1], Activation::Tanh, false, 3, &f.disc);
        let err = fd_gradient_error(&f, &n, &mut rng);
        worst_fd = worst_fd.max(err);
        check(&format!("gradient {name}"), err <= 1e-5, format!("relative FD error {err:.1e}"));
    }

    // Gram matrices are SPD under both stabilisations.
    for (name, g) in [("ghost", &ghost), ("aggregated", &aggregated)] {
        let m = g.matrix();
        let asym = m.asymmetry();
        let mut min_q = f64::INFINITY;
        for _ in 0..20 {
            let v: Vec<f64> = (0..m.rows()).map(|_| rng.random::<f64>() - 0.5).collect();
            let q = g.quadratic_form(&v).unwrap() / v.iter().map(|x| x * x).sum::<f64>();
            min_q = min_q.min(q);
        }
        check(
            &format!("Gram SPD {name}"),
            asym < 1e-12 && min_q > 0.0,
            format!("asymmetry {asym:.1e}, min Rayleigh {min_q:.1e}"),
        );
    }

    // The ghost penalty vanishes on globally linear fields.
    let cut: BTreeSet<usize> = d.fine.cut_cells();
    let facets: Vec<_> = skeleton_faces_near_boundary(d.fine.mesh(), &cut)
        .into_iter()
        .filter(|f| d.test.is_active(f.cells[0]) && d.test.is_active(f.cells[1]))
        .collect();
    let j = assemble_ghost_penalty(&d.test, &facets, 0.1, d.fine.mesh().h()).map_err(|e| e.to_string())?;
    let lin = d.test.interpolate(|p| 0.3 - 1.7 * p[0] + 2.2 * p[1]);
    let jl = j.spmv(&lin).unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    check("ghost penalty on linears", jl < 1e-12, format!("max |J u| = {jl:.1e}"));

    // Aggregation constraints reproduce constants (rows sum to 1).
    let coarse = BackgroundMesh::unit_square(12).unwrap();
    let cd = CutDecomposition::build(&coarse, &Shape::flower([0.5, 0.5]), CutOptions::default()).unwrap();
    let mut row_err = 0.0f64;
    let mut rows = 0;
    for k in 1..=3 {
        let space = FeSpace::new(&coarse, cd.active_cells().to_vec(), k).unwrap();
        let map = aggregate(&cd, &space).map_err(|e| e.to_string())?;
        for coeffs in map.constraints().values() {
            row_err = row_err.max((coeffs.iter().map(|c| c.1).sum::<f64>() - 1.0).abs());
            rows += 1;
        }
    }
    for coeffs in agg.constraints().values() {
        row_err = row_err.max((coeffs.iter().map(|c| c.1).sum::<f64>() - 1.0).abs());
        rows += 1;
    }
    check("aggregation rows", rows > 0 && row_err < 1e-12, format!("{rows} rows, max |Σ - 1| = {row_err:.1e}"));

    // Cut quadrature area of the disk.
    let area = CutDecomposition::build(&BackgroundMesh::unit_square(50).unwrap(), &disk(), CutOptions::default())
        .unwrap()
        .area();
    let area_err = (area - std::f64::consts::PI * 0.16).abs();
    check("disk area", area_err <= 1e-3, format!("|area - 0.16π| = {area_err:.1e}"));

    // Nitsche consistency for constant data, and affinity of the Poisson residual.
    let dc = disc(10, &disk(), 2);
    let c = feinn(dc.clone(), ProblemDef::poisson(Manufactured::Constant(0.7)), 10.0, LossConfig::l2());
    let r = c.assembler.residual(&dc.trial.interpolate(|_| 0.7)).unwrap();
    let rmax = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    check("Nitsche constant data", rmax <= 1e-12, format!("max |r| = {rmax:.1e}"));
    let p = feinn(dc.clone(), ProblemDef::poisson(Manufactured::Smooth2d), 10.0, LossConfig::l2());
    let nt = dc.trial.num_dofs();
    let u: Vec<f64> = (0..nt).map(|_| rng.random::<f64>() - 0.5).collect();
    let v: Vec<f64> = (0..nt).map(|_| rng.random::<f64>() - 0.5).collect();
    let (a, b) = (1.3, -0.6);
    let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
    let res = |w: &[f64]| p.assembler.residual(w).unwrap();
    let (r0, ru, rv, rc) = (res(&vec![0.0; nt]), res(&u), res(&v), res(&combo));
    let scale = ru.iter().chain(&rv).fold(0.0f64, |m, x| m.max(x.abs()));
    let lin_err = (0..r0.len())
        .map(|i| ((rc[i] - r0[i]) - a * (ru[i] - r0[i]) - b * (rv[i] - r0[i])).abs())
        .fold(0.0f64, f64::max)
        / scale;
    check("Poisson residual linearity", lin_err < 1e-12, format!("relative defect {lin_err:.1e}"));

    // Deterministic replay of a full training run.
    let replay = || -> Result<(TrainReport, Vec<f64>), String> {
        let f = feinn(disc(8, &disk(), 2), ProblemDef::poisson(Manufactured::Smooth2d), 1e-2, LossConfig::l2());
        let mut n = net(&[2, 10, 10, 1], Activation::Tanh, false, 5, &f.disc);
        let rep = train(&f, &mut n, &lbfgs(60, 10))?;
        Ok((rep, n.params().to_vec()))
    };
    let (ra, pa) = replay()?;
    let (rb, pb) = replay()?;
    let same = ra == rb && pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits());
    check("deterministic replay", same, "two identical runs differ".into());

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "FD gradients for l1, l2, dual (ghost, aggregated) worst {worst_fd:.1e}; Gram SPD; ghost penalty on linears; \
             aggregation rows; disk area error {area_err:.1e}; Nitsche constants; linearity; replay"
        )
    } else {
        failures.join("; ")
    };
    Ok((pass, detail))
}

const CRITERIA: [(u32, &str, fn() -> Outcome); 8] = [
    (1, "interpolation h-convergence", criterion_1),
    (2, "trained accuracy vs interpolation", criterion_2),
    (3, "Nitsche parameter ordering", criterion_3),
    (4, "moving-domain robustness", criterion_4),
    (5, "dual-norm acceleration", criterion_5),
    (6, "nonlinear forward problem", criterion_6),
    (7, "inverse coefficient recovery", criterion_7),
    (8, "property suites", criterion_8),
];

fn main() {
    let selected: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (verdict, detail) = match outcome {
            Ok((true, d)) => ("PASS", d),
            Ok((false, d)) => ("FAIL", d),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if verdict == "FAIL" {
            failed.push(id);
        }
        println!("criterion {id} [{name}]: {verdict} ({secs:.1} s) {detail}");
    }
    if !failed.is_empty() {
        println!("acceptance: {} criteria failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
