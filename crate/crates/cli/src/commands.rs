//! The `run`, `convergence`, `moving-domain` and `inverse` commands.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use feinn_core::geometry::LevelSet;
use feinn_core::nn::Mlp;
use feinn_core::training::{
    train_forward, train_inverse, Feinn, InverseProblem, InverseSchedule, ObservationSet, TrainReport,
};
use feinn_core::weakforms::ErrorNorms;
use feinn_core::{Point, Shape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GeometryConfig, ProblemKindConfig, RegionConfig};
use crate::experiment as ex;
use crate::output::{ensure_dir, value_tag, write_csv, write_snapshot, Cell};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Convergence,
    MovingDomain,
    Inverse,
}

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker threads for sweeps; `None` uses one per core.
    pub jobs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.nn.seed = seed;
        }
    }
}

/// Loads, overrides and executes; returns the output directory.
pub fn run_command(cmd: Command, config: &Path, overrides: &Overrides) -> Result<PathBuf, CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(overrides.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| execute(cmd, &cfg))?;
    Ok(cfg.output.dir.clone())
}

/// Executes a resolved config, writing every output below `cfg.output.dir`.
pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    std::fs::write(dir.join("config.resolved.toml"), cfg.to_toml())?;
    match cmd {
        Command::Run => run(cfg).map(|_| ()),
        Command::Convergence => convergence(cfg).map(|_| ()),
        Command::MovingDomain => moving_domain(cfg).map(|_| ()),
        Command::Inverse => inverse(cfg).map(|_| ()),
    }
}

pub const REPORT_HEADER: [&str; 8] =
    ["iter", "loss", "grad_inf", "l2_err_interp", "h1_err_interp", "l2_err_nn", "h1_err_nn", "wall_s"];

fn report_rows(report: &TrainReport) -> Vec<Vec<Cell>> {
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.iter.into(),
                r.loss.into(),
                r.grad_inf.into(),
                r.interp.map(|e| e.l2).into(),
                r.interp.map(|e| e.h1).into(),
                r.network.map(|e| e.l2).into(),
                r.network.map(|e| e.h1).into(),
                r.wall_s.into(),
            ]
        })
        .collect()
}

/// Outcome of one forward training run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub gamma: f64,
    pub baseline: ErrorNorms,
    pub report: TrainReport,
    pub final_errors: ErrorNorms,
}

fn train_one(cfg: &ExperimentConfig, feinn: &Feinn) -> Result<(Mlp, TrainReport), CliError> {
    let mut net = ex::forward_network(cfg, &feinn.disc)?;
    let report = train_forward(feinn, &mut net, &ex::train_options(cfg), |_| ControlFlow::Continue(()))?;
    Ok((net, report))
}

/// Trains one network per Nitsche parameter.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>, CliError> {
    let shape = ex::shape(&cfg.geometry);
    let mesh = ex::mesh(cfg, None)?;
    let disc = ex::discretization(cfg, &mesh, &shape, cfg.trial.order)?;
    let gammas = cfg.nitsche.gamma.values();
    let sweep = gammas.len() > 1;
    let dir = &cfg.output.dir;
    let outcomes: Vec<RunOutcome> = gammas
        .par_iter()
        .map(|&gamma| -> Result<RunOutcome, CliError> {
            let feinn = ex::feinn(cfg, disc.clone(), gamma)?;
            let baseline = feinn.interpolation_baseline()?;
            let (net, report) = train_one(cfg, &feinn)?;
            let final_errors = feinn.interpolant_errors(&net)?;
            let suffix = if sweep { format!("_gamma_{}", value_tag(gamma)) } else { String::new() };
            write_csv(&dir.join(format!("report{suffix}.csv")), &REPORT_HEADER, &report_rows(&report))?;
            write_snapshot(&dir.join(format!("params{suffix}.txt")), &net)?;
            Ok(RunOutcome { gamma, baseline, report, final_errors })
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<Vec<Cell>> = outcomes
        .iter()
        .map(|o| {
            vec![
                o.gamma.into(),
                o.report.iterations().into(),
                o.report.rows[0].loss.into(),
                o.report.last().loss.into(),
                o.baseline.l2.into(),
                o.baseline.h1.into(),
                o.final_errors.l2.into(),
                o.final_errors.h1.into(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("summary.csv"),
        &["gamma", "iters", "loss_initial", "loss_final", "l2_pi_exact", "h1_pi_exact", "l2_pi_nn", "h1_pi_nn"],
        &rows,
    )?;
    Ok(outcomes)
}

/// One point of a mesh or order study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub h: f64,
    pub k: usize,
    pub pi_exact: ErrorNorms,
    pub pi_nn: Option<ErrorNorms>,
    pub nn: Option<ErrorNorms>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Errors over every (size, order) pair, plus fitted rates per order.
pub fn convergence(
    cfg: &ExperimentConfig,
) -> Result<(Vec<ConvergencePoint>, Vec<(usize, &'static str, f64)>), CliError> {
    let shape = ex::shape(&cfg.geometry);
    let sizes = cfg.mesh.sizes.clone().unwrap_or_else(|| vec![cfg.mesh.nx]);
    let orders = cfg.trial.orders.clone().unwrap_or_else(|| vec![cfg.trial.order]);
    let gamma = cfg.nitsche.gamma.values()[0];
    let jobs: Vec<(usize, usize)> = orders.iter().flat_map(|&k| sizes.iter().map(move |&n| (k, n))).collect();
    let points: Vec<ConvergencePoint> = jobs
        .par_iter()
        .map(|&(k, n)| -> Result<ConvergencePoint, CliError> {
            let mesh = ex::mesh(cfg, Some(n))?;
            let h = mesh.h();
            let disc = ex::discretization(cfg, &mesh, &shape, k)?;
            let feinn = ex::feinn(cfg, disc, gamma)?;
            let pi_exact = feinn.interpolation_baseline()?;
            let (pi_nn, nn) = if cfg.study.train {
                let (net, _) = train_one(cfg, &feinn)?;
                (Some(feinn.interpolant_errors(&net)?), Some(feinn.network_errors(&net)?))
            } else {
                (None, None)
            };
            Ok(ConvergencePoint { h, k, pi_exact, pi_nn, nn })
        })
        .collect::<Result<_, _>>()?;
    let dir = &cfg.output.dir;
    let rows: Vec<Vec<Cell>> = points
        .iter()
        .map(|p| {
            vec![
                p.h.into(),
                p.k.into(),
                p.pi_exact.l2.into(),
                p.pi_exact.h1.into(),
                p.pi_nn.map(|e| e.l2).into(),
                p.pi_nn.map(|e| e.h1).into(),
                p.nn.map(|e| e.l2).into(),
                p.nn.map(|e| e.h1).into(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("convergence.csv"),
        &["h", "k", "l2_pi_exact", "h1_pi_exact", "l2_pi_nn", "h1_pi_nn", "l2_nn", "h1_nn"],
        &rows,
    )?;
    type Pick = fn(&ConvergencePoint) -> Option<f64>;
    let quantities: [(&'static str, Pick); 6] = [
        ("l2_pi_exact", |p| Some(p.pi_exact.l2)),
        ("h1_pi_exact", |p| Some(p.pi_exact.h1)),
        ("l2_pi_nn", |p| p.pi_nn.map(|e| e.l2)),
        ("h1_pi_nn", |p| p.pi_nn.map(|e| e.h1)),
        ("l2_nn", |p| p.nn.map(|e| e.l2)),
        ("h1_nn", |p| p.nn.map(|e| e.h1)),
    ];
    let mut slopes = Vec::new();
    for &k in &orders {
        let at_k: Vec<&ConvergencePoint> = points.iter().filter(|p| p.k == k).collect();
        let h: Vec<f64> = at_k.iter().map(|p| p.h).collect();
        for (name, pick) in quantities {
            let y: Option<Vec<f64>> = at_k.iter().map(|p| pick(p)).collect();
            if let Some(s) = y.and_then(|y| log_slope(&h, &y)) {
                slopes.push((k, name, s));
            }
        }
    }
    // The quantity column is text, so this file bypasses `write_csv`.
    let mut w = csv::Writer::from_path(dir.join("slopes.csv"))?;
    w.write_record(["k", "quantity", "slope"])?;
    for &(k, name, s) in &slopes {
        w.write_record([k.to_string(), name.to_string(), format!("{s:e}")])?;
    }
    w.flush()?;
    Ok((points, slopes))
}

/// One disk position of a moving-domain study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingPoint {
    pub x: f64,
    pub pi_exact: ErrorNorms,
    pub pi_nn: Option<ErrorNorms>,
    pub loss_initial: Option<f64>,
    pub loss_final: Option<f64>,
}

/// `max / min` of a sequence of positive values.
pub fn spread(v: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = v.into_iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
    hi / lo
}

/// Moves a disk along the diagonal, training from the same seed each time.
pub fn moving_domain(cfg: &ExperimentConfig) -> Result<Vec<MovingPoint>, CliError> {
    let GeometryConfig::Disk { radius, .. } = cfg.geometry else {
        return Err(CliError::Config("moving-domain needs geometry.kind = \"disk\"".into()));
    };
    let centers = cfg.centers()?;
    let mesh = ex::mesh(cfg, None)?;
    let gamma = cfg.nitsche.gamma.values()[0];
    let points: Vec<MovingPoint> = centers
        .par_iter()
        .map(|&x| -> Result<MovingPoint, CliError> {
            let shape = Shape::disk([x, x], radius);
            let disc = ex::discretization(cfg, &mesh, &shape, cfg.trial.order)?;
            let feinn = ex::feinn(cfg, disc, gamma)?;
            let pi_exact = feinn.interpolation_baseline()?;
            if !cfg.study.train {
                return Ok(MovingPoint { x, pi_exact, pi_nn: None, loss_initial: None, loss_final: None });
            }
            let (net, report) = train_one(cfg, &feinn)?;
            Ok(MovingPoint {
                x,
                pi_exact,
                pi_nn: Some(feinn.interpolant_errors(&net)?),
                loss_initial: Some(report.rows[0].loss),
                loss_final: Some(report.last().loss),
            })
        })
        .collect::<Result<_, _>>()?;
    let dir = &cfg.output.dir;
    let rows: Vec<Vec<Cell>> = points
        .iter()
        .map(|p| {
            vec![
                p.x.into(),
                p.pi_exact.l2.into(),
                p.pi_exact.h1.into(),
                p.pi_nn.map(|e| e.l2).into(),
                p.pi_nn.map(|e| e.h1).into(),
                p.loss_initial.into(),
                p.loss_final.into(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("moving.csv"),
        &["x", "l2_pi_exact", "h1_pi_exact", "l2_pi_nn", "h1_pi_nn", "loss_initial", "loss_final"],
        &rows,
    )?;
    let mut w = csv::Writer::from_path(dir.join("moving_summary.csv"))?;
    w.write_record(["quantity", "max_over_min"])?;
    w.write_record(["h1_pi_exact".to_string(), format!("{:e}", spread(points.iter().map(|p| p.pi_exact.h1)))])?;
    if cfg.study.train {
        w.write_record([
            "h1_pi_nn".to_string(),
            format!("{:e}", spread(points.iter().filter_map(|p| p.pi_nn.map(|e| e.h1)))),
        ])?;
    }
    w.flush()?;
    Ok(points)
}

fn in_region(region: &RegionConfig, p: Point) -> bool {
    match *region {
        RegionConfig::All => true,
        RegionConfig::Disk { center, radius } => {
            (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) < radius * radius
        }
        RegionConfig::Box { lo, hi } => p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1],
    }
}

/// Result of an identification run.
#[derive(Debug, Clone)]
pub struct InverseOutcome {
    pub report: feinn_core::training::InverseReport,
    pub observations: usize,
    pub state: ErrorNorms,
    pub sigma_l2: f64,
    pub u_net: Mlp,
    pub sigma_net: Mlp,
}

/// Identifies `σ` from observations of the state.
pub fn inverse(cfg: &ExperimentConfig) -> Result<InverseOutcome, CliError> {
    let Some(icfg) = &cfg.inverse else {
        return Err(CliError::Config("the inverse command needs an [inverse] table".into()));
    };
    if cfg.problem.kind != ProblemKindConfig::Nonlinear {
        return Err(CliError::Config("the inverse command needs problem.kind = \"nonlinear\"".into()));
    }
    let shape = ex::shape(&cfg.geometry);
    let mesh = ex::mesh(cfg, None)?;
    let disc = ex::discretization(cfg, &mesh, &shape, cfg.trial.order)?;
    let problem = ex::problem(cfg);
    let nitsche = ex::nitsche(cfg, cfg.nitsche.gamma.values()[0], &disc)?;
    let points: Vec<Point> =
        disc.trial.nodes().iter().copied().filter(|&p| shape.value(p) < 0.0 && in_region(&icfg.region, p)).collect();
    if points.is_empty() {
        return Err(CliError::Config("inverse.region contains no trial nodes inside the domain".into()));
    }
    let mut values: Vec<f64> = points.iter().map(|&p| problem.solution.value(p)).collect();
    if icfg.noise > 0.0 {
        let normal = Normal::new(0.0, icfg.noise).map_err(|e| CliError::Config(format!("inverse.noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.nn.seed);
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    let obs = ObservationSet::new(points, values, &shape)?;
    let n_obs = obs.len();
    let dir = &cfg.output.dir;
    let obs_rows: Vec<Vec<Cell>> =
        obs.points().iter().zip(obs.values()).map(|(p, &v)| vec![p[0].into(), p[1].into(), v.into()]).collect();
    write_csv(&dir.join("observations.csv"), &["x", "y", "value"], &obs_rows)?;

    let mut u_net = ex::forward_network(cfg, &disc)?;
    let sigma_seed = icfg.sigma_seed.unwrap_or(cfg.nn.seed.wrapping_add(1));
    let mut sigma_net = ex::network(cfg, &disc, &icfg.sigma_arch, icfg.sigma_activation, true, sigma_seed)?;
    let inv = InverseProblem::new(disc, problem, nitsche, obs)?;
    let schedule = InverseSchedule::new(icfg.step1, icfg.step2, icfg.step3.clone())?;
    let n_params = u_net.num_params() + sigma_net.num_params();
    let opts = ex::optimizer(cfg, n_params);
    let report = train_inverse(
        &inv,
        &mut u_net,
        &mut sigma_net,
        &schedule,
        &opts,
        cfg.output.checkpoint_stride,
        cfg.output.wall_clock,
    )?;
    let (state, sigma_l2) = inv.relative_errors(&u_net, &sigma_net)?;

    let rows: Vec<Vec<Cell>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.iter.into(),
                (r.step as usize).into(),
                r.alpha.into(),
                r.loss.into(),
                if r.grad_inf.is_nan() { Cell::Missing } else { r.grad_inf.into() },
                r.state.map(|e| e.l2).into(),
                r.state.map(|e| e.h1).into(),
                r.sigma_l2.into(),
                r.wall_s.into(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("history.csv"),
        &["iter", "step", "alpha", "loss", "grad_inf", "l2_rel_state", "h1_rel_state", "l2_rel_sigma", "wall_s"],
        &rows,
    )?;
    write_fields(cfg, &shape, &inv, &u_net, &sigma_net)?;
    write_snapshot(&dir.join("u_net.txt"), &u_net)?;
    write_snapshot(&dir.join("sigma_net.txt"), &sigma_net)?;
    Ok(InverseOutcome { report, observations: n_obs, state, sigma_l2, u_net, sigma_net })
}

/// Samples both networks and the true fields on a uniform grid over the
/// mesh box, keeping the points inside the domain.
fn write_fields(
    cfg: &ExperimentConfig,
    shape: &Shape,
    inv: &InverseProblem,
    u: &Mlp,
    sigma: &Mlp,
) -> Result<(), CliError> {
    let [lo, hi] = cfg.mesh.bbox;
    let n = cfg.output.grid;
    let mut rows = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let t = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
            let p = [lo[0] + t[0] * (hi[0] - lo[0]), lo[1] + t[1] * (hi[1] - lo[1])];
            if shape.value(p) >= 0.0 {
                continue;
            }
            rows.push(vec![
                p[0].into(),
                p[1].into(),
                inv.problem.solution.value(p).into(),
                u.eval(p).into(),
                ex::sigma_of(&inv.problem, p).into(),
                sigma.eval(p).into(),
            ]);
        }
    }
    write_csv(&cfg.output.dir.join("fields.csv"), &["x", "y", "u_exact", "u_nn", "sigma_exact", "sigma_nn"], &rows)
}
