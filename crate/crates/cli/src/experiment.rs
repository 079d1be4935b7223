//! Builds core objects from a resolved config.

use feinn_core::fespace::aggregate;
use feinn_core::geometry::{CutOptions, LevelSet};
use feinn_core::nn::{param_count, Activation, Mlp};
use feinn_core::training::{Feinn, LineSearch, LossConfig, Method, OptimizerOptions, TrainOptions};
use feinn_core::weakforms::{Coefficient, Manufactured, NitscheParams, NitscheScale, ProblemDef, ProblemKind};
use feinn_core::{BackgroundMesh, BoundingBox, Discretization, FactorRule, GramOperator, Point, Shape};

use crate::config::*;
use crate::CliError;

pub fn shape(g: &GeometryConfig) -> Shape {
    match *g {
        GeometryConfig::Disk { center, radius } => Shape::disk(center, radius),
        GeometryConfig::Flower { center } => Shape::flower(center),
        GeometryConfig::Halfplane { origin, normal } => Shape::HalfPlane { origin, normal },
    }
}

/// Background mesh of the config, or with `n × n` cells when given.
pub fn mesh(cfg: &ExperimentConfig, n: Option<usize>) -> Result<BackgroundMesh, CliError> {
    let [lo, hi] = cfg.mesh.bbox;
    let bbox = BoundingBox::new(lo, hi).map_err(|e| CliError::Config(e.to_string()))?;
    let (nx, ny) = n.map_or((cfg.mesh.nx, cfg.mesh.ny), |n| (n, n));
    BackgroundMesh::new(bbox, nx, ny).map_err(|e| CliError::Config(e.to_string()))
}

pub fn discretization(
    cfg: &ExperimentConfig,
    mesh: &BackgroundMesh,
    phi: &dyn LevelSet,
    k: usize,
) -> Result<Discretization, CliError> {
    let rule = match cfg.trial.refinement {
        RefinementRule::Pow2 => FactorRule::Pow2,
        RefinementRule::Iso => FactorRule::Iso,
    };
    let d = Discretization::build(mesh, phi, k, rule, CutOptions::default())?;
    if d.trial.num_dofs() == 0 {
        return Err(CliError::Config("the domain does not intersect the background mesh".into()));
    }
    Ok(d)
}

/// `1 + 9 exp(-5((x - 0.5)² + (2y - 1)²))`.
pub fn bump2d(p: Point) -> f64 {
    1.0 + 9.0 * (-5.0 * ((p[0] - 0.5).powi(2) + (2.0 * p[1] - 1.0).powi(2))).exp()
}

pub fn solution(s: SolutionConfig) -> Manufactured {
    match s {
        SolutionConfig::Smooth2d => Manufactured::Smooth2d,
        SolutionConfig::Sharp2d => Manufactured::Sharp2d,
        SolutionConfig::Nonlinear2d => Manufactured::Nonlinear2d,
        SolutionConfig::Invstate2d => Manufactured::InvState2d,
    }
}

pub fn problem(cfg: &ExperimentConfig) -> ProblemDef {
    let p = &cfg.problem;
    match p.kind {
        ProblemKindConfig::Poisson => ProblemDef::poisson(solution(p.solution)),
        ProblemKindConfig::Nonlinear => {
            let sigma = match p.sigma {
                SigmaConfig::Constant(c) => Coefficient::Constant(c),
                SigmaConfig::Field(SigmaField::Bump2d) => Coefficient::field(bump2d),
            };
            ProblemDef::nonlinear(solution(p.solution), p.beta, sigma)
        }
    }
}

/// The true coefficient `σ(p)` of a nonlinear problem.
pub fn sigma_of(problem: &ProblemDef, p: Point) -> Option<f64> {
    match &problem.kind {
        ProblemKind::Nonlinear { sigma, .. } => Some(sigma.value(p)),
        ProblemKind::Poisson => None,
    }
}

pub fn nitsche(cfg: &ExperimentConfig, gamma: f64, d: &Discretization) -> Result<NitscheParams, CliError> {
    let scale = match cfg.nitsche.scale {
        NitscheScaleConfig::Coarse => NitscheScale::Coarse,
        NitscheScaleConfig::Refined => NitscheScale::Refined,
    };
    Ok(NitscheParams::for_discretization(gamma, d, scale)?)
}

pub fn loss(cfg: &ExperimentConfig, d: &Discretization) -> Result<LossConfig, CliError> {
    match (cfg.loss.kind, cfg.loss.test_space) {
        (LossKindConfig::L1, TestSpaceConfig::Std) => Ok(LossConfig::l1()),
        (LossKindConfig::L2, TestSpaceConfig::Std) => Ok(LossConfig::l2()),
        (LossKindConfig::Dual, TestSpaceConfig::Std) => {
            Ok(LossConfig::dual(GramOperator::ghost(&d.test, &d.fine, cfg.ghost.gamma)?))
        }
        (LossKindConfig::Dual, TestSpaceConfig::Ag) => {
            let agg = aggregate(&d.fine, &d.test)?;
            Ok(LossConfig::dual(GramOperator::aggregated(&d.test, &d.fine, &agg)?))
        }
        (_, TestSpaceConfig::Ag) => {
            Err(CliError::Config("loss.test_space = \"ag\" requires loss.kind = \"dual\"".into()))
        }
    }
}

pub fn feinn(cfg: &ExperimentConfig, d: Discretization, gamma: f64) -> Result<Feinn, CliError> {
    let nit = nitsche(cfg, gamma, &d)?;
    let loss = loss(cfg, &d)?;
    Ok(Feinn::new(d, problem(cfg), nit, loss)?)
}

pub fn activation(a: ActivationConfig) -> Activation {
    match a {
        ActivationConfig::Tanh => Activation::Tanh,
        ActivationConfig::Softplus => Activation::Softplus,
    }
}

/// A freshly initialised network with the configured input normalisation.
pub fn network(
    cfg: &ExperimentConfig,
    d: &Discretization,
    arch: &[usize],
    act: ActivationConfig,
    rectify: bool,
    seed: u64,
) -> Result<Mlp, CliError> {
    let net = Mlp::init(arch, activation(act), rectify, seed)?;
    let net = match cfg.nn.input_box {
        InputBoxConfig::Domain => {
            let (lo, hi) = d.fine.bounds();
            net.with_input_box(lo, hi)?
        }
        InputBoxConfig::Mesh => {
            let [lo, hi] = cfg.mesh.bbox;
            net.with_input_box(lo, hi)?
        }
        InputBoxConfig::None => net,
    };
    Ok(net)
}

pub fn forward_network(cfg: &ExperimentConfig, d: &Discretization) -> Result<Mlp, CliError> {
    network(cfg, d, &cfg.nn.arch, cfg.nn.activation, cfg.nn.rect, cfg.nn.seed)
}

/// Optimizer settings for a problem with `n_params` unknowns.
pub fn optimizer(cfg: &ExperimentConfig, n_params: usize) -> OptimizerOptions {
    let o = &cfg.optimizer;
    let method = match o.method {
        MethodConfig::Bfgs => Method::Bfgs,
        MethodConfig::Lbfgs => Method::Lbfgs { memory: o.memory },
        MethodConfig::Auto if n_params <= 1000 => Method::Bfgs,
        MethodConfig::Auto => Method::Lbfgs { memory: o.memory },
    };
    let line_search = match o.line_search {
        LineSearchConfig::StrongWolfe => LineSearch::StrongWolfe,
        LineSearchConfig::WeakWolfe => LineSearch::WeakWolfe,
    };
    OptimizerOptions { method, line_search, max_iters: o.iters, grad_tol: o.tol, ..OptimizerOptions::default() }
}

pub fn train_options(cfg: &ExperimentConfig) -> TrainOptions {
    TrainOptions {
        optimizer: optimizer(cfg, param_count(&cfg.nn.arch)),
        checkpoint_stride: cfg.output.checkpoint_stride,
        network_errors: cfg.output.network_errors,
        wall_clock: cfg.output.wall_clock,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!("[geometry]\nkind = \"disk\"\nradius = 0.3\n{extra}")).unwrap()
    }

    #[test]
    fn auto_method_switches_on_size() {
        let c =
            cfg("[optimizer]\nmethod = \"auto\"\nmemory = 7\niters = 10\ntol = 0.0\nline_search = \"weak-wolfe\"\n");
        assert_eq!(optimizer(&c, 1000).method, Method::Bfgs);
        assert_eq!(optimizer(&c, 1001).method, Method::Lbfgs { memory: 7 });
        assert_eq!(optimizer(&c, 5).line_search, LineSearch::WeakWolfe);
    }

    #[test]
    fn aggregated_space_needs_dual_loss() {
        let c =
            cfg("[mesh]\nbox = [[0.0, 0.0], [1.0, 1.0]]\nnx = 6\nny = 6\n[loss]\nkind = \"l2\"\ntest_space = \"ag\"\n");
        let m = mesh(&c, None).unwrap();
        let d = discretization(&c, &m, &shape(&c.geometry), 1).unwrap();
        assert_eq!(loss(&c, &d).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn domain_input_box_covers_the_domain() {
        let c = cfg("[mesh]\nbox = [[0.0, 0.0], [1.0, 1.0]]\nnx = 8\nny = 8\n");
        let m = mesh(&c, None).unwrap();
        let d = discretization(&c, &m, &shape(&c.geometry), 1).unwrap();
        let net = forward_network(&c, &d).unwrap();
        let (scale, _) = net.input_map();
        // The disk spans 0.6, so the map scales by about 2 / 0.6.
        assert!((scale[0] - 2.0 / 0.6).abs() < 0.2, "{scale:?}");
    }

    #[test]
    fn empty_domain_is_a_config_error() {
        let c = ExperimentConfig::from_toml(
            "[geometry]\nkind = \"disk\"\ncenter = [5.0, 5.0]\nradius = 0.1\n[mesh]\nbox = [[0.0, 0.0], [1.0, 1.0]]\nnx = 4\nny = 4\n",
        )
        .unwrap();
        let m = mesh(&c, None).unwrap();
        let err = discretization(&c, &m, &shape(&c.geometry), 1).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }
}
