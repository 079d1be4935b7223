//! Nitsche weak forms, test-space Gram operators and error norms.
//!
//! Two model problems are supported on `Ω = {φ < 0}` with `u = g` on `∂Ω`:
//!
//! - Poisson: `-Δu = f`;
//! - nonlinear: `-Δu + β·∇u + σ e^{-u²} = f`.
//!
//! Source and boundary data are derived from a manufactured solution with
//! [`Jet`] arithmetic, so `f` and `g` are consistent with `u*` to rounding.

mod assembly;
mod gram;
mod norms;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use assembly::{assemble_jacobian, assemble_residual, Assembler};
pub use gram::{assemble_ghost_penalty, assemble_h1_gram, GramOperator, Riesz, Stabilization};
pub use norms::{error_norms, fe_error_norms, ErrorNorms};

use crate::fespace::Discretization;
use crate::geometry::GeometryError;
use crate::jet::Jet;
use crate::linalg::LinalgError;
use crate::Point;

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Nitsche coefficient must be positive, got {0}")]
    BadGamma(f64),
    #[error("mesh size must be positive, got {0}")]
    BadMeshSize(f64),
    #[error("facet between cells {0} and {1} is not shared by two active cells")]
    InactiveFacet(usize, usize),
    #[error("Gram matrix is not SPD: {0}")]
    GramNotSpd(LinalgError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

type JetFn = Arc<dyn Fn(Jet, Jet) -> Jet + Send + Sync>;

/// Smooth functions with exact derivatives, used as manufactured solutions.
#[derive(Clone)]
pub enum Manufactured {
    /// `sin(3.2x(x−y))cos(x+4.3y) + sin(4.6(x+2y))cos(2.6(y−2x))`
    Smooth2d,
    /// `sin(3.2x(x−y))(5e^{−100((x−0.5)²+(y−0.5)²)} + 1)`
    Sharp2d,
    /// `cos(π(3x+y)) / (1+(x+2y)²)`
    Nonlinear2d,
    /// `sin(πx)sin(πy)`
    InvState2d,
    Constant(f64),
    Custom(JetFn),
}

impl fmt::Debug for Manufactured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manufactured::Constant(c) => write!(f, "Constant({c})"),
            Manufactured::Custom(_) => write!(f, "Custom"),
            other => write!(f, "{}", other.name()),
        }
    }
}

impl Manufactured {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "smooth2d" => Manufactured::Smooth2d,
            "sharp2d" => Manufactured::Sharp2d,
            "nonlinear2d" => Manufactured::Nonlinear2d,
            "invstate2d" => Manufactured::InvState2d,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Manufactured::Smooth2d => "smooth2d",
            Manufactured::Sharp2d => "sharp2d",
            Manufactured::Nonlinear2d => "nonlinear2d",
            Manufactured::InvState2d => "invstate2d",
            Manufactured::Constant(_) => "constant",
            Manufactured::Custom(_) => "custom",
        }
    }

    pub fn custom(f: impl Fn(Jet, Jet) -> Jet + Send + Sync + 'static) -> Self {
        Manufactured::Custom(Arc::new(f))
    }

    /// Value, gradient and Hessian at `p`.
    pub fn eval(&self, p: Point) -> Jet {
        let (x, y) = Jet::vars(p);
        use std::f64::consts::PI;
        match self {
            Manufactured::Smooth2d => {
                (3.2 * x * (x - y)).sin() * (x + 4.3 * y).cos()
                    + (4.6 * (x + 2.0 * y)).sin() * (2.6 * (y - 2.0 * x)).cos()
            }
            Manufactured::Sharp2d => {
                let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
                (3.2 * x * (x - y)).sin() * (5.0 * (-100.0 * r2).exp() + 1.0)
            }
            Manufactured::Nonlinear2d => (PI * (3.0 * x + y)).cos() / (1.0 + (x + 2.0 * y).powi(2)),
            Manufactured::InvState2d => (PI * x).sin() * (PI * y).sin(),
            Manufactured::Constant(c) => Jet::constant(*c),
            Manufactured::Custom(f) => f(x, y),
        }
    }

    pub fn value(&self, p: Point) -> f64 {
        self.eval(p).v
    }

    /// Value and gradient at `p`.
    pub fn value_grad(&self, p: Point) -> (f64, Point) {
        let j = self.eval(p);
        (j.v, j.g)
    }
}

/// Reaction amplitude `σ` of the nonlinear problem.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Field(_) => write!(f, "Field"),
        }
    }
}

impl Coefficient {
    pub fn field(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Field(Arc::new(f))
    }

    pub fn value(&self, p: Point) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f(p),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ProblemKind {
    Poisson,
    Nonlinear { beta: Point, sigma: Coefficient },
}

/// A model problem together with the manufactured solution defining its data.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    pub kind: ProblemKind,
    pub solution: Manufactured,
}

impl ProblemDef {
    pub fn poisson(solution: Manufactured) -> Self {
        ProblemDef { kind: ProblemKind::Poisson, solution }
    }

    pub fn nonlinear(solution: Manufactured, beta: Point, sigma: Coefficient) -> Self {
        ProblemDef { kind: ProblemKind::Nonlinear { beta, sigma }, solution }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, ProblemKind::Poisson)
    }

    /// Right-hand side `f` at `p`.
    pub fn source(&self, p: Point) -> f64 {
        let u = self.solution.eval(p);
        match &self.kind {
            ProblemKind::Poisson => -u.laplacian(),
            ProblemKind::Nonlinear { beta, sigma } => {
                -u.laplacian() + beta[0] * u.g[0] + beta[1] * u.g[1] + sigma.value(p) * (-u.v * u.v).exp()
            }
        }
    }

    /// Dirichlet data `g` at `p`.
    pub fn dirichlet(&self, p: Point) -> f64 {
        self.solution.value(p)
    }
}

/// Mesh size used in the Nitsche penalty `γ/h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NitscheScale {
    /// Size of the coarse (trial) mesh.
    #[default]
    Coarse,
    /// Size of the refined (integration) mesh.
    Refined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NitscheParams {
    pub gamma: f64,
    pub h: f64,
}

impl NitscheParams {
    pub fn new(gamma: f64, h: f64) -> Result<Self, AssemblyError> {
        if !(gamma > 0.0) {
            return Err(AssemblyError::BadGamma(gamma));
        }
        if !(h > 0.0) {
            return Err(AssemblyError::BadMeshSize(h));
        }
        Ok(NitscheParams { gamma, h })
    }

    pub fn for_discretization(gamma: f64, disc: &Discretization, scale: NitscheScale) -> Result<Self, AssemblyError> {
        let h = match scale {
            NitscheScale::Coarse => disc.coarse().h(),
            NitscheScale::Refined => disc.fine.mesh().h(),
        };
        Self::new(gamma, h)
    }

    pub fn penalty(&self) -> f64 {
        self.gamma / self.h
    }
}
