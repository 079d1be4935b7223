//! Unfitted finite element interpolated neural networks (FEINNs) in 2D.
//!
//! A neural network is interpolated onto a high-order Lagrangian trial space
//! built on the active cells of a Cartesian background mesh that does not
//! conform to the physical domain. The network is trained so that the
//! interpolant minimises an algebraic or discrete dual norm of the weak Nitsche
//! residual, tested against a linear space on a refined, cut mesh.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: Cartesian background meshes, refinement and facet topology.
//! - [`geometry`]: level sets, cell classification, cut-cell sub-triangulation
//!   and quadrature.
//! - [`fespace`]: Lagrangian trial/test spaces, aggregation constraints.
//! - [`weakforms`]: Nitsche residuals, Jacobians, Gram and ghost-penalty
//!   matrices, manufactured solutions and error norms.
//! - [`linalg`]: sparse matrices and an envelope Cholesky factorisation.
//! - [`nn`]: fully-connected networks with reverse-mode parameter gradients.
//! - [`training`]: losses, quasi-Newton optimisers and the forward/inverse
//!   training drivers.

pub mod fespace;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod mesh;
pub mod nn;
pub mod training;
pub mod weakforms;

mod error;

pub use error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

pub use fespace::{AggregationMap, Discretization, FactorRule, FeSpace, InterpolationNodes};
pub use geometry::{CellClass, CutDecomposition, LevelSet, QuadratureRule, Shape};
pub use jet::Jet;
pub use linalg::{CholeskyFactor, CsrMatrix};
pub use mesh::{BackgroundMesh, BoundingBox, Facet};
pub use nn::{Activation, Mlp};
pub use training::{Feinn, LossConfig, LossKind, ObservationSet, OptimizerOptions, TrainReport};
pub use weakforms::{GramOperator, Manufactured, NitscheParams, ProblemDef, ProblemKind};
