//! Shared fixtures for the benchmarks.

use feinn_core::geometry::CutOptions;
use feinn_core::nn::{Activation, Mlp};
use feinn_core::training::{Feinn, LossConfig};
use feinn_core::weakforms::{GramOperator, Manufactured, NitscheParams, NitscheScale, ProblemDef};
use feinn_core::{BackgroundMesh, Discretization, FactorRule, Shape};

/// Disk of radius 0.4 on an `n × n` unit-square mesh with `Q_k` trial space.
pub fn disk_discretization(n: usize, k: usize) -> Discretization {
    let mesh = BackgroundMesh::unit_square(n).expect("valid mesh");
    Discretization::build(&mesh, &Shape::disk([0.5, 0.5], 0.4), k, FactorRule::Pow2, CutOptions::default())
        .expect("disk discretises")
}

/// Smooth Poisson problem with the given loss; `dual` uses the ghost-penalised
/// Gram matrix.
pub fn poisson(n: usize, k: usize, dual: bool) -> Feinn {
    let d = disk_discretization(n, k);
    let nit = NitscheParams::for_discretization(1e-2, &d, NitscheScale::Coarse).expect("valid gamma");
    let loss = if dual {
        LossConfig::dual(GramOperator::ghost(&d.test, &d.fine, 0.1).expect("SPD Gram"))
    } else {
        LossConfig::l2()
    };
    Feinn::new(d, ProblemDef::poisson(Manufactured::Smooth2d), nit, loss).expect("consistent problem")
}

/// The default `(2, 20, 20, 20, 1)` tanh network.
pub fn network(f: &Feinn) -> Mlp {
    let (lo, hi) = f.disc.fine.bounds();
    Mlp::init(&[2, 20, 20, 20, 1], Activation::Tanh, false, 1)
        .and_then(|n| n.with_input_box(lo, hi))
        .expect("valid architecture")
}
