//! `L²` and `H¹` errors over the cut domain.

use super::AssemblyError;
use crate::fespace::Discretization;
use crate::geometry::CutDecomposition;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub l2: f64,
    /// Full `H¹` norm (value and gradient parts).
    pub h1: f64,
}

/// Errors of `approx` against `exact` on `Ω_h`.
///
/// `approx` receives the active cell the point belongs to, which lets finite
/// element functions skip point location. Both closures return the value and
/// the gradient.
pub fn error_norms(
    decomp: &CutDecomposition,
    degree: usize,
    approx: impl Fn(usize, Point) -> (f64, Point),
    exact: impl Fn(Point) -> (f64, Point),
) -> Result<ErrorNorms, AssemblyError> {
    let (mut l2, mut semi) = (0.0, 0.0);
    for &c in decomp.active_cells() {
        let q = decomp.volume_quadrature(c, degree)?;
        for (&p, &w) in q.points.iter().zip(&q.weights) {
            let (u, du) = approx(c, p);
            let (e, de) = exact(p);
            l2 += w * (e - u) * (e - u);
            semi += w * ((de[0] - du[0]).powi(2) + (de[1] - du[1]).powi(2));
        }
    }
    Ok(ErrorNorms { l2: l2.sqrt(), h1: (l2 + semi).sqrt() })
}

/// Errors of the trial-space function with nodal values `coeffs`, integrated
/// on the refined cut mesh at degree `2k + 3`.
pub fn fe_error_norms(
    disc: &Discretization,
    coeffs: &[f64],
    exact: impl Fn(Point) -> (f64, Point),
) -> Result<ErrorNorms, AssemblyError> {
    if coeffs.len() != disc.trial.num_dofs() {
        return Err(AssemblyError::DimensionMismatch { expected: disc.trial.num_dofs(), got: coeffs.len() });
    }
    error_norms(&disc.fine, 2 * disc.order + 3, |c, p| disc.trial.evaluate_in_cell(disc.parent(c), coeffs, p), exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::FactorRule;
    use crate::geometry::{CutOptions, Shape};
    use crate::mesh::BackgroundMesh;
    use crate::weakforms::Manufactured;

    fn disc(n: usize, k: usize) -> Discretization {
        let m = BackgroundMesh::unit_square(n).unwrap();
        Discretization::build(&m, &Shape::disk([0.5, 0.5], 0.4), k, FactorRule::Pow2, CutOptions::default()).unwrap()
    }

    #[test]
    fn identity_and_constant_shift() {
        let d = disc(10, 2);
        let u = Manufactured::Smooth2d;
        let e = error_norms(&d.fine, 7, |_, p| u.value_grad(p), |p| u.value_grad(p)).unwrap();
        assert!(e.l2 <= 1e-12 && e.h1 <= 1e-12);
        let c = 0.25;
        let e = error_norms(
            &d.fine,
            7,
            |_, p| {
                let (v, g) = u.value_grad(p);
                (v + c, g)
            },
            |p| u.value_grad(p),
        )
        .unwrap();
        assert!((e.l2 - c * d.fine.area().sqrt()).abs() < 1e-12);
        assert!((e.h1 - e.l2).abs() < 1e-12);
    }

    #[test]
    fn interpolation_rates_for_q2() {
        let u = Manufactured::Smooth2d;
        let errs: Vec<ErrorNorms> = [20, 40]
            .iter()
            .map(|&n| {
                let d = disc(n, 2);
                fe_error_norms(&d, &d.trial.interpolate(|p| u.value(p)), |p| u.value_grad(p)).unwrap()
            })
            .collect();
        let (rl2, rh1) = (errs[0].l2 / errs[1].l2, errs[0].h1 / errs[1].h1);
        assert!((rl2 - 8.0).abs() <= 0.2 * 8.0, "{rl2}");
        assert!((rh1 - 4.0).abs() <= 0.2 * 4.0, "{rh1}");
    }
}
