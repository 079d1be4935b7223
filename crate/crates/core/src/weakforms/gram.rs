//! Test-space Gram operators for the discrete dual norm.

use std::collections::BTreeSet;

use super::AssemblyError;
use crate::fespace::{AggregationMap, FeSpace};
use crate::geometry::quadrature::segment_rule;
use crate::geometry::CutDecomposition;
use crate::linalg::{dot, CholeskyFactor, CsrMatrix};
use crate::mesh::{skeleton_faces_near_boundary, Facet};

/// `∫_Ω ∇φ_i·∇φ_j + φ_i φ_j` over the cut domain.
pub fn assemble_h1_gram(space: &FeSpace, decomp: &CutDecomposition) -> Result<CsrMatrix, AssemblyError> {
    let n = space.dofs_per_cell();
    let degree = 2 * space.order() + 2;
    let (mut v, mut g) = (vec![0.0; n], vec![[0.0; 2]; n]);
    let mut local = vec![0.0; n * n];
    let mut t = Vec::new();
    for &c in space.active_cells() {
        local.iter_mut().for_each(|x| *x = 0.0);
        let q = decomp.volume_quadrature(c, degree)?;
        for (&p, &w) in q.points.iter().zip(&q.weights) {
            space.shape(c, p, &mut v, &mut g);
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + v[i] * v[j]);
                }
            }
        }
        let dofs = space.cell_dofs(c);
        for i in 0..n {
            for j in 0..n {
                t.push((dofs[i], dofs[j], local[i * n + j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(space.num_dofs(), space.num_dofs(), &t))
}

/// `j(u, v) = Σ_F γ_g h ∫_F ⟦∂_n u⟧ ⟦∂_n v⟧` over the given facets.
///
/// The jump is taken along the facet normal, from `cells[0]` to `cells[1]`.
pub fn assemble_ghost_penalty(
    space: &FeSpace,
    facets: &[Facet],
    gamma_g: f64,
    h: f64,
) -> Result<CsrMatrix, AssemblyError> {
    let n = space.dofs_per_cell();
    let mesh = space.mesh();
    let (mut v, mut g) = (vec![0.0; n], vec![[0.0; 2]; n]);
    let mut jump = vec![0.0; 2 * n];
    let mut dofs = vec![0usize; 2 * n];
    let mut t = Vec::new();
    for f in facets {
        let [c0, c1] = f.cells;
        if !space.is_active(c0) || !space.is_active(c1) {
            return Err(AssemblyError::InactiveFacet(c0, c1));
        }
        let nrm = f.normal();
        let (a, b) = mesh.facet_endpoints(f);
        dofs[..n].copy_from_slice(space.cell_dofs(c0));
        dofs[n..].copy_from_slice(space.cell_dofs(c1));
        let q = segment_rule(a, b, 2 * space.order());
        let mut local = vec![0.0; 4 * n * n];
        for (&p, &w) in q.points.iter().zip(&q.weights) {
            for (side, (c, sign)) in [(c0, 1.0), (c1, -1.0)].into_iter().enumerate() {
                space.shape(c, p, &mut v, &mut g);
                for i in 0..n {
                    jump[side * n + i] = sign * (g[i][0] * nrm[0] + g[i][1] * nrm[1]);
                }
            }
            for i in 0..2 * n {
                for j in 0..2 * n {
                    local[i * 2 * n + j] += w * gamma_g * h * jump[i] * jump[j];
                }
            }
        }
        for i in 0..2 * n {
            for j in 0..2 * n {
                t.push((dofs[i], dofs[j], local[i * 2 * n + j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(space.num_dofs(), space.num_dofs(), &t))
}

/// How the Gram matrix is kept uniformly SPD near small cuts.
#[derive(Debug, Clone, PartialEq)]
pub enum Stabilization {
    /// Ghost penalty with coefficient `γ_g` on facets next to cut cells.
    Ghost { gamma_g: f64 },
    /// Aggregated space: the Gram matrix is reduced to the free dofs.
    Aggregated,
}

/// Result of applying the inverse Gram matrix to a residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Riesz {
    /// `B⁻¹ r` (for aggregated spaces, `C B_ag⁻¹ Cᵀ r`) on all test dofs.
    pub z: Vec<f64>,
    /// `sqrt(rᵀ z)`.
    pub dual_norm: f64,
}

/// Factored `H¹` Gram matrix of the test space.
#[derive(Debug, Clone)]
pub struct GramOperator {
    matrix: CsrMatrix,
    factor: CholeskyFactor,
    extension: Option<CsrMatrix>,
    stabilization: Stabilization,
    n_test: usize,
}

impl GramOperator {
    /// `B = M_{H¹} + J`, with the ghost penalty on every facet that touches a
    /// cut cell and separates two active cells.
    pub fn ghost(space: &FeSpace, decomp: &CutDecomposition, gamma_g: f64) -> Result<Self, AssemblyError> {
        let m = assemble_h1_gram(space, decomp)?;
        let cut: BTreeSet<usize> = decomp.cut_cells();
        let facets: Vec<Facet> = skeleton_faces_near_boundary(decomp.mesh(), &cut)
            .into_iter()
            .filter(|f| space.is_active(f.cells[0]) && space.is_active(f.cells[1]))
            .collect();
        let j = assemble_ghost_penalty(space, &facets, gamma_g, decomp.mesh().h())?;
        let b = m.add_scaled(&j, 1.0)?;
        Self::from_parts(b, None, Stabilization::Ghost { gamma_g }, space.num_dofs())
    }

    /// `B = Cᵀ M_{H¹} C` on the free dofs of an aggregated space.
    pub fn aggregated(space: &FeSpace, decomp: &CutDecomposition, agg: &AggregationMap) -> Result<Self, AssemblyError> {
        let m = assemble_h1_gram(space, decomp)?;
        let c = agg.extension_matrix();
        let b = c.transpose().matmul(&m)?.matmul(&c)?;
        Self::from_parts(b, Some(c), Stabilization::Aggregated, space.num_dofs())
    }

    /// Wraps an explicit SPD matrix on the full test space.
    pub fn from_matrix(b: CsrMatrix, stabilization: Stabilization) -> Result<Self, AssemblyError> {
        let n = b.rows();
        Self::from_parts(b, None, stabilization, n)
    }

    fn from_parts(
        b: CsrMatrix,
        extension: Option<CsrMatrix>,
        stabilization: Stabilization,
        n_test: usize,
    ) -> Result<Self, AssemblyError> {
        let factor = CholeskyFactor::new(&b).map_err(AssemblyError::GramNotSpd)?;
        Ok(GramOperator { matrix: b, factor, extension, stabilization, n_test })
    }

    /// The (possibly reduced) Gram matrix.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn stabilization(&self) -> &Stabilization {
        &self.stabilization
    }

    /// The extension `C` for aggregated spaces.
    pub fn extension(&self) -> Option<&CsrMatrix> {
        self.extension.as_ref()
    }

    /// Number of test dofs the operator acts on.
    pub fn n_test(&self) -> usize {
        self.n_test
    }

    /// Riesz representative of `r` and its dual norm.
    pub fn apply_riesz(&self, r: &[f64]) -> Result<Riesz, AssemblyError> {
        if r.len() != self.n_test {
            return Err(AssemblyError::DimensionMismatch { expected: self.n_test, got: r.len() });
        }
        let z = match &self.extension {
            None => self.factor.solve(r)?,
            Some(c) => c.spmv(&self.factor.solve(&c.spmv_transpose(r)?)?)?,
        };
        let dual_norm = dot(r, &z).max(0.0).sqrt();
        Ok(Riesz { z, dual_norm })
    }

    /// `vᵀ B v` in the operator's own (possibly reduced) coordinates.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64, AssemblyError> {
        Ok(dot(v, &self.matrix.spmv(v)?))
    }
}
