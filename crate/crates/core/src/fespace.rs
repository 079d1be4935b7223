//! Lagrangian finite element spaces on active cells.
//!
//! A [`FeSpace`] carries tensor-product `Q_k` elements with equispaced nodes on
//! a subset of cells of a Cartesian mesh. Global nodes live on the
//! `(k nx + 1) x (k ny + 1)` lattice; only lattice points touched by an active
//! cell become dofs, numbered in lexicographic lattice order. Local node
//! `(a, b)` of a cell has local index `a + (k + 1) b`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{CellClass, CutDecomposition, CutOptions, LevelSet};
use crate::linalg::CsrMatrix;
use crate::mesh::{BackgroundMesh, Refinement};
use crate::Point;

#[derive(Debug, Error, PartialEq)]
pub enum FeSpaceError {
    #[error("no active cells")]
    EmptyActiveSet,
    #[error("element order must be at least 1")]
    BadOrder,
    #[error("point {0:?} is not inside an active cell")]
    PointOutside(Point),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("aggregation needs at least one interior cell")]
    NoInteriorCell,
    #[error("isolated cut island: cut cell {cell} cannot reach an interior cell")]
    IsolatedCutIsland { cell: usize },
}

/// 1D Lagrange polynomials on `k + 1` equispaced nodes of `[0, 1]`.
#[derive(Debug, Clone)]
struct Lagrange1d {
    nodes: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl Lagrange1d {
    fn new(k: usize) -> Self {
        let nodes: Vec<f64> = (0..=k).map(|a| a as f64 / k as f64).collect();
        let inv_denom = (0..=k)
            .map(|a| {
                let d: f64 = (0..=k).filter(|&b| b != a).map(|b| nodes[a] - nodes[b]).product();
                1.0 / d
            })
            .collect();
        Lagrange1d { nodes, inv_denom }
    }

    fn eval(&self, t: f64, val: &mut [f64], der: &mut [f64]) {
        let n = self.nodes.len();
        for a in 0..n {
            let mut p = 1.0;
            let mut dp = 0.0;
            for b in 0..n {
                if b == a {
                    continue;
                }
                let f = t - self.nodes[b];
                dp = dp * f + p;
                p *= f;
            }
            val[a] = p * self.inv_denom[a];
            der[a] = dp * self.inv_denom[a];
        }
    }
}

/// Scalar `Q_k` Lagrange space on a set of cells of a Cartesian mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: BackgroundMesh,
    order: usize,
    cells: Vec<usize>,
    slot: Vec<usize>,
    cell_dofs: Vec<usize>,
    nodes: Vec<Point>,
    basis: Lagrange1d,
}

impl FeSpace {
    /// Order-`k` space on `cells` (any order; stored sorted and deduplicated).
    pub fn new(mesh: &BackgroundMesh, mut cells: Vec<usize>, order: usize) -> Result<Self, FeSpaceError> {
        if order == 0 {
            return Err(FeSpaceError::BadOrder);
        }
        cells.sort_unstable();
        cells.dedup();
        if cells.is_empty() {
            return Err(FeSpaceError::EmptyActiveSet);
        }
        let k = order;
        let [nx, ny] = mesh.cells_per_axis();
        let (lx, ly) = (k * nx + 1, k * ny + 1);
        let nloc = (k + 1) * (k + 1);
        let mut lattice_dof = vec![usize::MAX; lx * ly];
        for &c in &cells {
            let (i, j) = mesh.cell_ij(c);
            for b in 0..=k {
                for a in 0..=k {
                    lattice_dof[(k * i + a) + lx * (k * j + b)] = 0;
                }
            }
        }
        let bbox = mesh.bbox();
        let [w, h] = bbox.extent();
        let mut nodes = Vec::new();
        for (l, d) in lattice_dof.iter_mut().enumerate() {
            if *d == 0 {
                *d = nodes.len();
                let (p, q) = (l % lx, l / lx);
                nodes.push([
                    bbox.lo[0] + w * (p as f64 / (lx - 1) as f64),
                    bbox.lo[1] + h * (q as f64 / (ly - 1) as f64),
                ]);
            }
        }
        let mut slot = vec![usize::MAX; mesh.num_cells()];
        let mut cell_dofs = Vec::with_capacity(cells.len() * nloc);
        for (s, &c) in cells.iter().enumerate() {
            slot[c] = s;
            let (i, j) = mesh.cell_ij(c);
            for b in 0..=k {
                for a in 0..=k {
                    cell_dofs.push(lattice_dof[(k * i + a) + lx * (k * j + b)]);
                }
            }
        }
        Ok(FeSpace { mesh: mesh.clone(), order, cells, slot, cell_dofs, nodes, basis: Lagrange1d::new(k) })
    }

    pub fn mesh(&self) -> &BackgroundMesh {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_dofs(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes per cell, `(k + 1)²`.
    pub fn dofs_per_cell(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn active_cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.slot.get(cell).is_some_and(|&s| s != usize::MAX)
    }

    /// Global dofs of an active cell in local order.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let s = self.slot[cell];
        assert!(s != usize::MAX, "cell {cell} is not in the space");
        let n = self.dofs_per_cell();
        &self.cell_dofs[s * n..(s + 1) * n]
    }

    /// Values and physical gradients of the local basis of `cell` at `p`.
    ///
    /// `p` may lie outside the cell; the polynomials are then extrapolated.
    pub fn shape(&self, cell: usize, p: Point, vals: &mut [f64], grads: &mut [Point]) {
        let k = self.order;
        let (lo, hi) = self.mesh.cell_bounds(cell);
        let (dx, dy) = (hi[0] - lo[0], hi[1] - lo[1]);
        let s = (p[0] - lo[0]) / dx;
        let t = (p[1] - lo[1]) / dy;
        let mut vx = [0.0; 16];
        let mut dxs = [0.0; 16];
        let mut vy = [0.0; 16];
        let mut dys = [0.0; 16];
        assert!(k < 16, "order {k} is not supported");
        self.basis.eval(s, &mut vx[..=k], &mut dxs[..=k]);
        self.basis.eval(t, &mut vy[..=k], &mut dys[..=k]);
        for b in 0..=k {
            for a in 0..=k {
                let l = a + (k + 1) * b;
                vals[l] = vx[a] * vy[b];
                grads[l] = [dxs[a] * vy[b] / dx, vx[a] * dys[b] / dy];
            }
        }
    }

    /// Value and gradient at `p` of the function with dof values `coeffs`,
    /// using the basis of `cell`.
    pub fn evaluate_in_cell(&self, cell: usize, coeffs: &[f64], p: Point) -> (f64, Point) {
        let n = self.dofs_per_cell();
        let mut vals = vec![0.0; n];
        let mut grads = vec![[0.0; 2]; n];
        self.shape(cell, p, &mut vals, &mut grads);
        let mut u = 0.0;
        let mut g = [0.0; 2];
        for (l, &d) in self.cell_dofs(cell).iter().enumerate() {
            u += coeffs[d] * vals[l];
            g[0] += coeffs[d] * grads[l][0];
            g[1] += coeffs[d] * grads[l][1];
        }
        (u, g)
    }

    /// Active cell containing `p` (the lowest id if `p` is on a shared edge).
    pub fn locate(&self, p: Point) -> Option<usize> {
        let c = self.mesh.locate(p)?;
        let tol = 1e-12 * self.mesh.h();
        let inside = |c: usize| {
            let (lo, hi) = self.mesh.cell_bounds(c);
            p[0] >= lo[0] - tol && p[0] <= hi[0] + tol && p[1] >= lo[1] - tol && p[1] <= hi[1] + tol
        };
        let [nx, ny] = self.mesh.cells_per_axis();
        let (i, j) = self.mesh.cell_ij(c);
        let mut best = None;
        for cj in j.saturating_sub(1)..(j + 2).min(ny) {
            for ci in i.saturating_sub(1)..(i + 2).min(nx) {
                let cand = self.mesh.cell_id(ci, cj);
                if self.is_active(cand) && inside(cand) {
                    best = Some(best.map_or(cand, |b: usize| b.min(cand)));
                }
            }
        }
        best
    }

    /// Value and gradient of a finite element function at `p`.
    pub fn evaluate(&self, coeffs: &[f64], p: Point) -> Result<(f64, Point), FeSpaceError> {
        if coeffs.len() != self.num_dofs() {
            return Err(FeSpaceError::DimensionMismatch { expected: self.num_dofs(), got: coeffs.len() });
        }
        let cell = self.locate(p).ok_or(FeSpaceError::PointOutside(p))?;
        Ok(self.evaluate_in_cell(cell, coeffs, p))
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&p| f(p)).collect()
    }
}

/// The points at which a network is sampled to build its interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationNodes {
    pub dofs: Vec<usize>,
    pub points: Vec<Point>,
}

impl InterpolationNodes {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// All nodes of the space are free (Dirichlet data is imposed weakly).
pub fn interpolation_nodes(trial: &FeSpace) -> InterpolationNodes {
    InterpolationNodes { dofs: (0..trial.num_dofs()).collect(), points: trial.nodes().to_vec() }
}

/// Order-`k` space on the active cells of a decomposition.
pub fn build_trial_space(decomp: &CutDecomposition, k: usize) -> Result<FeSpace, FeSpaceError> {
    FeSpace::new(decomp.mesh(), decomp.active_cells().to_vec(), k)
}

/// How many times each coarse cell is subdivided for the linear test space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorRule {
    /// `2^(k - 1)`: `k - 1` levels of bisection.
    #[default]
    Pow2,
    /// `k`: the refined vertex lattice coincides with the `Q_k` node lattice.
    Iso,
}

impl FactorRule {
    pub fn factor(self, k: usize) -> usize {
        match self {
            FactorRule::Pow2 => 1 << k.saturating_sub(1),
            FactorRule::Iso => k.max(1),
        }
    }
}

/// Linear test space on a refined, cut mesh.
#[derive(Debug, Clone)]
pub struct LinearizedTestSpace {
    pub refinement: Refinement,
    /// Classification and cut geometry of the refined cells.
    pub decomposition: CutDecomposition,
    pub space: FeSpace,
    /// Coarse cells with at least one active child.
    pub coarse_active: Vec<usize>,
}

/// Refines `coarse`, cuts the refined mesh against `phi`, and builds the `Q1`
/// space on the refined active cells.
pub fn build_linearized_test_space(
    coarse: &BackgroundMesh,
    phi: &dyn LevelSet,
    k: usize,
    rule: FactorRule,
    options: CutOptions,
) -> crate::Result<LinearizedTestSpace> {
    if k == 0 {
        return Err(FeSpaceError::BadOrder.into());
    }
    let refinement = coarse.refine(rule.factor(k))?;
    let decomposition = CutDecomposition::build(&refinement.fine, phi, options)?;
    let space = FeSpace::new(&refinement.fine, decomposition.active_cells().to_vec(), 1)?;
    let mut coarse_active: Vec<usize> = decomposition.active_cells().iter().map(|&c| refinement.parent(c)).collect();
    coarse_active.sort_unstable();
    coarse_active.dedup();
    Ok(LinearizedTestSpace { refinement, decomposition, space, coarse_active })
}

/// Trial space of order `k` on coarse active cells paired with the linear
/// test space on the refined cut mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub order: usize,
    pub refinement: Refinement,
    /// Cut geometry of the refined mesh; all integration happens here.
    pub fine: CutDecomposition,
    pub trial: FeSpace,
    pub test: FeSpace,
}

impl Discretization {
    pub fn build(
        coarse: &BackgroundMesh,
        phi: &dyn LevelSet,
        k: usize,
        rule: FactorRule,
        options: CutOptions,
    ) -> crate::Result<Self> {
        let lin = build_linearized_test_space(coarse, phi, k, rule, options)?;
        let trial = FeSpace::new(coarse, lin.coarse_active, k)?;
        Ok(Discretization { order: k, refinement: lin.refinement, fine: lin.decomposition, trial, test: lin.space })
    }

    pub fn coarse(&self) -> &BackgroundMesh {
        &self.refinement.coarse
    }

    pub fn factor(&self) -> usize {
        self.refinement.factor
    }

    /// Coarse cell of a refined cell.
    pub fn parent(&self, fine_cell: usize) -> usize {
        self.refinement.parent(fine_cell)
    }

    pub fn interpolation_nodes(&self) -> InterpolationNodes {
        interpolation_nodes(&self.trial)
    }
}

/// Aggregation of ill-posed cut cells to interior root cells, and the induced
/// constraints on dofs that belong only to cut cells.
#[derive(Debug, Clone)]
pub struct AggregationMap {
    root: Vec<Option<usize>>,
    num_dofs: usize,
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
    constraints: BTreeMap<usize, Vec<(usize, f64)>>,
}

impl AggregationMap {
    /// Root cell of an active cell (itself for interior cells).
    pub fn root(&self, cell: usize) -> Option<usize> {
        self.root[cell]
    }

    pub fn is_well_posed(&self, cell: usize) -> bool {
        self.root[cell] == Some(cell)
    }

    /// Dofs touched by at least one interior cell, ascending.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Constrained dof → `(free dof, coefficient)` pairs.
    pub fn constraints(&self) -> &BTreeMap<usize, Vec<(usize, f64)>> {
        &self.constraints
    }

    /// Extends values on free dofs to all dofs.
    pub fn extend(&self, free_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs];
        for (&d, &v) in self.free.iter().zip(free_values) {
            out[d] = v;
        }
        for (&d, row) in &self.constraints {
            out[d] = row.iter().map(|&(f, c)| c * out[f]).sum();
        }
        out
    }

    /// The extension operator `C` (all dofs × free dofs).
    pub fn extension_matrix(&self) -> CsrMatrix {
        let mut t = Vec::new();
        for d in 0..self.num_dofs {
            if let Some(f) = self.free_index[d] {
                t.push((d, f, 1.0));
            } else if let Some(row) = self.constraints.get(&d) {
                t.extend(row.iter().map(|&(f, c)| (d, self.free_index[f].unwrap(), c)));
            }
        }
        CsrMatrix::from_triplets(self.num_dofs, self.free.len(), &t)
    }
}

/// Assigns every cut cell of `decomp` to an interior root by a breadth-first
/// search over facets between active cells, then constrains the dofs that
/// belong only to cut cells to the polynomial extension of their root's basis.
///
/// Ties between roots at equal hop distance go to the lowest root id.
pub fn aggregate(decomp: &CutDecomposition, space: &FeSpace) -> Result<AggregationMap, FeSpaceError> {
    let mesh = decomp.mesh();
    let n = mesh.num_cells();
    let mut root = vec![None; n];
    let mut frontier: Vec<usize> =
        decomp.active_cells().iter().copied().filter(|&c| decomp.class(c) == CellClass::Interior).collect();
    if frontier.is_empty() {
        return Err(FeSpaceError::NoInteriorCell);
    }
    for &c in &frontier {
        root[c] = Some(c);
    }
    while !frontier.is_empty() {
        let mut claims: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &frontier {
            let r = root[c].unwrap();
            for nb in mesh.neighbors(c) {
                if decomp.is_active(nb) && root[nb].is_none() {
                    let e = claims.entry(nb).or_insert(r);
                    *e = (*e).min(r);
                }
            }
        }
        for (&c, &r) in &claims {
            root[c] = Some(r);
        }
        frontier = claims.into_keys().collect();
    }
    if let Some(&c) = decomp.active_cells().iter().find(|&&c| root[c].is_none()) {
        return Err(FeSpaceError::IsolatedCutIsland { cell: c });
    }

    let nd = space.num_dofs();
    let mut in_interior = vec![false; nd];
    for &c in space.active_cells() {
        if decomp.class(c) == CellClass::Interior {
            for &d in space.cell_dofs(c) {
                in_interior[d] = true;
            }
        }
    }
    let free: Vec<usize> = (0..nd).filter(|&d| in_interior[d]).collect();
    let mut free_index = vec![None; nd];
    for (i, &d) in free.iter().enumerate() {
        free_index[d] = Some(i);
    }
    let nloc = space.dofs_per_cell();
    let mut vals = vec![0.0; nloc];
    let mut grads = vec![[0.0; 2]; nloc];
    let mut constraints = BTreeMap::new();
    for &c in space.active_cells() {
        if decomp.class(c) != CellClass::Cut {
            continue;
        }
        let r = root[c].unwrap();
        for &d in space.cell_dofs(c) {
            if in_interior[d] || constraints.contains_key(&d) {
                continue;
            }
            space.shape(r, space.nodes()[d], &mut vals, &mut grads);
            let row: Vec<(usize, f64)> =
                space.cell_dofs(r).iter().zip(&vals).filter(|(_, &v)| v != 0.0).map(|(&f, &v)| (f, v)).collect();
            constraints.insert(d, row);
        }
    }
    Ok(AggregationMap { root, num_dofs: nd, free, free_index, constraints })
}
