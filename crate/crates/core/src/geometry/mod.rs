//! Level-set geometry and cut-cell integration.
//!
//! The physical domain is `Ω = {φ < 0}` and its boundary `{φ = 0}`; this sign
//! convention holds everywhere in the crate. Cut cells are sub-triangulated
//! with a marching-squares walk, so `∂Ω ∩ K` is represented by straight
//! segments and `Ω ∩ K` by triangles.

mod cut;
pub mod quadrature;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use cut::{subtriangulate_cut_cell, BoundarySegment, CutCell};
pub use quadrature::{BoundaryRule, QuadratureRule};

use crate::jet::Jet;
use crate::mesh::BackgroundMesh;
use crate::Point;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("subcell ambiguity in cell {cell}: {crossings} sign changes on one edge; refine the mesh")]
    SubcellAmbiguity { cell: usize, crossings: usize },
    #[error("root finding did not converge on an edge of cell {cell}")]
    RootNotConverged { cell: usize },
    #[error("cell {cell} is not active")]
    InactiveCell { cell: usize },
    #[error("cell {cell} has no boundary segments")]
    NoBoundary { cell: usize },
    #[error("quadrature degree must be at least 1")]
    BadDegree,
    #[error("at least 2 samples per axis are required, got {0}")]
    BadSampling(usize),
}

/// A signed scalar field whose negative set is the physical domain.
pub trait LevelSet: Send + Sync {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> Point;
}

/// The analytic shapes used by the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `φ = |x - center| - radius`.
    Disk { center: Point, radius: f64 },
    /// `φ = ρ - 0.12 (sin 5θ + 3)` in polar coordinates about `center`.
    Flower { center: Point },
    /// `φ = n · (x - origin)`; the domain lies opposite to `normal`.
    HalfPlane { origin: Point, normal: Point },
}

impl Shape {
    pub fn disk(center: Point, radius: f64) -> Self {
        Shape::Disk { center, radius }
    }

    pub fn flower(center: Point) -> Self {
        Shape::Flower { center }
    }

    fn eval_jet(&self, x: Jet, y: Jet) -> Jet {
        match *self {
            Shape::Disk { center, radius } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                (dx * dx + dy * dy).sqrt() - radius
            }
            Shape::Flower { center } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let rho = (dx * dx + dy * dy).sqrt();
                // sin 5θ = Im((dx + i dy)^5) / ρ^5
                let im5 = 5.0 * dx.powi(4) * dy - 10.0 * dx.powi(2) * dy.powi(3) + dy.powi(5);
                let sin5 = im5 / rho.powi(5);
                rho - 0.12 * (sin5 + 3.0)
            }
            Shape::HalfPlane { origin, normal } => (x - origin[0]) * normal[0] + (y - origin[1]) * normal[1],
        }
    }

    /// Exact area for shapes where it is known in closed form.
    pub fn exact_area(&self) -> Option<f64> {
        match *self {
            Shape::Disk { radius, .. } => Some(std::f64::consts::PI * radius * radius),
            // ∫ r(θ)²/2 dθ with r = 0.12 (sin 5θ + 3): 0.0144 * (9 + 1/2) * π
            Shape::Flower { .. } => Some(0.0144 * 9.5 * std::f64::consts::PI),
            Shape::HalfPlane { .. } => None,
        }
    }
}

impl LevelSet for Shape {
    fn value(&self, p: Point) -> f64 {
        match *self {
            Shape::Disk { center, radius } => ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt() - radius,
            Shape::HalfPlane { origin, normal } => (p[0] - origin[0]) * normal[0] + (p[1] - origin[1]) * normal[1],
            Shape::Flower { center } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let rho = dx.hypot(dy);
                rho - 0.12 * ((5.0 * dy.atan2(dx)).sin() + 3.0)
            }
        }
    }

    fn gradient(&self, p: Point) -> Point {
        let (x, y) = Jet::vars(p);
        self.eval_jet(x, y).g
    }
}

/// A level set given by an arbitrary differentiable expression.
pub struct Implicit<F>(pub F);

impl<F: Fn(Jet, Jet) -> Jet + Send + Sync> LevelSet for Implicit<F> {
    fn value(&self, p: Point) -> f64 {
        (self.0)(Jet::constant(p[0]), Jet::constant(p[1])).v
    }

    fn gradient(&self, p: Point) -> Point {
        let (x, y) = Jet::vars(p);
        (self.0)(x, y).g
    }
}

/// `-φ`: swaps the domain and its complement.
pub struct Negated<L>(pub L);

impl<L: LevelSet> LevelSet for Negated<L> {
    fn value(&self, p: Point) -> f64 {
        -self.0.value(p)
    }

    fn gradient(&self, p: Point) -> Point {
        let [gx, gy] = self.0.gradient(p);
        [-gx, -gy]
    }
}

impl<L: LevelSet + ?Sized> LevelSet for &L {
    fn value(&self, p: Point) -> f64 {
        (**self).value(p)
    }

    fn gradient(&self, p: Point) -> Point {
        (**self).gradient(p)
    }
}

impl<L: LevelSet + ?Sized> LevelSet for Box<L> {
    fn value(&self, p: Point) -> f64 {
        (**self).value(p)
    }

    fn gradient(&self, p: Point) -> Point {
        (**self).gradient(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Exterior,
    Interior,
    Cut,
}

impl CellClass {
    pub fn is_active(self) -> bool {
        self != CellClass::Exterior
    }
}

/// Classifies one cell from the signs of `φ` at its corners and on an
/// `n_sample x n_sample` interior grid.
pub fn classify_cell(mesh: &BackgroundMesh, cell: usize, phi: &dyn LevelSet, n_sample: usize) -> CellClass {
    let (lo, hi) = mesh.cell_bounds(cell);
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let interior = (0..n_sample).flat_map(|b| (0..n_sample).map(move |a| (a, b))).map(|(a, b)| {
        let s = (a as f64 + 1.0) / (n_sample as f64 + 1.0);
        let t = (b as f64 + 1.0) / (n_sample as f64 + 1.0);
        [lo[0] + s * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1])]
    });
    let (mut neg, mut pos) = (false, false);
    for p in corners.into_iter().chain(interior) {
        let v = phi.value(p);
        neg |= v < 0.0;
        pos |= v > 0.0;
        if neg && pos {
            return CellClass::Cut;
        }
    }
    match (neg, pos) {
        (true, false) => CellClass::Interior,
        (false, true) => CellClass::Exterior,
        // identically zero at every sample
        _ => CellClass::Cut,
    }
}

pub fn classify_cells(
    mesh: &BackgroundMesh,
    phi: &dyn LevelSet,
    n_sample: usize,
) -> Result<Vec<CellClass>, GeometryError> {
    if n_sample < 2 {
        return Err(GeometryError::BadSampling(n_sample));
    }
    Ok((0..mesh.num_cells()).map(|c| classify_cell(mesh, c, phi, n_sample)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutOptions {
    /// Interior samples per axis used for classification and edge scanning.
    pub n_sample: usize,
    /// Root-finding tolerance on `|φ|`, relative to the cell size.
    pub tol_root: f64,
}

impl Default for CutOptions {
    fn default() -> Self {
        CutOptions { n_sample: 4, tol_root: 1e-10 }
    }
}

/// Classification of every cell of a mesh plus the geometry of its cut cells.
#[derive(Debug, Clone)]
pub struct CutDecomposition {
    mesh: BackgroundMesh,
    classes: Vec<CellClass>,
    active: Vec<usize>,
    cut: BTreeMap<usize, CutCell>,
    options: CutOptions,
}

impl CutDecomposition {
    /// Classifies all cells and sub-triangulates the cut ones. Cut cells whose
    /// sub-triangulation is empty are demoted to exterior.
    pub fn build(mesh: &BackgroundMesh, phi: &dyn LevelSet, options: CutOptions) -> Result<Self, GeometryError> {
        let mut classes = classify_cells(mesh, phi, options.n_sample)?;
        let mut cut = BTreeMap::new();
        for (c, class) in classes.iter_mut().enumerate() {
            if *class != CellClass::Cut {
                continue;
            }
            let cell = subtriangulate_cut_cell(mesh, c, phi, options)?;
            if cell.triangles.is_empty() {
                *class = CellClass::Exterior;
            } else {
                cut.insert(c, cell);
            }
        }
        let active = (0..classes.len()).filter(|&c| classes[c].is_active()).collect();
        Ok(CutDecomposition { mesh: mesh.clone(), classes, active, cut, options })
    }

    pub fn mesh(&self) -> &BackgroundMesh {
        &self.mesh
    }

    pub fn options(&self) -> CutOptions {
        self.options
    }

    pub fn class(&self, cell: usize) -> CellClass {
        self.classes[cell]
    }

    pub fn classes(&self) -> &[CellClass] {
        &self.classes
    }

    /// Interior and cut cells in ascending order.
    pub fn active_cells(&self) -> &[usize] {
        &self.active
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.classes[cell].is_active()
    }

    pub fn cut_cell(&self, cell: usize) -> Option<&CutCell> {
        self.cut.get(&cell)
    }

    pub fn cut_cells(&self) -> BTreeSet<usize> {
        self.cut.keys().copied().collect()
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// Volume rule on `Ω ∩ K`: a tensor Gauss rule on interior cells, a union
    /// of simplex rules on the sub-triangles of cut cells.
    pub fn volume_quadrature(&self, cell: usize, degree: usize) -> Result<QuadratureRule, GeometryError> {
        if degree < 1 {
            return Err(GeometryError::BadDegree);
        }
        match self.classes[cell] {
            CellClass::Exterior => Err(GeometryError::InactiveCell { cell }),
            CellClass::Interior => {
                let (lo, hi) = self.mesh.cell_bounds(cell);
                Ok(quadrature::rectangle_rule(lo, hi, degree))
            }
            CellClass::Cut => {
                let mut rule = QuadratureRule::default();
                for tri in &self.cut[&cell].triangles {
                    rule.append(quadrature::triangle_rule(tri, degree));
                }
                Ok(rule)
            }
        }
    }

    /// Gauss rule on the boundary segments of a cut cell.
    pub fn boundary_quadrature(&self, cell: usize, degree: usize) -> Result<BoundaryRule, GeometryError> {
        if degree < 1 {
            return Err(GeometryError::BadDegree);
        }
        let Some(cut) = self.cut.get(&cell) else {
            return Err(GeometryError::NoBoundary { cell });
        };
        if cut.segments.is_empty() {
            return Err(GeometryError::NoBoundary { cell });
        }
        let mut rule = BoundaryRule::default();
        for seg in &cut.segments {
            let q = quadrature::segment_rule(seg.a, seg.b, degree);
            rule.normals.extend(std::iter::repeat_n(seg.normal, q.len()));
            rule.points.extend(q.points);
            rule.weights.extend(q.weights);
        }
        Ok(rule)
    }

    /// Area of the discrete domain.
    pub fn area(&self) -> f64 {
        self.active
            .iter()
            .map(|&c| match self.classes[c] {
                CellClass::Interior => self.mesh.cell_area(c),
                _ => self.cut[&c].area(),
            })
            .sum()
    }

    /// Length of the discrete boundary.
    pub fn boundary_length(&self) -> f64 {
        self.cut.values().flat_map(|c| &c.segments).map(|s| s.length()).sum()
    }

    /// Axis-aligned bounding box `(lo, hi)` of the discrete domain.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut take = |p: Point| {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        };
        for &c in &self.active {
            match self.classes[c] {
                CellClass::Interior => {
                    let (a, b) = self.mesh.cell_bounds(c);
                    take(a);
                    take(b);
                }
                _ => self.cut[&c].triangles.iter().flatten().for_each(|&p| take(p)),
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundingBox;

    fn disk() -> Shape {
        Shape::disk([0.5, 0.5], 0.4)
    }

    #[test]
    fn bounds_of_inscribed_disk() {
        let mesh = BackgroundMesh::unit_square(37).unwrap();
        let (lo, hi) = CutDecomposition::build(&mesh, &disk(), CutOptions::default()).unwrap().bounds();
        for d in 0..2 {
            // Chord vertices lie on the circle, so the box sits just inside it.
            assert!(lo[d] >= 0.1 - 1e-9 && lo[d] < 0.1 + 2e-3, "{lo:?}");
            assert!(hi[d] <= 0.9 + 1e-9 && hi[d] > 0.9 - 2e-3, "{hi:?}");
        }
    }

    fn single_cell(lo: Point, hi: Point) -> (BackgroundMesh, usize) {
        (BackgroundMesh::new(BoundingBox::new(lo, hi).unwrap(), 1, 1).unwrap(), 0)
    }

    #[test]
    fn classifies_obvious_cells() {
        let (m, c) = single_cell([0.48, 0.48], [0.50, 0.50]);
        assert_eq!(classify_cell(&m, c, &disk(), 4), CellClass::Interior);
        let (m, c) = single_cell([0.0, 0.0], [0.02, 0.02]);
        assert_eq!(classify_cell(&m, c, &disk(), 4), CellClass::Exterior);
        let (m, c) = single_cell([0.88, 0.48], [0.92, 0.52]);
        assert_eq!(classify_cell(&m, c, &disk(), 4), CellClass::Cut);
    }

    #[test]
    fn classification_rejects_coarse_sampling() {
        let m = BackgroundMesh::unit_square(2).unwrap();
        assert_eq!(classify_cells(&m, &disk(), 1), Err(GeometryError::BadSampling(1)));
    }

    #[test]
    fn negation_swaps_interior_and_exterior() {
        let m = BackgroundMesh::unit_square(23).unwrap();
        let a = classify_cells(&m, &disk(), 4).unwrap();
        let b = classify_cells(&m, &Negated(disk()), 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let expected = match x {
                CellClass::Interior => CellClass::Exterior,
                CellClass::Exterior => CellClass::Interior,
                CellClass::Cut => CellClass::Cut,
            };
            assert_eq!(*y, expected);
        }
    }

    #[test]
    fn flower_gradient_matches_polar_value() {
        let f = Shape::flower([0.5, 0.5]);
        for p in [[0.8, 0.55], [0.3, 0.2], [0.51, 0.9]] {
            let e = 1e-6;
            let gx = (f.value([p[0] + e, p[1]]) - f.value([p[0] - e, p[1]])) / (2.0 * e);
            let gy = (f.value([p[0], p[1] + e]) - f.value([p[0], p[1] - e])) / (2.0 * e);
            let g = f.gradient(p);
            assert!((g[0] - gx).abs() < 1e-7 && (g[1] - gy).abs() < 1e-7);
            let (x, y) = Jet::vars(p);
            assert!((f.eval_jet(x, y).v - f.value(p)).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_rejects_bad_requests() {
        let m = BackgroundMesh::unit_square(10).unwrap();
        let d = CutDecomposition::build(&m, &disk(), CutOptions::default()).unwrap();
        assert_eq!(d.volume_quadrature(0, 0), Err(GeometryError::BadDegree));
        assert_eq!(d.volume_quadrature(0, 3), Err(GeometryError::InactiveCell { cell: 0 }));
        let inner = m.cell_id(5, 5);
        assert_eq!(d.class(inner), CellClass::Interior);
        assert_eq!(d.boundary_quadrature(inner, 3), Err(GeometryError::NoBoundary { cell: inner }));
    }

    /// Exact classification of a cell against a disk from the nearest and
    /// farthest points of the cell to the centre; `None` for tangent cells.
    fn disk_oracle(m: &BackgroundMesh, c: usize, center: Point, r: f64) -> Option<CellClass> {
        let (lo, hi) = m.cell_bounds(c);
        let near = |d: usize| center[d].clamp(lo[d], hi[d]) - center[d];
        let far = |d: usize| (lo[d] - center[d]).abs().max((hi[d] - center[d]).abs());
        let (dmin, dmax) = (near(0).hypot(near(1)), far(0).hypot(far(1)));
        if (dmin - r).abs() < 1e-12 || (dmax - r).abs() < 1e-12 {
            None
        } else if dmax < r {
            Some(CellClass::Interior)
        } else if dmin > r {
            Some(CellClass::Exterior)
        } else {
            Some(CellClass::Cut)
        }
    }

    #[test]
    fn disk_classification_matches_exact_geometry() {
        for (n, center, r) in [(20, [0.5, 0.5], 0.4), (37, [0.41, 0.53], 0.27), (50, [0.5, 0.5], 0.19)] {
            let m = BackgroundMesh::unit_square(n).unwrap();
            let d = CutDecomposition::build(&m, &Shape::disk(center, r), CutOptions::default()).unwrap();
            for c in 0..m.num_cells() {
                if let Some(class) = disk_oracle(&m, c, center, r) {
                    assert_eq!(d.class(c), class, "n={n} cell {c}");
                }
            }
        }
    }

    #[test]
    fn flower_area_against_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let flower = Shape::flower([0.5, 0.5]);
        let exact = flower.exact_area().unwrap();
        let n = 10_000_000usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        // The flower lies in the disk of radius 0.48, inside [0.02, 0.98]².
        let side = 0.96;
        let hits = (0..n)
            .filter(|_| flower.value([0.02 + side * rng.random::<f64>(), 0.02 + side * rng.random::<f64>()]) < 0.0)
            .count();
        let p = hits as f64 / n as f64;
        let estimate = side * side * p;
        let sigma = side * side * (p * (1.0 - p) / n as f64).sqrt();
        assert!((estimate - exact).abs() < 3.0 * sigma, "MC {estimate} vs {exact} (σ = {sigma:.2e})");

        // The chord approximation converges to the same area.
        let mut errs = Vec::new();
        for cells in [25, 50, 100] {
            let m = BackgroundMesh::unit_square(cells).unwrap();
            errs.push((CutDecomposition::build(&m, &flower, CutOptions::default()).unwrap().area() - exact).abs());
        }
        assert!(errs[2] < 2e-4 && errs[2] < errs[0], "{errs:?}");
    }

    #[test]
    fn disk_boundary_moments() {
        let (center, r) = ([0.47, 0.52], 0.4);
        let mut prev = f64::INFINITY;
        for n in [25, 50, 100] {
            let m = BackgroundMesh::unit_square(n).unwrap();
            let d = CutDecomposition::build(&m, &Shape::disk(center, r), CutOptions::default()).unwrap();
            let area_err = (d.area() - std::f64::consts::PI * r * r).abs();
            let len_err = (d.boundary_length() - 2.0 * std::f64::consts::PI * r).abs();
            assert!(area_err < 1e-3 && len_err < 1e-3, "n={n}: area {area_err:.2e} length {len_err:.2e}");
            // ∫ x dS = 2πr c_x and ∫ n dS = 0 on a closed curve.
            let (mut mx, mut nx, mut ny) = (0.0, 0.0, 0.0);
            for c in d.cut_cells() {
                let q = d.boundary_quadrature(c, 2).unwrap();
                for ((p, w), nrm) in q.points.iter().zip(&q.weights).zip(&q.normals) {
                    mx += w * p[0];
                    nx += w * nrm[0];
                    ny += w * nrm[1];
                }
            }
            let mx_err = (mx - 2.0 * std::f64::consts::PI * r * center[0]).abs();
            assert!(mx_err < 1e-3, "n={n}: ∫x dS off by {mx_err:.2e}");
            // Demoted sliver cells drop their (tiny) segments, so the curve
            // closes only up to their total length.
            assert!(nx.abs() < 1e-5 && ny.abs() < 1e-5, "n={n}: ∫n dS = ({nx:.2e}, {ny:.2e})");
            assert!(len_err < prev);
            prev = len_err;
        }
    }
}
