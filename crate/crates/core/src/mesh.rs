//! Uniform Cartesian background meshes.
//!
//! Cells are numbered lexicographically with `x` fastest: cell `(i, j)` has id
//! `i + nx * j`. Vertices follow the same rule on the `(nx + 1) x (ny + 1)`
//! lattice. Every iteration order in the crate derives from these indices.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("degenerate bounding box: lo={lo:?}, hi={hi:?}")]
    DegenerateBox { lo: Point, hi: Point },
    #[error("cell counts must be positive, got {nx}x{ny}")]
    NonPositiveCells { nx: usize, ny: usize },
    #[error("refinement factor must be at least 1, got {0}")]
    BadFactor(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub lo: Point,
    pub hi: Point,
}

impl BoundingBox {
    pub fn new(lo: Point, hi: Point) -> Result<Self, MeshError> {
        let finite = lo.iter().chain(hi.iter()).all(|v| v.is_finite());
        if !finite || hi[0] <= lo[0] || hi[1] <= lo[1] {
            return Err(MeshError::DegenerateBox { lo, hi });
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn unit() -> Self {
        BoundingBox { lo: [0.0, 0.0], hi: [1.0, 1.0] }
    }

    pub fn extent(&self) -> [f64; 2] {
        [self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]]
    }

    pub fn area(&self) -> f64 {
        let [w, h] = self.extent();
        w * h
    }
}

/// Direction of a facet normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
}

/// An interior facet shared by two cells.
///
/// `cells[0] < cells[1]` and the facet normal points from `cells[0]` to
/// `cells[1]`, i.e. along `+axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Facet {
    pub cells: [usize; 2],
    pub axis: Axis,
}

impl Facet {
    pub fn normal(&self) -> Point {
        match self.axis {
            Axis::X => [1.0, 0.0],
            Axis::Y => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMesh {
    bbox: BoundingBox,
    nx: usize,
    ny: usize,
}

impl BackgroundMesh {
    pub fn new(bbox: BoundingBox, nx: usize, ny: usize) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::NonPositiveCells { nx, ny });
        }
        BoundingBox::new(bbox.lo, bbox.hi)?;
        Ok(BackgroundMesh { bbox, nx, ny })
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self, MeshError> {
        Self::new(BoundingBox::unit(), n, n)
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn cells_per_axis(&self) -> [usize; 2] {
        [self.nx, self.ny]
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_vertices(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn spacing(&self) -> [f64; 2] {
        let [w, h] = self.bbox.extent();
        [w / self.nx as f64, h / self.ny as f64]
    }

    /// Characteristic mesh size: the largest axis spacing.
    pub fn h(&self) -> f64 {
        let [hx, hy] = self.spacing();
        hx.max(hy)
    }

    pub fn cell_id(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        i + self.nx * j
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Coordinate of lattice vertex `(i, j)`.
    pub fn vertex(&self, i: usize, j: usize) -> Point {
        let [w, h] = self.bbox.extent();
        [self.bbox.lo[0] + w * (i as f64 / self.nx as f64), self.bbox.lo[1] + h * (j as f64 / self.ny as f64)]
    }

    pub fn vertices(&self) -> Vec<Point> {
        (0..=self.ny).flat_map(|j| (0..=self.nx).map(move |i| (i, j))).map(|(i, j)| self.vertex(i, j)).collect()
    }

    /// Vertex ids of a cell, counter-clockwise from the lower-left corner.
    pub fn cell_vertices(&self, cell: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(cell);
        let stride = self.nx + 1;
        let v0 = i + stride * j;
        [v0, v0 + 1, v0 + 1 + stride, v0 + stride]
    }

    /// Lower-left and upper-right corners of a cell.
    pub fn cell_bounds(&self, cell: usize) -> (Point, Point) {
        let (i, j) = self.cell_ij(cell);
        (self.vertex(i, j), self.vertex(i + 1, j + 1))
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let (lo, hi) = self.cell_bounds(cell);
        (hi[0] - lo[0]) * (hi[1] - lo[1])
    }

    /// Cell containing `p`, clamping points on the box boundary inward.
    /// Returns `None` for points outside the box.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let [hx, hy] = self.spacing();
        let fx = (p[0] - self.bbox.lo[0]) / hx;
        let fy = (p[1] - self.bbox.lo[1]) / hy;
        let tol = 1e-12;
        if fx < -tol || fy < -tol || fx > self.nx as f64 + tol || fy > self.ny as f64 + tol {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        Some(self.cell_id(i, j))
    }

    /// Edge-neighbours of a cell in the order left, right, bottom, top.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.cell_ij(cell);
        [
            (i > 0).then(|| cell - 1),
            (i + 1 < self.nx).then(|| cell + 1),
            (j > 0).then(|| cell - self.nx),
            (j + 1 < self.ny).then(|| cell + self.nx),
        ]
        .into_iter()
        .flatten()
    }

    /// All interior facets. Each cell contributes its right then its top facet,
    /// in cell order.
    pub fn interior_facets(&self) -> Vec<Facet> {
        let mut out = Vec::with_capacity(2 * self.num_cells());
        for c in 0..self.num_cells() {
            let (i, j) = self.cell_ij(c);
            if i + 1 < self.nx {
                out.push(Facet { cells: [c, c + 1], axis: Axis::X });
            }
            if j + 1 < self.ny {
                out.push(Facet { cells: [c, c + self.nx], axis: Axis::Y });
            }
        }
        out
    }

    /// Endpoints of a facet.
    pub fn facet_endpoints(&self, facet: &Facet) -> (Point, Point) {
        let (lo, hi) = self.cell_bounds(facet.cells[0]);
        match facet.axis {
            Axis::X => ([hi[0], lo[1]], hi),
            Axis::Y => ([lo[0], hi[1]], hi),
        }
    }

    /// Subdivides every cell into `factor x factor` children.
    pub fn refine(&self, factor: usize) -> Result<Refinement, MeshError> {
        if factor == 0 {
            return Err(MeshError::BadFactor(factor));
        }
        let fine = BackgroundMesh::new(self.bbox, self.nx * factor, self.ny * factor)?;
        Ok(Refinement { coarse: self.clone(), fine, factor })
    }
}

/// A coarse mesh together with its uniform refinement.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub coarse: BackgroundMesh,
    pub fine: BackgroundMesh,
    pub factor: usize,
}

impl Refinement {
    /// Coarse cell containing a fine cell.
    pub fn parent(&self, child: usize) -> usize {
        let (i, j) = self.fine.cell_ij(child);
        self.coarse.cell_id(i / self.factor, j / self.factor)
    }

    /// Fine cells of a coarse cell, in lexicographic order.
    pub fn children(&self, parent: usize) -> Vec<usize> {
        let (pi, pj) = self.coarse.cell_ij(parent);
        let f = self.factor;
        (0..f)
            .flat_map(|b| (0..f).map(move |a| (a, b)))
            .map(|(a, b)| self.fine.cell_id(pi * f + a, pj * f + b))
            .collect()
    }
}

/// Interior facets with at least one adjacent cell in `cut_cells`, each
/// listed once in the order of [`BackgroundMesh::interior_facets`].
pub fn skeleton_faces_near_boundary(mesh: &BackgroundMesh, cut_cells: &BTreeSet<usize>) -> Vec<Facet> {
    if cut_cells.is_empty() {
        return Vec::new();
    }
    let mut seen = BTreeSet::new();
    for &c in cut_cells {
        let (i, j) = mesh.cell_ij(c);
        let nx = mesh.cells_per_axis()[0];
        if i > 0 {
            seen.insert((c - 1, Axis::X));
        }
        if i + 1 < nx {
            seen.insert((c, Axis::X));
        }
        if j > 0 {
            seen.insert((c - nx, Axis::Y));
        }
        if j + 1 < mesh.cells_per_axis()[1] {
            seen.insert((c, Axis::Y));
        }
    }
    // Re-sort into interior_facets order: by lower cell, X before Y.
    seen.into_iter()
        .map(|(lower, axis)| {
            let upper = match axis {
                Axis::X => lower + 1,
                Axis::Y => lower + mesh.cells_per_axis()[0],
            };
            Facet { cells: [lower, upper], axis }
        })
        .collect()
}
