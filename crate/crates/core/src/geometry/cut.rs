//! Marching-squares sub-triangulation of a single cut cell.

use super::{CutOptions, GeometryError, LevelSet};
use crate::mesh::BackgroundMesh;
use crate::Point;

/// A straight piece of `∂Ω ∩ K` with its outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub a: Point,
    pub b: Point,
    pub normal: Point,
}

impl BoundarySegment {
    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn midpoint(&self) -> Point {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }
}

/// Sub-triangles covering `Ω ∩ K` and the segments approximating `∂Ω ∩ K`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutCell {
    pub triangles: Vec<[Point; 3]>,
    pub segments: Vec<BoundarySegment>,
}

impl CutCell {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(triangle_area).sum()
    }
}

fn triangle_area(t: &[Point; 3]) -> f64 {
    0.5 * signed_area2(t).abs()
}

fn signed_area2(t: &[Point; 3]) -> f64 {
    let [a, b, c] = t;
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Corner {
        p: Point,
        inside: bool,
    },
    /// Crossing of the zero level set; `exit` when the CCW walk leaves Ω here.
    Crossing {
        p: Point,
        exit: bool,
    },
}

impl Node {
    fn point(&self) -> Point {
        match *self {
            Node::Corner { p, .. } | Node::Crossing { p, .. } => p,
        }
    }
}

/// Splits `{φ < 0} ∩ K` into triangles and extracts boundary segments.
///
/// Each cell edge is scanned at `n_sample + 1` sub-intervals; sign changes are
/// located by bisection until `|φ| <= tol_root * h`. The polygon(s) bounded
/// by the inside parts of the cell boundary and the chords joining crossings
/// are fan-triangulated from their first vertex.
pub fn subtriangulate_cut_cell(
    mesh: &BackgroundMesh,
    cell: usize,
    phi: &dyn LevelSet,
    options: CutOptions,
) -> Result<CutCell, GeometryError> {
    let (lo, hi) = mesh.cell_bounds(cell);
    let h = mesh.h();
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let inside: Vec<bool> = corners.iter().map(|&p| phi.value(p) < 0.0).collect();

    let mut walk = Vec::with_capacity(12);
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        walk.push(Node::Corner { p: a, inside: inside[k] });
        // Bottom and right edges run lo -> hi; top and left are scanned in
        // the canonical direction and reversed, so shared edges of
        // neighbouring cells produce bitwise-identical roots.
        let reversed = k >= 2;
        let (s, e) = if reversed { (b, a) } else { (a, b) };
        let mut roots = edge_crossings(phi, s, e, options, h).map_err(|err| match err {
            EdgeError::Ambiguous(n) => GeometryError::SubcellAmbiguity { cell, crossings: n },
            EdgeError::NoConvergence => GeometryError::RootNotConverged { cell },
        })?;
        if reversed {
            roots.reverse();
        }
        let mut state = inside[k];
        for p in roots {
            walk.push(Node::Crossing { p, exit: state });
            state = !state;
        }
    }

    let crossings: Vec<usize> = (0..walk.len()).filter(|&i| matches!(walk[i], Node::Crossing { .. })).collect();

    let mut out = CutCell::default();
    if crossings.is_empty() {
        if inside[0] {
            fan(&corners, &mut out.triangles, mesh.cell_area(cell));
        }
        return Ok(out);
    }

    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let connected = crossings.len() > 2 && phi.value(center) < 0.0;
    let n = walk.len();

    let mut polygons: Vec<Vec<Point>> = Vec::new();
    if connected {
        // One polygon: the whole walk minus outside corners.
        let start = crossings[0];
        let mut poly = Vec::with_capacity(n);
        for off in 0..n {
            match walk[(start + off) % n] {
                Node::Corner { p, inside: true } => poly.push(p),
                Node::Crossing { p, .. } => poly.push(p),
                _ => {}
            }
        }
        polygons.push(poly);
    } else {
        // One polygon per inside arc, from an entry to the following exit.
        for &s in &crossings {
            if matches!(walk[s], Node::Crossing { exit: true, .. }) {
                continue;
            }
            let mut poly = vec![walk[s].point()];
            for off in 1..n {
                let node = walk[(s + off) % n];
                poly.push(node.point());
                if matches!(node, Node::Crossing { exit: true, .. }) {
                    break;
                }
            }
            polygons.push(poly);
        }
    }

    if connected {
        // Each exit crossing is joined to the next entry crossing.
        for (i, &ci) in crossings.iter().enumerate() {
            if let Node::Crossing { p: a, exit: true } = walk[ci] {
                let b = walk[crossings[(i + 1) % crossings.len()]].point();
                push_segment(&mut out.segments, a, b, h);
            }
        }
    } else {
        // Each arc polygon is closed by the chord from its exit back to its entry.
        for poly in &polygons {
            let (entry, exit) = (poly[0], *poly.last().unwrap());
            push_segment(&mut out.segments, exit, entry, h);
        }
    }

    let cell_area = mesh.cell_area(cell);
    for poly in &polygons {
        fan(poly, &mut out.triangles, cell_area);
    }
    Ok(out)
}

fn push_segment(segs: &mut Vec<BoundarySegment>, a: Point, b: Point, h: f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    if len <= 1e-14 * h {
        return;
    }
    // The domain lies to the left of a -> b, so the outward normal is the right normal.
    segs.push(BoundarySegment { a, b, normal: [dy / len, -dx / len] });
}

fn fan(poly: &[Point], out: &mut Vec<[Point; 3]>, cell_area: f64) {
    for i in 1..poly.len().saturating_sub(1) {
        let t = [poly[0], poly[i], poly[i + 1]];
        if signed_area2(&t) > 2e-14 * cell_area {
            out.push(t);
        }
    }
}

enum EdgeError {
    Ambiguous(usize),
    NoConvergence,
}

/// Zero crossings of `φ` on the segment `[s, e]`, ordered from `s` to `e`.
fn edge_crossings(phi: &dyn LevelSet, s: Point, e: Point, opts: CutOptions, h: f64) -> Result<Vec<Point>, EdgeError> {
    let m = opts.n_sample + 1;
    let at = |t: f64| [s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])];
    let ts: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let ins: Vec<bool> = ts.iter().map(|&t| phi.value(at(t)) < 0.0).collect();
    let changes = ins.windows(2).filter(|w| w[0] != w[1]).count();
    if changes > 2 {
        return Err(EdgeError::Ambiguous(changes));
    }
    let tol = opts.tol_root * h;
    let mut roots = Vec::with_capacity(changes);
    for i in 0..m {
        if ins[i] == ins[i + 1] {
            continue;
        }
        let (mut a, mut b) = (ts[i], ts[i + 1]);
        let mut found = None;
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            let v = phi.value(at(mid));
            if v.abs() <= tol {
                found = Some(mid);
                break;
            }
            if (v < 0.0) == ins[i] {
                a = mid;
            } else {
                b = mid;
            }
        }
        match found {
            Some(t) => roots.push(at(t)),
            None => return Err(EdgeError::NoConvergence),
        }
    }
    Ok(roots)
}
