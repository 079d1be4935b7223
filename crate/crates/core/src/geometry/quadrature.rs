//! Gauss rules on intervals, rectangles, triangles and segments.

use crate::Point;

/// Points and weights in physical coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn append(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// Rule on boundary segments; every point carries the outward unit normal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point>,
}

impl BoundaryRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]` with `n` points.
///
/// Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Chebyshev-like initial guess, on [-1, 1].
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wt;
        w[n - 1 - i] = 0.5 * wt;
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Number of Gauss points per direction for exactness of `degree`.
pub fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Tensor Gauss rule on the rectangle `[lo, hi]`, exact for `Q_degree`.
pub fn rectangle_rule(lo: Point, hi: Point, degree: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(points_for_degree(degree));
    let (dx, dy) = (hi[0] - lo[0], hi[1] - lo[1]);
    let mut rule = QuadratureRule::default();
    for (yj, wj) in x.iter().zip(&w) {
        for (xi, wi) in x.iter().zip(&w) {
            rule.points.push([lo[0] + dx * xi, lo[1] + dy * yj]);
            rule.weights.push(wi * wj * dx * dy);
        }
    }
    rule
}

/// Collapsed-coordinate Gauss rule on a triangle, exact for total degree `degree`.
pub fn triangle_rule(tri: &[Point; 3], degree: usize) -> QuadratureRule {
    let n = (degree + 3) / 2;
    let (x, w) = gauss_legendre(n);
    let [a, b, c] = *tri;
    let e1 = [b[0] - a[0], b[1] - a[1]];
    let e2 = [c[0] - a[0], c[1] - a[1]];
    let det = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let mut rule = QuadratureRule::default();
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            let xi = *u;
            let eta = v * (1.0 - u);
            rule.points.push([a[0] + xi * e1[0] + eta * e2[0], a[1] + xi * e1[1] + eta * e2[1]]);
            rule.weights.push(wu * wv * (1.0 - u) * det);
        }
    }
    rule
}

/// Gauss rule on the segment `[a, b]`, weights scaled by its length.
pub fn segment_rule(a: Point, b: Point, degree: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(points_for_degree(degree));
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    QuadratureRule {
        points: x.iter().map(|t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]).collect(),
        weights: w.iter().map(|wi| wi * len).collect(),
    }
}
