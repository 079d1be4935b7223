//! Second-order forward-mode differentiation in two variables.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to `(x, y)`. Arithmetic propagates all three exactly, so source
//! terms such as `-Δu` are obtained from the definition of `u` alone.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value, gradient and Hessian of a scalar field at a point.
///
/// The Hessian is stored as `[xx, xy, yy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [f64; 3],
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet { v, g: [0.0; 2], h: [0.0; 3] }
    }

    /// The coordinate function `x` seeded at `x`.
    pub const fn var_x(x: f64) -> Self {
        Jet { v: x, g: [1.0, 0.0], h: [0.0; 3] }
    }

    /// The coordinate function `y` seeded at `y`.
    pub const fn var_y(y: f64) -> Self {
        Jet { v: y, g: [0.0, 1.0], h: [0.0; 3] }
    }

    /// Both coordinate functions at `p`.
    pub const fn vars(p: [f64; 2]) -> (Self, Self) {
        (Self::var_x(p[0]), Self::var_y(p[1]))
    }

    pub fn laplacian(&self) -> f64 {
        self.h[0] + self.h[2]
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let [gx, gy] = self.g;
        Jet {
            v: f,
            g: [df * gx, df * gy],
            h: [df * self.h[0] + d2f * gx * gx, df * self.h[1] + d2f * gx * gy, df * self.h[2] + d2f * gy * gy],
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(self, n: i32) -> Self {
        match n {
            0 => Jet::constant(1.0),
            1 => self,
            _ => {
                let nf = f64::from(n);
                let p2 = self.v.powi(n - 2);
                self.chain(p2 * self.v * self.v, nf * p2 * self.v, nf * (nf - 1.0) * p2)
            }
        }
    }

    pub fn scale(self, s: f64) -> Self {
        Jet { v: s * self.v, g: [s * self.g[0], s * self.g[1]], h: [s * self.h[0], s * self.h[1], s * self.h[2]] }
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (a, b) = (self, o);
        Jet {
            v: a.v * b.v,
            g: [a.g[0] * b.v + a.v * b.g[0], a.g[1] * b.v + a.v * b.g[1]],
            h: [
                a.h[0] * b.v + 2.0 * a.g[0] * b.g[0] + a.v * b.h[0],
                a.h[1] * b.v + a.g[0] * b.g[1] + a.g[1] * b.g[0] + a.v * b.h[1],
                a.h[2] * b.v + 2.0 * a.g[1] * b.g[1] + a.v * b.h[2],
            ],
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

macro_rules! scalar_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $m(self, o: f64) -> Jet { $tr::$m(self, Jet::constant(o)) }
        }
        impl $tr<Jet> for f64 {
            type Output = Jet;
            fn $m(self, o: Jet) -> Jet { $tr::$m(Jet::constant(self), o) }
        }
    )*};
}
scalar_ops!(Add add, Sub sub, Mul mul, Div div);

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(Jet, Jet) -> Jet, p: [f64; 2]) {
        let eval = |x: f64, y: f64| f(Jet::constant(x), Jet::constant(y)).v;
        let (x, y) = Jet::vars(p);
        let j = f(x, y);
        let e = 1e-4;
        let gx = (eval(p[0] + e, p[1]) - eval(p[0] - e, p[1])) / (2.0 * e);
        let gy = (eval(p[0], p[1] + e) - eval(p[0], p[1] - e)) / (2.0 * e);
        let c = eval(p[0], p[1]);
        let hxx = (eval(p[0] + e, p[1]) - 2.0 * c + eval(p[0] - e, p[1])) / (e * e);
        let hyy = (eval(p[0], p[1] + e) - 2.0 * c + eval(p[0], p[1] - e)) / (e * e);
        let hxy = (eval(p[0] + e, p[1] + e) - eval(p[0] + e, p[1] - e) - eval(p[0] - e, p[1] + e)
            + eval(p[0] - e, p[1] - e))
            / (4.0 * e * e);
        for (a, b, tol) in
            [(j.g[0], gx, 1e-6), (j.g[1], gy, 1e-6), (j.h[0], hxx, 1e-4), (j.h[1], hxy, 1e-4), (j.h[2], hyy, 1e-4)]
        {
            assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_check(|x, y| (x * y).sin() * (x + 2.0 * y).cos(), [0.3, 0.7]);
        fd_check(|x, y| (x * x + y * y).sqrt(), [0.4, -0.2]);
        fd_check(|x, y| (-(x * x) * 3.0 + y).exp() / (1.0 + y.powi(2)), [0.1, 0.9]);
        fd_check(|x, y| x.powi(5) * y - y.powi(3) * x.powi(2), [0.6, 0.5]);
    }

    #[test]
    fn polynomial_laplacian_is_exact() {
        // u = x^2 y^2 -> Δu = 2y^2 + 2x^2
        let (x, y) = Jet::vars([0.3, 0.4]);
        let u = x.powi(2) * y.powi(2);
        assert!((u.laplacian() - (2.0 * 0.16 + 2.0 * 0.09)).abs() < 1e-15);
    }
}
