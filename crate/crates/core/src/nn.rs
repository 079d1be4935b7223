//! Fully-connected feed-forward networks `ℝ² → ℝ`.
//!
//! Parameters are stored in one flat vector, layer by layer: for layer `k`
//! the weight matrix `W_k` (`n_k x n_{k-1}`, row-major) followed by the bias
//! `b_k` (`n_k`). The activation is applied after every affine map except the
//! last; the optional output rectification `|x| + 0.01` follows the last.
//!
//! Inputs pass through a fixed, non-trainable affine map first. By default it
//! is the identity; [`Mlp::with_input_box`] maps a bounding box onto
//! `[-1, 1]²`, which markedly speeds up training on domains like `[0, 1]²`.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::Point;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Softplus,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "softplus" => Some(Activation::Softplus),
            _ => None,
        }
    }

    /// Scale applied to the Glorot-uniform range at initialisation.
    pub fn gain(self) -> f64 {
        match self {
            Activation::Tanh => 5.0 / 3.0,
            Activation::Softplus => 1.0,
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Softplus => {
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative from the pre-activation `x` and the activation `a = ρ(x)`.
    #[inline]
    fn derivative(self, x: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Softplus => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

/// Lower bound of a rectified network output `|x| + RECT_FLOOR`.
pub const RECT_FLOOR: f64 = 0.01;

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Number of parameters of a network with the given layer sizes.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// A multilayer perceptron with two inputs and one output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    rectify: bool,
    /// Input map `x ↦ scale ∘ x + shift`, componentwise.
    scale: Point,
    shift: Point,
    params: Vec<f64>,
}

impl Mlp {
    /// Zero-initialised network. Sizes must start with 2, end with 1, and
    /// have all widths positive.
    pub fn zeros(sizes: &[usize], activation: Activation, rectify: bool) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::InvalidArch(format!("need at least two layers, got {sizes:?}")));
        }
        if sizes[0] != 2 || *sizes.last().unwrap() != 1 {
            return Err(NnError::InvalidArch(format!("input width must be 2 and output width 1, got {sizes:?}")));
        }
        if sizes.contains(&0) {
            return Err(NnError::InvalidArch(format!("zero-width layer in {sizes:?}")));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            activation,
            rectify,
            scale: [1.0, 1.0],
            shift: [0.0, 0.0],
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Glorot-uniform weights scaled by [`Activation::gain`] and zero biases,
    /// drawn from a seeded ChaCha stream.
    pub fn init(sizes: &[usize], activation: Activation, rectify: bool, seed: u64) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes, activation, rectify)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = activation.gain() * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// Maps the box `[lo, hi]` onto `[-1, 1]²` before the first layer.
    pub fn with_input_box(mut self, lo: Point, hi: Point) -> Result<Self, NnError> {
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(NnError::InvalidArch(format!("degenerate input box {lo:?}..{hi:?}")));
        }
        for d in 0..2 {
            self.scale[d] = 2.0 / (hi[d] - lo[d]);
            self.shift[d] = -(hi[d] + lo[d]) / (hi[d] - lo[d]);
        }
        Ok(self)
    }

    /// The input map as `(scale, shift)`.
    pub fn input_map(&self) -> (Point, Point) {
        (self.scale, self.shift)
    }

    #[inline]
    fn map_input(&self, p: &Point, a: &mut [f64]) {
        a[0] = self.scale[0] * p[0] + self.shift[0];
        a[1] = self.scale[1] * p[1] + self.shift[1];
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn rectify(&self) -> bool {
        self.rectify
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<(), NnError> {
        if theta.len() != self.params.len() {
            return Err(NnError::DimensionMismatch { expected: self.params.len(), got: theta.len() });
        }
        self.params.copy_from_slice(theta);
        Ok(())
    }

    fn widest(&self) -> usize {
        *self.sizes.iter().max().unwrap()
    }

    /// Output at one point.
    pub fn eval(&self, p: Point) -> f64 {
        let n = self.widest();
        let mut a = vec![0.0; n];
        let mut z = vec![0.0; n];
        self.map_input(&p, &mut a);
        self.eval_with(&mut a, &mut z)
    }

    fn eval_with(&self, a: &mut [f64], z: &mut [f64]) -> f64 {
        let layers = self.sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + nin * nout];
            let b = &self.params[off + nin * nout..off + nin * nout + nout];
            for i in 0..nout {
                let row = &w[i * nin..(i + 1) * nin];
                z[i] = b[i] + row.iter().zip(&a[..nin]).map(|(x, y)| x * y).sum::<f64>();
            }
            if l + 1 < layers {
                for i in 0..nout {
                    a[i] = self.activation.apply(z[i]);
                }
            }
            off += nin * nout + nout;
        }
        if self.rectify {
            z[0].abs() + RECT_FLOOR
        } else {
            z[0]
        }
    }

    /// Outputs at a batch of points.
    pub fn forward(&self, points: &[Point]) -> Vec<f64> {
        let n = self.widest();
        let mut a = vec![0.0; n];
        let mut z = vec![0.0; n];
        points
            .iter()
            .map(|p| {
                self.map_input(p, &mut a);
                self.eval_with(&mut a, &mut z)
            })
            .collect()
    }

    /// `∂(Σ_i w_i N(x_i; θ))/∂θ` by one reverse sweep per point.
    pub fn vjp_params(&self, points: &[Point], w: &[f64]) -> Result<Vec<f64>, NnError> {
        if points.len() != w.len() {
            return Err(NnError::DimensionMismatch { expected: points.len(), got: w.len() });
        }
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        // acts[l]: input of layer l; pre[l]: pre-activation output of layer l.
        let mut acts: Vec<Vec<f64>> = self.sizes[..layers].iter().map(|&n| vec![0.0; n]).collect();
        let mut pre: Vec<Vec<f64>> = self.sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        let n = self.widest();
        let (mut delta, mut next) = (vec![0.0; n], vec![0.0; n]);
        let mut g = vec![0.0; self.params.len()];
        for (p, &wi) in points.iter().zip(w) {
            if wi == 0.0 {
                continue;
            }
            self.map_input(p, &mut acts[0]);
            for l in 0..layers {
                let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
                let o = offsets[l];
                let wm = &self.params[o..o + nin * nout];
                let b = &self.params[o + nin * nout..o + nin * nout + nout];
                for i in 0..nout {
                    let row = &wm[i * nin..(i + 1) * nin];
                    pre[l][i] = b[i] + row.iter().zip(&acts[l]).map(|(x, y)| x * y).sum::<f64>();
                }
                if l + 1 < layers {
                    for i in 0..nout {
                        acts[l + 1][i] = self.activation.apply(pre[l][i]);
                    }
                }
            }
            delta[0] = if self.rectify { wi * sign(pre[layers - 1][0]) } else { wi };
            for l in (0..layers).rev() {
                let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
                let o = offsets[l];
                for i in 0..nout {
                    let d = delta[i];
                    let grow = &mut g[o + i * nin..o + (i + 1) * nin];
                    for (gj, aj) in grow.iter_mut().zip(&acts[l]) {
                        *gj += d * aj;
                    }
                    g[o + nin * nout + i] += d;
                }
                if l > 0 {
                    let wm = &self.params[o..o + nin * nout];
                    for j in 0..nin {
                        let mut s = 0.0;
                        for i in 0..nout {
                            s += wm[i * nin + j] * delta[i];
                        }
                        next[j] = s * self.activation.derivative(pre[l - 1][j], acts[l][j]);
                    }
                    delta[..nin].copy_from_slice(&next[..nin]);
                }
            }
        }
        Ok(g)
    }

    /// Output and its spatial gradient at `p` (forward mode). Used only for
    /// error diagnostics; training never needs spatial derivatives.
    pub fn value_and_gradient(&self, p: Point) -> (f64, Point) {
        let layers = self.sizes.len() - 1;
        let mut a = vec![0.0; 2];
        self.map_input(&p, &mut a);
        let mut da: Vec<[f64; 2]> = vec![[self.scale[0], 0.0], [0.0, self.scale[1]]];
        let mut off = 0;
        let mut out = (0.0, [0.0; 2]);
        for l in 0..layers {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + nin * nout];
            let b = &self.params[off + nin * nout..off + nin * nout + nout];
            let mut z = vec![0.0; nout];
            let mut dz = vec![[0.0; 2]; nout];
            for i in 0..nout {
                z[i] = b[i];
                for j in 0..nin {
                    let wij = w[i * nin + j];
                    z[i] += wij * a[j];
                    dz[i][0] += wij * da[j][0];
                    dz[i][1] += wij * da[j][1];
                }
            }
            if l + 1 < layers {
                a = z.iter().map(|&x| self.activation.apply(x)).collect();
                da = z
                    .iter()
                    .zip(&a)
                    .zip(&dz)
                    .map(|((&x, &ax), d)| {
                        let s = self.activation.derivative(x, ax);
                        [s * d[0], s * d[1]]
                    })
                    .collect();
            } else if self.rectify {
                let s = sign(z[0]);
                out = (z[0].abs() + RECT_FLOOR, [s * dz[0][0], s * dz[0][1]]);
            } else {
                out = (z[0], dz[0]);
            }
            off += nin * nout + nout;
        }
        out
    }

    /// Writes a versioned plain-text snapshot: a header with the architecture
    /// followed by one parameter per line in layout order.
    pub fn write_snapshot(&self, mut out: impl Write) -> Result<(), NnError> {
        writeln!(out, "feinn-mlp v1")?;
        writeln!(out, "activation {}", self.activation.name())?;
        writeln!(out, "rectify {}", self.rectify)?;
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        writeln!(out, "sizes {}", sizes.join(" "))?;
        writeln!(out, "input {:e} {:e} {:e} {:e}", self.scale[0], self.scale[1], self.shift[0], self.shift[1])?;
        for p in &self.params {
            writeln!(out, "{p:e}")?;
        }
        Ok(())
    }

    pub fn read_snapshot(input: impl BufRead) -> Result<Self, NnError> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String, NnError> {
            lines.next().transpose()?.ok_or_else(|| NnError::Snapshot(format!("missing {what}")))
        };
        if next("header")?.trim() != "feinn-mlp v1" {
            return Err(NnError::Snapshot("unsupported header".into()));
        }
        let field = |line: String, key: &str| -> Result<String, NnError> {
            line.strip_prefix(key)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| NnError::Snapshot(format!("expected `{key}`")))
        };
        let act = field(next("activation")?, "activation")?;
        let activation = Activation::from_name(&act).ok_or_else(|| NnError::Snapshot(format!("activation {act}")))?;
        let rectify = match field(next("rectify")?, "rectify")?.as_str() {
            "true" => true,
            "false" => false,
            other => return Err(NnError::Snapshot(format!("rectify {other}"))),
        };
        let sizes = field(next("sizes")?, "sizes")?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| NnError::Snapshot(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let input = field(next("input")?, "input")?
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| NnError::Snapshot(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if input.len() != 4 {
            return Err(NnError::Snapshot(format!("input map needs 4 numbers, got {}", input.len())));
        }
        let mut net = Mlp::zeros(&sizes, activation, rectify)?;
        net.scale = [input[0], input[1]];
        net.shift = [input[2], input[3]];
        for (i, p) in net.params.iter_mut().enumerate() {
            let line = next(&format!("parameter {i}"))?;
            *p = line.trim().parse().map_err(|e| NnError::Snapshot(format!("parameter {i}: {e}")))?;
        }
        Ok(net)
    }
}
