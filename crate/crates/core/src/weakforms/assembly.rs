//! Residual and Jacobian assembly on the refined integration mesh.
//!
//! The residual splits as `r(u) = L u - b + N(u)`, where `L` collects the
//! diffusion, convection and Nitsche terms, `b` the load, and
//! `N_i(u) = ∫ σ e^{-u²} φ_i` the reaction. `L` and `b` are assembled once;
//! the reaction is re-evaluated from cached basis values.

use super::{AssemblyError, NitscheParams, ProblemDef, ProblemKind};
use crate::fespace::Discretization;
use crate::geometry::CellClass;
use crate::linalg::CsrMatrix;

fn check(expected: usize, got: usize) -> Result<(), AssemblyError> {
    if expected == got {
        Ok(())
    } else {
        Err(AssemblyError::DimensionMismatch { expected, got })
    }
}

/// Cached volume data for the reaction term.
#[derive(Debug, Clone)]
struct Reaction {
    nt: usize,
    nv: usize,
    cell_trial: Vec<usize>,
    cell_test: Vec<usize>,
    ptr: Vec<usize>,
    w: Vec<f64>,
    sigma: Vec<f64>,
    trial_vals: Vec<f64>,
    test_vals: Vec<f64>,
}

impl Reaction {
    fn cells(&self) -> usize {
        self.ptr.len() - 1
    }

    /// Trial function value at point `q` of cell `c`.
    fn trial_at(&self, c: usize, q: usize, coeffs: &[f64]) -> f64 {
        let dofs = &self.cell_trial[c * self.nt..(c + 1) * self.nt];
        let vals = &self.trial_vals[q * self.nt..(q + 1) * self.nt];
        dofs.iter().zip(vals).map(|(&d, &v)| coeffs[d] * v).sum()
    }

    fn test_at(&self, c: usize, q: usize, coeffs: &[f64]) -> f64 {
        let dofs = &self.cell_test[c * self.nv..(c + 1) * self.nv];
        let vals = &self.test_vals[q * self.nv..(q + 1) * self.nv];
        dofs.iter().zip(vals).map(|(&d, &v)| coeffs[d] * v).sum()
    }

    fn sigma_at(&self, c: usize, q: usize, sigma: Option<&[f64]>) -> f64 {
        match sigma {
            Some(s) => self.trial_at(c, q, s),
            None => self.sigma[q],
        }
    }

    fn add(&self, u: &[f64], sigma: Option<&[f64]>, r: &mut [f64]) {
        for c in 0..self.cells() {
            let test = &self.cell_test[c * self.nv..(c + 1) * self.nv];
            for q in self.ptr[c]..self.ptr[c + 1] {
                let uq = self.trial_at(c, q, u);
                let s = self.w[q] * self.sigma_at(c, q, sigma) * (-uq * uq).exp();
                for (i, &d) in test.iter().enumerate() {
                    r[d] += s * self.test_vals[q * self.nv + i];
                }
            }
        }
    }

    fn vjp(&self, u: &[f64], sigma: Option<&[f64]>, s: &[f64], du: &mut [f64], mut dsigma: Option<&mut [f64]>) {
        for c in 0..self.cells() {
            let trial = &self.cell_trial[c * self.nt..(c + 1) * self.nt];
            for q in self.ptr[c]..self.ptr[c + 1] {
                let uq = self.trial_at(c, q, u);
                let sq = self.test_at(c, q, s);
                let e = (-uq * uq).exp();
                let a = self.w[q] * self.sigma_at(c, q, sigma) * (-2.0 * uq) * e * sq;
                let vals = &self.trial_vals[q * self.nt..(q + 1) * self.nt];
                for (j, &d) in trial.iter().enumerate() {
                    du[d] += a * vals[j];
                }
                if let Some(ds) = dsigma.as_deref_mut() {
                    let b = self.w[q] * e * sq;
                    for (j, &d) in trial.iter().enumerate() {
                        ds[d] += b * vals[j];
                    }
                }
            }
        }
    }

    /// Triplets of `∂N/∂u` (`wrt_sigma = false`) or `∂N/∂σ`.
    fn triplets(&self, u: &[f64], sigma: Option<&[f64]>, wrt_sigma: bool) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        let mut local = vec![0.0; self.nv * self.nt];
        for c in 0..self.cells() {
            local.iter_mut().for_each(|v| *v = 0.0);
            for q in self.ptr[c]..self.ptr[c + 1] {
                let uq = self.trial_at(c, q, u);
                let e = (-uq * uq).exp();
                let a =
                    if wrt_sigma { self.w[q] * e } else { self.w[q] * self.sigma_at(c, q, sigma) * (-2.0 * uq) * e };
                for i in 0..self.nv {
                    let vi = a * self.test_vals[q * self.nv + i];
                    for j in 0..self.nt {
                        local[i * self.nt + j] += vi * self.trial_vals[q * self.nt + j];
                    }
                }
            }
            let test = &self.cell_test[c * self.nv..(c + 1) * self.nv];
            let trial = &self.cell_trial[c * self.nt..(c + 1) * self.nt];
            for (i, &di) in test.iter().enumerate() {
                for (j, &dj) in trial.iter().enumerate() {
                    t.push((di, dj, local[i * self.nt + j]));
                }
            }
        }
        t
    }
}

/// Assembled residual system of one discretised problem.
#[derive(Debug, Clone)]
pub struct Assembler {
    n_trial: usize,
    n_test: usize,
    degree: usize,
    linear: CsrMatrix,
    load: Vec<f64>,
    reaction: Option<Reaction>,
}

impl Assembler {
    /// Assembles with the default quadrature degree `2k + 1`.
    pub fn new(problem: &ProblemDef, disc: &Discretization, nitsche: NitscheParams) -> Result<Self, AssemblyError> {
        Self::with_degree(problem, disc, nitsche, 2 * disc.order + 1)
    }

    pub fn with_degree(
        problem: &ProblemDef,
        disc: &Discretization,
        nitsche: NitscheParams,
        degree: usize,
    ) -> Result<Self, AssemblyError> {
        let (trial, test, fine) = (&disc.trial, &disc.test, &disc.fine);
        let (nt, nv) = (trial.dofs_per_cell(), test.dofs_per_cell());
        let beta = match &problem.kind {
            ProblemKind::Poisson => [0.0, 0.0],
            ProblemKind::Nonlinear { beta, .. } => *beta,
        };
        let pen = nitsche.penalty();
        let mut triplets = Vec::new();
        let mut load = vec![0.0; test.num_dofs()];
        let mut reaction = match &problem.kind {
            ProblemKind::Poisson => None,
            ProblemKind::Nonlinear { .. } => Some(Reaction {
                nt,
                nv,
                cell_trial: Vec::new(),
                cell_test: Vec::new(),
                ptr: vec![0],
                w: Vec::new(),
                sigma: Vec::new(),
                trial_vals: Vec::new(),
                test_vals: Vec::new(),
            }),
        };
        let (mut tv, mut tg) = (vec![0.0; nt], vec![[0.0; 2]; nt]);
        let (mut vv, mut vg) = (vec![0.0; nv], vec![[0.0; 2]; nv]);
        let mut local = vec![0.0; nv * nt];
        for &c in fine.active_cells() {
            let parent = disc.parent(c);
            let tdofs = trial.cell_dofs(parent);
            let vdofs = test.cell_dofs(c);
            local.iter_mut().for_each(|v| *v = 0.0);
            let vol = fine.volume_quadrature(c, degree)?;
            for (&p, &w) in vol.points.iter().zip(&vol.weights) {
                trial.shape(parent, p, &mut tv, &mut tg);
                test.shape(c, p, &mut vv, &mut vg);
                let f = problem.source(p);
                for i in 0..nv {
                    load[vdofs[i]] += w * f * vv[i];
                    for j in 0..nt {
                        let conv = beta[0] * tg[j][0] + beta[1] * tg[j][1];
                        local[i * nt + j] += w * (vg[i][0] * tg[j][0] + vg[i][1] * tg[j][1] + conv * vv[i]);
                    }
                }
                if let Some(re) = reaction.as_mut() {
                    re.w.push(w);
                    re.sigma.push(match &problem.kind {
                        ProblemKind::Nonlinear { sigma, .. } => sigma.value(p),
                        ProblemKind::Poisson => 0.0,
                    });
                    re.trial_vals.extend_from_slice(&tv);
                    re.test_vals.extend_from_slice(&vv);
                }
            }
            if let Some(re) = reaction.as_mut() {
                re.cell_trial.extend_from_slice(tdofs);
                re.cell_test.extend_from_slice(vdofs);
                re.ptr.push(re.w.len());
            }
            let has_boundary =
                fine.class(c) == CellClass::Cut && fine.cut_cell(c).is_some_and(|cc| !cc.segments.is_empty());
            if has_boundary {
                let bq = fine.boundary_quadrature(c, degree)?;
                for ((&p, &w), &n) in bq.points.iter().zip(&bq.weights).zip(&bq.normals) {
                    trial.shape(parent, p, &mut tv, &mut tg);
                    test.shape(c, p, &mut vv, &mut vg);
                    let g = problem.dirichlet(p);
                    for i in 0..nv {
                        let dn_v = vg[i][0] * n[0] + vg[i][1] * n[1];
                        load[vdofs[i]] += w * (pen * g * vv[i] - g * dn_v);
                        for j in 0..nt {
                            let dn_u = tg[j][0] * n[0] + tg[j][1] * n[1];
                            local[i * nt + j] += w * (pen * tv[j] * vv[i] - tv[j] * dn_v - dn_u * vv[i]);
                        }
                    }
                }
            }
            for (i, &di) in vdofs.iter().enumerate() {
                for (j, &dj) in tdofs.iter().enumerate() {
                    triplets.push((di, dj, local[i * nt + j]));
                }
            }
        }
        let linear = CsrMatrix::from_triplets(test.num_dofs(), trial.num_dofs(), &triplets);
        Ok(Assembler { n_trial: trial.num_dofs(), n_test: test.num_dofs(), degree, linear, load, reaction })
    }

    pub fn n_trial(&self) -> usize {
        self.n_trial
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_linear(&self) -> bool {
        self.reaction.is_none()
    }

    /// The `u`-independent part `L` of the Jacobian.
    pub fn linear_matrix(&self) -> &CsrMatrix {
        &self.linear
    }

    /// The load vector `b`.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    fn check_sigma(&self, sigma: Option<&[f64]>) -> Result<(), AssemblyError> {
        match sigma {
            Some(s) => check(self.n_trial, s.len()),
            None => Ok(()),
        }
    }

    /// Residual `r(u)` with the problem's own `σ`.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        self.residual_with_sigma(u, None)
    }

    /// Residual with `σ` replaced by the trial-space field with nodal values
    /// `sigma` when given.
    pub fn residual_with_sigma(&self, u: &[f64], sigma: Option<&[f64]>) -> Result<Vec<f64>, AssemblyError> {
        check(self.n_trial, u.len())?;
        self.check_sigma(sigma)?;
        let mut r = self.linear.spmv(u)?;
        for (ri, bi) in r.iter_mut().zip(&self.load) {
            *ri -= bi;
        }
        if let Some(re) = &self.reaction {
            re.add(u, sigma, &mut r);
        }
        Ok(r)
    }

    /// `(∂r/∂u)ᵀ s`.
    pub fn vjp(&self, u: &[f64], s: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        Ok(self.vjp_with_sigma(u, None, s, false)?.0)
    }

    /// `(∂r/∂u)ᵀ s` and, if `want_sigma`, `(∂r/∂σ)ᵀ s` for a nodal `σ` field.
    pub fn vjp_with_sigma(
        &self,
        u: &[f64],
        sigma: Option<&[f64]>,
        s: &[f64],
        want_sigma: bool,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>), AssemblyError> {
        check(self.n_trial, u.len())?;
        check(self.n_test, s.len())?;
        self.check_sigma(sigma)?;
        let mut du = self.linear.spmv_transpose(s)?;
        let mut ds = want_sigma.then(|| vec![0.0; self.n_trial]);
        if let Some(re) = &self.reaction {
            re.vjp(u, sigma, s, &mut du, ds.as_deref_mut());
        }
        Ok((du, ds))
    }

    /// Jacobian `∂r/∂u` (test rows, trial columns).
    pub fn jacobian(&self, u: &[f64]) -> Result<CsrMatrix, AssemblyError> {
        self.jacobian_with_sigma(u, None)
    }

    pub fn jacobian_with_sigma(&self, u: &[f64], sigma: Option<&[f64]>) -> Result<CsrMatrix, AssemblyError> {
        check(self.n_trial, u.len())?;
        self.check_sigma(sigma)?;
        match &self.reaction {
            None => Ok(self.linear.clone()),
            Some(re) => {
                let d = CsrMatrix::from_triplets(self.n_test, self.n_trial, &re.triplets(u, sigma, false));
                Ok(self.linear.add_scaled(&d, 1.0)?)
            }
        }
    }

    /// `∂r/∂σ` for a nodal `σ` field; zero for the Poisson problem.
    pub fn sigma_jacobian(&self, u: &[f64]) -> Result<CsrMatrix, AssemblyError> {
        check(self.n_trial, u.len())?;
        let t = self.reaction.as_ref().map(|re| re.triplets(u, None, true)).unwrap_or_default();
        Ok(CsrMatrix::from_triplets(self.n_test, self.n_trial, &t))
    }
}

/// One-shot residual assembly at the default quadrature degree.
pub fn assemble_residual(
    problem: &ProblemDef,
    disc: &Discretization,
    nitsche: NitscheParams,
    u: &[f64],
) -> Result<Vec<f64>, AssemblyError> {
    Assembler::new(problem, disc, nitsche)?.residual(u)
}

/// One-shot Jacobian assembly at the default quadrature degree.
pub fn assemble_jacobian(
    problem: &ProblemDef,
    disc: &Discretization,
    nitsche: NitscheParams,
    u: &[f64],
) -> Result<CsrMatrix, AssemblyError> {
    Assembler::new(problem, disc, nitsche)?.jacobian(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::FactorRule;
    use crate::geometry::{CutOptions, Shape};
    use crate::mesh::BackgroundMesh;
    use crate::weakforms::{Coefficient, Manufactured};
    use crate::Jet;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc(n: usize, k: usize) -> Discretization {
        let m = BackgroundMesh::unit_square(n).unwrap();
        Discretization::build(&m, &Shape::disk([0.5, 0.5], 0.4), k, FactorRule::Pow2, CutOptions::default()).unwrap()
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn square_system_discrete_solution_has_zero_residual() {
        let d = disc(10, 1);
        let pr = ProblemDef::poisson(Manufactured::Smooth2d);
        let a = Assembler::new(&pr, &d, NitscheParams::new(10.0, d.coarse().h()).unwrap()).unwrap();
        assert_eq!(a.n_trial(), a.n_test());
        let n = a.n_trial();
        let m = DMatrix::from_row_slice(n, n, &a.linear_matrix().to_dense());
        let u = m.lu().solve(&DVector::from_column_slice(a.load())).unwrap();
        let r = a.residual(u.as_slice()).unwrap();
        assert!(max_abs(&r) <= 1e-10, "{}", max_abs(&r));
    }

    #[test]
    fn constant_data_is_consistent() {
        let d = disc(12, 2);
        let pr = ProblemDef::poisson(Manufactured::Constant(0.7));
        let a = Assembler::new(&pr, &d, NitscheParams::new(1e-2, d.coarse().h()).unwrap()).unwrap();
        let r = a.residual(&vec![0.7; a.n_trial()]).unwrap();
        assert!(max_abs(&r) <= 1e-12, "{}", max_abs(&r));
    }

    #[test]
    fn polynomial_solution_is_consistent() {
        // Q2 polynomial; the discrete boundary is polygonal and the quadrature
        // is exact, so the interpolant solves the discrete problem.
        let u = Manufactured::custom(|x: Jet, y: Jet| x * x * y - 0.5 * y * y + x * y * y * x + 0.3);
        for k in [2, 3] {
            let d = disc(8, k);
            let pr = ProblemDef::poisson(u.clone());
            let a = Assembler::new(&pr, &d, NitscheParams::new(1.0, d.coarse().h()).unwrap()).unwrap();
            let r = a.residual(&d.trial.interpolate(|p| u.value(p))).unwrap();
            assert!(max_abs(&r) <= 1e-11, "k={k}: {}", max_abs(&r));
        }
    }

    #[test]
    fn poisson_residual_is_affine() {
        let d = disc(8, 2);
        let pr = ProblemDef::poisson(Manufactured::Smooth2d);
        let a = Assembler::new(&pr, &d, NitscheParams::new(1e-2, d.coarse().h()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let u = random_vec(a.n_trial(), &mut rng);
            let r = a.residual(&u).unwrap();
            let au = a.jacobian(&u).unwrap().spmv(&u).unwrap();
            for i in 0..r.len() {
                assert!((r[i] - (au[i] - a.load()[i])).abs() <= 1e-12);
            }
        }
        let (u, v) = (random_vec(a.n_trial(), &mut rng), random_vec(a.n_trial(), &mut rng));
        let (al, be) = (0.3, -1.7);
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| al * x + be * y).collect();
        let r0 = a.residual(&vec![0.0; a.n_trial()]).unwrap();
        let (ru, rv, rw) = (a.residual(&u).unwrap(), a.residual(&v).unwrap(), a.residual(&w).unwrap());
        for i in 0..rw.len() {
            let e = al * ru[i] + be * rv[i] + (1.0 - al - be) * r0[i];
            assert!((rw[i] - e).abs() <= 1e-11);
        }
    }

    #[test]
    fn nonlinear_jacobian_matches_finite_differences() {
        let d = disc(6, 2);
        let pr = ProblemDef::nonlinear(Manufactured::Nonlinear2d, [2.0, 3.0], Coefficient::Constant(4.0));
        let a = Assembler::new(&pr, &d, NitscheParams::new(1e-2, d.coarse().h()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_vec(a.n_trial(), &mut rng);
        let jac = a.jacobian(&u).unwrap();
        let e = 1e-6;
        for j in (0..a.n_trial()).step_by(3) {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[j] += e;
            um[j] -= e;
            let (rp, rm) = (a.residual(&up).unwrap(), a.residual(&um).unwrap());
            for i in 0..a.n_test() {
                let fd = (rp[i] - rm[i]) / (2.0 * e);
                let an = jac.get(i, j);
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "({i},{j}) {fd} vs {an}");
            }
        }
        // vjp agrees with the transposed Jacobian
        let s = random_vec(a.n_test(), &mut rng);
        let v1 = a.vjp(&u, &s).unwrap();
        let v2 = jac.spmv_transpose(&s).unwrap();
        for (x, y) in v1.iter().zip(&v2) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn directional_derivative_converges() {
        let d = disc(6, 2);
        let pr = ProblemDef::nonlinear(Manufactured::Nonlinear2d, [2.0, 3.0], Coefficient::Constant(4.0));
        let a = Assembler::new(&pr, &d, NitscheParams::new(1e-2, d.coarse().h()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (u, w) = (random_vec(a.n_trial(), &mut rng), random_vec(a.n_trial(), &mut rng));
        let aw = a.jacobian(&u).unwrap().spmv(&w).unwrap();
        let r0 = a.residual(&u).unwrap();
        let err = |eps: f64| {
            let up: Vec<f64> = u.iter().zip(&w).map(|(x, y)| x + eps * y).collect();
            let rp = a.residual(&up).unwrap();
            rp.iter().zip(&r0).zip(&aw).map(|((p, q), j)| ((p - q) / eps - j).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e1 / e2 > 1.8 && e1 / e2 < 2.2, "{e1} {e2}");
    }

    #[test]
    fn sigma_field_derivatives() {
        let d = disc(6, 1);
        let sig = Coefficient::field(|p| 1.0 + p[0]);
        let pr = ProblemDef::nonlinear(Manufactured::InvState2d, [2.0, 3.0], sig);
        let a = Assembler::new(&pr, &d, NitscheParams::new(1e-2, d.coarse().h()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_vec(a.n_trial(), &mut rng);
        let sigma = d.trial.interpolate(|p| 1.0 + p[0]);
        // The nodal σ field reproduces the given linear σ exactly for k = 1.
        let r1 = a.residual(&u).unwrap();
        let r2 = a.residual_with_sigma(&u, Some(&sigma)).unwrap();
        for (x, y) in r1.iter().zip(&r2) {
            assert!((x - y).abs() < 1e-12);
        }
        let s = random_vec(a.n_test(), &mut rng);
        let (_, ds) = a.vjp_with_sigma(&u, Some(&sigma), &s, true).unwrap();
        let ds = ds.unwrap();
        let e = 1e-6;
        for j in 0..a.n_trial() {
            let (mut sp, mut sm) = (sigma.clone(), sigma.clone());
            sp[j] += e;
            sm[j] -= e;
            let rp = a.residual_with_sigma(&u, Some(&sp)).unwrap();
            let rm = a.residual_with_sigma(&u, Some(&sm)).unwrap();
            let fd: f64 = rp.iter().zip(&rm).zip(&s).map(|((p, m), si)| si * (p - m) / (2.0 * e)).sum();
            assert!((fd - ds[j]).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
        let sj = a.sigma_jacobian(&u).unwrap().spmv_transpose(&s).unwrap();
        let (_, ds_given) = a.vjp_with_sigma(&u, None, &s, true).unwrap();
        for (x, y) in sj.iter().zip(ds_given.unwrap().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_gamma_only_touches_boundary_entries() {
        let d = disc(10, 2);
        let pr = ProblemDef::poisson(Manufactured::Smooth2d);
        let h = d.coarse().h();
        let a1 = Assembler::new(&pr, &d, NitscheParams::new(1e-2, h).unwrap()).unwrap();
        let a2 = Assembler::new(&pr, &d, NitscheParams::new(2e-2, h).unwrap()).unwrap();
        // Test dofs that touch a cut cell.
        let mut near = vec![false; d.test.num_dofs()];
        for c in d.fine.cut_cells() {
            for &v in d.test.cell_dofs(c) {
                near[v] = true;
            }
        }
        let (m1, m2) = (a1.linear_matrix(), a2.linear_matrix());
        let mut changed = 0;
        for i in 0..d.test.num_dofs() {
            let (c1, v1) = m1.row(i);
            let (c2, v2) = m2.row(i);
            assert_eq!(c1, c2);
            if !near[i] {
                assert_eq!(v1, v2, "row {i}");
                assert_eq!(a1.load()[i].to_bits(), a2.load()[i].to_bits());
            } else if v1 != v2 {
                changed += 1;
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn dimension_mismatch() {
        let d = disc(6, 1);
        let pr = ProblemDef::poisson(Manufactured::Smooth2d);
        let a = Assembler::new(&pr, &d, NitscheParams::new(1e-2, d.coarse().h()).unwrap()).unwrap();
        assert!(matches!(a.residual(&[1.0]), Err(AssemblyError::DimensionMismatch { .. })));
    }
}
