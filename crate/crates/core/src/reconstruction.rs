//! Time lifting, time reconstruction and the reference elliptic
//! reconstruction.
//!
//! The lifting of `w` on a slab is `w kappa_r(s) / tau`, where `kappa_r` is
//! the Riesz representer of `q -> q(0)` in polynomials of degree `r` on
//! `(0, 1)`. With `K(s) = int_0^s kappa_r` the time reconstruction of a
//! piecewise polynomial `w` reads `w - [[w]] (1 - K(s))` on every slab.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadrature::{series_antiderivative, series_eval, shifted_legendre, GaussRule};
use crate::spatial_fem::{
    discrete_elliptic_apply, load_fe, superspace_ref, FeFunction, SpaceRef, SpatialOperators,
};
use crate::time_dg::{DgSolution, SlabPolynomial};

/// Uniform refinement levels of the reference space used for `omega`.
pub const REFERENCE_DEPTH: u32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LiftingKernel {
    degree: usize,
    coeffs: Vec<f64>,
}

impl LiftingKernel {
    /// Solves the Legendre Gram system against point evaluation at `s = 0`.
    pub fn new(degree: usize) -> Self {
        let n = degree + 1;
        let rule = GaussRule::new(n + 1);
        let vals: Vec<Vec<f64>> = rule.points.iter().map(|&s| shifted_legendre(degree, s)).collect();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            rule.weights.iter().zip(&vals).map(|(w, l)| w * l[i] * l[j]).sum()
        });
        let rhs = DVector::from_vec(shifted_legendre(degree, 0.0));
        let c = gram.cholesky().expect("Legendre Gram matrix is SPD").solve(&rhs);
        LiftingKernel {
            degree,
            coeffs: c.iter().copied().collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Legendre coefficients of `kappa_r`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, s: f64) -> f64 {
        series_eval(&self.coeffs, s)
    }

    /// Legendre coefficients of `K(s) = int_0^s kappa_r`, degree `r + 1`.
    pub fn primitive(&self) -> Vec<f64> {
        series_antiderivative(&self.coeffs)
    }

    /// Legendre coefficients of `1 - K(s)`.
    pub fn gap_profile(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.primitive().iter().map(|c| -c).collect();
        p[0] += 1.0;
        p
    }

    /// `int_0^1 |kappa_r|`, exact: Gauss rules between the sign changes.
    pub fn abs_integral(&self) -> f64 {
        let roots = self.roots();
        let rule = GaussRule::new(self.degree + 1);
        let mut cuts = vec![0.0];
        cuts.extend(roots);
        cuts.push(1.0);
        cuts.windows(2)
            .map(|w| rule.integrate(w[0], w[1], |s| self.eval(s)).abs())
            .sum()
    }

    fn roots(&self) -> Vec<f64> {
        let m = 400 * (self.degree + 1);
        let mut out = Vec::new();
        let mut prev = self.eval(0.0);
        for k in 1..=m {
            let s = k as f64 / m as f64;
            let v = self.eval(s);
            if prev == 0.0 {
                prev = v;
                continue;
            }
            if prev * v < 0.0 {
                let (mut lo, mut hi) = ((k - 1) as f64 / m as f64, s);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if self.eval(mid) * prev > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            prev = v;
        }
        out
    }

    /// Largest `|int_0^1 kappa_r L_j - L_j(0)|` over `j = 0..=r`.
    pub fn riesz_residual(&self) -> f64 {
        let rule = GaussRule::new(self.degree + 2);
        (0..=self.degree)
            .map(|j| {
                let lhs = rule.integrate(0.0, 1.0, |s| self.eval(s) * shifted_legendre(self.degree, s)[j]);
                (lhs - if j % 2 == 0 { 1.0 } else { -1.0 }).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `C(tau, r)` with `||w - w_hat||_{L2(I_n; W)} = C ||[[w]]||_W`.
pub fn gap_constant(tau: f64, r: usize) -> f64 {
    let r = r as f64;
    (tau * (r + 1.0) / ((2.0 * r + 1.0) * (2.0 * r + 3.0))).sqrt()
}

/// The lifting of `w` on the slab `(start, start + tau)` with degree `r`.
pub fn lift(w: &FeFunction, start: f64, tau: f64, r: usize) -> SlabPolynomial {
    let k = LiftingKernel::new(r);
    let q: Vec<f64> = k.coeffs().iter().map(|c| c / tau).collect();
    SlabPolynomial::tensor(w, start, tau, &q)
}

/// Per-slab time reconstruction, each slab of degree `r + 1`.
#[derive(Debug, Clone)]
pub struct TimeReconstruction {
    slabs: Vec<SlabPolynomial>,
    jumps: Vec<FeFunction>,
}

impl TimeReconstruction {
    pub fn n_slabs(&self) -> usize {
        self.slabs.len()
    }

    /// Slab `n`, `1 <= n <= N`.
    pub fn slab(&self, n: usize) -> &SlabPolynomial {
        &self.slabs[n - 1]
    }

    /// `[[w]]_{n-1}` used on slab `n`.
    pub fn jump(&self, n: usize) -> &FeFunction {
        &self.jumps[n - 1]
    }
}

/// Reconstruction of one slab from its piece and the previous left limit.
pub fn reconstruct_slab(piece: &SlabPolynomial, left_start: &FeFunction) -> Result<(SlabPolynomial, FeFunction)> {
    let jump = piece.left().sub(left_start)?;
    let profile = LiftingKernel::new(piece.degree()).gap_profile();
    let correction = SlabPolynomial::tensor(&jump, piece.start(), piece.step(), &profile);
    Ok((piece.combine(1.0, &correction, -1.0)?, jump))
}

/// Reconstructs a piecewise polynomial given slab by slab with `w(t_0^-)`.
pub fn time_reconstruct(pieces: &[SlabPolynomial], left_start: &FeFunction) -> Result<TimeReconstruction> {
    let mut slabs = Vec::with_capacity(pieces.len());
    let mut jumps = Vec::with_capacity(pieces.len());
    let mut prev = left_start.clone();
    for piece in pieces {
        let (s, j) = reconstruct_slab(piece, &prev)?;
        prev = piece.right();
        slabs.push(s);
        jumps.push(j);
    }
    Ok(TimeReconstruction { slabs, jumps })
}

/// The reconstruction of the discrete solution with `U(t_0^-) = P_0 u_0`.
pub fn reconstruct_solution(sol: &DgSolution) -> Result<TimeReconstruction> {
    let pieces: Vec<SlabPolynomial> = (1..=sol.n_slabs()).map(|n| sol.slab(n).clone()).collect();
    time_reconstruct(&pieces, sol.u0_projection())
}

/// `(||w - w_hat||_{L2(I_n; H)}, sup_t ||w - w_hat||_H)`, the first by Gauss
/// quadrature, the second over `samples` interior points plus both ends.
pub fn reconstruction_gap_norms(w: &SlabPolynomial, w_hat: &SlabPolynomial, samples: usize) -> Result<(f64, f64)> {
    let diff = w.combine(1.0, w_hat, -1.0)?;
    let rule = GaussRule::new(diff.degree() + 2);
    let l2 = (rule.integrate(0.0, 1.0, |s| diff.at(s).l2_norm_sq()) * w.step()).sqrt();
    let linf = (0..=samples + 1)
        .map(|k| diff.at(k as f64 / (samples + 1) as f64).l2_norm())
        .fold(0.0, f64::max);
    Ok((l2, linf))
}

/// `refine(V_{n-1} + V_n, depth)`.
pub fn reference_space(prev: &SpaceRef, next: &SpaceRef, depth: u32) -> Result<SpaceRef> {
    Ok(Arc::new(superspace_ref(prev, next)?.refine(depth)?))
}

/// `omega = A^{-1} A_n w` approximated on `reference`: solves
/// `a(omega, v) = (A_n w, v)` for all `v` in the reference space.
pub fn elliptic_reconstruct(w: &FeFunction, slab_ops: &SpatialOperators, reference: &SpatialOperators) -> Result<FeFunction> {
    if !reference.space().refines(slab_ops.space()) {
        return Err(Error::ReferenceNotRefining);
    }
    let aw = slab_ops.function(discrete_elliptic_apply(slab_ops, w.on(slab_ops.space())?.values())?)?;
    let load = load_fe(reference.space(), &aw)?;
    reference.function(reference.solve_stiffness(&load)?)
}

/// Coefficientwise elliptic reconstruction of a slab polynomial.
pub fn elliptic_reconstruct_reference(
    slab: &SlabPolynomial,
    slab_ops: &SpatialOperators,
    reference: &SpatialOperators,
) -> Result<SlabPolynomial> {
    let coeffs = (0..=slab.degree())
        .map(|i| elliptic_reconstruct(&slab.coefficient(i), slab_ops, reference).map(FeFunction::into_values))
        .collect::<Result<Vec<_>>>()?;
    SlabPolynomial::new(reference.space().clone(), slab.start(), slab.step(), coeffs)
}

/// Everything on slab `n` expressed on one reference space.
#[derive(Debug, Clone)]
pub struct ReferenceSlab {
    pub ops: Arc<SpatialOperators>,
    /// `omega` on the slab.
    pub omega: SlabPolynomial,
    /// `omega(t_{n-1}^-) = A^{-1} A_{n-1} U(t_{n-1}^-)`.
    pub omega_prev: FeFunction,
    /// Time reconstruction of `omega` on the slab.
    pub omega_hat: SlabPolynomial,
}

/// Builds the reference data of slab `n` on `refine(V_{n-1} + V_n, depth)`.
pub fn reference_slab(sol: &DgSolution, n: usize, depth: u32) -> Result<ReferenceSlab> {
    let space = reference_space(sol.space(n - 1), sol.space(n), depth)?;
    let ops = Arc::new(SpatialOperators::assemble(space, sol.ops(n).coefficient())?);
    let omega = elliptic_reconstruct_reference(sol.slab(n), sol.ops(n), &ops)?;
    let omega_prev = elliptic_reconstruct(&sol.left_limit(n - 1), sol.ops(n - 1), &ops)?;
    let (omega_hat, _) = reconstruct_slab(&omega, &omega_prev)?;
    Ok(ReferenceSlab {
        ops,
        omega,
        omega_prev,
        omega_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Coefficient, Problem, Source};
    use crate::spatial_fem::{stiffness_load_fe, SpaceHierarchy};
    use crate::time_dg::{solve_all, TimePartition};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(cuts: &[f64]) -> SpaceRef {
        Arc::new(SpaceHierarchy::default().from_cuts(cuts).unwrap())
    }

    #[test]
    fn kernel_matches_closed_form() {
        for r in 0..=10 {
            let k = LiftingKernel::new(r);
            for (j, c) in k.coeffs().iter().enumerate() {
                let expect = (2 * j + 1) as f64 * if j % 2 == 0 { 1.0 } else { -1.0 };
                assert!((c - expect).abs() < 1e-9 * expect.abs(), "r={r} j={j}");
            }
            assert!(k.riesz_residual() < 1e-11);
            assert!((series_eval(&k.primitive(), 1.0) - 1.0).abs() < 1e-11);
        }
        let k1 = LiftingKernel::new(1);
        for &s in &[0.0, 0.3, 1.0] {
            assert!((k1.eval(s) - (4.0 - 6.0 * s)).abs() < 1e-13);
        }
        // |4 - 6s| integrates to 4/3 + 1/3
        assert!((k1.abs_integral() - 5.0 / 3.0).abs() < 1e-13);
        assert!((LiftingKernel::new(0).abs_integral() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gap_constant_spot_values() {
        assert!((gap_constant(3.0, 0) - 1.0).abs() < 1e-15);
        assert!((gap_constant(1.0, 1) - (2.0f64 / 15.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dg0_reconstruction_is_the_linear_interpolant() {
        let s = space(&[0.5]);
        let prev = FeFunction::new(s.clone(), vec![1.0]).unwrap();
        let piece = SlabPolynomial::new(s.clone(), 0.0, 0.5, vec![vec![3.0]]).unwrap();
        let (hat, jump) = reconstruct_slab(&piece, &prev).unwrap();
        assert_eq!(jump.values(), &[2.0]);
        for &x in &[0.0, 0.25, 0.7, 1.0] {
            assert!((hat.at(x).values()[0] - (1.0 + 2.0 * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn pure_l1_mode_reconstruction() {
        // w = c (2s - 1) on one slab, w(t_0^-) = 0: jump = -c,
        // w_hat = c (2s - 1) + c (1 - K), K = 4s - 3s^2
        let s = space(&[0.5]);
        let piece = SlabPolynomial::new(s.clone(), 0.0, 2.0, vec![vec![0.0], vec![1.5]]).unwrap();
        let (hat, _) = reconstruct_slab(&piece, &FeFunction::zero(s)).unwrap();
        for &x in &[0.0, 0.2, 0.5, 1.0] {
            let expect = 1.5 * (2.0 * x - 1.0) + 1.5 * (1.0 - 4.0 * x + 3.0 * x * x);
            assert!((hat.at(x).values()[0] - expect).abs() < 1e-13);
        }
        assert!(hat.at(0.0).values()[0].abs() < 1e-14);
    }

    #[test]
    fn lifting_stays_in_the_space_and_is_constant_for_dg0() {
        let s = space(&[0.25, 0.5]);
        let w = FeFunction::interpolate(s.clone(), |x| x * (1.0 - x));
        let l = lift(&w, 1.0, 0.5, 0);
        assert_eq!(l.space(), &s);
        for &t in &[0.0, 0.7] {
            for (a, b) in l.at(t).values().iter().zip(w.values()) {
                assert!((a - b / 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gap_identities_for_random_jumps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let prev_space = space(&[0.25, 0.5, 0.75]);
        let next_space = space(&[0.5, 0.625, 0.75]);
        for r in 0..=6 {
            for &tau in &[0.125, 0.5, 3.0] {
                let prev = FeFunction::new(prev_space.clone(), (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
                let coeffs = (0..=r).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                let piece = SlabPolynomial::new(next_space.clone(), 0.0, tau, coeffs).unwrap();
                let (hat, jump) = reconstruct_slab(&piece, &prev).unwrap();
                let (l2, linf) = reconstruction_gap_norms(&piece, &hat, 1000).unwrap();
                let j = jump.l2_norm();
                assert!((l2 - gap_constant(tau, r) * j).abs() <= 1e-9 * l2, "r={r} tau={tau}");
                assert!((linf - j).abs() <= 1e-6 * j);
                assert!((hat.left().sub(&prev).unwrap().l2_norm()) < 1e-12 * j.max(1.0));
            }
        }
    }

    #[test]
    fn elliptic_reconstruction_is_galerkin_orthogonal() {
        let a = Coefficient::piecewise(vec![0.5], vec![1.0, 3.0]).unwrap();
        let coarse = Arc::new(SpaceHierarchy::default().uniform(3).unwrap());
        let ops = SpatialOperators::assemble(coarse.clone(), &a).unwrap();
        let fine = Arc::new(coarse.refine(REFERENCE_DEPTH).unwrap());
        let fops = SpatialOperators::assemble(fine, &a).unwrap();
        let u = FeFunction::interpolate(coarse.clone(), |x| (std::f64::consts::PI * x).sin());
        let omega = elliptic_reconstruct(&u, &ops, &fops).unwrap();
        let diff = omega.sub(&u).unwrap();
        let r = stiffness_load_fe(&ops, &diff).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9), "{r:?}");
        assert!(elliptic_reconstruct(&u, &fops, &ops).is_err());
        let z = elliptic_reconstruct(&FeFunction::zero(coarse), &ops, &fops).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn reconstructed_a_commutes_with_time_reconstruction() {
        let a = Coefficient::piecewise(vec![0.5], vec![2.0, 1.0]).unwrap();
        let p = Problem::new(a, Source::Zero, Arc::new(|x: f64| x * (1.0 - x) * (3.0 - x)), 1.0, None).unwrap();
        let h = SpaceHierarchy::default();
        let spaces: Vec<SpaceRef> = [2, 4, 3].iter().map(|&l| Arc::new(h.uniform(l).unwrap())).collect();
        let part = TimePartition::uniform(1.0, 3, 2).unwrap();
        let sol = solve_all(&p, &part, &spaces).unwrap();
        for n in 1..=3 {
            let rs = reference_slab(&sol, n, REFERENCE_DEPTH).unwrap();
            // A_ref omega_hat against the reconstruction of A_n U from A_{n-1} U(t^-)
            let au = sol.discrete_elliptic(n).unwrap();
            let (au_hat, _) = reconstruct_slab(&au, &sol.elliptic_left_limit(n - 1).unwrap()).unwrap();
            for &s in &[0.0, 0.3, 0.8, 1.0] {
                let w = rs.omega_hat.at(s);
                let aw = rs.ops.function(discrete_elliptic_apply(&rs.ops, w.values()).unwrap()).unwrap();
                let d = aw.sub(&au_hat.at(s)).unwrap();
                let scale = au_hat.at(s).l2_norm().max(1.0);
                assert!(d.l2_norm() <= 1e-9 * scale, "n={n} s={s}: {}", d.l2_norm());
            }
        }
    }
}
