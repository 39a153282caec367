//! Elliptic residual estimators and the parabolic indicators.
//!
//! The elliptic estimator bounds `w - w_h` where `w = A^{-1} g` and `w_h`
//! satisfies `a(w_h, v) = (g, v)` for all `v` in the estimator space `V`.
//! Since coefficient breakpoints are vertices of `V`, the Green's function
//! of every vertex of `V` lies in `V` and the error vanishes there. The
//! element problems then decouple: on an element of length `h` with
//! coefficient `a_K`,
//!
//! ```text
//! -a_K e'' = g + a_K sum_p [[w_h']]_p delta_p,   e = 0 at both ends,
//! ```
//!
//! and the sharp element constants `h / pi`, `h^2 / pi^2` and the explicit
//! norms of the point Green's functions give guaranteed bounds.

use crate::error::{Error, Result};
use crate::problem::{Coefficient, EllipticConstants, Problem};
use crate::quadrature::GaussRule;
use crate::reconstruction::{gap_constant, LiftingKernel};
use crate::spatial_fem::{
    discrete_elliptic_apply, l2_project_fe, subspace_ref, superspace_ref, FeFunction, SpaceRef,
    SpatialOperators,
};
use crate::time_dg::{source_moments, DgSolution, SlabPolynomial};

use std::f64::consts::PI;

/// Gauss points per element for oscillation integrals.
pub const OSC_SPACE_POINTS: usize = 8;

/// Gauss points in time for oscillation integrals.
pub fn osc_time_points(r: usize) -> usize {
    r + 6
}

/// Gauss points in time for the space indicator.
pub fn space_time_points(r: usize) -> usize {
    2 * r + 3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormTag {
    X,
    H,
    XDual,
}

/// Estimator selection; only the residual variant exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EllipticEstimatorKind {
    pub norm: NormTag,
}

impl EllipticEstimatorKind {
    pub const X: Self = EllipticEstimatorKind { norm: NormTag::X };
    pub const H: Self = EllipticEstimatorKind { norm: NormTag::H };
    pub const X_DUAL: Self = EllipticEstimatorKind { norm: NormTag::XDual };
}

/// Right-hand side of the elliptic problem: an FE function, a field, or both.
#[derive(Clone, Copy, Default)]
pub struct EllipticLoad<'a> {
    pub fe: Option<&'a FeFunction>,
    pub field: Option<&'a dyn Fn(f64) -> f64>,
}

impl<'a> EllipticLoad<'a> {
    pub fn fe(g: &'a FeFunction) -> Self {
        EllipticLoad {
            fe: Some(g),
            field: None,
        }
    }

    pub fn field(f: &'a dyn Fn(f64) -> f64) -> Self {
        EllipticLoad {
            fe: None,
            field: Some(f),
        }
    }
}

/// Residual estimate of `||A^{-1} g - w_h||_Z` with local problems on the
/// elements of `space`.
pub fn elliptic_estimate(
    kind: EllipticEstimatorKind,
    space: &SpaceRef,
    coefficient: &Coefficient,
    w_h: &FeFunction,
    load: EllipticLoad<'_>,
) -> Result<f64> {
    let sq = elliptic_estimate_local(kind, space, coefficient, w_h, load)?
        .iter()
        .map(|v| v * v)
        .sum::<f64>();
    let value = sq.sqrt();
    Ok(match kind.norm {
        NormTag::XDual => value / PI,
        _ => value,
    })
}

/// Element contributions of [`elliptic_estimate`] (before the Poincare
/// factor of the dual tag).
pub fn elliptic_estimate_local(
    kind: EllipticEstimatorKind,
    space: &SpaceRef,
    coefficient: &Coefficient,
    w_h: &FeFunction,
    load: EllipticLoad<'_>,
) -> Result<Vec<f64>> {
    if load.fe.is_none() && load.field.is_none() {
        return Err(Error::LoadNotRepresentable("no load given".into()));
    }
    let mut overlay = superspace_ref(space, w_h.space())?;
    if let Some(g) = load.fe {
        overlay = superspace_ref(&overlay, g.space())?;
    }
    let w = w_h.on(&overlay)?;
    let g = load.fe.map(|g| g.on(&overlay)).transpose()?;
    let rule = GaussRule::new(OSC_SPACE_POINTS);
    let mut out = Vec::with_capacity(space.n_elements());
    let mut o = 0;
    for e in 0..space.n_elements() {
        let (a, b) = space.element(e);
        let h = b - a;
        let a_k = coefficient
            .constant_on(a, b)
            .ok_or(Error::CoefficientNotAligned(a))?;
        let mut g_sq = 0.0;
        let mut kinks = 0.0;
        let first = o;
        while o < overlay.n_elements() && overlay.element(o).1 <= b {
            let (lo, hi) = overlay.element(o);
            if o > first {
                let p = lo - a;
                let jump = (w.slope(o) - w.slope(o - 1)).abs();
                kinks += jump
                    * match kind.norm {
                        NormTag::X => (p * (h - p) / h).sqrt(),
                        _ => p * (h - p) / (3.0 * h).sqrt(),
                    };
            }
            g_sq += match (&g, load.field) {
                (Some(g), None) => g.l2_norm_sq_on(lo, hi),
                (g, Some(f)) => rule.integrate(lo, hi, |x| {
                    let v = f(x) + g.as_ref().map_or(0.0, |g| g.eval_in(o, x));
                    v * v
                }),
                (None, None) => unreachable!(),
            };
            o += 1;
        }
        let scale = match kind.norm {
            NormTag::X => h / (PI * a_k),
            _ => h * h / (PI * PI * a_k),
        };
        out.push(scale * g_sq.max(0.0).sqrt() + kinks);
    }
    Ok(out)
}

/// `sqrt(alpha_sharp^2 E_X[Psi, v]^2 + alpha_sharp (A Psi, Psi))` with
/// `Psi = A_V^{-1} P_V v`, an upper bound of `||v||_{X'}`.
pub fn dual_norm_bound(ops: &SpatialOperators, v: &FeFunction) -> Result<f64> {
    let load = crate::spatial_fem::load_fe(ops.space(), v)?;
    let psi = ops.function(ops.solve_stiffness(&load)?)?;
    let energy: f64 = psi.values().iter().zip(&load).map(|(a, b)| a * b).sum();
    Ok(dual_norm_from(ops.space(), ops.coefficient(), &psi, energy, v)?.sqrt())
}

fn dual_norm_from(space: &SpaceRef, a: &Coefficient, psi: &FeFunction, energy: f64, v: &FeFunction) -> Result<f64> {
    let sharp = a.max();
    let e = elliptic_estimate(EllipticEstimatorKind::X, space, a, psi, EllipticLoad::fe(v))?;
    Ok(sharp * sharp * e * e + sharp * energy.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMode {
    /// Solve on the common superspace (shortcut `Psi = [[U]]` on fixed meshes).
    Superspace,
    /// Poincare-Friedrichs bound through the H-norm of `[[A U]]`.
    PfFallback,
}

/// `theta_n` for slab `n`.
pub fn theta_indicator(sol: &DgSolution, n: usize, mode: ThetaMode) -> Result<f64> {
    let jump_au = sol.elliptic_jump(n - 1)?;
    let c = gap_constant(sol.partition().tau(n), sol.partition().degree(n));
    match mode {
        ThetaMode::PfFallback => Ok(c * jump_au.l2_norm() / PI),
        ThetaMode::Superspace => {
            let prev = sol.space(n - 1);
            let next = sol.space(n);
            let a = sol.ops(n).coefficient();
            let sq = if prev == next || **prev == **next {
                let jump_u = sol.jump(n - 1)?;
                let energy = jump_au.inner_l2(&jump_u)?;
                dual_norm_from(next, a, &jump_u, energy, &jump_au)?
            } else {
                let sup = superspace_ref(prev, next)?;
                let ops = SpatialOperators::assemble(sup, a)?;
                dual_norm_bound(&ops, &jump_au)?.powi(2)
            };
            Ok(c * sq.sqrt())
        }
    }
}

/// `(y, g)` at local time `s` with `y = U' + chi([[U]])`, `g = A_n U' + chi([[A U]])`.
fn space_pair(
    du: &SlabPolynomial,
    adu: &SlabPolynomial,
    jump_u: &FeFunction,
    jump_au: &FeFunction,
    kappa: &LiftingKernel,
    s: f64,
) -> Result<(FeFunction, FeFunction)> {
    let k = kappa.eval(s) / du.step();
    Ok((du.at(s).combine(1.0, jump_u, k)?, adu.at(s).combine(1.0, jump_au, k)?))
}

/// `int_{I_n} E_{X', V^-}[y, g]^2`, Gauss quadrature in time.
pub fn space_indicator_l2t(sol: &DgSolution, n: usize) -> Result<f64> {
    let r = sol.partition().degree(n);
    let tau = sol.partition().tau(n);
    let minus = subspace_ref(sol.space(n - 1), sol.space(n))?;
    let a = sol.ops(n).coefficient().clone();
    let du = sol.slab(n).time_derivative();
    let ops = sol.ops(n).clone();
    let adu = du.map(|c| discrete_elliptic_apply(&ops, c))?;
    let jump_u = sol.jump(n - 1)?;
    let jump_au = sol.elliptic_jump(n - 1)?;
    let kappa = LiftingKernel::new(r);
    let rule = GaussRule::new(space_time_points(r));
    let mut acc = 0.0;
    for (&s, &w) in rule.points.iter().zip(&rule.weights) {
        let (y, g) = space_pair(&du, &adu, &jump_u, &jump_au, &kappa, s)?;
        let e = elliptic_estimate(EllipticEstimatorKind::X_DUAL, &minus, &a, &y, EllipticLoad::fe(&g))?;
        acc += w * e * e;
    }
    Ok(acc * tau)
}

/// The space indicator at local time `s`.
pub fn space_indicator_at(sol: &DgSolution, n: usize, s: f64) -> Result<f64> {
    let r = sol.partition().degree(n);
    let minus = subspace_ref(sol.space(n - 1), sol.space(n))?;
    let ops = sol.ops(n).clone();
    let du = sol.slab(n).time_derivative();
    let adu = du.map(|c| discrete_elliptic_apply(&ops, c))?;
    let (y, g) = space_pair(
        &du,
        &adu,
        &sol.jump(n - 1)?,
        &sol.elliptic_jump(n - 1)?,
        &LiftingKernel::new(r),
        s,
    )?;
    elliptic_estimate(EllipticEstimatorKind::X_DUAL, &minus, ops.coefficient(), &y, EllipticLoad::fe(&g))
}

/// Mesh-change indicator data of slab `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshChange {
    /// `w = U(t_{n-1}^-) - P_n U(t_{n-1}^-)`.
    pub w: FeFunction,
    pub l2t: f64,
    pub l1t: f64,
    kernel: LiftingKernel,
    tau: f64,
}

impl MeshChange {
    /// `eta_n` at local time `s`.
    pub fn eta(&self, s: f64) -> f64 {
        self.w.l2_norm() * self.kernel.eval(s).abs() / self.tau
    }
}

pub fn mesh_change_indicator(sol: &DgSolution, n: usize) -> Result<MeshChange> {
    let r = sol.partition().degree(n);
    let tau = sol.partition().tau(n);
    let prev = sol.left_limit(n - 1);
    // P_n is the identity on V_{n-1} when V_{n-1} is contained in V_n
    let w = if sol.space(n).refines(sol.space(n - 1)) {
        FeFunction::zero(sol.space(n).clone())
    } else {
        prev.sub(&l2_project_fe(sol.ops(n), &prev)?)?
    };
    let norm = w.l2_norm();
    let kernel = LiftingKernel::new(r);
    let rp1 = (r + 1) as f64;
    Ok(MeshChange {
        l2t: rp1 * rp1 / tau * norm * norm,
        l1t: norm * kernel.abs_integral(),
        w,
        kernel,
        tau,
    })
}

/// `Pi_n f` on slab `n`, the tensor L2 projection onto degree-`r` polynomials
/// with values in `V_n`, using the solver's source quadrature.
pub fn discrete_source_projection(problem: &Problem, sol: &DgSolution, n: usize) -> Result<SlabPolynomial> {
    let part = sol.partition();
    let r = part.degree(n);
    let ops = sol.ops(n);
    let moments = source_moments(problem, ops.space(), part.node(n - 1), part.tau(n), r);
    let coeffs = moments
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let c = ops.solve_mass(m)?;
            Ok(c.into_iter().map(|v| v * (2 * j + 1) as f64).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    SlabPolynomial::new(ops.space().clone(), part.node(n - 1), part.tau(n), coeffs)
}

/// `int_{I_n} osc_n^2`, where `osc_n` bounds `||f - Pi_n f||_{X'}`.
///
/// Without point loads this is `C_PF ||f - Pi_n f||_H`. With point loads
/// the X' norm is evaluated exactly: for `g = g_L + sum m_p delta_p`,
/// `||g||_{X'} = ||G - mean G||_{L2}` with `G(x) = int_0^x g_L + sum_{p < x} m_p`.
pub fn oscillation_indicator(problem: &Problem, sol: &DgSolution, n: usize) -> Result<f64> {
    if problem.has_zero_source() {
        return Ok(0.0);
    }
    let pif = discrete_source_projection(problem, sol, n)?;
    let space = sol.space(n).clone();
    let r = sol.partition().degree(n);
    let rule = GaussRule::new(osc_time_points(r));
    let inner = GaussRule::new(OSC_SPACE_POINTS);
    let mut acc = 0.0;
    for (&s, &w) in rule.points.iter().zip(&rule.weights) {
        let t = pif.start() + s * pif.step();
        let pt = pif.at(s);
        let loads = problem.point_loads(t);
        let g = |x: f64| problem.source_value(x, t) - pt.eval(x);
        let sq = if loads.is_empty() {
            let mut h2 = 0.0;
            for e in 0..space.n_elements() {
                let (a, b) = space.element(e);
                h2 += inner.integrate(a, b, |x| {
                    let v = problem.source_value(x, t) - pt.eval_in(e, x);
                    v * v
                });
            }
            h2 / (PI * PI)
        } else {
            dual_norm_sq_1d(&space, &g, &loads, &inner)
        };
        acc += w * sq;
    }
    Ok(acc * pif.step())
}

/// `||g_L + sum m_p delta_p||_{X'}^2` on `(0, 1)`, exact up to the
/// quadrature of `g_L` on the elements of `space` split at the points.
pub fn dual_norm_sq_1d(space: &SpaceRef, g: &dyn Fn(f64) -> f64, loads: &[(f64, f64)], rule: &GaussRule) -> f64 {
    let mut cuts: Vec<f64> = space.vertices().to_vec();
    cuts.extend(loads.iter().map(|l| l.0).filter(|&p| p > 0.0 && p < 1.0));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut big_g = 0.0;
    let (mut int_g, mut int_g2) = (0.0, 0.0);
    for piece in cuts.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        big_g += loads.iter().filter(|l| l.0 == a).map(|l| l.1).sum::<f64>();
        let start = big_g;
        for (x, w) in rule.mapped(a, b) {
            let v = start + rule.integrate(a, x, g);
            int_g += w * v;
            int_g2 += w * v * v;
        }
        big_g = start + rule.integrate(a, b, g);
    }
    (int_g2 - int_g * int_g).max(0.0)
}

/// `(int_{I_n} E_{X,V_n}[U, A_n U]^2, sup_{I_n} E_{H,V_n}[U, A_n U])`.
///
/// Without interior kinks both estimates are norms of `A_n U(t)`, so their
/// squares are quadratic forms in the Legendre values `l(s)`. The integral
/// uses an exact Gauss rule; the supremum uses a sampled maximum inflated by
/// the Markov inequality for polynomials.
pub fn elliptic_slab_terms(sol: &DgSolution, n: usize) -> Result<(f64, f64)> {
    let ops = sol.ops(n);
    let space = ops.space();
    let a = ops.coefficient();
    let au = sol.discrete_elliptic(n)?;
    let r = au.degree();
    let grams = |kind: EllipticEstimatorKind| -> Result<Vec<Vec<f64>>> {
        // E^2 = sum_K c_K^2 ||g||_K^2 with g = sum_i g_i L_i
        let scale: Vec<f64> = (0..space.n_elements())
            .map(|e| {
                let (lo, hi) = space.element(e);
                let h = hi - lo;
                let a_k = a.constant_on(lo, hi).unwrap_or(f64::NAN);
                match kind.norm {
                    NormTag::X => h / (PI * a_k),
                    _ => h * h / (PI * PI * a_k),
                }
            })
            .collect();
        let coeffs: Vec<Vec<f64>> = (0..=r).map(|i| au.coefficient(i).vertex_values()).collect();
        let mut gram = vec![vec![0.0; r + 1]; r + 1];
        for e in 0..space.n_elements() {
            let h = space.h(e);
            let c2 = scale[e] * scale[e];
            for i in 0..=r {
                for j in 0..=r {
                    let (x0, x1, y0, y1) = (coeffs[i][e], coeffs[i][e + 1], coeffs[j][e], coeffs[j][e + 1]);
                    gram[i][j] += c2 * h / 6.0 * (2.0 * x0 * y0 + x0 * y1 + x1 * y0 + 2.0 * x1 * y1);
                }
            }
        }
        Ok(gram)
    };
    let form = |g: &Vec<Vec<f64>>, s: f64| -> f64 {
        let l = crate::quadrature::shifted_legendre(r, s);
        let mut v = 0.0;
        for i in 0..=r {
            for j in 0..=r {
                v += l[i] * g[i][j] * l[j];
            }
        }
        v.max(0.0)
    };
    let gx = grams(EllipticEstimatorKind::X)?;
    let rule = GaussRule::new(r + 2);
    let l2t = rule.integrate(0.0, 1.0, |s| form(&gx, s)) * au.step();
    let gh = grams(EllipticEstimatorKind::H)?;
    let sup = polynomial_sup(|s| form(&gh, s), 2 * r).sqrt();
    Ok((l2t, sup))
}

/// Upper bound of `max_{[0,1]} p` for a nonnegative polynomial `p` of the
/// given degree: samples with spacing `1/m` miss at most `n^2/m max p`.
pub fn polynomial_sup(p: impl Fn(f64) -> f64, degree: usize) -> f64 {
    if degree == 0 {
        return p(0.5);
    }
    let n2 = (degree * degree) as f64;
    let m = (64.0 * n2) as usize;
    let sampled = (0..=m).map(|k| p(k as f64 / m as f64)).fold(0.0, f64::max);
    sampled / (1.0 - n2 / m as f64)
}

/// `E_{H, V^-}[[[U]], [[A U]]] + ||[[U]]||_H` for the jump at `t_{n-1}`.
pub fn linf_jump_term(sol: &DgSolution, n: usize) -> Result<f64> {
    let minus = subspace_ref(sol.space(n - 1), sol.space(n))?;
    let jump_u = sol.jump(n - 1)?;
    let jump_au = sol.elliptic_jump(n - 1)?;
    let e = elliptic_estimate(
        EllipticEstimatorKind::H,
        &minus,
        sol.ops(n).coefficient(),
        &jump_u,
        EllipticLoad::fe(&jump_au),
    )?;
    Ok(e + jump_u.l2_norm())
}

/// One slab of indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRow {
    pub n: usize,
    pub t_n: f64,
    pub tau: f64,
    pub degree: usize,
    pub theta_super: f64,
    pub theta_pf: f64,
    pub space_l2t: f64,
    pub mesh_change_l2t: f64,
    pub mesh_change_l1t: f64,
    pub osc_l2t: f64,
    /// `int E_{X, V_n}[U, A_n U]^2`.
    pub elliptic_x_l2t: f64,
    pub linf_jump: f64,
    pub linf_elliptic: f64,
    pub dim: usize,
    pub dim_plus: usize,
    pub dim_minus: usize,
}

impl IndicatorRow {
    pub fn theta(&self, mode: ThetaMode) -> f64 {
        match mode {
            ThetaMode::Superspace => self.theta_super,
            ThetaMode::PfFallback => self.theta_pf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorBreakdown {
    pub rows: Vec<IndicatorRow>,
    /// `||u_0 - P_0 u_0||_H^2`.
    pub init_term: f64,
    pub constants: EllipticConstants,
}

impl IndicatorBreakdown {
    /// The rows of slabs `1..=n`.
    pub fn upto(&self, n: usize) -> &[IndicatorRow] {
        &self.rows[..n]
    }
}

/// `||u_0 - P_0 u_0||_H^2` by Gauss quadrature on the overlay of `V_0`.
pub fn initial_error_sq(problem: &Problem, sol: &DgSolution) -> f64 {
    let p0 = sol.u0_projection();
    let space = p0.space();
    let rule = GaussRule::new(12);
    (0..space.n_elements())
        .map(|e| {
            let (a, b) = space.element(e);
            rule.integrate(a, b, |x| ((problem.initial)(x) - p0.eval_in(e, x)).powi(2))
        })
        .sum()
}

pub fn indicator_row(problem: &Problem, sol: &DgSolution, n: usize) -> Result<IndicatorRow> {
    let part = sol.partition();
    let mesh = mesh_change_indicator(sol, n)?;
    let (elliptic_x_l2t, linf_elliptic) = elliptic_slab_terms(sol, n)?;
    let plus = superspace_ref(sol.space(n - 1), sol.space(n))?;
    let minus = subspace_ref(sol.space(n - 1), sol.space(n))?;
    Ok(IndicatorRow {
        n,
        t_n: part.node(n),
        tau: part.tau(n),
        degree: part.degree(n),
        theta_super: theta_indicator(sol, n, ThetaMode::Superspace)?,
        theta_pf: theta_indicator(sol, n, ThetaMode::PfFallback)?,
        space_l2t: space_indicator_l2t(sol, n)?,
        mesh_change_l2t: mesh.l2t,
        mesh_change_l1t: mesh.l1t,
        osc_l2t: oscillation_indicator(problem, sol, n)?,
        elliptic_x_l2t,
        linf_jump: linf_jump_term(sol, n)?,
        linf_elliptic,
        dim: sol.space(n).dim(),
        dim_plus: plus.dim(),
        dim_minus: minus.dim(),
    })
}

/// Every indicator of every slab.
pub fn compute_indicators(problem: &Problem, sol: &DgSolution) -> Result<IndicatorBreakdown> {
    let rows = (1..=sol.n_slabs())
        .map(|n| indicator_row(problem, sol, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(IndicatorBreakdown {
        rows,
        init_term: initial_error_sq(problem, sol),
        constants: crate::problem::constants_for(problem)?,
    })
}
