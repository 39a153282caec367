//! Oracles, true errors and consistency checks.

use std::sync::Arc;

use crate::bounds::{assemble_all, lambda_inequality, BoundNorm, CertifiedBound, LambdaPolicy};
use crate::error::{Error, Result};
use crate::estimators::{compute_indicators, discrete_source_projection, dual_norm_sq_1d, IndicatorBreakdown, ThetaMode};
use crate::problem::{Coefficient, ExactSolution, Problem};
use crate::quadrature::GaussRule;
use crate::reconstruction::{reference_slab, LiftingKernel, ReferenceSlab, REFERENCE_DEPTH};
use crate::spatial_fem::{
    discrete_elliptic_apply, l2_project_fe, load_fe, FeFunction, SpaceRef, SpatialOperators,
};
use crate::time_dg::{slab_residual, source_moments, DgSolution, SlabPolynomial};

/// Oracle settings in one place.
pub mod tolerances {
    /// Refinement levels of oracle spaces.
    pub const ORACLE_DEPTH: u32 = super::REFERENCE_DEPTH;
    /// Extra Gauss points in time for `L2(X)` true errors, on top of `r`.
    pub const TRUE_ERROR_TIME_EXTRA: usize = 4;
    /// Gauss points per element for true errors.
    pub const TRUE_ERROR_SPACE_POINTS: usize = 12;
    /// Interior samples per slab for `Linf(H)` true errors.
    pub const LINF_SAMPLES: usize = 30;
    /// Allowed relative shortfall of a bound below the true error.
    pub const EFFECTIVITY_SLACK: f64 = 1e-6;
    /// Effectivity tripwire.
    pub const EFFECTIVITY_CAP: f64 = 200.0;
    /// Pointwise-form gap allowed on reference spaces.
    pub const POINTWISE_FORM_TOL: f64 = 1e-6;
    /// Relative slab-equation residual.
    pub const SLAB_RESIDUAL_TOL: f64 = 1e-10;
    /// Relative slack for comparisons that hold exactly in exact arithmetic.
    pub const ROUNDOFF: f64 = 1e-12;
}

/// Quadrature orders of [`true_error_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueErrorOrders {
    pub time_extra: usize,
    pub space_points: usize,
    pub linf_samples: usize,
}

impl Default for TrueErrorOrders {
    fn default() -> Self {
        TrueErrorOrders {
            time_extra: tolerances::TRUE_ERROR_TIME_EXTRA,
            space_points: tolerances::TRUE_ERROR_SPACE_POINTS,
            linf_samples: tolerances::LINF_SAMPLES,
        }
    }
}

/// Per-slab true error contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueErrorSlab {
    /// `int_{I_n} ||(u - U)'||^2`.
    pub l2x_sq: f64,
    /// `max` over the samples of `||u - U||_H` on the slab.
    pub linfh: f64,
    /// `int_{I_n} ||u_t - U' - chi([[U]])||_{X'}^2`.
    pub h1xdual_sq: f64,
}

fn exact(problem: &Problem) -> Result<&Arc<dyn ExactSolution>> {
    problem.manufactured.as_ref().ok_or(Error::NoExactSolution)
}

fn h_error_sq(u: &dyn ExactSolution, w: &FeFunction, t: f64, rule: &GaussRule) -> f64 {
    let s = w.space();
    (0..s.n_elements())
        .map(|e| {
            let (a, b) = s.element(e);
            rule.integrate(a, b, |x| (u.value(x, t) - w.eval_in(e, x)).powi(2))
        })
        .sum()
}

fn x_error_sq(u: &dyn ExactSolution, w: &FeFunction, t: f64, rule: &GaussRule) -> f64 {
    let s = w.space();
    (0..s.n_elements())
        .map(|e| {
            let (a, b) = s.element(e);
            let slope = w.slope(e);
            rule.integrate(a, b, |x| (u.dx(x, t) - slope).powi(2))
        })
        .sum()
}

/// True error contributions of every slab.
pub fn true_error_profile(sol: &DgSolution, problem: &Problem, orders: TrueErrorOrders) -> Result<Vec<TrueErrorSlab>> {
    let u = exact(problem)?.as_ref();
    let space_rule = GaussRule::new(orders.space_points);
    let mut out = Vec::with_capacity(sol.n_slabs());
    for n in 1..=sol.n_slabs() {
        let slab = sol.slab(n);
        let r = slab.degree();
        let tau = slab.step();
        let time_rule = GaussRule::new(r + orders.time_extra);
        let mut l2x_sq = 0.0;
        for (&s, &w) in time_rule.points.iter().zip(&time_rule.weights) {
            l2x_sq += w * x_error_sq(u, &slab.at(s), slab.start() + s * tau, &space_rule);
        }
        let m = orders.linf_samples + 1;
        let linfh = (0..=m)
            .map(|k| {
                let s = k as f64 / m as f64;
                h_error_sq(u, &slab.at(s), slab.start() + s * tau, &space_rule).sqrt()
            })
            .fold(0.0, f64::max);
        let jump = sol.jump(n - 1)?;
        let du = slab.time_derivative();
        let kappa = LiftingKernel::new(r);
        let mut h1_sq = 0.0;
        for (&s, &w) in time_rule.points.iter().zip(&time_rule.weights) {
            let t = slab.start() + s * tau;
            let y = du.at(s).combine(1.0, &jump, kappa.eval(s) / tau)?;
            let g = |x: f64| u.dt(x, t) - y.eval(x);
            h1_sq += w * dual_norm_sq_1d(y.space(), &g, &[], &space_rule);
        }
        out.push(TrueErrorSlab {
            l2x_sq: l2x_sq * tau,
            linfh,
            h1xdual_sq: h1_sq * tau,
        });
    }
    Ok(out)
}

/// True error up to slab `n` in the given norm.
pub fn true_error(sol: &DgSolution, problem: &Problem, norm: BoundNorm, n: usize) -> Result<f64> {
    let p = true_error_profile(sol, problem, TrueErrorOrders::default())?;
    Ok(accumulate_true(&p[..n], norm))
}

fn accumulate_true(p: &[TrueErrorSlab], norm: BoundNorm) -> f64 {
    match norm {
        BoundNorm::L2X => p.iter().map(|s| s.l2x_sq).sum::<f64>().sqrt(),
        BoundNorm::LinfH => p.iter().map(|s| s.linfh).fold(0.0, f64::max),
        BoundNorm::H1XDual => p.iter().map(|s| s.h1xdual_sq).sum::<f64>().sqrt(),
    }
}

/// `||v||_{X'}` from the Laplacian Riesz representer on `v`'s space refined
/// `depth` times; increases towards the exact value with `depth`.
pub fn dual_norm_oracle(v: &FeFunction, depth: u32) -> Result<f64> {
    let fine: SpaceRef = Arc::new(v.space().refine(depth)?);
    let ops = SpatialOperators::assemble(fine.clone(), &Coefficient::constant(1.0)?)?;
    let load = load_fe(&fine, v)?;
    let psi = ops.solve_stiffness(&load)?;
    Ok(psi.iter().zip(&load).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
}

/// `||A z||_{X'} = ||a z' - mean(a z')||_{L2}` for P1 `z`.
pub fn elliptic_dual_norm(a: &Coefficient, z: &FeFunction) -> f64 {
    let s = z.space();
    let (mut m1, mut m2) = (0.0, 0.0);
    for e in 0..s.n_elements() {
        let (lo, hi) = s.element(e);
        let q = a.integral(lo, hi) / (hi - lo) * z.slope(e);
        m1 += q * (hi - lo);
        m2 += q * q * (hi - lo);
    }
    (m2 - m1 * m1).max(0.0).sqrt()
}

/// `int_{I_n} ||A(w_hat - omega)||_{X'}^2` from the reference reconstruction.
pub fn theta_oracle_sq(rs: &ReferenceSlab) -> Result<f64> {
    let diff = rs.omega_hat.combine(1.0, &rs.omega, -1.0)?;
    let rule = GaussRule::new(diff.degree() + 2);
    let a = rs.ops.coefficient();
    Ok(rule.integrate(0.0, 1.0, |s| elliptic_dual_norm(a, &diff.at(s)).powi(2)) * diff.step())
}

/// `||omega' + chi([[omega]]) - U' - chi([[U]])||_{X'}` at local time `s`.
pub fn space_oracle(sol: &DgSolution, rs: &ReferenceSlab, n: usize, s: f64) -> Result<f64> {
    let tau = sol.partition().tau(n);
    let k = LiftingKernel::new(sol.partition().degree(n)).eval(s) / tau;
    let jump_omega = rs.omega.left().sub(&rs.omega_prev)?;
    let lhs = rs.omega.time_derivative().at(s).combine(1.0, &jump_omega, k)?;
    let rhs = sol.slab(n).time_derivative().at(s).combine(1.0, &sol.jump(n - 1)?, k)?;
    let e = lhs.sub(&rhs)?;
    let rule = GaussRule::new(4);
    Ok(dual_norm_sq_1d(e.space(), &|x| e.eval(x), &[], &rule).sqrt())
}

fn project_slab(ops: &SpatialOperators, p: &SlabPolynomial) -> Result<SlabPolynomial> {
    let coeffs = (0..=p.degree())
        .map(|i| l2_project_fe(ops, &p.coefficient(i)).map(FeFunction::into_values))
        .collect::<Result<Vec<_>>>()?;
    SlabPolynomial::new(ops.space().clone(), p.start(), p.step(), coeffs)
}

fn apply_reference(ops: &SpatialOperators, p: &SlabPolynomial) -> Result<SlabPolynomial> {
    p.on(ops.space())?.map(|c| discrete_elliptic_apply(ops, c))
}

fn lifted(w: &FeFunction, like: &SlabPolynomial) -> SlabPolynomial {
    let k = LiftingKernel::new(like.degree());
    let q: Vec<f64> = k.coeffs().iter().map(|c| c / like.step()).collect();
    SlabPolynomial::tensor(w, like.start(), like.step(), &q)
}

/// `(int_{I_n} ||d||_{X'}^2)^{1/2}` for a slab polynomial `d` with FE values.
fn l2_dual_norm(d: &SlabPolynomial) -> f64 {
    let rule = GaussRule::new(d.degree() + 2);
    let inner = GaussRule::new(4);
    let v = rule.integrate(0.0, 1.0, |s| {
        let f = d.at(s);
        dual_norm_sq_1d(f.space(), &|x| f.eval(x), &[], &inner)
    });
    (v * d.step()).max(0.0).sqrt()
}

/// Scale of a slab polynomial for relative gaps.
fn l2_dual_scale(parts: &[&SlabPolynomial]) -> f64 {
    parts.iter().map(|p| l2_dual_norm(p)).fold(0.0, f64::max)
}

/// Gap between the two sides of the pointwise form of the scheme on slab
/// `n`, assembled on the reference space; returns `(absolute, scale)`.
///
/// Left side `w_hat' + A w_hat`; right side
/// `Pi f + P_n(omega' - U') + w_hat' - P_n w_hat' + chi(P_n [[omega - U]]) + A(w_hat - omega)`
/// where `w_hat` is the time reconstruction of `omega`.
pub fn pointwise_form_check(sol: &DgSolution, problem: &Problem, n: usize, depth: u32) -> Result<(f64, f64)> {
    let rs = reference_slab(sol, n, depth)?;
    let ops_n = sol.ops(n);
    let refo = &rs.ops;
    let what = &rs.omega_hat;
    let dwhat = what.time_derivative();
    let lhs = dwhat.combine(1.0, &apply_reference(refo, what)?, 1.0)?;
    let pif = discrete_source_projection(problem, sol, n)?;
    let domega = rs.omega.time_derivative();
    let du = sol.slab(n).time_derivative();
    let t1 = project_slab(ops_n, &domega.combine(1.0, &du, -1.0)?)?;
    let t2 = dwhat.combine(1.0, &project_slab(ops_n, &dwhat)?, -1.0)?;
    let jump = rs.omega.left().sub(&rs.omega_prev)?.sub(&sol.jump(n - 1)?)?;
    let t3 = lifted(&l2_project_fe(ops_n, &jump)?, sol.slab(n));
    let t4 = apply_reference(refo, &what.combine(1.0, &rs.omega, -1.0)?)?;
    let rhs = pif.combine(1.0, &t1, 1.0)?.combine(1.0, &t2, 1.0)?.combine(1.0, &t3, 1.0)?.combine(1.0, &t4, 1.0)?;
    let gap = lhs.combine(1.0, &rhs, -1.0)?;
    Ok((l2_dual_norm(&gap), l2_dual_scale(&[&lhs, &pif])))
}

/// `L2(I_n; H)` distance between the two sides of the identity
///
/// `P_n(omega' - U') + w_hat' - P_n w_hat' + chi(P_n [[omega - U]])
///  = (omega' - U') + chi([[omega - U]]) + chi([[U - P_n U]])`.
pub fn projection_identity_check(sol: &DgSolution, n: usize, depth: u32) -> Result<(f64, f64)> {
    let rs = reference_slab(sol, n, depth)?;
    let ops_n = sol.ops(n);
    let dwhat = rs.omega_hat.time_derivative();
    let domega = rs.omega.time_derivative();
    let du = sol.slab(n).time_derivative();
    let diff = domega.combine(1.0, &du, -1.0)?;
    let jump = rs.omega.left().sub(&rs.omega_prev)?.sub(&sol.jump(n - 1)?)?;
    let lhs = project_slab(ops_n, &diff)?
        .combine(1.0, &dwhat, 1.0)?
        .combine(1.0, &project_slab(ops_n, &dwhat)?, -1.0)?
        .combine(1.0, &lifted(&l2_project_fe(ops_n, &jump)?, sol.slab(n)), 1.0)?;
    // [[U - P_n U]]_{n-1} = -(U(t^-) - P_n U(t^-)) since U(t^+) lies in V_n
    let prev = sol.left_limit(n - 1);
    let mesh = prev.sub(&l2_project_fe(ops_n, &prev)?)?.scale(-1.0);
    let rhs = diff
        .combine(1.0, &lifted(&jump, sol.slab(n)), 1.0)?
        .combine(1.0, &lifted(&mesh, sol.slab(n)), 1.0)?;
    let gap = lhs.combine(1.0, &rhs, -1.0)?;
    Ok((gap.l2_h_norm_sq().sqrt(), lhs.l2_h_norm_sq().sqrt().max(rhs.l2_h_norm_sq().sqrt())))
}

/// Bounds, true errors and effectivities at every horizon.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub breakdown: IndicatorBreakdown,
    pub theta_mode: ThetaMode,
    /// `bounds[n - 1]` holds the bounds at horizon `t_n`.
    pub bounds: Vec<Vec<CertifiedBound>>,
    /// `true_errors[n - 1] = (L2X, LinfH, H1Xdual)` when an exact solution exists.
    pub true_errors: Option<Vec<[f64; 3]>>,
}

impl ErrorReport {
    pub fn final_bound(&self, norm: BoundNorm) -> &CertifiedBound {
        self.bounds.last().unwrap().iter().find(|b| b.norm == norm).unwrap()
    }

    pub fn final_true(&self, norm: BoundNorm) -> Option<f64> {
        let t = self.true_errors.as_ref()?.last()?;
        Some(t[norm_index(norm)])
    }

    /// `bound / true` at the final horizon.
    pub fn effectivity(&self, norm: BoundNorm) -> Option<f64> {
        Some(self.final_bound(norm).value / self.final_true(norm)?)
    }

    /// Horizons where a bound falls below the true error (beyond slack) or the
    /// effectivity of a main bound exceeds the cap.
    pub fn tripwires(&self) -> Vec<Tripwire> {
        let mut out = Vec::new();
        let Some(truth) = &self.true_errors else {
            return out;
        };
        for (n, (bs, te)) in self.bounds.iter().zip(truth).enumerate() {
            for b in bs {
                let t = te[norm_index(b.norm)];
                if b.value < t * (1.0 - tolerances::EFFECTIVITY_SLACK) {
                    out.push(Tripwire::new(
                        "reliability",
                        format!("{} at slab {}: bound {:e} < true {:e}", b.norm, n + 1, b.value, t),
                    ));
                }
                if b.norm != BoundNorm::H1XDual && t > 0.0 && b.value / t > tolerances::EFFECTIVITY_CAP {
                    out.push(Tripwire::new(
                        "effectivity",
                        format!("{} at slab {}: {:.3e}", b.norm, n + 1, b.value / t),
                    ));
                }
            }
        }
        out
    }
}

/// A failed invariant, named by its check.
#[derive(Debug, Clone, PartialEq)]
pub struct Tripwire {
    pub check: &'static str,
    pub detail: String,
}

impl Tripwire {
    fn new(check: &'static str, detail: String) -> Self {
        Tripwire { check, detail }
    }
}

impl std::fmt::Display for Tripwire {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.check, self.detail)
    }
}

/// Every runtime invariant on a solved and certified run.
pub fn invariant_suite(problem: &Problem, sol: &DgSolution, report: &ErrorReport) -> Result<Vec<Tripwire>> {
    let mut out = report.tripwires();
    let part = sol.partition();
    for n in 1..=sol.n_slabs() {
        let ops = sol.ops(n);
        let moments = source_moments(problem, ops.space(), part.node(n - 1), part.tau(n), part.degree(n));
        let prev = sol.left_limit(n - 1);
        let res = slab_residual(&prev, ops, sol.slab(n), &moments)?;
        if res > tolerances::SLAB_RESIDUAL_TOL {
            out.push(Tripwire::new("slab_residual", format!("slab {n}: {res:e}")));
        }
        let (gap, _) = pointwise_form_check(sol, problem, n, tolerances::ORACLE_DEPTH)?;
        if gap > tolerances::POINTWISE_FORM_TOL {
            out.push(Tripwire::new("pointwise_form", format!("slab {n}: {gap:e}")));
        }
        let rs = reference_slab(sol, n, tolerances::ORACLE_DEPTH)?;
        let oracle = theta_oracle_sq(&rs)?;
        let row = &report.breakdown.rows[n - 1];
        for (name, theta) in [("super", row.theta_super), ("pf", row.theta_pf)] {
            if theta * theta < oracle * (1.0 - tolerances::ROUNDOFF) {
                out.push(Tripwire::new(
                    "theta_oracle",
                    format!("slab {n} {name}: {:e} < {oracle:e}", theta * theta),
                ));
            }
        }
        if let Some((lhs, rhs)) = lambda_inequality(&report.breakdown, n) {
            if lhs > rhs * (1.0 + tolerances::ROUNDOFF) {
                out.push(Tripwire::new("lambda_inequality", format!("slab {n}: {lhs:e} > {rhs:e}")));
            }
        }
    }
    Ok(out)
}

fn norm_index(norm: BoundNorm) -> usize {
    match norm {
        BoundNorm::L2X => 0,
        BoundNorm::LinfH => 1,
        BoundNorm::H1XDual => 2,
    }
}

/// Indicators, bounds at every horizon and, with an exact solution, true errors.
pub fn certify(problem: &Problem, sol: &DgSolution, policy: LambdaPolicy, mode: ThetaMode) -> Result<ErrorReport> {
    let breakdown = compute_indicators(problem, sol)?;
    certify_with(problem, sol, breakdown, policy, mode)
}

/// As [`certify`] with precomputed indicators.
pub fn certify_with(
    problem: &Problem,
    sol: &DgSolution,
    breakdown: IndicatorBreakdown,
    policy: LambdaPolicy,
    mode: ThetaMode,
) -> Result<ErrorReport> {
    let bounds = (1..=sol.n_slabs())
        .map(|n| assemble_all(&breakdown, n, policy, mode))
        .collect::<Result<Vec<_>>>()?;
    let true_errors = match problem.manufactured {
        Some(_) => {
            let p = true_error_profile(sol, problem, TrueErrorOrders::default())?;
            Some(
                (1..=p.len())
                    .map(|n| {
                        [
                            accumulate_true(&p[..n], BoundNorm::L2X),
                            accumulate_true(&p[..n], BoundNorm::LinfH),
                            accumulate_true(&p[..n], BoundNorm::H1XDual),
                        ]
                    })
                    .collect(),
            )
        }
        None => None,
    };
    Ok(ErrorReport {
        breakdown,
        theta_mode: mode,
        bounds,
        true_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Catalog, Source};
    use crate::spatial_fem::SpaceHierarchy;
    use crate::time_dg::{solve_all, TimePartition};
    use std::f64::consts::PI;

    fn uniform(level: u32) -> SpaceRef {
        Arc::new(SpaceHierarchy::default().uniform(level).unwrap())
    }

    fn one() -> Coefficient {
        Coefficient::constant(1.0).unwrap()
    }

    #[test]
    fn true_error_of_the_zero_solution() {
        let p = Problem::from_catalog(Catalog::SinPiExpDecay, one(), 1.0).unwrap();
        let zero = Problem::new(one(), Source::Zero, Arc::new(|_| 0.0), 1.0, None).unwrap();
        let part = TimePartition::uniform(1.0, 4, 1).unwrap();
        let sol = solve_all(&zero, &part, &[uniform(4)]).unwrap();
        let l2 = true_error(&sol, &p, BoundNorm::L2X, 4).unwrap();
        // int_0^1 (pi^2 / 2) e^{-2t} dt
        let expect = PI / 2.0 * (1.0 - (-2.0f64).exp()).sqrt();
        assert!((l2 - expect).abs() < 1e-9, "{l2} {expect}");
        let linf = true_error(&sol, &p, BoundNorm::LinfH, 4).unwrap();
        assert!((linf - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(true_error(&sol, &zero, BoundNorm::L2X, 1), Err(Error::NoExactSolution)));
    }

    #[test]
    fn true_error_vanishes_for_a_represented_solution() {
        // the tent solution lies in V, so U differs from u only by the time error;
        // with dG(r) for r large the error reaches the quadrature floor
        let p = Problem::from_catalog(Catalog::TentExpDecay, one(), 0.25).unwrap();
        let part = TimePartition::uniform(0.25, 2, 8).unwrap();
        let sol = solve_all(&p, &part, &[uniform(1)]).unwrap();
        let e = true_error(&sol, &p, BoundNorm::L2X, 2).unwrap();
        assert!(e < 1e-10, "{e}");
    }

    #[test]
    fn quadrature_orders_are_converged() {
        let p = Problem::from_catalog(Catalog::SinPiExpDecay, one(), 1.0).unwrap();
        let part = TimePartition::uniform(1.0, 4, 1).unwrap();
        let sol = solve_all(&p, &part, &[uniform(4)]).unwrap();
        let base = true_error_profile(&sol, &p, TrueErrorOrders::default()).unwrap();
        let d = TrueErrorOrders::default();
        let double = TrueErrorOrders {
            time_extra: 2 * d.time_extra + 1,
            space_points: 2 * d.space_points,
            linf_samples: d.linf_samples,
        };
        let fine = true_error_profile(&sol, &p, double).unwrap();
        let a = accumulate_true(&base, BoundNorm::L2X);
        let b = accumulate_true(&fine, BoundNorm::L2X);
        assert!((a - b).abs() <= 1e-8 * b);
    }

    #[test]
    fn dual_norm_oracle_values() {
        let s = uniform(3);
        assert_eq!(dual_norm_oracle(&FeFunction::zero(s.clone()), 2).unwrap(), 0.0);
        let v = FeFunction::interpolate(s, |x| (PI * x).sin());
        let mut last = 0.0;
        for depth in 0..5 {
            let now = dual_norm_oracle(&v, depth).unwrap();
            assert!(now >= last - 1e-14);
            last = now;
        }
        // v = 1 is not an FE function; the exact 1D formula covers it
        let rule = GaussRule::new(4);
        let c = dual_norm_sq_1d(&uniform(2), &|_| 1.0, &[], &rule).sqrt();
        assert!((c - 1.0 / 12f64.sqrt()).abs() < 1e-14);
        // and agrees with the Riesz oracle on FE functions
        let exact = dual_norm_sq_1d(v.space(), &|x| v.eval(x), &[], &rule).sqrt();
        assert!(exact >= last && exact - last < 1e-3 * exact);
    }

    #[test]
    fn pointwise_form_on_a_one_dof_space() {
        let p = Problem::new(
            one(),
            Source::Field(Arc::new(|x, t| (1.0 + t) * x * (1.0 - x))),
            Arc::new(|x: f64| (PI * x).sin()),
            0.5,
            None,
        )
        .unwrap();
        let part = TimePartition::uniform(0.5, 1, 0).unwrap();
        let sol = solve_all(&p, &part, &[uniform(1)]).unwrap();
        // U' = 0, A U = 12 U, chi(P [[U]]) = [[U]] / tau, Pi f = 3 <f, phi>
        let u = sol.slab(1).coefficient(0).values()[0];
        let jump = u - sol.u0_projection().values()[0];
        let pif = discrete_source_projection(&p, &sol, 1).unwrap().coefficient(0).values()[0];
        assert!((12.0 * u + jump / 0.5 - pif).abs() < 1e-12);
        let (gap, _) = pointwise_form_check(&sol, &p, 1, 0).unwrap();
        assert!(gap < 1e-12, "{gap}");
    }

    #[test]
    fn consistency_checks_on_changing_meshes() {
        let a = Coefficient::piecewise(vec![0.5], vec![1.0, 2.0]).unwrap();
        let p = Problem::from_catalog(Catalog::SinPiExpDecay, a, 1.0).unwrap();
        let spaces: Vec<SpaceRef> = [3, 4, 2, 3].iter().map(|&l| uniform(l)).collect();
        let part = TimePartition::uniform(1.0, 4, 2).unwrap();
        let sol = solve_all(&p, &part, &spaces).unwrap();
        for n in 1..=4 {
            let (gap, scale) = pointwise_form_check(&sol, &p, n, REFERENCE_DEPTH).unwrap();
            assert!(gap <= tolerances::POINTWISE_FORM_TOL, "n={n}: {gap} (scale {scale})");
            let (g2, s2) = projection_identity_check(&sol, n, REFERENCE_DEPTH).unwrap();
            assert!(g2 <= 1e-10 * s2.max(1.0), "n={n}: {g2} {s2}");
        }
    }

    #[test]
    fn theta_and_space_dominate_their_oracles() {
        let a = Coefficient::piecewise(vec![0.5], vec![1.0, 4.0]).unwrap();
        let p = Problem::from_catalog(Catalog::SinPiExpDecay, a, 1.0).unwrap();
        let spaces: Vec<SpaceRef> = [4, 5, 3, 4].iter().map(|&l| uniform(l)).collect();
        let part = TimePartition::uniform(1.0, 4, 1).unwrap();
        let sol = solve_all(&p, &part, &spaces).unwrap();
        for n in 1..=4 {
            let rs = reference_slab(&sol, n, REFERENCE_DEPTH).unwrap();
            let oracle = theta_oracle_sq(&rs).unwrap();
            for mode in [ThetaMode::Superspace, ThetaMode::PfFallback] {
                let theta = crate::estimators::theta_indicator(&sol, n, mode).unwrap();
                assert!(theta * theta >= oracle, "n={n} {mode:?}: {} < {oracle}", theta * theta);
            }
            for &s in &[0.1, 0.5, 0.9] {
                let est = crate::estimators::space_indicator_at(&sol, n, s).unwrap();
                let truth = space_oracle(&sol, &rs, n, s).unwrap();
                assert!(est >= truth, "n={n} s={s}: {est} < {truth}");
            }
        }
    }

    #[test]
    fn certified_report_is_reliable() {
        let p = Problem::from_catalog(Catalog::SinPiExpDecay, one(), 1.0).unwrap();
        let part = TimePartition::uniform(1.0, 4, 1).unwrap();
        let sol = solve_all(&p, &part, &[uniform(4)]).unwrap();
        let rep = certify(&p, &sol, LambdaPolicy::Auto, ThetaMode::Superspace).unwrap();
        assert!(rep.tripwires().is_empty(), "{:?}", rep.tripwires());
        let all = invariant_suite(&p, &sol, &rep).unwrap();
        assert!(all.is_empty(), "{all:?}");
        for norm in [BoundNorm::L2X, BoundNorm::LinfH, BoundNorm::H1XDual] {
            assert!(rep.effectivity(norm).unwrap() >= 1.0);
        }
    }

    #[test]
    fn tripwires_name_their_check() {
        let p = Problem::from_catalog(Catalog::SinPiExpDecay, one(), 1.0).unwrap();
        let part = TimePartition::uniform(1.0, 2, 0).unwrap();
        let sol = solve_all(&p, &part, &[uniform(3)]).unwrap();
        let mut rep = certify(&p, &sol, LambdaPolicy::Auto, ThetaMode::Superspace).unwrap();
        for b in rep.bounds.last_mut().unwrap() {
            b.value *= 1e-3;
        }
        let t = rep.tripwires();
        assert!(t.iter().any(|t| t.check == "reliability"));
        assert!(t[0].to_string().starts_with("reliability: "));
    }

    #[test]
    fn pointwise_form_of_zero_data_is_zero() {
        let zero = Problem::new(one(), Source::Zero, Arc::new(|_| 0.0), 1.0, None).unwrap();
        let spaces: Vec<SpaceRef> = [2, 3].iter().map(|&l| uniform(l)).collect();
        let part = TimePartition::uniform(1.0, 2, 1).unwrap();
        let sol = solve_all(&zero, &part, &spaces).unwrap();
        for n in 1..=2 {
            assert_eq!(pointwise_form_check(&sol, &zero, n, 2).unwrap().0, 0.0);
        }
    }
}
