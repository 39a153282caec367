use super::function::FeFunction;
use super::mesh::{superspace_ref, SpaceRef};
use super::tridiag::{Ldl, Tridiagonal};
use crate::error::{Error, Result};
use crate::problem::Coefficient;
use crate::quadrature::GaussRule;

/// Mass and stiffness matrices of a P1 space for a given coefficient.
#[derive(Debug, Clone)]
pub struct SpatialOperators {
    space: SpaceRef,
    coefficient: Coefficient,
    elem_a: Vec<f64>,
    pub mass: Tridiagonal,
    pub stiffness: Tridiagonal,
    mass_ldl: Ldl,
    stiff_ldl: Ldl,
}

/// Rejects coefficients whose jumps do not sit on mesh vertices.
pub fn check_alignment(space: &super::FeSpace, a: &Coefficient) -> Result<()> {
    for &b in a.breakpoints() {
        if !space.has_vertex(b) {
            return Err(Error::CoefficientNotAligned(b));
        }
    }
    Ok(())
}

impl SpatialOperators {
    pub fn assemble(space: SpaceRef, coefficient: &Coefficient) -> Result<Self> {
        check_alignment(&space, coefficient)?;
        let ne = space.n_elements();
        let elem_a: Vec<f64> = (0..ne)
            .map(|e| {
                let (lo, hi) = space.element(e);
                coefficient.integral(lo, hi) / (hi - lo)
            })
            .collect();
        let n = space.dim();
        let mut md = vec![0.0; n];
        let mut mo = vec![0.0; n.saturating_sub(1)];
        let mut kd = vec![0.0; n];
        let mut ko = vec![0.0; n.saturating_sub(1)];
        // interior vertex i (1-based among all vertices) couples elements i-1 and i
        for i in 0..n {
            let hl = space.h(i);
            let hr = space.h(i + 1);
            md[i] = (hl + hr) / 3.0;
            kd[i] = elem_a[i] / hl + elem_a[i + 1] / hr;
            if i + 1 < n {
                mo[i] = hr / 6.0;
                ko[i] = -elem_a[i + 1] / hr;
            }
        }
        let mass = Tridiagonal::new(md, mo);
        let stiffness = Tridiagonal::new(kd, ko);
        let mass_ldl = mass.factor();
        let stiff_ldl = stiffness.factor();
        if !mass_ldl.is_positive_definite() || !stiff_ldl.is_positive_definite() {
            return Err(Error::Invariant("assembled matrices are not positive definite".into()));
        }
        Ok(SpatialOperators {
            space,
            coefficient: coefficient.clone(),
            elem_a,
            mass,
            stiffness,
            mass_ldl,
            stiff_ldl,
        })
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn coefficient(&self) -> &Coefficient {
        &self.coefficient
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Coefficient value on element `e`.
    pub fn element_coefficient(&self, e: usize) -> f64 {
        self.elem_a[e]
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn solve_mass(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs)?;
        Ok(self.mass_ldl.solve(rhs))
    }

    pub fn solve_stiffness(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs)?;
        Ok(self.stiff_ldl.solve(rhs))
    }

    pub fn function(&self, values: Vec<f64>) -> Result<FeFunction> {
        FeFunction::new(self.space.clone(), values)
    }

    /// `a(w, w)` for a member of this space.
    pub fn energy(&self, w: &[f64]) -> f64 {
        self.stiffness.quadratic_form(w)
    }
}

/// `(g, phi_i)` for every basis function of `space`, exact for FE `g` on any
/// space of the same tree.
pub fn load_fe(space: &SpaceRef, g: &FeFunction) -> Result<Vec<f64>> {
    let sup = superspace_ref(space, g.space())?;
    let gv = g.on(&sup)?.vertex_values();
    let mut out = vec![0.0; space.dim()];
    let rule = GaussRule::new(2);
    let mut e = 0;
    for o in 0..sup.n_elements() {
        let (lo, hi) = sup.element(o);
        while space.vertices()[e + 1] <= lo {
            e += 1;
        }
        let (a, b) = space.element(e);
        let h = b - a;
        let mut left = 0.0;
        let mut right = 0.0;
        for (x, w) in rule.mapped(lo, hi) {
            let s = (x - lo) / (hi - lo);
            let gx = (1.0 - s) * gv[o] + s * gv[o + 1];
            let r = (x - a) / h;
            left += w * gx * (1.0 - r);
            right += w * gx * r;
        }
        add_to_vertex(&mut out, e, left);
        add_to_vertex(&mut out, e + 1, right);
    }
    Ok(out)
}

fn add_to_vertex(out: &mut [f64], vertex: usize, v: f64) {
    if vertex >= 1 && vertex <= out.len() {
        out[vertex - 1] += v;
    }
}

/// `(f, phi_i)` by `points`-point Gauss quadrature per element.
pub fn load_fn(space: &SpaceRef, f: impl Fn(f64) -> f64, points: usize) -> Vec<f64> {
    let rule = GaussRule::new(points);
    let mut out = vec![0.0; space.dim()];
    for e in 0..space.n_elements() {
        let (a, b) = space.element(e);
        let mut left = 0.0;
        let mut right = 0.0;
        for (x, w) in rule.mapped(a, b) {
            let r = (x - a) / (b - a);
            let fx = f(x);
            left += w * fx * (1.0 - r);
            right += w * fx * r;
        }
        add_to_vertex(&mut out, e, left);
        add_to_vertex(&mut out, e + 1, right);
    }
    out
}

/// `a(w, phi_i)` for every basis function of `ops.space()`, exact for FE `w`
/// on any space of the same tree.
pub fn stiffness_load_fe(ops: &SpatialOperators, w: &FeFunction) -> Result<Vec<f64>> {
    let space = ops.space();
    let sup = superspace_ref(space, w.space())?;
    let wf = w.on(&sup)?;
    let mut out = vec![0.0; space.dim()];
    let mut e = 0;
    for o in 0..sup.n_elements() {
        let (lo, hi) = sup.element(o);
        while space.vertices()[e + 1] <= lo {
            e += 1;
        }
        let flux = ops.coefficient.integral(lo, hi) * wf.slope(o) / space.h(e);
        add_to_vertex(&mut out, e, -flux);
        add_to_vertex(&mut out, e + 1, flux);
    }
    Ok(out)
}

/// L2 projection from a load vector `(g, phi_i)`.
pub fn l2_project(ops: &SpatialOperators, load: &[f64]) -> Result<FeFunction> {
    ops.function(ops.solve_mass(load)?)
}

pub fn l2_project_fe(ops: &SpatialOperators, g: &FeFunction) -> Result<FeFunction> {
    l2_project(ops, &load_fe(ops.space(), g)?)
}

pub fn l2_project_fn(ops: &SpatialOperators, g: impl Fn(f64) -> f64, points: usize) -> Result<FeFunction> {
    l2_project(ops, &load_fn(ops.space(), g, points))
}

/// `A_h w = M^{-1} K w`.
pub fn discrete_elliptic_apply(ops: &SpatialOperators, w: &[f64]) -> Result<Vec<f64>> {
    ops.check_len(w)?;
    ops.solve_mass(&ops.stiffness.matvec(w))
}

/// `A_h^{-1} g = K^{-1} M g`.
pub fn discrete_elliptic_solve(ops: &SpatialOperators, g: &[f64]) -> Result<Vec<f64>> {
    ops.check_len(g)?;
    ops.solve_stiffness(&ops.mass.matvec(g))
}

/// A-orthogonal projection of an FE function onto `ops.space()`.
pub fn ritz_project(ops: &SpatialOperators, w: &FeFunction) -> Result<FeFunction> {
    let load = stiffness_load_fe(ops, w)?;
    ops.function(ops.solve_stiffness(&load)?)
}

/// A-orthogonal projection of a continuous function vanishing at 0 and 1.
///
/// With the coefficient constant on each element, `a(w, phi_i)` only needs
/// the values of `w` at vertices.
pub fn ritz_project_fn(ops: &SpatialOperators, w: impl Fn(f64) -> f64) -> Result<FeFunction> {
    let space = ops.space();
    let v = space.vertices();
    let wv: Vec<f64> = v.iter().map(|&x| w(x)).collect();
    let mut load = vec![0.0; space.dim()];
    for e in 0..space.n_elements() {
        let flux = ops.elem_a[e] * (wv[e + 1] - wv[e]) / space.h(e);
        add_to_vertex(&mut load, e, -flux);
        add_to_vertex(&mut load, e + 1, flux);
    }
    ops.function(ops.solve_stiffness(&load)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use crate::spatial_fem::mesh::SpaceHierarchy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn uniform(level: u32) -> SpaceRef {
        Arc::new(SpaceHierarchy::default().uniform(level).unwrap())
    }

    fn unit() -> Coefficient {
        Coefficient::constant(1.0).unwrap()
    }

    /// Dense assembly by 10-point Gauss quadrature of the hat functions.
    fn dense(space: &SpaceRef, a: &Coefficient) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = space.dim();
        let rule = GaussRule::new(10);
        let v = space.vertices();
        let hat = |i: usize, x: f64| -> (f64, f64) {
            let (l, c, r) = (v[i], v[i + 1], v[i + 2]);
            if x >= l && x <= c {
                ((x - l) / (c - l), 1.0 / (c - l))
            } else if x > c && x <= r {
                ((r - x) / (r - c), -1.0 / (r - c))
            } else {
                (0.0, 0.0)
            }
        };
        let mut m = vec![vec![0.0; n]; n];
        let mut k = vec![vec![0.0; n]; n];
        for e in 0..space.n_elements() {
            let (lo, hi) = space.element(e);
            for (x, w) in rule.mapped(lo, hi) {
                for i in 0..n {
                    for j in 0..n {
                        let (pi, di) = hat(i, x);
                        let (pj, dj) = hat(j, x);
                        m[i][j] += w * pi * pj;
                        k[i][j] += w * a.value_at(x) * di * dj;
                    }
                }
            }
        }
        (m, k)
    }

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn matrices_match_dense_assembly() {
        let a = Coefficient::piecewise(vec![0.5], vec![1.0, 4.0]).unwrap();
        let s = Arc::new(SpaceHierarchy::default().from_cuts(&[0.25, 0.5, 0.625, 0.75]).unwrap());
        let ops = SpatialOperators::assemble(s.clone(), &a).unwrap();
        let (m, k) = dense(&s, &a);
        let md = ops.mass.to_dense();
        let kd = ops.stiffness.to_dense();
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                assert!((m[i][j] - md[i][j]).abs() < 1e-14);
                assert!((k[i][j] - kd[i][j]).abs() < 1e-12);
            }
        }
        let misaligned = Coefficient::piecewise(vec![0.375], vec![1.0, 2.0]).unwrap();
        assert_eq!(
            SpatialOperators::assemble(uniform(2), &misaligned).unwrap_err(),
            Error::CoefficientNotAligned(0.375)
        );
    }

    #[test]
    fn l2_projection_examples() {
        let s = uniform(1);
        let ops = SpatialOperators::assemble(s.clone(), &unit()).unwrap();
        let p = l2_project_fn(&ops, |x| x * (1.0 - x), 10).unwrap();
        // 1x1 system: (1/3) c = int x(1-x) hat = 5/48
        let rule = GaussRule::new(10);
        let load = rule.integrate(0.0, 0.5, |x| x * (1.0 - x) * 2.0 * x)
            + rule.integrate(0.5, 1.0, |x| x * (1.0 - x) * 2.0 * (1.0 - x));
        assert!((p.values()[0] - load * 3.0).abs() < 1e-14);
        assert!((p.values()[0] - 5.0 / 16.0).abs() < 1e-14);
        let zero = l2_project_fn(&ops, |_| 0.0, 3).unwrap();
        assert!(zero.is_zero());
        let fine = uniform(4);
        let fops = SpatialOperators::assemble(fine.clone(), &unit()).unwrap();
        let g = FeFunction::interpolate(fine.clone(), |x| (PI * x).sin());
        let again = l2_project_fe(&fops, &g).unwrap();
        for (u, v) in again.values().iter().zip(g.values()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_operator_matches_dense_oracle() {
        let s = uniform(2);
        let ops = SpatialOperators::assemble(s.clone(), &unit()).unwrap();
        let w = FeFunction::interpolate(s.clone(), |x| (PI * x).sin());
        let aw = discrete_elliptic_apply(&ops, w.values()).unwrap();
        let (m, k) = dense(&s, &unit());
        let kw: Vec<f64> = k.iter().map(|row| row.iter().zip(w.values()).map(|(a, b)| a * b).sum()).collect();
        let oracle = dense_solve(m, kw);
        for (u, v) in aw.iter().zip(&oracle) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(discrete_elliptic_apply(&ops, &[0.0; 3]).unwrap().iter().all(|v| *v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let big = uniform(6);
        let bops = SpatialOperators::assemble(big, &Coefficient::piecewise(vec![0.5], vec![1.0, 4.0]).unwrap()).unwrap();
        let r: Vec<f64> = (0..bops.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = discrete_elliptic_solve(&bops, &discrete_elliptic_apply(&bops, &r).unwrap()).unwrap();
        for (u, v) in back.iter().zip(&r) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(matches!(
            discrete_elliptic_apply(&bops, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ritz_projection_is_nodal_interpolation() {
        let a = Coefficient::piecewise(vec![0.5], vec![1.0, 4.0]).unwrap();
        for cuts in [vec![0.5], vec![0.25, 0.5, 0.5625, 0.625, 0.75]] {
            let s = Arc::new(SpaceHierarchy::default().from_cuts(&cuts).unwrap());
            let ops = SpatialOperators::assemble(s.clone(), &unit()).unwrap();
            let r = ritz_project_fn(&ops, |x| x * (1.0 - x)).unwrap();
            for (x, v) in s.vertices()[1..].iter().zip(r.values()) {
                assert!((v - x * (1.0 - x)).abs() < 1e-12);
            }
            // FE input on a refinement
            let fine = Arc::new(s.refine(3).unwrap());
            let w = FeFunction::interpolate(fine, |x| (PI * x).sin() + x * x * (1.0 - x));
            let opa = SpatialOperators::assemble(s.clone(), &a).unwrap();
            let p = ritz_project(&opa, &w).unwrap();
            for (x, v) in s.vertices()[1..].iter().zip(p.values()) {
                assert!((v - w.eval(*x)).abs() < 1e-12);
            }
            let own = FeFunction::interpolate(s.clone(), |x| x.sin());
            let back = ritz_project(&opa, &own).unwrap();
            for (u, v) in back.values().iter().zip(own.values()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projections_are_linear() {
        let s = uniform(4);
        let ops = SpatialOperators::assemble(s, &Coefficient::piecewise(vec![0.25], vec![3.0, 1.0]).unwrap()).unwrap();
        let fine = uniform(7);
        let f = FeFunction::interpolate(fine.clone(), |x| (3.0 * x).sin() * x * (1.0 - x));
        let g = FeFunction::interpolate(fine, |x| x * x * (1.0 - x));
        let comb = f.combine(2.0, &g, -0.5).unwrap();
        for proj in [l2_project_fe, ritz_project] {
            let pc = proj(&ops, &comb).unwrap();
            let pf = proj(&ops, &f).unwrap();
            let pg = proj(&ops, &g).unwrap();
            for i in 0..pc.values().len() {
                let lin = 2.0 * pf.values()[i] - 0.5 * pg.values()[i];
                assert!((pc.values()[i] - lin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stiffness_is_coercive_against_seminorm() {
        let a = Coefficient::piecewise(vec![0.5], vec![1.0, 4.0]).unwrap();
        let s = uniform(5);
        let ops = SpatialOperators::assemble(s.clone(), &a).unwrap();
        let lap = SpatialOperators::assemble(s.clone(), &unit()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x: Vec<f64> = (0..s.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(ops.energy(&x) >= a.min() * lap.energy(&x) - 1e-12);
            let f = FeFunction::new(s.clone(), x.clone()).unwrap();
            assert!((lap.energy(&x) - f.h1_seminorm().powi(2)).abs() < 1e-10);
        }
    }
}
