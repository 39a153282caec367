//! Time partitions, slab polynomials and the dG(r) in time / P1 in space
//! solver.
//!
//! On slab `n` the discrete solution is `U(t) = sum_i U_i L_i(s)` with
//! `s = (t - t_{n-1}) / tau_n` and `U_i` in the slab space `V_n`. Testing
//! with `L_j phi` gives, for `j = 0..=r`,
//!
//! ```text
//! sum_i (A_ji + L_j(0) L_i(0)) M U_i + tau / (2j + 1) K U_j
//!     = L_j(0) (U(t_{n-1}^-), phi) + tau int_0^1 L_j <f, phi> ds
//! ```
//!
//! with `A_ji = int_0^1 L_i' L_j ds`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::quadrature::{series_derivative, shifted_legendre, shifted_legendre_with_derivatives, GaussRule};
use crate::spatial_fem::{
    discrete_elliptic_apply, l2_project_fn, load_fe, load_fn, FeFunction, SpaceRef, SpatialOperators,
};

pub const MAX_DEGREE: usize = 10;
/// Gauss points per element for spatial source integrals.
pub const SOURCE_SPACE_POINTS: usize = 6;
/// Gauss points per element for the initial projection.
pub const INITIAL_SPACE_POINTS: usize = 8;

/// Gauss points in time for source integrals on a slab of degree `r`.
pub fn source_time_points(r: usize) -> usize {
    r + 3
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    nodes: Vec<f64>,
    degrees: Vec<usize>,
}

impl TimePartition {
    pub fn new(nodes: Vec<f64>, degrees: Vec<usize>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::InvalidPartition("nodes must start at 0 and have at least one slab".into()));
        }
        if degrees.len() != nodes.len() - 1 {
            return Err(Error::InvalidPartition(format!(
                "{} slabs need {} degrees, got {}",
                nodes.len() - 1,
                nodes.len() - 1,
                degrees.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidPartition("nodes must increase strictly".into()));
        }
        if let Some(r) = degrees.iter().find(|&&r| r > MAX_DEGREE) {
            return Err(Error::InvalidPartition(format!("degree {r} exceeds cap {MAX_DEGREE}")));
        }
        Ok(TimePartition { nodes, degrees })
    }

    pub fn uniform(final_time: f64, slabs: usize, degree: usize) -> Result<Self> {
        if slabs == 0 {
            return Err(Error::InvalidPartition("need at least one slab".into()));
        }
        let nodes = (0..=slabs).map(|n| final_time * n as f64 / slabs as f64).collect();
        Self::new(nodes, vec![degree; slabs])
    }

    /// Nodes `t_n = T sigma^{N-n}` for `n >= 1` with degrees
    /// `r_n = base + round(slope (n - 1))`, capped at [`MAX_DEGREE`].
    pub fn geometric(final_time: f64, slabs: usize, grading: f64, base: usize, slope: f64) -> Result<Self> {
        if slabs == 0 || !(grading > 0.0 && grading < 1.0) {
            return Err(Error::InvalidPartition(format!(
                "geometric partition needs slabs >= 1 and grading in (0, 1), got {slabs}, {grading}"
            )));
        }
        let mut nodes = vec![0.0];
        nodes.extend((1..=slabs).map(|n| final_time * grading.powi((slabs - n) as i32)));
        let degrees = (0..slabs)
            .map(|k| (base + (slope * k as f64).round().max(0.0) as usize).min(MAX_DEGREE))
            .collect();
        Self::new(nodes, degrees)
    }

    pub fn n_slabs(&self) -> usize {
        self.degrees.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn node(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    pub fn final_time(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Degree of slab `n`, `1 <= n <= N`.
    pub fn degree(&self, n: usize) -> usize {
        self.degrees[n - 1]
    }

    /// Step of slab `n`, `1 <= n <= N`.
    pub fn tau(&self, n: usize) -> f64 {
        self.nodes[n] - self.nodes[n - 1]
    }

    /// Slab `n` with `t in (t_{n-1}, t_n]`; `t = 0` maps to slab 1.
    pub fn slab_of(&self, t: f64) -> usize {
        let k = self.nodes.partition_point(|&v| v < t);
        k.clamp(1, self.n_slabs())
    }

    /// Splits every slab in two, keeping its degree.
    pub fn bisect(&self) -> TimePartition {
        let mut nodes = vec![0.0];
        let mut degrees = Vec::new();
        for n in 1..=self.n_slabs() {
            nodes.push(0.5 * (self.nodes[n - 1] + self.nodes[n]));
            nodes.push(self.nodes[n]);
            degrees.extend([self.degree(n); 2]);
        }
        TimePartition { nodes, degrees }
    }

    /// Total number of space-time unknowns for the given slab dimensions.
    pub fn dof_count(&self, dims: &[usize]) -> usize {
        (1..=self.n_slabs()).map(|n| (self.degree(n) + 1) * dims[n - 1]).sum()
    }
}

/// Shifted Legendre data of one slab degree.
#[derive(Debug, Clone)]
pub struct SlabBasis {
    pub degree: usize,
    pub rule: GaussRule,
    /// `values[q][i] = L_i(s_q)` at the Gauss points.
    pub values: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    /// `L_i(0) = (-1)^i`.
    pub at_start: Vec<f64>,
}

impl SlabBasis {
    pub fn new(degree: usize) -> Self {
        Self::with_points(degree, source_time_points(degree))
    }

    pub fn with_points(degree: usize, points: usize) -> Self {
        let rule = GaussRule::new(points);
        let (values, derivatives) = rule
            .points
            .iter()
            .map(|&s| shifted_legendre_with_derivatives(degree, s))
            .unzip();
        SlabBasis {
            degree,
            rule,
            values,
            derivatives,
            at_start: shifted_legendre(degree, 0.0),
        }
    }

    /// `T_ji = int_0^1 L_i' L_j ds + L_j(0) L_i(0)`.
    pub fn temporal_matrix(&self) -> DMatrix<f64> {
        let n = self.degree + 1;
        let exact = SlabBasis::with_points(self.degree, self.degree + 1);
        DMatrix::from_fn(n, n, |j, i| {
            let a: f64 = exact
                .rule
                .weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * exact.derivatives[q][i] * exact.values[q][j])
                .sum();
            a + self.at_start[j] * self.at_start[i]
        })
    }
}

/// `sum_i c_i L_i((t - start) / step)` with coefficients in one FE space.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabPolynomial {
    space: SpaceRef,
    start: f64,
    step: f64,
    coeffs: Vec<Vec<f64>>,
}

impl SlabPolynomial {
    pub fn new(space: SpaceRef, start: f64, step: f64, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidPartition("slab polynomial needs a coefficient".into()));
        }
        if let Some(c) = coeffs.iter().find(|c| c.len() != space.dim()) {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: c.len(),
            });
        }
        Ok(SlabPolynomial {
            space,
            start,
            step,
            coeffs,
        })
    }

    pub fn zero(space: SpaceRef, start: f64, step: f64, degree: usize) -> Self {
        let d = space.dim();
        SlabPolynomial {
            space,
            start,
            step,
            coeffs: vec![vec![0.0; d]; degree + 1],
        }
    }

    /// `w(x) q(s)` for Legendre coefficients `q` of a scalar polynomial.
    pub fn tensor(w: &FeFunction, start: f64, step: f64, q: &[f64]) -> Self {
        SlabPolynomial {
            space: w.space().clone(),
            start,
            step,
            coeffs: q.iter().map(|c| w.values().iter().map(|v| c * v).collect()).collect(),
        }
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn end(&self) -> f64 {
        self.start + self.step
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn coefficient(&self, i: usize) -> FeFunction {
        FeFunction::new(self.space.clone(), self.coeffs[i].clone()).expect("coefficient length")
    }

    /// Value at local time `s in [0, 1]`.
    pub fn at(&self, s: f64) -> FeFunction {
        let l = shifted_legendre(self.degree(), s);
        self.combine_coeffs(&l)
    }

    fn combine_coeffs(&self, weights: &[f64]) -> FeFunction {
        let mut v = vec![0.0; self.space.dim()];
        for (c, w) in self.coeffs.iter().zip(weights) {
            for (a, b) in v.iter_mut().zip(c) {
                *a += w * b;
            }
        }
        FeFunction::new(self.space.clone(), v).expect("coefficient length")
    }

    pub fn at_time(&self, t: f64) -> FeFunction {
        self.at((t - self.start) / self.step)
    }

    /// Limit at the slab start, `s -> 0+`.
    pub fn left(&self) -> FeFunction {
        let w: Vec<f64> = (0..=self.degree()).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        self.combine_coeffs(&w)
    }

    /// Value at the slab end.
    pub fn right(&self) -> FeFunction {
        self.combine_coeffs(&vec![1.0; self.degree() + 1])
    }

    /// `d/dt`, kept at the same coefficient count.
    pub fn time_derivative(&self) -> SlabPolynomial {
        let d = self.space.dim();
        let mut out = vec![vec![0.0; d]; self.coeffs.len()];
        for k in 0..d {
            let series: Vec<f64> = self.coeffs.iter().map(|c| c[k]).collect();
            for (i, v) in series_derivative(&series).into_iter().enumerate() {
                out[i][k] = v / self.step;
            }
        }
        SlabPolynomial {
            space: self.space.clone(),
            start: self.start,
            step: self.step,
            coeffs: out,
        }
    }

    /// Exact representation on a refining space.
    pub fn on(&self, target: &SpaceRef) -> Result<SlabPolynomial> {
        let coeffs = (0..self.coeffs.len())
            .map(|i| self.coefficient(i).on(target).map(FeFunction::into_values))
            .collect::<Result<_>>()?;
        Ok(SlabPolynomial {
            space: target.clone(),
            start: self.start,
            step: self.step,
            coeffs,
        })
    }

    /// Applies a spatial linear map to every temporal coefficient.
    pub fn map(&self, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<SlabPolynomial> {
        let coeffs = self.coeffs.iter().map(|c| f(c)).collect::<Result<_>>()?;
        SlabPolynomial::new(self.space.clone(), self.start, self.step, coeffs)
    }

    /// `a * self + b * other` on the common superspace, same slab.
    pub fn combine(&self, a: f64, other: &SlabPolynomial, b: f64) -> Result<SlabPolynomial> {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        let mut space = None;
        for i in 0..n {
            let x = self.coeff_or_zero(i);
            let y = other.coeff_or_zero(i);
            let z = x.combine(a, &y, b)?;
            space = Some(z.space().clone());
            coeffs.push(z.into_values());
        }
        let space = space.unwrap();
        // all coefficients share the same superspace
        SlabPolynomial::new(space, self.start, self.step, coeffs)
    }

    fn coeff_or_zero(&self, i: usize) -> FeFunction {
        if i < self.coeffs.len() {
            self.coefficient(i)
        } else {
            FeFunction::zero(self.space.clone())
        }
    }

    /// `int ||.||_{L2}^2 dt` over the slab, exact.
    pub fn l2_h_norm_sq(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| self.coefficient(i).l2_norm_sq() * self.step / (2 * i + 1) as f64)
            .sum()
    }
}

/// The fully discrete solution.
#[derive(Debug, Clone)]
pub struct DgSolution {
    partition: TimePartition,
    spaces: Vec<SpaceRef>,
    ops: Vec<Arc<SpatialOperators>>,
    slabs: Vec<SlabPolynomial>,
    u0_projection: FeFunction,
}

impl DgSolution {
    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }

    pub fn n_slabs(&self) -> usize {
        self.slabs.len()
    }

    /// `V_n` for `0 <= n <= N`.
    pub fn space(&self, n: usize) -> &SpaceRef {
        &self.spaces[n]
    }

    pub fn spaces(&self) -> &[SpaceRef] {
        &self.spaces
    }

    pub fn ops(&self, n: usize) -> &Arc<SpatialOperators> {
        &self.ops[n]
    }

    /// Slab `n`, `1 <= n <= N`.
    pub fn slab(&self, n: usize) -> &SlabPolynomial {
        &self.slabs[n - 1]
    }

    pub fn u0_projection(&self) -> &FeFunction {
        &self.u0_projection
    }

    /// `U(t_n^-)`, with `U(t_0^-) = P_0 u_0`.
    pub fn left_limit(&self, n: usize) -> FeFunction {
        if n == 0 {
            self.u0_projection.clone()
        } else {
            self.slabs[n - 1].right()
        }
    }

    /// `U(t_n^+)` for `0 <= n < N`.
    pub fn right_limit(&self, n: usize) -> FeFunction {
        self.slabs[n].left()
    }

    /// `U(t)` with `t in (t_{n-1}, t_n]` evaluated on slab `n`.
    pub fn eval(&self, t: f64) -> FeFunction {
        let n = self.partition.slab_of(t);
        self.slabs[n - 1].at_time(t)
    }

    /// `[[U]]_n = U(t_n^+) - U(t_n^-)` on the superspace of `V_n` and `V_{n+1}`.
    pub fn jump(&self, n: usize) -> Result<FeFunction> {
        if n >= self.n_slabs() {
            return Err(Error::IndexOutOfRange {
                index: n,
                limit: self.n_slabs(),
            });
        }
        self.right_limit(n).sub(&self.left_limit(n))
    }

    /// `A_n U` on slab `n`.
    pub fn discrete_elliptic(&self, n: usize) -> Result<SlabPolynomial> {
        let ops = &self.ops[n];
        self.slabs[n - 1].map(|c| discrete_elliptic_apply(ops, c))
    }

    /// `A_n U(t_n^-)`, with `A_0 P_0 u_0` for `n = 0`.
    pub fn elliptic_left_limit(&self, n: usize) -> Result<FeFunction> {
        let w = self.left_limit(n);
        self.ops[n].function(discrete_elliptic_apply(&self.ops[n], w.values())?)
    }

    /// `[[A U]]_n = A_{n+1} U(t_n^+) - A_n U(t_n^-)`.
    pub fn elliptic_jump(&self, n: usize) -> Result<FeFunction> {
        if n >= self.n_slabs() {
            return Err(Error::IndexOutOfRange {
                index: n,
                limit: self.n_slabs(),
            });
        }
        let right = self.discrete_elliptic(n + 1)?.left();
        right.sub(&self.elliptic_left_limit(n)?)
    }
}

/// `m_j = int_0^1 L_j(s) (<f(t(s)), phi_k>)_k ds` for `j = 0..=r`.
pub fn source_moments(problem: &Problem, space: &SpaceRef, start: f64, tau: f64, degree: usize) -> Vec<Vec<f64>> {
    let d = space.dim();
    let mut out = vec![vec![0.0; d]; degree + 1];
    if problem.has_zero_source() {
        return out;
    }
    let basis = SlabBasis::new(degree);
    for (q, (&s, &w)) in basis.rule.points.iter().zip(&basis.rule.weights).enumerate() {
        let t = start + s * tau;
        let mut load = load_fn(space, |x| problem.source_value(x, t), SOURCE_SPACE_POINTS);
        add_point_loads(space, &problem.point_loads(t), &mut load);
        for (j, m) in out.iter_mut().enumerate() {
            let c = w * basis.values[q][j];
            for (a, b) in m.iter_mut().zip(&load) {
                *a += c * b;
            }
        }
    }
    out
}

/// Adds `m phi_k(p)` for each point load.
pub fn add_point_loads(space: &SpaceRef, loads: &[(f64, f64)], out: &mut [f64]) {
    for &(p, m) in loads {
        let e = space.locate(p);
        let (a, b) = space.element(e);
        let r = (p - a) / (b - a);
        if e >= 1 {
            out[e - 1] += m * (1.0 - r);
        }
        if e + 1 <= space.dim() {
            out[e] += m * r;
        }
    }
}

/// Solves one slab given `U(t_{n-1}^-)` on any space of the tree.
pub fn solve_slab(
    problem: &Problem,
    prev_left_limit: &FeFunction,
    ops: &SpatialOperators,
    start: f64,
    tau: f64,
    degree: usize,
) -> Result<SlabPolynomial> {
    let moments = source_moments(problem, ops.space(), start, tau, degree);
    solve_slab_system(prev_left_limit, ops, start, tau, degree, &moments)
}

fn slab_rhs(
    prev_left_limit: &FeFunction,
    ops: &SpatialOperators,
    tau: f64,
    degree: usize,
    moments: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let prev = load_fe(ops.space(), prev_left_limit)?;
    Ok((0..=degree)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            prev.iter()
                .zip(&moments[j])
                .map(|(p, m)| sign * p + tau * m)
                .collect()
        })
        .collect())
}

/// Solves the slab system for precomputed source moments.
pub fn solve_slab_system(
    prev_left_limit: &FeFunction,
    ops: &SpatialOperators,
    start: f64,
    tau: f64,
    degree: usize,
    moments: &[Vec<f64>],
) -> Result<SlabPolynomial> {
    let rhs = slab_rhs(prev_left_limit, ops, tau, degree, moments)?;
    let basis = SlabBasis::new(degree);
    let t = basis.temporal_matrix();
    let diag: Vec<f64> = (0..=degree).map(|j| tau / (2 * j + 1) as f64).collect();
    let coeffs = block_tridiagonal_solve(ops, &t, &diag, &rhs).ok_or(Error::SlabSolveFailed(0))?;
    SlabPolynomial::new(ops.space().clone(), start, tau, coeffs)
}

/// Solves `sum_i T_ji M x_i + d_j K x_j = b_j` with unknowns grouped by
/// spatial node, which makes the system block tridiagonal.
fn block_tridiagonal_solve(
    ops: &SpatialOperators,
    t: &DMatrix<f64>,
    d: &[f64],
    rhs: &[Vec<f64>],
) -> Option<Vec<Vec<f64>>> {
    let n = ops.dim();
    let r1 = d.len();
    if n == 0 {
        return Some(vec![Vec::new(); r1]);
    }
    let block = |m: f64, k: f64| -> DMatrix<f64> {
        let mut b = t * m;
        for j in 0..r1 {
            b[(j, j)] += k * d[j];
        }
        b
    };
    let md = &ops.mass.diag;
    let mo = &ops.mass.off;
    let kd = &ops.stiffness.diag;
    let ko = &ops.stiffness.off;
    let node_rhs = |k: usize| DVector::from_iterator(r1, (0..r1).map(|j| rhs[j][k]));
    let mut c_prime: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut d_prime: Vec<DVector<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut s = block(md[k], kd[k]);
        let mut b = node_rhs(k);
        if k > 0 {
            let lower = block(mo[k - 1], ko[k - 1]);
            s -= &lower * &c_prime[k - 1];
            b -= &lower * &d_prime[k - 1];
        }
        let lu = s.lu();
        if k + 1 < n {
            let upper = block(mo[k], ko[k]);
            c_prime.push(lu.solve(&upper)?);
        }
        d_prime.push(lu.solve(&b)?);
    }
    let mut x = vec![DVector::zeros(r1); n];
    x[n - 1] = d_prime[n - 1].clone();
    for k in (0..n - 1).rev() {
        x[k] = &d_prime[k] - &c_prime[k] * &x[k + 1];
    }
    Some((0..r1).map(|j| (0..n).map(|k| x[k][j]).collect()).collect())
}

/// Largest residual of the slab equations against every `L_j phi_k`,
/// relative to the size of the terms involved.
pub fn slab_residual(
    prev_left_limit: &FeFunction,
    ops: &SpatialOperators,
    slab: &SlabPolynomial,
    moments: &[Vec<f64>],
) -> Result<f64> {
    let degree = slab.degree();
    let tau = slab.step();
    let rhs = slab_rhs(prev_left_limit, ops, tau, degree, moments)?;
    let t = SlabBasis::new(degree).temporal_matrix();
    let mu: Vec<Vec<f64>> = slab.coeffs().iter().map(|c| ops.mass.matvec(c)).collect();
    let ku: Vec<Vec<f64>> = slab.coeffs().iter().map(|c| ops.stiffness.matvec(c)).collect();
    let mut worst = 0.0f64;
    let mut scale = 1e-300f64;
    for j in 0..=degree {
        for k in 0..ops.dim() {
            let mut lhs = tau / (2 * j + 1) as f64 * ku[j][k];
            let mut mag = lhs.abs();
            for i in 0..=degree {
                let v = t[(j, i)] * mu[i][k];
                lhs += v;
                mag += v.abs();
            }
            worst = worst.max((lhs - rhs[j][k]).abs());
            scale = scale.max(mag).max(rhs[j][k].abs());
        }
    }
    Ok(worst / scale)
}

/// Marches the scheme over all slabs.
///
/// `spaces` lists `V_0, ..., V_N`; a list of length `N` is read as
/// `V_1, ..., V_N` with `V_0 = V_1`, and a single space fixes the mesh.
pub fn solve_all(problem: &Problem, partition: &TimePartition, spaces: &[SpaceRef]) -> Result<DgSolution> {
    let n_slabs = partition.n_slabs();
    let spaces: Vec<SpaceRef> = if spaces.len() == 1 {
        vec![spaces[0].clone(); n_slabs + 1]
    } else if spaces.len() == n_slabs {
        std::iter::once(spaces[0].clone()).chain(spaces.iter().cloned()).collect()
    } else if spaces.len() == n_slabs + 1 {
        spaces.to_vec()
    } else {
        return Err(Error::InvalidPartition(format!(
            "{} slabs need {} or {} spaces, got {}",
            n_slabs,
            n_slabs,
            n_slabs + 1,
            spaces.len()
        )));
    };
    let mut ops: Vec<Arc<SpatialOperators>> = Vec::with_capacity(spaces.len());
    for s in &spaces {
        let reuse = ops.last().filter(|o| **o.space() == **s).cloned();
        ops.push(match reuse {
            Some(o) => o,
            None => Arc::new(SpatialOperators::assemble(s.clone(), &problem.coefficient)?),
        });
    }
    let u0 = problem.initial.clone();
    let u0_projection = l2_project_fn(&ops[0], |x| u0(x), INITIAL_SPACE_POINTS)?;
    let mut slabs = Vec::with_capacity(n_slabs);
    let mut prev = u0_projection.clone();
    for n in 1..=n_slabs {
        let slab = solve_slab(
            problem,
            &prev,
            &ops[n],
            partition.node(n - 1),
            partition.tau(n),
            partition.degree(n),
        )
        .map_err(|e| match e {
            Error::SlabSolveFailed(_) => Error::SlabSolveFailed(n),
            other => other,
        })?;
        prev = slab.right();
        slabs.push(slab);
    }
    Ok(DgSolution {
        partition: partition.clone(),
        spaces,
        ops,
        slabs,
        u0_projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Catalog, Coefficient, Source};
    use crate::spatial_fem::SpaceHierarchy;
    use std::f64::consts::PI;

    fn uniform(level: u32) -> SpaceRef {
        Arc::new(SpaceHierarchy::default().uniform(level).unwrap())
    }

    fn heat(initial: impl Fn(f64) -> f64 + Send + Sync + 'static, a: f64, t: f64) -> Problem {
        Problem::new(
            Coefficient::constant(a).unwrap(),
            Source::Zero,
            Arc::new(initial),
            t,
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_dof_dg0_is_backward_euler() {
        // one interior node at 1/2: m = 1/3, k = 4a; a = 1/12 gives k = m
        let p = heat(|_| 0.0, 1.0 / 12.0, 1.0);
        let s = uniform(1);
        let ops = SpatialOperators::assemble(s.clone(), &p.coefficient).unwrap();
        let prev = FeFunction::new(s, vec![1.0]).unwrap();
        let slab = solve_slab(&p, &prev, &ops, 0.0, 0.1, 0).unwrap();
        let u = slab.right().values()[0];
        assert!((u - 1.0 / 1.1).abs() < 1e-14);
        assert!((u - 0.909_090_909_090_909).abs() < 1e-12);
        let zero = solve_slab(&p, &FeFunction::zero(ops.space().clone()), &ops, 0.0, 0.1, 2).unwrap();
        assert!(zero.coeffs().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn jump_of_the_one_dof_example() {
        let p = heat(|x| if x == 0.5 { 1.0 } else { 2.0 * x.min(1.0 - x) }, 1.0 / 12.0, 0.2);
        let part = TimePartition::uniform(0.2, 2, 0).unwrap();
        let sol = solve_all(&p, &part, &[uniform(1)]).unwrap();
        // the tent is in V, so P_0 u_0 = 1 at the node
        assert!((sol.u0_projection().values()[0] - 1.0).abs() < 1e-14);
        let j0 = sol.jump(0).unwrap();
        assert!((j0.values()[0] + 0.090_909_090_909_090_9).abs() < 1e-12);
        assert!(matches!(sol.jump(2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn dg0_matches_backward_euler_with_averaged_source() {
        let p = Problem::from_catalog(Catalog::SinPiExpDecay, Coefficient::constant(1.0).unwrap(), 0.3).unwrap();
        let s = uniform(3);
        let part = TimePartition::uniform(0.3, 3, 0).unwrap();
        let sol = solve_all(&p, &part, &[s.clone()]).unwrap();
        let ops = sol.ops(1).clone();
        // backward Euler: (M + tau K) U^n = M U^{n-1} + int_{I_n} (f, phi) dt
        let mut u = sol.u0_projection().values().to_vec();
        let rule = GaussRule::new(3);
        for n in 1..=3 {
            let (t0, tau) = (part.node(n - 1), part.tau(n));
            let mut rhs = ops.mass.matvec(&u);
            for (t, w) in rule.mapped(t0, t0 + tau) {
                let l = load_fn(&s, |x| p.source_value(x, t), SOURCE_SPACE_POINTS);
                for (a, b) in rhs.iter_mut().zip(&l) {
                    *a += w * b;
                }
            }
            let sys = crate::spatial_fem::Tridiagonal::new(
                ops.mass.diag.iter().zip(&ops.stiffness.diag).map(|(m, k)| m + tau * k).collect(),
                ops.mass.off.iter().zip(&ops.stiffness.off).map(|(m, k)| m + tau * k).collect(),
            );
            u = sys.solve(&rhs);
            let dg = sol.left_limit(n);
            let dev = dg.values().iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-12, "slab {n}: {dev}");
        }
    }

    #[test]
    fn slab_galerkin_residual_is_small() {
        let a = Coefficient::piecewise(vec![0.5], vec![1.0, 4.0]).unwrap();
        let p = Problem::from_catalog(Catalog::SinPiExpDecay, a, 1.0).unwrap();
        let h = SpaceHierarchy::default();
        let spaces = vec![
            Arc::new(h.uniform(4).unwrap()),
            Arc::new(h.uniform(5).unwrap()),
            Arc::new(h.uniform(3).unwrap()),
            Arc::new(h.from_cuts(&[0.25, 0.5, 0.625, 0.75]).unwrap()),
        ];
        for r in [0, 1, 3, 6] {
            let part = TimePartition::uniform(1.0, 3, r).unwrap();
            let sol = solve_all(&p, &part, &spaces).unwrap();
            for n in 1..=3 {
                let m = source_moments(&p, sol.space(n), part.node(n - 1), part.tau(n), r);
                let res = slab_residual(&sol.left_limit(n - 1), sol.ops(n), sol.slab(n), &m).unwrap();
                assert!(res < 1e-10, "r={r} n={n}: {res}");
            }
        }
    }

    #[test]
    fn reproduces_polynomials_in_the_discrete_space() {
        // u = phi(x) q(t) with phi in V and f = q' phi + q A_h phi
        let s = uniform(3);
        let a = Coefficient::piecewise(vec![0.5], vec![2.0, 1.0]).unwrap();
        let ops = SpatialOperators::assemble(s.clone(), &a).unwrap();
        let phi = FeFunction::interpolate(s.clone(), |x| x * (1.0 - x) * (1.0 + x));
        let aphi = ops.function(discrete_elliptic_apply(&ops, phi.values()).unwrap()).unwrap();
        for r in 0..=3usize {
            let q = move |t: f64| (0..=r).map(|k| (k as f64 + 1.0) * t.powi(k as i32)).sum::<f64>();
            let dq = move |t: f64| (1..=r).map(|k| (k as f64 + 1.0) * k as f64 * t.powi(k as i32 - 1)).sum::<f64>();
            let (p2, a2) = (phi.clone(), aphi.clone());
            let f = move |x: f64, t: f64| dq(t) * p2.eval(x) + q(t) * a2.eval(x);
            let p0 = phi.clone();
            let prob = Problem::new(
                a.clone(),
                Source::Field(Arc::new(f)),
                Arc::new(move |x| p0.eval(x) * q(0.0)),
                1.0,
                None,
            )
            .unwrap();
            let part = TimePartition::new(vec![0.0, 0.3, 0.5, 1.0], vec![r; 3]).unwrap();
            let sol = solve_all(&prob, &part, &[s.clone()]).unwrap();
            for &t in &[0.1, 0.3, 0.42, 0.77, 1.0] {
                let u = sol.eval(t);
                for (x, v) in s.vertices()[1..].iter().zip(u.values()) {
                    assert!((v - phi.eval(*x) * q(t)).abs() < 1e-10, "r={r} t={t}");
                }
            }
        }
    }

    #[test]
    fn energy_is_dissipated_without_source() {
        let p = heat(|x| (PI * x).sin() + 0.5 * (3.0 * PI * x).sin(), 1.0, 1.0);
        let h = SpaceHierarchy::default();
        let spaces: Vec<SpaceRef> = (0..8).map(|k| Arc::new(h.uniform(3 + (k % 3)).unwrap())).collect();
        let part = TimePartition::uniform(1.0, 8, 2).unwrap();
        let sol = solve_all(&p, &part, &spaces).unwrap();
        let mut last = sol.left_limit(0).l2_norm();
        for n in 1..=7 {
            let now = sol.left_limit(n).l2_norm();
            assert!(now <= last + 1e-14);
            last = now;
        }
    }

    #[test]
    fn endpoint_error_decreases_under_step_halving() {
        // a = 1, u0 = sin(pi x), r = 1, h = 1/64, T = 1
        let p = heat(|x| (PI * x).sin(), 1.0, 1.0);
        let s = uniform(6);
        let mut errs = Vec::new();
        for k in 0..4 {
            let part = TimePartition::uniform(1.0, 8 << k, 1).unwrap();
            let sol = solve_all(&p, &part, &[s.clone()]).unwrap();
            let u = sol.left_limit(part.n_slabs());
            let rule = GaussRule::new(6);
            let mut e2 = 0.0;
            for el in 0..s.n_elements() {
                let (a, b) = s.element(el);
                e2 += rule.integrate(a, b, |x| (u.eval(x) - (-PI * PI).exp() * (PI * x).sin()).powi(2));
            }
            errs.push(e2.sqrt());
        }
        let factor = (errs[0] / errs[3]).powf(1.0 / 3.0);
        assert!((2.8..=5.2).contains(&factor), "{errs:?} {factor}");
    }

    #[test]
    fn partitions() {
        let g = TimePartition::geometric(1.0, 4, 0.25, 1, 1.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 1.0 / 64.0, 1.0 / 16.0, 0.25, 1.0]);
        assert_eq!(g.degrees(), &[1, 2, 3, 4]);
        assert!(TimePartition::new(vec![0.0, 0.5, 0.4], vec![1, 1]).is_err());
        assert!(TimePartition::uniform(1.0, 2, 11).is_err());
        let u = TimePartition::uniform(1.0, 4, 2).unwrap();
        assert_eq!(u.slab_of(0.0), 1);
        assert_eq!(u.slab_of(0.25), 1);
        assert_eq!(u.slab_of(0.26), 2);
        assert_eq!(u.bisect().n_slabs(), 8);
    }

    #[test]
    fn slab_polynomial_calculus() {
        let s = uniform(2);
        let w = FeFunction::interpolate(s.clone(), |x| x);
        // q(s) = 2 L_0 + L_1 + 0.5 L_2 on a slab of length 0.5
        let p = SlabPolynomial::tensor(&w, 1.0, 0.5, &[2.0, 1.0, 0.5]);
        let q = |s: f64| 2.0 + (2.0 * s - 1.0) + 0.5 * (6.0 * s * s - 6.0 * s + 1.0);
        assert!((p.left().values()[1] - 0.5 * q(0.0)).abs() < 1e-14);
        assert!((p.right().values()[1] - 0.5 * q(1.0)).abs() < 1e-14);
        let d = p.time_derivative();
        let dq = |s: f64| (2.0 + 0.5 * (12.0 * s - 6.0)) / 0.5;
        assert!((d.at(0.3).values()[1] - 0.5 * dq(0.3)).abs() < 1e-13);
        let n2 = p.l2_h_norm_sq();
        let rule = GaussRule::new(6);
        let direct = rule.integrate(0.0, 1.0, |s| p.at(s).l2_norm_sq()) * 0.5;
        assert!((n2 - direct).abs() < 1e-14);
    }
}
