use std::sync::Arc;

use super::mesh::{superspace_ref, SpaceRef};
use crate::error::{Error, Result};

/// A member of a P1 space, stored by its interior nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    space: SpaceRef,
    values: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: SpaceRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: values.len(),
            });
        }
        Ok(FeFunction { space, values })
    }

    pub fn zero(space: SpaceRef) -> Self {
        let n = space.dim();
        FeFunction {
            space,
            values: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: SpaceRef, f: impl Fn(f64) -> f64) -> Self {
        let v = space.vertices();
        let values = v[1..v.len() - 1].iter().map(|&x| f(x)).collect();
        FeFunction { space, values }
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Nodal values at every vertex, boundary zeros included.
    pub fn vertex_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 2);
        out.push(0.0);
        out.extend_from_slice(&self.values);
        out.push(0.0);
        out
    }

    fn node(&self, k: usize) -> f64 {
        if k == 0 || k > self.values.len() {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let e = self.space.locate(x);
        let (a, b) = self.space.element(e);
        let s = (x - a) / (b - a);
        (1.0 - s) * self.node(e) + s * self.node(e + 1)
    }

    /// Derivative on element `e`.
    pub fn slope(&self, e: usize) -> f64 {
        (self.node(e + 1) - self.node(e)) / self.space.h(e)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Exact representation on a space refining this one.
    pub fn on(&self, target: &SpaceRef) -> Result<FeFunction> {
        if Arc::ptr_eq(&self.space, target) || *self.space == **target {
            return Ok(FeFunction {
                space: target.clone(),
                values: self.values.clone(),
            });
        }
        if !target.refines(&self.space) {
            return Err(Error::InvalidMesh(
                "target space does not contain the function's space".into(),
            ));
        }
        let v = target.vertices();
        let mut values = Vec::with_capacity(target.dim());
        let mut e = 0;
        for &x in &v[1..v.len() - 1] {
            while self.space.vertices()[e + 1] < x {
                e += 1;
            }
            let (a, b) = self.space.element(e);
            let s = (x - a) / (b - a);
            values.push((1.0 - s) * self.node(e) + s * self.node(e + 1));
        }
        Ok(FeFunction {
            space: target.clone(),
            values,
        })
    }

    pub fn scale(&self, c: f64) -> FeFunction {
        FeFunction {
            space: self.space.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `a * self + b * other` on the common superspace.
    pub fn combine(&self, a: f64, other: &FeFunction, b: f64) -> Result<FeFunction> {
        let sup = superspace_ref(&self.space, &other.space)?;
        let x = self.on(&sup)?;
        let y = other.on(&sup)?;
        let values = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        Ok(FeFunction { space: sup, values })
    }

    pub fn add(&self, other: &FeFunction) -> Result<FeFunction> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &FeFunction) -> Result<FeFunction> {
        self.combine(1.0, other, -1.0)
    }

    /// `(self, other)_{L2}`, exact.
    pub fn inner_l2(&self, other: &FeFunction) -> Result<f64> {
        let sup = superspace_ref(&self.space, &other.space)?;
        let x = self.on(&sup)?.vertex_values();
        let y = other.on(&sup)?.vertex_values();
        let mut acc = 0.0;
        for e in 0..sup.n_elements() {
            let h = sup.h(e);
            acc += h / 6.0
                * (2.0 * x[e] * y[e] + x[e] * y[e + 1] + x[e + 1] * y[e] + 2.0 * x[e + 1] * y[e + 1]);
        }
        Ok(acc)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let v = self.vertex_values();
        (0..self.space.n_elements())
            .map(|e| self.space.h(e) / 3.0 * (v[e] * v[e] + v[e] * v[e + 1] + v[e + 1] * v[e + 1]))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().max(0.0).sqrt()
    }

    /// `||v'||_{L2}`, the X-norm.
    pub fn h1_seminorm(&self) -> f64 {
        (0..self.space.n_elements())
            .map(|e| self.slope(e).powi(2) * self.space.h(e))
            .sum::<f64>()
            .sqrt()
    }

    /// L2 norm restricted to `[lo, hi]` (a union of elements of a refining space is
    /// not required; the interval is split at vertices).
    pub fn l2_norm_sq_on(&self, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        let first = self.space.locate(lo);
        for e in first..self.space.n_elements() {
            let (a, b) = self.space.element(e);
            if a >= hi {
                break;
            }
            let l = a.max(lo);
            let r = b.min(hi);
            if r <= l {
                continue;
            }
            let fl = self.eval_in(e, l);
            let fr = self.eval_in(e, r);
            acc += (r - l) / 3.0 * (fl * fl + fl * fr + fr * fr);
        }
        acc
    }

    /// Value at `x` using the linear piece of element `e`.
    pub fn eval_in(&self, e: usize, x: f64) -> f64 {
        let (a, b) = self.space.element(e);
        let s = (x - a) / (b - a);
        (1.0 - s) * self.node(e) + s * self.node(e + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial_fem::mesh::SpaceHierarchy;

    fn sp(cuts: &[f64]) -> SpaceRef {
        Arc::new(SpaceHierarchy::default().from_cuts(cuts).unwrap())
    }

    #[test]
    fn exact_transfer_to_refinement() {
        let coarse = sp(&[0.5]);
        let fine = sp(&[0.25, 0.5, 0.75]);
        let f = FeFunction::new(coarse.clone(), vec![2.0]).unwrap();
        let g = f.on(&fine).unwrap();
        assert_eq!(g.values(), &[1.0, 2.0, 1.0]);
        assert!(g.on(&coarse).is_err());
        for &x in &[0.1, 0.3, 0.6, 0.99] {
            assert!((f.eval(x) - g.eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn norms_of_hat() {
        let s = sp(&[0.5]);
        let f = FeFunction::new(s, vec![1.0]).unwrap();
        assert!((f.l2_norm_sq() - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.h1_seminorm() - 2.0).abs() < 1e-15);
        assert!((f.l2_norm_sq_on(0.0, 0.5) - 1.0 / 6.0).abs() < 1e-15);
        let g = FeFunction::new(sp(&[0.25, 0.5, 0.75]), vec![0.0, 1.0, 0.0]).unwrap();
        // (hat_{1/2}, narrow hat_{1/2}) = 2 * int_0^{1/4} (1/2 + 2s)(4s) ds
        let ip = f.inner_l2(&g).unwrap();
        let expect = 2.0 * (0.5 * 2.0 * 0.0625 + 8.0 * 0.25f64.powi(3) / 3.0);
        assert!((ip - expect).abs() < 1e-15, "{ip} {expect}");
    }

    #[test]
    fn combine_on_non_nested_meshes() {
        let a = FeFunction::interpolate(sp(&[0.25, 0.5]), |x| x);
        let b = FeFunction::interpolate(sp(&[0.5, 0.75]), |x| 1.0 - x);
        let c = a.combine(2.0, &b, -1.0).unwrap();
        assert_eq!(c.space().dim(), 3);
        for &x in &[0.1, 0.4, 0.6, 0.8] {
            assert!((c.eval(x) - (2.0 * a.eval(x) - b.eval(x))).abs() < 1e-15);
        }
    }
}
