//! Gauss-Legendre rules and shifted Legendre series on the unit interval.
//!
//! Temporal quantities on a slab are expanded in the shifted Legendre
//! polynomials `L_i(s) = P_i(2s - 1)`, `s in [0, 1]`, which satisfy
//! `int_0^1 L_i L_j ds = delta_ij / (2i + 1)`, `L_i(1) = 1` and
//! `L_i(0) = (-1)^i`.

/// Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "quadrature rule needs at least one point");
        let (x, w) = gauss_legendre(n);
        GaussRule {
            points: x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: w.iter().map(|w| 0.5 * w).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(s, w)| (a + s * h, w * h))
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` via Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values `L_0(s), ..., L_degree(s)`.
pub fn shifted_legendre(degree: usize, s: f64) -> Vec<f64> {
    let x = 2.0 * s - 1.0;
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree >= 1 {
        out.push(x);
    }
    for k in 2..=degree {
        let p = ((2 * k - 1) as f64 * x * out[k - 1] - (k - 1) as f64 * out[k - 2]) / k as f64;
        out.push(p);
    }
    out
}

/// Values and `d/ds` derivatives of `L_0, ..., L_degree` at `s`.
pub fn shifted_legendre_with_derivatives(degree: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    let vals = shifted_legendre(degree, s);
    let mut ders = vec![0.0; degree + 1];
    // L_i' = 2 sum_{k < i, i - k odd} (2k + 1) L_k
    for (i, d) in ders.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut k = i as isize - 1;
        while k >= 0 {
            acc += (2 * k + 1) as f64 * vals[k as usize];
            k -= 2;
        }
        *d = 2.0 * acc;
    }
    (vals, ders)
}

/// Evaluates `sum_i c_i L_i(s)`.
pub fn series_eval(coeffs: &[f64], s: f64) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    let l = shifted_legendre(coeffs.len() - 1, s);
    coeffs.iter().zip(&l).map(|(c, l)| c * l).sum()
}

/// Legendre coefficients of `d/ds` of a series; same length as the input.
pub fn series_derivative(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n];
    for (i, &c) in coeffs.iter().enumerate() {
        let mut k = i as isize - 1;
        while k >= 0 {
            out[k as usize] += 2.0 * (2 * k + 1) as f64 * c;
            k -= 2;
        }
    }
    out
}

/// Legendre coefficients of `s -> int_0^s` of a series; one longer than the input.
pub fn series_antiderivative(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n + 1];
    for (i, &c) in coeffs.iter().enumerate() {
        if i == 0 {
            out[0] += 0.5 * c;
            out[1] += 0.5 * c;
        } else {
            let f = c / (2.0 * (2 * i + 1) as f64);
            out[i + 1] += f;
            out[i - 1] -= f;
        }
    }
    out
}

/// `int_0^1 L_i L_j ds` for `i == j`.
pub fn legendre_norm_sq(i: usize) -> f64 {
    1.0 / (2 * i + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        for n in 1..=14 {
            let rule = GaussRule::new(n);
            for deg in 0..(2 * n) {
                let q = rule.integrate(0.0, 1.0, |s| s.powi(deg as i32));
                assert!((q - 1.0 / (deg + 1) as f64).abs() < 1e-14, "n={n} deg={deg}");
            }
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn shifted_legendre_orthogonality() {
        let rule = GaussRule::new(12);
        for i in 0..=10 {
            for j in 0..=10 {
                let q = rule.integrate(0.0, 1.0, |s| {
                    let l = shifted_legendre(10, s);
                    l[i] * l[j]
                });
                let expect = if i == j { legendre_norm_sq(i) } else { 0.0 };
                assert!((q - expect).abs() < 1e-14);
            }
        }
        let l0 = shifted_legendre(6, 0.0);
        for (i, v) in l0.iter().enumerate() {
            assert_eq!(*v, if i % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn derivative_and_antiderivative_match_finite_differences() {
        let c = [0.3, -1.2, 0.7, 2.0, -0.4];
        let d = series_derivative(&c);
        let a = series_antiderivative(&c);
        assert!(series_eval(&a, 0.0).abs() < 1e-15);
        for &s in &[0.1, 0.37, 0.8] {
            let h = 1e-6;
            let fd = (series_eval(&c, s + h) - series_eval(&c, s - h)) / (2.0 * h);
            assert!((fd - series_eval(&d, s)).abs() < 1e-7);
            let fa = (series_eval(&a, s + h) - series_eval(&a, s - h)) / (2.0 * h);
            assert!((fa - series_eval(&c, s)).abs() < 1e-7);
            let (_, ders) = shifted_legendre_with_derivatives(4, s);
            let direct: f64 = c.iter().zip(&ders).map(|(c, d)| c * d).sum();
            assert!((direct - series_eval(&d, s)).abs() < 1e-12);
        }
    }
}
