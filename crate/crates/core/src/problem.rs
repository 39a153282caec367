//! The continuous model problem `u_t - (a u_x)_x = f` on `(0, 1) x (0, T]`
//! with homogeneous Dirichlet data, its analytic constants and a catalog of
//! manufactured solutions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Piecewise-constant diffusion coefficient on `(0, 1)`.
///
/// `values[k]` holds on `(breakpoints[k - 1], breakpoints[k])` with the
/// implicit outer breakpoints `0` and `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl Coefficient {
    pub fn constant(value: f64) -> Result<Self> {
        Self::piecewise(Vec::new(), vec![value])
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidProblem(format!(
                "{} coefficient values need {} breakpoints, got {}",
                values.len(),
                values.len().saturating_sub(1),
                breakpoints.len()
            )));
        }
        let mut prev = 0.0;
        for &b in &breakpoints {
            if !(b > prev && b < 1.0) {
                return Err(Error::InvalidProblem(format!(
                    "coefficient breakpoints must increase strictly inside (0, 1), got {b}"
                )));
            }
            prev = b;
        }
        if let Some(&v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::CoercivityViolated(v));
        }
        Ok(Coefficient { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn piece_bounds(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { 0.0 } else { self.breakpoints[k - 1] };
        let hi = self.breakpoints.get(k).copied().unwrap_or(1.0);
        (lo, hi)
    }

    /// Value at `x`; at a breakpoint the value to its right.
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        self.values[k]
    }

    /// Value at `x`; at a breakpoint the value to its left.
    pub fn left_value_at(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b < x);
        self.values[k]
    }

    /// Exact integral of `a` over `[lo, hi]`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            let (a, b) = self.piece_bounds(k);
            let l = lo.max(a);
            let r = hi.min(b);
            if r > l {
                acc += v * (r - l);
            }
        }
        acc
    }

    /// Value on `(lo, hi)` if the coefficient is constant there.
    pub fn constant_on(&self, lo: f64, hi: f64) -> Option<f64> {
        let inside = self.breakpoints.iter().any(|&b| b > lo && b < hi);
        if inside {
            None
        } else {
            Some(self.value_at(0.5 * (lo + hi)))
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::piecewise(
            self.breakpoints.clone(),
            self.values.iter().map(|v| v * c).collect(),
        )
    }

    /// `int_lo^hi g(y) / a(y) dy` for an antiderivative `big_g` of `g`.
    fn integrate_over_a(&self, lo: f64, hi: f64, big_g: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            let (a, b) = self.piece_bounds(k);
            let l = lo.max(a);
            let r = hi.min(b);
            if r > l {
                acc += (big_g(r) - big_g(l)) / v;
            }
        }
        acc
    }
}

/// Coercivity/continuity and Poincare-Friedrichs constants of the model
/// operator with `||v||_X = ||v'||_{L2(0,1)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticConstants {
    pub alpha_flat: f64,
    pub alpha_sharp: f64,
    /// `||v||_H <= c ||v||_X` on `H^1_0(0,1)`.
    pub c_pf_pivot_x: f64,
    /// `||v||_{X'} <= c ||v||_H`.
    pub c_pf_dual_pivot: f64,
}

/// Constants of the elliptic operator induced by `problem`'s coefficient.
pub fn constants_for(problem: &Problem) -> Result<EllipticConstants> {
    constants_for_coefficient(&problem.coefficient)
}

pub fn constants_for_coefficient(a: &Coefficient) -> Result<EllipticConstants> {
    let lo = a.min();
    if !(lo > 0.0) {
        return Err(Error::CoercivityViolated(lo));
    }
    Ok(EllipticConstants {
        alpha_flat: lo,
        alpha_sharp: a.max(),
        c_pf_pivot_x: 1.0 / PI,
        c_pf_dual_pivot: 1.0 / PI,
    })
}

/// An exact solution with the derivatives needed to build sources and errors.
pub trait ExactSolution: Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, x: f64, t: f64) -> f64;
    fn dt(&self, x: f64, t: f64) -> f64;
    fn dx(&self, x: f64, t: f64) -> f64;
    /// `(a u_x)_x`, evaluated branchwise for piecewise-constant `a`.
    fn flux_divergence(&self, x: f64, t: f64) -> f64;
    /// Points `p` where the flux `a u_x` jumps, with the jump
    /// `(a u_x)(p+) - (a u_x)(p-)`; these become point loads in the source.
    fn flux_jumps(&self, _t: f64) -> Vec<(f64, f64)> {
        Vec::new()
    }
}

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Source {
    Zero,
    Field(SpaceTimeFn),
    /// `f = u_t - (a u_x)_x` for the configured exact solution.
    Manufactured,
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Zero => write!(f, "Zero"),
            Source::Field(_) => write!(f, "Field(..)"),
            Source::Manufactured => write!(f, "Manufactured"),
        }
    }
}

/// The model parabolic problem.
#[derive(Clone)]
pub struct Problem {
    pub coefficient: Coefficient,
    pub source: Source,
    pub initial: SpaceFn,
    pub final_time: f64,
    pub manufactured: Option<Arc<dyn ExactSolution>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("coefficient", &self.coefficient)
            .field("source", &self.source)
            .field("final_time", &self.final_time)
            .field("manufactured", &self.manufactured.as_ref().map(|m| m.name().to_string()))
            .finish()
    }
}

impl Problem {
    pub fn new(
        coefficient: Coefficient,
        source: Source,
        initial: SpaceFn,
        final_time: f64,
        manufactured: Option<Arc<dyn ExactSolution>>,
    ) -> Result<Self> {
        if !(final_time > 0.0) || !final_time.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        if matches!(source, Source::Manufactured) && manufactured.is_none() {
            return Err(Error::NoExactSolution);
        }
        Ok(Problem {
            coefficient,
            source,
            initial,
            final_time,
            manufactured,
        })
    }

    /// Builds a problem whose source and initial datum come from `exact`.
    pub fn manufactured(
        coefficient: Coefficient,
        exact: Arc<dyn ExactSolution>,
        final_time: f64,
    ) -> Result<Self> {
        let e = exact.clone();
        Self::new(
            coefficient,
            Source::Manufactured,
            Arc::new(move |x| e.value(x, 0.0)),
            final_time,
            Some(exact),
        )
    }

    pub fn from_catalog(entry: Catalog, coefficient: Coefficient, final_time: f64) -> Result<Self> {
        let exact: Arc<dyn ExactSolution> = match entry {
            Catalog::Zero => Arc::new(ZeroSolution),
            Catalog::SinPiExpDecay => Arc::new(BranchSine::new(&coefficient, true)),
            Catalog::StationarySin => Arc::new(BranchSine::new(&coefficient, false)),
            Catalog::RoughIc => {
                if !coefficient.is_constant() {
                    return Err(Error::InvalidProblem(
                        "rough_ic requires a constant coefficient".into(),
                    ));
                }
                Arc::new(FourierHeat::step(coefficient.values()[0], 0.25, 0.75, 40))
            }
            Catalog::TentExpDecay => Arc::new(TentDecay::new(&coefficient)),
            Catalog::SinHeat => {
                if !coefficient.is_constant() {
                    return Err(Error::InvalidProblem(
                        "sin_heat requires a constant coefficient".into(),
                    ));
                }
                Arc::new(FourierHeat::new(coefficient.values()[0], vec![(1, 1.0)], "sin_heat"))
            }
        };
        Self::manufactured(coefficient, exact, final_time)
    }

    /// Source value `f(x, t)`.
    pub fn source_value(&self, x: f64, t: f64) -> f64 {
        match &self.source {
            Source::Zero => 0.0,
            Source::Field(f) => f(x, t),
            Source::Manufactured => match &self.manufactured {
                Some(u) => u.dt(x, t) - u.flux_divergence(x, t),
                None => 0.0,
            },
        }
    }

    /// Point loads `(p, m)` of the source, `<f, v> = int f v + sum m v(p)`.
    pub fn point_loads(&self, t: f64) -> Vec<(f64, f64)> {
        match (&self.source, &self.manufactured) {
            (Source::Manufactured, Some(u)) => u
                .flux_jumps(t)
                .into_iter()
                .map(|(p, j)| (p, -j))
                .filter(|(_, m)| *m != 0.0)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn has_zero_source(&self) -> bool {
        matches!(self.source, Source::Zero)
    }
}

/// `f = u_t - (a u_x)_x` for the problem's manufactured solution.
pub fn manufactured_source(problem: &Problem, x: f64, t: f64) -> Result<f64> {
    let u = problem.manufactured.as_ref().ok_or(Error::NoExactSolution)?;
    Ok(u.dt(x, t) - u.flux_divergence(x, t))
}

/// Named manufactured solutions available from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Catalog {
    Zero,
    SinPiExpDecay,
    StationarySin,
    RoughIc,
    SinHeat,
    TentExpDecay,
}

impl Catalog {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "zero" => Catalog::Zero,
            "sinpi_expdecay" => Catalog::SinPiExpDecay,
            "stationary_sin" => Catalog::StationarySin,
            "rough_ic" => Catalog::RoughIc,
            "sin_heat" => Catalog::SinHeat,
            "tent_expdecay" => Catalog::TentExpDecay,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Catalog::Zero => "zero",
            Catalog::SinPiExpDecay => "sinpi_expdecay",
            Catalog::StationarySin => "stationary_sin",
            Catalog::RoughIc => "rough_ic",
            Catalog::SinHeat => "sin_heat",
            Catalog::TentExpDecay => "tent_expdecay",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroSolution;

impl ExactSolution for ZeroSolution {
    fn name(&self) -> &str {
        "zero"
    }
    fn value(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
    fn dt(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
    fn dx(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
    fn flux_divergence(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
}

/// `u = w(x) g(t)` with flux `a w' = pi (cos(pi x) - c)` continuous across
/// coefficient jumps; `c` is fixed by `w(1) = 0`. For `a = 1` this is
/// `w = sin(pi x)`. `g = e^{-t}` or `g = 1`.
#[derive(Debug, Clone)]
pub struct BranchSine {
    coefficient: Coefficient,
    shift: f64,
    decaying: bool,
}

impl BranchSine {
    pub fn new(coefficient: &Coefficient, decaying: bool) -> Self {
        let num = coefficient.integrate_over_a(0.0, 1.0, |y| (PI * y).sin() / PI);
        let den = coefficient.integrate_over_a(0.0, 1.0, |y| y);
        BranchSine {
            coefficient: coefficient.clone(),
            shift: num / den,
            decaying,
        }
    }

    fn profile(&self, x: f64) -> f64 {
        let c = self.shift;
        self.coefficient
            .integrate_over_a(0.0, x, |y| (PI * y).sin() - PI * c * y)
    }

    fn time_factor(&self, t: f64) -> (f64, f64) {
        if self.decaying {
            let e = (-t).exp();
            (e, -e)
        } else {
            (1.0, 0.0)
        }
    }
}

impl ExactSolution for BranchSine {
    fn name(&self) -> &str {
        if self.decaying {
            "sinpi_expdecay"
        } else {
            "stationary_sin"
        }
    }
    fn value(&self, x: f64, t: f64) -> f64 {
        self.profile(x) * self.time_factor(t).0
    }
    fn dt(&self, x: f64, t: f64) -> f64 {
        self.profile(x) * self.time_factor(t).1
    }
    fn dx(&self, x: f64, t: f64) -> f64 {
        PI * ((PI * x).cos() - self.shift) / self.coefficient.value_at(x) * self.time_factor(t).0
    }
    fn flux_divergence(&self, x: f64, t: f64) -> f64 {
        -PI * PI * (PI * x).sin() * self.time_factor(t).0
    }
}

/// `u = tent(x) e^{-t}` with `tent(x) = 1 - |2x - 1|`.
///
/// The profile is piecewise linear with its kink at `1/2`, so it lies in
/// every mesh having `1/2` (and the coefficient breakpoints) as vertices.
/// The source then carries point loads at the kink and at coefficient jumps.
#[derive(Debug, Clone)]
pub struct TentDecay {
    coefficient: Coefficient,
}

impl TentDecay {
    pub fn new(coefficient: &Coefficient) -> Self {
        TentDecay {
            coefficient: coefficient.clone(),
        }
    }

    fn slope(x: f64) -> f64 {
        if x < 0.5 {
            2.0
        } else {
            -2.0
        }
    }
}

impl ExactSolution for TentDecay {
    fn name(&self) -> &str {
        "tent_expdecay"
    }
    fn value(&self, x: f64, t: f64) -> f64 {
        (1.0 - (2.0 * x - 1.0).abs()) * (-t).exp()
    }
    fn dt(&self, x: f64, t: f64) -> f64 {
        -self.value(x, t)
    }
    fn dx(&self, x: f64, t: f64) -> f64 {
        Self::slope(x) * (-t).exp()
    }
    fn flux_divergence(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
    fn flux_jumps(&self, t: f64) -> Vec<(f64, f64)> {
        let mut points: Vec<f64> = self.coefficient.breakpoints().to_vec();
        if !points.contains(&0.5) {
            points.push(0.5);
        }
        points.sort_by(f64::total_cmp);
        let e = (-t).exp();
        points
            .into_iter()
            .map(|p| {
                let right = self.coefficient.value_at(p) * Self::slope(p);
                let left_slope = if p <= 0.5 { 2.0 } else { -2.0 };
                let left = self.coefficient.left_value_at(p) * left_slope;
                (p, (right - left) * e)
            })
            .collect()
    }
}

/// Truncated sine series solving the source-free heat equation with constant `a`.
#[derive(Debug, Clone)]
pub struct FourierHeat {
    diffusivity: f64,
    modes: Vec<(u32, f64)>,
    label: &'static str,
}

impl FourierHeat {
    pub fn new(diffusivity: f64, modes: Vec<(u32, f64)>, label: &'static str) -> Self {
        FourierHeat {
            diffusivity,
            modes,
            label,
        }
    }

    /// First `modes` sine coefficients of the indicator of `(lo, hi)`.
    pub fn step(diffusivity: f64, lo: f64, hi: f64, modes: u32) -> Self {
        let m = (1..=modes)
            .map(|k| {
                let kp = k as f64 * PI;
                (k, 2.0 * ((kp * lo).cos() - (kp * hi).cos()) / kp)
            })
            .filter(|(_, b)| b.abs() > 1e-15)
            .collect();
        Self::new(diffusivity, m, "rough_ic")
    }

    fn decay(&self, k: u32) -> f64 {
        let kp = k as f64 * PI;
        self.diffusivity * kp * kp
    }
}

impl ExactSolution for FourierHeat {
    fn name(&self) -> &str {
        self.label
    }
    fn value(&self, x: f64, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(k, b)| b * (k as f64 * PI * x).sin() * (-self.decay(k) * t).exp())
            .sum()
    }
    fn dt(&self, x: f64, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(k, b)| {
                let l = self.decay(k);
                -l * b * (k as f64 * PI * x).sin() * (-l * t).exp()
            })
            .sum()
    }
    fn dx(&self, x: f64, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(k, b)| {
                let kp = k as f64 * PI;
                b * kp * (kp * x).cos() * (-self.decay(k) * t).exp()
            })
            .sum()
    }
    fn flux_divergence(&self, x: f64, t: f64) -> f64 {
        // a u_xx = u_t for every mode
        self.dt(x, t)
    }
}
