//! Assembly of the certified bounds from the slab indicators.

use std::fmt;

use crate::error::{Error, Result};
use crate::estimators::{IndicatorBreakdown, IndicatorRow, ThetaMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundNorm {
    /// `L2(0, t_n; X)`.
    L2X,
    /// `Linf(0, t_n; H)`.
    LinfH,
    /// Broken `H1(0, t_n; X')` seminorm.
    H1XDual,
}

impl fmt::Display for BoundNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundNorm::L2X => "L2X",
            BoundNorm::LinfH => "LinfH",
            BoundNorm::H1XDual => "H1Xdual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    /// `min(1, 1 / t_n)`.
    Auto,
    Fixed(f64),
}

impl LambdaPolicy {
    pub fn lambda(self, t_n: f64) -> f64 {
        match self {
            LambdaPolicy::Auto => choose_lambda(t_n),
            LambdaPolicy::Fixed(v) => v,
        }
    }
}

pub fn choose_lambda(t_n: f64) -> f64 {
    (1.0 / t_n).min(1.0)
}

/// A bound with its weighted addends.
///
/// For `L2X` the value is the square root of the sum of the terms. For
/// `LinfH` the terms named `linf_jump_max` and `linf_elliptic_max` are
/// added outside the square root of the others. For `H1Xdual` the terms
/// are added as they are.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedBound {
    pub norm: BoundNorm,
    pub value: f64,
    pub terms: Vec<(&'static str, f64)>,
    pub lambda: f64,
    pub horizon: f64,
}

impl CertifiedBound {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == name).map(|t| t.1)
    }
}

/// Slab sums entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accumulated {
    pub theta_sq: f64,
    pub space: f64,
    pub osc: f64,
    pub mesh_l2: f64,
    pub mesh_l1: f64,
    pub elliptic_x: f64,
    pub linf_jump_max: f64,
    pub linf_elliptic_max: f64,
}

impl Accumulated {
    pub fn from_rows(rows: &[IndicatorRow], mode: ThetaMode) -> Self {
        let mut a = Accumulated::default();
        for r in rows {
            a.theta_sq += r.theta(mode).powi(2);
            a.space += r.space_l2t;
            a.osc += r.osc_l2t;
            a.mesh_l2 += r.mesh_change_l2t;
            a.mesh_l1 += r.mesh_change_l1t;
            a.elliptic_x += r.elliptic_x_l2t;
            a.linf_jump_max = a.linf_jump_max.max(r.linf_jump);
            a.linf_elliptic_max = a.linf_elliptic_max.max(r.linf_elliptic);
        }
        a
    }
}

fn check_terms(terms: &[(&'static str, f64)]) -> Result<()> {
    match terms.iter().find(|t| !(t.1 >= 0.0)) {
        Some((name, v)) => Err(Error::Invariant(format!("bound addend {name} is {v}"))),
        None => Ok(()),
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Invariant(format!("lambda {lambda} outside [0, 1]")))
    }
}

struct Setup<'a> {
    rows: &'a [IndicatorRow],
    flat: f64,
    c_pf: f64,
    init: f64,
    horizon: f64,
}

fn setup(b: &IndicatorBreakdown, n: usize) -> Result<Setup<'_>> {
    if n == 0 || n > b.rows.len() {
        return Err(Error::IndexOutOfRange {
            index: n,
            limit: b.rows.len(),
        });
    }
    let rows = b.upto(n);
    Ok(Setup {
        rows,
        flat: b.constants.alpha_flat,
        c_pf: b.constants.c_pf_pivot_x,
        init: b.init_term,
        horizon: rows[n - 1].t_n,
    })
}

/// Bound of `||u - U||_{L2(0, t_n; X)}`.
pub fn assemble_l2x_bound(b: &IndicatorBreakdown, n: usize, lambda: f64, mode: ThetaMode) -> Result<CertifiedBound> {
    check_lambda(lambda)?;
    let s = setup(b, n)?;
    let acc = Accumulated::from_rows(s.rows, mode);
    let f = s.flat;
    let terms = vec![
        ("initial", 6.0 / f * s.init),
        ("elliptic", 3.0 * acc.elliptic_x),
        ("mesh_l1", 12.0 / f * lambda * lambda * acc.mesh_l1 * acc.mesh_l1),
        ("time", 21.0 / (f * f) * acc.theta_sq),
        ("space", 18.0 / (f * f) * acc.space),
        ("osc", 18.0 / (f * f) * acc.osc),
        ("mesh_l2", 18.0 / (f * f) * s.c_pf * s.c_pf * (1.0 - lambda).powi(2) * acc.mesh_l2),
    ];
    check_terms(&terms)?;
    let value = terms.iter().map(|t| t.1).sum::<f64>().sqrt();
    Ok(CertifiedBound {
        norm: BoundNorm::L2X,
        value,
        terms,
        lambda,
        horizon: s.horizon,
    })
}

/// Bound of `||u - U||_{Linf(0, t_n; H)}`: the square root of the
/// accumulated block plus the two maximum terms.
pub fn assemble_linfh_bound(b: &IndicatorBreakdown, n: usize, lambda: f64, mode: ThetaMode) -> Result<CertifiedBound> {
    check_lambda(lambda)?;
    let s = setup(b, n)?;
    let acc = Accumulated::from_rows(s.rows, mode);
    let f = s.flat;
    let terms = vec![
        ("initial", 2.0 * s.init),
        ("mesh_l1", 4.0 * lambda * lambda * acc.mesh_l1 * acc.mesh_l1),
        ("time", 4.0 / f * acc.theta_sq),
        ("space", 4.0 / f * acc.space),
        ("osc", 4.0 / f * acc.osc),
        ("mesh_l2", 4.0 / f * s.c_pf * s.c_pf * (1.0 - lambda).powi(2) * acc.mesh_l2),
        ("linf_jump_max", acc.linf_jump_max),
        ("linf_elliptic_max", acc.linf_elliptic_max),
    ];
    check_terms(&terms)?;
    let block: f64 = terms[..6].iter().map(|t| t.1).sum();
    let value = block.sqrt() + acc.linf_jump_max + acc.linf_elliptic_max;
    Ok(CertifiedBound {
        norm: BoundNorm::LinfH,
        value,
        terms,
        lambda,
        horizon: s.horizon,
    })
}

/// Bound of `||rho||_{L2(0, t_n; X)}` for `rho = u - w_hat`, the part of the
/// error measured against the time reconstruction of `omega`.
pub fn rho_l2x_bound(b: &IndicatorBreakdown, n: usize, lambda: f64, mode: ThetaMode) -> Result<f64> {
    check_lambda(lambda)?;
    let s = setup(b, n)?;
    let acc = Accumulated::from_rows(s.rows, mode);
    let f = s.flat;
    let terms = [
        2.0 / f * s.init,
        4.0 / f * lambda * lambda * acc.mesh_l1 * acc.mesh_l1,
        6.0 / (f * f) * (acc.theta_sq + acc.space + acc.osc),
        6.0 / (f * f) * s.c_pf * s.c_pf * (1.0 - lambda).powi(2) * acc.mesh_l2,
    ];
    Ok(terms.iter().sum::<f64>().sqrt())
}

/// Bound of the broken `H1(0, t_n; X')` seminorm of `u - U`:
/// `sqrt(2) ||R||_{L2(X')} + sqrt(2) alpha_sharp ||rho||_{L2(X)} + (sum int space^2)^{1/2}`
/// with `||R||_{L2(X')}` bounded by the sum of the time, space, oscillation
/// and mesh-change contributions.
pub fn assemble_h1xdual_bound(b: &IndicatorBreakdown, n: usize, lambda: f64, mode: ThetaMode) -> Result<CertifiedBound> {
    let rho = rho_l2x_bound(b, n, lambda, mode)?;
    let s = setup(b, n)?;
    let acc = Accumulated::from_rows(s.rows, mode);
    let sqrt2 = std::f64::consts::SQRT_2;
    let terms = vec![
        ("time", sqrt2 * acc.theta_sq.sqrt()),
        ("space", sqrt2 * acc.space.sqrt()),
        ("osc", sqrt2 * acc.osc.sqrt()),
        ("mesh_l2", sqrt2 * s.c_pf * acc.mesh_l2.sqrt()),
        ("rho", sqrt2 * b.constants.alpha_sharp * rho),
        ("reconstruction", acc.space.sqrt()),
    ];
    check_terms(&terms)?;
    Ok(CertifiedBound {
        norm: BoundNorm::H1XDual,
        value: terms.iter().map(|t| t.1).sum(),
        terms,
        lambda,
        horizon: s.horizon,
    })
}

/// All three bounds at horizon `t_n`.
pub fn assemble_all(b: &IndicatorBreakdown, n: usize, policy: LambdaPolicy, mode: ThetaMode) -> Result<Vec<CertifiedBound>> {
    let lambda = policy.lambda(b.rows.get(n.wrapping_sub(1)).map_or(1.0, |r| r.t_n));
    Ok(vec![
        assemble_l2x_bound(b, n, lambda, mode)?,
        assemble_linfh_bound(b, n, lambda, mode)?,
        assemble_h1xdual_bound(b, n, lambda, mode)?,
    ])
}

/// `lambda (sum int eta)^2 <= sum int eta^2` with `lambda = 1 / t_n`, for
/// `t_n >= 1`; `None` for shorter horizons.
pub fn lambda_inequality(b: &IndicatorBreakdown, n: usize) -> Option<(f64, f64)> {
    let rows = b.upto(n);
    let t_n = rows.last()?.t_n;
    if t_n < 1.0 {
        return None;
    }
    let l1: f64 = rows.iter().map(|r| r.mesh_change_l1t).sum();
    let l2: f64 = rows.iter().map(|r| r.mesh_change_l2t).sum();
    Some((l1 * l1 / t_n, l2))
}
