//! Run configuration read from TOML; the schema is documented in
//! `configs/SCHEMA.md`.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Deserialize;

use crate::bounds::LambdaPolicy;
use crate::error::{Error, Result};
use crate::problem::{Catalog, Coefficient, Problem};
use crate::spatial_fem::{SpaceHierarchy, SpaceRef, DEFAULT_MAX_DEPTH};
use crate::time_dg::TimePartition;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub time: TimeConfig,
    pub space: SpaceConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub catalog: String,
    pub final_time: f64,
    #[serde(default)]
    pub coefficient: CoefficientConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig {
            breakpoints: Vec::new(),
            values: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeConfig {
    Uniform {
        slabs: usize,
        degree: usize,
    },
    /// Nodes `T sigma^{N - n}`, degrees `base_degree + round(slope (n - 1))`.
    Geometric {
        slabs: usize,
        grading: f64,
        #[serde(default)]
        base_degree: usize,
        #[serde(default)]
        slope: f64,
    },
    Explicit {
        nodes: Vec<f64>,
        degrees: Vec<usize>,
    },
}

/// Slab meshes; lists shorter than the number of slabs repeat cyclically.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    /// `2^level` elements on every slab.
    Uniform { level: u32 },
    /// `2^levels[k]` elements.
    Levels { levels: Vec<u32> },
    /// Interior vertices per mesh.
    Cuts { cuts: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaChoice {
    #[default]
    Super,
    Pf,
    Both,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LambdaSetting {
    Value(f64),
    Text(String),
}

impl Default for LambdaSetting {
    fn default() -> Self {
        LambdaSetting::Text("auto".into())
    }
}

impl LambdaSetting {
    pub fn policy(&self) -> Result<LambdaPolicy> {
        match self {
            LambdaSetting::Text(s) if s == "auto" => Ok(LambdaPolicy::Auto),
            LambdaSetting::Text(s) => match s.parse::<f64>() {
                Ok(v) => LambdaSetting::Value(v).policy(),
                Err(_) => Err(Error::Config(format!("estimator.lambda: expected \"auto\" or a number, got {s:?}"))),
            },
            LambdaSetting::Value(v) if (0.0..=1.0).contains(v) => Ok(LambdaPolicy::Fixed(*v)),
            LambdaSetting::Value(v) => Err(Error::Config(format!("estimator.lambda: {v} outside [0, 1]"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub theta_mode: ThetaChoice,
    #[serde(default)]
    pub lambda: LambdaSetting,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Number of step sizes `tau, tau/2, ...`.
    #[serde(default = "one")]
    pub tau_levels: usize,
    /// Number of mesh sizes `h, h/2, ...`.
    #[serde(default = "one")]
    pub h_levels: usize,
    /// Degrees replacing the uniform partition degree.
    #[serde(default)]
    pub degrees: Vec<usize>,
}

fn one() -> usize {
    1
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tau_levels: 1,
            h_levels: 1,
            degrees: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPoint {
    pub index: usize,
    pub degree: Option<usize>,
    pub tau_level: usize,
    pub h_level: usize,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    /// Parses and validates; diagnostics carry the line or the field.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if Catalog::parse(&self.problem.catalog).is_none() {
            return Err(config_err("problem.catalog", format!("unknown entry {:?}", self.problem.catalog)));
        }
        if !(self.problem.final_time > 0.0 && self.problem.final_time.is_finite()) {
            return Err(config_err("problem.final_time", "must be positive"));
        }
        self.estimator.lambda.policy()?;
        if self.sweep.tau_levels == 0 {
            return Err(config_err("sweep.tau_levels", "must be at least 1"));
        }
        if self.sweep.h_levels == 0 {
            return Err(config_err("sweep.h_levels", "must be at least 1"));
        }
        if !self.sweep.degrees.is_empty() && !matches!(self.time, TimeConfig::Uniform { .. }) {
            return Err(config_err("sweep.degrees", "only applies to a uniform partition"));
        }
        match &self.space {
            SpaceConfig::Levels { levels } if levels.is_empty() => Err(config_err("space.levels", "empty list")),
            SpaceConfig::Cuts { cuts } if cuts.is_empty() => Err(config_err("space.cuts", "empty list")),
            _ => Ok(()),
        }?;
        if let TimeConfig::Explicit { nodes, degrees } = &self.time {
            let end = nodes.last().copied().unwrap_or(0.0);
            if (end - self.problem.final_time).abs() > 1e-14 * self.problem.final_time {
                return Err(config_err("time.nodes", "last node must equal problem.final_time"));
            }
            if nodes.len() != degrees.len() + 1 {
                return Err(config_err("time.degrees", "need one degree per slab"));
            }
        }
        Ok(())
    }

    pub fn lambda_policy(&self) -> LambdaPolicy {
        self.estimator.lambda.policy().expect("validated")
    }

    pub fn problem(&self) -> Result<Problem> {
        let c = &self.problem.coefficient;
        let a = Coefficient::piecewise(c.breakpoints.clone(), c.values.clone())
            .map_err(|e| config_err("problem.coefficient", e))?;
        let entry = Catalog::parse(&self.problem.catalog).expect("validated");
        Problem::from_catalog(entry, a, self.problem.final_time).map_err(|e| config_err("problem", e))
    }

    /// Partition of a sweep point: the base partition bisected `tau_level`
    /// times, with the degree overridden when given.
    pub fn partition(&self, point: SweepPoint) -> Result<TimePartition> {
        let t = self.problem.final_time;
        let mut p = match &self.time {
            TimeConfig::Uniform { slabs, degree } => TimePartition::uniform(t, *slabs, point.degree.unwrap_or(*degree)),
            TimeConfig::Geometric {
                slabs,
                grading,
                base_degree,
                slope,
            } => TimePartition::geometric(t, *slabs, *grading, *base_degree, *slope),
            TimeConfig::Explicit { nodes, degrees } => TimePartition::new(nodes.clone(), degrees.clone()),
        }
        .map_err(|e| config_err("time", e))?;
        for _ in 0..point.tau_level {
            p = p.bisect();
        }
        Ok(p)
    }

    /// Spaces `V_1..V_N` of a sweep point, refined `h_level` times.
    pub fn spaces(&self, point: SweepPoint, slabs: usize) -> Result<Vec<SpaceRef>> {
        let hier = SpaceHierarchy::new(DEFAULT_MAX_DEPTH)?;
        let base: Vec<SpaceRef> = match &self.space {
            SpaceConfig::Uniform { level } => vec![Arc::new(hier.uniform(*level)?)],
            SpaceConfig::Levels { levels } => levels.iter().map(|&l| hier.uniform(l).map(Arc::new)).collect::<Result<_>>()?,
            SpaceConfig::Cuts { cuts } => cuts.iter().map(|c| hier.from_cuts(c).map(Arc::new)).collect::<Result<_>>()?,
        };
        let refined: Vec<SpaceRef> = base
            .iter()
            .map(|s| s.refine(point.h_level as u32).map(Arc::new))
            .collect::<Result<_>>()
            .map_err(|e| config_err("space", e))?;
        if refined.len() == 1 {
            return Ok(refined);
        }
        Ok((0..slabs).map(|k| refined[k % refined.len()].clone()).collect())
    }

    /// Sweep points ordered by degree, then step level, then mesh level.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let degrees: Vec<Option<usize>> = if self.sweep.degrees.is_empty() {
            vec![None]
        } else {
            self.sweep.degrees.iter().map(|&r| Some(r)).collect()
        };
        let mut out = Vec::new();
        for &degree in &degrees {
            for tau_level in 0..self.sweep.tau_levels {
                for h_level in 0..self.sweep.h_levels {
                    out.push(SweepPoint {
                        index: out.len(),
                        degree,
                        tau_level,
                        h_level,
                    });
                }
            }
        }
        out
    }
}
