//! Command-line driver: solve, estimate, certify and verify from a config.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bounds::{BoundNorm, LambdaPolicy};
use crate::config::{LambdaSetting, RunConfig, SweepPoint, ThetaChoice};
use crate::error::Error;
use crate::estimators::{compute_indicators, IndicatorBreakdown, ThetaMode};
use crate::reconstruction::reference_slab;
use crate::time_dg::{solve_all, DgSolution, TimePartition};
use crate::verify::{certify_with, invariant_suite, theta_oracle_sq, tolerances, ErrorReport, Tripwire};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_TRIPWIRE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dgcg", version, about = "dG-in-time / P1-in-space heat solver with certified error bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve, estimate and certify every sweep point of a config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        theta_mode: Option<ThetaArg>,
        /// `auto` or a fixed value in [0, 1].
        #[arg(long)]
        lambda: Option<String>,
        /// Run the full invariant suite; exit 4 on any tripwire.
        #[arg(long)]
        check: bool,
    },
    /// Both theta modes against the reference oracle on the first sweep point.
    CompareTheta {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThetaArg {
    Super,
    Pf,
    Both,
}

impl From<ThetaArg> for ThetaChoice {
    fn from(a: ThetaArg) -> Self {
        match a {
            ThetaArg::Super => ThetaChoice::Super,
            ThetaArg::Pf => ThetaChoice::Pf,
            ThetaArg::Both => ThetaChoice::Both,
        }
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Tripwire(Vec<Tripwire>),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Solver(_) | Failure::Io(_) => EXIT_SOLVER,
            Failure::Tripwire(_) => EXIT_TRIPWIRE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
            Failure::Io(m) => write!(f, "i/o failure: {m}"),
            Failure::Tripwire(t) => {
                for (k, w) in t.iter().enumerate() {
                    if k > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "tripwire {w}")?;
                }
                Ok(())
            }
        }
    }
}

fn config_failure(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn solver_failure(e: Error) -> Failure {
    Failure::Solver(e.to_string())
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            out,
            theta_mode,
            lambda,
            check,
        } => {
            let mut cfg = RunConfig::load(config).map_err(config_failure)?;
            if let Some(m) = theta_mode {
                cfg.estimator.theta_mode = (*m).into();
            }
            if let Some(l) = lambda {
                cfg.estimator.lambda = LambdaSetting::Text(l.clone());
            }
            let policy = cfg.estimator.lambda.policy().map_err(config_failure)?;
            let dir = out_dir(&cfg, out.as_deref());
            run(&cfg, config, &dir, policy, *check)
        }
        Command::CompareTheta { config, out } => {
            let cfg = RunConfig::load(config).map_err(config_failure)?;
            let dir = out_dir(&cfg, out.as_deref());
            compare_theta(&cfg, &dir)
        }
    }
}

fn out_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn modes(choice: ThetaChoice) -> Vec<ThetaMode> {
    match choice {
        ThetaChoice::Super => vec![ThetaMode::Superspace],
        ThetaChoice::Pf => vec![ThetaMode::PfFallback],
        ThetaChoice::Both => vec![ThetaMode::Superspace, ThetaMode::PfFallback],
    }
}

fn mode_name(m: ThetaMode) -> &'static str {
    match m {
        ThetaMode::Superspace => "super",
        ThetaMode::PfFallback => "pf",
    }
}

/// Solution, indicators and one certified report per theta mode.
pub struct PointOutcome {
    pub point: SweepPoint,
    pub partition: TimePartition,
    pub solution: DgSolution,
    pub reports: Vec<ErrorReport>,
    pub tripwires: Vec<Tripwire>,
}

impl PointOutcome {
    pub fn breakdown(&self) -> &IndicatorBreakdown {
        &self.reports[0].breakdown
    }

    pub fn dofs(&self) -> usize {
        let dims: Vec<usize> = (1..=self.solution.n_slabs()).map(|n| self.solution.space(n).dim()).collect();
        self.partition.dof_count(&dims)
    }
}

/// Runs one sweep point.
pub fn run_point(
    cfg: &RunConfig,
    point: SweepPoint,
    policy: LambdaPolicy,
    check: bool,
) -> Result<PointOutcome, Failure> {
    let problem = cfg.problem().map_err(config_failure)?;
    let partition = cfg.partition(point).map_err(config_failure)?;
    let spaces = cfg.spaces(point, partition.n_slabs()).map_err(config_failure)?;
    let solution = solve_all(&problem, &partition, &spaces).map_err(|e| match e {
        Error::CoefficientNotAligned(_) | Error::InvalidMesh(_) | Error::InvalidPartition(_) => config_failure(e),
        other => solver_failure(other),
    })?;
    let breakdown = compute_indicators(&problem, &solution).map_err(solver_failure)?;
    let reports = modes(cfg.estimator.theta_mode)
        .into_iter()
        .map(|m| certify_with(&problem, &solution, breakdown.clone(), policy, m))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(solver_failure)?;
    let mut tripwires = Vec::new();
    if check {
        tripwires = invariant_suite(&problem, &solution, &reports[0]).map_err(solver_failure)?;
        for r in &reports[1..] {
            tripwires.extend(r.tripwires());
        }
    }
    Ok(PointOutcome {
        point,
        partition,
        solution,
        reports,
        tripwires,
    })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

const TERM_COLUMNS: [&str; 11] = [
    "initial",
    "elliptic",
    "mesh_l1",
    "time",
    "space",
    "osc",
    "mesh_l2",
    "linf_jump_max",
    "linf_elliptic_max",
    "rho",
    "reconstruction",
];

pub fn indicators_csv(b: &IndicatorBreakdown) -> String {
    let mut s = String::from(
        "n,t_n,tau_n,r_n,theta_super,theta_pf,space_l2t,mesh_change_l2t,mesh_change_l1t,osc_l2t,elliptic_x_l2t,linf_jump,linf_elliptic,dim,dim_plus,dim_minus\n",
    );
    for r in &b.rows {
        let _ = write!(s, "{},{},{},{}", r.n, num(r.t_n), num(r.tau), r.degree);
        for v in [
            r.theta_super,
            r.theta_pf,
            r.space_l2t,
            r.mesh_change_l2t,
            r.mesh_change_l1t,
            r.osc_l2t,
            r.elliptic_x_l2t,
            r.linf_jump,
            r.linf_elliptic,
        ] {
            let _ = write!(s, ",{}", num(v));
        }
        let _ = writeln!(s, ",{},{},{}", r.dim, r.dim_plus, r.dim_minus);
    }
    s
}

pub fn bounds_csv(reports: &[ErrorReport]) -> String {
    let mut s = String::from("n,t_n,theta_mode,norm,lambda,bound,true_error,effectivity");
    for t in TERM_COLUMNS {
        let _ = write!(s, ",{t}");
    }
    s.push('\n');
    for rep in reports {
        for (k, bs) in rep.bounds.iter().enumerate() {
            for b in bs {
                let truth = rep.true_errors.as_ref().map(|t| t[k][norm_index(b.norm)]);
                let _ = write!(
                    s,
                    "{},{},{},{},{},{}",
                    k + 1,
                    num(b.horizon),
                    mode_name(rep.theta_mode),
                    b.norm,
                    num(b.lambda),
                    num(b.value)
                );
                match truth {
                    Some(t) => {
                        let eff = if t > 0.0 { num(b.value / t) } else { String::new() };
                        let _ = write!(s, ",{},{}", num(t), eff);
                    }
                    None => s.push_str(",,"),
                }
                for name in TERM_COLUMNS {
                    match b.term(name) {
                        Some(v) => {
                            let _ = write!(s, ",{}", num(v));
                        }
                        None => s.push(','),
                    }
                }
                s.push('\n');
            }
        }
    }
    s
}

fn norm_index(norm: BoundNorm) -> usize {
    match norm {
        BoundNorm::L2X => 0,
        BoundNorm::LinfH => 1,
        BoundNorm::H1XDual => 2,
    }
}

fn summary_text(cfg: &RunConfig, o: &PointOutcome, policy: LambdaPolicy, check: bool) -> String {
    let mut s = String::new();
    let p = &o.partition;
    let dims: Vec<usize> = (1..=o.solution.n_slabs()).map(|n| o.solution.space(n).dim()).collect();
    let _ = writeln!(s, "problem         {} (T = {})", cfg.problem.catalog, cfg.problem.final_time);
    let _ = writeln!(
        s,
        "slabs           {} (degrees {}..{})",
        p.n_slabs(),
        p.degrees().iter().min().unwrap(),
        p.degrees().iter().max().unwrap()
    );
    let _ = writeln!(
        s,
        "spatial dofs    {}..{}",
        dims.iter().min().unwrap(),
        dims.iter().max().unwrap()
    );
    let _ = writeln!(s, "space-time dofs {}", o.dofs());
    let _ = writeln!(
        s,
        "lambda          {}",
        match policy {
            LambdaPolicy::Auto => "auto (min(1, 1/t_n))".to_string(),
            LambdaPolicy::Fixed(v) => format!("{v}"),
        }
    );
    for rep in &o.reports {
        let _ = writeln!(s, "\ntheta mode {}", mode_name(rep.theta_mode));
        let _ = writeln!(s, "  {:<8} {:>14} {:>14} {:>12}", "norm", "bound", "true error", "effectivity");
        for norm in [BoundNorm::L2X, BoundNorm::LinfH, BoundNorm::H1XDual] {
            let b = rep.final_bound(norm).value;
            let (t, e) = match (rep.final_true(norm), rep.effectivity(norm)) {
                (Some(t), Some(e)) if t > 0.0 => (format!("{t:.6e}"), format!("{e:.3}")),
                (Some(t), _) => (format!("{t:.6e}"), "-".into()),
                _ => ("-".into(), "-".into()),
            };
            let _ = writeln!(s, "  {:<8} {:>14.6e} {:>14} {:>12}", norm.to_string(), b, t, e);
        }
    }
    let _ = writeln!(s);
    if check {
        if o.tripwires.is_empty() {
            let _ = writeln!(s, "invariant suite passed");
        } else {
            for t in &o.tripwires {
                let _ = writeln!(s, "tripwire {t}");
            }
        }
    } else {
        let warn: Vec<Tripwire> = o.reports.iter().flat_map(|r| r.tripwires()).collect();
        if warn.is_empty() {
            let _ = writeln!(s, "reliability and effectivity checks passed");
        } else {
            for t in &warn {
                let _ = writeln!(s, "warning {t}");
            }
        }
    }
    s
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_order(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct RateRow {
    point: SweepPoint,
    slabs: usize,
    tau: f64,
    h: f64,
    dofs: usize,
    true_l2x: Option<f64>,
    bound_l2x: f64,
    time_indicator: f64,
}

fn rate_row(o: &PointOutcome) -> RateRow {
    let rep = &o.reports[0];
    let tau = (1..=o.partition.n_slabs()).map(|n| o.partition.tau(n)).fold(0.0, f64::max);
    let h = (1..=o.solution.n_slabs()).map(|n| o.solution.space(n).max_h()).fold(0.0, f64::max);
    let theta_sq: f64 = rep.breakdown.rows.iter().map(|r| r.theta(rep.theta_mode).powi(2)).sum();
    RateRow {
        point: o.point,
        slabs: o.partition.n_slabs(),
        tau,
        h,
        dofs: o.dofs(),
        true_l2x: rep.final_true(BoundNorm::L2X),
        bound_l2x: rep.final_bound(BoundNorm::L2X).value,
        time_indicator: theta_sq.sqrt(),
    }
}

fn pair_order(prev: Option<&RateRow>, cur: &RateRow, f: impl Fn(&RateRow) -> Option<f64>) -> String {
    let Some(p) = prev else {
        return String::new();
    };
    match (f(p), f(cur)) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => num((a / b).ln() / (p.tau / cur.tau).ln()),
        _ => String::new(),
    }
}

fn rates_csv_and_summary(rows: &[RateRow]) -> (String, String) {
    let mut csv = String::from(
        "index,degree,tau_level,h_level,slabs,tau_max,h_max,dofs,true_l2x,bound_l2x,time_indicator,order_true,order_bound,order_time\n",
    );
    let mut summary = String::from("fitted temporal orders (least squares over the step levels)\n");
    for (k, r) in rows.iter().enumerate() {
        let prev = k
            .checked_sub(1)
            .and_then(|j| rows.iter().rev().skip(rows.len() - 1 - j).find(|p| same_series(p, r)));
        let degree = r.point.degree.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.point.index,
            degree,
            r.point.tau_level,
            r.point.h_level,
            r.slabs,
            num(r.tau),
            num(r.h),
            r.dofs,
            r.true_l2x.map(num).unwrap_or_default(),
            num(r.bound_l2x),
            num(r.time_indicator),
            pair_order(prev, r, |x| x.true_l2x),
            pair_order(prev, r, |x| Some(x.bound_l2x)),
            pair_order(prev, r, |x| Some(x.time_indicator)),
        );
    }
    let mut seen: Vec<(Option<usize>, usize)> = Vec::new();
    for r in rows {
        let key = (r.point.degree, r.point.h_level);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let series: Vec<&RateRow> = rows.iter().filter(|p| same_series(p, r)).collect();
        if series.len() < 2 {
            continue;
        }
        let taus: Vec<f64> = series.iter().map(|p| p.tau).collect();
        let fit = |f: &dyn Fn(&RateRow) -> Option<f64>| -> String {
            let ys: Option<Vec<f64>> = series.iter().map(|p| f(p).filter(|v| *v > 0.0)).collect();
            ys.map(|ys| format!("{:.3}", fitted_order(&taus, &ys))).unwrap_or_else(|| "-".into())
        };
        let _ = writeln!(
            summary,
            "  degree {:<3} h level {:<2}  true L2X {:>6}  bound L2X {:>6}  time indicator {:>6}",
            r.point.degree.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
            r.point.h_level,
            fit(&|p| p.true_l2x),
            fit(&|p| Some(p.bound_l2x)),
            fit(&|p| Some(p.time_indicator)),
        );
    }
    (csv, summary)
}

fn same_series(a: &RateRow, b: &RateRow) -> bool {
    a.point.degree == b.point.degree && a.point.h_level == b.point.h_level
}

fn write_point(dir: &Path, cfg: &RunConfig, o: &PointOutcome, policy: LambdaPolicy, check: bool) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io_failure)?;
    fs::write(dir.join("indicators.csv"), indicators_csv(o.breakdown())).map_err(io_failure)?;
    fs::write(dir.join("bounds.csv"), bounds_csv(&o.reports)).map_err(io_failure)?;
    fs::write(dir.join("summary.txt"), summary_text(cfg, o, policy, check)).map_err(io_failure)
}

/// Runs every sweep point; a single point writes straight into `dir`,
/// several points write `point_XXX/` subdirectories plus `rates.csv`.
pub fn run(cfg: &RunConfig, config_path: &Path, dir: &Path, policy: LambdaPolicy, check: bool) -> Result<(), Failure> {
    let points = cfg.sweep_points();
    let mut rows = Vec::new();
    let mut trips = Vec::new();
    for &pt in &points {
        let o = run_point(cfg, pt, policy, check)?;
        let target = if points.len() == 1 {
            dir.to_path_buf()
        } else {
            dir.join(format!("point_{:03}", pt.index))
        };
        write_point(&target, cfg, &o, policy, check)?;
        trips.extend(o.tripwires.iter().cloned());
        rows.push(rate_row(&o));
    }
    if points.len() > 1 {
        let (csv, summary) = rates_csv_and_summary(&rows);
        fs::write(dir.join("rates.csv"), csv).map_err(io_failure)?;
        let head = format!("config {}\nsweep points {}\n\n", config_path.display(), points.len());
        fs::write(dir.join("summary.txt"), head + &summary).map_err(io_failure)?;
    }
    if trips.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tripwire(trips))
    }
}

/// One row per slab: both theta values, their ratio and the oracle.
///
/// The ratio is `theta_pf / theta_super`, reported as 1 when both vanish.
pub fn theta_comparison_csv(sol: &DgSolution, b: &IndicatorBreakdown) -> crate::Result<(String, Vec<Tripwire>)> {
    let mut s = String::from("n,t_n,theta_super,theta_pf,ratio_pf_over_super,oracle_sq,super_ge_oracle,pf_ge_oracle\n");
    let mut trips = Vec::new();
    for r in &b.rows {
        let rs = reference_slab(sol, r.n, tolerances::ORACLE_DEPTH)?;
        let oracle = theta_oracle_sq(&rs)?;
        let ratio = if r.theta_super == 0.0 && r.theta_pf == 0.0 {
            1.0
        } else {
            r.theta_pf / r.theta_super
        };
        let floor = oracle * (1.0 - tolerances::ROUNDOFF);
        let ok_super = r.theta_super.powi(2) >= floor;
        let ok_pf = r.theta_pf.powi(2) >= floor;
        for (ok, name) in [(ok_super, "super"), (ok_pf, "pf")] {
            if !ok {
                trips.push(Tripwire {
                    check: "theta_oracle",
                    detail: format!("slab {} {name} below oracle {oracle:e}", r.n),
                });
            }
        }
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.n,
            num(r.t_n),
            num(r.theta_super),
            num(r.theta_pf),
            num(ratio),
            num(oracle),
            ok_super,
            ok_pf
        );
    }
    Ok((s, trips))
}

pub fn compare_theta(cfg: &RunConfig, dir: &Path) -> Result<(), Failure> {
    let pt = cfg.sweep_points()[0];
    let o = run_point(cfg, pt, cfg.lambda_policy(), false)?;
    let (csv, trips) = theta_comparison_csv(&o.solution, o.breakdown()).map_err(solver_failure)?;
    fs::create_dir_all(dir).map_err(io_failure)?;
    fs::write(dir.join("theta_compare.csv"), csv).map_err(io_failure)?;
    if trips.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tripwire(trips))
    }
}
