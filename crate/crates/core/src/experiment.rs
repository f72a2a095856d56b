//! Experiment runner: solve one problem with several methods and write
//! per-iteration CSV traces plus a JSON summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::accel::gk_solve;
use crate::error::{Error, Result};
use crate::gmres::kaczmarz_gmres;
use crate::minerr::{heuristic_best, minerr_solve};
use crate::numerics::{default_rank_tol, dist, Matrix};
use crate::operator::{assemble, cg_bound, spectral_report, KaczmarzOperator, SpectralReport};
use crate::oracle::explicit_krylov;
use crate::problems::{load_system, ProblemSpec};
use crate::sweep::iterate_fixed_point;
use crate::system::{build_projectors, BlockProjector, PartitionedSystem};
use crate::trace::{SolveOptions, SolveTrace};

pub const TRACE_HEADER: &str = "k,rho,omega,gamma,qtilde_norm,true_error,residual_norm,wall_ms";

/// Largest `n` for which `run` also computes the spectral diagnostics.
pub const RUN_DIAGNOSTIC_LIMIT: usize = 256;

/// Relative threshold for the rank of the explicit Krylov powers.
const KRYLOV_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Kaczmarz,
    Gk,
    Minerr,
    Gmres,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Kaczmarz, Method::Gk, Method::Minerr, Method::Gmres];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Kaczmarz => "kaczmarz",
            Method::Gk => "gk",
            Method::Minerr => "minerr",
            Method::Gmres => "gmres",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}' (expected kaczmarz, gk, minerr or gmres)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Spec(ProblemSpec),
    Files { matrix: PathBuf, rhs: PathBuf },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub methods: Vec<Method>,
    pub block_size: usize,
    pub symmetric: bool,
    pub max_iter: usize,
    pub tol: f64,
    /// Seed for generated problems given as shorthand.
    pub seed: u64,
    pub out: PathBuf,
    pub allow_large_assembly: bool,
    /// Write measured wall-clock times; otherwise `wall_ms` is 0 so that
    /// identical configurations give identical files.
    pub record_timing: bool,
}

impl RunConfig {
    pub fn new(problem: ProblemSource, out: impl Into<PathBuf>) -> Self {
        Self {
            problem,
            methods: vec![Method::Minerr],
            block_size: 1,
            symmetric: false,
            max_iter: 100,
            tol: 1e-10,
            seed: 0,
            out: out.into(),
            allow_large_assembly: false,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("--max-iter must be at least 1".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("--block-size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MethodSummary {
    pub status: String,
    pub iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_opt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heuristic_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub problem: ProblemSpec,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub methods: BTreeMap<String, MethodSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quasi_opt_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2_asymmetry: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree_d: Option<usize>,
}

/// A loaded, partitioned system with its known solution, if any.
pub struct Prepared {
    pub spec: ProblemSpec,
    pub a: Matrix,
    pub x_star: Option<Vec<f64>>,
    pub system: PartitionedSystem,
    pub projectors: Vec<BlockProjector>,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let (spec, a, b, x_star) = match &config.problem {
        ProblemSource::Spec(spec) => {
            let p = spec.generate()?;
            (p.spec, p.a, p.b, Some(p.x_star))
        }
        ProblemSource::Files { matrix, rhs } => {
            let (a, b) = load_system(matrix, rhs)?;
            (ProblemSpec::file(a.rows(), a.cols()), a, b, None)
        }
    };
    let block = config.block_size.min(a.rows());
    let mut system = PartitionedSystem::partition_uniform(a.clone(), b, block)?;
    if config.symmetric {
        system = system.symmetric_expand();
    }
    let projectors = build_projectors(&system, None)?;
    Ok(Prepared { spec, a, x_star, system, projectors })
}

fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

/// CSV text of a trace under [`TRACE_HEADER`]. Fields that do not apply are empty.
pub fn trace_csv(trace: &SolveTrace, record_timing: bool) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    for r in &trace.records {
        let wall = if record_timing { r.wall_ms } else { 0.0 };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.k,
            fmt_num(r.rho),
            fmt_num(r.omega),
            fmt_num(r.gamma),
            opt(r.qtilde_norm),
            opt(r.true_error),
            fmt_num(r.residual_norm),
            fmt_num(wall)
        );
    }
    s
}

fn solve_one(method: Method, prep: &Prepared, opts: &SolveOptions) -> Result<(SolveTrace, MethodSummary)> {
    let x0 = vec![0.0; prep.a.cols()];
    let ps = &prep.projectors;
    let mut summary = MethodSummary::default();
    let (x, trace) = match method {
        Method::Kaczmarz => iterate_fixed_point(ps, &x0, opts)?,
        Method::Gk => gk_solve(ps, &x0, opts)?,
        Method::Gmres => kaczmarz_gmres(ps, &x0, opts)?,
        Method::Minerr => {
            let (x, trace, basis) = minerr_solve(ps, &x0, opts)?;
            if !basis.is_empty() {
                let (x_opt, k_opt) = heuristic_best(&trace, &basis, &x0)?;
                summary.k_opt = Some(k_opt);
                summary.heuristic_error = prep.x_star.as_deref().map(|xs| dist(&x_opt, xs));
            }
            (x, trace)
        }
    };
    summary.status = trace.status.as_str().to_string();
    summary.iters = trace.iterations();
    summary.final_error = prep.x_star.as_deref().map(|xs| dist(&x, xs));
    Ok((trace, summary))
}

fn diagnostics(prep: &Prepared, allow_large: bool) -> Result<(SpectralReport, Option<usize>)> {
    let n = prep.a.cols();
    let op = assemble(&prep.projectors, n, allow_large)?;
    let report = spectral_report(&op, &prep.a, default_rank_tol(prep.a.rows(), n))?;
    let kop = KaczmarzOperator::new(&prep.projectors)?;
    let r0 = kop.residual(&vec![0.0; n])?;
    let degree = if r0.iter().all(|v| *v == 0.0) {
        Some(0)
    } else {
        explicit_krylov(&kop, &r0, n + 1, KRYLOV_RANK_TOL)?.degree_d
    };
    Ok((report, degree))
}

fn apply_report(summary: &mut Summary, report: &SpectralReport, degree: Option<usize>) {
    summary.t2_norm = Some(report.t2_norm);
    summary.quasi_opt_factor = Some(report.quasi_opt_factor);
    summary.c2_asymmetry = Some(report.c2_asymmetry);
    summary.kappa = report.kappa;
    summary.degree_d = degree;
}

fn write_json(path: &Path, summary: &Summary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Solves with every configured method and writes `<method>_trace.csv` and
/// `summary.json` into `config.out`. Spectral diagnostics are included when
/// `n <= RUN_DIAGNOSTIC_LIMIT`; with a symmetric sweep and a finite
/// condition number the bound curve goes to `cg_bound.csv`.
pub fn run(config: &RunConfig) -> Result<Summary> {
    if config.methods.is_empty() {
        return Err(Error::Config("at least one --method is required".into()));
    }
    let prep = prepare(config)?;
    fs::create_dir_all(&config.out)?;
    let mut opts = SolveOptions::new(config.max_iter, config.tol);
    opts.reference = prep.x_star.clone();

    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let results: Vec<Result<(SolveTrace, MethodSummary)>> = std::thread::scope(|s| {
        let handles: Vec<_> = methods
            .iter()
            .map(|m| {
                let (prep, opts) = (&prep, &opts);
                s.spawn(move || solve_one(*m, prep, opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });

    let mut summary = Summary {
        problem: prep.spec.clone(),
        methods: BTreeMap::new(),
        t2_norm: None,
        quasi_opt_factor: None,
        c2_asymmetry: None,
        kappa: None,
        degree_d: None,
    };
    for (m, res) in methods.iter().zip(results) {
        let (trace, ms) = res?;
        fs::write(
            config.out.join(format!("{}_trace.csv", m.as_str())),
            trace_csv(&trace, config.record_timing),
        )?;
        summary.methods.insert(m.as_str().to_string(), ms);
    }

    if prep.a.cols() <= RUN_DIAGNOSTIC_LIMIT {
        let (report, degree) = diagnostics(&prep, false)?;
        apply_report(&mut summary, &report, degree);
        if config.symmetric {
            if let Some(kappa) = report.kappa {
                let mut csv = String::from("k,cg_bound\n");
                for k in 0..=config.max_iter {
                    let _ = writeln!(csv, "{k},{}", fmt_num(cg_bound(kappa, k)));
                }
                fs::write(config.out.join("cg_bound.csv"), csv)?;
            }
        }
    }
    write_json(&config.out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Spectral diagnostics only: `summary.json` with `t2_norm`,
/// `quasi_opt_factor`, the asymmetry of `C₂`, `kappa` and `degree_d`.
pub fn diagnose(config: &RunConfig) -> Result<Summary> {
    let prep = prepare(config)?;
    let (report, degree) = diagnostics(&prep, config.allow_large_assembly)?;
    let mut summary = Summary {
        problem: prep.spec.clone(),
        methods: BTreeMap::new(),
        t2_norm: None,
        quasi_opt_factor: None,
        c2_asymmetry: None,
        kappa: None,
        degree_d: None,
    };
    apply_report(&mut summary, &report, degree);
    fs::create_dir_all(&config.out)?;
    write_json(&config.out.join("summary.json"), &summary)?;
    Ok(summary)
}
