use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kaczmarz_krylov::experiment::{diagnose, run, Method, ProblemSource, RunConfig};
use kaczmarz_krylov::problems::ProblemSpec;
use kaczmarz_krylov::{Error, Result};

/// Block Kaczmarz solvers with Krylov acceleration: experiment runner.
#[derive(Parser)]
#[command(name = "kkrylov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve with the selected methods; write traces and summary.json.
    Run(Common),
    /// Spectral diagnostics only (dense operator assembly).
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    /// Problem shorthand (random:MxN, rank-deficient:MxN:R,
    /// tomography:N[:ANGLES:RAYS]) or a JSON problem file.
    #[arg(long, conflicts_with_all = ["matrix", "rhs"])]
    problem: Option<String>,
    /// Matrix Market file with A.
    #[arg(long, requires = "rhs")]
    matrix: Option<PathBuf>,
    /// Right-hand side, one value per line.
    #[arg(long, requires = "matrix")]
    rhs: Option<PathBuf>,
    /// kaczmarz, gk, minerr or gmres; repeatable.
    #[arg(long = "method")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 1)]
    block_size: usize,
    /// Sweep the blocks forward and back.
    #[arg(long)]
    symmetric: bool,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Lift the size limit on dense operator assembly.
    #[arg(long)]
    allow_large_assembly: bool,
    /// Write measured wall-clock times (makes traces non-reproducible).
    #[arg(long)]
    record_timing: bool,
}

fn config(c: Common, need_methods: bool) -> Result<RunConfig> {
    let problem = match (c.problem, c.matrix, c.rhs) {
        (Some(p), _, _) => {
            let path = PathBuf::from(&p);
            if p.ends_with(".json") || path.is_file() {
                ProblemSource::Spec(ProblemSpec::from_json_file(&path)?)
            } else {
                ProblemSource::Spec(ProblemSpec::parse_shorthand(&p, c.seed)?)
            }
        }
        (None, Some(matrix), Some(rhs)) => ProblemSource::Files { matrix, rhs },
        _ => return Err(Error::Config("give --problem or both --matrix and --rhs".into())),
    };
    let methods = c.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>>>()?;
    if need_methods && methods.is_empty() {
        return Err(Error::Config("at least one --method is required".into()));
    }
    let cfg = RunConfig {
        problem,
        methods,
        block_size: c.block_size,
        symmetric: c.symmetric,
        max_iter: c.max_iter,
        tol: c.tol,
        seed: c.seed,
        out: c.out,
        allow_large_assembly: c.allow_large_assembly,
        record_timing: c.record_timing,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Run(c) => {
            let cfg = config(c, true)?;
            let summary = run(&cfg)?;
            for (name, m) in &summary.methods {
                eprintln!("{name}: {} after {} iterations", m.status, m.iters);
            }
            Ok(cfg.out)
        }
        Command::Diagnose(c) => {
            let cfg = config(c, false)?;
            diagnose(&cfg)?;
            Ok(cfg.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(out) => {
            eprintln!("wrote {}", out.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
