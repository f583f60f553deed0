use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sos_cones::envelope::{self, EnvelopeInstance, Formulation, InstanceSpec, SweepConfig};
use sos_cones::ipm::{SolveOptions, Status};
use sos_cones::{selfcheck, Error, Exec};

/// Polynomial envelope benchmark over SOS-PSD, SOS-L2 and SOS-L1 cones.
#[derive(Parser)]
#[command(name = "sos-cones", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one envelope instance and write a JSON result.
    Solve(SolveArgs),
    /// Solve a grid of instances; writes a JSON array and a Markdown table.
    Sweep(SweepArgs),
    /// Run the derivative, homogeneity and brute-force membership suites.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct SolverArgs {
    /// Relative optimality and feasibility tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    #[arg(long = "max-iters", default_value_t = 500)]
    max_iters: usize,
}

impl SolverArgs {
    fn options(&self) -> Result<SolveOptions, String> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(format!("--tol must be positive, got {}", self.tol));
        }
        let time_limit = match self.time_limit {
            Some(t) if !t.is_finite() || t < 0.0 => return Err(format!("--time-limit must be a non-negative number, got {t}")),
            t => t.map(Duration::from_secs_f64),
        };
        Ok(SolveOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            time_limit,
        })
    }

    fn time_limit_json(&self) -> serde_json::Value {
        self.time_limit.map_or(serde_json::Value::Null, |t| json!(t))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "dr")]
    d_r: usize,
    /// Envelope half-degree; defaults to d_r.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    p: u8,
    #[arg(long)]
    formulation: Formulation,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace the random polynomials by zero.
    #[arg(long)]
    zero: bool,
    /// Evaluate barriers with data-parallel inner loops.
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: u8,
    #[arg(long = "dr", value_delimiter = ',', required = true)]
    d_r: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    /// Multipliers k with d = k d_r.
    #[arg(long = "d-factor", value_delimiter = ',', default_value = "1")]
    d_factor: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Defaults to every formulation compatible with p.
    #[arg(long, value_delimiter = ',')]
    formulations: Vec<Formulation>,
    #[command(flatten)]
    solver: SolverArgs,
    /// JSON array of result rows; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Markdown table; printed to stderr when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::FormulationMismatch(_) => Failure::Usage(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}").and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Runtime(format!("cannot write to stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn solve(args: &SolveArgs) -> Result<bool, Failure> {
    let options = args.solver.options().map_err(Failure::Usage)?;
    let mut spec = InstanceSpec::new(args.n, args.d_r, args.d.unwrap_or(args.d_r), args.m, args.p, args.seed);
    spec.zero = args.zero;
    let exec = if args.parallel { Exec::Parallel } else { Exec::Sequential };
    let instance = EnvelopeInstance::new_with(spec.clone(), exec)?;
    let out = envelope::run_instance_with(&instance, args.formulation, &options, exec)?;
    let doc = json!({
        "config": {
            "n": spec.n, "d_r": spec.d_r, "d": spec.d, "m": spec.m, "p": spec.p,
            "seed": spec.seed, "zero": spec.zero, "formulation": args.formulation,
            "tol": options.tol, "time_limit_s": args.solver.time_limit_json(),
        },
        "dims": out.dims,
        "result": out.row,
        "envelope": { "n": out.envelope.n, "degree": out.envelope.degree, "coeffs": out.envelope.coeffs.as_slice() },
        "instance": instance,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.to_string()))?;
    write(args.output.as_deref(), &text)?;
    if out.row.st != Status::Co {
        eprintln!("solver finished with status {}{}", out.row.st, out.row.note.map(|n| format!(": {n}")).unwrap_or_default());
    }
    Ok(out.row.st == Status::Co)
}

fn sweep(args: &SweepArgs) -> Result<bool, Failure> {
    let options = args.solver.options().map_err(Failure::Usage)?;
    let formulations = if args.formulations.is_empty() {
        Formulation::ALL.into_iter().filter(|f| f.p() == args.p).collect()
    } else {
        args.formulations.clone()
    };
    let config = SweepConfig {
        n: args.n,
        p: args.p,
        d_r: args.d_r.clone(),
        m: args.m.clone(),
        d_factor: args.d_factor.clone(),
        seeds: args.seeds.clone(),
        formulations,
    };
    let cases = config.cases();
    for (spec, f) in &cases {
        spec.validate()?;
        if f.p() != spec.p {
            return Err(Failure::Usage(format!("{f} does not model p = {}", spec.p)));
        }
    }
    let rows = envelope::sweep(&cases, &options, Exec::Parallel);
    let text = serde_json::to_string_pretty(&rows).map_err(|e| Failure::Runtime(e.to_string()))?;
    write(args.output.as_deref(), &text)?;
    let table = envelope::markdown_table(&rows);
    match &args.table {
        Some(p) => fs::write(p, &table).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))?,
        None => eprint!("{table}"),
    }
    Ok(true)
}

fn selftest(seed: u64) -> bool {
    let reports = selfcheck::run_all(seed);
    for r in &reports {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    reports.iter().all(|r| r.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Selftest { seed } => Ok(selftest(*seed)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor usage, run `sos-cones --help`.");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
