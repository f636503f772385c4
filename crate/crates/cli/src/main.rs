mod bench;
mod selftest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use countersmt::continuous::{self, RealOptions};
use countersmt::discrete::{self, Backend, BruteBackend, CountOptions, SolverBackend};
use countersmt::ppl::{self, Mode, ValueOptions};
use countersmt::reference::{self, OracleBudget};
use countersmt::solver::SolverConfig;
use countersmt::{formula, params, rat, Error, Rat, Sort};

#[derive(Parser)]
#[command(name = "countersmt", version, about = "Approximate model counting modulo arithmetic")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Count models of an integer problem file.
    CountInt {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Report the unique integer inside the certified interval, if any.
        #[arg(long)]
        snap_int: bool,
    },
    /// Approximate the volume of a real problem file.
    CountReal {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        real: RealArgs,
    },
    /// Value of a probabilistic program.
    Value {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        real: RealArgs,
        #[arg(long, value_enum, default_value = "upper")]
        mode: ModeArg,
        /// Also run a Monte Carlo baseline with this many samples.
        #[arg(long, default_value_t = 0)]
        mc_samples: u64,
    },
    /// Print the derived parameter set.
    Params {
        #[arg(long, default_value_t = 20)]
        a: u64,
        #[arg(long, default_value = "0.5", value_parser = parse_rat)]
        eps: Rat,
        #[arg(long, default_value = "0.1", value_parser = parse_rat)]
        alpha: Rat,
        #[arg(long)]
        bits: u64,
        /// Also print the certified interval for this hash dimension.
        #[arg(long)]
        m: Option<i64>,
    },
    /// Solver-free checks against the reference oracles.
    Selftest,
    /// Run the program corpus and print the two benchmark tables.
    Bench {
        #[arg(default_value = "corpus")]
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Only the structural table; no counting runs.
        #[arg(long)]
        table1_only: bool,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value = "0.5", value_parser = parse_rat)]
    eps: Rat,
    #[arg(long, default_value = "0.1", value_parser = parse_rat)]
    alpha: Rat,
    /// Enumeration threshold `a` of the estimate oracle.
    #[arg(long = "enum-limit", default_value_t = 20)]
    a: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver command line; `$COUNTERSMT_SOLVER`, then `z3 -in`, when absent.
    #[arg(long)]
    solver_cmd: Option<String>,
    #[arg(long, default_value_t = 60_000)]
    timeout_ms: u64,
    /// Directory for SMT-LIB transcripts, one file per session.
    #[arg(long)]
    log_smt: Option<PathBuf>,
    /// Largest enumeration bound accepted on the exact path.
    #[arg(long, default_value_t = 1 << 16)]
    max_enum: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Eliminate hash rows to echelon form before sending them.
    #[arg(long)]
    presolve: bool,
    /// Count with the brute-force oracle instead of a solver.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args, Clone)]
struct RealArgs {
    #[arg(long, default_value = "0.5", value_parser = parse_rat)]
    gamma: Rat,
    /// Grid resolution per axis (heuristic, no guarantee).
    #[arg(long)]
    grid: Option<u64>,
    /// Use the resolution that carries the additive guarantee.
    #[arg(long)]
    formal: bool,
    /// Hash-bit budget for the grid.
    #[arg(long, default_value_t = 4096)]
    budget: u64,
    /// Multiplicative target for the cell count; gamma/2 when absent.
    #[arg(long, value_parser = parse_rat)]
    eps_discrete: Option<Rat>,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Upper,
    Lower,
}

fn parse_rat(s: &str) -> Result<Rat, String> {
    rat::parse(s).ok_or_else(|| format!("not a number: `{s}`"))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    CorpusIncomplete(Vec<String>),
    Check(String),
    Core(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::CorpusIncomplete(missing) => write!(f, "corpus incomplete, missing: {}", missing.join(", ")),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult<T> = Result<T, CliError>;

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::CorpusIncomplete(_) | CliError::Check(_) => 3,
            CliError::Core(e) if e.is_solver_failure() => 2,
            CliError::Core(
                Error::InvalidParameter(_)
                | Error::DegenerateInstance { .. }
                | Error::EnumerationCap { .. }
                | Error::Overflow { .. }
                | Error::BudgetExceeded { .. },
            ) => 1,
            CliError::Core(_) => 3,
        }
    }
}

impl Common {
    fn count_options(&self) -> CountOptions {
        CountOptions {
            eps: self.eps.clone(),
            alpha: self.alpha.clone(),
            a: self.a,
            seed: self.seed,
            max_enum: self.max_enum,
            presolve: self.presolve,
            threads: self.threads,
        }
    }

    fn backend(&self) -> CliResult<(Box<dyn Backend>, String)> {
        if self.oracle {
            return Ok((Box::new(BruteBackend(OracleBudget::default())), "oracle".into()));
        }
        let mut cfg = SolverConfig::resolve(self.solver_cmd.as_deref())?;
        cfg.timeout_ms = self.timeout_ms;
        cfg.seed_hint = self.seed;
        cfg.log_dir = self.log_smt.clone();
        let name = cfg.command_line();
        Ok((Box::new(SolverBackend::new(cfg)), name))
    }
}

impl RealArgs {
    fn options(&self) -> CliResult<RealOptions> {
        if self.grid.is_none() && !self.formal {
            return Err(CliError::Usage("real counting needs `--grid s` or `--formal`".into()));
        }
        if self.grid.is_some() && self.formal {
            return Err(CliError::Usage("`--grid` and `--formal` are exclusive".into()));
        }
        Ok(RealOptions {
            gamma: self.gamma.clone(),
            grid: self.grid,
            eps_discrete: self.eps_discrete.clone(),
            bit_budget: self.budget,
        })
    }
}

#[derive(Serialize)]
struct RunReport {
    input: String,
    command: &'static str,
    seed: u64,
    solver: String,
    parameters: Value,
    result: Value,
    votes: Value,
    solver_calls: u64,
    wall_time_s: f64,
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| {
        CliError::Core(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    })
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn count_int(input: &Path, common: &Common, snap: bool) -> CliResult<RunReport> {
    let f = formula::parse_problem(&read(input)?)?;
    let (backend, solver) = common.backend()?;
    let t0 = Instant::now();
    let est = discrete::approx_count_int(&f, &common.count_options(), backend.as_ref())?;
    let snapped = if snap { discrete::snap_to_integer(&est) } else { None };
    Ok(RunReport {
        input: input.display().to_string(),
        command: "count-int",
        seed: common.seed,
        solver,
        parameters: json!({ "pset": est.pset, "eps": rat::to_f64(&common.eps), "alpha": rat::to_f64(&common.alpha), "a": common.a }),
        votes: to_json(&est.votes),
        solver_calls: est.solver_calls,
        result: json!({ "value": est.value, "snapped": snapped, "estimate": est }),
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

fn count_real(input: &Path, common: &Common, real: &RealArgs) -> CliResult<RunReport> {
    let ro = real.options()?;
    let f = formula::parse_problem(&read(input)?)?;
    let (backend, solver) = common.backend()?;
    let t0 = Instant::now();
    let est = continuous::approx_count_real(&f, &ro, &common.count_options(), backend.as_ref())?;
    Ok(RunReport {
        input: input.display().to_string(),
        command: "count-real",
        seed: common.seed,
        solver,
        parameters: json!({ "pset": est.cells.pset, "grid": est.grid, "gamma": rat::to_f64(&ro.gamma) }),
        votes: to_json(&est.cells.votes),
        solver_calls: est.cells.solver_calls,
        result: json!({ "value": est.value, "abs_err": est.abs_err, "formal": est.formal, "estimate": est }),
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

fn value(input: &Path, common: &Common, real: &RealArgs, mode: ModeArg, mc: u64) -> CliResult<RunReport> {
    let p = ppl::parse_program(&read(input)?)?;
    let has_real = p.sample_decls().iter().any(|d| d.sort == Sort::Real);
    let ro = if has_real { real.options()? } else { RealOptions::default() };
    let opts = ValueOptions {
        count: common.count_options(),
        real: ro,
    };
    let (backend, solver) = common.backend()?;
    let mode = match mode {
        ModeArg::Upper => Mode::Upper,
        ModeArg::Lower => Mode::Lower,
    };
    let t0 = Instant::now();
    let r = ppl::estimate_value(&p, mode, &opts, backend.as_ref())?;
    let mut result = json!({ "value": r.value, "report": r });
    if mc > 0 {
        let target = if mode == Mode::Lower { p.dualize() } else { p.clone() };
        result["monte_carlo"] = match reference::monte_carlo_value(&target, mc, common.seed) {
            Ok((est, half)) => {
                let est = if mode == Mode::Lower { 1.0 - est } else { est };
                json!({ "samples": mc, "estimate": est, "half_width": half })
            }
            Err(e) => json!({ "samples": mc, "error": e.to_string() }),
        };
    }
    Ok(RunReport {
        input: input.display().to_string(),
        command: "value",
        seed: common.seed,
        solver,
        parameters: json!({ "pset_acc": r.v_acc.pset, "pset_term": r.v_term.pset, "grid": r.grid }),
        votes: json!({ "acc": r.v_acc.votes, "term": r.v_term.votes }),
        solver_calls: r.v_acc.solver_calls + r.v_term.solver_calls,
        result,
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

fn print(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::CountInt { input, common, snap_int } => print(&count_int(&input, &common, snap_int)?),
        Cmd::CountReal { input, common, real } => print(&count_real(&input, &common, &real)?),
        Cmd::Value {
            input,
            common,
            real,
            mode,
            mc_samples,
        } => print(&value(&input, &common, &real, mode, mc_samples)?),
        Cmd::Params { a, eps, alpha, bits, m } => {
            let p = params::derive_unchecked(a, &eps, &alpha, bits)?;
            match m {
                Some(m) => print(&json!({ "pset": p, "interval": params::certified_interval(&p, m) })),
                None => print(&p),
            }
        }
        Cmd::Selftest => {
            let report = selftest::run();
            print(&report);
            if !report.ok {
                return Err(CliError::Check("selftest".into()));
            }
        }
        Cmd::Bench {
            corpus,
            common,
            table1_only,
            out,
        } => {
            let report = bench::run(&corpus, &common, table1_only)?;
            print(&report);
            if let Some(out) = out {
                std::fs::write(out, serde_json::to_string_pretty(&report).expect("serializable"))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
