//! `core-sched` command-line interface.
//!
//! Data (traces, verdicts, CSV tables) goes to stdout or `--out`;
//! diagnostics go to stderr. Exit codes: 0 ok or learnable, 1 not
//! learnable, 2 usage error, 3 invalid scenario.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use core_sched::{
    average_error, builtin_scenario, frontier, oracle_max_kappa, parse_scenario, run_timed,
    thread_throughput, verify, verify_stochastic, write_trace, Error, FrontierSource, ScenarioDoc,
    SimParams, StrategyConfig, TraceFormat, VerifyParams, BUILTIN_NAMES,
};

const EXIT_NOT_LEARNABLE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(
    name = "core-sched",
    version,
    about = "Simulate and verify deadline-bounded learning threads under a shared data budget"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit its trace.
    Simulate(SimulateArgs),
    /// Check (eta, kappa) learnability of a scenario's strategy.
    Verify(VerifyArgs),
    /// Best achievable thread throughput by exhaustive search.
    Oracle(OracleArgs),
    /// Thread throughput over a grid of data-throughput caps (CSV).
    Frontier(FrontierArgs),
    /// Side-by-side thread throughput and average error (CSV).
    Compare(CompareArgs),
    /// List or print built-in scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Args)]
struct ScenarioSource {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
}

#[derive(Args)]
struct SeedArg {
    /// Random seed; defaults to CORE_SCHED_SEED, then the scenario's seed.
    #[arg(long, env = "CORE_SCHED_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// Strategy kind overriding the scenario's strategy.
    #[arg(long)]
    strategy: Option<String>,
    /// Allocation quantum (required for the oracle strategy).
    #[arg(long)]
    quantum: Option<u32>,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Print a run summary to stderr.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    quantum: u32,
}

#[derive(Args)]
struct FrontierArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// Ascending comma-separated caps, e.g. 0.25,0.5,1.
    #[arg(long, value_delimiter = ',', required = true)]
    eta_grid: Vec<f64>,
    /// Strategy kind; defaults to the scenario's strategy.
    #[arg(long, conflicts_with = "oracle")]
    strategy: Option<String>,
    /// Use the exhaustive-search optimum instead of a strategy.
    #[arg(long)]
    oracle: bool,
    /// Defaults to the scenario's epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    quantum: Option<u32>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[arg(long, value_delimiter = ',', required = true)]
    strategies: Vec<String>,
    #[arg(long)]
    quantum: Option<u32>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
    Show { name: String },
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Validation(_)
            | Error::Curve(_)
            | Error::Config(_)
            | Error::Syntax { .. }
            | Error::Schema { .. } => EXIT_INVALID,
            Error::Usage(_)
            | Error::OracleLimit { .. }
            | Error::Io(_)
            | Error::BudgetViolation { .. }
            | Error::UnknownThread { .. } => EXIT_USAGE,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn load_scenario(source: &ScenarioSource) -> Result<ScenarioDoc, Failure> {
    if BUILTIN_NAMES.contains(&source.scenario.as_str()) {
        return Ok(builtin_scenario(&source.scenario)?);
    }
    let path = Path::new(&source.scenario);
    let text = std::fs::read_to_string(path).map_err(|e| {
        usage(format!(
            "cannot read scenario {:?} ({e}); built-in names are {}",
            source.scenario,
            BUILTIN_NAMES.join(", ")
        ))
    })?;
    Ok(parse_scenario(&text)?)
}

fn strategy_by_name(
    name: &str,
    doc: &ScenarioDoc,
    quantum: Option<u32>,
) -> Result<StrategyConfig, Failure> {
    let strategy = match name {
        "scripted" => match &doc.strategy {
            s @ StrategyConfig::Scripted { .. } => s.clone(),
            _ => return Err(usage("scenario carries no scripted matrix")),
        },
        "oracle" => StrategyConfig::Oracle {
            quantum: quantum.ok_or_else(|| usage("the oracle strategy needs --quantum"))?,
        },
        _ => StrategyConfig::from_kind(name).ok_or_else(|| {
            usage(format!(
                "unknown strategy {name:?}; expected uniform, exclusive-static, edf-greedy, adaptive, scripted or oracle"
            ))
        })?,
    };
    let q = quantum.or(strategy.quantum());
    Ok(strategy.with_quantum(q))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| usage(format!("cannot write output: {e}")))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let doc = load_scenario(&args.source)?;
    let format: TraceFormat = args.format.parse()?;
    let strategy = match &args.strategy {
        Some(name) => strategy_by_name(name, &doc, args.quantum)?,
        None => {
            let q = args.quantum.or(doc.strategy.quantum());
            doc.strategy.clone().with_quantum(q)
        }
    };
    let mut params = doc.params;
    if let Some(seed) = args.seed.seed {
        params.seed = seed;
    }
    let (trace, elapsed) = run_timed(&doc.bundle, &strategy, &params)?;
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    emit(args.out.as_deref(), &write_trace(&trace, format))?;
    if args.summary {
        eprintln!(
            "strategy={} kappa={} succeeded={:?} average_error={} runtime_ms={:.3}",
            strategy.kind(),
            thread_throughput(&trace),
            trace.succeeded(),
            average_error(&trace).map_or("n/a".into(), |e| e.to_string()),
            elapsed.as_secs_f64() * 1e3
        );
    }
    Ok(0)
}

fn verify_cmd(args: VerifyArgs) -> Result<u8, Failure> {
    let doc = load_scenario(&args.source)?;
    let p = VerifyParams::new(args.eta, args.kappa, args.epsilon, args.delta)
        .with_replicates(args.replicates);
    p.check()?;
    let seed = args.seed.seed.unwrap_or(doc.params.seed);
    let result = if args.replicates == 1 {
        let params = SimParams {
            eta_cap: args.eta,
            epsilon: args.epsilon,
            seed,
            record_observed: false,
        };
        core_sched::run(&doc.bundle, &doc.strategy, &params).and_then(|trace| {
            let mut v = verify(&trace, &p)?;
            v.witness = Some(trace.allocation_matrix());
            Ok(v)
        })
    } else {
        verify_stochastic(&doc.bundle, &doc.strategy, &p, seed)
    };
    let verdict = match result {
        Ok(v) => v,
        Err(Error::BudgetViolation {
            timeslot,
            allocated,
            cap,
        }) => {
            eprintln!(
                "not learnable: strategy allocated {allocated} at timeslot {timeslot}, above eta = {cap}"
            );
            return Ok(EXIT_NOT_LEARNABLE);
        }
        Err(e) => return Err(e.into()),
    };
    emit(None, &to_json(&verdict))?;
    eprintln!(
        "{}: kappa achieved {} (required {}), confidence {} over {} replicate(s)",
        if verdict.learnable {
            "learnable"
        } else {
            "not learnable"
        },
        verdict.achieved_kappa,
        args.kappa,
        verdict.confidence_fraction,
        verdict.replicates
    );
    Ok(if verdict.learnable {
        0
    } else {
        EXIT_NOT_LEARNABLE
    })
}

fn oracle_cmd(args: OracleArgs) -> Result<u8, Failure> {
    let doc = load_scenario(&args.source)?;
    let result = oracle_max_kappa(&doc.bundle, args.eta, args.epsilon, args.quantum)?;
    emit(None, &to_json(&result))?;
    Ok(0)
}

fn frontier_cmd(args: FrontierArgs) -> Result<u8, Failure> {
    let doc = load_scenario(&args.source)?;
    let source = if args.oracle {
        FrontierSource::Oracle
    } else {
        FrontierSource::Strategy(match &args.strategy {
            Some(name) => strategy_by_name(name, &doc, args.quantum)?,
            None => doc.strategy.clone(),
        })
    };
    let epsilon = args.epsilon.unwrap_or(doc.params.epsilon);
    let seed = args.seed.seed.unwrap_or(doc.params.seed);
    let points = frontier(
        &doc.bundle,
        &source,
        &args.eta_grid,
        epsilon,
        args.quantum,
        seed,
    )?;
    let mut out = String::from("eta,kappa\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.eta, p.kappa));
    }
    emit(None, &out)?;
    Ok(0)
}

fn compare_cmd(args: CompareArgs) -> Result<u8, Failure> {
    let doc = load_scenario(&args.source)?;
    let mut params = doc.params;
    if let Some(seed) = args.seed.seed {
        params.seed = seed;
    }
    let mut out = String::from("strategy,kappa,average_error\n");
    for name in &args.strategies {
        let strategy = strategy_by_name(name, &doc, args.quantum)?;
        let (trace, _) = run_timed(&doc.bundle, &strategy, &params)?;
        let avg = average_error(&trace).map_or(String::new(), |e| e.to_string());
        out.push_str(&format!("{name},{},{avg}\n", thread_throughput(&trace)));
    }
    emit(None, &out)?;
    Ok(0)
}

fn scenario_cmd(action: ScenarioAction) -> Result<u8, Failure> {
    match action {
        ScenarioAction::List => emit(None, &(BUILTIN_NAMES.join("\n") + "\n"))?,
        ScenarioAction::Show { name } => {
            let doc = builtin_scenario(&name)?;
            emit(None, &(doc.to_json() + "\n"))?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Frontier(a) => frontier_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Scenario { action } => scenario_cmd(action),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
