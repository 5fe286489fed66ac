//! Command-line front end: check a net, run the brute-force oracle,
//! export graphs, and generate benchmark mutants.
//!
//! Exit codes of `check` and `oracle`: 0 = sound, 2 = unsound,
//! 1 = error or inconclusive.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dpncheck_core::constraint::CmpOp;
use dpncheck_core::dot::{export_cg, export_dds, CgStyle};
use dpncheck_core::dpn::Dpn;
use dpncheck_core::mutate::{add_chained_vars, add_sequential_states};
use dpncheck_core::oracle::{oracle_soundness, DomainBox, OracleVerdict};
use dpncheck_core::pnml::{parse_pnml, serialize_pnml};
use dpncheck_core::report::export_report;
use dpncheck_core::smt::SolverConfig;
use dpncheck_core::soundness::{run_check, CheckConfig, Property, SoundnessReport};

#[derive(Parser)]
#[command(
    name = "dpncheck",
    version,
    about = "Data-aware soundness checking for Data Petri nets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check data-aware soundness of a net in PNML format.
    Check(CheckArgs),
    /// Decide soundness by brute force over finite variable domains.
    Oracle(OracleArgs),
    /// Emit mutated variants of a net for benchmarking.
    Mutate {
        #[command(subcommand)]
        mutation: MutateCommand,
    },
}

#[derive(Args)]
struct CheckArgs {
    /// Input net (.pnml).
    file: PathBuf,
    /// Token bound k per place.
    #[arg(long, default_value_t = 1)]
    bound: u32,
    /// Node budget per constraint graph.
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    /// SMT solver executable (default: $DPNCHECK_SOLVER, then z3/cvc5 on PATH).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Extra arguments passed to the solver.
    #[arg(long)]
    solver_args: Option<String>,
    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    /// Worker solver sessions for final-formula computation.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the JSON report here ('-' for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the transition system as DOT here.
    #[arg(long)]
    dot_dds: Option<PathBuf>,
    /// Write the constraint graph as DOT here (violations styled).
    #[arg(long)]
    dot_cg: Option<PathBuf>,
    /// Suppress the human-readable summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Input net (.pnml).
    file: PathBuf,
    /// Value range for integer variables, as lo..hi.
    #[arg(long = "box", default_value = "-3..3", allow_hyphen_values = true)]
    value_box: String,
    /// Token bound k per place.
    #[arg(long, default_value_t = 1)]
    bound: u32,
    /// State-count cap.
    #[arg(long, default_value_t = 1_000_000)]
    cap: usize,
}

#[derive(Subcommand)]
enum MutateCommand {
    /// Insert n sequential control states before the initial marking.
    States(MutateArgs),
    /// Obfuscate guards with chains of n fresh variables per atom.
    Vars(MutateVarsArgs),
}

#[derive(Args)]
struct MutateArgs {
    file: PathBuf,
    #[arg(short)]
    n: usize,
    /// Output path (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MutateVarsArgs {
    file: PathBuf,
    #[arg(short)]
    n: usize,
    /// Operator linking the chain variables.
    #[arg(long, value_enum, default_value_t = ChainOp::Eq)]
    chain_op: ChainOp,
    /// Output path (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChainOp {
    Eq,
    Ge,
    Le,
}

impl From<ChainOp> for CmpOp {
    fn from(op: ChainOp) -> CmpOp {
        match op {
            ChainOp::Eq => CmpOp::Eq,
            ChainOp::Ge => CmpOp::Ge,
            ChainOp::Le => CmpOp::Le,
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    // Usage problems exit 1 like any other error; 2 is reserved for
    // "unsound". Help and version keep their zero exit.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return Ok(ExitCode::SUCCESS);
        }
        Err(err) => {
            eprint!("{err}");
            return Ok(ExitCode::from(1));
        }
    };
    match cli.command {
        Command::Check(args) => check(args),
        Command::Oracle(args) => oracle(args),
        Command::Mutate { mutation } => mutate(mutation).map(|()| ExitCode::SUCCESS),
    }
}

fn load(path: &Path) -> Result<Dpn> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dpn = parse_pnml(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(dpn)
}

fn solver_config(
    solver: Option<PathBuf>,
    args: Option<String>,
    timeout: f64,
) -> Result<SolverConfig> {
    let mut config = match solver {
        Some(path) => SolverConfig::new(path),
        None => SolverConfig::from_env().context("locating an SMT solver")?,
    };
    if let Some(args) = args {
        config.args = args.split_whitespace().map(str::to_string).collect();
    }
    config.timeout = Duration::from_secs_f64(timeout);
    Ok(config)
}

fn check(args: CheckArgs) -> Result<ExitCode> {
    let dpn = load(&args.file)?;
    let solver = solver_config(args.solver, args.solver_args, args.timeout)?;
    let mut config = CheckConfig::new(solver);
    config.bound = args.bound;
    config.budget = args.budget;
    config.jobs = args.jobs;

    let outcome = run_check(&dpn, &config)?;
    let report = &outcome.report;

    if let Some(path) = &args.json {
        let text = export_report(report);
        if path.as_os_str() == "-" {
            print!("{text}");
        } else {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if let Some(path) = &args.dot_dds {
        std::fs::write(path, export_dds(&outcome.analyzer.dds))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.dot_cg {
        let mut style = CgStyle::default();
        match report.violated {
            Some(Property::P2) => {
                if let Some(node) = outcome.violation_node {
                    style.violating_states = vec![outcome.analyzer.cg.nodes[node].state];
                    style.highlight_node = Some(node);
                }
            }
            Some(Property::P1) => style.highlight_node = outcome.violation_node,
            _ => {}
        }
        std::fs::write(
            path,
            export_cg(&outcome.analyzer.dds, &outcome.analyzer.cg, &style),
        )
        .with_context(|| format!("writing {}", path.display()))?;
    }
    if !args.quiet {
        print_summary(report);
    }
    Ok(if report.sound {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn print_summary(report: &SoundnessReport) {
    println!("net:      {}", report.net);
    match report.violated {
        None => println!("verdict:  sound"),
        Some(p) => println!("verdict:  unsound ({p} violated)"),
    }
    if let Some(dead) = &report.dead_transitions {
        println!("dead:     {}", dead.join(", "));
    }
    if let Some(w) = &report.witness {
        let steps: Vec<String> = w
            .steps
            .iter()
            .map(|s| {
                if s.writes.is_empty() {
                    s.label.clone()
                } else {
                    let writes: Vec<String> =
                        s.writes.iter().map(|(v, x)| format!("{v}'={x}")).collect();
                    format!("{} [{}]", s.label, writes.join(", "))
                }
            })
            .collect();
        println!("witness:  {}", steps.join(" ; "));
        let values: Vec<String> = w
            .final_assignment()
            .iter()
            .map(|(v, x)| format!("{v}={x}"))
            .collect();
        println!(
            "reaches:  ({}) with {}",
            w.final_marking(),
            values.join(", ")
        );
    }
    println!(
        "|B|:      {} states / {} edges",
        report.sizes.dds_states, report.sizes.dds_edges
    );
    println!(
        "|CG|:     {} nodes / {} edges",
        report.sizes.cg_nodes, report.sizes.cg_edges
    );
    println!(
        "SMT:      {} sat checks, {} QE calls, {} equivalence checks, {} cache hits, {} ms",
        report.stats.sat_checks,
        report.stats.qe_calls,
        report.stats.equiv_checks,
        report.stats.cache_hits,
        report.stats.elapsed.as_millis()
    );
}

fn oracle(args: OracleArgs) -> Result<ExitCode> {
    let dpn = load(&args.file)?;
    let domain = parse_box(&args.value_box)?;
    let verdict = oracle_soundness(&dpn, &domain, args.bound, args.cap)?;
    match verdict {
        OracleVerdict::Sound => {
            println!("verdict:  sound (within box {})", args.value_box);
            Ok(ExitCode::SUCCESS)
        }
        OracleVerdict::Violated(p) => {
            println!(
                "verdict:  unsound ({p} violated, within box {})",
                args.value_box
            );
            Ok(ExitCode::from(2))
        }
    }
}

fn parse_box(text: &str) -> Result<DomainBox> {
    let Some((lo, hi)) = text.split_once("..") else {
        bail!("--box expects lo..hi, e.g. -3..3");
    };
    let lo: i64 = lo.trim().parse().context("--box lower bound")?;
    let hi: i64 = hi.trim().parse().context("--box upper bound")?;
    if lo > hi {
        bail!("--box lower bound exceeds upper bound");
    }
    Ok(DomainBox::from_range(lo, hi))
}

fn mutate(command: MutateCommand) -> Result<()> {
    let (mutated, output) = match command {
        MutateCommand::States(args) => {
            let dpn = load(&args.file)?;
            (add_sequential_states(&dpn, args.n), args.output)
        }
        MutateCommand::Vars(args) => {
            let dpn = load(&args.file)?;
            (
                add_chained_vars(&dpn, args.n, args.chain_op.into()),
                args.output,
            )
        }
    };
    let text = serialize_pnml(&mutated);
    match output {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}
