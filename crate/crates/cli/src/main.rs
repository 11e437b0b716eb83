use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use discrepancy::constants::{check_inequalities, ConstantProfile, DEFAULT_BIT_CAP};
use discrepancy::engine::{run_observed, CheckMode, RunOptions, RunResult, StepRecord};
use discrepancy::generate::{generate, GeneratorKind, GeneratorSpec};
use discrepancy::oracle::{brute_force_with_cap, DEFAULT_ORACLE_CAP};
use discrepancy::system::{verify_coloring, ColoringDoc, SetSystem};
use discrepancy::trace::{parse_jsonl, write_jsonl, TraceSummary};
use discrepancy::{classic_beck_fiala, paper_profile, parse_set_system, Error, Sign};

/// Exit codes, stable across releases.
mod code {
    pub const GENERIC: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const INFEASIBLE_PROFILE: u8 = 3;
    pub const NO_COHORT_SEED: u8 = 4;
    pub const STEP_CAP: u8 = 5;
    pub const INVARIANT: u8 = 6;
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Malformed(_)
            | Error::ElementOutOfRange { .. }
            | Error::DuplicateElement { .. }
            | Error::EmptyFamily
            | Error::ColorOutOfRange { .. }
            | Error::LengthMismatch { .. }
            | Error::NotFrozen { .. }
            | Error::InvalidProfile(_)
            | Error::Json(_) => code::PARSE,
            Error::InfeasibleW { .. } | Error::TowerOverflow { .. } | Error::LogStarOfZero => code::INFEASIBLE_PROFILE,
            Error::NoCohortSeed { .. } => code::NO_COHORT_SEED,
            Error::StepCapExceeded { .. } => code::STEP_CAP,
            Error::InvariantViolation { .. } => code::INVARIANT,
            _ => code::GENERIC,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "disc", version, about = "Two-coloring of bounded-degree set systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Classic,
    Cohort,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Polarity {
    Plus,
    Minus,
}

#[derive(Subcommand)]
enum Command {
    /// Color an instance; the coloring JSON goes to stdout.
    Run(RunArgs),
    /// Recompute the discrepancy of a coloring.
    Verify {
        #[arg(long)]
        input: PathBuf,
        /// Either `{"colors": [...]}` or a bare array of +1/-1.
        #[arg(long)]
        coloring: PathBuf,
    },
    /// Generate an instance; the instance JSON goes to stdout.
    Gen {
        #[arg(long, value_parser = parse_kind)]
        kind: GeneratorKind,
        #[arg(long)]
        n: usize,
        #[arg(long = "sets")]
        num_sets: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact minimum discrepancy by enumeration.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        cap: usize,
    },
    /// Print the constant inequalities for a degree or a profile file.
    CheckConstants {
        #[arg(long)]
        d: u64,
        /// Profile override file; without it the profile is derived from `d`.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Summarize a JSONL trace.
    InspectTrace { path: PathBuf },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "cohort")]
    mode: Mode,
    #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
    input: Option<PathBuf>,
    /// Run several instances in parallel; one JSON line per instance.
    #[arg(long, num_args = 1..)]
    batch: Vec<PathBuf>,
    /// `paper` or a profile override file.
    #[arg(long, env = "DISC_PROFILE")]
    profile: Option<String>,
    /// `off`, `per-step` or `every-K`.
    #[arg(long, default_value = "off", value_parser = parse_check)]
    check_invariants: CheckMode,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    step_cap: Option<u64>,
    #[arg(long, value_enum, default_value = "plus")]
    polarity: Polarity,
}

fn parse_kind(s: &str) -> Result<GeneratorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_check(s: &str) -> Result<CheckMode, String> {
    match s {
        "off" => Ok(CheckMode::Off),
        "per-step" => Ok(CheckMode::PerStep),
        _ => s
            .strip_prefix("every-")
            .and_then(|k| k.parse::<u64>().ok())
            .filter(|&k| k > 0)
            .map(CheckMode::Every)
            .ok_or_else(|| format!("expected off, per-step or every-K, got {s:?}")),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::new(code::PARSE, format!("{}: {e}", path.display())))
}

fn load_system(path: &Path) -> CliResult<SetSystem> {
    parse_set_system(&read(path)?).map_err(|e| {
        let f = Failure::from(e);
        Failure::new(f.code, format!("{}: {}", path.display(), f.message))
    })
}

fn resolve_profile(spec: Option<&str>, sys: &SetSystem) -> CliResult<ConstantProfile> {
    match spec {
        None => Err(Failure::new(code::PARSE, "cohort mode needs --profile (paper or a file) or DISC_PROFILE")),
        Some("paper") => Ok(paper_profile(sys.degree() as u64)?),
        Some(path) => Ok(ConstantProfile::from_json(&read(Path::new(path))?)?),
    }
}

struct Outcome {
    result: CliResult<RunResult>,
    records: Vec<StepRecord>,
}

fn run_one(args: &RunArgs, sys: &SetSystem) -> Outcome {
    if args.mode == Mode::Classic {
        return Outcome { result: classic_beck_fiala(sys).map_err(Failure::from), records: Vec::new() };
    }
    let profile = match resolve_profile(args.profile.as_deref(), sys) {
        Ok(p) => p,
        Err(e) => return Outcome { result: Err(e), records: Vec::new() },
    };
    let opts = RunOptions {
        check: args.check_invariants,
        trace: false,
        step_cap: args.step_cap,
        polarity: if args.polarity == Polarity::Plus { Sign::Plus } else { Sign::Minus },
        seed: args.seed,
    };
    let mut records = Vec::new();
    let mut keep = |_: &_, r: &StepRecord, _: &_| records.push(r.clone());
    let result =
        run_observed(sys, &profile, &opts, args.trace.is_some().then_some(&mut keep as _)).map_err(Failure::from);
    Outcome { result, records }
}

fn summarize(label: &str, sys: &SetSystem, res: &RunResult) {
    eprintln!(
        "{label}: n = {}, sets = {}, d = {}, discrepancy = {}, certified bound = {}, steps = {}, histogram = {:?}, guarantee = {}",
        sys.n(),
        sys.num_sets(),
        sys.degree(),
        res.discrepancy,
        res.bound,
        res.steps_executed,
        res.step_histogram,
        serde_json::to_string(&res.guarantee_claimed).unwrap_or_default()
    );
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable output")
}

fn cmd_run(args: &RunArgs) -> CliResult<()> {
    if !args.batch.is_empty() {
        return cmd_batch(args);
    }
    let path = args.input.as_deref().expect("clap requires --input without --batch");
    let sys = load_system(path)?;
    let outcome = run_one(args, &sys);
    if let Some(trace) = &args.trace {
        let file =
            fs::File::create(trace).map_err(|e| Failure::new(code::GENERIC, format!("{}: {e}", trace.display())))?;
        write_jsonl(std::io::BufWriter::new(file), &outcome.records)
            .map_err(|e| Failure::new(code::GENERIC, format!("{}: {e}", trace.display())))?;
    }
    let res = outcome.result?;
    summarize(&path.display().to_string(), &sys, &res);
    println!("{}", json(&ColoringDoc::from_coloring(&sys, &res.final_coloring)?));
    Ok(())
}

#[derive(Serialize)]
struct BatchLine {
    input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    colors: Option<Vec<i8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    discrepancy: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    exit_code: u8,
}

fn cmd_batch(args: &RunArgs) -> CliResult<()> {
    if args.trace.is_some() {
        return Err(Failure::new(code::PARSE, "--trace applies to a single --input"));
    }
    let lines: Vec<BatchLine> = args
        .batch
        .par_iter()
        .map(|path| {
            let input = path.display().to_string();
            let done = load_system(path).and_then(|sys| {
                let res = run_one(args, &sys).result?;
                summarize(&input, &sys, &res);
                Ok(ColoringDoc::from_coloring(&sys, &res.final_coloring)?)
            });
            match done {
                Ok(doc) => BatchLine {
                    input,
                    colors: Some(doc.colors),
                    discrepancy: Some(doc.discrepancy),
                    error: None,
                    exit_code: 0,
                },
                Err(f) => {
                    BatchLine { input, colors: None, discrepancy: None, error: Some(f.message), exit_code: f.code }
                }
            }
        })
        .collect();
    for line in &lines {
        println!("{}", json(line));
    }
    match lines.iter().find(|l| l.exit_code != 0) {
        Some(l) => Err(Failure::new(l.exit_code, format!("{}: {}", l.input, l.error.as_deref().unwrap_or("")))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct VerifyReport {
    per_set: Vec<i64>,
    discrepancy: i64,
}

fn cmd_verify(input: &Path, coloring: &Path) -> CliResult<()> {
    let sys = load_system(input)?;
    let text = read(coloring)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
    let colors = value.get("colors").unwrap_or(&value);
    let colors: Vec<i64> = serde_json::from_value(colors.clone())
        .map_err(|e| Failure::new(code::PARSE, format!("{}: colors must be integers: {e}", coloring.display())))?;
    let colors: Vec<i8> = colors
        .iter()
        .enumerate()
        .map(|(x, &c)| match c {
            1 | -1 => Ok(c as i8),
            _ => Err(Failure::from(Error::NotFrozen { element: x, value: c.to_string() })),
        })
        .collect::<CliResult<_>>()?;
    let per_set = verify_coloring(&sys, &colors)?;
    let discrepancy = per_set.iter().copied().max().unwrap_or(0);
    for (s, v) in per_set.iter().enumerate() {
        eprintln!("set {s}: |chi(S)| = {v}");
    }
    eprintln!("discrepancy = {discrepancy}");
    println!("{}", json(&VerifyReport { per_set, discrepancy }));
    Ok(())
}

fn cmd_check_constants(d: u64, profile: Option<&Path>) -> CliResult<()> {
    let profile = match profile {
        Some(path) => ConstantProfile::from_json(&read(path)?)?,
        None => {
            let p = ConstantProfile::paper_constants(d, DEFAULT_BIT_CAP)?;
            println!("d = {d}: delta = log* d = {}, alpha = 1/4, W = {}", p.delta(), p.w());
            if let Err(e) = paper_profile(d) {
                println!("note: {e}");
            }
            p
        }
    };
    let report = check_inequalities(&profile, d);
    print!("{report}");
    println!("all inequalities hold: {}", report.all_hold());
    Ok(())
}

fn cmd_inspect(path: &Path) -> CliResult<()> {
    let records = parse_jsonl(&read(path)?)?;
    let summary = TraceSummary::new(&records);
    eprintln!(
        "{} records, histogram {:?}, {} elements frozen, clean = {}",
        summary.records,
        summary.step_histogram,
        summary.frozen_total,
        summary.is_clean()
    );
    println!("{}", json(&summary));
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Verify { input, coloring } => cmd_verify(&input, &coloring),
        Command::Gen { kind, n, num_sets, d, seed } => {
            let sys = generate(&GeneratorSpec { kind, n, num_sets, d, seed })?;
            println!("{}", sys.to_json());
            Ok(())
        }
        Command::Oracle { input, cap } => {
            let sys = load_system(&input)?;
            let disc = brute_force_with_cap(&sys, cap)?;
            println!("{}", json(&serde_json::json!({ "discrepancy": disc })));
            Ok(())
        }
        Command::CheckConstants { d, profile } => cmd_check_constants(d, profile.as_deref()),
        Command::InspectTrace { path } => cmd_inspect(&path),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
