//! Command-line front end: instance files in, bound values, region traces,
//! and demonstration reports out, as JSON (and CSV for traces).
//!
//! Exit codes: 0 success / conclusion holds; 1 input parse error; 2 invalid
//! instance, failed validation, or failed conclusion; 3 infeasible problem.

mod instance;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ceo_region_core::bounds::{Feasibility, TangentKind, WeightVector};
use ceo_region_core::model::{
    align_to_general, validate_distortion, validate_general_distortion, CeoInstance,
    DistortionTarget, DistortionValidation, GeneralCeoInstance,
};
use ceo_region_core::optimize::{
    minimize_tangent, minimize_tangent_general, trace_region, OptimizerOptions,
};
use ceo_region_core::verify::{
    demo_gap, demo_parallel, run_dominance_suite, run_enhancement_suite,
    run_supermodularity_suite,
};
use ceo_region_core::Error as CoreError;

use instance::{normalized, InstanceFile, ParsedInstance};

const EXIT_PARSE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "ceo-region", version, about = "Bounds on the Gaussian CEO rate-distortion region")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Outer,
    Inner,
    #[value(name = "chen-wang")]
    ChenWang,
    GeneralOuter,
    GeneralInner,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnitsArg {
    Nats,
    Bits,
}

impl UnitsArg {
    fn convert(&self, nats: f64) -> f64 {
        match self {
            UnitsArg::Nats => nats,
            UnitsArg::Bits => nats / std::f64::consts::LN_2,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            UnitsArg::Nats => "nats",
            UnitsArg::Bits => "bits",
        }
    }
}

#[derive(Args)]
struct OptimizerArgs {
    /// Random seed for the optimizer's multi-start draws.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of optimizer starts.
    #[arg(long, default_value_t = 16)]
    starts: usize,
    /// Total gradient-iteration budget.
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
}

impl OptimizerArgs {
    fn options(&self) -> OptimizerOptions {
        OptimizerOptions {
            starts: self.starts,
            max_iters: self.max_iters,
            seed: self.seed,
            ..OptimizerOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a tangent objective over feasible allocations.
    Bound {
        /// Instance file (JSON).
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Tangent weights, comma separated; overrides the file's `mu`.
        #[arg(long)]
        mu: Option<String>,
        #[arg(long, value_enum, default_value_t = UnitsArg::Nats)]
        units: UnitsArg,
        #[command(flatten)]
        opt: OptimizerArgs,
        /// Skip the upper distortion-limit check `D <= K_X`.
        #[arg(long)]
        skip_upper_check: bool,
        /// Skip both distortion-limit checks (an unattainable target then
        /// surfaces as exit code 3).
        #[arg(long)]
        skip_validation: bool,
        /// Print the canonical form of the parsed instance and exit.
        #[arg(long)]
        dump_normalized: bool,
    },
    /// Sweep the second weight and emit a CSV of tangent minima.
    Trace {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Sweep `from:to:steps` applied to every weight after the first,
        /// with the first weight fixed at 1.
        #[arg(long)]
        mu_sweep: String,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = UnitsArg::Nats)]
        units: UnitsArg,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Run a strict-separation demonstration.
    Demo {
        #[command(subcommand)]
        which: DemoCommand,
    },
    /// Run a randomized verification suite on an instance.
    Verify {
        input: PathBuf,
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Strict gap between the clipped and unclipped two-sensor bounds.
    Gap {
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 4.0)]
        mu_ratio: f64,
        #[arg(long, default_value_t = 0.75)]
        d: f64,
    },
    /// The outer bound strictly contains the exact parallel region.
    Parallel {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.4)]
        d1_frac: f64,
        #[arg(long, default_value_t = 0.8)]
        d2_frac: f64,
        #[arg(long, default_value_t = 4.0)]
        mu_ratio: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Supermodularity,
    Enhancement,
    Dominance,
}

#[derive(Serialize)]
struct BoundOutput {
    kind: String,
    units: String,
    mu: Vec<f64>,
    value: f64,
    feasibility: Feasibility,
    allocation: ceo_region_core::bounds::Allocation,
    per_subset: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ValidationDiagnosis<'a> {
    error: &'a str,
    lower_ok: bool,
    upper_ok: bool,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn core_error_exit(e: &CoreError) -> u8 {
    match e {
        CoreError::Infeasible => EXIT_INFEASIBLE,
        _ => EXIT_INVALID,
    }
}

fn read_instance(path: &PathBuf) -> Result<(InstanceFile, ParsedInstance), (u8, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (EXIT_PARSE, format!("cannot read {}: {e}", path.display())))?;
    let file = InstanceFile::from_json(&text).map_err(|e| (EXIT_PARSE, format!("{e:#}")))?;
    let parsed = file.parse().map_err(|e| (EXIT_INVALID, format!("{e:#}")))?;
    Ok((file, parsed))
}

fn parse_mu(flag: Option<&str>, file_mu: Option<&[f64]>, sensors: usize) -> Result<Vec<f64>, String> {
    let mu = match flag {
        Some(text) => text
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad weight `{t}`: {e}")))
            .collect::<Result<Vec<f64>, String>>()?,
        None => file_mu.map(|m| m.to_vec()).ok_or_else(|| {
            "no tangent weights: pass --mu or add a `mu` field to the instance".to_string()
        })?,
    };
    if mu.len() != sensors {
        return Err(format!("expected {sensors} weights, got {}", mu.len()));
    }
    Ok(mu)
}

/// Views of a parsed instance in the two model frames.
fn as_aligned(parsed: &ParsedInstance) -> Result<(CeoInstance, DistortionTarget), String> {
    match parsed {
        ParsedInstance::Aligned { inst, target } => Ok((inst.clone(), target.clone())),
        ParsedInstance::Scalar { inst, d } => Ok((
            inst.to_matrix_instance(),
            DistortionTarget::scalar(*d).map_err(|e| e.to_string())?,
        )),
        ParsedInstance::Parallel(inst) => Ok(inst.to_matrix_instance()),
        ParsedInstance::General { .. } => {
            Err("this kind needs an aligned, scalar or parallel instance".into())
        }
    }
}

fn as_general(parsed: &ParsedInstance) -> Result<(GeneralCeoInstance, DistortionTarget), String> {
    if let ParsedInstance::General { inst, target } = parsed {
        return Ok((inst.clone(), target.clone()));
    }
    let (inst, target) = as_aligned(parsed)?;
    let gen = align_to_general(&inst).map_err(|e| e.to_string())?;
    Ok((gen, target))
}

fn sensors_of(parsed: &ParsedInstance) -> usize {
    match parsed {
        ParsedInstance::Aligned { inst, .. } => inst.sensors(),
        ParsedInstance::General { inst, .. } => inst.sensors(),
        ParsedInstance::Scalar { inst, .. } => inst.sensors(),
        ParsedInstance::Parallel(inst) => inst.sensors(),
    }
}

fn check_validation(
    v: DistortionValidation,
    skip_upper: bool,
    skip_all: bool,
) -> Result<(), ExitCode> {
    if skip_all || v.is_ok_skipping_upper(skip_upper) {
        return Ok(());
    }
    let diag = ValidationDiagnosis {
        error: "distortion target outside its admissible interval",
        lower_ok: v.lower_ok,
        upper_ok: v.upper_ok,
    };
    eprintln!("{}", serde_json::to_string(&diag).expect("serializable"));
    Err(ExitCode::from(EXIT_INVALID))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_bound(
    input: PathBuf,
    kind: KindArg,
    mu_flag: Option<String>,
    units: UnitsArg,
    opt: OptimizerArgs,
    skip_upper: bool,
    skip_all: bool,
    dump: bool,
) -> ExitCode {
    let (file, parsed) = match read_instance(&input) {
        Ok(x) => x,
        Err((code, msg)) => return fail(code, msg),
    };
    if dump {
        print_json(&normalized(&parsed, file.mu.as_deref()));
        return ExitCode::SUCCESS;
    }
    let mu_raw = match parse_mu(mu_flag.as_deref(), file.mu.as_deref(), sensors_of(&parsed)) {
        Ok(m) => m,
        Err(msg) => return fail(EXIT_INVALID, msg),
    };
    let mu = match WeightVector::new(mu_raw.clone()) {
        Ok(m) => m,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let opts = opt.options();

    let result = match kind {
        KindArg::Outer | KindArg::Inner | KindArg::ChenWang => {
            let (inst, target) = match as_aligned(&parsed) {
                Ok(x) => x,
                Err(msg) => return fail(EXIT_INVALID, msg),
            };
            match validate_distortion(&inst, &target) {
                Ok(v) => {
                    if let Err(code) = check_validation(v, skip_upper, skip_all) {
                        return code;
                    }
                }
                Err(e) => return fail(EXIT_INVALID, e),
            }
            let tk = match kind {
                KindArg::Outer => TangentKind::Outer,
                KindArg::Inner => TangentKind::Inner,
                _ => TangentKind::ChenWang,
            };
            minimize_tangent(tk, &inst, &target, &mu, &opts)
        }
        KindArg::GeneralOuter | KindArg::GeneralInner => {
            let (inst, target) = match as_general(&parsed) {
                Ok(x) => x,
                Err(msg) => return fail(EXIT_INVALID, msg),
            };
            match validate_general_distortion(&inst, &target) {
                Ok(v) => {
                    if let Err(code) = check_validation(v, skip_upper, skip_all) {
                        return code;
                    }
                }
                Err(e) => return fail(EXIT_INVALID, e),
            }
            let tk = if kind == KindArg::GeneralOuter {
                TangentKind::Outer
            } else {
                TangentKind::Inner
            };
            minimize_tangent_general(tk, &inst, &target, &mu, &opts)
        }
    };

    match result {
        Ok(report) => {
            let out = BoundOutput {
                kind: kind_name(kind).to_string(),
                units: units.name().into(),
                mu: mu_raw,
                value: units.convert(report.value),
                feasibility: report.feasibility,
                allocation: report.allocation.clone(),
                per_subset: report
                    .per_subset
                    .iter()
                    .map(|(k, v)| (k.to_string(), units.convert(*v)))
                    .collect(),
            };
            print_json(&out);
            ExitCode::SUCCESS
        }
        Err(e) => fail(core_error_exit(&e), e),
    }
}

fn kind_name(kind: KindArg) -> &'static str {
    match kind {
        KindArg::Outer => "outer",
        KindArg::Inner => "inner",
        KindArg::ChenWang => "chen-wang",
        KindArg::GeneralOuter => "general-outer",
        KindArg::GeneralInner => "general-inner",
    }
}

fn cmd_trace(
    input: PathBuf,
    kind: KindArg,
    sweep: String,
    out: Option<PathBuf>,
    units: UnitsArg,
    opt: OptimizerArgs,
) -> ExitCode {
    let (_, parsed) = match read_instance(&input) {
        Ok(x) => x,
        Err((code, msg)) => return fail(code, msg),
    };
    let tk = match kind {
        KindArg::Outer => TangentKind::Outer,
        KindArg::Inner => TangentKind::Inner,
        KindArg::ChenWang => TangentKind::ChenWang,
        _ => return fail(EXIT_INVALID, "trace supports outer, inner and chen-wang kinds"),
    };
    let (inst, target) = match as_aligned(&parsed) {
        Ok(x) => x,
        Err(msg) => return fail(EXIT_INVALID, msg),
    };
    match validate_distortion(&inst, &target) {
        Ok(v) => {
            if let Err(code) = check_validation(v, false, false) {
                return code;
            }
        }
        Err(e) => return fail(EXIT_INVALID, e),
    }

    let parts: Vec<&str> = sweep.split(':').collect();
    let (from, to, steps) = match parts.as_slice() {
        [f, t, s] => match (f.parse::<f64>(), t.parse::<f64>(), s.parse::<usize>()) {
            (Ok(f), Ok(t), Ok(s)) if s >= 1 && f > 0.0 && t > 0.0 => (f, t, s),
            _ => return fail(EXIT_INVALID, "sweep must be `from:to:steps` with positive bounds"),
        },
        _ => return fail(EXIT_INVALID, "sweep must be `from:to:steps`"),
    };
    let l_total = inst.sensors();
    let mu_list: Vec<Vec<f64>> = (0..steps)
        .map(|i| {
            let t = if steps == 1 {
                from
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            };
            let mut mu = vec![t; l_total];
            mu[0] = 1.0;
            mu
        })
        .collect();

    let trace = match trace_region(tk, &inst, &target, &mu_list, &opt.options()) {
        Ok(t) => t,
        Err(e) => return fail(core_error_exit(&e), e),
    };

    let mut csv = String::new();
    for l in 0..l_total {
        csv.push_str(&format!("mu{},", l + 1));
    }
    csv.push_str("value\r\n");
    for point in &trace {
        for m in &point.mu {
            csv.push_str(&format!("{:.16e},", m));
        }
        csv.push_str(&format!("{:.16e}\r\n", units.convert(point.value)));
    }
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, csv) {
                return fail(EXIT_INVALID, format!("cannot write {}: {e}", path.display()));
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(csv.as_bytes()).is_err() {
                return ExitCode::from(EXIT_INVALID);
            }
        }
    }
    ExitCode::SUCCESS
}

fn cmd_demo(which: DemoCommand) -> ExitCode {
    let report = match which {
        DemoCommand::Gap { scale, mu_ratio, d } => demo_gap(scale, mu_ratio, d),
        DemoCommand::Parallel {
            sigma,
            d1_frac,
            d2_frac,
            mu_ratio,
        } => demo_parallel(sigma, d1_frac, d2_frac, mu_ratio),
    };
    match report {
        Ok(report) => {
            print_json(&report);
            if report.conclusion.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("demo conclusion failed: {}", report.conclusion.statement);
                ExitCode::from(EXIT_INVALID)
            }
        }
        Err(e) => fail(core_error_exit(&e), e),
    }
}

fn cmd_verify(input: PathBuf, suite: SuiteArg, trials: usize, seed: u64) -> ExitCode {
    let (_, parsed) = match read_instance(&input) {
        Ok(x) => x,
        Err((code, msg)) => return fail(code, msg),
    };
    let report = match suite {
        SuiteArg::Supermodularity | SuiteArg::Dominance => {
            let (inst, target) = match as_aligned(&parsed) {
                Ok(x) => x,
                Err(msg) => return fail(EXIT_INVALID, msg),
            };
            if suite == SuiteArg::Supermodularity {
                run_supermodularity_suite(&inst, &target, trials, seed)
            } else {
                run_dominance_suite(&inst, &target, trials, seed)
            }
        }
        SuiteArg::Enhancement => {
            let (inst, _) = match as_general(&parsed) {
                Ok(x) => x,
                Err(msg) => return fail(EXIT_INVALID, msg),
            };
            run_enhancement_suite(&inst, &[1e-2, 1e-4, 1e-6], seed)
        }
    };
    match report {
        Ok(report) => {
            print_json(&report);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "suite {} found {} violation(s), worst slack {:.3e}",
                    report.suite, report.violations, report.worst_slack
                );
                ExitCode::from(EXIT_INVALID)
            }
        }
        Err(e) => fail(core_error_exit(&e), e),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("CEO_REGION_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n >= 1 {
                // Ignore "already initialized": only the first call wins.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Bound {
            input,
            kind,
            mu,
            units,
            opt,
            skip_upper_check,
            skip_validation,
            dump_normalized,
        } => cmd_bound(
            input,
            kind,
            mu,
            units,
            opt,
            skip_upper_check,
            skip_validation,
            dump_normalized,
        ),
        Command::Trace {
            input,
            kind,
            mu_sweep,
            out,
            units,
            opt,
        } => cmd_trace(input, kind, mu_sweep, out, units, opt),
        Command::Demo { which } => cmd_demo(which),
        Command::Verify {
            input,
            suite,
            trials,
            seed,
        } => cmd_verify(input, suite, trials, seed),
    }
}
