//! `freelp`: norm computations, verification suites, and random instance
//! generation for homogeneous free-group polynomials.
//!
//! Exit codes: 0 success, 1 other errors, 2 input/schema errors, 3 budget or
//! cap exceeded, 4 unconverged result under --strict (also: any failing
//! verification case).

use clap::{Args, Parser, Subcommand, ValueEnum};
use freelp_core::error::Error;
use freelp_core::freelp::{
    khintchine_report, opnorm_lower_trunc, FreeOperator, ReportOptions, TruncOptions,
    DEFAULT_NODE_BUDGET,
};
use freelp_core::schatten::{intersection_norm, partition_spectrum, schatten_norm, sum_norm};
use freelp_core::suites::run_suite;
use freelp_core::tensors::{
    load_tensor, random_gaussian_tensor, reshape, save_tensor, Alphabet, PartitionSplit,
    DEFAULT_DENSE_CAP,
};
use freelp_core::Exponent;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "freelp", version, about = "Khintchine-type norms for free-group polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a norm or report for a tensor file.
    Compute(ComputeArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Generate a random tensor file.
    Random(RandomArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormKind {
    /// Max over consecutive-split matricization norms.
    Intersection,
    /// Infimum over decompositions of the summed split norms.
    Sum,
    /// All 2^d partition matricization norms (or one, with --alpha).
    Spectrum,
    /// Free L_p norm of the word operator, with split comparison.
    Lp,
    /// Operator-norm lower bound by ball compression.
    OpnormLower,
}

#[derive(Args)]
struct ComputeArgs {
    /// Input tensor file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, value_enum)]
    norm: NormKind,
    /// Exponent: a number >= 1 or "inf".
    #[arg(long, default_value = "2")]
    p: String,
    /// Explicit split for --norm spectrum: comma-separated 1-based row
    /// positions, or "none" for the empty row set.
    #[arg(long)]
    alpha: Option<String>,
    /// Ball radius for the p = infinity lower bound.
    #[arg(long, default_value_t = 6)]
    depth: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: u64,
    /// Seed for the power-iteration start vector.
    #[arg(long, default_value_t = 0x4b50_4e49)]
    seed: u64,
    /// Dense matricization size cap (rows * columns).
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    /// Ball element cap for the compression.
    #[arg(long, default_value_t = 400_000_000)]
    ball_cap: usize,
    /// Treat unconverged results as errors (exit 4).
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name: counterexample, lower-estimate, degree1, fell, converse,
    /// transposition, signed, oracle, or all.
    suite: String,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// "generators" or "signed".
    #[arg(long, default_value = "generators")]
    alphabet: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inclusion probability per index.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    /// Output tensor file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("FREELP_THREADS") {
        let threads: usize = threads.parse().unwrap_or(0);
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    let outcome = match cli.command {
        Command::Compute(args) => cmd_compute(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Random(args) => cmd_random(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } | Error::BallTooLarge { .. } | Error::TooLarge { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn parse_exponent(s: &str) -> Result<Exponent, Error> {
    s.parse::<Exponent>()
}

fn cmd_compute(args: &ComputeArgs) -> Result<ExitCode, Error> {
    let t = load_tensor(&args.input)?;
    let p = parse_exponent(&args.p)?;
    let mut unconverged = false;
    let value = match args.norm {
        NormKind::Intersection => {
            serde_json::to_value(intersection_norm(&t, p, args.dense_cap)?)?
        }
        NormKind::Sum => {
            let report = sum_norm(&t, p, args.tol, args.max_iter, args.dense_cap)?;
            if let Some(cert) = &report.sum {
                unconverged = !cert.converged;
            }
            serde_json::to_value(report)?
        }
        NormKind::Spectrum => match &args.alpha {
            Some(alpha) => {
                let split = parse_alpha(alpha, t.d())?;
                let norm = schatten_norm(&reshape(&t, &split, args.dense_cap)?, p)?;
                serde_json::json!({
                    "p": p,
                    "alpha": split.alpha(),
                    "T": split.transposition_number(),
                    "transposed": split.is_transposed(),
                    "value": norm,
                })
            }
            None => serde_json::to_value(partition_spectrum(&t, p, args.dense_cap)?)?,
        },
        NormKind::Lp => {
            let options = ReportOptions {
                node_budget: args.node_budget,
                dense_cap: args.dense_cap,
                trunc: TruncOptions {
                    radius: args.depth,
                    tol: args.tol,
                    max_iter: args.max_iter,
                    ball_cap: args.ball_cap,
                    seed: args.seed,
                },
            };
            serde_json::to_value(khintchine_report(&t, p, &options)?)?
        }
        NormKind::OpnormLower => {
            let op = match t.alphabet() {
                Alphabet::Generators => FreeOperator::plain(t.clone()),
                Alphabet::Signed => FreeOperator::signed(t.clone()),
            };
            let result = opnorm_lower_trunc(
                &op,
                &TruncOptions {
                    radius: args.depth,
                    tol: args.tol,
                    max_iter: args.max_iter,
                    ball_cap: args.ball_cap,
                    seed: args.seed,
                },
            )?;
            unconverged = !result.converged;
            serde_json::json!({
                "value": result.value,
                "radius": result.radius,
                "ball": result.ball,
                "iterations": result.iterations,
                "converged": result.converged,
            })
        }
    };
    emit(&value, args.format, args.output.as_deref())?;
    if args.strict && unconverged {
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_alpha(s: &str, d: usize) -> Result<PartitionSplit, Error> {
    if s == "none" {
        return PartitionSplit::new(d, Vec::new());
    }
    let mut alpha = Vec::new();
    for part in s.split(',') {
        let k: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("bad --alpha element '{part}'")))?;
        alpha.push(k);
    }
    alpha.sort_unstable();
    PartitionSplit::new(d, alpha)
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode, Error> {
    let result = run_suite(&args.suite, args.seed)?;
    let value = serde_json::to_value(&result)?;
    emit(&value, args.format, args.output.as_deref())?;
    if result.overall {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(4))
    }
}

fn cmd_random(args: &RandomArgs) -> Result<ExitCode, Error> {
    let alphabet = match args.alphabet.as_str() {
        "generators" => Alphabet::Generators,
        "signed" => Alphabet::Signed,
        other => return Err(Error::Schema(format!("unknown alphabet '{other}'"))),
    };
    if !(args.density > 0.0 && args.density <= 1.0) {
        return Err(Error::Schema("density must be in (0, 1]".to_string()));
    }
    let cells = (alphabet.size(args.n) as u128)
        .checked_pow(args.d as u32)
        .filter(|&c| c <= 1_000_000);
    if cells.is_none() {
        return Err(Error::TooLarge {
            rows: alphabet.size(args.n),
            cols: args.d,
            cap: 1_000_000,
        });
    }
    let t = random_gaussian_tensor(args.n, args.d, args.m, alphabet, args.density, args.seed);
    match &args.output {
        Some(path) => save_tensor(&t, path)?,
        None => {
            let json = freelp_core::tensors::to_json(&t);
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// CSV emission is a flat projection of the JSON report: one row per element
/// of each array field, one row per scalar field.
fn to_csv(value: &serde_json::Value) -> String {
    fn scalar(v: &serde_json::Value) -> String {
        match v {
            serde_json::Value::String(s) => s.replace(',', ";"),
            other => other.to_string().replace(',', ";"),
        }
    }
    let mut out = String::from("field,index,key,value\n");
    let obj = match value.as_object() {
        Some(o) => o,
        None => {
            out.push_str(&format!("value,,,{}\n", scalar(value)));
            return out;
        }
    };
    for (field, v) in obj {
        match v {
            serde_json::Value::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    match item.as_object() {
                        Some(o) => {
                            for (key, cell) in o {
                                out.push_str(&format!("{field},{i},{key},{}\n", scalar(cell)));
                            }
                        }
                        None => out.push_str(&format!("{field},{i},,{}\n", scalar(item))),
                    }
                }
            }
            serde_json::Value::Object(o) => {
                for (key, cell) in o {
                    out.push_str(&format!("{field},,{key},{}\n", scalar(cell)));
                }
            }
            other => out.push_str(&format!("{field},,,{}\n", scalar(other))),
        }
    }
    out
}

fn emit(
    value: &serde_json::Value,
    format: Format,
    output: Option<&std::path::Path>,
) -> Result<(), Error> {
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value)?;
            s.push('\n');
            s
        }
        Format::Csv => to_csv(value),
    };
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
