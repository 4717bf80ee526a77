//! Command-line front end: load the knowledge base and input facts, run
//! the solver, and print models. Exit status 0 when at least one model
//! is found, 1 when the theory plus query are unsatisfiable, 2 on
//! errors or an incomplete (floundered) search.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tijd::kb::{self, SentenceDescription};
use tijd::parse::parse_formula;
use tijd::render::{render_json, render_text};
use tijd::solver::{enumerate, SolveOptions};
use tijd::store::LabelingPolicy;
use tijd::temporal::{hour_index, valid_date};

#[derive(Parser)]
#[command(name = "tijd", version, about = "Temporal relation extraction by abduction")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find models of the knowledge base plus input facts and query
    Solve(SolveArgs),
    /// Turn a JSON sentence description into an input facts file
    Encode(EncodeArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Theory files, merged in order; the built-in knowledge base when
    /// none are given
    #[arg(long = "kb", value_name = "PATH")]
    kb: Vec<PathBuf>,
    /// Input facts file in theory-language syntax
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Query formula, e.g. 'utt(U) & hour(U)'
    #[arg(long, value_name = "FORMULA")]
    query: Option<String>,
    /// Enumerate models instead of stopping at the first
    #[arg(long)]
    all_models: bool,
    /// Cap on the number of models enumerated with --all-models
    #[arg(long, value_name = "N", default_value_t = 16)]
    max_models: usize,
    /// Day the labeler anchors unconstrained times to
    #[arg(long, value_name = "YYYY-MM-DD")]
    epoch: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Search effort cap
    #[arg(long, value_name = "N", default_value_t = 10_000_000)]
    node_limit: u64,
}

#[derive(Args)]
struct EncodeArgs {
    /// JSON sentence description
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Facts file to write; standard output when omitted
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Command::Solve(args) => match run_solve(&args) {
            Ok(code) => code,
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
        },
        Command::Encode(args) => match run_encode(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
        },
    }
}

fn parse_epoch(s: &str) -> Result<i64, String> {
    let parts: Vec<&str> = s.split('-').collect();
    let nums: Vec<i64> = parts
        .iter()
        .map(|p| p.parse().map_err(|_| format!("bad epoch date {s}")))
        .collect::<Result<_, _>>()?;
    match nums.as_slice() {
        [y, m, d] if valid_date(*y, *m, *d, 0) => Ok(hour_index(*y, *m, *d, 0)),
        _ => Err(format!("bad epoch date {s}, expected YYYY-MM-DD")),
    }
}

fn run_solve(args: &SolveArgs) -> Result<ExitCode, String> {
    let mut sources: Vec<(String, String)> = Vec::new();
    if args.kb.is_empty() {
        for (name, src) in kb::DEFAULT_KB {
            sources.push((name.to_string(), src.to_string()));
        }
    } else {
        for p in &args.kb {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            sources.push((p.display().to_string(), text));
        }
    }
    if let Some(p) = &args.input {
        let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        sources.push((p.display().to_string(), text));
    }
    let theory = kb::load_sources(sources.iter().map(|(n, s)| (n.as_str(), s.as_str())))
        .map_err(|e| e.to_string())?;

    let query = args
        .query
        .as_ref()
        .map(|q| parse_formula(q).map_err(|e| format!("query: {}", e.message)))
        .transpose()?;

    let mut labeling = LabelingPolicy::default();
    if let Some(e) = &args.epoch {
        labeling.epoch_index = parse_epoch(e)?;
    }
    let opts = SolveOptions {
        node_limit: args.node_limit,
        labeling,
        max_models: if args.all_models { args.max_models } else { 1 },
    };

    let e = enumerate(&theory, query.as_ref(), &opts).map_err(|err| err.to_string())?;
    if let Some(goal) = &e.floundered {
        eprintln!("warning: search left an undecided goal: {goal}");
    }

    match args.format {
        Format::Text => {
            if e.models.is_empty() {
                println!("no");
            }
            for (i, m) in e.models.iter().enumerate() {
                if i > 0 {
                    println!();
                }
                print!("{}", render_text(m));
            }
        }
        Format::Json => {
            let rendered: Vec<_> = e.models.iter().map(render_json).collect();
            println!("{}", serde_json::to_string_pretty(&rendered).unwrap());
        }
    }

    Ok(if !e.models.is_empty() {
        ExitCode::SUCCESS
    } else if e.floundered.is_some() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    })
}

fn run_encode(args: &EncodeArgs) -> Result<(), String> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| format!("{}: {e}", args.input.display()))?;
    let desc: SentenceDescription =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", args.input.display()))?;
    let facts = kb::encode_sentence(&desc).map_err(|e| e.to_string())?;
    let out = kb::facts_to_source(&facts);
    match &args.output {
        Some(p) => fs::write(p, out).map_err(|e| format!("{}: {e}", p.display()))?,
        None => print!("{out}"),
    }
    Ok(())
}
