use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use htn_tutor::content::{builtin_domain, generate_problem, ProblemSpec};
use htn_tutor::domain::{parse_domain, validate_domain, Severity};
use htn_tutor::Domain;
use htn_tutor_cli::sim::{run_simulation, write_csv, write_summary, SimConfig};
use htn_tutor_cli::transcript::{parse_log, parse_text, replay_log, replay_text, worked_solution, Step};
use htn_tutor_service::{FileStore, ServiceConfig, Tutor};

#[derive(Parser)]
#[command(name = "htn-tutor", version, about = "HTN-based step tutor tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a domain file and list its diagnostics.
    Validate { file: PathBuf },
    /// Trace a problem: print its worked solution, or replay a transcript.
    Trace {
        /// Shipped domain name, or a domain file for one.
        domain: String,
        /// `1/2+1/4`, `log2(4)+log2(8)` or `seed=N`.
        problem: String,
        /// `field = value` lines, or a session event log (`.ndjson`).
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run a fading-policy simulation and write its CSV.
    Simulate {
        config: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Failures that are results (a bad domain, a diverging transcript) rather
/// than errors in running the command.
struct Failed;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Trace {
            domain,
            problem,
            transcript,
        } => trace(&domain, &problem, transcript.as_deref()),
        Command::Simulate { config, out } => simulate(&config, out.as_deref()),
        Command::Serve { config } => serve(config.as_deref()),
    };
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failed)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

type Outcome = anyhow::Result<Result<(), Failed>>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn validate(file: &Path) -> Outcome {
    let src = read(file)?;
    let domain = match parse_domain(&src) {
        Ok(d) => d,
        Err(e) => {
            println!("{}:{e}", file.display());
            return Ok(Err(Failed));
        }
    };
    let diagnostics = validate_domain(&domain);
    for d in &diagnostics {
        println!("{d}");
    }
    let errors = diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    println!(
        "{}: {} errors, {} warnings",
        domain.name,
        errors,
        diagnostics.len() - errors
    );
    Ok(if errors == 0 { Ok(()) } else { Err(Failed) })
}

fn load_domain(arg: &str) -> anyhow::Result<Domain> {
    let path = Path::new(arg);
    if path.is_file() {
        return parse_domain(&read(path)?).map_err(|e| anyhow::anyhow!("{}:{e}", path.display()));
    }
    builtin_domain(arg).with_context(|| format!("{arg} is neither a shipped domain nor a file"))
}

fn print_steps(steps: &[Step]) -> io::Result<()> {
    let mut out = io::stdout().lock();
    for (i, s) in steps.iter().enumerate() {
        writeln!(out, "{}. {s}", i + 1)?;
    }
    Ok(())
}

fn trace(domain: &str, problem: &str, transcript: Option<&Path>) -> Outcome {
    let domain = Arc::new(load_domain(domain)?);
    let spec = ProblemSpec::parse(domain.name.as_str(), problem)?;
    let problem = generate_problem(&spec)?;
    println!("{}", problem.statement);
    let steps = match transcript {
        None => worked_solution(domain, &problem),
        Some(path) => {
            let src = read(path)?;
            if path.extension().is_some_and(|e| e == "ndjson") {
                let events = parse_log(&src)?;
                match replay_log(domain, &events) {
                    Ok((logged, _)) if logged.params != problem.params => {
                        eprintln!("transcript is for {}, not {}", logged.params, problem.params);
                        return Ok(Err(Failed));
                    }
                    other => other.map(|(_, steps)| steps),
                }
            } else {
                replay_text(domain, &problem, &parse_text(&src)?)
            }
        }
    };
    match steps {
        Ok(steps) => {
            print_steps(&steps)?;
            let done = steps.last().is_some_and(|s| matches!(s.result, htn_tutor::TraceResult::Complete { .. }));
            println!("{}", if done { "complete" } else { "in progress" });
            Ok(Ok(()))
        }
        Err(e) => {
            eprintln!("{e}");
            Ok(Err(Failed))
        }
    }
}

fn simulate(config: &Path, out: Option<&Path>) -> Outcome {
    let config = SimConfig::from_toml(&read(config)?)?;
    let report = run_simulation(&config)?;
    match out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&report, io::BufWriter::new(file))?;
        }
        None => write_csv(&report, io::stdout().lock())?,
    }
    write_summary(&report, io::stderr().lock())?;
    Ok(Ok(()))
}

fn serve(config: Option<&Path>) -> Outcome {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let mut config = match config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    config.apply_env(std::env::vars())?;
    config.validate()?;
    let store = FileStore::open(&config.data_dir)?;
    let tutor = Tutor::open(config, Arc::new(store))?;
    let runtime = tokio::runtime::Runtime::new()?;
    if let Err(e) = runtime.block_on(htn_tutor_service::http::serve(Arc::new(tutor))) {
        bail!("server stopped: {e}");
    }
    Ok(Ok(()))
}
