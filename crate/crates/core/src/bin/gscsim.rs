use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gscsim::experiment::{run, sweep_scv, OutputFormat, RunOptions, RunOutput};
use gscsim::verify::{verify, VerifyOptions};
use gscsim::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    version,
    about = "Outage probability of GSC/MRC receivers under Rician fading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed; overrides the spec file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Leave wall times out so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method at every point of a spec file.
    Estimate { spec: PathBuf },
    /// Run a spec with a sweep axis and write SCV plot data.
    Sweep { spec: PathBuf },
    /// Check the estimators against exact answers.
    Verify {
        /// Rejection-bound constant used by the PIS checks.
        #[arg(long)]
        pdf_bound_constant: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Spec(_) | Error::InvalidConfig(_) | Error::Io(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn report(out: RunOutput) -> ExitCode {
    for f in &out.files {
        eprintln!("wrote {}", f.display());
    }
    for row in &out.rows {
        if let Some(e) = &row.error {
            eprintln!("{} failed: {e}", row.method);
        }
    }
    if out.failed_rows() == out.rows.len() {
        ExitCode::from(EXIT_RUNTIME)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let format = match cli.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let options = RunOptions {
        seed: cli.seed,
        workers: cli.workers,
        out_dir: cli.out_dir,
        format,
        timing: !cli.no_timing,
    };
    let outcome = match cli.command {
        Command::Estimate { spec } => run(&spec, &options).map(report),
        Command::Sweep { spec } => sweep_scv(&spec, &options).map(report),
        Command::Verify { pdf_bound_constant } => {
            let mut opts = VerifyOptions {
                workers: cli.workers,
                ..VerifyOptions::default()
            };
            if let Some(seed) = cli.seed {
                opts.seed = seed;
            }
            if let Some(c) = pdf_bound_constant {
                opts.pdf_bound_constant = c;
            }
            verify(&opts).and_then(|r| {
                match format {
                    OutputFormat::Csv => r.write_table(io::stdout())?,
                    OutputFormat::Json => {
                        serde_json::to_writer_pretty(io::stdout(), &r)
                            .map_err(|e| Error::Io(e.to_string()))?;
                        println!();
                    }
                }
                Ok(if r.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_VERIFY)
                })
            })
        }
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit_code(&e))
    })
}
