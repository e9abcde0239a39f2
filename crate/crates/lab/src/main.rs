use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thickening_lab::experiments::REGISTRY;
use thickening_lab::record::{export_csv, read_jsonl, write_jsonl};
use thickening_lab::replay::replay;
use thickening_lab::{
    run_experiment, status_of, summary_table, with_threads, ExperimentConfig, LabRunError, EXIT_FAILED, EXIT_OK,
    THREADS_ENV,
};

#[derive(Parser)]
#[command(name = "lab", version, about = "Reproducible experiments on isotropic log-concave laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Record file; overrides `out_path`. Records go to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `root_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
        /// Stamp records with the run's wall time (breaks byte-identical reruns).
        #[arg(long)]
        timing: bool,
    },
    /// Recompute stored records and compare.
    Replay {
        records: PathBuf,
        /// Replay under a different seed; estimates must agree within 4 standard errors.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
    },
    /// Flatten a record file to CSV.
    Export { records: PathBuf, csv: PathBuf },
    /// List the registered experiments.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lab: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cmd: Command) -> Result<i32, LabRunError> {
    match cmd {
        Command::Run {
            config,
            out,
            seed,
            threads,
            timing,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| LabRunError::Config(format!("{}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if let Some(s) = seed {
                cfg.root_seed = s;
            }
            let start = Instant::now();
            let mut records = with_threads(threads, || run_experiment(&cfg))??;
            if timing {
                let ms = start.elapsed().as_millis() as u64;
                records.iter_mut().for_each(|r| r.wall_time_ms = Some(ms));
            }
            match out.or(cfg.out_path.clone()) {
                Some(path) => {
                    write_jsonl(&records, BufWriter::new(File::create(&path)?))?;
                    print!("{}", summary_table(&records));
                }
                None => {
                    write_jsonl(&records, std::io::stdout().lock())?;
                    eprint!("{}", summary_table(&records));
                }
            }
            Ok(status_of(&records))
        }
        Command::Replay { records, seed, threads } => {
            let stored = read_jsonl(BufReader::new(File::open(&records)?))?;
            let report = with_threads(threads, || replay(&stored, seed))??;
            let mut stdout = std::io::stdout().lock();
            for c in &report.checks {
                let tol = c.tolerance.map_or("flags".to_string(), |t| format!("{t:.3e}"));
                writeln!(
                    stdout,
                    "{:<20} #{:<4} {:<28} stored={:<24} recomputed={:<24} tol={:<10} {}",
                    c.experiment,
                    c.index,
                    c.metric,
                    c.stored,
                    c.recomputed,
                    tol,
                    if c.ok { "ok" } else { "MISMATCH" }
                )?;
            }
            Ok(if report.all_ok() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Export { records, csv } => {
            let stored = read_jsonl(BufReader::new(File::open(&records)?))?;
            export_csv(&stored, BufWriter::new(File::create(&csv)?))?;
            Ok(EXIT_OK)
        }
        Command::List => {
            for e in &REGISTRY {
                println!("{:<20} {}", e.name, e.statement);
            }
            Ok(EXIT_OK)
        }
    }
}
