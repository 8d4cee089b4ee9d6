use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mkvlevy::config::{parse_config, Kind};
use mkvlevy_core::harnack::TestFunction;
use mkvlevy_core::mkv::DriftSpec;
use mkvlevy_core::subordinator::BernsteinSpec;

/// Simulation and verification experiments for McKean-Vlasov SDEs with
/// Lévy noise.
///
/// Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 invalid config.
#[derive(Parser)]
#[command(name = "mkvlevy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// output directory for results.json and CSV artifacts
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// replaces the seed in the config
        #[arg(long)]
        seed: Option<u64>,
        /// worker threads (results do not depend on this)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and check a config without running it
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List experiment kinds, drifts, subordinators and test functions
    List,
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(3)
    })
}

fn list() {
    println!("kinds:");
    for k in Kind::ALL {
        println!("  {:<16} {}", k.name(), k.describe());
    }
    println!("drifts:");
    for (n, d) in DriftSpec::catalog() {
        println!("  {n:<16} {d}");
    }
    println!("subordinators:");
    for (n, d) in BernsteinSpec::catalog() {
        println!("  {n:<16} {d}");
    }
    println!("test functions:");
    for (n, d) in TestFunction::catalog() {
        println!("  {n:<16} {d}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::List => {
            list();
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(c) => return c,
            };
            match parse_config(&text) {
                Ok(cfg) => {
                    println!("{}: valid {} config (digest {})", config.display(), cfg.kind.name(), cfg.digest);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    ExitCode::from(3)
                }
            }
        }
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: thread pool: {e}");
                    return ExitCode::from(3);
                }
            }
            let text = match read(&config) {
                Ok(t) => t,
                Err(c) => return c,
            };
            match mkvlevy::run_file(&text, seed, &out) {
                Ok(r) => {
                    for c in &r.checks {
                        println!(
                            "{:<13} {} (value {}, threshold {})",
                            format!("[{:?}]", c.verdict).to_uppercase(),
                            c.name,
                            c.value,
                            c.threshold
                        );
                    }
                    if let Some(e) = &r.error {
                        eprintln!("error: {e}");
                    }
                    println!("{}: {:?}", r.kind, r.verdict);
                    ExitCode::from(r.verdict.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    ExitCode::from(3)
                }
            }
        }
    }
}
