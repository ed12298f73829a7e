use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nonlocal_core::profile::SelfSimilarProfile;
use nonlocal_lab::{run_config, run_suite, LabError, RunOptions};

#[derive(Parser)]
#[command(name = "nonlocal-lab", version, about = "Experiments for nonlocal diffusion with absorption")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base output directory (each experiment writes to OUT/<name>).
    #[arg(long, global = true, env = "NONLOCAL_LAB_OUT")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Count failed numerical audits as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run every config listed in a suite file.
    Suite { suite: PathBuf },
    /// Print the self-similar profile f(eta) as CSV.
    Profile {
        #[arg(long)]
        alpha: f64,
        #[arg(long = "A")]
        amplitude: f64,
        #[arg(long)]
        diffusivity: f64,
        #[arg(long)]
        eta_max: f64,
        #[arg(long, default_value_t = 1)]
        dimension: usize,
        #[arg(long, default_value_t = 501)]
        points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let options = RunOptions {
        out: cli.out.clone(),
        strict: cli.strict,
    };
    match execute(cli.command, &options) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command, options: &RunOptions) -> Result<bool, LabError> {
    match command {
        Command::Run { config } => {
            let (report, dir) = run_config(&config, options)?;
            for c in &report.checks {
                println!(
                    "{} {:<20} measured {:>12.4e}  threshold {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.threshold.describe()
                );
            }
            for a in &report.provenance.audits {
                let status = if a.passed { "ok" } else if options.strict { "FAIL" } else { "WARN" };
                println!("audit {:<9} change {:.3e} (limit {:.0e}) {status}", a.name, a.measured, a.limit);
            }
            println!("report: {}", dir.join("report.json").display());
            Ok(report.passed)
        }
        Command::Suite { suite } => {
            let (report, path) = run_suite(&suite, options)?;
            print!("{}", report.summary_table());
            println!("{}: {} -> {}", report.name, if report.passed { "PASS" } else { "FAIL" }, path.display());
            Ok(report.passed)
        }
        Command::Profile {
            alpha,
            amplitude,
            diffusivity,
            eta_max,
            dimension,
            points,
        } => {
            let profile = SelfSimilarProfile::new(alpha, amplitude, diffusivity, dimension, eta_max, points)?;
            match &options.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let path = dir.join("profile.csv");
                    let mut file = tempfile::NamedTempFile::new_in(dir)?;
                    profile.write_csv(&mut file)?;
                    file.persist(&path).map_err(|e| LabError::Io(e.error))?;
                    println!("profile: {}", path.display());
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    profile.write_csv(&mut lock)?;
                    lock.flush()?;
                }
            }
            Ok(true)
        }
    }
}
