use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use freqlab::cli::{config_base, parse_radii, run_asymptotics, run_pohozaev, run_quotients, run_spectrum, run_verify, Run};
use freqlab::config::ExperimentConfig;
use freqlab::Error;

/// Frequency asymptotics experiments for singular magnetic Schrödinger operators.
///
/// Exit codes: 0 success, 1 verification failure or other error,
/// 2 positivity violation, 3 nonconvergence, 4 no limit detected.
#[derive(Parser, Debug)]
#[command(name = "freqlab", version)]
struct Cli {
    /// TOML experiment configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `threads`; 0 = automatic).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed (overrides `seed`, default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated radii (overrides `radii.explicit`).
    #[arg(long, global = true)]
    radii: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Angular spectrum, indicial roots and positivity margin.
    Spectrum,
    /// Solve, frequency profile, vanishing order, leading term and reports.
    Asymptotics,
    /// η envelopes and hypothesis verdicts.
    Quotients,
    /// Pohozaev residual at the configured radii.
    Pohozaev,
    /// Acceptance suite.
    Verify,
}

fn load(cli: &Cli) -> Result<Run, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output = out.to_string_lossy().into_owned();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = &cli.radii {
        cfg.radii.explicit = parse_radii(r)?;
    }
    Run::new(cfg, config_base(cli.config.as_deref()))
}

fn init_pool(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("freqlab: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let run = match load(&cli) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    init_pool(run.config.threads);
    let outcome = match cli.command {
        Command::Spectrum => run_spectrum(&run),
        Command::Asymptotics => run_asymptotics(&run),
        Command::Quotients => run_quotients(&run),
        Command::Pohozaev => run_pohozaev(&run),
        Command::Verify => match run_verify(&run) {
            Ok(report) => {
                print!("{}", report.summary());
                for (id, label, s) in freqlab::verify::timings(&report) {
                    log::info!("criterion {id}: {label} took {s:.2} s");
                }
                if report.passed {
                    return ExitCode::SUCCESS;
                }
                for c in report.failed() {
                    let checks: Vec<&str> = c.failing_checks().iter().map(|k| k.label.as_str()).collect();
                    eprintln!("freqlab: criterion {} ({}) failed: {}", c.id, c.name, checks.join("; "));
                }
                return ExitCode::from(1);
            }
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
