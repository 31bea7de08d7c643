use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use icl_core::runner::{load_config_with_seed, run_suite, Suite};

/// Run a verification suite and write its report.
///
/// Exit status: 0 if every check passes, 1 if any check fails, 2 if the
/// configuration is invalid or the suite cannot run.
#[derive(Parser, Debug)]
#[command(name = "verify", version)]
struct Cli {
    /// risk-equivalence | minima | gap | flow | bayes | moments | all
    suite: String,
    /// Key-value config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let suite: Suite = match cli.suite.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut cfg = match load_config_with_seed(&cli.config, cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    cfg.suite = suite;
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    match run_suite(&cfg) {
        Ok(report) => {
            for r in &report.records {
                println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.name);
            }
            println!("{}: {}", report.suite, if report.pass { "PASS" } else { "FAIL" });
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
