use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use skbm_cli::{execute, exit_code, Overrides};

/// Run one verification experiment for subordinate killed Brownian motion.
#[derive(Debug, Parser)]
#[command(name = "skbm", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Quadrature relative tolerance; overrides `quadrature.rel_tol`.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let a = Args::parse();
    let ov = Overrides {
        seed: a.seed,
        out: a.out,
        tol: a.tol,
    };
    let r = execute(&a.config, &ov, a.workers);
    match &r {
        Ok(c) => eprintln!(
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.check,
            c.out_dir.join("summary.json").display()
        ),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&r) as u8)
}
