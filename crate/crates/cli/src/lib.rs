//! Batch front end: one experiment config in, a verification report and plot data out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;
pub mod table;

use std::path::{Path, PathBuf};

pub use config::{validate, ExperimentConfig, ExperimentKind, Overrides, Plan};
pub use error::CliError;
pub use run::{run_experiment, write_outputs, RunOutput};

/// Result of a completed invocation.
#[derive(Debug, Clone)]
pub struct Completed {
    pub pass: bool,
    pub out_dir: PathBuf,
    pub check: &'static str,
}

/// Load, validate, run and write. Computation happens on a pool of
/// `workers` threads when given.
pub fn execute(config: &Path, ov: &Overrides, workers: Option<usize>) -> Result<Completed, CliError> {
    let plan = validate(ExperimentConfig::load(config)?, ov)?;
    let out = match workers {
        Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| run_experiment(&plan))?,
        None => run_experiment(&plan)?,
    };
    write_outputs(&out, &plan.out_dir)?;
    Ok(Completed {
        pass: out.pass,
        out_dir: plan.out_dir.clone(),
        check: plan.config.experiment.check_id(),
    })
}

/// Process exit status: 0 when all checks pass, 1 when some fail, 2 on errors.
pub fn exit_code(r: &Result<Completed, CliError>) -> i32 {
    match r {
        Ok(c) if c.pass => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}
