//! Configuration-driven experiments: each kind runs a batch of replicated
//! checks and writes a JSON report plus flat CSV tables.

mod config;
mod output;
mod runs;

pub use config::{parse_config, parse_config_str, ExperimentConfig, ExperimentKind, SchemeName};
pub use output::{write_outputs, Check, ExperimentReport, Table};
pub use runs::{run_experiment, ExperimentRun};

/// Runs the experiment and writes its outputs to `config.output_dir`.
///
/// On failure a report carrying the error message is still written.
pub fn run_and_write(config: &ExperimentConfig) -> crate::Result<ExperimentRun> {
    let started = std::time::Instant::now();
    match run_experiment(config) {
        Ok(run) => {
            write_outputs(&config.output_dir, &run.report, &run.tables)?;
            Ok(run)
        }
        Err(e) => {
            let report = ExperimentReport::failed(config, &e, started.elapsed().as_secs_f64());
            write_outputs(&config.output_dir, &report, &[])?;
            Err(e)
        }
    }
}
