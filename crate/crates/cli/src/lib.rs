//! Configuration and output handling behind the `baroflow` binary.

pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Context;
use baroflow_core::{run, FeSpace, RunSchedule, SchemeKind, State};

pub use config::{ConfigError, RunConfig};
use output::{IterationLog, OutputWriter};

/// What a completed run leaves behind.
#[derive(Debug)]
pub struct RunSummary {
    pub final_state: State,
    pub files: Vec<PathBuf>,
    pub steps: usize,
}

/// Execute a validated configuration and write its outputs.
///
/// On failure every file created by the run is removed again.
pub fn execute(config: &RunConfig) -> anyhow::Result<RunSummary> {
    let mesh = config.mesh().context("building mesh")?;
    let eos = config.eos().context("equation of state")?;
    let pulse = config.pulse().context("initial data")?;
    let scheme = config.scheme();
    let space = FeSpace::new(mesh);
    let initial = pulse.initial_state(&space).context("projecting initial data")?;
    let schedule = RunSchedule {
        diag_every: config.diag_every,
        snapshot_times: config.snapshot_times.clone(),
    };
    let log = match config.kind {
        SchemeKind::FullyImplicit => IterationLog::Newton,
        SchemeKind::Linearized | SchemeKind::Decoupled => IterationLog::Decoupled,
    };
    let mut writer = OutputWriter::create(&space, &config.output_dir, config.section_y, Some(log))
        .with_context(|| format!("creating outputs in {}", config.output_dir.display()))?;
    match run(&space, &eos, &scheme, &schedule, initial, &mut writer) {
        Ok(final_state) => {
            let files = writer.finish().context("flushing outputs")?;
            Ok(RunSummary {
                final_state,
                files,
                steps: scheme.num_steps(),
            })
        }
        Err(e) => {
            writer.discard();
            Err(anyhow::Error::new(e).context("run failed; partial outputs removed"))
        }
    }
}

/// The summary printed by `baroflow check`.
pub fn check_report(config: &RunConfig) -> String {
    let n = config.num_nodes();
    format!(
        "N={} steps, {} nodes, {} unknowns\nscheme {}{}, tau {}, T {}, M {}",
        config.scheme().num_steps(),
        n,
        3 * n,
        config.kind,
        config.iterations.map_or(String::new(), |k| format!(" (K = {k})")),
        config.tau,
        config.t_end,
        config.segments
    )
}
