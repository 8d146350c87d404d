//! CSV products of a run.
//!
//! All floats are written in scientific notation with 17 significant
//! digits, which parses back to the identical double.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use baroflow_core::diagnostics::section_profile;
use baroflow_core::{DiagnosticsRecord, Error, FeSpace, Result, RunSink, State, StepOutcome, StepReport};

pub const DIAGNOSTICS_HEADER: &str =
    "t,mass,momentum_x,momentum_y,energy,rho_center,rho_max,rho_min,rho_min_quad,symmetry_err";
pub const NEWTON_HEADER: &str = "step,iteration,relative_error,residual_norm";
pub const DECOUPLE_HEADER: &str = "step,k,change_norm";
pub const SECTION_HEADER: &str = "x1,rho";
pub const SNAPSHOT_HEADER: &str = "x1,x2,rho,u1,u2";

/// Full-precision float formatting used by every output file.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// File-name tag for time `t`, e.g. `1.0000`.
pub fn time_tag(t: f64) -> String {
    format!("{:.4}", t + 0.0)
}

pub fn section_file_name(t: f64) -> String {
    format!("section_t{}.csv", time_tag(t))
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{}.csv", time_tag(t))
}

/// Streams run products into `dir`, remembering every file it creates so
/// that a failed run can be cleaned up.
pub struct OutputWriter<'a> {
    space: &'a FeSpace,
    dir: PathBuf,
    section_y: f64,
    created: Vec<PathBuf>,
    diagnostics: BufWriter<File>,
    newton: Option<BufWriter<File>>,
    decouple: Option<BufWriter<File>>,
}

impl<'a> OutputWriter<'a> {
    /// `iteration_log` selects `newton.csv`, `decouple.csv` or neither.
    pub fn create(space: &'a FeSpace, dir: &Path, section_y: f64, iteration_log: Option<IterationLog>) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut created = Vec::new();
        let mut open = |name: &str, header: &str| -> Result<BufWriter<File>> {
            let path = dir.join(name);
            let file = File::create(&path)?;
            created.push(path);
            let mut w = BufWriter::new(file);
            writeln!(w, "{header}")?;
            Ok(w)
        };
        let opened = (|| {
            let diagnostics = open("diagnostics.csv", DIAGNOSTICS_HEADER)?;
            let newton = match iteration_log {
                Some(IterationLog::Newton) => Some(open("newton.csv", NEWTON_HEADER)?),
                _ => None,
            };
            let decouple = match iteration_log {
                Some(IterationLog::Decoupled) => Some(open("decouple.csv", DECOUPLE_HEADER)?),
                _ => None,
            };
            Ok((diagnostics, newton, decouple))
        })();
        match opened {
            Ok((diagnostics, newton, decouple)) => Ok(OutputWriter {
                space,
                dir: dir.to_path_buf(),
                section_y,
                created,
                diagnostics,
                newton,
                decouple,
            }),
            Err(e) => {
                remove_all(&created);
                Err(e)
            }
        }
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.created
    }

    /// Flush everything; returns the paths written.
    pub fn finish(mut self) -> Result<Vec<PathBuf>> {
        let flushed = self.flush_all();
        if let Err(e) = flushed {
            self.discard();
            return Err(e);
        }
        Ok(std::mem::take(&mut self.created))
    }

    /// Delete every file created so far.
    pub fn discard(mut self) {
        remove_all(&std::mem::take(&mut self.created));
    }

    fn flush_all(&mut self) -> Result<()> {
        self.diagnostics.flush()?;
        if let Some(w) = &mut self.newton {
            w.flush()?;
        }
        if let Some(w) = &mut self.decouple {
            w.flush()?;
        }
        Ok(())
    }

    fn write_file(&mut self, name: String, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
        let path = self.dir.join(name);
        if !self.created.contains(&path) {
            self.created.push(path.clone());
        }
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationLog {
    Newton,
    Decoupled,
}

fn remove_all(paths: &[PathBuf]) {
    for p in paths {
        if let Err(e) = std::fs::remove_file(p) {
            log::warn!("could not remove {}: {e}", p.display());
        }
    }
}

pub fn diagnostics_row(r: &DiagnosticsRecord) -> String {
    [
        r.t,
        r.mass,
        r.momentum[0],
        r.momentum[1],
        r.energy,
        r.rho_center,
        r.rho_max,
        r.rho_min,
        r.rho_min_quad,
        r.symmetry_err,
    ]
    .map(fmt_f64)
    .join(",")
}

impl RunSink for OutputWriter<'_> {
    fn on_record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.diagnostics, "{}", diagnostics_row(record))?;
        Ok(())
    }

    fn on_step(&mut self, report: &StepReport<'_>) -> Result<()> {
        match report.outcome {
            StepOutcome::Newton(history) => {
                if let Some(w) = &mut self.newton {
                    for (k, it) in history.iterations.iter().enumerate() {
                        writeln!(
                            w,
                            "{},{},{},{}",
                            report.step,
                            k + 1,
                            fmt_f64(it.relative_error),
                            fmt_f64(it.residual_norm)
                        )?;
                    }
                }
            }
            StepOutcome::Decoupled(changes) => {
                if let Some(w) = &mut self.decouple {
                    for (k, c) in changes.iter().enumerate() {
                        writeln!(w, "{},{},{}", report.step, k + 1, fmt_f64(*c))?;
                    }
                }
            }
        }
        Ok(())
    }

    fn on_snapshot(&mut self, state: &State) -> Result<()> {
        let profile = section_profile(self.space, &state.rho, self.section_y, None)?;
        self.write_file(
            section_file_name(state.t),
            SECTION_HEADER,
            profile.into_iter().map(|(x, r)| format!("{},{}", fmt_f64(x), fmt_f64(r))),
        )?;
        let nodes = self.space.mesh().nodes();
        if nodes.len() != state.rho.len() {
            return Err(Error::LengthMismatch {
                what: "snapshot",
                got: state.rho.len(),
                expected: nodes.len(),
            });
        }
        let rows = nodes.iter().enumerate().map(|(i, p)| {
            [p[0], p[1], state.rho[i], state.u[0][i], state.u[1][i]]
                .map(fmt_f64)
                .join(",")
        });
        self.write_file(snapshot_file_name(state.t), SNAPSHOT_HEADER, rows)
    }
}
