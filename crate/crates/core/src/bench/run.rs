//! Orchestrates one run: problem setup, time stepping, diagnostics, files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use crate::diagnostics::{error_norms, Diagnostics, LiftDrag, TimeSeriesRecord};
use crate::fespace::FieldCoeffs;
use crate::timestep::{Integrator, TimeScheme, TransientState};

use super::config::RunConfig;
use super::output::{manifest_text, vtk_snapshot, CsvWriter, LiftDragSummary};
use super::problems::build_problem;
use super::BenchError;

pub const CSV_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// One record per diagnostics row, in file order.
    pub records: Vec<TimeSeriesRecord>,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub snapshot_paths: Vec<PathBuf>,
    /// Lift/drag extrema over `[stats_start, t_end]` when computed.
    pub summary: Option<LiftDragSummary>,
    pub wall_clock_seconds: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), BenchError> {
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snapshot_{step:07}.vtk"))
}

/// Runs `config` and writes the diagnostics CSV, snapshots, manifest and,
/// for the cylinder, the lift/drag summary into `config.output_dir`.
///
/// Lift and drag use the BDF2 residual and are only computed for BDF2
/// runs on problems with a body.
pub fn run(config: &RunConfig) -> Result<RunOutcome, BenchError> {
    let started = Instant::now();
    config.validate()?;
    let problem = build_problem(&config.problem)?;
    let space = &problem.space;
    let integrator = Integrator::new(space, config.scheme)?;
    let lift_drag = match (problem.body, config.scheme.scheme) {
        (Some(marker), TimeScheme::Bdf2) => Some(LiftDrag::new(
            space,
            marker,
            config.scheme.form,
            config.scheme.dt,
            config.scheme.nu,
            config.scheme.gamma,
        )?),
        _ => None,
    };
    let diagnostics = Diagnostics::new(space);

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let csv_path = dir.join(CSV_FILE);
    let mut csv = CsvWriter::new(create(&csv_path)?, problem.exact.is_some(), lift_drag.is_some())
        .map_err(|e| BenchError::io(&csv_path, e))?;

    let steps = config.steps();
    info!(
        "{}: {} velocity dofs, {} pressure dofs, {steps} steps of dt = {}",
        config.problem.name(),
        space.velocity_dof_count(),
        space.pressure_dof_count(),
        config.scheme.dt
    );

    let mut state = TransientState::new(problem.u0.clone(), problem.p0.clone(), 0.0);
    let mut snapshot_paths = Vec::new();
    if config.snapshot_interval > 0 {
        let path = snapshot_path(dir, 0);
        write_file(&path, &vtk_snapshot(space, &state.u, &state.p, 0.0))?;
        snapshot_paths.push(path);
    }

    let mut records = Vec::with_capacity(steps / config.diagnostics_interval);
    for _ in 0..steps {
        // becomes u^{n-2} for the BDF2 lift/drag residual
        let before_prev: Option<FieldCoeffs> = lift_drag.as_ref().and(state.u_prev.clone());
        let report = integrator.step(&mut state)?;
        let n = state.step;
        // exact step time avoids drift from repeated addition
        let t = n as f64 * config.scheme.dt;
        if n.is_multiple_of(config.diagnostics_interval) {
            let mut rec = diagnostics.record(t, &state.u, report.newton_iters);
            rec.div_residual = report.div_residual;
            if let Some(exact) = &problem.exact {
                rec.errors = Some(error_norms(space, &state.u, &exact.at(t)));
            }
            if let Some(ld) = &lift_drag {
                let hist = [Some(&state.u), state.u_prev.as_ref(), before_prev.as_ref()];
                rec.lift_drag = Some(ld.evaluate(&hist, &state.p).unwrap_or((f64::NAN, f64::NAN)));
            }
            csv.write(&rec).map_err(|e| BenchError::io(&csv_path, e))?;
            records.push(rec);
        }
        if config.snapshot_interval > 0 && n.is_multiple_of(config.snapshot_interval) {
            let path = snapshot_path(dir, n);
            write_file(&path, &vtk_snapshot(space, &state.u, &state.p, t))?;
            snapshot_paths.push(path);
        }
        if steps >= 10 && n.is_multiple_of(steps / 10) {
            info!("step {n}/{steps} t = {t:.4} ({:.1} s elapsed)", started.elapsed().as_secs_f64());
        }
    }
    csv.into_inner().flush().map_err(|e| BenchError::io(&csv_path, e))?;

    let t_end = steps as f64 * config.scheme.dt;
    let summary = lift_drag
        .as_ref()
        .and_then(|_| LiftDragSummary::from_records(&records, config.stats_start, t_end));
    if let Some(s) = &summary {
        write_file(&dir.join(SUMMARY_FILE), &s.to_text())?;
    }
    let wall_clock_seconds = started.elapsed().as_secs_f64();
    let manifest_path = dir.join(MANIFEST_FILE);
    write_file(&manifest_path, &manifest_text(config, wall_clock_seconds))?;
    Ok(RunOutcome {
        records,
        csv_path,
        manifest_path,
        snapshot_paths,
        summary,
        wall_clock_seconds,
    })
}
