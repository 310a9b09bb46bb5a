use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{ConvergenceRow, ExperimentReport, Mode};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::homogeneous::BoundReport;
use crate::trajectory::{FieldNorms, Trajectory};

pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const ERROR_FILE: &str = "error.json";

#[derive(Serialize)]
struct VelocityRange {
    xi_min: f64,
    xi_max: f64,
    n_cells: usize,
}

#[derive(Serialize)]
struct Series {
    time: Vec<f64>,
    defect_mass: Vec<f64>,
    cumulative_defect: Vec<f64>,
    min_defect: Vec<f64>,
    kinetic_l1: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
    linf: Vec<f64>,
    mass: Vec<f64>,
    tightness: Vec<f64>,
}

impl Series {
    fn of(tr: &Trajectory) -> Self {
        let col = |f: fn(&crate::trajectory::StepRecord) -> f64| tr.steps.iter().map(f).collect();
        Self {
            time: col(|s| s.time),
            defect_mass: col(|s| s.defect_mass),
            cumulative_defect: col(|s| s.cumulative_defect),
            min_defect: col(|s| s.min_defect),
            kinetic_l1: col(|s| s.kinetic_l1),
            l1: col(|s| s.norms.l1),
            l2: col(|s| s.norms.l2),
            linf: col(|s| s.norms.linf),
            mass: col(|s| s.norms.mass),
            tightness: col(|s| s.norms.tightness),
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'static str,
    #[serde(flatten)]
    mode: Mode,
    seed: Option<u64>,
    config: &'a ExperimentConfig,
    bound: Option<BoundReport>,
    velocity_grid: Option<VelocityRange>,
    initial: Option<FieldNorms>,
    defect_budget: Option<f64>,
    observed_m: Option<f64>,
    series: Option<Series>,
    snapshots: Vec<String>,
    convergence: Option<&'a [ConvergenceRow]>,
    slope: Option<f64>,
}

fn fmt(v: f64) -> String {
    // shortest representation that parses back to the same double
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dt", "delta_z", "l1_error", "bound", "slope_cum"])?;
    for r in rows {
        w.write_record([
            fmt(r.dt),
            fmt(r.delta_z),
            fmt(r.l1_error),
            fmt_opt(r.bound),
            fmt_opt(r.slope_cum),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `x[,y],u` rows at cell centers.
pub fn write_snapshot_csv(path: &Path, u: &ScalarField) -> Result<()> {
    let g = u.grid();
    let mut w = csv::Writer::from_path(path)?;
    if g.dim() == 1 {
        w.write_record(["x", "u"])?;
    } else {
        w.write_record(["x", "y", "u"])?;
    }
    for (j, &v) in u.values().iter().enumerate() {
        let c = g.center(j);
        if g.dim() == 1 {
            w.write_record([fmt(c[0]), fmt(v)])?;
        } else {
            w.write_record([fmt(c[0]), fmt(c[1]), fmt(v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn snapshot_file_name(step: usize) -> String {
    format!("snapshot_{step:06}.csv")
}

/// Writes the report into `dir`; returns the files written.
pub fn emit_outputs(
    report: &ExperimentReport,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot create output directory {}: {e}", dir.display()),
        ))
    })?;
    let mut written = Vec::new();
    let mut snapshot_names = Vec::new();
    if let Some(tr) = &report.trajectory {
        for s in &tr.snapshots {
            let name = snapshot_file_name(s.step);
            let path = dir.join(&name);
            write_snapshot_csv(&path, &s.u)?;
            snapshot_names.push(name);
            written.push(path);
        }
    }
    if let Some(rows) = &report.table {
        let path = dir.join(CONVERGENCE_FILE);
        write_convergence_csv(&path, rows)?;
        written.push(path);
    }
    let tr = report.trajectory.as_ref();
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        mode: report.mode,
        seed: report.seed,
        config: cfg,
        bound: report.bound,
        velocity_grid: tr.map(|t| VelocityRange {
            xi_min: t.vgrid.xi_min(),
            xi_max: t.vgrid.xi_max(),
            n_cells: t.vgrid.n_cells(),
        }),
        initial: tr.map(|t| t.initial),
        defect_budget: tr.map(|t| t.defect_budget),
        observed_m: tr.and_then(|t| t.observed_m),
        series: tr.map(Series::of),
        snapshots: snapshot_names,
        convergence: report.table.as_deref(),
        slope: report.slope,
    };
    let path = dir.join(METADATA_FILE);
    fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
    written.push(path);
    Ok(written)
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    kind: &'a str,
    message: String,
}

/// Machine-readable error record.
pub fn error_record(err: &Error) -> String {
    let rec = serde_json::json!({
        "error": ErrorRecord {
            kind: err.kind(),
            message: err.to_string(),
        }
    });
    rec.to_string()
}
