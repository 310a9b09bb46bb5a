use serde::Serialize;

use super::config::{BuiltFlux, ExperimentConfig, FluxConfig};
use crate::error::{Error, Result};
use crate::flux::{speed_bounds, HomogeneousFlux};
use crate::grid::{ScalarField, SpatialGrid, VelocityGrid};
use crate::homogeneous::{bound_report, run_homogeneous, BoundReport, BOUND_SAMPLES};
use crate::inhomogeneous::run_inhomogeneous;
use crate::initial::InitialData;
use crate::kinetic::l1_distance;
use crate::oracles::{
    bgk_run, log_log_slope, self_convergence_study, time_change_reference, PeriodicRiemann,
    StudyParams,
};
use crate::path::{delta_z, generate, DriverPath, PathSpec, TimePartition};
use crate::trajectory::Trajectory;

/// Oracles available to `compare`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Oracle {
    Riemann,
    Godunov,
    Bgk,
    TimeChange,
}

impl std::str::FromStr for Oracle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemann" => Ok(Oracle::Riemann),
            "godunov" => Ok(Oracle::Godunov),
            "bgk" => Ok(Oracle::Bgk),
            "timechange" => Ok(Oracle::TimeChange),
            other => Err(Error::param("oracle", format!("unknown oracle {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "oracle")]
pub enum Mode {
    Run,
    Converge,
    Compare(Oracle),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub delta_z: f64,
    pub l1_error: f64,
    /// Stated envelope at this row's `delta_z`, where defined.
    pub bound: Option<f64>,
    pub slope_cum: Option<f64>,
}

/// Everything an experiment produced, ready for serialization.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub trajectory: Option<Trajectory>,
    pub table: Option<Vec<ConvergenceRow>>,
    pub slope: Option<f64>,
    /// Envelope at `delta_z = 1`, for 1-D homogeneous problems.
    pub bound: Option<BoundReport>,
}

/// Samples needed so that every partition point is a path sample.
fn build_path(cfg: &ExperimentConfig) -> Result<DriverPath> {
    let spec = cfg.effective_path();
    let steps = (cfg.time.t_final / cfg.finest_dt()).round() as usize;
    let n = steps * spec.oversampling() + 1;
    let n = match spec {
        PathSpec::Deterministic { .. } => 2,
        _ => n,
    };
    let z = generate(&spec, cfg.time.t_final, n)?;
    let reference = TimePartition::from_dt(cfg.time.t_final, cfg.finest_dt())?;
    z.with_partition(&reference)
}

struct Setup {
    grid: SpatialGrid,
    vgrid: VelocityGrid,
    u0: ScalarField,
    flux: BuiltFlux,
    z: DriverPath,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let grid = cfg.spatial_grid()?;
    Ok(Setup {
        vgrid: cfg.velocity_grid()?,
        u0: cfg.initial.sample(&grid)?,
        flux: cfg.flux.build()?,
        z: build_path(cfg)?,
        grid,
    })
}

fn run_scheme(s: &Setup, p: &TimePartition, times: &[f64]) -> Result<Trajectory> {
    match &s.flux {
        BuiltFlux::Homogeneous(f) => run_homogeneous(&s.u0, f, &s.vgrid, &s.z, p, times),
        BuiltFlux::Inhomogeneous(f) => run_inhomogeneous(&s.u0, f, &s.vgrid, &s.z, p, times),
    }
}

fn envelope(s: &Setup) -> Option<BoundReport> {
    match &s.flux {
        BuiltFlux::Homogeneous(f) if s.grid.dim() == 1 => bound_report(&s.u0, f, 1.0).ok(),
        _ => None,
    }
}

fn rows(
    dts: &[f64],
    dzs: &[f64],
    errors: &[f64],
    bound: Option<&BoundReport>,
) -> Vec<ConvergenceRow> {
    (0..errors.len())
        .map(|i| ConvergenceRow {
            dt: dts[i],
            delta_z: dzs[i],
            l1_error: errors[i],
            bound: bound.map(|b| b.at(dzs[i]).stated),
            slope_cum: log_log_slope(&dzs[..=i], &errors[..=i]),
        })
        .collect()
}

/// Runs the experiment described by `cfg` in the given mode.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<ExperimentReport> {
    let s = setup(cfg)?;
    let bound = envelope(&s);
    let mut report = ExperimentReport {
        mode,
        seed: cfg.effective_seed(),
        trajectory: None,
        table: None,
        slope: None,
        bound,
    };
    match mode {
        Mode::Run => {
            let dt = cfg.time.dts.iter().copied().fold(f64::INFINITY, f64::min);
            let p = TimePartition::from_dt(cfg.time.t_final, dt)?;
            report.trajectory = Some(run_scheme(&s, &p, &cfg.snapshot_times())?);
        }
        Mode::Converge => {
            let dt_ref = cfg.time.dt_ref.ok_or_else(|| Error::Config {
                path: "time.dt_ref".into(),
                reason: "converge needs a reference time step".into(),
            })?;
            let params = StudyParams {
                t_final: cfg.time.t_final,
                dts: cfg.time.dts.clone(),
                dt_ref,
                snapshot_times: cfg.snapshot_times(),
            };
            let table = self_convergence_study(
                |p, times| {
                    Ok(run_scheme(&s, p, times)?
                        .snapshots
                        .into_iter()
                        .map(|sn| sn.u)
                        .collect())
                },
                &s.z,
                &params,
            )?;
            let dts: Vec<f64> = table.rows.iter().map(|r| r.dt).collect();
            let dzs: Vec<f64> = table.rows.iter().map(|r| r.delta_z).collect();
            report.table = Some(rows(&dts, &dzs, &table.errors(), bound.as_ref()));
            report.slope = table.slope;
        }
        Mode::Compare(oracle) => {
            let (dts, dzs, errors) = compare(cfg, &s, oracle)?;
            report.table = Some(rows(&dts, &dzs, &errors, bound.as_ref()));
            report.slope = log_log_slope(&dzs, &errors);
        }
    }
    Ok(report)
}

fn homogeneous_1d(s: &Setup, oracle: Oracle) -> Result<&dyn HomogeneousFlux> {
    match &s.flux {
        BuiltFlux::Homogeneous(f) if s.grid.dim() == 1 => Ok(f),
        _ => Err(Error::param(
            "oracle",
            format!("{oracle:?} comparison needs a 1-D homogeneous flux"),
        )),
    }
}

type Columns = (Vec<f64>, Vec<f64>, Vec<f64>);

fn compare(cfg: &ExperimentConfig, s: &Setup, oracle: Oracle) -> Result<Columns> {
    let t_final = cfg.time.t_final;
    let flux = homogeneous_1d(s, oracle)?;
    let mut dts = Vec::new();
    let mut dzs = Vec::new();
    let mut errors = Vec::new();
    let reference = match oracle {
        Oracle::Godunov | Oracle::TimeChange => {
            if oracle == Oracle::Godunov
                && !matches!(&cfg.path, PathSpec::Deterministic { slope } if slope[0] >= 0.0)
            {
                return Err(Error::param(
                    "path",
                    "the Godunov comparison needs a deterministic path with nonnegative slope",
                ));
            }
            let sb = speed_bounds(flux, s.u0.sup_norm(), BOUND_SAMPLES);
            let dt = 0.9 * s.grid.cell_size(0) / sb.sup.max(f64::MIN_POSITIVE);
            Some(time_change_reference(&s.u0, flux, &s.z, t_final, dt)?)
        }
        _ => None,
    };
    let riemann = match (oracle, &cfg.flux, &cfg.initial, &cfg.path) {
        (
            Oracle::Riemann,
            FluxConfig::Burgers { .. },
            InitialData::Riemann { u_l, u_r, x0 },
            PathSpec::Deterministic { slope },
        ) if slope == &[1.0] => Some(PeriodicRiemann {
            u_l: *u_l,
            u_r: *u_r,
            x0: *x0,
            length: cfg.grid.length,
        }),
        (Oracle::Riemann, ..) => {
            return Err(Error::param(
                "oracle",
                "the Riemann comparison needs Burgers flux, Riemann data and z(t) = t",
            ))
        }
        _ => None,
    };
    for &dt in &cfg.time.dts {
        let p = TimePartition::from_dt(t_final, dt)?;
        let tr = run_homogeneous(&s.u0, flux, &s.vgrid, &s.z, &p, &[])?;
        let err = match oracle {
            Oracle::Riemann => riemann
                .as_ref()
                .unwrap()
                .l1_error_near_jump(&tr.final_u, t_final)?,
            Oracle::Godunov | Oracle::TimeChange => {
                l1_distance(&tr.final_u, reference.as_ref().unwrap())?
            }
            Oracle::Bgk => {
                let eps = cfg.compare.bgk_epsilon_ratio * p.dt();
                let b = bgk_run(&s.u0, flux, &s.vgrid, &s.z, &p, eps)?;
                l1_distance(&b, &tr.final_u)?
            }
        };
        dts.push(p.dt());
        dzs.push(delta_z(&s.z, &p)?);
        errors.push(err);
    }
    Ok((dts, dzs, errors))
}
