//! Transport–collapse scheme for fluxes that do not depend on `x`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{speed_bounds, HomogeneousFlux};
use crate::grid::{ScalarField, SpatialGrid, VelocityGrid};
use crate::kinetic::{
    bv_norm, check_velocity_range, collapse_with_defect_summary, defect_from_collapse, lift,
    DefectMeasure, DefectSummary, KineticDensity,
};
use crate::path::{DriverPath, TimePartition};
use crate::trajectory::{snapshot_steps, FieldNorms, Snapshot, StepRecord, Trajectory};

/// Samples used to estimate speed bounds when no closed form is available.
pub const BOUND_SAMPLES: usize = 4097;

/// `dst[i] = (1 - theta) src[i - s] + theta src[i - s - 1]` on a periodic
/// line of `n` entries spaced `stride` apart, shifting by `q` cells.
fn remap_line(src: &[f64], dst: &mut [f64], n: usize, stride: usize, offset: usize, q: f64) {
    let fl = q.floor();
    let theta = q - fl;
    let s = (fl as i64).rem_euclid(n as i64) as usize;
    for i in 0..n {
        let a = (i + n - s) % n;
        let b = (a + n - 1) % n;
        let va = src[offset + a * stride];
        dst[offset + i * stride] = if theta == 0.0 {
            va
        } else {
            (1.0 - theta) * va + theta * src[offset + b * stride]
        };
    }
}

/// Shifts one column (all x-cells of one xi-cell) by `q[axis]` cells per axis.
fn remap_column(grid: &SpatialGrid, src: &[f64], dst: &mut [f64], q: &[f64]) {
    if src.iter().all(|&v| v == 0.0) {
        dst.fill(0.0);
        return;
    }
    let cells = grid.cells_per_axis();
    match grid.dim() {
        1 => remap_line(src, dst, cells[0], 1, 0, q[0]),
        _ => {
            let (nx, ny) = (cells[0], cells[1]);
            let mut tmp = vec![0.0; src.len()];
            for iy in 0..ny {
                remap_line(src, &mut tmp, nx, 1, iy * nx, q[0]);
            }
            for ix in 0..nx {
                remap_line(&tmp, dst, ny, nx, ix, q[1]);
            }
        }
    }
}

/// Free transport `f(x - a(xi) dz, xi)` with the speed frozen at each
/// xi-cell midpoint and a conservative overlap remap in `x`.
pub fn stream_homogeneous(
    f: &KineticDensity,
    flux: &dyn HomogeneousFlux,
    dz: &[f64],
) -> Result<KineticDensity> {
    let sgrid = f.sgrid();
    check_dims(sgrid, flux, dz)?;
    let vgrid = f.vgrid();
    let n = sgrid.len();
    let mut out = vec![0.0; f.values().len()];
    out.par_chunks_mut(n).enumerate().for_each(|(l, dst)| {
        let xi = vgrid.midpoint(l);
        let q: Vec<f64> = (0..sgrid.dim())
            .map(|a| flux.speed(a, xi) * dz[a] / sgrid.cell_size(a))
            .collect();
        remap_column(sgrid, f.slice(l), dst, &q);
    });
    Ok(KineticDensity::from_parts_unchecked(
        sgrid.clone(),
        vgrid.clone(),
        out,
    ))
}

fn check_dims(sgrid: &SpatialGrid, flux: &dyn HomogeneousFlux, dz: &[f64]) -> Result<()> {
    if flux.dim() != sgrid.dim() || dz.len() != sgrid.dim() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {}, flux dimension {}, increment dimension {}",
            sgrid.dim(),
            flux.dim(),
            dz.len()
        )));
    }
    if dz.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("dz", "increment must be finite"));
    }
    Ok(())
}

/// One transport–collapse step: lift, stream by `dz`, collapse.
pub fn tc_step(
    u: &ScalarField,
    flux: &dyn HomogeneousFlux,
    vgrid: &VelocityGrid,
    dz: &[f64],
    k: usize,
) -> Result<(ScalarField, DefectMeasure)> {
    let f = stream_homogeneous(&lift(u, vgrid)?, flux, dz)?;
    let (m, u_next) = defect_from_collapse(&f, k)?;
    Ok((u_next, m))
}

pub(crate) fn tc_step_summary(
    u: &ScalarField,
    flux: &dyn HomogeneousFlux,
    vgrid: &VelocityGrid,
    dz: &[f64],
    k: usize,
) -> Result<(ScalarField, DefectSummary, f64)> {
    let f = stream_homogeneous(&lift(u, vgrid)?, flux, dz)?;
    let kinetic_l1 = f.l1_norm();
    let (u_next, summary) = collapse_with_defect_summary(&f, k)?;
    Ok((u_next, summary, kinetic_l1))
}

/// Runs the scheme over `p` driven by `z`, keeping snapshots at the
/// requested partition times.
pub fn run_homogeneous(
    u0: &ScalarField,
    flux: &dyn HomogeneousFlux,
    vgrid: &VelocityGrid,
    z: &DriverPath,
    p: &TimePartition,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    check_velocity_range(u0, vgrid)?;
    if z.dim() != flux.dim() {
        return Err(Error::GridMismatch(format!(
            "path has {} components, flux has {}",
            z.dim(),
            flux.dim()
        )));
    }
    if p.t_final() > z.end_time() + 1e-12 {
        return Err(Error::InvalidPath(format!(
            "path ends at {} before T = {}",
            z.end_time(),
            p.t_final()
        )));
    }
    let wanted = snapshot_steps(p, snapshot_times)?;
    let mut snapshots = Vec::with_capacity(wanted.len());
    if wanted.first() == Some(&0) {
        snapshots.push(Snapshot {
            step: 0,
            time: 0.0,
            u: u0.clone(),
        });
    }
    let mut u = u0.clone();
    let mut steps = Vec::with_capacity(p.steps());
    let mut cumulative = 0.0;
    for k in 0..p.steps() {
        let (t0, t1) = (p.time(k), p.time(k + 1));
        let dz = z.increment(t0, t1)?;
        let (u_next, summary, kinetic_l1) = tc_step_summary(&u, flux, vgrid, &dz, k)?;
        u = u_next;
        cumulative += summary.total_mass;
        steps.push(StepRecord {
            step: k + 1,
            time: t1,
            defect_mass: summary.total_mass,
            cumulative_defect: cumulative,
            min_defect: summary.min_value,
            kinetic_l1,
            norms: FieldNorms::of(&u),
        });
        if wanted.binary_search(&(k + 1)).is_ok() {
            snapshots.push(Snapshot {
                step: k + 1,
                time: t1,
                u: u.clone(),
            });
        }
    }
    log::debug!(
        "homogeneous run: {} steps, cumulative defect {cumulative:.6e}",
        p.steps()
    );
    Ok(Trajectory {
        initial: FieldNorms::of(u0),
        steps,
        snapshots,
        final_u: u,
        vgrid: vgrid.clone(),
        defect_budget: 0.5 * u0.l2_norm().powi(2),
        observed_m: None,
    })
}

/// Both forms of the error envelope `C ||u_0||_2 sqrt(dz)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    /// `sqrt(2 BV ||a||) ||u_0||_2 sqrt(dz)` with `||a|| = sup|a| + Lip(a)`.
    pub stated: f64,
    /// `2 sqrt(2) sqrt(BV sup|a'|) ||u_0||_2 sqrt(dz)`.
    pub proof: f64,
    pub bv: f64,
    pub l2: f64,
    pub eta: f64,
    pub sup_speed: f64,
    pub lipschitz: f64,
    pub dz_max: f64,
    /// Set when `dz_max > 1`.
    pub hypothesis_violated: bool,
}

impl BoundReport {
    pub fn larger(&self) -> f64 {
        self.stated.max(self.proof)
    }

    /// The same envelope at another `dz`.
    pub fn at(&self, dz_max: f64) -> Self {
        bound_report_from_parts(
            self.bv,
            self.l2,
            self.eta,
            self.sup_speed,
            self.lipschitz,
            dz_max,
        )
    }
}

fn bound_report_from_parts(
    bv: f64,
    l2: f64,
    eta: f64,
    sup_speed: f64,
    lipschitz: f64,
    dz_max: f64,
) -> BoundReport {
    let root_dz = dz_max.sqrt();
    BoundReport {
        stated: (2.0 * bv * (sup_speed + lipschitz)).sqrt() * l2 * root_dz,
        proof: 2.0 * std::f64::consts::SQRT_2 * (bv * lipschitz).sqrt() * l2 * root_dz,
        bv,
        l2,
        eta,
        sup_speed,
        lipschitz,
        dz_max,
        hypothesis_violated: dz_max > 1.0,
    }
}

/// Envelope for the L1 error of the scheme on 1-D BV data.
pub fn bound_report(
    u0: &ScalarField,
    flux: &dyn HomogeneousFlux,
    dz_max: f64,
) -> Result<BoundReport> {
    if u0.grid().dim() != 1 || flux.dim() != 1 {
        return Err(Error::param(
            "theorem_bound",
            "the envelope is defined for N = 1",
        ));
    }
    if !(dz_max.is_finite() && dz_max >= 0.0) {
        return Err(Error::param(
            "dz_max",
            format!("must be >= 0, got {dz_max}"),
        ));
    }
    if dz_max > 1.0 {
        log::warn!("dz_max = {dz_max} > 1: the envelope's hypothesis dz <= 1 is violated");
    }
    let eta = u0.sup_norm();
    let sb = speed_bounds(flux, eta, BOUND_SAMPLES);
    Ok(bound_report_from_parts(
        bv_norm(u0)?,
        u0.l2_norm(),
        eta,
        sb.sup,
        sb.lipschitz,
        dz_max,
    ))
}

/// The envelope in its stated form.
pub fn theorem_bound(u0: &ScalarField, flux: &dyn HomogeneousFlux, dz_max: f64) -> Result<f64> {
    Ok(bound_report(u0, flux, dz_max)?.stated)
}
