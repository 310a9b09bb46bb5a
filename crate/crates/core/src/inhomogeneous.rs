//! Semi-Lagrangian transport–collapse scheme for `x`-dependent fluxes.

use rayon::prelude::*;

use crate::characteristics::{default_step, CharacteristicFlow, Direction, Piece, State};
use crate::error::{Error, Result};
use crate::flux::InhomogeneousFlux;
use crate::grid::{ScalarField, VelocityGrid, MAX_DIM};
use crate::kinetic::{
    check_velocity_range, collapse_with_defect_summary, defect_from_collapse, maxwellian_value,
    signed_overlap, DefectMeasure, DefectSummary, KineticDensity,
};
use crate::path::{DriverPath, TimePartition};
use crate::trajectory::{snapshot_steps, FieldNorms, Snapshot, StepRecord, Trajectory};

/// Factor applied to the velocity range when characteristics leave it.
pub const WIDENING_FACTOR: f64 = 1.5;

/// Widenings attempted before a range error is returned.
pub const MAX_WIDENINGS: usize = 4;

/// Image intervals shorter than this are evaluated at their midpoint.
const DEGENERATE_WIDTH: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InhomogeneousOptions {
    /// RK4 step; `None` uses `min(dt, path spacing) / 8`.
    pub step: Option<f64>,
    pub max_widenings: usize,
}

impl Default for InhomogeneousOptions {
    fn default() -> Self {
        Self {
            step: None,
            max_widenings: MAX_WIDENINGS,
        }
    }
}

/// Streamed density `f(t_{k+1}-)` obtained by tracing every `(x_j, xi_e)`
/// edge node back to `t_k` and averaging `chi(u_k(X), .)` over the image of
/// each velocity cell.
fn streamed_density(
    u: &ScalarField,
    flux: &dyn InhomogeneousFlux,
    vgrid: &VelocityGrid,
    flow: &CharacteristicFlow,
    pieces: &[Piece],
) -> Result<KineticDensity> {
    let g = u.grid();
    let dim = g.dim();
    let n = g.len();
    let n_edges = vgrid.n_cells() + 1;
    let zero = vgrid.zero_edge();
    if flux.dim() != dim {
        return Err(Error::GridMismatch(format!(
            "flux has {} components, grid has dimension {dim}",
            flux.dim()
        )));
    }

    // feet of the characteristics, edge-major
    let feet: Vec<([f64; MAX_DIM], f64)> = (0..n_edges * n)
        .into_par_iter()
        .map(|k| {
            let (e, j) = (k / n, k % n);
            let x = g.center(j);
            let xi = vgrid.edge(e);
            if e == zero {
                return Ok((x, 0.0));
            }
            let mut s: State = [0.0; MAX_DIM + 1];
            s[..dim].copy_from_slice(&x[..dim]);
            s[MAX_DIM] = xi;
            let s = flow.integrate(pieces, s)?;
            // the exact flow keeps sgn(Xi) = sgn(xi)
            let big_xi = if e > zero {
                s[MAX_DIM].max(0.0)
            } else {
                s[MAX_DIM].min(0.0)
            };
            Ok(([s[0], s[1]], big_xi))
        })
        .collect::<Result<_>>()?;

    // mass would be cut off if the Maxwellian reaches past an outer image
    let mut top_ratio = 1.0f64;
    let mut bottom_ratio = 1.0f64;
    for j in 0..n {
        let (xt, xit) = feet[(n_edges - 1) * n + j];
        let ut = u.interpolate(&xt);
        if ut > xit {
            top_ratio = top_ratio.max(ut / xit.max(f64::MIN_POSITIVE));
        }
        let (xb, xib) = feet[j];
        let ub = u.interpolate(&xb);
        if ub < xib {
            bottom_ratio = bottom_ratio.max(ub / xib.min(-f64::MIN_POSITIVE));
        }
    }
    if top_ratio > 1.0 || bottom_ratio > 1.0 {
        let factor = top_ratio.max(bottom_ratio).max(WIDENING_FACTOR);
        return Err(Error::CharacteristicRange {
            suggested_min: vgrid.xi_min() * factor,
            suggested_max: vgrid.xi_max() * factor,
        });
    }

    let mut values = vec![0.0; n * vgrid.n_cells()];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(l, column)| {
            for (j, out) in column.iter_mut().enumerate() {
                let (xa, xia) = feet[l * n + j];
                let (xb, xib) = feet[(l + 1) * n + j];
                let mut mid = [0.0; MAX_DIM];
                for a in 0..dim {
                    mid[a] = 0.5 * (xa[a] + xb[a]);
                }
                let us = u.interpolate(&mid);
                let (lo, hi) = if xia <= xib { (xia, xib) } else { (xib, xia) };
                *out = if hi - lo > DEGENERATE_WIDTH {
                    signed_overlap(us, lo, hi) / (hi - lo)
                } else {
                    maxwellian_value(us, 0.5 * (lo + hi))
                };
            }
        });
    Ok(KineticDensity::from_parts_unchecked(
        g.clone(),
        vgrid.clone(),
        values,
    ))
}

fn prepare<'a>(
    flux: &'a dyn InhomogeneousFlux,
    z: &'a DriverPath,
    t_k: f64,
    t_next: f64,
    h: Option<f64>,
) -> Result<(CharacteristicFlow<'a>, Vec<Piece>)> {
    if !(t_next > t_k) {
        return Err(Error::param(
            "t_next",
            format!("step [{t_k}, {t_next}] is empty"),
        ));
    }
    let h = h.unwrap_or_else(|| default_step(t_next - t_k, z));
    let flow = CharacteristicFlow::new(flux, z, h, Direction::Backward)?;
    let pieces = flow.pieces(t_next, t_next - t_k)?;
    Ok((flow, pieces))
}

/// One semi-Lagrangian transport–collapse step from `t_k` to `t_next`.
pub fn sl_step(
    u: &ScalarField,
    flux: &dyn InhomogeneousFlux,
    vgrid: &VelocityGrid,
    z: &DriverPath,
    t_k: f64,
    t_next: f64,
) -> Result<(ScalarField, DefectMeasure)> {
    sl_step_with(u, flux, vgrid, z, t_k, t_next, None, 0)
}

/// `sl_step` with an explicit RK4 step and step index.
#[allow(clippy::too_many_arguments)]
pub fn sl_step_with(
    u: &ScalarField,
    flux: &dyn InhomogeneousFlux,
    vgrid: &VelocityGrid,
    z: &DriverPath,
    t_k: f64,
    t_next: f64,
    h: Option<f64>,
    k: usize,
) -> Result<(ScalarField, DefectMeasure)> {
    check_velocity_range(u, vgrid)?;
    let (flow, pieces) = prepare(flux, z, t_k, t_next, h)?;
    let f = streamed_density(u, flux, vgrid, &flow, &pieces)?;
    let (m, u_next) = defect_from_collapse(&f, k)?;
    Ok((u_next, m))
}

#[allow(clippy::too_many_arguments)]
fn sl_step_summary(
    u: &ScalarField,
    flux: &dyn InhomogeneousFlux,
    vgrid: &VelocityGrid,
    z: &DriverPath,
    t_k: f64,
    t_next: f64,
    h: Option<f64>,
    k: usize,
) -> Result<(ScalarField, DefectSummary, f64)> {
    let (flow, pieces) = prepare(flux, z, t_k, t_next, h)?;
    let f = streamed_density(u, flux, vgrid, &flow, &pieces)?;
    let kinetic_l1 = f.l1_norm();
    let (u_next, summary) = collapse_with_defect_summary(&f, k)?;
    Ok((u_next, summary, kinetic_l1))
}

/// Runs the semi-Lagrangian scheme with default options.
pub fn run_inhomogeneous(
    u0: &ScalarField,
    flux: &dyn InhomogeneousFlux,
    vgrid: &VelocityGrid,
    z: &DriverPath,
    p: &TimePartition,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    run_inhomogeneous_with(
        u0,
        flux,
        vgrid,
        z,
        p,
        snapshot_times,
        &InhomogeneousOptions::default(),
    )
}

/// Runs the scheme, restarting on a widened velocity grid (same spacing)
/// whenever characteristics leave the current one.
pub fn run_inhomogeneous_with(
    u0: &ScalarField,
    flux: &dyn InhomogeneousFlux,
    vgrid: &VelocityGrid,
    z: &DriverPath,
    p: &TimePartition,
    snapshot_times: &[f64],
    options: &InhomogeneousOptions,
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
    let h = options.step.or_else(|| Some(default_step(p.dt(), z)));
    let mut grid = vgrid.clone();
    let mut widenings = 0;
    loop {
        match attempt(u0, flux, &grid, z, p, &wanted, h) {
            Err(Error::CharacteristicRange {
                suggested_min,
                suggested_max,
            }) if widenings < options.max_widenings => {
                widenings += 1;
                grid = grid.covering(suggested_min, suggested_max);
                log::info!(
                    "characteristics left the velocity grid; retrying on [{}, {}]",
                    grid.xi_min(),
                    grid.xi_max()
                );
            }
            other => return other,
        }
    }
}

fn attempt(
    u0: &ScalarField,
    flux: &dyn InhomogeneousFlux,
    vgrid: &VelocityGrid,
    z: &DriverPath,
    p: &TimePartition,
    wanted: &[usize],
    h: Option<f64>,
) -> Result<Trajectory> {
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
        let (u_next, summary, kinetic_l1) = sl_step_summary(&u, flux, vgrid, z, t0, t1, h, k)?;
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
    let budget = 0.5 * u0.l2_norm().powi(2);
    let l1 = u0.l1_norm();
    Ok(Trajectory {
        initial: FieldNorms::of(u0),
        steps,
        snapshots,
        final_u: u,
        vgrid: vgrid.clone(),
        defect_budget: budget,
        observed_m: (l1 > 0.0).then(|| (cumulative - budget) / l1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{PolynomialFlux, SeparableFlux};
    use crate::grid::SpatialGrid;
    use crate::homogeneous::tc_step;
    use crate::initial::InitialData;
    use crate::kinetic::l1_distance;
    use crate::path::{generate, PathSpec};

    #[test]
    fn constant_path_is_the_identity() {
        let g = SpatialGrid::uniform_1d(64, std::f64::consts::TAU).unwrap();
        let vg = VelocityGrid::symmetric(1.5, 48).unwrap();
        let u = InitialData::Sine { amplitude: 0.8 }.sample(&g).unwrap();
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
        let z = DriverPath::new(vec![0.0, 1.0], vec![vec![0.2], vec![0.2]]).unwrap();
        let (u1, _) = sl_step(&u, &flux, &vg, &z, 0.0, 0.5).unwrap();
        assert!(l1_distance(&u, &u1).unwrap() < 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = SpatialGrid::uniform_1d(32, std::f64::consts::TAU).unwrap();
        let vg = VelocityGrid::symmetric(1.0, 16).unwrap();
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
        let z = generate(
            &PathSpec::Brownian {
                seed: 2,
                oversampling: 1,
                dim: 1,
            },
            1.0,
            17,
        )
        .unwrap();
        let p = TimePartition::new(1.0, 4).unwrap();
        let tr = run_inhomogeneous(&ScalarField::zeros(g), &flux, &vg, &z, &p, &[1.0]).unwrap();
        assert!(tr.final_u.values().iter().all(|&v| v == 0.0));
        assert_eq!(tr.cumulative_defect(), 0.0);
    }

    #[test]
    fn constant_factor_matches_the_homogeneous_step() {
        let n = 256;
        let g = SpatialGrid::uniform_1d(4 * n, 4.0).unwrap();
        let vg = VelocityGrid::new(-1.0, 1.0, 2 * n).unwrap();
        let u0 = InitialData::indicator(0.0, 1.0, 1.0).sample(&g).unwrap();
        let z = generate(&PathSpec::Deterministic { slope: vec![1.0] }, 1.0, 11).unwrap();
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.0, 1).unwrap();
        let (sl, _) = sl_step(&u0, &flux, &vg, &z, 0.0, 0.1).unwrap();
        let (tc, _) = tc_step(&u0, &PolynomialFlux::burgers(1).unwrap(), &vg, &[0.1], 0).unwrap();
        let d = l1_distance(&sl, &tc).unwrap();
        let tol = 2.0 * (g.cell_size(0) + vg.dxi());
        assert!(d <= tol, "{d} > {tol}");
    }

    #[test]
    fn narrow_grid_is_widened() {
        let g = SpatialGrid::uniform_1d(64, std::f64::consts::TAU).unwrap();
        let u0 = InitialData::Sine { amplitude: 1.0 }.sample(&g).unwrap();
        let vg = VelocityGrid::symmetric(1.0, 32).unwrap();
        let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
        let z = generate(&PathSpec::Deterministic { slope: vec![1.0] }, 1.0, 11).unwrap();
        let p = TimePartition::new(1.0, 10).unwrap();
        let tr = run_inhomogeneous(&u0, &flux, &vg, &z, &p, &[]).unwrap();
        assert!(tr.vgrid.xi_max() > 1.0);
        assert_eq!(tr.vgrid.dxi(), vg.dxi());
        assert!(tr.observed_m.is_some());
    }
}
