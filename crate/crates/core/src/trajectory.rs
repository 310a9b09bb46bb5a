//! Records produced by the time loops.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VelocityGrid};
use crate::path::TimePartition;

/// Tightness radius as a fraction of the shortest domain side.
pub const TIGHTNESS_FRACTION: f64 = 0.25;

/// Field norms tracked at every partition point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub mass: f64,
    /// `int |u|` outside the ball of radius `TIGHTNESS_FRACTION * min L`
    /// around the domain center.
    pub tightness: f64,
}

impl FieldNorms {
    pub fn of(u: &ScalarField) -> Self {
        let radius = TIGHTNESS_FRACTION
            * u.grid()
                .lengths()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
        Self {
            l1: u.l1_norm(),
            l2: u.l2_norm(),
            linf: u.sup_norm(),
            mass: u.mass(),
            tightness: mass_outside(u, radius),
        }
    }
}

/// `int_{|x - center| > radius} |u| dx` with periodic distance.
pub fn mass_outside(u: &ScalarField, radius: f64) -> f64 {
    let g = u.grid();
    u.values()
        .iter()
        .enumerate()
        .filter(|(j, _)| g.distance_from_center(&g.center(*j)) > radius)
        .map(|(_, v)| v.abs())
        .sum::<f64>()
        * g.cell_volume()
}

/// Diagnostics of step `k -> k + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    /// Index of the partition point reached (`k + 1`).
    pub step: usize,
    pub time: f64,
    /// `int int m_k dx dxi`.
    pub defect_mass: f64,
    pub cumulative_defect: f64,
    /// Smallest edge value of `m_k`.
    pub min_defect: f64,
    /// `int |f| dx dxi` of the streamed density before collapse.
    pub kinetic_l1: f64,
    pub norms: FieldNorms,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub u: ScalarField,
}

/// Output of a full run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial: FieldNorms,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_u: ScalarField,
    /// Velocity grid actually used (it may have been widened).
    pub vgrid: VelocityGrid,
    /// `(1/2) ||u_0||_2^2`.
    pub defect_budget: f64,
    /// `(cumulative defect - budget) / ||u_0||_1`, recorded by the
    /// inhomogeneous run.
    pub observed_m: Option<f64>,
}

impl Trajectory {
    pub fn cumulative_defect(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cumulative_defect)
    }

    pub fn defect_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.defect_mass).collect()
    }

    pub fn snapshot_at(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }
}

/// Maps snapshot times to partition indices.
pub(crate) fn snapshot_steps(p: &TimePartition, times: &[f64]) -> Result<Vec<usize>> {
    let mut steps = times
        .iter()
        .map(|&t| {
            p.index_of(t).ok_or_else(|| {
                Error::param(
                    "snapshot_times",
                    format!("{t} is not a point of the partition with dt = {}", p.dt()),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}
