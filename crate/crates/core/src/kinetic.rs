//! Kinetic representation: the Maxwellian lift, the collapse onto the
//! conserved variable, the entropy defect created at collapse times, and the
//! norms shared by every scheme.
//!
//! Densities are stored as exact cell averages on the `(x, xi)` product grid,
//! so `collapse(lift(u)) == u` up to rounding and mass is conserved exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, SpatialGrid, VelocityGrid};

/// Defect values below this are treated as a broken streaming step.
pub const DEFECT_ABORT_TOLERANCE: f64 = 1e-8;

/// Equilibrium profile `chi(u, xi)`, closed at both ends.
pub fn maxwellian_value(u: f64, xi: f64) -> f64 {
    if 0.0 <= xi && xi <= u {
        1.0
    } else if u <= xi && xi <= 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact integral of `chi(u, .)` over `[xi_lo, xi_hi]`.
///
/// The cell must not straddle zero.
pub fn chi_cell_integral(u: f64, xi_lo: f64, xi_hi: f64) -> Result<f64> {
    if xi_lo < 0.0 && xi_hi > 0.0 {
        return Err(Error::StraddlingCell {
            lo: xi_lo,
            hi: xi_hi,
        });
    }
    Ok(signed_overlap(u, xi_lo, xi_hi))
}

#[inline]
pub(crate) fn signed_overlap(u: f64, lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        (u.min(hi) - lo).max(0.0)
    } else {
        -(hi - u.max(lo)).max(0.0)
    }
}

/// Cell-averaged kinetic density on `SpatialGrid x VelocityGrid`.
///
/// Storage is velocity-major: the x-profile of velocity cell `l` is the
/// contiguous slice `values[l * nx .. (l + 1) * nx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticDensity {
    sgrid: SpatialGrid,
    vgrid: VelocityGrid,
    values: Vec<f64>,
}

impl KineticDensity {
    pub fn zeros(sgrid: SpatialGrid, vgrid: VelocityGrid) -> Self {
        let n = sgrid.len() * vgrid.n_cells();
        Self {
            sgrid,
            vgrid,
            values: vec![0.0; n],
        }
    }

    /// Builds a density from raw values, checking the sign and bound invariants.
    pub fn new(sgrid: SpatialGrid, vgrid: VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != sgrid.len() * vgrid.n_cells() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} kinetic grid",
                values.len(),
                sgrid.len(),
                vgrid.n_cells()
            )));
        }
        let f = Self {
            sgrid,
            vgrid,
            values,
        };
        if let Some((j, l, v)) = f.first_invariant_violation(1e-12) {
            return Err(Error::InvalidParameter {
                name: "kinetic density".into(),
                reason: format!("value {v} at x-cell {j}, xi-cell {l} violates sign/bound"),
            });
        }
        Ok(f)
    }

    pub(crate) fn from_parts_unchecked(
        sgrid: SpatialGrid,
        vgrid: VelocityGrid,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), sgrid.len() * vgrid.n_cells());
        Self {
            sgrid,
            vgrid,
            values,
        }
    }

    pub fn sgrid(&self) -> &SpatialGrid {
        &self.sgrid
    }

    pub fn vgrid(&self) -> &VelocityGrid {
        &self.vgrid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.values[l * self.sgrid.len() + j]
    }

    /// x-profile of velocity cell `l`.
    pub fn slice(&self, l: usize) -> &[f64] {
        let n = self.sgrid.len();
        &self.values[l * n..(l + 1) * n]
    }

    /// First `(x-cell, xi-cell, value)` breaking `|f| <= 1` or `sgn f = sgn xi`.
    pub fn first_invariant_violation(&self, tol: f64) -> Option<(usize, usize, f64)> {
        let n = self.sgrid.len();
        let zero = self.vgrid.zero_edge();
        self.values.iter().enumerate().find_map(|(k, &v)| {
            let (l, j) = (k / n, k % n);
            let bad = v.abs() > 1.0 + tol
                || (l >= zero && v < -tol)
                || (l < zero && v > tol)
                || !v.is_finite();
            bad.then_some((j, l, v))
        })
    }

    /// `int |f| dx dxi`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>()
            * self.sgrid.cell_volume()
            * self.vgrid.dxi()
    }

    /// Cell-weighted L1 distance `int |f - g| dx dxi`.
    pub fn l1_distance(&self, other: &KineticDensity) -> Result<f64> {
        if self.sgrid != other.sgrid || self.vgrid != other.vgrid {
            return Err(Error::GridMismatch("densities on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.sgrid.cell_volume()
            * self.vgrid.dxi())
    }
}

/// Checks that the velocity grid covers every value of `u`.
pub fn check_velocity_range(u: &ScalarField, vgrid: &VelocityGrid) -> Result<()> {
    match u.values().iter().find(|&&v| !vgrid.contains(v)) {
        Some(&value) => Err(Error::VelocityRange {
            value,
            xi_min: vgrid.xi_min(),
            xi_max: vgrid.xi_max(),
        }),
        None => Ok(()),
    }
}

/// Equilibrium density `chi(u(x), xi)` as exact cell averages.
pub fn lift(u: &ScalarField, vgrid: &VelocityGrid) -> Result<KineticDensity> {
    check_velocity_range(u, vgrid)?;
    let n = u.grid().len();
    let dxi = vgrid.dxi();
    let mut values = vec![0.0; n * vgrid.n_cells()];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(l, column)| {
            let (lo, hi) = vgrid.cell_bounds(l);
            for (c, &uj) in column.iter_mut().zip(u.values()) {
                *c = signed_overlap(uj, lo, hi) / dxi;
            }
        });
    Ok(KineticDensity::from_parts_unchecked(
        u.grid().clone(),
        vgrid.clone(),
        values,
    ))
}

/// `u(x) = int f(x, xi) dxi`, exact for cell averages.
pub fn collapse(f: &KineticDensity) -> ScalarField {
    let n = f.sgrid.len();
    let dxi = f.vgrid.dxi();
    let mut u = vec![0.0; n];
    for column in f.values.chunks_exact(n) {
        for (uj, &v) in u.iter_mut().zip(column) {
            *uj += v;
        }
    }
    u.iter_mut().for_each(|v| *v *= dxi);
    ScalarField::from_parts_unchecked(f.sgrid.clone(), u)
}

/// Entropy defect created by one collapse, sampled at velocity edges.
///
/// `value(j, e) = int_{-inf}^{xi_e} (Mf - f)(x_j, s) ds`. The anchor at the
/// bottom of the velocity grid makes the measure vanish at both ends; for a
/// column whose density has a single sign the value at `xi = 0` is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectMeasure {
    sgrid: SpatialGrid,
    vgrid: VelocityGrid,
    step: usize,
    /// Edge-major: `values[e * nx + j]`.
    values: Vec<f64>,
    total_mass: f64,
}

impl DefectMeasure {
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn sgrid(&self) -> &SpatialGrid {
        &self.sgrid
    }

    pub fn vgrid(&self) -> &VelocityGrid {
        &self.vgrid
    }

    pub fn get(&self, j: usize, edge: usize) -> f64 {
        self.values[edge * self.sgrid.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `int m dx dxi`, evaluated exactly as `int xi (f - Mf) dxi dx`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
}

/// Summary of a collapse used inside time loops, where the full edge array
/// is not retained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefectSummary {
    pub total_mass: f64,
    pub min_value: f64,
    /// Largest `|m|` at the `xi = 0` edge.
    pub max_at_zero: f64,
}

/// Collapses `f_minus` and records the defect `int (Mf - f)`.
///
/// Fails if any edge value is below `-DEFECT_ABORT_TOLERANCE`.
pub fn defect_from_collapse(
    f_minus: &KineticDensity,
    step: usize,
) -> Result<(DefectMeasure, ScalarField)> {
    let (u, summary, values) = collapse_and_defect(f_minus, step, true)?;
    let m = DefectMeasure {
        sgrid: f_minus.sgrid.clone(),
        vgrid: f_minus.vgrid.clone(),
        step,
        values: values.unwrap_or_default(),
        total_mass: summary.total_mass,
    };
    Ok((m, u))
}

/// Collapse plus defect bookkeeping without materializing the edge values.
pub fn collapse_with_defect_summary(
    f_minus: &KineticDensity,
    step: usize,
) -> Result<(ScalarField, DefectSummary)> {
    let (u, summary, _) = collapse_and_defect(f_minus, step, false)?;
    Ok((u, summary))
}

fn collapse_and_defect(
    f: &KineticDensity,
    step: usize,
    keep: bool,
) -> Result<(ScalarField, DefectSummary, Option<Vec<f64>>)> {
    let u = collapse(f);
    let n = f.sgrid.len();
    let vg = &f.vgrid;
    let dxi = vg.dxi();
    let zero = vg.zero_edge();
    let mut running = vec![0.0; n];
    let mut edge_sum = 0.0;
    let mut values = keep.then(|| {
        let mut v = Vec::with_capacity(n * (vg.n_cells() + 1));
        v.extend(std::iter::repeat_n(0.0, n));
        v
    });
    let mut min_value = 0.0f64;
    let mut min_at = (0usize, 0usize);
    let mut max_at_zero = 0.0f64;
    for (l, column) in f.values.chunks_exact(n).enumerate() {
        let (lo, hi) = vg.cell_bounds(l);
        for j in 0..n {
            running[j] += signed_overlap(u.values()[j], lo, hi) - column[j] * dxi;
        }
        edge_sum += running.iter().sum::<f64>();
        let edge = l + 1;
        for (j, &r) in running.iter().enumerate() {
            if r < min_value {
                min_value = r;
                min_at = (j, edge);
            }
        }
        if edge == zero {
            max_at_zero = running.iter().fold(0.0, |m, r| m.max(r.abs()));
        }
        if let Some(v) = values.as_mut() {
            v.extend_from_slice(&running);
        }
    }
    if min_value < -DEFECT_ABORT_TOLERANCE {
        return Err(Error::NegativeDefect {
            value: min_value,
            step,
            cell: min_at.0,
            edge: min_at.1,
        });
    }
    // rectangle rule over the edges, equal to the drop in midpoint kinetic energy
    let total_mass = edge_sum * dxi * f.sgrid.cell_volume();
    Ok((
        u,
        DefectSummary {
            total_mass,
            min_value,
            max_at_zero,
        },
        values,
    ))
}

/// `sum_j |u_j - v_j| |cell|`.
pub fn l1_distance(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    u.same_grid(v)?;
    Ok(u.values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * u.grid().cell_volume())
}

fn total_variation(values: &[f64]) -> f64 {
    let n = values.len();
    (0..n)
        .map(|j| (values[(j + 1) % n] - values[j]).abs())
        .sum()
}

/// Periodic total variation of the cell-average sequence (1-D only).
pub fn bv_norm(u: &ScalarField) -> Result<f64> {
    if u.grid().dim() != 1 {
        return Err(Error::InvalidGrid(
            "BV norm is only implemented in dimension 1".into(),
        ));
    }
    Ok(total_variation(u.values()))
}

/// Both sides of `|u|_BV = int |chi(u(.), xi)|_BV dxi` on the discrete grids.
pub fn bv_identity_check(u: &ScalarField, vgrid: &VelocityGrid) -> Result<(f64, f64)> {
    let lhs = bv_norm(u)?;
    let f = lift(u, vgrid)?;
    let rhs = (0..vgrid.n_cells())
        .map(|l| vgrid.dxi() * total_variation(f.slice(l)))
        .sum();
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(values: Vec<f64>, dx: f64) -> ScalarField {
        let n = values.len();
        ScalarField::new(SpatialGrid::uniform_1d(n, dx * n as f64).unwrap(), values).unwrap()
    }

    #[test]
    fn maxwellian_examples() {
        assert_eq!(maxwellian_value(2.0, 1.5), 1.0);
        assert_eq!(maxwellian_value(-1.0, -0.5), -1.0);
        assert_eq!(maxwellian_value(0.5, 0.7), 0.0);
        // closed ends
        assert_eq!(maxwellian_value(0.5, 0.5), 1.0);
        assert_eq!(maxwellian_value(0.5, 0.0), 1.0);
        assert_eq!(maxwellian_value(-0.5, -0.5), -1.0);
    }

    #[test]
    fn chi_cell_integral_examples() {
        assert!((chi_cell_integral(0.5, 0.2, 0.4).unwrap() - 0.2).abs() < 1e-15);
        assert!((chi_cell_integral(-0.3, -0.4, -0.2).unwrap() + 0.1).abs() < 1e-15);
        assert_eq!(chi_cell_integral(1.0, 1.0, 1.2).unwrap(), 0.0);
        assert!(chi_cell_integral(0.5, -0.1, 0.1).is_err());
    }

    #[test]
    fn lift_examples() {
        let vg = VelocityGrid::new(-1.0, 1.0, 8).unwrap();
        let f = lift(&field(vec![0.0; 3], 1.0), &vg).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));

        let f = lift(&field(vec![0.5], 1.0), &vg).unwrap();
        let col: Vec<f64> = (0..8).map(|l| f.get(0, l)).collect();
        assert_eq!(col, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);

        let f = lift(&field(vec![0.3], 1.0), &vg).unwrap();
        assert_eq!(f.get(0, 4), 1.0);
        assert!((f.get(0, 5) - 0.2).abs() < 1e-12);
        assert!((0..8)
            .filter(|&l| l != 4 && l != 5)
            .all(|l| f.get(0, l) == 0.0));

        match lift(&field(vec![0.1, 1.5], 1.0), &vg) {
            Err(Error::VelocityRange { value, .. }) => assert_eq!(value, 1.5),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn collapse_examples() {
        let vg = VelocityGrid::new(-1.0, 1.0, 8).unwrap();
        let g = SpatialGrid::uniform_1d(1, 1.0).unwrap();
        let mut vals = vec![0.0; 8];
        vals[4] = 1.0;
        vals[5] = 0.2;
        let f = KineticDensity::new(g.clone(), vg.clone(), vals).unwrap();
        assert!((collapse(&f).values()[0] - 0.3).abs() < 1e-15);
        let z = KineticDensity::zeros(g, vg);
        assert_eq!(collapse(&z).values(), &[0.0]);
    }

    #[test]
    fn density_constructor_rejects_sign_violation() {
        let vg = VelocityGrid::new(-1.0, 1.0, 4).unwrap();
        let g = SpatialGrid::uniform_1d(1, 1.0).unwrap();
        assert!(KineticDensity::new(g.clone(), vg.clone(), vec![0.0, 0.0, -0.5, 0.0]).is_err());
        assert!(KineticDensity::new(g.clone(), vg.clone(), vec![0.0, 0.0, 1.5, 0.0]).is_err());
        assert!(KineticDensity::new(g, vg, vec![-0.5, 0.0, 0.5, 0.0]).is_ok());
    }

    #[test]
    fn defect_vanishes_at_equilibrium() {
        let vg = VelocityGrid::new(-1.0, 1.0, 16).unwrap();
        let u = field(vec![0.3, -0.7, 0.0, 1.0, -0.05], 0.5);
        let f = lift(&u, &vg).unwrap();
        let (m, u2) = defect_from_collapse(&f, 0).unwrap();
        assert!(m.values().iter().all(|v| v.abs() < 1e-15));
        assert!(m.total_mass().abs() < 1e-15);
        assert!(l1_distance(&u, &u2).unwrap() < 1e-15);
        for j in 0..5 {
            assert_eq!(m.get(j, vg.zero_edge()), 0.0);
        }
    }

    #[test]
    fn defect_of_non_equilibrium_column() {
        // f = 1 on [0, 0.25] and on [0.5, 0.75]: u = 0.5, Mf = 1 on [0, 0.5]
        let vg = VelocityGrid::new(-0.25, 1.0, 5).unwrap();
        let g = SpatialGrid::uniform_1d(1, 1.0).unwrap();
        let f = KineticDensity::new(g, vg, vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let (m, u) = defect_from_collapse(&f, 3).unwrap();
        assert!((u.values()[0] - 0.5).abs() < 1e-15);
        let edges: Vec<f64> = (0..=5).map(|e| m.get(0, e)).collect();
        let expect = [0.0, 0.0, 0.0, 0.25, 0.0, 0.0];
        for (a, b) in edges.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{edges:?}");
        }
        // one interior edge of height 0.25, times dxi
        assert!((m.total_mass() - 0.0625).abs() < 1e-15);
        assert_eq!(m.step(), 3);
    }

    #[test]
    fn defect_nonnegative_for_mixed_sign_column() {
        // positive and negative parts in one column
        let vg = VelocityGrid::new(-1.0, 1.0, 8).unwrap();
        let g = SpatialGrid::uniform_1d(1, 1.0).unwrap();
        let f = KineticDensity::new(g, vg, vec![0.0, 0.0, -0.5, -1.0, 1.0, 1.0, 0.3, 0.0]).unwrap();
        let (m, _) = defect_from_collapse(&f, 0).unwrap();
        assert!(m.min_value() >= -1e-15);
        assert!(m.total_mass() > 0.0);
    }

    #[test]
    fn l1_distance_examples() {
        let u = field(vec![0.5, -1.0, 2.0], 0.25);
        assert_eq!(l1_distance(&u, &u).unwrap(), 0.0);
        let z = field(vec![0.0; 8], 0.5);
        let c = field(vec![-0.75; 8], 0.5);
        assert!((l1_distance(&z, &c).unwrap() - 0.75 * 4.0).abs() < 1e-15);
        let a = field(
            (0..64).map(|j| if j < 16 { 1.0 } else { 0.0 }).collect(),
            1.0 / 16.0,
        );
        let b = field(
            (0..64)
                .map(|j| if (8..24).contains(&j) { 1.0 } else { 0.0 })
                .collect(),
            1.0 / 16.0,
        );
        assert!((l1_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let other = field(vec![0.0; 4], 0.25);
        assert!(l1_distance(&u, &other).is_err());
    }

    #[test]
    fn bv_examples() {
        assert_eq!(bv_norm(&field(vec![0.7; 6], 1.0)).unwrap(), 0.0);
        let ind = field(
            (0..16).map(|j| if j < 4 { 1.0 } else { 0.0 }).collect(),
            0.25,
        );
        assert_eq!(bv_norm(&ind).unwrap(), 2.0);
        let stair = field(vec![0.0, 0.25, 0.5, 0.75, 1.0], 1.0);
        assert!((bv_norm(&stair).unwrap() - 2.0).abs() < 1e-15);
        let g2 = SpatialGrid::uniform_2d(2, 1.0).unwrap();
        assert!(bv_norm(&ScalarField::zeros(g2)).is_err());
    }

    #[test]
    fn bv_identity_examples() {
        let vg = VelocityGrid::new(-1.0, 1.0, 8).unwrap();
        assert_eq!(
            bv_identity_check(&field(vec![0.0; 4], 1.0), &vg).unwrap(),
            (0.0, 0.0)
        );
        let ind = field(
            (0..16).map(|j| if j < 4 { 1.0 } else { 0.0 }).collect(),
            0.25,
        );
        let (l, r) = bv_identity_check(&ind, &vg).unwrap();
        assert_eq!((l, r), (2.0, 2.0));
        let two = field(vec![0.5, 0.5, -0.25, -0.25], 1.0);
        let (l, r) = bv_identity_check(&two, &vg).unwrap();
        assert!((l - 1.5).abs() < 1e-15 && (r - 1.5).abs() < 1e-12);
    }
}
