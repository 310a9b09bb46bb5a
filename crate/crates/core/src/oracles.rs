//! Independent solutions and alternative schemes for validation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::HomogeneousFlux;
use crate::grid::{ScalarField, SpatialGrid, VelocityGrid};
use crate::homogeneous::stream_homogeneous;
use crate::kinetic::{collapse, l1_distance, lift};
use crate::path::{delta_z, DriverPath, TimePartition};

/// Entropy solution of the Burgers Riemann problem with the jump at 0.
pub fn exact_riemann_burgers(u_l: f64, u_r: f64, x: f64, t: f64) -> f64 {
    if u_l == u_r {
        return u_l;
    }
    if t <= 0.0 {
        return if x < 0.0 { u_l } else { u_r };
    }
    if u_l > u_r {
        if x < 0.5 * (u_l + u_r) * t {
            u_l
        } else {
            u_r
        }
    } else {
        (x / t).clamp(u_l, u_r)
    }
}

/// Points where the Riemann solution is not smooth.
fn riemann_breaks(u_l: f64, u_r: f64, t: f64) -> Vec<f64> {
    if u_l > u_r {
        vec![0.5 * (u_l + u_r) * t]
    } else if u_l < u_r {
        vec![u_l * t, u_r * t]
    } else {
        Vec::new()
    }
}

/// Burgers evolution of periodic Riemann data (`u_l` on `[0, x0)`, `u_r` on
/// `[x0, L)`): one Riemann problem at `x0` and the reversed one at the wrap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicRiemann {
    pub u_l: f64,
    pub u_r: f64,
    pub x0: f64,
    pub length: f64,
}

impl PeriodicRiemann {
    /// Checks that the two wave fans stay apart up to time `t`.
    pub fn check_time(&self, t: f64) -> Result<()> {
        let reach = self.u_l.abs().max(self.u_r.abs()) * t;
        let room = 0.5 * self.x0.min(self.length - self.x0);
        if !(self.x0 > 0.0 && self.x0 < self.length) || reach >= room {
            return Err(Error::param(
                "t",
                format!(
                    "waves interact before t = {t}; the oracle covers non-interacting fans only"
                ),
            ));
        }
        Ok(())
    }

    /// Pointwise value for `x` in `[0, L)`.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let x = x.rem_euclid(self.length);
        let left_mid = 0.5 * self.x0;
        let right_mid = 0.5 * (self.x0 + self.length);
        if x >= left_mid && x < right_mid {
            exact_riemann_burgers(self.u_l, self.u_r, x - self.x0, t)
        } else {
            let d = if x >= right_mid { x - self.length } else { x };
            exact_riemann_burgers(self.u_r, self.u_l, d, t)
        }
    }

    /// Exact average over `[a, b]` inside `[0, L]`: Simpson on each smooth piece.
    pub fn average(&self, a: f64, b: f64, t: f64) -> f64 {
        let mut cuts = vec![a, b, 0.5 * self.x0, 0.5 * (self.x0 + self.length)];
        cuts.extend(
            riemann_breaks(self.u_l, self.u_r, t)
                .iter()
                .map(|d| self.x0 + d),
        );
        for d in riemann_breaks(self.u_r, self.u_l, t) {
            cuts.push(d);
            cuts.push(self.length + d);
        }
        cuts.retain(|&c| c >= a && c <= b);
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            if q <= p {
                continue;
            }
            // nudge inside so each piece sees its own one-sided limits
            let eps = 1e-12 * (q - p);
            let fp = self.value(p + eps, t);
            let fm = self.value(0.5 * (p + q), t);
            let fq = self.value(q - eps, t);
            total += (q - p) / 6.0 * (fp + 4.0 * fm + fq);
        }
        total / (b - a)
    }

    /// Field of exact cell averages at time `t`.
    pub fn field(&self, grid: &SpatialGrid, t: f64) -> Result<ScalarField> {
        if grid.dim() != 1 || (grid.lengths()[0] - self.length).abs() > 1e-12 * self.length {
            return Err(Error::GridMismatch(
                "Riemann oracle needs the matching 1-D grid".into(),
            ));
        }
        self.check_time(t)?;
        let h = grid.cell_size(0);
        let values = (0..grid.len())
            .map(|j| self.average(j as f64 * h, (j + 1) as f64 * h, t))
            .collect();
        ScalarField::new(grid.clone(), values)
    }
}

impl PeriodicRiemann {
    /// L1 error of `u` over the half of the domain centred on the jump at
    /// `x0`, where the solution is `exact_riemann_burgers(x - x0, t)`.
    pub fn l1_error_near_jump(&self, u: &ScalarField, t: f64) -> Result<f64> {
        let exact = self.field(u.grid(), t)?;
        let g = u.grid();
        let (lo, hi) = (self.x0 - 0.25 * self.length, self.x0 + 0.25 * self.length);
        Ok(u.values()
            .iter()
            .zip(exact.values())
            .enumerate()
            .filter(|(j, _)| {
                let c = g.center(*j)[0];
                c >= lo && c < hi
            })
            .map(|(_, (a, b))| (a - b).abs())
            .sum::<f64>()
            * g.cell_volume())
    }
}

/// Minimizer of a convex flux on `[lo, hi]`, by bisection on the speed.
fn flux_minimizer(flux: &dyn HomogeneousFlux, lo: f64, hi: f64) -> f64 {
    if flux.speed(0, lo) >= 0.0 {
        return lo;
    }
    if flux.speed(0, hi) <= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if flux.speed(0, m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a <= f64::EPSILON * b.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Godunov flux of a convex `A` with minimizer `xi_star`.
pub fn godunov_flux(flux: &dyn HomogeneousFlux, xi_star: f64, u_l: f64, u_r: f64) -> f64 {
    flux.flux(0, u_l.max(xi_star))
        .max(flux.flux(0, u_r.min(xi_star)))
}

/// First-order Godunov scheme for a convex 1-D flux up to `t_final`, with
/// the time step `dt` shortened so that it divides `t_final`.
pub fn godunov_run(
    u0: &ScalarField,
    flux: &dyn HomogeneousFlux,
    t_final: f64,
    dt: f64,
) -> Result<ScalarField> {
    if u0.grid().dim() != 1 || flux.dim() != 1 {
        return Err(Error::param(
            "godunov",
            "the Godunov oracle is one-dimensional",
        ));
    }
    if !(t_final >= 0.0 && dt > 0.0) {
        return Err(Error::param(
            "dt",
            format!("need T >= 0 and dt > 0, got {t_final}, {dt}"),
        ));
    }
    let (lo, hi) = (u0.min(), u0.max());
    let samples = 1025;
    let mut prev = flux.speed(0, lo);
    let mut max_speed = prev.abs();
    for i in 1..samples {
        let xi = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        let a = flux.speed(0, xi);
        if a < prev - 1e-12 {
            return Err(Error::InvalidFlux(
                "Godunov oracle needs a convex flux".into(),
            ));
        }
        max_speed = max_speed.max(a.abs());
        prev = a;
    }
    if t_final == 0.0 {
        return Ok(u0.clone());
    }
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let dx = u0.grid().cell_size(0);
    if max_speed * dt > dx {
        return Err(Error::Cfl {
            courant: max_speed * dt,
            dx,
        });
    }
    let xi_star = flux_minimizer(flux, lo, hi);
    let n = u0.grid().len();
    let mut u = u0.values().to_vec();
    let mut face = vec![0.0; n];
    let ratio = dt / dx;
    for _ in 0..steps {
        // face[j] sits between cells j and j + 1
        for j in 0..n {
            face[j] = godunov_flux(flux, xi_star, u[j], u[(j + 1) % n]);
        }
        for j in 0..n {
            u[j] -= ratio * (face[j] - face[(j + n - 1) % n]);
        }
    }
    ScalarField::new(u0.grid().clone(), u)
}

/// Godunov solution at pseudo-time `z(T) - z(0)` for a nondecreasing scalar path.
pub fn time_change_reference(
    u0: &ScalarField,
    flux: &dyn HomogeneousFlux,
    z: &DriverPath,
    t_final: f64,
    dt: f64,
) -> Result<ScalarField> {
    if z.dim() != 1 {
        return Err(Error::InvalidPath("time change needs a scalar path".into()));
    }
    let mut last = z.sample(0)[0];
    for i in 1..z.len() {
        if z.times()[i] > t_final + 1e-12 {
            break;
        }
        let v = z.sample(i)[0];
        if v < last {
            return Err(Error::InvalidPath(format!(
                "path decreases at t = {}; the time change needs a monotone path",
                z.times()[i]
            )));
        }
        last = v;
    }
    let tau = z.increment(0.0, t_final)?[0];
    godunov_run(u0, flux, tau, dt)
}

/// BGK relaxation by splitting: stream, then relax toward the Maxwellian
/// with factor `exp(-dt / epsilon)`.
pub fn bgk_run(
    u0: &ScalarField,
    flux: &dyn HomogeneousFlux,
    vgrid: &VelocityGrid,
    z: &DriverPath,
    p: &TimePartition,
    epsilon: f64,
) -> Result<ScalarField> {
    if !(epsilon > 0.0) {
        return Err(Error::param(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    let keep = (-p.dt() / epsilon).exp();
    let mut f = lift(u0, vgrid)?;
    for k in 0..p.steps() {
        let dz = z.increment(p.time(k), p.time(k + 1))?;
        f = stream_homogeneous(&f, flux, &dz)?;
        let eq = lift(&collapse(&f), vgrid)?;
        if keep == 0.0 {
            f = eq;
        } else {
            let values = f
                .values()
                .iter()
                .zip(eq.values())
                .map(|(a, b)| keep * a + (1.0 - keep) * b)
                .collect();
            f = crate::kinetic::KineticDensity::from_parts_unchecked(
                f.sgrid().clone(),
                vgrid.clone(),
                values,
            );
        }
    }
    Ok(collapse(&f))
}

/// Least-squares slope of `log y` against `log x`; `None` with fewer than
/// two positive pairs.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyParams {
    pub t_final: f64,
    /// Time steps to study, usually coarsest first.
    pub dts: Vec<f64>,
    pub dt_ref: f64,
    /// Times at which errors are measured; empty means `[T]`.
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub dt: f64,
    pub delta_z: f64,
    pub l1_error: f64,
    /// Slope fitted over this row and all earlier ones.
    pub slope_cum: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub slope: Option<f64>,
}

impl StudyTable {
    pub fn from_errors(dts: &[f64], delta_zs: &[f64], errors: &[f64]) -> Self {
        let rows = (0..errors.len())
            .map(|i| StudyRow {
                dt: dts[i],
                delta_z: delta_zs[i],
                l1_error: errors[i],
                slope_cum: log_log_slope(&delta_zs[..=i], &errors[..=i]),
            })
            .collect();
        Self {
            rows,
            slope: log_log_slope(delta_zs, errors),
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.l1_error).collect()
    }
}

/// Compares runs at each `dt` against a reference run on a refinement of
/// every partition. `runner(p, times)` returns the fields at `times`.
pub fn self_convergence_study<F>(
    runner: F,
    z: &DriverPath,
    params: &StudyParams,
) -> Result<StudyTable>
where
    F: Fn(&TimePartition, &[f64]) -> Result<Vec<ScalarField>>,
{
    let reference = TimePartition::from_dt(params.t_final, params.dt_ref)?;
    let times = if params.snapshot_times.is_empty() {
        vec![params.t_final]
    } else {
        params.snapshot_times.clone()
    };
    let partitions = params
        .dts
        .iter()
        .map(|&dt| {
            let p = TimePartition::from_dt(params.t_final, dt)?;
            if !p.is_refined_by(&reference) {
                return Err(Error::NonNestedPartition(format!(
                    "dt = {dt} is not a multiple of the reference dt = {}",
                    params.dt_ref
                )));
            }
            if let Some(t) = times.iter().find(|&&t| p.index_of(t).is_none()) {
                return Err(Error::NonNestedPartition(format!(
                    "snapshot time {t} is not a point of the partition with dt = {dt}"
                )));
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let ref_fields = runner(&reference, &times)?;
    let mut errors = Vec::with_capacity(partitions.len());
    let mut dzs = Vec::with_capacity(partitions.len());
    for p in &partitions {
        let fields = runner(p, &times)?;
        if fields.len() != ref_fields.len() {
            return Err(Error::param(
                "runner",
                "returned the wrong number of snapshots",
            ));
        }
        let mut worst = 0.0f64;
        for (a, b) in fields.iter().zip(&ref_fields) {
            worst = worst.max(l1_distance(a, b)?);
        }
        log::info!("dt = {:.6e}: sup L1 error {worst:.6e}", p.dt());
        errors.push(worst);
        dzs.push(delta_z(z, p)?);
    }
    let dts: Vec<f64> = partitions.iter().map(TimePartition::dt).collect();
    Ok(StudyTable::from_errors(&dts, &dzs, &errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::PolynomialFlux;
    use crate::homogeneous::run_homogeneous;
    use crate::initial::InitialData;
    use crate::path::{generate, PathSpec};

    #[test]
    fn riemann_examples() {
        assert_eq!(exact_riemann_burgers(1.0, 0.0, 0.24, 0.5), 1.0);
        assert_eq!(exact_riemann_burgers(1.0, 0.0, 0.26, 0.5), 0.0);
        assert_eq!(exact_riemann_burgers(0.0, 1.0, 0.2, 0.5), 0.4);
        assert_eq!(exact_riemann_burgers(0.0, 1.0, -0.2, 0.5), 0.0);
        assert_eq!(exact_riemann_burgers(0.0, 1.0, 0.7, 0.5), 1.0);
        assert_eq!(exact_riemann_burgers(0.3, 0.3, -5.0, 2.0), 0.3);
    }

    #[test]
    fn periodic_riemann_averages_conserve_mass() {
        let pr = PeriodicRiemann {
            u_l: 1.0,
            u_r: 0.0,
            x0: 2.0,
            length: 4.0,
        };
        let g = SpatialGrid::uniform_1d(64, 4.0).unwrap();
        for t in [0.0, 0.3, 0.5] {
            let u = pr.field(&g, t).unwrap();
            assert!((u.mass() - 2.0).abs() < 1e-12, "t = {t}: {}", u.mass());
        }
        // shock at 2.25, wrap rarefaction on [0, 0.5]
        let u = pr.field(&g, 0.5).unwrap();
        assert_eq!(u.values()[35], 1.0);
        assert_eq!(u.values()[36], 0.0);
        assert!((pr.average(0.0, 0.5, 0.5) - 0.5).abs() < 1e-12);
        assert!(pr.field(&g, 2.0).is_err());
    }

    #[test]
    fn godunov_flux_examples() {
        let b = PolynomialFlux::burgers(1).unwrap();
        assert_eq!(godunov_flux(&b, 0.0, 1.0, 0.0), 0.5);
        assert_eq!(godunov_flux(&b, 0.0, 0.0, 1.0), 0.0);
        assert_eq!(godunov_flux(&b, 0.0, -1.0, 1.0), 0.0);
        assert_eq!(godunov_flux(&b, 0.0, -1.0, 0.5), 0.0);
        assert_eq!(godunov_flux(&b, 0.0, 0.5, -1.0), 0.5);
    }

    #[test]
    fn godunov_keeps_constants_and_mass() {
        let g = SpatialGrid::uniform_1d(50, 1.0).unwrap();
        let b = PolynomialFlux::burgers(1).unwrap();
        let c = ScalarField::constant(g.clone(), 0.4);
        assert_eq!(godunov_run(&c, &b, 0.5, 0.01).unwrap(), c);
        let u0 = InitialData::Sine { amplitude: 0.9 }.sample(&g).unwrap();
        let u = godunov_run(&u0, &b, 0.5, 0.01).unwrap();
        assert!((u.mass() - u0.mass()).abs() < 1e-14);
        assert!(u.max() <= u0.max() + 1e-15 && u.min() >= u0.min() - 1e-15);
        assert!(matches!(
            godunov_run(&u0, &b, 0.5, 0.05),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn godunov_rejects_non_convex_flux() {
        let g = SpatialGrid::uniform_1d(10, 1.0).unwrap();
        let cubic =
            PolynomialFlux::new(vec![crate::flux::Polynomial::new(vec![0.0, 0.0, 0.0, 1.0])])
                .unwrap();
        let u0 = InitialData::Sine { amplitude: 0.5 }.sample(&g).unwrap();
        assert!(matches!(
            godunov_run(&u0, &cubic, 0.1, 0.01),
            Err(Error::InvalidFlux(_))
        ));
    }

    #[test]
    fn bgk_limits() {
        let g = SpatialGrid::uniform_1d(64, 2.0).unwrap();
        let vg = VelocityGrid::symmetric(1.0, 32).unwrap();
        let b = PolynomialFlux::burgers(1).unwrap();
        let u0 = InitialData::Riemann {
            u_l: 0.8,
            u_r: -0.3,
            x0: 1.0,
        }
        .sample(&g)
        .unwrap();
        let z = generate(&PathSpec::Deterministic { slope: vec![1.0] }, 0.5, 2).unwrap();
        let p = TimePartition::new(0.5, 10).unwrap();
        let stiff = bgk_run(&u0, &b, &vg, &z, &p, 1e-300).unwrap();
        let tc = run_homogeneous(&u0, &b, &vg, &z, &p, &[]).unwrap();
        assert_eq!(stiff, tc.final_u);
        // no relaxation: collapse of the free-streamed equilibrium
        let one = TimePartition::new(0.5, 1).unwrap();
        let free = bgk_run(&u0, &b, &vg, &z, &one, f64::INFINITY).unwrap();
        let streamed = collapse(&stream_homogeneous(&lift(&u0, &vg).unwrap(), &b, &[0.5]).unwrap());
        assert!(l1_distance(&free, &streamed).unwrap() < 1e-12);
        let c = ScalarField::constant(g, 0.25);
        let out = bgk_run(&c, &b, &vg, &z, &p, 0.1).unwrap();
        assert!(out.values().iter().all(|v| (v - 0.25).abs() < 1e-14));
        assert!(bgk_run(&u0, &b, &vg, &z, &p, 0.0).is_err());
    }

    #[test]
    fn slope_examples() {
        let s = log_log_slope(&[0.1, 0.05, 0.025], &[0.1, 0.05, 0.025]).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(log_log_slope(&[0.1], &[0.2]).is_none());
        let t = StudyTable::from_errors(&[1.0, 0.5], &[0.1, 0.05], &[0.4, 0.2]);
        assert_eq!(t.rows[0].slope_cum, None);
        assert!((t.rows[1].slope_cum.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn study_checks_nesting_and_reference_identity() {
        let g = SpatialGrid::uniform_1d(32, 2.0).unwrap();
        let vg = VelocityGrid::symmetric(1.0, 16).unwrap();
        let b = PolynomialFlux::burgers(1).unwrap();
        let u0 = InitialData::indicator(0.5, 1.0, 1.0).sample(&g).unwrap();
        let z = generate(&PathSpec::Deterministic { slope: vec![1.0] }, 0.5, 2).unwrap();
        let runner = |p: &TimePartition, times: &[f64]| {
            let tr = run_homogeneous(&u0, &b, &vg, &z, p, times)?;
            Ok(tr.snapshots.into_iter().map(|s| s.u).collect())
        };
        let same = StudyParams {
            t_final: 0.5,
            dts: vec![0.05],
            dt_ref: 0.05,
            snapshot_times: vec![],
        };
        let t = self_convergence_study(runner, &z, &same).unwrap();
        assert_eq!(t.rows[0].l1_error, 0.0);
        let bad = StudyParams {
            t_final: 0.5,
            dts: vec![0.05],
            dt_ref: 0.02,
            snapshot_times: vec![],
        };
        assert!(matches!(
            self_convergence_study(runner, &z, &bad),
            Err(Error::NonNestedPartition(_))
        ));
    }
}
