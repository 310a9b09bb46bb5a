use serde::Serialize;

use crate::characteristics::{flow_diagnostics, CharacteristicFlow, Direction};
use crate::error::Result;
use crate::flux::{PolynomialFlux, SeparableFlux};
use crate::grid::{ScalarField, SpatialGrid, VelocityGrid};
use crate::homogeneous::{run_homogeneous, tc_step};
use crate::inhomogeneous::run_inhomogeneous;
use crate::initial::InitialData;
use crate::kinetic::{bv_identity_check, collapse, l1_distance, lift};
use crate::oracles::{bgk_run, PeriodicRiemann};
use crate::path::{delta_z, generate, DriverPath, PathSpec, TimePartition};

const TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

fn rough_field(n: usize, seed: u64) -> Result<ScalarField> {
    let grid = SpatialGrid::uniform_1d(n, 1.0)?;
    // small deterministic generator, good enough for fixed test data
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let values = (0..n)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 1.6 - 0.8
        })
        .collect();
    ScalarField::new(grid, values)
}

fn kinetic_core() -> Result<Vec<CheckResult>> {
    let vgrid = VelocityGrid::symmetric(1.0, 64)?;
    let u = rough_field(64, 1)?;
    let round_trip = l1_distance(&collapse(&lift(&u, &vgrid)?), &u)?;
    let (lhs, rhs) = bv_identity_check(&u, &vgrid)?;
    Ok(vec![
        check(
            "lift/collapse round trip",
            round_trip <= TOL,
            format!("{round_trip:e}"),
        ),
        check(
            "BV identity",
            (lhs - rhs).abs() <= 1e-10 * lhs.max(1.0),
            format!("{lhs} vs {rhs}"),
        ),
    ])
}

fn homogeneous() -> Result<Vec<CheckResult>> {
    let vgrid = VelocityGrid::symmetric(1.0, 64)?;
    let flux = PolynomialFlux::burgers(1)?;
    let u = rough_field(64, 2)?;
    let v = rough_field(64, 3)?;
    let mut worst_defect = 0.0f64;
    let mut worst_mass = 0.0f64;
    let mut worst_max = 0.0f64;
    let mut worst_contraction = 0.0f64;
    for dz in [0.003, -0.01, 0.02, 0.5] {
        let (un, m) = tc_step(&u, &flux, &vgrid, &[dz], 0)?;
        let (vn, _) = tc_step(&v, &flux, &vgrid, &[dz], 0)?;
        worst_defect = worst_defect.min(m.min_value());
        worst_mass = worst_mass.max((un.mass() - u.mass()).abs());
        worst_max = worst_max.max(un.max() - u.max()).max(u.min() - un.min());
        worst_contraction = worst_contraction.max(l1_distance(&un, &vn)? - l1_distance(&u, &v)?);
    }
    let z = generate(
        &PathSpec::Zigzag {
            period: 0.2,
            amplitude: 0.3,
            dim: 1,
        },
        1.0,
        201,
    )?;
    let p = TimePartition::new(1.0, 20)?;
    let u0 = InitialData::indicator(0.25, 0.75, 1.0).sample(&SpatialGrid::uniform_1d(64, 1.0)?)?;
    let tr = run_homogeneous(&u0, &flux, &vgrid, &z, &p, &[])?;
    let budget = 0.5 * u0.l2_norm().powi(2);
    Ok(vec![
        check(
            "defect nonnegative",
            worst_defect >= -TOL,
            format!("{worst_defect:e}"),
        ),
        check(
            "mass conserved",
            worst_mass <= TOL,
            format!("{worst_mass:e}"),
        ),
        check(
            "maximum principle",
            worst_max <= TOL,
            format!("{worst_max:e}"),
        ),
        check(
            "L1 contraction",
            worst_contraction <= TOL,
            format!("{worst_contraction:e}"),
        ),
        check(
            "cumulative defect within budget",
            tr.cumulative_defect() <= budget + 1e-8,
            format!("{} <= {budget}", tr.cumulative_defect()),
        ),
    ])
}

fn driver_paths() -> Result<Vec<CheckResult>> {
    let z = generate(
        &PathSpec::Brownian {
            seed: 5,
            oversampling: 4,
            dim: 1,
        },
        1.0,
        65,
    )?;
    let a = z.increment(0.1, 0.4)?[0] + z.increment(0.4, 0.9)?[0];
    let b = z.increment(0.1, 0.9)?[0];
    let coarse = delta_z(&z, &TimePartition::new(1.0, 4)?)?;
    let fine = delta_z(&z, &TimePartition::new(1.0, 16)?)?;
    Ok(vec![
        check(
            "increment additivity",
            (a - b).abs() <= TOL,
            format!("{:e}", (a - b).abs()),
        ),
        check(
            "delta_z under refinement",
            fine <= 2.0 * coarse + TOL,
            format!("{fine} <= 2 * {coarse}"),
        ),
    ])
}

fn inhomogeneous() -> Result<Vec<CheckResult>> {
    let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1)?;
    let z = generate(
        &PathSpec::Brownian {
            seed: 9,
            oversampling: 4,
            dim: 1,
        },
        0.2,
        41,
    )?;
    let flow = CharacteristicFlow::new(&flux, &z, 1e-3, Direction::Backward)?;
    let points: Vec<_> = (0..8)
        .flat_map(|i| {
            let x = 0.8 * i as f64;
            [([x, 0.0], 0.7), ([x, 0.0], -0.4)]
        })
        .collect();
    let d = flow_diagnostics(&flow, &points, 0.2, 0.2)?;
    let grid = SpatialGrid::uniform_1d(32, std::f64::consts::TAU)?;
    let u0 = InitialData::Sine { amplitude: 0.5 }.sample(&grid)?;
    let vgrid = VelocityGrid::symmetric(1.0, 32)?;
    let flat = DriverPath::new(vec![0.0, 0.2], vec![vec![0.0], vec![0.0]])?;
    let tr = run_inhomogeneous(&u0, &flux, &vgrid, &flat, &TimePartition::new(0.2, 4)?, &[])?;
    let still = l1_distance(&tr.final_u, &u0)?;
    Ok(vec![
        check(
            "flow volume preserving",
            d.max_det_deviation <= 1e-6,
            format!("{:e}", d.max_det_deviation),
        ),
        check(
            "flow sign preserving",
            d.sign_violations == 0,
            format!("{}", d.sign_violations),
        ),
        check(
            "flow invertible",
            d.max_inverse_defect <= 1e-8,
            format!("{:e}", d.max_inverse_defect),
        ),
        check(
            "constant path is the identity",
            still <= 1e-12,
            format!("{still:e}"),
        ),
    ])
}

fn oracles() -> Result<Vec<CheckResult>> {
    let grid = SpatialGrid::uniform_1d(128, 2.0)?;
    let vgrid = VelocityGrid::symmetric(1.0, 64)?;
    let flux = PolynomialFlux::burgers(1)?;
    let u0 = InitialData::Riemann {
        u_l: 1.0,
        u_r: 0.0,
        x0: 1.0,
    }
    .sample(&grid)?;
    let r = PeriodicRiemann {
        u_l: 1.0,
        u_r: 0.0,
        x0: 1.0,
        length: 2.0,
    };
    let exact = l1_distance(&r.field(&grid, 0.0)?, &u0)?;
    let z = DriverPath::new(vec![0.0, 0.25], vec![vec![0.0], vec![0.25]])?;
    let p = TimePartition::new(0.25, 5)?;
    let tc = run_homogeneous(&u0, &flux, &vgrid, &z, &p, &[])?.final_u;
    let bgk = bgk_run(&u0, &flux, &vgrid, &z, &p, 1e-6 * p.dt())?;
    let gap = l1_distance(&tc, &bgk)?;
    Ok(vec![
        check(
            "Riemann oracle matches data at t = 0",
            exact <= 1e-12,
            format!("{exact:e}"),
        ),
        check(
            "BGK limit equals the scheme",
            gap <= 1e-12,
            format!("{gap:e}"),
        ),
    ])
}

/// Runs the invariant checks of every module.
pub fn selftest() -> Result<Vec<CheckResult>> {
    let mut out = kinetic_core()?;
    out.extend(driver_paths()?);
    out.extend(homogeneous()?);
    out.extend(inhomogeneous()?);
    out.extend(oracles()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let results = selftest().unwrap();
        assert!(results.len() >= 10);
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
    }
}
