use proptest::prelude::*;

use kinetic_tc::flux::{Polynomial, PolynomialFlux, SeparableFlux};
use kinetic_tc::grid::{ScalarField, SpatialGrid, VelocityGrid};
use kinetic_tc::harness::{parse_config, serialize_config};
use kinetic_tc::homogeneous::{run_homogeneous, tc_step};
use kinetic_tc::inhomogeneous::sl_step;
use kinetic_tc::kinetic::{bv_identity_check, collapse, l1_distance, lift};
use kinetic_tc::path::{delta_z, generate, DriverPath, PathSpec, TimePartition};

const TOL: f64 = 1e-12;

fn field(values: Vec<f64>, length: f64) -> ScalarField {
    let n = values.len();
    ScalarField::new(SpatialGrid::uniform_1d(n, length).unwrap(), values).unwrap()
}

fn data(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn flux() -> impl Strategy<Value = PolynomialFlux> {
    (-1.0f64..1.0, -1.0f64..1.0, -0.5f64..0.5).prop_map(|(c1, c2, c3)| {
        PolynomialFlux::new(vec![Polynomial::new(vec![0.0, c1, c2, c3])]).unwrap()
    })
}

fn increment() -> impl Strategy<Value = f64> {
    prop_oneof![-0.05f64..0.05, -1.0f64..1.0]
}

fn vgrid() -> VelocityGrid {
    VelocityGrid::symmetric(1.0, 40).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lift_then_collapse_is_identity(v in data(24)) {
        let u = field(v, 1.0);
        let back = collapse(&lift(&u, &vgrid()).unwrap());
        prop_assert!(l1_distance(&back, &u).unwrap() <= TOL);
    }

    #[test]
    fn lift_obeys_sign_and_bound(v in data(16)) {
        let f = lift(&field(v, 1.0), &vgrid()).unwrap();
        prop_assert!(f.first_invariant_violation(TOL).is_none());
    }

    #[test]
    fn step_conserves_mass_and_bounds(v in data(32), a in flux(), dz in increment()) {
        let u = field(v, 1.0);
        let (un, m) = tc_step(&u, &a, &vgrid(), &[dz], 0).unwrap();
        prop_assert!(m.min_value() >= -TOL);
        prop_assert!((un.mass() - u.mass()).abs() <= TOL * (1.0 + u.l1_norm()));
        prop_assert!(un.max() <= u.max() + TOL);
        prop_assert!(un.min() >= u.min() - TOL);
    }

    #[test]
    fn step_contracts_l1(v in data(32), w in data(32), a in flux(), dz in increment()) {
        let (u, v) = (field(v, 1.0), field(w, 1.0));
        let (un, _) = tc_step(&u, &a, &vgrid(), &[dz], 0).unwrap();
        let (vn, _) = tc_step(&v, &a, &vgrid(), &[dz], 0).unwrap();
        prop_assert!(l1_distance(&un, &vn).unwrap() <= l1_distance(&u, &v).unwrap() + TOL);
    }

    #[test]
    fn cumulative_defect_within_budget(v in data(32), a in flux(), seed in 0u64..1000) {
        let u0 = field(v, 1.0);
        let spec = PathSpec::Brownian { seed, oversampling: 1, dim: 1 };
        let z = generate(&spec, 1.0, 21).unwrap();
        let tr = run_homogeneous(&u0, &a, &vgrid(), &z, &TimePartition::new(1.0, 20).unwrap(), &[])
            .unwrap();
        prop_assert!(tr.cumulative_defect() <= tr.defect_budget + 1e-8);
        prop_assert!(tr.steps.iter().all(|s| s.min_defect >= -TOL));
    }

    #[test]
    fn bv_identity_holds(v in data(20)) {
        let (lhs, rhs) = bv_identity_check(&field(v, 1.0), &vgrid()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0));
    }

    #[test]
    fn increments_are_additive(seed in 0u64..1000, s in 0.0f64..1.0, m in 0.0f64..1.0, t in 0.0f64..1.0) {
        let mut p = [s, m, t];
        p.sort_by(f64::total_cmp);
        let z = generate(&PathSpec::Brownian { seed, oversampling: 1, dim: 2 }, 1.0, 33).unwrap();
        let a = z.increment(p[0], p[1]).unwrap();
        let b = z.increment(p[1], p[2]).unwrap();
        let c = z.increment(p[0], p[2]).unwrap();
        for k in 0..2 {
            prop_assert!((a[k] + b[k] - c[k]).abs() <= TOL);
        }
    }

    #[test]
    fn delta_z_at_most_doubles_under_refinement(seed in 0u64..1000, k in 1usize..6) {
        let z = generate(&PathSpec::Brownian { seed, oversampling: 2, dim: 1 }, 1.0, 129).unwrap();
        let coarse = delta_z(&z, &TimePartition::new(1.0, 1 << k).unwrap()).unwrap();
        let fine = delta_z(&z, &TimePartition::new(1.0, 1 << (k + 1)).unwrap()).unwrap();
        // each fine increment splits into two pieces of a coarse one
        prop_assert!(fine <= 2.0 * coarse + TOL);
    }

    #[test]
    fn sl_step_keeps_defect_nonnegative(v in data(16), seed in 0u64..1000) {
        let grid = SpatialGrid::uniform_1d(16, std::f64::consts::TAU).unwrap();
        let u = ScalarField::new(grid, v).unwrap();
        let a = SeparableFlux::sine_speed_burgers(1.0, 0.5, 1).unwrap();
        let z = generate(&PathSpec::Brownian { seed, oversampling: 4, dim: 1 }, 0.05, 9).unwrap();
        let vg = VelocityGrid::symmetric(1.5, 24).unwrap();
        let (un, m) = sl_step(&u, &a, &vg, &z, 0.0, 0.05).unwrap();
        prop_assert!(m.min_value() >= -TOL);
        prop_assert!(un.values().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn config_round_trip(nx in 1usize..512, half_nxi in 1usize..256, slope in -2.0f64..2.0, t in 0.1f64..4.0) {
        let text = format!(
            "[flux]\npreset = \"burgers\"\n[initial]\nkind = \"sine\"\namplitude = 0.5\n\
             [path]\nkind = \"deterministic\"\nslope = [{slope:?}]\n\
             [grid]\nnx = {nx}\nnxi = {}\n[time]\nt_final = {t:?}\ndts = [{:?}]\n",
            2 * half_nxi,
            t / 4.0
        );
        let cfg = parse_config(&text).unwrap();
        let again = parse_config(&serialize_config(&cfg).unwrap()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(serialize_config(&again).unwrap(), serialize_config(&cfg).unwrap());
    }
}

#[test]
fn constant_path_is_identity_for_driver_restriction() {
    let z = DriverPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![0.0]]).unwrap();
    assert_eq!(z.increment(0.2, 0.9).unwrap(), vec![0.0]);
}
