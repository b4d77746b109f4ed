use std::sync::Arc;

use kinetic_blowup::classical::collide;
use kinetic_blowup::relativistic::{energy, invariants_sg, post_collision_rel};
use kinetic_blowup::{
    comparison_solution, ComparisonState, DistributionField, GainOperator, KernelSpec, SphereQuadrature, Vec3,
    VelocityGrid,
};
use proptest::prelude::*;

fn vec_in(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec_in(1.0)
        .prop_filter("nonzero direction", |v| v.norm() > 1e-3)
        .prop_map(Vec3::normalized)
}

fn small_grid() -> Arc<VelocityGrid> {
    Arc::new(VelocityGrid::new(1.0, 4).unwrap())
}

fn field(values: Vec<f64>) -> DistributionField {
    DistributionField::from_values(small_grid(), values).unwrap()
}

fn node_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..2.0f64, small_grid().len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn classical_map_conserves_and_inverts(v in vec_in(10.0), w in vec_in(10.0), n in unit()) {
        let (vp, wp) = collide(v, w, n);
        prop_assert!((vp + wp).max_abs_diff(v + w) <= 1e-12);
        let e = v.norm_sqr() + w.norm_sqr();
        prop_assert!((vp.norm_sqr() + wp.norm_sqr() - e).abs() <= 1e-11 * e.max(1.0));
        let (vb, wb) = collide(vp, wp, n);
        prop_assert!(vb.max_abs_diff(v) <= 1e-12 && wb.max_abs_diff(w) <= 1e-12);
        prop_assert_eq!(collide(v, w, -n), collide(v, w, n));
    }

    #[test]
    fn relativistic_map_conserves_four_momentum(p in vec_in(5.0), q in vec_in(5.0), omega in unit()) {
        let c = post_collision_rel(p, q, omega).unwrap();
        let (pp, qp) = (c.p_post.spatial(), c.q_post.spatial());
        prop_assert!((pp + qp).max_abs_diff(p + q) <= 1e-10);
        prop_assert!((energy(pp) + energy(qp) - energy(p) - energy(q)).abs() <= 1e-10);
        let a = invariants_sg(p, q).unwrap();
        let b = invariants_sg(pp, qp).unwrap();
        prop_assert!((a.s - b.s).abs() <= 1e-10 * a.s);
        prop_assert!((a.s - 4.0 * (1.0 + a.g * a.g)).abs() <= 1e-10 * a.s);
    }

    #[test]
    fn gain_is_monotone(lower in node_values(), extra in node_values()) {
        let upper: Vec<f64> = lower.iter().zip(&extra).map(|(a, b)| a + b).collect();
        let op = GainOperator::new(KernelSpec::ClassicalHardSphere, SphereQuadrature::new(4).unwrap()).unwrap();
        let qf = op.apply_all(&field(upper)).unwrap();
        let qg = op.apply_all(&field(lower)).unwrap();
        for (a, b) in qf.iter().zip(&qg) {
            prop_assert!(*a >= b - 1e-14 * a.max(1.0));
        }
    }

    #[test]
    fn gain_is_quadratic_and_nonnegative(values in node_values(), k in 0u32..4) {
        let c = f64::from(1u32 << k);
        let op = GainOperator::new(KernelSpec::constant_sigma(1.0).unwrap(), SphereQuadrature::new(4).unwrap()).unwrap();
        let f = field(values);
        let q1 = op.apply_all(&f).unwrap();
        let qc = op.apply_all(&f.scaled(c).unwrap()).unwrap();
        for (a, b) in q1.iter().zip(&qc) {
            prop_assert!(*a >= 0.0);
            prop_assert_eq!(*b, c * c * a);
        }
    }

    #[test]
    fn truncated_gain_is_a_constant_lower_bound(values in node_values(), r in 0.3..1.0f64) {
        let op = GainOperator::new(KernelSpec::ClassicalHardSphere, SphereQuadrature::new(4).unwrap()).unwrap();
        let f = field(values);
        let full = op.apply_all(&f).unwrap();
        let q = op.q_r(&f, r).unwrap();
        prop_assert_eq!(q.spread_on_ball(r), 0.0);
        for ((node, &a), &b) in f.grid().nodes().iter().zip(q.values()).zip(&full) {
            if node.center.norm() <= r {
                prop_assert!(a <= b);
            } else {
                prop_assert_eq!(a, 0.0);
            }
        }
    }

    #[test]
    fn comparison_solution_solves_its_ode(rho0 in 0.1..10.0f64, delta in 0.1..10.0f64, frac in 0.0..0.9f64) {
        let cs = ComparisonState::new(rho0, delta).unwrap();
        let t = frac * cs.blowup_time;
        let h = 1e-6 * cs.blowup_time;
        let rho = comparison_solution(&cs, t).unwrap();
        let deriv = (comparison_solution(&cs, t + h).unwrap() - comparison_solution(&cs, (t - h).max(0.0)).unwrap())
            / (t + h - (t - h).max(0.0));
        prop_assert!((deriv - delta * rho * rho).abs() <= 1e-4 * delta * rho * rho);
    }

    #[test]
    fn interpolation_stays_within_node_range(values in node_values(), u in vec_in(1.2)) {
        let f = field(values.clone());
        let hi = values.iter().copied().fold(0.0, f64::max);
        let x = f.interpolate(u);
        prop_assert!((0.0..=hi).contains(&x));
    }
}

#[test]
fn sphere_rule_integrates_low_degree_polynomials() {
    let sq = SphereQuadrature::new(8).unwrap();
    let four_pi = 4.0 * std::f64::consts::PI;
    assert!((sq.integrate(|_| 1.0) - four_pi).abs() < 1e-13);
    assert!((sq.integrate(|n| n.z * n.z) - four_pi / 3.0).abs() < 1e-13);
    assert!((sq.integrate(|n| n.x * n.x * n.y * n.y) - four_pi / 15.0).abs() < 1e-13);
    assert!(sq.integrate(|n| n.x * n.y * n.z).abs() < 1e-13);
}
