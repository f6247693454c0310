use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use serde_json::json;
use varexp_core::exponent::{build_exponent, ExponentField, ExponentSpec};
use varexp_core::grid::{make_domain, whitney_decomposition, GridDomain, Shape, TensorField, WhitneyStats, WHITNEY_UPPER};
use varexp_core::rigidity::{korn_report, lusin_truncate, rigidity_report};
use varexp_core::rotgeo::rotation_2d;
use varexp_core::scenario::apply_override;
use varexp_core::varnorm::{modular, norm};

fn square(res: usize) -> Arc<GridDomain> {
    make_domain(Shape::unit_square(), res).unwrap()
}

fn ramp(d: &Arc<GridDomain>, from: f64, to: f64) -> ExponentField {
    build_exponent(&ExponentSpec::LinearRamp { from, to, axis: 0 }, d).unwrap()
}

fn trig_scalar(d: &Arc<GridDomain>, a: [f64; 4]) -> TensorField {
    TensorField::scalar_fn(d, move |x| a[0] + a[1] * (3.0 * x[0] + a[2]).sin() + a[3] * x[1] * x[1])
}

fn trig_vector(d: &Arc<GridDomain>, a: [f64; 4], eps: f64) -> TensorField {
    TensorField::vector_fn(d, move |x| {
        [
            x[0] + eps * (a[0] * x[1] + a[1]).sin(),
            x[1] + eps * (a[2] * x[0] * x[1]).cos() + eps * a[3] * x[0] * x[0],
            0.0,
        ]
    })
}

fn coeffs() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-2.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_is_a_norm(a in coeffs(), b in coeffs(), c in -20.0f64..20.0, from in 1.05f64..2.0, to in 2.0f64..3.5) {
        let d = square(17);
        let p = ramp(&d, from, to);
        let f = trig_scalar(&d, a);
        let g = trig_scalar(&d, b);
        let nf = norm(&f, &p).unwrap();
        let ng = norm(&g, &p).unwrap();
        prop_assert!((norm(&f.scale(c), &p).unwrap() - c.abs() * nf).abs() <= 1e-8 * (c.abs() * nf).max(1e-300));
        prop_assert!(norm(&f.add(&g).unwrap(), &p).unwrap() <= (nf + ng) * (1.0 + 1e-9));
    }

    #[test]
    fn modular_and_norm_are_monotone(a in coeffs(), t in 0.0f64..1.0) {
        let d = square(17);
        let p = ramp(&d, 1.3, 2.7);
        let g = trig_scalar(&d, a);
        let f = g.scale(t);
        prop_assert!(modular(&f, &p).unwrap() <= modular(&g, &p).unwrap() * (1.0 + 1e-12));
        prop_assert!(norm(&f, &p).unwrap() <= norm(&g, &p).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn whitney_on_random_boxes(x0 in -1.0f64..1.0, y0 in -1.0f64..1.0, w in 0.3f64..2.0, h in 0.3f64..2.0) {
        let d = make_domain(Shape::Rectangle { lo: vec![x0, y0], hi: vec![x0 + w, y0 + h] }, 17).unwrap();
        let cubes = whitney_decomposition(&d);
        let stats = WhitneyStats::compute(&d, &cubes);
        let sqrt_n = 2f64.sqrt();
        prop_assert!(stats.covers_inside);
        prop_assert!(stats.overlap <= 16);
        prop_assert!(stats.min_ratio >= sqrt_n && stats.max_ratio <= WHITNEY_UPPER * sqrt_n, "{:?}", stats);
    }

    #[test]
    fn rigidity_ratio_ignores_rigid_premotions(a in coeffs(), theta in -3.0f64..3.0, shift in prop::array::uniform2(-1.0f64..1.0)) {
        let d = square(17);
        let p = ramp(&d, 1.4, 2.0);
        let u = trig_vector(&d, a, 0.1);
        let q = rotation_2d(theta);
        let mut values = u.values().to_vec();
        for (i, v) in values.chunks_mut(2).enumerate() {
            if d.is_active(i) {
                let (a0, a1) = (v[0], v[1]);
                v[0] = q[(0, 0)] * a0 + q[(0, 1)] * a1 + shift[0];
                v[1] = q[(1, 0)] * a0 + q[(1, 1)] * a1 + shift[1];
            }
        }
        let moved = TensorField::from_values(&d, 1, values).unwrap();
        let r0 = rigidity_report(&u, &p).unwrap();
        let r1 = rigidity_report(&moved, &p).unwrap();
        prop_assert!((r0.lhs_norm - r1.lhs_norm).abs() <= 1e-9 * r0.lhs_norm.max(1e-12));
        prop_assert!((r0.rhs_norm - r1.rhs_norm).abs() <= 1e-9 * r0.rhs_norm.max(1e-12));
    }

    #[test]
    fn korn_ratio_ignores_infinitesimal_rotations(a in coeffs(), s in -3.0f64..3.0, shift in prop::array::uniform2(-1.0f64..1.0)) {
        let d = square(17);
        let p = ramp(&d, 1.4, 2.0);
        let u = trig_vector(&d, a, 0.3);
        let skew = DMatrix::from_row_slice(2, 2, &[0.0, -s, s, 0.0]);
        let w = TensorField::vector_fn(&d, move |x| {
            [skew[(0, 1)] * x[1] + shift[0], skew[(1, 0)] * x[0] + shift[1], 0.0]
        });
        let r0 = korn_report(&u, &p).unwrap();
        let r1 = korn_report(&u.add(&w).unwrap(), &p).unwrap();
        prop_assert!((r0.lhs_norm - r1.lhs_norm).abs() <= 1e-9 * r0.lhs_norm.max(1e-12));
        prop_assert!((r0.rhs_norm - r1.rhs_norm).abs() <= 1e-9 * r0.rhs_norm.max(1e-12));
    }

    #[test]
    fn lusin_keeps_the_good_set(a in coeffs(), lambda in 0.5f64..6.0) {
        let d = square(17);
        let u = trig_vector(&d, a, 1.0);
        let out = lusin_truncate(&u, lambda).unwrap();
        prop_assert!(out.report.inclusion_holds);
        for i in 0..d.len() {
            if out.good[i] {
                prop_assert_eq!(u.node(i), out.v.node(i));
            }
            prop_assert!(!(out.changed[i] && out.good[i]));
        }
        if !out.report.degenerate {
            prop_assert!(out.report.lipschitz_ratio.is_finite());
        }
    }

    #[test]
    fn overrides_set_exactly_one_value(v in -1e6f64..1e6, key in "[a-z]{1,6}") {
        let mut tree = json!({"sweep": {"eps": [0.1]}, "other": 1});
        apply_override(&mut tree, &format!("sweep.{key}={v}")).unwrap();
        prop_assert_eq!(tree["sweep"][key.as_str()].as_f64(), Some(v));
        prop_assert_eq!(&tree["other"], &json!(1));
    }
}
