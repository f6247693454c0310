use std::sync::Arc;

use nalgebra::DMatrix;

use super::*;
use crate::exponent::{build_exponent, ExponentSpec};
use crate::grid::{gradient, make_domain, Shape};
use crate::rng::SeededRng;
use crate::rotgeo::{rotation_2d, rotation_3d};

fn square(res: usize) -> Arc<GridDomain> {
    make_domain(Shape::unit_square(), res).unwrap()
}

fn ramp(d: &Arc<GridDomain>) -> ExponentField {
    build_exponent(
        &ExponentSpec::LinearRamp {
            from: 1.3,
            to: 2.0,
            axis: 0,
        },
        d,
    )
    .unwrap()
}

fn linear_map(d: &Arc<GridDomain>, a: &DMatrix<f64>) -> TensorField {
    let a = a.clone();
    TensorField::vector_fn(d, move |x| {
        [a[(0, 0)] * x[0] + a[(0, 1)] * x[1], a[(1, 0)] * x[0] + a[(1, 1)] * x[1], 0.0]
    })
}

fn spec_with(d: &Arc<GridDomain>, h: TensorField, density: Density) -> EnergySpec {
    EnergySpec::new(ramp(d), h, density, vec![1e-1, 1e-2, 1e-3]).unwrap()
}

#[test]
fn spec_validation() {
    let d = square(9);
    let p = ramp(&d);
    let h = TensorField::zeros(&d, 1);
    assert!(EnergySpec::new(p.clone(), h.clone(), Density::GDist, vec![]).is_err());
    assert!(EnergySpec::new(p.clone(), h.clone(), Density::GDist, vec![0.1, 0.2]).is_err());
    assert!(EnergySpec::new(p.clone(), h.clone(), Density::GDist, vec![0.1, -0.2]).is_err());
    let high = ExponentField::constant(&d, 2.5).unwrap();
    assert!(matches!(
        EnergySpec::new(high, h.clone(), Density::GDist, vec![0.1]),
        Err(Error::ExponentRange(_))
    ));
    let one = ExponentField::constant(&d, 1.0).unwrap();
    assert!(EnergySpec::new(one, h, Density::GDist, vec![0.1]).is_err());
}

#[test]
fn zero_field_has_zero_energy() {
    let d = square(17);
    let spec = spec_with(&d, TensorField::zeros(&d, 1), Density::GDist);
    let u = TensorField::zeros(&d, 1);
    assert_eq!(energy_nonlinear(&u, 0.1, &spec).unwrap(), 0.0);
    assert_eq!(energy_linear(&u, &spec).unwrap(), 0.0);
    let c = compactness_check(&u, 0.1, &spec).unwrap();
    assert_eq!(c.lhs, 0.0);
    assert_eq!(c.rhs, 1.0);
}

#[test]
fn boundary_violation_rejected() {
    let d = square(17);
    let spec = spec_with(&d, TensorField::zeros(&d, 1), Density::GDist);
    let u = TensorField::vector_fn(&d, |_| [1e-6, 0.0, 0.0]);
    assert!(matches!(
        energy_nonlinear(&u, 0.1, &spec),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn skew_energy_decays_quadratically() {
    let d = square(17);
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let u = linear_map(&d, &s);
    let spec = spec_with(&d, u.clone(), Density::GDist);
    let e: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| energy_nonlinear(&u, eps, &spec).unwrap())
        .collect();
    // dist(I + εS, SO(2)) = √2(√(1+ε²) − 1) ≈ ε²/√2, so F_ε ≈ ε²|Ω|/4.
    for (k, eps) in [1e-1f64, 1e-2, 1e-3].iter().enumerate() {
        let exact = ((1.0 + eps * eps).sqrt() - 1.0).powi(2) / (eps * eps);
        assert!((e[k] - exact).abs() <= 1e-9 * exact.max(1e-12), "{e:?}");
    }
    assert!(e[1] / e[0] < 0.011 && e[2] / e[1] < 0.011);
    assert!(energy_linear(&u, &spec).unwrap() < 1e-28);
}

#[test]
fn symmetric_affine_energy_limit() {
    let d = square(17);
    let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.2]);
    let u = linear_map(&d, &a);
    let spec = spec_with(&d, u.clone(), Density::GDist);
    let limit = 0.5 * a.norm_squared() * spec.measure();
    assert!((spec.measure() - 1.0).abs() < 1e-12);
    assert!((energy_linear(&u, &spec).unwrap() - limit).abs() < 1e-14);
    // I + εA is symmetric positive definite, so dist = ε|A| and F_ε is exact.
    for eps in [1e-1, 1e-2, 1e-3] {
        let e = energy_nonlinear(&u, eps, &spec).unwrap();
        assert!((e - limit).abs() < 1e-10 * limit, "{eps} {e} {limit}");
    }
    let rough = TensorField::vector_fn(&d, |x| [x[0] * x[0], (3.0 * x[0] * x[1]).sin(), 0.0]);
    let spec = spec_with(&d, rough.clone(), Density::GDist);
    let lin = energy_linear(&rough, &spec).unwrap();
    let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| (energy_nonlinear(&rough, eps, &spec).unwrap() - lin).abs())
        .collect();
    assert!(errs[1] < 0.2 * errs[0] && errs[2] < 0.2 * errs[1], "{errs:?}");
}

#[test]
fn linear_energy_is_quadratic() {
    let d = square(17);
    let u = TensorField::vector_fn(&d, |x| [(x[0] * 2.0).sin() * x[1], x[0] * x[0] - x[1], 0.0]);
    let u2 = u.scale(2.0);
    let e1 = energy_linear(&u, &spec_with(&d, u.clone(), Density::GDist)).unwrap();
    let e2 = energy_linear(&u2, &spec_with(&d, u2.clone(), Density::GDist)).unwrap();
    assert!((e2 - 4.0 * e1).abs() <= 1e-10 * e2);
}

fn random_free_direction(spec: &EnergySpec, rng: &mut SeededRng) -> TensorField {
    let d = spec.domain();
    let mut v = TensorField::zeros(d, 1);
    for i in 0..d.len() {
        if spec.free_mask()[i] {
            for x in v.node_mut(i) {
                *x = rng.normal();
            }
        }
    }
    v
}

fn gradient_check(spec: &EnergySpec, u: &TensorField, eps: f64, seed: u64) -> f64 {
    let (_, grad) = energy_nonlinear_gradient(u, eps, spec).unwrap();
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v = random_free_direction(spec, &mut rng);
        let analytic: f64 = grad.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
        let t = 1e-6;
        let plus = energy_nonlinear(&u.axpby(1.0, &v, t).unwrap(), eps, spec).unwrap();
        let minus = energy_nonlinear(&u.axpby(1.0, &v, -t).unwrap(), eps, spec).unwrap();
        let fd = (plus - minus) / (2.0 * t);
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(1e-12));
    }
    worst
}

#[test]
fn analytic_gradient_matches_differences() {
    let d = square(33);
    let u = TensorField::vector_fn(&d, |x| [(3.0 * x[1]).sin() + x[0] * x[1], (2.0 * x[0]).cos() * x[1], 0.0]);
    for density in [Density::GDist, Density::QuadraticWell] {
        let spec = spec_with(&d, u.clone(), density);
        assert!(gradient_check(&spec, &u, 0.1, 1) <= 1e-5);
    }
    // Large strains exercise the t > 1 branch of g.
    let big = u.scale(8.0);
    let spec = spec_with(&d, big.clone(), Density::GDist);
    let mut beyond = 0;
    let grad = gradient(&big).unwrap();
    for i in 0..d.len() {
        let mut f = grad.matrix_at(i);
        f += DMatrix::identity(2, 2);
        if d.is_active(i) && dist_so(&f) > 1.0 {
            beyond += 1;
        }
    }
    assert!(beyond > 10);
    assert!(gradient_check(&spec, &big, 1.0, 2) <= 1e-5);
}

#[test]
fn frame_indifference_and_lower_bound() {
    let mut rng = SeededRng::new(9);
    for _ in 0..50 {
        let f2 = DMatrix::from_fn(2, 2, |_, _| rng.normal());
        let r2 = rotation_2d(rng.range(-3.0, 3.0));
        let p = rng.range(1.1, 2.0);
        for dens in [Density::GDist, Density::QuadraticWell] {
            let a = dens.evaluate(p, &f2);
            let b = dens.evaluate(p, &(&r2 * &f2));
            assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
        let f3 = DMatrix::from_fn(3, 3, |_, _| rng.normal());
        let r3 = rotation_3d([rng.normal(), rng.normal(), rng.normal()]);
        let a = Density::GDist.evaluate(p, &f3);
        let b = Density::GDist.evaluate(p, &(&r3 * &f3));
        assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }
    assert_eq!(Density::GDist.evaluate(1.5, &rotation_2d(0.4)), 0.0);

    let d = square(17);
    let u = TensorField::vector_fn(&d, |x| [3.0 * x[0] * x[1], -(x[0] * 4.0).sin(), 0.0]);
    let spec = spec_with(&d, u.clone(), Density::GDist);
    assert_eq!(lower_bound_defect(&u, 0.5, &spec).unwrap(), 0.0);
    let spec = spec_with(&d, u.clone(), Density::QuadraticWell);
    assert!(lower_bound_defect(&u, 0.5, &spec).unwrap() >= 0.0);
}

#[test]
fn minimizers_with_trivial_data() {
    let d = square(17);
    let zero = TensorField::zeros(&d, 1);
    let spec = spec_with(&d, zero.clone(), Density::GDist);
    let (u, trace) = minimize_nonlinear(&spec, 0.1, &zero).unwrap();
    assert_eq!(u.sup_norm(), 0.0);
    assert_eq!(trace.status, MinimizeStatus::Converged);
    assert_eq!(minimize_linear(&spec).unwrap().sup_norm(), 0.0);
}

#[test]
fn linear_minimizer_reproduces_affine_data() {
    let d = square(17);
    for a in [
        DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.2, -0.1, -0.1, 0.4]),
    ] {
        let exact = linear_map(&d, &a);
        // Boundary data exact on the Dirichlet nodes, wrong inside.
        let mut h = exact.clone();
        for i in 0..d.len() {
            if !d.is_dirichlet(i) {
                h.node_mut(i).iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let spec = spec_with(&d, h, Density::GDist);
        let u = minimize_linear(&spec).unwrap();
        assert!(u.sub(&exact).unwrap().sup_norm() < 1e-8);
    }
}

#[test]
fn rigid_boundary_data_gives_vanishing_energy() {
    let d = square(17);
    let eps = 0.05;
    let r0 = rotation_2d(eps * 0.8);
    let h = TensorField::vector_fn(&d, {
        let r0 = r0.clone();
        move |x| {
            [
                (r0[(0, 0)] * x[0] + r0[(0, 1)] * x[1] - x[0]) / eps,
                (r0[(1, 0)] * x[0] + r0[(1, 1)] * x[1] - x[1]) / eps,
                0.0,
            ]
        }
    });
    let mut init = h.clone();
    for i in 0..d.len() {
        if !d.is_dirichlet(i) {
            init.node_mut(i).iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let spec = spec_with(&d, h, Density::GDist);
    let start = energy_nonlinear(&init, eps, &spec).unwrap();
    let (u, trace) = minimize_nonlinear(&spec, eps, &init).unwrap();
    let end = energy_nonlinear(&u, eps, &spec).unwrap();
    assert!(end <= start);
    assert!(end < 1e-12, "{end} {:?}", trace.status);
    assert!(trace.energies.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn boundary_term_scales_quadratically() {
    let d = make_domain(Shape::Lshape, 17).unwrap();
    let h = TensorField::vector_fn(&d, |x| [0.1 * x[1] + 0.2, 0.1 * x[0], 0.0]);
    let s1 = EnergySpec::new(ramp(&d), h.clone(), Density::GDist, vec![0.1]).unwrap();
    let s2 = EnergySpec::new(ramp(&d), h.scale(2.0), Density::GDist, vec![0.1]).unwrap();
    let b1 = s1.boundary_integral();
    let b2 = s2.boundary_integral();
    assert!(((b2 * b2) - 4.0 * (b1 * b1)).abs() <= 1e-12 * b2 * b2);
    // Perimeter of the L-shape is 4; constant |h| = 0.5 gives 2.
    let c = TensorField::vector_fn(&d, |_| [0.3, 0.4, 0.0]);
    let s3 = EnergySpec::new(ramp(&d), c, Density::GDist, vec![0.1]).unwrap();
    assert!((s3.boundary_integral() - 2.0).abs() < 1e-12, "{}", s3.boundary_integral());
    let c1 = compactness_check(&h, 0.1, &s1).unwrap();
    let c2 = compactness_check(&h.scale(2.0), 0.1, &s2).unwrap();
    assert!((c2.boundary_term - 4.0 * c1.boundary_term).abs() <= 1e-12 * c2.boundary_term);
}

#[test]
fn gamma_experiment_with_zero_data() {
    let d = square(9);
    let spec = spec_with(&d, TensorField::zeros(&d, 1), Density::GDist);
    let table = gamma_convergence_experiment(&spec).unwrap();
    assert_eq!(table.rows.len(), 3);
    for r in &table.rows {
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.wp_dist, 0.0);
        assert_eq!(r.flag, "ok");
    }
    let csv = table.to_csv();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn gamma_experiment_skew_data_converges_to_rigid_state() {
    let d = square(9);
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, -0.3, 0.0]);
    let h = linear_map(&d, &s);
    let spec = spec_with(&d, h, Density::GDist);
    let table = gamma_convergence_experiment(&spec).unwrap();
    assert!(table.limit_energy < 1e-20);
    let gaps: Vec<f64> = table.rows.iter().map(|r| r.gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 1e-6);
    assert!(!table.failed());
}
