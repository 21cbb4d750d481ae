use std::f64::consts::PI;

use anisoeq_core::quadrature::*;
use anisoeq_core::shape::Shape;
use nalgebra::{Matrix3, Rotation3, Vector3};

/// ∫_{S²} ω₁^{2a} ω₂^{2b} ω₃^{2c} dH² = 2 Γ(a+½)Γ(b+½)Γ(c+½) / Γ(a+b+c+3/2).
fn moment(a: u32, b: u32, c: u32) -> f64 {
    fn half_gamma(k: u32) -> f64 {
        // Γ(k + ½) = (2k-1)!! √π / 2^k
        (1..=k).fold(PI.sqrt(), |acc, j| acc * (j as f64 - 0.5))
    }
    2.0 * half_gamma(a) * half_gamma(b) * half_gamma(c) / half_gamma(a + b + c + 1)
}

#[test]
fn gauss_legendre_is_exact_for_polynomials() {
    let r = gauss_legendre(10, -1.0, 2.0).unwrap();
    for k in 0..20 {
        let exact = (2f64.powi(k + 1) - (-1f64).powi(k + 1)) / (k + 1) as f64;
        assert!((r.integrate(|x| x.powi(k)) - exact).abs() < 1e-12 * exact.abs().max(1.0), "k={k}");
    }
    assert!(gauss_legendre(0, 0.0, 1.0).is_err());
}

#[test]
fn sphere_rule_integrates_monomials() {
    let rule = build_sphere_rule(16, 32).unwrap();
    for (a, b, c) in [(0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 1, 1), (2, 0, 1), (3, 2, 0), (0, 4, 3)] {
        let got = integrate_sphere(
            |w| w[0].powi(2 * a as i32) * w[1].powi(2 * b as i32) * w[2].powi(2 * c as i32),
            &rule,
        )
        .unwrap();
        assert!((got - moment(a, b, c)).abs() < 1e-13, "({a},{b},{c})");
    }
    assert!(integrate_sphere(|w| w[0] * w[1].powi(3), &rule).unwrap().abs() < 1e-14);
    assert!(build_sphere_rule(2, 32).is_err());
    assert!(build_sphere_rule(16, 9).is_err());
}

#[test]
fn moments_have_the_textbook_values() {
    assert!((moment(0, 0, 0) - 4.0 * PI).abs() < 1e-14);
    assert!((moment(0, 0, 1) - 4.0 * PI / 3.0).abs() < 1e-14);
    assert!((moment(0, 0, 2) - 4.0 * PI / 5.0).abs() < 1e-14);
}

/// ∫_{S²} (Mω·ω)^{-3/2} dH² = 4π / √det M.
fn inverse_power_integral(rule: &SphereQuadrature, m: &Matrix3<f64>) -> f64 {
    integrate_sphere(|w| (m * w).dot(w).powf(-1.5), rule).unwrap()
}

#[test]
fn graded_rule_resolves_a_needle_ellipsoid() {
    for r in [1e-1f64, 1e-2, 1e-4, 1e-6] {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, r));
        let exact = 4.0 * PI / r.sqrt();
        let graded = build_graded_sphere_rule(&Vector3::z(), grading_levels(r), &build_sphere_rule(64, 128).unwrap())
            .unwrap();
        let got = inverse_power_integral(&graded, &m);
        assert!(((got - exact) / exact).abs() < 1e-10, "r={r}: {got} vs {exact}");
    }
}

#[test]
fn product_rule_fails_where_grading_is_needed() {
    let r: f64 = 1e-4;
    let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, r));
    let exact = 4.0 * PI / r.sqrt();
    let product = build_sphere_rule(64, 128).unwrap();
    let err = ((inverse_power_integral(&product, &m) - exact) / exact).abs();
    assert!(err > 1e-3, "product rule unexpectedly accurate: {err}");
}

#[test]
fn graded_rule_follows_a_tilted_axis() {
    let q = Rotation3::from_euler_angles(0.7, -0.4, 1.9).into_inner();
    let r: f64 = 1e-5;
    let m = q * Matrix3::from_diagonal(&Vector3::new(2.0, 0.5, r)) * q.transpose();
    let exact = 4.0 * PI / (2.0 * 0.5 * r).sqrt();
    let graded =
        build_graded_sphere_rule(&q.column(2).into_owned(), grading_levels(r / 0.5), &build_sphere_rule(64, 128).unwrap())
            .unwrap();
    let got = inverse_power_integral(&graded, &m);
    assert!(((got - exact) / exact).abs() < 1e-9, "{got} vs {exact}");
}

#[test]
fn graded_rule_converges_under_refinement() {
    let r: f64 = 1e-4;
    let m = Matrix3::from_diagonal(&Vector3::new(1.0, 0.3, r));
    let base = build_sphere_rule(32, 64).unwrap();
    let coarse = build_graded_sphere_rule(&Vector3::z(), grading_levels(r), &base).unwrap();
    let fine = coarse.refined();
    assert!(fine.len() > coarse.len());
    let exact = 4.0 * PI / (0.3 * r).sqrt();
    let e0 = ((inverse_power_integral(&coarse, &m) - exact) / exact).abs();
    let e1 = ((inverse_power_integral(&fine, &m) - exact) / exact).abs();
    assert!(e1 <= e0.max(1e-13), "{e0} -> {e1}");
    assert!(e1 < 1e-10);
}

#[test]
fn grading_depth_grows_with_eccentricity() {
    let levels: Vec<usize> = [1.0, 1e-2, 1e-4, 1e-8].iter().map(|&r| grading_levels(r)).collect();
    assert!(levels.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(grading_levels(0.0), DEGENERATE_LEVELS);
}

#[test]
fn frame_for_axis_is_a_proper_rotation() {
    for axis in [Vector3::x(), Vector3::z(), -Vector3::z(), Vector3::new(1.0, 2.0, -3.0)] {
        let f = frame_for_axis(&axis).unwrap();
        assert!((f.transpose() * f - Matrix3::identity()).norm() < 1e-14);
        assert!((f.determinant() - 1.0).abs() < 1e-14);
        assert!((f.column(2) - axis.normalize()).norm() < 1e-14);
    }
    assert!(frame_for_axis(&Vector3::zeros()).is_err());
}

#[test]
fn ellipsoid_volume_rule_moments() {
    let q = Rotation3::from_euler_angles(0.2, 0.9, -0.5).into_inner();
    let shape = Shape::new([2.0, 1.0, 0.5], q).unwrap();
    let rule = ellipsoid_volume_rule(&shape, 8, &build_sphere_rule(8, 16).unwrap()).unwrap();
    let vol = 4.0 / 3.0 * PI * 2.0 * 1.0 * 0.5;
    assert!((rule.total_weight() - vol).abs() < 1e-12);
    // ∫|x|² dx = |E| (a₁² + a₂² + a₃²) / 5
    let second = rule.integrate(|x| x.norm_squared());
    assert!((second - vol * (4.0 + 1.0 + 0.25) / 5.0).abs() < 1e-12);
    assert!(ellipsoid_volume_rule(&Shape::axis_aligned([1.0, 1.0, 0.0]).unwrap(), 8, &build_sphere_rule(8, 16).unwrap()).is_err());
}

#[test]
fn ellipse_rule_is_the_projected_ball_law() {
    let rule = ellipse_area_rule(2.0, 0.5, &Matrix3::identity(), 8).unwrap();
    assert!((rule.total_weight() - 1.0).abs() < 1e-13);
    // the projection of the uniform ellipsoid law keeps the in-plane second moments aᵢ²/5
    assert!((rule.integrate(|x| x[0] * x[0]) - 4.0 / 5.0).abs() < 1e-13);
    assert!((rule.integrate(|x| x[1] * x[1]) - 0.25 / 5.0).abs() < 1e-13);
    assert!(rule.integrate(|x| x[2].abs()) < 1e-15);
    assert!(ellipse_area_rule(0.0, 1.0, &Matrix3::identity(), 8).is_err());
}
