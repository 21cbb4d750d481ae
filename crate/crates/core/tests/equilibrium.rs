use std::f64::consts::PI;

use anisoeq_core::equilibrium::*;
use anisoeq_core::harmonics::{PolynomialTerm, Profile};
use anisoeq_core::quadrature::{build_sphere_rule, gauss_legendre, SphereQuadrature};
use anisoeq_core::shape::{ShapeMatrix, BALL_VOLUME};
use anisoeq_core::Error;
use nalgebra::{Matrix2, Matrix3, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn term(exps: [u32; 3], coef: f64) -> PolynomialTerm {
    PolynomialTerm { exps, coef }
}

fn quartic() -> Profile {
    let c = 0.5 * (PI / 2.0).sqrt();
    Profile::from_polynomial(&[term([0, 0, 0], 4.0 * c), term([0, 0, 2], 3.0 * c), term([0, 0, 4], 3.0 * c)], 8)
        .unwrap()
}

fn quadratic(a: [f64; 3]) -> Profile {
    Profile::from_polynomial(&[term([2, 0, 0], a[0]), term([0, 2, 0], a[1]), term([0, 0, 2], a[2])], 4).unwrap()
}

fn mild() -> Profile {
    Profile::from_polynomial(&[term([0, 0, 0], 1.0), term([2, 0, 0], 0.3)], 4).unwrap()
}

fn rule() -> SphereQuadrature {
    build_sphere_rule(64, 128).unwrap()
}

fn random_pd(rng: &mut ChaCha8Rng) -> ShapeMatrix {
    let q = Rotation3::from_euler_angles(rng.gen_range(-3.0..3.0), rng.gen_range(-1.5..1.5), rng.gen_range(-3.0..3.0))
        .into_inner();
    let d = Matrix3::from_diagonal(&Vector3::new(
        rng.gen_range(0.3..3.0),
        rng.gen_range(0.3..3.0),
        rng.gen_range(0.3..3.0),
    ));
    ShapeMatrix::new(q * d * q.transpose()).unwrap()
}

#[test]
fn coulomb_objective_closed_forms() {
    let p = Profile::coulomb();
    let r = rule();
    let id = ShapeMatrix::identity();
    assert!((g_value(&p, &id, &r).unwrap() - 6.0).abs() < 1e-12);
    assert!((f_value(&p, &id, &r).unwrap() - 9.0).abs() < 1e-12);
    assert!(f_gradient(&p, &id, &r).unwrap().abs().max() < 1e-12);
    assert!((t_min(&p, &id, &r).unwrap() - 1.0).abs() < 1e-12);
    for t in [0.5, 1.0, 2.0, 4.0] {
        let f = f_value(&p, &id.scaled(t), &r).unwrap();
        assert!((f - (6.0 / t.sqrt() + 3.0 * t)).abs() < 1e-12);
    }
    let stretched = ShapeMatrix::new(Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0))).unwrap();
    let grad = f_gradient(&p, &stretched, &r).unwrap();
    assert!(grad[(0, 0)].abs() > 0.1);
}

#[test]
fn quartic_g_matches_sphere_moments() {
    // ∫(5 − 9ω₃² + 4ω₃⁴) = 20π − 12π + 16π/5
    let integral = 20.0 * PI - 12.0 * PI + 16.0 * PI / 5.0;
    let expected = (2.0 * PI).sqrt() / BALL_VOLUME * integral;
    let g = g_value(&quartic(), &ShapeMatrix::identity(), &rule()).unwrap();
    assert!((g - expected).abs() < 1e-12);
}

#[test]
fn homogeneity_and_ray_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = mild();
    let r = rule();
    for _ in 0..5 {
        let m = random_pd(&mut rng);
        let g = g_value(&p, &m, &r).unwrap();
        assert!((g_value(&p, &m.scaled(4.0), &r).unwrap() - g / 2.0).abs() < 1e-12 * g);
        let t = t_min(&p, &m, &r).unwrap();
        assert!((t_min(&p, &m.scaled(3.0), &r).unwrap() - t / 3.0).abs() < 1e-12 * t);
        let h = m.trace();
        let best = f_value(&p, &m.scaled(t), &r).unwrap();
        let closed = 3.0 / 2f64.powf(2.0 / 3.0) * g.powf(2.0 / 3.0) * h.powf(1.0 / 3.0);
        assert!((best - closed).abs() < 1e-10 * closed);
        for s in [0.8, 0.95, 1.05, 1.3] {
            assert!(f_value(&p, &m.scaled(t * s), &r).unwrap() >= best);
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let p = quartic();
    let r = rule();
    for _ in 0..20 {
        let m = random_pd(&mut rng);
        let grad = f_gradient(&p, &m, &r).unwrap();
        let coords = m.to_coords();
        for k in 0..6 {
            let h = 1e-5;
            let mut plus = coords;
            let mut minus = coords;
            plus[k] += h;
            minus[k] -= h;
            let fd = (f_value(&p, &ShapeMatrix::from_coords(&plus), &r).unwrap()
                - f_value(&p, &ShapeMatrix::from_coords(&minus), &r).unwrap())
                / (2.0 * h);
            let (i, j) = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)][k];
            let analytic = if i == j { grad[(i, j)] } else { 2.0 * grad[(i, j)] };
            assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0), "k={k}: {fd} vs {analytic}");
        }
        let res = el_residual(&p, &m, &r).unwrap();
        assert!((res - grad.abs().max()).abs() < 1e-13);
    }
}

#[test]
fn objective_rejects_indefinite_matrices() {
    let m = ShapeMatrix::new(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -0.1))).unwrap();
    assert!(matches!(g_value(&Profile::coulomb(), &m, &rule()), Err(Error::NotPositiveDefinite(_))));
}

#[test]
fn residual_matrix_conjugates_under_joint_rotation() {
    // the EL residual matrix transforms as Q R Qᵀ, so f and the spectrum of R are invariant
    let p = mild();
    let q = Rotation3::from_euler_angles(0.4, 1.0, -0.6).into_inner();
    let m = ShapeMatrix::new(Matrix3::from_diagonal(&Vector3::new(1.5, 1.0, 0.7))).unwrap();
    let r = build_sphere_rule(96, 192).unwrap();
    let a = f_gradient(&p, &m, &r).unwrap();
    let b = f_gradient(&p.rotated(&q), &m.conjugated(&q), &r).unwrap();
    assert!((b - q * a * q.transpose()).abs().max() < 1e-10);
    let fa = f_value(&p, &m, &r).unwrap();
    let fb = f_value(&p.rotated(&q), &m.conjugated(&q), &r).unwrap();
    assert!((fa - fb).abs() < 1e-10);
    let diagonal = el_residual(&p, &m, &r).unwrap();
    assert!((diagonal - a.abs().max()).abs() < 1e-14);
}

#[test]
fn coulomb_solves_to_the_unit_ball() {
    let eq = solve_equilibrium(&Profile::coulomb(), &SolverConfig::default()).unwrap();
    for a in eq.shape.semiaxes() {
        assert!((a - 1.0).abs() < 1e-12);
    }
    assert!(eq.residual <= 1e-10);
    assert!((eq.f / 5.0 - 1.8).abs() < 1e-12);
}

#[test]
fn direct_solve_requires_a_positive_transform() {
    let err = solve_equilibrium(&quartic(), &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Hypothesis(_)));
}

#[test]
fn rotated_profile_gives_conjugated_minimiser() {
    let cfg = SolverConfig::default();
    let p = mild();
    let q = Rotation3::from_euler_angles(0.3, -0.8, 1.2).into_inner();
    let a = solve_equilibrium(&p, &cfg).unwrap();
    let b = solve_equilibrium(&p.rotated(&q), &cfg).unwrap();
    let expected = q * a.shape_matrix.matrix() * q.transpose();
    assert!((b.shape_matrix.matrix() - expected).abs().max() < 1e-8);
    for (x, y) in a.shape.semiaxes().iter().zip(b.shape.semiaxes()) {
        assert!((x - y).abs() < 1e-8);
    }
    // 1 + 0.3x₁² is symmetric about e₁, which is the minor axis
    let [a1, a2, a3] = a.shape.semiaxes();
    assert!((a1 - a2).abs() < 1e-10 && a3 < a2);
    assert!(a.shape.minor_axis()[0].abs() > 1.0 - 1e-12);
}

/// EL system of an axisymmetric shape diag(A, A, C) for Ψ̂ = 2√(2/π)(1 − ω₃²),
/// reduced to integrals in c = ω₃.
fn spheroid_system(a: f64, c: f64) -> Vector2<f64> {
    let gl = gauss_legendre(400, -1.0, 1.0).unwrap();
    let s = |x: f64| a * (1.0 - x * x) + c * x * x;
    let e11 = 1.5 * gl.integrate(|x| (1.0 - x * x).powi(2) / s(x).powf(1.5));
    let e33 = 3.0 * gl.integrate(|x| (1.0 - x * x) * x * x / s(x).powf(1.5));
    Vector2::new(e11 - 1.0, e33 - 1.0)
}

fn spheroid_oracle() -> (f64, f64) {
    let mut x = Vector2::new(1.5, 0.3);
    for _ in 0..50 {
        let f = spheroid_system(x[0], x[1]);
        let h = 1e-7;
        let ja = (spheroid_system(x[0] + h, x[1]) - spheroid_system(x[0] - h, x[1])) / (2.0 * h);
        let jc = (spheroid_system(x[0], x[1] + h) - spheroid_system(x[0], x[1] - h)) / (2.0 * h);
        let j = Matrix2::from_columns(&[ja, jc]);
        x -= j.lu().solve(&f).unwrap();
        if f.abs().max() < 1e-14 {
            break;
        }
    }
    (x[0].sqrt(), x[1].sqrt())
}

#[test]
fn quadratic_112_is_a_full_spheroid() {
    let cfg = SolverConfig::default();
    let result = solve(&quadratic([1.0, 1.0, 2.0]), &cfg).unwrap();
    assert_eq!(result.classification, Classification::Ellipsoid);
    assert!(result.el_residual <= 10.0 * cfg.grad_tol);
    let (a, c) = spheroid_oracle();
    let [a1, a2, a3] = result.shape.semiaxes();
    assert!((a1 - a).abs() < 1e-8 && (a2 - a).abs() < 1e-8, "{a1} {a2} vs {a}");
    assert!((a3 - c).abs() < 1e-8, "{a3} vs {c}");
    for e in &result.continuation_trace {
        assert!(e.semiaxes[2] / e.semiaxes[0] > 0.1);
    }
}

#[test]
fn one_plus_x1_squared_is_the_same_spheroid_about_e1() {
    let cfg = SolverConfig::default();
    let p = Profile::from_polynomial(&[term([0, 0, 0], 1.0), term([2, 0, 0], 1.0)], 4).unwrap();
    let result = solve(&p, &cfg).unwrap();
    assert_eq!(result.classification, Classification::Ellipsoid);
    let [a1, a2, a3] = result.shape.semiaxes();
    assert!((a1 - a2).abs() < 1e-8);
    assert!(a3 > 0.1 * a1);
    assert!(result.shape.minor_axis()[0].abs() > 1.0 - 1e-10);
    let (a, c) = spheroid_oracle();
    assert!((a1 - a).abs() < 1e-8 && (a3 - c).abs() < 1e-8);
}

#[test]
fn coulomb_continuation_follows_the_scaled_ball() {
    // Ψ_ε is Coulomb times 1 + ε√(π/2); the ball radius scales with its cube root
    let cfg = SolverConfig::default();
    let result = continuation_solve(&Profile::coulomb(), &cfg).unwrap();
    assert_eq!(result.classification, Classification::Ellipsoid);
    for e in &result.continuation_trace {
        let r = (1.0 + e.eps * (PI / 2.0).sqrt()).cbrt();
        for a in e.semiaxes {
            assert!((a - r).abs() < 1e-10, "eps={} a={a} r={r}", e.eps);
        }
    }
    for a in result.shape.semiaxes() {
        assert!((a - 1.0).abs() < 1e-10);
    }
}

/// Flat disk of radius a under Ψ̂ = (1 − c²)(5 − 4c²): the in-plane EL system
/// reduces to a³ = (3/2)π√(π/2), and g = 3π√(2π)/a.
fn disk_oracle() -> (f64, f64) {
    let a = (1.5 * PI * (PI / 2.0).sqrt()).cbrt();
    let g = 3.0 * PI * (2.0 * PI).sqrt() / a;
    (a, (g + 2.0 * a * a) / 5.0)
}

#[test]
fn quartic_profile_loses_a_dimension() {
    let cfg = SolverConfig::default();
    let result = solve(&quartic(), &cfg).unwrap();
    assert_eq!(result.classification, Classification::SemiEllipsoid);
    let [a1, a2, a3] = result.shape.semiaxes();
    assert_eq!(a3, 0.0);
    let (a, energy) = disk_oracle();
    assert!((a1 - a).abs() < 1e-8 && (a2 - a).abs() < 1e-8, "{a1} {a2} vs {a}");
    assert!((result.energy - energy).abs() < 1e-8);
    assert!(result.el_residual < 1e-8);
    assert!(result.shape.minor_axis()[2].abs() > 1.0 - 1e-10);
    let ext = result.extrapolated_semiaxes.unwrap();
    assert!((ext[0] - a).abs() < 1e-6 && (ext[1] - a).abs() < 1e-6);

    let ratios: Vec<f64> = result.continuation_trace.iter().map(|e| e.semiaxes[2] / e.semiaxes[0]).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    assert!(*ratios.last().unwrap() < cfg.degeneracy_ratio);
    for e in &result.continuation_trace {
        assert!((e.semiaxes[0] - e.semiaxes[1]).abs() < 1e-6);
        assert!(e.residual <= cfg.grad_tol);
    }
}

#[test]
fn negative_transform_is_rejected() {
    let p = Profile::from_polynomial(&[term([0, 0, 0], 1.0), term([0, 0, 2], 3.0)], 4).unwrap();
    assert!(matches!(solve(&p, &SolverConfig::default()), Err(Error::Hypothesis(_))));
    assert!(matches!(continuation_solve(&p, &SolverConfig::default()), Err(Error::Hypothesis(_))));
}

#[test]
fn config_validation() {
    assert!(SolverConfig::default().validate().is_ok());
    let bad = [
        SolverConfig { eps_factor: 1.0, ..Default::default() },
        SolverConfig { grad_tol: 0.0, ..Default::default() },
        SolverConfig { n_azimuth: 7, ..Default::default() },
        SolverConfig { max_iter: 0, ..Default::default() },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err());
    }
}

#[test]
fn short_iteration_budget_reports_non_convergence() {
    let cfg = SolverConfig { max_iter: 1, ..Default::default() };
    assert!(matches!(solve_equilibrium(&mild(), &cfg), Err(Error::NoConvergence { .. })));
}

fn entry(eps: f64, a: [f64; 3]) -> TraceEntry {
    TraceEntry { eps, semiaxes: a, residual: 0.0, iterations: 1, condition: 1.0 }
}

#[test]
fn classify_synthetic_traces() {
    let cfg = SolverConfig::default();
    let eps: Vec<f64> = (0..21).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    let ball: Vec<_> = eps.iter().map(|&e| entry(e, [1.0; 3])).collect();
    assert_eq!(classify(&ball, &cfg).unwrap(), Classification::Ellipsoid);
    let flat: Vec<_> = eps.iter().map(|&e| entry(e, [1.8 + e, 1.8 + e, e.powf(0.7)])).collect();
    assert_eq!(classify(&flat, &cfg).unwrap(), Classification::SemiEllipsoid);
    let segment: Vec<_> = eps.iter().map(|&e| entry(e, [1.0, e, e])).collect();
    assert!(matches!(classify(&segment, &cfg), Err(Error::TheoryViolation(_))));
    let point: Vec<_> = eps.iter().map(|&e| entry(e, [e, e, e])).collect();
    assert!(matches!(classify(&point, &cfg), Err(Error::TheoryViolation(_))));
    // minor axis still moving and not yet small
    let drifting: Vec<_> = eps.iter().map(|&e| entry(e, [1.0, 1.0, 0.5 + 10.0 * e])).collect();
    assert!(matches!(classify(&drifting[..8], &cfg), Err(Error::Inconclusive(_))));
    assert!(matches!(classify(&ball[..2], &cfg), Err(Error::Inconclusive(_))));
    assert!(matches!(classify(&[], &cfg), Err(Error::Inconclusive(_))));
}

#[test]
fn richardson_removes_the_sqrt_eps_terms() {
    let f = |e: f64| 1.8 - 0.4 * e.sqrt() + 2.0 * e;
    let eps = [1e-4, 5e-5, 2.5e-5];
    assert!((richardson_sqrt(eps, eps.map(f)) - 1.8).abs() < 1e-12);
}

#[test]
fn quartic_p_function() {
    assert!(p_quartic(0.0, 64).unwrap().abs() < 1e-10);
    for t in [1e-3, 1e-2, 0.1] {
        assert!(p_quartic(t, 64).unwrap() > 0.0);
    }
    for t in [0.5, 1.0, 2.0] {
        let h = 1e-4;
        let dp = (p_quartic(t + h, 64).unwrap() - p_quartic(t - h, 64).unwrap()) / (2.0 * h);
        let lhs = (2.0 + t) * dp + 1.5 * p_quartic(t, 64).unwrap() - 1.5 * q_quartic(t, 64).unwrap();
        assert!(lhs.abs() < 1e-6, "t={t}: {lhs}");
    }
    // p(1): the denominator is 1 and the integral is elementary:
    // ∫₀^π (3s² − 2)(s² + 4s⁴) s dψ = 104/35
    assert!((p_quartic(1.0, 64).unwrap() - 104.0 / 35.0).abs() < 1e-12);
}

#[test]
fn quadratic_p_function() {
    for k in 0..=20 {
        let t = 0.1 * 100f64.powf(k as f64 / 20.0);
        assert!(p_quadratic(t, 1.0, 1.0, 64).unwrap() < 0.0);
    }
    // t = 1: √(2π)∫(α₂cos² + α₁sin²)(cos² − 1) = −√(2π)π(3α₁ + α₂)/4
    let expected = -(2.0 * PI).sqrt() * PI * (3.0 * 0.7 + 1.9) / 4.0;
    assert!((p_quadratic(1.0, 0.7, 1.9, 64).unwrap() - expected).abs() < 1e-12);
    let base = p_quadratic(2.5, 0.4, 1.3, 64).unwrap();
    assert!((p_quadratic(2.5, 0.8, 2.6, 64).unwrap() - 2.0 * base).abs() < 1e-12 * base.abs());
    let a = p_quadratic_reduced(1.0, 1.0, 1.0, 64).unwrap();
    let b = p_quadratic_sphere(1.0, 1.0, 1.0, 64).unwrap();
    assert!((a - b).abs() < 1e-8);
}
