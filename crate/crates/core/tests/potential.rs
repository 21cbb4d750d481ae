use anisoeq_core::harmonics::{PolynomialTerm, Profile};
use anisoeq_core::potential::*;
use anisoeq_core::quadrature::build_sphere_rule;
use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn term(exps: [u32; 3], coef: f64) -> PolynomialTerm {
    PolynomialTerm { exps, coef }
}

fn one_plus_x1_sq() -> Profile {
    Profile::from_polynomial(&[term([0, 0, 0], 1.0), term([2, 0, 0], 1.0)], 8).unwrap()
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    Rotation3::from_euler_angles(rng.gen_range(-3.0..3.0), rng.gen_range(-1.5..1.5), rng.gen_range(-3.0..3.0))
        .into_inner()
}

#[test]
fn alpha_basic_properties() {
    let ball = Shape::ball(1.0).unwrap();
    let x = Vector3::new(0.3, -0.2, 0.5);
    let w = Vector3::new(0.0, 0.6, 0.8);
    assert!((alpha(&x, &w, &ball).unwrap() - x.dot(&w)).abs() < 1e-15);
    let e = Shape::new([2.0, 1.0, 0.5], Rotation3::from_euler_angles(0.1, 0.2, 0.3).into_inner()).unwrap();
    let a1 = alpha(&x, &w, &e).unwrap();
    let a2 = alpha(&(x * 2.0), &w, &e).unwrap();
    assert!((a2 - 2.0 * a1).abs() < 1e-14);
    let flat = Shape::axis_aligned([1.0, 1.0, 0.0]).unwrap();
    assert!(alpha(&x, &Vector3::z(), &flat).is_err());
}

#[test]
fn boundary_points_have_alpha_at_most_one() {
    let e = Shape::new([1.5, 1.0, 0.7], Rotation3::from_euler_angles(0.4, -0.3, 1.0).into_inner()).unwrap();
    let x = e.transform() * Vector3::new(0.48, 0.6, 0.64);
    let rule = build_sphere_rule(16, 32).unwrap();
    for w in rule.nodes() {
        assert!(alpha(&x, w, &e).unwrap().abs() <= 1.0 + 1e-14);
    }
}

#[test]
fn coulomb_ball_closed_form() {
    let p = Profile::coulomb();
    let ball = Shape::ball(1.0).unwrap();
    let rule = build_sphere_rule(64, 128).unwrap();
    let ev = PotentialEvaluator::new(&p, &ball, &rule).unwrap();
    assert!((ev.potential(&Vector3::zeros()) - 1.5).abs() < 1e-12);
    assert!((ev.potential(&Vector3::new(0.0, 1.0, 0.0)) - 1.0).abs() < 1e-12);
    assert!((ev.potential(&Vector3::new(0.0, 0.0, 2.0)) - 0.5).abs() < 1e-12);
    let x = Vector3::new(1.2, -0.9, 2.0);
    assert!((ev.potential(&x) - 1.0 / x.norm()).abs() < 1e-12);
    let g = ev.gradient(&Vector3::new(0.5, 0.0, 0.0));
    assert!((g - Vector3::new(-0.5, 0.0, 0.0)).norm() < 1e-12);
    assert!(ev.gradient(&Vector3::zeros()).norm() < 1e-15);
    assert!((ev.radial_derivative(&Vector3::new(0.3, 0.4, 0.0)) + 0.25).abs() < 1e-12);
    assert!(ev.radial_derivative(&Vector3::zeros()).abs() < 1e-15);
    let h = hessian_inside(&p, &ball, &rule).unwrap();
    assert!((h + Matrix3::identity()).abs().max() < 1e-10);
    assert_eq!(h, h.transpose());
}

fn quadratic_fit_residual(ev: &PotentialEvaluator, rng: &mut ChaCha8Rng) -> f64 {
    let t = ev.shape().transform();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for _ in 0..50 {
        let y = loop {
            let y = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if y.norm() < 0.99 {
                break y;
            }
        };
        let x = t * y;
        rows.push(vec![
            1.0,
            x[0],
            x[1],
            x[2],
            x[0] * x[0],
            x[1] * x[1],
            x[2] * x[2],
            x[0] * x[1],
            x[0] * x[2],
            x[1] * x[2],
        ]);
        rhs.push(ev.potential(&x));
    }
    let a = DMatrix::from_fn(rows.len(), 10, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
    (a * sol - b).amax()
}

#[test]
fn interior_potential_is_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rule = build_sphere_rule(64, 128).unwrap();
    for profile in [Profile::coulomb(), one_plus_x1_sq()] {
        for axes in [[1.0, 1.0, 1.0], [2.0, 1.3, 0.8], [3.0, 1.0, 0.2]] {
            let shape = Shape::new(axes, random_rotation(&mut rng)).unwrap();
            let ev = PotentialEvaluator::new(&profile, &shape, &rule).unwrap();
            let r = quadratic_fit_residual(&ev, &mut rng);
            assert!(r <= 1e-8, "fit residual {r} for {axes:?}");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rule = build_sphere_rule(64, 128).unwrap();
    let profile = one_plus_x1_sq();
    let shape = Shape::new([1.4, 1.0, 0.6], random_rotation(&mut rng)).unwrap();
    let ev = PotentialEvaluator::new(&profile, &shape, &rule).unwrap();
    let h = 1e-5;
    for _ in 0..20 {
        let x = Vector3::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5));
        let g = ev.gradient(&x);
        let mut fd = Vector3::zeros();
        for i in 0..3 {
            let mut e = Vector3::zeros();
            e[i] = h;
            fd[i] = (ev.potential(&(x + e)) - ev.potential(&(x - e))) / (2.0 * h);
        }
        let rel = (g - fd).norm() / g.norm().max(1e-3);
        assert!(rel <= 1e-6, "x = {x:?}: rel err {rel}");
        assert!((ev.radial_derivative(&x) - g.dot(&x)).abs() <= 1e-10);
    }
}

#[test]
fn hessian_matches_gradient_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rule = build_sphere_rule(64, 128).unwrap();
    let profile = one_plus_x1_sq();
    for axes in [[1.4, 1.0, 0.6], [2.0, 1.0, 0.25]] {
        let shape = Shape::new(axes, random_rotation(&mut rng)).unwrap();
        let ev = PotentialEvaluator::new(&profile, &shape, &rule).unwrap();
        let hess = ev.interior_hessian();
        let x = shape.transform() * Vector3::new(0.1, -0.2, 0.15);
        let h = 1e-4;
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = h;
            let col = (ev.gradient(&(x + e)) - ev.gradient(&(x - e))) / (2.0 * h);
            for i in 0..3 {
                assert!((col[i] - hess[(i, j)]).abs() <= 1e-5 * hess.abs().max());
            }
        }
    }
}

#[test]
fn rotation_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rule = build_sphere_rule(64, 128).unwrap();
    let profile = one_plus_x1_sq();
    let q = random_rotation(&mut rng);
    let rotated = profile.rotated(&q);
    for axes in [[1.5, 1.1, 0.9], [2.0, 1.0, 0.2], [1.0, 0.7, 0.0]] {
        let shape = Shape::new(axes, random_rotation(&mut rng)).unwrap();
        let shape_q = shape.rotated(&q).unwrap();
        let ev = PotentialEvaluator::new(&profile, &shape, &rule).unwrap();
        let ev_q = PotentialEvaluator::new(&rotated, &shape_q, &rule).unwrap();
        for x in [Vector3::new(0.2, 0.1, 0.0), Vector3::new(2.0, -1.0, 0.5)] {
            let a = ev.potential(&x);
            let b = ev_q.potential(&(q * x));
            assert!((a - b).abs() <= 1e-10, "{axes:?}: {a} vs {b}");
        }
    }
}

#[test]
fn oracle_closed_forms() {
    let p = Profile::coulomb();
    let ball = Shape::ball(1.0).unwrap();
    let c = direct_convolution_oracle(&p, &ball, &Vector3::zeros(), 1).unwrap();
    assert!((c.value - 1.5).abs() < 1e-4);
    let e = direct_convolution_oracle(&p, &ball, &Vector3::new(0.0, 3.0, 0.0), 1).unwrap();
    assert!((e.value - 1.0 / 3.0).abs() < 1e-5);
    let b = direct_convolution_oracle(&p, &ball, &Vector3::new(0.6, 0.0, 0.8), 1).unwrap();
    assert!((b.value - 1.0).abs() < 1e-5);
}

#[test]
fn oracle_matches_fourier_representation() {
    let rule = build_sphere_rule(64, 128).unwrap();
    let q = Rotation3::from_euler_angles(0.3, 0.5, -0.2).into_inner();
    for profile in [Profile::coulomb(), one_plus_x1_sq()] {
        for shape in [Shape::ball(1.0).unwrap(), Shape::new([1.3, 1.0, 0.7], q).unwrap()] {
            let ev = PotentialEvaluator::new(&profile, &shape, &rule).unwrap();
            let t = shape.transform();
            for y in [
                Vector3::zeros(),
                Vector3::new(0.3, -0.2, 0.4),
                Vector3::new(0.0, 0.6, 0.8),
                Vector3::new(1.5, 0.5, -0.3),
                Vector3::new(0.1, 2.5, 1.0),
            ] {
                let x = t * y;
                let o = direct_convolution_oracle(&profile, &shape, &x, 1).unwrap();
                let v = ev.potential(&x);
                assert!((o.value - v).abs() < 1e-4, "{y:?}: oracle {} vs {v}", o.value);
            }
        }
    }
}

#[test]
fn eccentric_and_flat_shapes_are_continuous() {
    // Potential of thin ellipsoids approaches that of the flat limit.
    let profile = one_plus_x1_sq();
    let rule = build_sphere_rule(64, 128).unwrap();
    let flat = Shape::axis_aligned([1.2, 0.9, 0.0]).unwrap();
    let thin = Shape::axis_aligned([1.2, 0.9, 1e-5]).unwrap();
    let ev_f = PotentialEvaluator::new(&profile, &flat, &rule).unwrap();
    let ev_t = PotentialEvaluator::new(&profile, &thin, &rule).unwrap();
    for x in [
        Vector3::new(0.3, 0.2, 0.0),
        Vector3::new(1.5, 0.4, 0.0),
        Vector3::new(0.2, 0.1, 0.4),
        Vector3::new(2.0, 1.0, -1.0),
    ] {
        let (a, b) = (ev_f.potential(&x), ev_t.potential(&x));
        assert!((a - b).abs() < 1e-4, "{x:?}: flat {a} thin {b}");
    }
}

#[test]
fn flat_interior_potential_is_quadratic_in_plane() {
    let profile = one_plus_x1_sq();
    let rule = build_sphere_rule(64, 128).unwrap();
    let flat = Shape::axis_aligned([1.0, 0.8, 0.0]).unwrap();
    let ev = PotentialEvaluator::new(&profile, &flat, &rule).unwrap();
    // For a quadratic in (x, y) symmetric under reflections, second
    // differences along each axis are constant.
    let p = |x: f64, y: f64| ev.potential(&Vector3::new(x, y, 0.0));
    let d1 = p(0.4, 0.0) - 2.0 * p(0.0, 0.0) + p(-0.4, 0.0);
    let d2 = p(0.6, 0.1) - 2.0 * p(0.2, 0.1) + p(-0.2, 0.1);
    assert!((d1 - d2).abs() < 1e-10);
}

#[test]
fn exterior_grows_to_zero_like_inverse_distance() {
    let profile = Profile::coulomb();
    let rule = build_sphere_rule(64, 128).unwrap();
    let shape = Shape::axis_aligned([2.0, 1.0, 0.1]).unwrap();
    let ev = PotentialEvaluator::new(&profile, &shape, &rule).unwrap();
    let x = Vector3::new(30.0, 40.0, 0.0);
    // Far field of a unit mass with quadrupole correction below 1e-3.
    assert!((ev.potential(&x) - 1.0 / 50.0).abs() < 1e-4);
}
