//! Scalar test functions whose sign decides whether a flat or a full
//! ellipsoid can be stationary for the quartic and quadratic profiles.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{dyadic_panels, grading_levels, graded_rule, legendre_unit, scaled_rule, Compensated};

/// Minimum Gauss-Legendre order accepted by the p functions.
pub const MIN_ORDER: usize = 32;

fn check_order(n: usize) -> Result<()> {
    if n < MIN_ORDER {
        return Err(invalid(format!("quadrature order must be >= {MIN_ORDER}, got {n}")));
    }
    Ok(())
}

/// ∫₀^π h(ψ) dψ for h symmetric about π/2, with panels graded toward ψ = 0
/// at the scale √t where (sin²ψ + t cos²ψ) turns over.
fn graded_half_line(t: f64, n: usize, h: impl Fn(f64, f64) -> f64) -> f64 {
    let unit = legendre_unit(n);
    let levels = grading_levels(t);
    let mut acc = Compensated::default();
    for &(lo, hi) in dyadic_panels(levels).iter().filter(|p| p.1 <= PI / 2.0 + 1e-15) {
        let r = scaled_rule(&unit, lo, hi);
        for (psi, w) in r.nodes.iter().zip(&r.weights) {
            acc.add(w * h(psi.sin(), psi.cos()));
        }
    }
    2.0 * acc.value()
}

/// p(t) = ∫₀^π (sin²ψ − 2cos²ψ)(sin²ψ + 4sin⁴ψ) / (sin²ψ + t cos²ψ)^{3/2} sinψ dψ.
pub fn p_quartic(t: f64, n: usize) -> Result<f64> {
    check_order(n)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("t must be >= 0, got {t}")));
    }
    Ok(graded_half_line(t, n, |s, c| {
        let (s2, c2) = (s * s, c * c);
        let d = s2 + t * c2;
        // s³ / d^{3/2} stays bounded even for t = 0
        let ratio = if d > 0.0 { s / d.sqrt() } else { 1.0 };
        (s2 - 2.0 * c2) * (1.0 + 4.0 * s2) * ratio.powi(3)
    }))
}

/// The companion integral with (sin²ψ − 2cos²ψ)² and the power 5/2; with it
/// p satisfies (2+t)p′ + (3/2)p = (3/2)q for t > 0.
pub fn q_quartic(t: f64, n: usize) -> Result<f64> {
    check_order(n)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("t must be > 0, got {t}")));
    }
    Ok(graded_half_line(t, n, |s, c| {
        let (s2, c2) = (s * s, c * c);
        let d = s2 + t * c2;
        let a = s2 - 2.0 * c2;
        a * a * (s2 + 4.0 * s2 * s2) * s / (d * d * d.sqrt())
    }))
}

fn check_quadratic(t: f64, alpha1: f64, alpha2: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("t must be > 0, got {t}")));
    }
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(invalid(format!("alpha must be positive, got ({alpha1}, {alpha2})")));
    }
    Ok(())
}

/// Trapezoid points in θ for (t cos²θ + sin²θ)^{-3/2}: its poles sit at
/// distance atanh(min(√t, 1/√t)) from the real axis, and the rule converges
/// like exp(-points·distance).
fn periodic_points(t: f64, n: usize) -> usize {
    let r = t.sqrt().min(1.0 / t.sqrt());
    let width = if r < 1.0 { r.atanh() } else { f64::INFINITY };
    let needed = (45.0 / width).ceil().min(1e7) as usize;
    (8 * n).max(needed).next_multiple_of(2)
}

/// √(2π) ∫₀^{2π} (α₂cos²θ + α₁sin²θ)(cos²θ − 1) / (t cos²θ + sin²θ)^{3/2} dθ,
/// by the periodic trapezoid rule; `n` sets the minimum resolution.
pub fn p_quadratic_reduced(t: f64, alpha1: f64, alpha2: f64, n: usize) -> Result<f64> {
    check_order(n)?;
    check_quadratic(t, alpha1, alpha2)?;
    let m = periodic_points(t, n);
    let h = 2.0 * PI / m as f64;
    let mut acc = Compensated::default();
    for j in 0..m {
        let th = (j as f64 + 0.5) * h;
        let (c2, s2) = (th.cos().powi(2), th.sin().powi(2));
        let d = t * c2 + s2;
        acc.add((alpha2 * c2 + alpha1 * s2) * (c2 - 1.0) / (d * d.sqrt()));
    }
    Ok((2.0 * PI).sqrt() * h * acc.value())
}

/// The same function as a surface integral,
/// ∫_{S²} (ω₁² − ω₃²) Ψ̂(ω) / (tω₁² + ω₂²)^{3/2} dH² with Ψ̂ = 2√(2/π)(α₂ω₁² + α₁ω₂²),
/// on a rule graded toward the singular points ±e₃.
pub fn p_quadratic_sphere(t: f64, alpha1: f64, alpha2: f64, n: usize) -> Result<f64> {
    check_order(n)?;
    check_quadratic(t, alpha1, alpha2)?;
    let rule = graded_rule(Matrix3::identity(), grading_levels(0.0), n, periodic_points(t, n));
    let scale = 2.0 * (2.0 / PI).sqrt();
    let mut acc = Compensated::default();
    for (w, wt) in rule.nodes().iter().zip(rule.weights()) {
        let (x2, y2, z2) = (w[0] * w[0], w[1] * w[1], w[2] * w[2]);
        let d = t * x2 + y2;
        acc.add(wt * (x2 - z2) * scale * (alpha2 * x2 + alpha1 * y2) / (d * d.sqrt()));
    }
    Ok(acc.value())
}

/// Tolerance for the agreement of the two evaluations of the quadratic p.
pub const QUADRATIC_AGREEMENT: f64 = 1e-8;

/// p for the quadratic profile; both forms are evaluated and must agree.
pub fn p_quadratic(t: f64, alpha1: f64, alpha2: f64, n: usize) -> Result<f64> {
    let reduced = p_quadratic_reduced(t, alpha1, alpha2, n)?;
    let sphere = p_quadratic_sphere(t, alpha1, alpha2, n)?;
    let scale = reduced.abs().max(1.0);
    if (reduced - sphere).abs() > QUADRATIC_AGREEMENT * scale {
        return Err(Error::Refinement(format!(
            "quadratic p forms disagree at t={t}: {reduced} vs {sphere}"
        )));
    }
    Ok(reduced)
}
