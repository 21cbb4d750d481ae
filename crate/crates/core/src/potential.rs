//! Potential of an ellipsoid law, W∗χ_E/|E|, through its sphere-integral
//! representation, plus an independent direct-convolution oracle and
//! Euler-Lagrange verification.
//!
//! All sphere integrals reduce to sums over nodes `(u, k)` with
//! α(x, ω) = x·u: the potential is `c_p Σ k (1 - α²)`, the gradient
//! `-c_g Σ k α u`, the radial derivative `-c_g Σ k α²` and the interior
//! Hessian `-c_g Σ k u uᵀ`, each restricted to |α| < 1.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harmonics::{positivity_scan, HarmonicExpansion, Profile};
use crate::quadrature::{
    frame_for_axis, grading_levels, graded_rule, legendre_unit, product_rule, scaled_rule,
    SphereQuadrature, GRADED_TRIGGER,
};
pub use crate::shape::{Shape, ShapeMatrix, ShapeSpec, BALL_VOLUME};

/// (1/|B|)·√(π/8)
pub fn potential_constant() -> f64 {
    (PI / 8.0).sqrt() / BALL_VOLUME
}

/// (1/|B|)·√(π/2)
pub fn gradient_constant() -> f64 {
    (PI / 2.0).sqrt() / BALL_VOLUME
}

/// α(x, ω) = x·ω / |D(a)Rᵀω|.
pub fn alpha(x: &Vector3<f64>, omega: &Vector3<f64>, shape: &Shape) -> Result<f64> {
    let d = shape.stretch(omega);
    if !(d > 0.0) {
        return Err(invalid("|D(a)Rᵀω| vanishes at this direction"));
    }
    Ok(x.dot(omega) / d)
}

#[derive(Debug, Clone, Copy)]
struct Node {
    u: Vector3<f64>,
    k: f64,
}

/// Potential, gradient and radial derivative at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub potential: f64,
    pub gradient: Vector3<f64>,
    pub radial: f64,
}

#[derive(Debug, Clone)]
enum Geometry {
    /// Nondegenerate, mildly eccentric: integrate in v = D Rᵀω / |D Rᵀω|,
    /// where the cutoff becomes the slab |y·v| < 1 with y = D⁻¹Rᵀx.
    Adapted {
        l: Matrix3<f64>,
        det_l: f64,
        unit: (Vec<f64>, Vec<f64>),
    },
    /// Eccentric or flat: graded ω-rule around the shortest axis, with the
    /// cutoff located exactly on every meridian.
    Axial {
        rule: SphereQuadrature,
        squares: [f64; 3],
        unit: (Vec<f64>, Vec<f64>),
        phi_unit: (Vec<f64>, Vec<f64>),
    },
}

/// Precomputed evaluator for one profile and one shape.
#[derive(Debug, Clone)]
pub struct PotentialEvaluator {
    psi_hat: HarmonicExpansion,
    shape: Shape,
    n_polar: usize,
    n_azimuth: usize,
    geometry: Geometry,
    interior: Vec<Node>,
}

impl PotentialEvaluator {
    /// Uses the base resolution of `rule`; the node layout is chosen from the shape.
    pub fn new(profile: &Profile, shape: &Shape, rule: &SphereQuadrature) -> Result<Self> {
        let (n_polar, n_azimuth) = rule.resolution();
        Self::with_resolution(profile.psi_hat(), shape, n_polar, n_azimuth)
    }

    pub fn with_resolution(
        psi_hat: &HarmonicExpansion,
        shape: &Shape,
        n_polar: usize,
        n_azimuth: usize,
    ) -> Result<Self> {
        if n_polar < 4 || n_azimuth < 8 || n_azimuth % 2 != 0 {
            return Err(invalid(format!(
                "bad potential resolution ({n_polar}, {n_azimuth})"
            )));
        }
        let psi_hat = psi_hat.trimmed();
        let a = shape.semiaxes();
        let (geometry, interior) = if !shape.is_degenerate() && shape.eigen_ratio() >= GRADED_TRIGGER
        {
            let l = shape.rotation() * Matrix3::from_diagonal(&Vector3::new(1.0 / a[0], 1.0 / a[1], 1.0 / a[2]));
            let det_l = 1.0 / (a[0] * a[1] * a[2]);
            let rule = product_rule(Matrix3::identity(), n_polar, n_azimuth);
            let interior = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(v, w)| {
                    let lv = l * v;
                    let nl2 = lv.norm_squared();
                    let omega = lv / nl2.sqrt();
                    Node {
                        u: lv,
                        k: w * det_l * psi_hat.eval(&omega) / nl2,
                    }
                })
                .collect();
            (
                Geometry::Adapted {
                    l,
                    det_l,
                    unit: legendre_unit(n_polar),
                },
                interior,
            )
        } else {
            let levels = grading_levels(shape.eigen_ratio());
            let rule = graded_rule(*shape.rotation(), levels, n_polar, n_azimuth);
            let interior = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(omega, w)| {
                    let s = shape.stretch(omega);
                    Node {
                        u: omega / s,
                        k: w * psi_hat.eval(omega) / s,
                    }
                })
                .collect();
            let (_, order) = rule.panels();
            (
                Geometry::Axial {
                    squares: a.map(|v| v * v),
                    unit: legendre_unit(order),
                    phi_unit: legendre_unit((n_azimuth / 8).max(8)),
                    rule,
                },
                interior,
            )
        };
        Ok(PotentialEvaluator {
            psi_hat,
            shape: shape.clone(),
            n_polar,
            n_azimuth,
            geometry,
            interior,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.n_polar, self.n_azimuth)
    }

    /// Whether `x` lies in the closed support.
    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        self.in_support(x).is_some()
    }

    /// Returns the point to use for interior evaluation (projected onto the
    /// plane for flat shapes), or None outside.
    fn in_support(&self, x: &Vector3<f64>) -> Option<Vector3<f64>> {
        let r = self.shape.rotation();
        let a = self.shape.semiaxes();
        let y = r.transpose() * x;
        if self.shape.is_degenerate() {
            if !self.in_plane(x) {
                return None;
            }
            let q = (y[0] / a[0]).powi(2) + (y[1] / a[1]).powi(2);
            (q <= 1.0).then(|| x - self.shape.minor_axis() * y[2])
        } else {
            let q = (y[0] / a[0]).powi(2) + (y[1] / a[1]).powi(2) + (y[2] / a[2]).powi(2);
            (q <= 1.0).then_some(*x)
        }
    }

    fn in_plane(&self, x: &Vector3<f64>) -> bool {
        let z = self.shape.minor_axis().dot(x);
        z.abs() <= 1e-13 * x.norm().max(self.shape.semiaxes()[0])
    }

    pub fn evaluate(&self, x: &Vector3<f64>) -> PointValue {
        if let Some(xi) = self.in_support(x) {
            return sums(&xi, self.interior.iter().copied());
        }
        match &self.geometry {
            Geometry::Adapted { l, det_l, unit } => {
                let y = self.shape.to_ball(x).expect("nondegenerate");
                let nodes = self.cap_nodes(&y, l, *det_l, unit);
                sums(x, nodes.into_iter())
            }
            Geometry::Axial {
                rule,
                squares,
                unit,
                phi_unit,
            } => {
                let nodes = if self.shape.is_degenerate() && self.in_plane(x) {
                    let xp = x - self.shape.minor_axis() * self.shape.minor_axis().dot(x);
                    let nodes = self.arc_nodes(&xp, rule, squares, phi_unit);
                    return sums(&xp, nodes.into_iter());
                } else {
                    self.meridian_nodes(x, rule, squares, unit)
                };
                sums(x, nodes.into_iter())
            }
        }
    }

    pub fn potential(&self, x: &Vector3<f64>) -> f64 {
        self.evaluate(x).potential
    }

    pub fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.evaluate(x).gradient
    }

    pub fn radial_derivative(&self, x: &Vector3<f64>) -> f64 {
        self.evaluate(x).radial
    }

    /// -c_g ∫ ωωᵀ Ψ̂ / |D Rᵀω|³; for flat shapes only the in-plane block is meaningful.
    pub fn interior_hessian(&self) -> Matrix3<f64> {
        let mut h = Matrix3::zeros();
        for n in &self.interior {
            h += n.u * n.u.transpose() * n.k;
        }
        crate::shape::symmetrize(&(h * -gradient_constant()))
    }

    /// Exterior point of a nondegenerate shape: the slab |y·v| < 1 is a polar
    /// cap band around ŷ, integrated by Gauss-Legendre in t = ŷ·v.
    fn cap_nodes(
        &self,
        y: &Vector3<f64>,
        l: &Matrix3<f64>,
        det_l: f64,
        unit: &(Vec<f64>, Vec<f64>),
    ) -> Vec<Node> {
        let r = y.norm();
        let frame = frame_for_axis(y).expect("nonzero exterior point");
        let (e1, e2, e3) = (frame.column(0), frame.column(1), frame.column(2));
        let t_rule = scaled_rule(unit, -1.0 / r, 1.0 / r);
        let dphi = 2.0 * PI / self.n_azimuth as f64;
        let mut out = Vec::with_capacity(t_rule.len() * self.n_azimuth);
        for (t, wt) in t_rule.nodes.iter().zip(&t_rule.weights) {
            let st = (1.0 - t * t).sqrt();
            for j in 0..self.n_azimuth {
                let (sp, cp) = (j as f64 * dphi).sin_cos();
                let v = e1 * (st * cp) + e2 * (st * sp) + e3 * *t;
                let lv = l * v;
                let nl2 = lv.norm_squared();
                let omega = lv / nl2.sqrt();
                out.push(Node {
                    u: lv,
                    k: wt * dphi * det_l * self.psi_hat.eval(&omega) / nl2,
                });
            }
        }
        out
    }

    /// Exterior point, graded ω-rule: on each meridian of the rule frame the
    /// good set {|α| < 1} is a union of ψ-intervals with endpoints in closed form.
    fn meridian_nodes(
        &self,
        x: &Vector3<f64>,
        rule: &SphereQuadrature,
        sq: &[f64; 3],
        unit: &(Vec<f64>, Vec<f64>),
    ) -> Vec<Node> {
        let frame = rule.frame();
        let (f1, f2, n) = (frame.column(0), frame.column(1), frame.column(2));
        let (panels, _) = rule.panels();
        let z = x.dot(&n);
        let coeffs = |cp: f64, sp: f64| {
            let e = f1 * cp + f2 * sp;
            let p = x.dot(&e);
            let q2 = sq[0] * cp * cp + sq[1] * sp * sp;
            let k0 = 0.5 * (q2 + sq[2] - p * p - z * z);
            let k1 = 0.5 * (sq[2] - q2 + p * p - z * z);
            (e, q2, k0, k1, -p * z)
        };
        // The number of cutoff roots on a meridian changes where K1² + K2² = K0².
        let disc = |phi: f64| {
            let (sp, cp) = phi.sin_cos();
            let (_, _, k0, k1, k2) = coeffs(cp, sp);
            k1 * k1 + k2 * k2 - k0 * k0
        };
        let mut out = Vec::new();
        for (phi, wphi) in self.azimuth_nodes(disc) {
            let (sp, cp) = phi.sin_cos();
            let (e, q2, k0, k1, k2) = coeffs(cp, sp);
            for (lo, hi) in good_intervals(k0, k1, k2) {
                for &(plo, phi) in panels.iter() {
                    let (a, b) = (lo.max(plo), hi.min(phi));
                    if b <= a {
                        continue;
                    }
                    let r = scaled_rule(unit, a, b);
                    for (psi, w) in r.nodes.iter().zip(&r.weights) {
                        let (s, c) = psi.sin_cos();
                        let omega = e * s + n * c;
                        let den = (q2 * s * s + sq[2] * c * c).sqrt();
                        out.push(Node {
                            u: omega / den,
                            k: w * s * wphi * self.psi_hat.eval(&omega) / den,
                        });
                    }
                }
            }
        }
        out
    }

    /// Azimuthal nodes and weights. Without sign changes of `disc` the
    /// trapezoid rule is used; otherwise Gauss-Legendre between the
    /// breakpoints, with a quadratic substitution at each breakpoint to absorb
    /// the square-root behaviour of the merging roots.
    fn azimuth_nodes(&self, disc: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        let n = self.n_azimuth;
        let samples = 4 * n;
        let h = 2.0 * PI / samples as f64;
        let mut cuts = Vec::new();
        let mut prev = disc(0.0);
        for i in 1..=samples {
            let b = i as f64 * h;
            let cur = disc(b);
            if (prev > 0.0) != (cur > 0.0) {
                let (mut lo, mut hi, mut flo) = (b - h, b, prev);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let fm = disc(mid);
                    if (fm > 0.0) == (flo > 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
            }
            prev = cur;
        }
        let dphi = 2.0 * PI / n as f64;
        if cuts.is_empty() {
            return (0..n).map(|j| (j as f64 * dphi, dphi)).collect();
        }
        let unit = legendre_unit((n / 8).max(8));
        let mut out = Vec::new();
        for (i, &a) in cuts.iter().enumerate() {
            let b = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + 2.0 * PI };
            let pieces = ((b - a) / (PI / 4.0)).ceil().max(2.0) as usize;
            let len = (b - a) / pieces as f64;
            for k in 0..pieces {
                let lo = a + k as f64 * len;
                let r = scaled_rule(&unit, 0.0, 1.0);
                for (t, w) in r.nodes.iter().zip(&r.weights) {
                    let (phi, jac) = if k == 0 {
                        (lo + len * t * t, 2.0 * len * t)
                    } else if k + 1 == pieces {
                        (lo + len - len * (1.0 - t) * (1.0 - t), 2.0 * len * (1.0 - t))
                    } else {
                        (lo + len * t, len)
                    };
                    out.push((phi, w * jac));
                }
            }
        }
        out
    }

    /// In-plane exterior point of a flat shape: α does not depend on ψ, so the
    /// cutoff splits the azimuth instead.
    fn arc_nodes(
        &self,
        x: &Vector3<f64>,
        rule: &SphereQuadrature,
        sq: &[f64; 3],
        phi_unit: &(Vec<f64>, Vec<f64>),
    ) -> Vec<Node> {
        let frame = rule.frame();
        let (f1, f2, n) = (frame.column(0), frame.column(1), frame.column(2));
        let (x1, x2) = (x.dot(&f1), x.dot(&f2));
        let k0 = 0.5 * (sq[0] - x1 * x1 + sq[1] - x2 * x2);
        let k1 = 0.5 * (sq[0] - x1 * x1 - sq[1] + x2 * x2);
        let k2 = -x1 * x2;
        // Polar nodes of the graded rule, reconstructed from its panels.
        let (panels, order) = rule.panels();
        let unit = legendre_unit(order);
        let mut polar = Vec::new();
        for &(lo, hi) in panels {
            let r = scaled_rule(&unit, lo, hi);
            for (psi, w) in r.nodes.iter().zip(&r.weights) {
                let (s, c) = psi.sin_cos();
                polar.push((s, c, w * s));
            }
        }
        let mut out = Vec::new();
        for (lo, hi) in good_intervals(k0, k1, k2) {
            for shift in [0.0, PI] {
                let pieces = ((hi - lo) / (PI / 4.0)).ceil().max(1.0) as usize;
                let h = (hi - lo) / pieces as f64;
                for piece in 0..pieces {
                    let a = lo + shift + piece as f64 * h;
                    let r = scaled_rule(phi_unit, a, a + h);
                    for (phi, wphi) in r.nodes.iter().zip(&r.weights) {
                        let (sp, cp) = phi.sin_cos();
                        let e = f1 * cp + f2 * sp;
                        let q = (sq[0] * cp * cp + sq[1] * sp * sp).sqrt();
                        for &(s, c, wpsi) in &polar {
                            let omega = e * s + n * c;
                            let den = q * s;
                            out.push(Node {
                                u: omega / den,
                                k: wphi * wpsi * self.psi_hat.eval(&omega) / den,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

fn sums(x: &Vector3<f64>, nodes: impl Iterator<Item = Node>) -> PointValue {
    let mut pot = 0.0;
    let mut grad = Vector3::zeros();
    let mut radial = 0.0;
    for n in nodes {
        let a = x.dot(&n.u);
        let a2 = a * a;
        if a2 >= 1.0 {
            continue;
        }
        pot += n.k * (1.0 - a2);
        grad += n.u * (n.k * a);
        radial += n.k * a2;
    }
    PointValue {
        potential: potential_constant() * pot,
        gradient: grad * -gradient_constant(),
        radial: -gradient_constant() * radial,
    }
}

/// Subintervals of [0, π] where K0 + K1 cos 2ψ + K2 sin 2ψ > 0.
fn good_intervals(k0: f64, k1: f64, k2: f64) -> Vec<(f64, f64)> {
    let rho = k1.hypot(k2);
    if rho <= k0.abs() {
        return if k0 > 0.0 { vec![(0.0, PI)] } else { Vec::new() };
    }
    let theta = k2.atan2(k1);
    let delta = (-k0 / rho).clamp(-1.0, 1.0).acos();
    let wrap = |v: f64| {
        let r = (0.5 * v).rem_euclid(PI);
        if r >= PI { 0.0 } else { r }
    };
    let mut cuts = vec![0.0, wrap(theta + delta), wrap(theta - delta), PI];
    cuts.sort_by(f64::total_cmp);
    let g = |psi: f64| k0 + k1 * (2.0 * psi).cos() + k2 * (2.0 * psi).sin();
    cuts.windows(2)
        .filter(|w| w[1] > w[0] && g(0.5 * (w[0] + w[1])) > 0.0)
        .map(|w| (w[0], w[1]))
        .collect()
}

pub fn potential(profile: &Profile, shape: &Shape, x: &Vector3<f64>, rule: &SphereQuadrature) -> Result<f64> {
    Ok(PotentialEvaluator::new(profile, shape, rule)?.potential(x))
}

pub fn potential_gradient(
    profile: &Profile,
    shape: &Shape,
    x: &Vector3<f64>,
    rule: &SphereQuadrature,
) -> Result<Vector3<f64>> {
    Ok(PotentialEvaluator::new(profile, shape, rule)?.gradient(x))
}

pub fn radial_derivative(
    profile: &Profile,
    shape: &Shape,
    x: &Vector3<f64>,
    rule: &SphereQuadrature,
) -> Result<f64> {
    Ok(PotentialEvaluator::new(profile, shape, rule)?.radial_derivative(x))
}

/// Constant Hessian of W∗χ_E/|E| inside a nondegenerate shape.
pub fn hessian_inside(profile: &Profile, shape: &Shape, rule: &SphereQuadrature) -> Result<Matrix3<f64>> {
    if shape.is_degenerate() {
        return Err(Error::InvalidShape(
            "interior Hessian needs three positive semi-axes".into(),
        ));
    }
    Ok(PotentialEvaluator::new(profile, shape, rule)?.interior_hessian())
}

/// Fourier transform of χ_E/|E| at ξ.
pub fn ball_fourier(xi: &Vector3<f64>, shape: &Shape) -> f64 {
    let r = shape.stretch(xi);
    let j = if r < 1e-4 {
        let r2 = r * r;
        1.0 / 3.0 - r2 / 30.0 + r2 * r2 / 840.0
    } else {
        (r.sin() - r * r.cos()) / (r * r * r)
    };
    (2.0 / PI).sqrt() * j / BALL_VOLUME
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub error: f64,
}

/// ∫_E W(x-y) dy / |E| by direct integration of the kernel along chords.
///
/// In ball coordinates y = D⁻¹Rᵀx every ray from x meets the ball in a chord
/// [s₁, s₂], and the radial integral of ρ·(1/ρ) is (s₂² - s₁²)/2 in closed form.
/// Exterior caps use σ = √(u² - u₀²) to absorb the square-root edge.
pub fn direct_convolution_oracle(
    profile: &Profile,
    shape: &Shape,
    x: &Vector3<f64>,
    n_refine: usize,
) -> Result<OracleEstimate> {
    if shape.is_degenerate() {
        return Err(Error::InvalidShape("oracle needs three positive semi-axes".into()));
    }
    let psi = profile.psi().trimmed();
    let n = 16usize << n_refine.min(8);
    let coarse = chord_integral(&psi, shape, x, n)?;
    let fine = chord_integral(&psi, shape, x, 2 * n)?;
    let error = (fine - coarse).abs();
    if error > 1e-3 * fine.abs().max(1e-12) {
        return Err(Error::Refinement(format!(
            "oracle levels differ by {error:.3e} at n = {n}"
        )));
    }
    Ok(OracleEstimate { value: fine, error })
}

fn chord_integral(psi: &HarmonicExpansion, shape: &Shape, x: &Vector3<f64>, n: usize) -> Result<f64> {
    let t = shape.transform();
    let y = shape.to_ball(x)?;
    let r = y.norm();
    let frame = if r > 1e-14 {
        frame_for_axis(&y)?
    } else {
        Matrix3::identity()
    };
    let (e1, e2, e3) = (frame.column(0), frame.column(1), frame.column(2));
    let n_az = 2 * n;
    let dphi = 2.0 * PI / n_az as f64;
    let unit = legendre_unit(n);
    let f = |u: f64, weight: f64| -> f64 {
        let su = (1.0 - u * u).max(0.0).sqrt();
        let mut acc = 0.0;
        for j in 0..n_az {
            let (sp, cp) = (j as f64 * dphi).sin_cos();
            let nu = e1 * (su * cp) + e2 * (su * sp) + e3 * u;
            let tn = t * nu;
            let len = tn.norm();
            acc += psi.eval(&(tn / len)) / len;
        }
        acc * weight * dphi
    };
    let mut total = 0.0;
    if (r - 1.0).abs() <= 1e-12 {
        let rule = scaled_rule(&unit, -1.0, 0.0);
        for (u, w) in rule.nodes.iter().zip(&rule.weights) {
            total += f(*u, w * 4.0 * u * u);
        }
    } else if r < 1.0 {
        let rule = scaled_rule(&unit, -1.0, 1.0);
        for (u, w) in rule.nodes.iter().zip(&rule.weights) {
            let s2 = -r * u + (r * r * u * u + 1.0 - r * r).sqrt();
            total += f(*u, w * s2 * s2);
        }
    } else {
        let u0sq = 1.0 - 1.0 / (r * r);
        let rule = scaled_rule(&unit, 0.0, 1.0 / r);
        for (sigma, w) in rule.nodes.iter().zip(&rule.weights) {
            let u = -(u0sq + sigma * sigma).sqrt();
            total += f(u, w * 4.0 * r * r * sigma * sigma);
        }
    }
    Ok(total / (2.0 * BALL_VOLUME))
}

/// Checks of both Euler-Lagrange conditions for the law of `shape`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    /// max - min of P = W∗μ + |x|²/2 over support samples.
    pub constancy_residual: f64,
    /// Mean of P over the support samples.
    pub potential_level: f64,
    /// Interior Hessian of W∗μ; for flat shapes only the in-plane block is constrained.
    pub hessian: [[f64; 3]; 3],
    /// max |H + I| over the constrained block.
    pub hessian_residual: f64,
    /// min of ∇P(x)·x over exterior ray points.
    pub exterior_min: f64,
    /// min of P(x) - level over exterior samples.
    pub exterior_gap_min: f64,
    pub n_support: usize,
    pub n_rays: usize,
    pub n_exterior: usize,
}

impl PotentialReport {
    pub fn passes(&self, constancy_tol: f64, exterior_tol: f64) -> bool {
        self.constancy_residual <= constancy_tol
            && self.exterior_min >= -exterior_tol
            && self.exterior_gap_min >= -exterior_tol
    }
}

/// Radii along each exterior ray, as multiples of the boundary point.
pub const RAY_FACTORS: [f64; 5] = [1.01, 1.1, 1.5, 2.0, 5.0];

/// Default resolution for verification sweeps.
pub const VERIFY_RESOLUTION: (usize, usize) = (32, 64);

pub fn verify_euler_lagrange(
    profile: &Profile,
    shape: &Shape,
    n_support: usize,
    n_rays: usize,
) -> Result<PotentialReport> {
    let (np, na) = VERIFY_RESOLUTION;
    verify_euler_lagrange_at(profile, shape, n_support, n_rays, np, na)
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

pub fn verify_euler_lagrange_at(
    profile: &Profile,
    shape: &Shape,
    n_support: usize,
    n_rays: usize,
    n_polar: usize,
    n_azimuth: usize,
) -> Result<PotentialReport> {
    if n_support < 2 || n_rays < 1 {
        return Err(invalid("need at least two support samples and one ray"));
    }
    let scan = positivity_scan(profile.psi_hat(), 64)?;
    if !scan.nonnegative {
        return Err(Error::Hypothesis(format!(
            "transform is negative somewhere (min {:.3e})",
            scan.min_value
        )));
    }
    let ev = PotentialEvaluator::with_resolution(profile.psi_hat(), shape, n_polar, n_azimuth)?;
    let t = shape.transform();
    let flat = shape.is_degenerate();
    let p_of = |x: &Vector3<f64>, v: &PointValue| v.potential + 0.5 * x.norm_squared();

    // Support samples: Halton points in the unit ball (disk when flat), pulled
    // slightly inside so they are interior in floating point.
    let mut levels = Vec::with_capacity(n_support);
    let mut support = Vec::with_capacity(n_support);
    for i in 1..=n_support {
        let (h1, h2, h3) = (halton(i, 2), halton(i, 3), halton(i, 5));
        let y = if flat {
            let rho = 0.999 * h1.sqrt();
            let th = 2.0 * PI * h2;
            Vector3::new(rho * th.cos(), rho * th.sin(), 0.0)
        } else {
            let rho = 0.999 * h1.cbrt();
            let z = 2.0 * h2 - 1.0;
            let s = (1.0 - z * z).sqrt();
            let th = 2.0 * PI * h3;
            Vector3::new(rho * s * th.cos(), rho * s * th.sin(), rho * z)
        };
        let x = t * y;
        levels.push(p_of(&x, &ev.evaluate(&x)));
        support.push(x);
    }
    let max = levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let level = levels.iter().sum::<f64>() / levels.len() as f64;

    let boundary: Vec<Vector3<f64>> = if flat {
        (0..n_rays)
            .map(|k| {
                let th = 2.0 * PI * (k as f64 + 0.5) / n_rays as f64;
                t * Vector3::new(th.cos(), th.sin(), 0.0)
            })
            .collect()
    } else {
        crate::harmonics::fibonacci_grid(n_rays).iter().map(|y| t * y).collect()
    };
    let mut exterior_min = f64::INFINITY;
    let mut gap_min = f64::INFINITY;
    let mut n_exterior = 0;
    for x0 in &boundary {
        for f in RAY_FACTORS {
            let x = x0 * f;
            let v = ev.evaluate(&x);
            exterior_min = exterior_min.min(v.radial + x.norm_squared());
            gap_min = gap_min.min(p_of(&x, &v) - level);
            n_exterior += 1;
        }
    }
    if flat {
        // Points off the plane are not reached by rays through the support.
        let n = shape.minor_axis();
        let a1 = shape.semiaxes()[0];
        for x0 in support.iter().take(n_rays.min(64)) {
            for h in [0.05, 0.25, 1.0] {
                let x = x0 + n * (h * a1);
                let v = ev.evaluate(&x);
                gap_min = gap_min.min(p_of(&x, &v) - level);
                n_exterior += 1;
            }
        }
    }

    let h = ev.interior_hessian();
    let block = if flat { 2 } else { 3 };
    let frame = shape.rotation();
    let local = frame.transpose() * h * frame;
    let mut hres: f64 = 0.0;
    for i in 0..block {
        for j in 0..block {
            let target = if i == j { -1.0 } else { 0.0 };
            hres = hres.max((local[(i, j)] - target).abs());
        }
    }
    Ok(PotentialReport {
        constancy_residual: max - min,
        potential_level: level,
        hessian: crate::shape::matrix_rows(&h),
        hessian_residual: hres,
        exterior_min,
        exterior_gap_min: gap_min,
        n_support,
        n_rays,
        n_exterior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn good_intervals_cases() {
        assert_eq!(good_intervals(1.0, 0.5, 0.0), vec![(0.0, PI)]);
        assert!(good_intervals(-1.0, 0.5, 0.0).is_empty());
        // cos 2ψ > 0 on [0, π/4) ∪ (3π/4, π].
        let g = good_intervals(0.0, 1.0, 0.0);
        assert_eq!(g.len(), 2);
        assert!((g[0].1 - PI / 4.0).abs() < 1e-15);
        assert!((g[1].0 - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn ball_fourier_limits() {
        let b = Shape::ball(1.0).unwrap();
        let v = ball_fourier(&Vector3::zeros(), &b) * BALL_VOLUME;
        assert!((v - (2.0 / PI).sqrt() / 3.0).abs() < 1e-15);
        let v = ball_fourier(&Vector3::new(PI, 0.0, 0.0), &b) * BALL_VOLUME;
        assert!((v - (2.0 / PI).sqrt() / (PI * PI)).abs() < 1e-14);
        let e = Shape::axis_aligned([2.0, 1.0, 1.0]).unwrap();
        let a = ball_fourier(&Vector3::x(), &e);
        let c = ball_fourier(&Vector3::new(2.0, 0.0, 0.0), &b);
        assert!((a - c).abs() < 1e-16);
        // Series and closed form agree at the switch.
        let r: f64 = 1.0001e-4;
        let closed = (r.sin() - r * r.cos()) / (r * r * r);
        let series = 1.0 / 3.0 - r * r / 30.0;
        assert!((closed - series).abs() < 1e-8);
    }

    #[test]
    fn halton_is_in_unit_interval() {
        for i in 1..100 {
            let h = halton(i, 3);
            assert!(h > 0.0 && h < 1.0);
        }
    }
}
