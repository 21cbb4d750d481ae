//! Deterministic quadrature on intervals, on S², and on solid or flat ellipsoids.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Error, Result};
use crate::shape::Shape;

/// Shape-matrix eigenvalue ratio below which the graded sphere rule is used.
pub const GRADED_TRIGGER: f64 = 0.1;

/// Grading depth used for flat shapes, whose integrands stay bounded near the axis.
pub const DEGENERATE_LEVELS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl IntervalRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = Compensated::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(*x));
        }
        acc.value()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Neumaier summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending and exactly symmetric.
pub(crate) fn legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = weight;
        w[i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule with `n` nodes on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<IntervalRule> {
    if n == 0 {
        return Err(invalid("gauss_legendre needs n >= 1"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid(format!("gauss_legendre needs a < b, got [{a}, {b}]")));
    }
    Ok(scaled_rule(&legendre_unit(n), a, b))
}

pub(crate) fn scaled_rule(unit: &(Vec<f64>, Vec<f64>), a: f64, b: f64) -> IntervalRule {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    IntervalRule {
        nodes: unit.0.iter().map(|x| mid + half * x).collect(),
        weights: unit.1.iter().map(|w| half * w).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    /// Gauss-Legendre in cos ψ times the azimuthal trapezoid.
    Product,
    /// Dyadic ψ-panels refined toward both ends of `axis`.
    Graded { levels: usize },
}

/// Node/weight rule on the unit sphere.
///
/// Every rule is a tensor product in a right-handed frame `(e1, e2, axis)`:
/// a polar rule in ψ (angle from `axis`) times the trapezoid in azimuth.
/// The panel structure is kept so that integrators with a known
/// discontinuity in ψ can split panels exactly.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    nodes: Vec<Vector3<f64>>,
    weights: Vec<f64>,
    exactness_degree: usize,
    kind: RuleKind,
    frame: Matrix3<f64>,
    n_polar: usize,
    n_azimuth: usize,
    panels: Vec<(f64, f64)>,
    panel_order: usize,
}

impl SphereQuadrature {
    pub fn nodes(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Degree up to which spherical polynomials integrate exactly.
    /// Graded rules report 0: their accuracy is certified by refinement instead.
    pub fn exactness_degree(&self) -> usize {
        self.exactness_degree
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn frame(&self) -> &Matrix3<f64> {
        &self.frame
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.frame.column(2).into_owned()
    }

    /// Base resolution `(n_polar, n_azimuth)` the rule was built from.
    pub fn resolution(&self) -> (usize, usize) {
        (self.n_polar, self.n_azimuth)
    }

    pub fn n_azimuth(&self) -> usize {
        self.n_azimuth
    }

    /// ψ-panels covering [0, π] and the Gauss-Legendre order used on each.
    pub fn panels(&self) -> (&[(f64, f64)], usize) {
        (&self.panels, self.panel_order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The same kind of rule at twice the base resolution.
    pub fn refined(&self) -> SphereQuadrature {
        let (np, na) = (2 * self.n_polar, 2 * self.n_azimuth);
        match self.kind {
            RuleKind::Product => product_rule(self.frame, np, na),
            RuleKind::Graded { levels } => graded_rule(self.frame, levels, np, na),
        }
    }
}

/// Product rule: Gauss-Legendre in cos ψ, uniform trapezoid in azimuth.
pub fn build_sphere_rule(n_polar: usize, n_azimuth: usize) -> Result<SphereQuadrature> {
    check_resolution(n_polar, n_azimuth)?;
    Ok(product_rule(Matrix3::identity(), n_polar, n_azimuth))
}

fn check_resolution(n_polar: usize, n_azimuth: usize) -> Result<()> {
    if n_polar < 4 {
        return Err(invalid(format!("n_polar must be >= 4, got {n_polar}")));
    }
    if n_azimuth < 8 || n_azimuth % 2 != 0 {
        return Err(invalid(format!(
            "n_azimuth must be even and >= 8, got {n_azimuth}"
        )));
    }
    Ok(())
}

pub(crate) fn product_rule(frame: Matrix3<f64>, n_polar: usize, n_azimuth: usize) -> SphereQuadrature {
    let (x, w) = legendre_unit(n_polar);
    let polar: Vec<(f64, f64, f64)> = x
        .iter()
        .zip(&w)
        .map(|(&c, &wt)| (c, (1.0 - c * c).max(0.0).sqrt(), wt))
        .collect();
    let order = (n_polar / 2).max(4);
    let mut rule = assemble(frame, &polar, n_azimuth);
    rule.exactness_degree = (2 * n_polar - 1).min(n_azimuth - 1);
    rule.kind = RuleKind::Product;
    rule.n_polar = n_polar;
    rule.panels = vec![(0.0, PI / 2.0), (PI / 2.0, PI)];
    rule.panel_order = order;
    rule
}

/// Dyadic ψ-panels on [0, π/2]: `[π/2^{k+2}, π/2^{k+1}]` for k < levels, plus `[0, π/2^{levels+1}]`.
pub(crate) fn dyadic_panels(levels: usize) -> Vec<(f64, f64)> {
    let mut upper = Vec::with_capacity(levels + 1);
    let mut hi = PI / 2.0;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        upper.push((lo, hi));
        hi = lo;
    }
    upper.push((0.0, hi));
    upper.reverse();
    let mut panels = upper.clone();
    for &(lo, hi) in upper.iter().rev() {
        panels.push((PI - hi, PI - lo));
    }
    panels
}

pub(crate) fn graded_rule(
    frame: Matrix3<f64>,
    levels: usize,
    n_polar: usize,
    n_azimuth: usize,
) -> SphereQuadrature {
    let order = (n_polar / 4).max(8);
    let unit = legendre_unit(order);
    let panels = dyadic_panels(levels);
    let mut polar = Vec::with_capacity(panels.len() * order);
    for &(lo, hi) in &panels {
        let r = scaled_rule(&unit, lo, hi);
        for (psi, wt) in r.nodes.iter().zip(&r.weights) {
            polar.push((psi.cos(), psi.sin(), wt * psi.sin()));
        }
    }
    let mut rule = assemble(frame, &polar, n_azimuth);
    rule.kind = RuleKind::Graded { levels };
    rule.n_polar = n_polar;
    rule.panels = panels;
    rule.panel_order = order;
    rule
}

fn assemble(frame: Matrix3<f64>, polar: &[(f64, f64, f64)], n_azimuth: usize) -> SphereQuadrature {
    let e1 = frame.column(0).into_owned();
    let e2 = frame.column(1).into_owned();
    let axis = frame.column(2).into_owned();
    let dphi = 2.0 * PI / n_azimuth as f64;
    let trig: Vec<(f64, f64)> = (0..n_azimuth)
        .map(|j| {
            let phi = j as f64 * dphi;
            (phi.cos(), phi.sin())
        })
        .collect();
    let mut nodes = Vec::with_capacity(polar.len() * n_azimuth);
    let mut weights = Vec::with_capacity(polar.len() * n_azimuth);
    for &(c, s, w) in polar {
        for &(cp, sp) in &trig {
            nodes.push(e1 * (s * cp) + e2 * (s * sp) + axis * c);
            weights.push(w * dphi);
        }
    }
    SphereQuadrature {
        nodes,
        weights,
        exactness_degree: 0,
        kind: RuleKind::Product,
        frame,
        n_polar: 0,
        n_azimuth,
        panels: Vec::new(),
        panel_order: 0,
    }
}

/// Right-handed orthonormal frame whose third column is `axis`.
pub fn frame_for_axis(axis: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let norm = axis.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(invalid("axis must be a nonzero finite vector"));
    }
    let n = axis / norm;
    let k = (0..3)
        .min_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
        .unwrap_or(0);
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let e1 = (e - n * n[k]).normalize();
    let e2 = n.cross(&e1);
    Ok(Matrix3::from_columns(&[e1, e2, n]))
}

/// Rule with polar panels refined dyadically toward ±`axis`.
///
/// `grading` is the number of dyadic levels; the per-panel order and the
/// azimuthal count come from `base`.
pub fn build_graded_sphere_rule(
    axis: &Vector3<f64>,
    grading: usize,
    base: &SphereQuadrature,
) -> Result<SphereQuadrature> {
    if grading < 1 {
        return Err(invalid("grading must be >= 1"));
    }
    let frame = frame_for_axis(axis)?;
    Ok(graded_rule(frame, grading, base.n_polar, base.n_azimuth))
}

/// Grading depth resolving `(sin²ψ + ratio·cos²ψ)^{-k/2}` near the axis.
pub fn grading_levels(ratio: f64) -> usize {
    if ratio <= 0.0 {
        return DEGENERATE_LEVELS;
    }
    let width = ratio.min(1.0).sqrt();
    ((PI / 2.0 / width).log2().ceil().max(0.0) as usize) + 3
}

/// Σ w f(ω) with a compensated sum; non-finite values are reported.
pub fn integrate_sphere(f: impl Fn(&Vector3<f64>) -> f64, rule: &SphereQuadrature) -> Result<f64> {
    let mut acc = Compensated::default();
    for (i, (node, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let v = f(node);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand(i));
        }
        acc.add(w * v);
    }
    Ok(acc.value())
}

/// Weighted point set in R³.
#[derive(Debug, Clone)]
pub struct VolumeRule {
    pub points: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

impl VolumeRule {
    pub fn integrate(&self, f: impl Fn(&Vector3<f64>) -> f64) -> f64 {
        let mut acc = Compensated::default();
        for (x, w) in self.points.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.value()
    }

    pub fn total_weight(&self) -> f64 {
        let mut acc = Compensated::default();
        for w in &self.weights {
            acc.add(*w);
        }
        acc.value()
    }
}

/// Lebesgue rule on the solid ellipsoid: Gauss-Legendre in r (weight r²)
/// times `sphere_rule`, mapped by x = R D(a) y.
pub fn ellipsoid_volume_rule(
    shape: &Shape,
    n_radial: usize,
    sphere_rule: &SphereQuadrature,
) -> Result<VolumeRule> {
    if shape.is_degenerate() {
        return Err(Error::InvalidShape(
            "volume rule needs three positive semi-axes; use ellipse_area_rule".into(),
        ));
    }
    let radial = gauss_legendre(n_radial, 0.0, 1.0)?;
    let t = shape.transform();
    let jac = shape.semiaxes().iter().product::<f64>();
    let mut points = Vec::with_capacity(radial.len() * sphere_rule.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (r, wr) in radial.nodes.iter().zip(&radial.weights) {
        for (w, wo) in sphere_rule.nodes.iter().zip(&sphere_rule.weights) {
            points.push(t * (w * *r));
            weights.push(wr * r * r * wo * jac);
        }
    }
    Ok(VolumeRule { points, weights })
}

/// Rule for the semi-ellipsoid law on the flat ellipse with semi-axes
/// `a1`, `a2` spanned by the first two columns of `rotation`.
/// Weights integrate against the probability density.
pub fn ellipse_area_rule(a1: f64, a2: f64, rotation: &Matrix3<f64>, n: usize) -> Result<VolumeRule> {
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(invalid(format!("ellipse axes must be positive, got ({a1}, {a2})")));
    }
    // s = sqrt(1 - rho^2) turns the sqrt weight into s^2 ds.
    let radial = gauss_legendre(n, 0.0, 1.0)?;
    let n_theta = 2 * n.max(4);
    let dtheta = 2.0 * PI / n_theta as f64;
    let u = rotation.column(0).into_owned();
    let v = rotation.column(1).into_owned();
    let mut points = Vec::with_capacity(radial.len() * n_theta);
    let mut weights = Vec::with_capacity(points.capacity());
    for (s, ws) in radial.nodes.iter().zip(&radial.weights) {
        let rho = (1.0 - s * s).sqrt();
        for j in 0..n_theta {
            let th = j as f64 * dtheta;
            points.push(u * (a1 * rho * th.cos()) + v * (a2 * rho * th.sin()));
            weights.push(3.0 / (2.0 * PI) * ws * s * s * dtheta);
        }
    }
    Ok(VolumeRule { points, weights })
}
