//! Even real spherical-harmonic expansions, the Fourier multiplier map Ψ ↦ Ψ̂,
//! and sign scans on S².

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{build_sphere_rule, SphereQuadrature};

/// Default sign tolerance for [`positivity_scan`].
pub const TOL_POS: f64 = 1e-10;

const UNIT_TOL: f64 = 1e-12;

/// Coefficients of the normalised associated-Legendre recurrences up to a fixed degree.
#[derive(Debug, Clone)]
struct Recurrence {
    lmax: usize,
    diag: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Recurrence {
    fn new(lmax: usize) -> Self {
        let w = lmax + 1;
        let mut diag = vec![0.0; w];
        let mut a = vec![0.0; w * w];
        let mut b = vec![0.0; w * w];
        diag[0] = 1.0 / (4.0 * PI).sqrt();
        for m in 1..=lmax {
            let mf = m as f64;
            diag[m] = diag[m - 1] * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
        }
        for m in 0..=lmax {
            let mf = m as f64;
            for l in (m + 2)..=lmax {
                let lf = l as f64;
                a[l * w + m] = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let l1 = lf - 1.0;
                b[l * w + m] = ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
            }
        }
        Recurrence { lmax, diag, a, b }
    }

    /// Walks all (l, m ≥ 0) pairs, passing `Q` scaled so that the real harmonic
    /// is `Q` (m = 0) or `√2·Q·Re/Im (x+iy)^m` (m > 0).
    #[inline]
    fn for_each(&self, w: &Vector3<f64>, mut visit: impl FnMut(usize, usize, f64, f64, f64)) {
        let (x, y, z) = (w[0], w[1], w[2]);
        let width = self.lmax + 1;
        let (mut re, mut im) = (1.0, 0.0);
        for m in 0..=self.lmax {
            if m > 0 {
                let r = re * x - im * y;
                im = re * y + im * x;
                re = r;
            }
            let mut q0 = self.diag[m];
            visit(m, m, q0, re, im);
            if m == self.lmax {
                break;
            }
            let mut q1 = (2.0 * m as f64 + 3.0).sqrt() * z * q0;
            visit(m + 1, m, q1, re, im);
            for l in (m + 2)..=self.lmax {
                let k = l * width + m;
                let q2 = self.a[k] * (z * q1 - self.b[k] * q0);
                q0 = q1;
                q1 = q2;
                visit(l, m, q1, re, im);
            }
        }
    }
}

fn check_unit(w: &Vector3<f64>) -> Result<()> {
    let n = w.norm();
    if (n - 1.0).abs() > UNIT_TOL || !n.is_finite() {
        return Err(invalid(format!("ω must be a unit vector, |ω| = {n}")));
    }
    Ok(())
}

/// Values of every real orthonormal harmonic of degree ≤ `lmax` at ω,
/// indexed `l² + l + m`. No Condon-Shortley phase.
pub fn real_harmonics_all(lmax: usize, w: &Vector3<f64>) -> Vec<f64> {
    let mut out = vec![0.0; (lmax + 1) * (lmax + 1)];
    Recurrence::new(lmax).for_each(w, |l, m, q, re, im| {
        let base = l * l + l;
        if m == 0 {
            out[base] = q;
        } else {
            out[base + m] = std::f64::consts::SQRT_2 * q * re;
            out[base - m] = std::f64::consts::SQRT_2 * q * im;
        }
    });
    out
}

/// The orthonormal real harmonic of the given degree and order at a unit vector.
/// Positive orders carry cos(mφ), negative orders sin(|m|φ).
pub fn real_harmonic_eval(degree: usize, order: i64, w: &Vector3<f64>) -> Result<f64> {
    if order.unsigned_abs() as usize > degree {
        return Err(invalid(format!("order {order} out of range for degree {degree}")));
    }
    check_unit(w)?;
    let all = real_harmonics_all(degree, w);
    Ok(all[((degree * degree + degree) as i64 + order) as usize])
}

/// Even expansion Σ c_{lm} Y_{lm}, stored per even degree l as 2l+1 entries indexed m + l.
#[derive(Debug, Clone)]
pub struct HarmonicExpansion {
    max_degree: usize,
    blocks: Vec<Vec<f64>>,
    rec: Arc<Recurrence>,
}

impl PartialEq for HarmonicExpansion {
    fn eq(&self, other: &Self) -> bool {
        self.max_degree == other.max_degree && self.blocks == other.blocks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficient {
    pub degree: usize,
    pub order: i64,
    pub value: f64,
}

impl HarmonicExpansion {
    pub fn zeros(max_degree: usize) -> Result<Self> {
        if max_degree % 2 != 0 {
            return Err(invalid(format!("max_degree must be even, got {max_degree}")));
        }
        let blocks = (0..=max_degree / 2).map(|k| vec![0.0; 4 * k + 1]).collect();
        Ok(HarmonicExpansion {
            max_degree,
            blocks,
            rec: Arc::new(Recurrence::new(max_degree)),
        })
    }

    /// Constant function `c`.
    pub fn constant(c: f64, max_degree: usize) -> Result<Self> {
        let mut e = Self::zeros(max_degree)?;
        e.blocks[0][0] = c * (4.0 * PI).sqrt();
        Ok(e)
    }

    pub fn from_coefficients(coeffs: &[HarmonicCoefficient], max_degree: usize) -> Result<Self> {
        let mut e = Self::zeros(max_degree)?;
        let mut seen = std::collections::BTreeSet::new();
        for c in coeffs {
            if c.degree % 2 != 0 {
                return Err(invalid(format!("odd degree {} in coefficient list", c.degree)));
            }
            if c.degree > max_degree {
                return Err(invalid(format!(
                    "degree {} exceeds max_degree {max_degree}",
                    c.degree
                )));
            }
            if c.order.unsigned_abs() as usize > c.degree {
                return Err(invalid(format!(
                    "order {} out of range for degree {}",
                    c.order, c.degree
                )));
            }
            if !c.value.is_finite() {
                return Err(invalid("non-finite coefficient"));
            }
            if !seen.insert((c.degree, c.order)) {
                return Err(invalid(format!(
                    "duplicate coefficient ({}, {})",
                    c.degree, c.order
                )));
            }
            e.set(c.degree, c.order, c.value);
        }
        Ok(e)
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Blocks for degrees 0, 2, 4, …
    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn coefficient(&self, degree: usize, order: i64) -> f64 {
        if degree % 2 != 0 || degree > self.max_degree || order.unsigned_abs() as usize > degree {
            return 0.0;
        }
        self.blocks[degree / 2][(order + degree as i64) as usize]
    }

    fn set(&mut self, degree: usize, order: i64, value: f64) {
        self.blocks[degree / 2][(order + degree as i64) as usize] = value;
    }

    pub fn coefficients(&self) -> Vec<HarmonicCoefficient> {
        let mut out = Vec::new();
        for (k, block) in self.blocks.iter().enumerate() {
            let l = 2 * k;
            for (i, v) in block.iter().enumerate() {
                out.push(HarmonicCoefficient {
                    degree: l,
                    order: i as i64 - l as i64,
                    value: *v,
                });
            }
        }
        out
    }

    /// L²(S²) norm, by Parseval.
    pub fn norm_l2(&self) -> f64 {
        self.blocks.iter().flatten().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn eval(&self, w: &Vector3<f64>) -> f64 {
        let mut acc = 0.0;
        let blocks = &self.blocks;
        self.rec.for_each(w, |l, m, q, re, im| {
            if l % 2 != 0 {
                return;
            }
            let b = &blocks[l / 2];
            if m == 0 {
                acc += b[l] * q;
            } else {
                acc += std::f64::consts::SQRT_2 * q * (b[l + m] * re + b[l - m] * im);
            }
        });
        acc
    }

    /// Evaluation with a unit-norm check on ω.
    pub fn value(&self, w: &Vector3<f64>) -> Result<f64> {
        check_unit(w)?;
        Ok(self.eval(w))
    }

    /// Degree-wise scaling by `factor(l)`.
    pub fn map_degrees(&self, factor: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        for (k, block) in out.blocks.iter_mut().enumerate() {
            let f = factor(2 * k);
            block.iter_mut().for_each(|c| *c *= f);
        }
        out
    }

    /// Highest even degree with a nonzero block.
    pub fn effective_degree(&self) -> usize {
        self.blocks
            .iter()
            .rposition(|b| b.iter().any(|c| *c != 0.0))
            .map_or(0, |k| 2 * k)
    }

    /// The same function with trailing zero blocks dropped, for cheaper evaluation.
    pub fn trimmed(&self) -> Self {
        let d = self.effective_degree();
        HarmonicExpansion {
            max_degree: d,
            blocks: self.blocks[..=d / 2].to_vec(),
            rec: Arc::new(Recurrence::new(d)),
        }
    }

    /// Adds the constant `c` to the function.
    pub fn plus_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.blocks[0][0] += c * (4.0 * PI).sqrt();
        out
    }

    /// The expansion of ω ↦ f(Qᵀω).
    pub fn rotated(&self, q: &Matrix3<f64>) -> Self {
        let qt = q.transpose();
        let rule = exact_rule(2 * self.max_degree);
        project_values(self.max_degree, &rule, |w| self.eval(&(qt * w)))
            .expect("max_degree is even")
    }
}

/// Product rule exact for spherical polynomials of degree `n`.
fn exact_rule(n: usize) -> SphereQuadrature {
    let n_polar = (n / 2 + 1).max(4);
    let n_azimuth = (n + 2 + n % 2).max(8);
    build_sphere_rule(n_polar, n_azimuth).expect("valid resolution")
}

fn project_values(
    max_degree: usize,
    rule: &SphereQuadrature,
    f: impl Fn(&Vector3<f64>) -> f64,
) -> Result<HarmonicExpansion> {
    let mut e = HarmonicExpansion::zeros(max_degree)?;
    let n = (max_degree + 1) * (max_degree + 1);
    let mut acc = vec![crate::quadrature::Compensated::default(); n];
    for (w, wt) in rule.nodes().iter().zip(rule.weights()) {
        let v = f(w) * wt;
        if v == 0.0 {
            continue;
        }
        let y = real_harmonics_all(max_degree, w);
        for (a, yv) in acc.iter_mut().zip(&y) {
            a.add(v * yv);
        }
    }
    for k in 0..=max_degree / 2 {
        let l = 2 * k;
        for m in -(l as i64)..=(l as i64) {
            e.set(l, m, acc[((l * l + l) as i64 + m) as usize].value());
        }
    }
    Ok(e)
}

/// Monomial term `coef · x^i y^j z^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialTerm {
    pub exps: [u32; 3],
    pub coef: f64,
}

pub fn eval_polynomial(terms: &[PolynomialTerm], x: &Vector3<f64>) -> f64 {
    terms
        .iter()
        .map(|t| t.coef * x[0].powi(t.exps[0] as i32) * x[1].powi(t.exps[1] as i32) * x[2].powi(t.exps[2] as i32))
        .sum()
}

/// Fibonacci lattice, used as an independent test grid.
pub(crate) fn fibonacci_grid(n: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Projects the restriction of a polynomial to S² onto even harmonics of degree ≤ `max_degree`.
pub fn project_polynomial(terms: &[PolynomialTerm], max_degree: usize) -> Result<HarmonicExpansion> {
    if max_degree % 2 != 0 {
        return Err(invalid(format!("max_degree must be even, got {max_degree}")));
    }
    if terms.iter().any(|t| !t.coef.is_finite()) {
        return Err(invalid("non-finite polynomial coefficient"));
    }
    let degree = terms
        .iter()
        .map(|t| t.exps.iter().sum::<u32>() as usize)
        .max()
        .unwrap_or(0);
    let rule = exact_rule(degree + max_degree);
    let scale = terms.iter().map(|t| t.coef.abs()).sum::<f64>().max(1.0);

    let mut odd = 0.0f64;
    for w in rule.nodes() {
        let d = 0.5 * (eval_polynomial(terms, w) - eval_polynomial(terms, &-w));
        odd = odd.max(d.abs());
    }
    if odd > 1e-12 * scale {
        return Err(Error::OddComponent(odd));
    }

    let even = |w: &Vector3<f64>| 0.5 * (eval_polynomial(terms, w) + eval_polynomial(terms, &-w));
    let e = project_values(max_degree, &rule, even)?;

    let residual = fibonacci_grid(500)
        .iter()
        .map(|w| (eval_polynomial(terms, w) - e.eval(w)).abs())
        .fold(0.0, f64::max);
    if residual > 1e-10 * scale {
        return Err(Error::DegreeTooSmall { max_degree, residual });
    }
    Ok(e)
}

/// The multiplier b_l of the kernel's Fourier transform on degree-l harmonics.
pub fn fourier_multiplier(degree: usize) -> Result<f64> {
    if degree % 2 != 0 {
        return Err(invalid(format!("multiplier is defined for even degrees, got {degree}")));
    }
    let mut b = (2.0 / PI).sqrt();
    for k in 0..degree / 2 {
        let kf = k as f64;
        b *= -(2.0 * kf + 2.0) / (2.0 * kf + 1.0);
    }
    Ok(b)
}

/// Ψ ↦ Ψ̂, degree-wise scaling by the multipliers.
pub fn hat_profile(psi: &HarmonicExpansion) -> HarmonicExpansion {
    psi.map_degrees(|l| fourier_multiplier(l).expect("even degree"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileSource {
    Polynomial { terms: Vec<PolynomialTerm> },
    Harmonic { coeffs: Vec<HarmonicCoefficient> },
}

/// Profile Ψ together with its transform Ψ̂.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    psi: HarmonicExpansion,
    psi_hat: HarmonicExpansion,
    source: ProfileSource,
}

impl Profile {
    pub fn new(psi: HarmonicExpansion) -> Self {
        let psi_hat = hat_profile(&psi);
        let source = ProfileSource::Harmonic {
            coeffs: psi.coefficients(),
        };
        Profile { psi, psi_hat, source }
    }

    pub fn from_polynomial(terms: &[PolynomialTerm], max_degree: usize) -> Result<Self> {
        let psi = project_polynomial(terms, max_degree)?;
        let mut p = Self::new(psi);
        p.source = ProfileSource::Polynomial {
            terms: terms.to_vec(),
        };
        Ok(p)
    }

    pub fn from_coefficients(coeffs: &[HarmonicCoefficient], max_degree: usize) -> Result<Self> {
        let psi = HarmonicExpansion::from_coefficients(coeffs, max_degree)?;
        let mut p = Self::new(psi);
        p.source = ProfileSource::Harmonic {
            coeffs: coeffs.to_vec(),
        };
        Ok(p)
    }

    pub fn from_source(source: &ProfileSource, max_degree: usize) -> Result<Self> {
        match source {
            ProfileSource::Polynomial { terms } => Self::from_polynomial(terms, max_degree),
            ProfileSource::Harmonic { coeffs } => Self::from_coefficients(coeffs, max_degree),
        }
    }

    /// Ψ ≡ 1, the Coulomb kernel.
    pub fn coulomb() -> Self {
        Self::from_polynomial(&[PolynomialTerm { exps: [0, 0, 0], coef: 1.0 }], 0)
            .expect("constant profile")
    }

    pub fn psi(&self) -> &HarmonicExpansion {
        &self.psi
    }

    pub fn psi_hat(&self) -> &HarmonicExpansion {
        &self.psi_hat
    }

    pub fn source(&self) -> &ProfileSource {
        &self.source
    }

    /// Ψ + √(π/2)·ε, whose transform is Ψ̂ + ε.
    pub fn perturbed(&self, eps: f64) -> Self {
        let psi = self.psi.plus_constant((PI / 2.0).sqrt() * eps);
        let psi_hat = hat_profile(&psi);
        Profile {
            psi,
            psi_hat,
            source: self.source.clone(),
        }
    }

    /// The profile ω ↦ Ψ(Qᵀω).
    pub fn rotated(&self, q: &Matrix3<f64>) -> Self {
        Self::new(self.psi.rotated(q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityScan {
    pub min_value: f64,
    pub argmin: [f64; 3],
    pub strictly_positive: bool,
    pub nonnegative: bool,
}

pub fn positivity_scan(f: &HarmonicExpansion, grid_resolution: usize) -> Result<PositivityScan> {
    positivity_scan_with_tol(f, grid_resolution, TOL_POS)
}

/// Minimum over an equal-angle grid (poles included, antipodally closed),
/// polished by Newton steps in a tangent chart from the best grid points.
pub fn positivity_scan_with_tol(
    f: &HarmonicExpansion,
    grid_resolution: usize,
    tol_pos: f64,
) -> Result<PositivityScan> {
    if grid_resolution < 16 {
        return Err(invalid(format!("grid_resolution must be >= 16, got {grid_resolution}")));
    }
    let n = grid_resolution;
    let mut samples: Vec<(f64, Vector3<f64>)> = Vec::with_capacity((n + 1) * 2 * n);
    for i in 0..=n {
        let psi = PI * i as f64 / n as f64;
        let azimuths = if i == 0 || i == n { 1 } else { 2 * n };
        for j in 0..azimuths {
            let phi = PI * j as f64 / n as f64;
            let w = Vector3::new(psi.sin() * phi.cos(), psi.sin() * phi.sin(), psi.cos());
            samples.push((f.eval(&w), w));
        }
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = samples[0];
    for &(v0, w0) in samples.iter().take(8) {
        let (v, w) = descend(f, w0, v0);
        if v < best.0 {
            best = (v, w);
        }
    }
    let (min_value, w) = best;
    Ok(PositivityScan {
        min_value,
        argmin: [w[0], w[1], w[2]],
        strictly_positive: min_value > tol_pos,
        nonnegative: min_value > -tol_pos,
    })
}

fn descend(f: &HarmonicExpansion, mut w: Vector3<f64>, mut v: f64) -> (f64, Vector3<f64>) {
    let h = 1e-4;
    for _ in 0..40 {
        let frame = crate::quadrature::frame_for_axis(&w).expect("unit vector");
        let t1 = frame.column(0).into_owned();
        let t2 = frame.column(1).into_owned();
        let at = |u: f64, s: f64| (w + t1 * u + t2 * s).normalize();
        let g = |u: f64, s: f64| f.eval(&at(u, s));
        let gx = (g(h, 0.0) - g(-h, 0.0)) / (2.0 * h);
        let gy = (g(0.0, h) - g(0.0, -h)) / (2.0 * h);
        let hxx = (g(h, 0.0) - 2.0 * v + g(-h, 0.0)) / (h * h);
        let hyy = (g(0.0, h) - 2.0 * v + g(0.0, -h)) / (h * h);
        let hxy = (g(h, h) - g(h, -h) - g(-h, h) + g(-h, -h)) / (4.0 * h * h);
        let det = hxx * hyy - hxy * hxy;
        let (mut du, mut ds) = if hxx > 0.0 && det > 0.0 {
            (-(hyy * gx - hxy * gy) / det, -(hxx * gy - hxy * gx) / det)
        } else {
            (-gx * 0.1, -gy * 0.1)
        };
        let mut moved = false;
        for _ in 0..30 {
            let cand = at(du, ds);
            let cv = f.eval(&cand);
            if cv < v {
                v = cv;
                w = cand;
                moved = true;
                break;
            }
            du *= 0.5;
            ds *= 0.5;
        }
        if !moved || (du * du + ds * ds).sqrt() < 1e-14 {
            break;
        }
    }
    (v, w)
}

/// Truncation of the Sobolev embedding constant of H^s(S²) into C⁰(S²).
pub fn sobolev_embedding_constant(s: f64, cutoff: usize) -> Result<f64> {
    if !(s > 1.0) {
        return Err(invalid(format!("embedding needs s > 1, got {s}")));
    }
    if cutoff < 1 {
        return Err(invalid("cutoff must be >= 1"));
    }
    let mut acc = crate::quadrature::Compensated::default();
    for k in 0..=cutoff {
        let kf = k as f64;
        acc.add((2.0 * kf + 1.0) / (1.0 + (kf * (kf + 1.0)).sqrt()).powf(2.0 * s));
    }
    Ok(acc.value().sqrt() / (4.0 * PI).sqrt())
}
