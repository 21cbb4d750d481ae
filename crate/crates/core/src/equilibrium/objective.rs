//! The convex auxiliary function f(M) = g(M) + tr M and its derivatives.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::harmonics::{HarmonicExpansion, Profile};
use crate::quadrature::{grading_levels, graded_rule, RuleKind, SphereQuadrature, GRADED_TRIGGER};
use crate::shape::{ShapeMatrix, BALL_VOLUME};

pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Vector6 = SMatrix<f64, 6, 1>;

/// √(2π)/|B|
pub fn g_constant() -> f64 {
    (2.0 * PI).sqrt() / BALL_VOLUME
}

/// Ψ̂-weighted sphere rule.
#[derive(Debug, Clone)]
pub(crate) struct Field {
    nodes: Vec<Vector3<f64>>,
    weights: Vec<f64>,
    kind: RuleKind,
    axis: Vector3<f64>,
}

impl Field {
    pub(crate) fn new(psi_hat: &HarmonicExpansion, rule: &SphereQuadrature) -> Self {
        let psi_hat = psi_hat.trimmed();
        let weights = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(w, wt)| wt * psi_hat.eval(w))
            .collect();
        Field {
            nodes: rule.nodes().to_vec(),
            weights,
            kind: rule.kind(),
            axis: rule.axis(),
        }
    }

    pub(crate) fn kind(&self) -> RuleKind {
        self.kind
    }

    pub(crate) fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub(crate) fn nodes_slice(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub(crate) fn weights_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Value, matrix gradient and (optionally) the Hessian in the coordinates
/// (M11, M22, M33, M12, M13, M23).
#[derive(Debug, Clone)]
pub(crate) struct Derivatives {
    pub g: f64,
    pub gradient: Matrix3<f64>,
    pub hessian: Option<Matrix6>,
}

impl Derivatives {
    pub fn f(&self, m: &Matrix3<f64>) -> f64 {
        self.g + m.trace()
    }

    /// ∂f/∂x for the coordinates above; off-diagonal entries count twice.
    pub fn coord_gradient(&self) -> Vector6 {
        let g = &self.gradient;
        Vector6::from_column_slice(&[
            g[(0, 0)],
            g[(1, 1)],
            g[(2, 2)],
            2.0 * g[(0, 1)],
            2.0 * g[(0, 2)],
            2.0 * g[(1, 2)],
        ])
    }

    pub fn residual(&self) -> f64 {
        self.gradient.abs().max()
    }
}

#[inline]
fn features(w: &Vector3<f64>) -> [f64; 6] {
    [
        w[0] * w[0],
        w[1] * w[1],
        w[2] * w[2],
        2.0 * w[0] * w[1],
        2.0 * w[0] * w[2],
        2.0 * w[1] * w[2],
    ]
}

pub(crate) fn derivatives(field: &Field, m: &Matrix3<f64>, with_hessian: bool) -> Result<Derivatives> {
    let c = g_constant();
    let mut g = 0.0;
    let mut lhs = Matrix3::zeros();
    let mut hess = [[0.0; 6]; 6];
    for (w, wt) in field.nodes.iter().zip(&field.weights) {
        let s = (m * w).dot(w);
        if !(s > 0.0) {
            return Err(Error::NotPositiveDefinite(s));
        }
        let r = 1.0 / s.sqrt();
        g += wt * r;
        let a = wt * r * r * r;
        lhs += w * w.transpose() * a;
        if with_hessian {
            let phi = features(w);
            let b = a * r * r;
            for k in 0..6 {
                let bk = b * phi[k];
                for l in k..6 {
                    hess[k][l] += bk * phi[l];
                }
            }
        }
    }
    let gradient = Matrix3::identity() - lhs * (0.5 * c);
    let hessian = with_hessian.then(|| {
        Matrix6::from_fn(|k, l| {
            let v = if k <= l { hess[k][l] } else { hess[l][k] };
            0.75 * c * v
        })
    });
    Ok(Derivatives {
        g: c * g,
        gradient: crate::shape::symmetrize(&gradient),
        hessian,
    })
}

/// Sphere rule suited to the shape matrix: the given rule unless it is a
/// product rule and M is eccentric, in which case a graded rule around the
/// minor eigenvector at the same base resolution.
pub fn adapted_rule(base: &SphereQuadrature, m: &ShapeMatrix) -> SphereQuadrature {
    if base.kind() != RuleKind::Product {
        return base.clone();
    }
    let (values, vectors) = m.sorted_eigen();
    let ratio = values[2] / values[0];
    if ratio >= GRADED_TRIGGER {
        return base.clone();
    }
    let (np, na) = base.resolution();
    graded_rule(proper_frame(&vectors), grading_levels(ratio), np, na)
}

/// Right-handed frame from sorted eigenvectors, third column the minor one.
pub(crate) fn proper_frame(v: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = v.column(0).normalize();
    let c2 = v.column(2).normalize();
    let c1 = c2.cross(&c0);
    Matrix3::from_columns(&[c0, c1, c2])
}

fn require_pd(m: &ShapeMatrix) -> Result<()> {
    let l = m.min_eigenvalue();
    if !(l > 0.0) {
        return Err(Error::NotPositiveDefinite(l));
    }
    Ok(())
}

fn evaluate(profile: &Profile, m: &ShapeMatrix, rule: &SphereQuadrature) -> Result<Derivatives> {
    require_pd(m)?;
    let field = Field::new(profile.psi_hat(), &adapted_rule(rule, m));
    derivatives(&field, m.matrix(), false)
}

/// g(M) = (√(2π)/|B|) ∫ Ψ̂(ω) / √(Mω·ω) dH².
pub fn g_value(profile: &Profile, m: &ShapeMatrix, rule: &SphereQuadrature) -> Result<f64> {
    Ok(evaluate(profile, m, rule)?.g)
}

pub fn f_value(profile: &Profile, m: &ShapeMatrix, rule: &SphereQuadrature) -> Result<f64> {
    Ok(evaluate(profile, m, rule)?.f(m.matrix()))
}

/// ∂f/∂M_ij = δ_ij - (1/|B|)√(π/2) ∫ Ψ̂ ω_i ω_j / (Mω·ω)^{3/2} dH².
pub fn f_gradient(profile: &Profile, m: &ShapeMatrix, rule: &SphereQuadrature) -> Result<Matrix3<f64>> {
    Ok(evaluate(profile, m, rule)?.gradient)
}

/// Minimiser of t ↦ f(tM): (g(M) / (2 tr M))^{2/3}.
pub fn t_min(profile: &Profile, m: &ShapeMatrix, rule: &SphereQuadrature) -> Result<f64> {
    let g = g_value(profile, m, rule)?;
    Ok((g / (2.0 * m.trace())).powf(2.0 / 3.0))
}

/// Max-abs entry of the Euler-Lagrange system minus the identity.
pub fn el_residual(profile: &Profile, m: &ShapeMatrix, rule: &SphereQuadrature) -> Result<f64> {
    Ok(evaluate(profile, m, rule)?.residual())
}
