//! Damped Newton minimisation of f over positive-definite matrices.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::objective::{derivatives, proper_frame, Derivatives, Field, Matrix6, Vector6};
use crate::error::{invalid, Error, Result};
use crate::harmonics::{positivity_scan, HarmonicExpansion, Profile};
use crate::quadrature::{grading_levels, graded_rule, product_rule, RuleKind, DEGENERATE_LEVELS, GRADED_TRIGGER};
use crate::shape::{Shape, ShapeMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    pub max_halvings: usize,
    pub eps0: f64,
    pub eps_factor: f64,
    pub eps_steps: usize,
    /// Threshold on a₃/a₁ for the flat classification.
    pub degeneracy_ratio: f64,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-10,
            max_iter: 200,
            armijo: 1e-4,
            max_halvings: 60,
            eps0: 0.1,
            eps_factor: 0.5,
            eps_steps: 20,
            degeneracy_ratio: 1e-3,
            n_polar: 64,
            n_azimuth: 128,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("armijo", self.armijo),
            ("eps0", self.eps0),
            ("degeneracy_ratio", self.degeneracy_ratio),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eps_factor > 0.0 && self.eps_factor < 1.0) {
            return Err(invalid(format!("eps_factor must lie in (0, 1), got {}", self.eps_factor)));
        }
        if self.max_iter == 0 || self.max_halvings == 0 {
            return Err(invalid("max_iter and max_halvings must be positive"));
        }
        if self.n_polar < 4 || self.n_azimuth < 8 || self.n_azimuth % 2 != 0 {
            return Err(invalid(format!(
                "bad quadrature resolution ({}, {})",
                self.n_polar, self.n_azimuth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub m: Matrix3<f64>,
    pub f: f64,
    pub residual: f64,
    pub iterations: usize,
    pub condition: f64,
}

/// Newton iteration with the sphere rule re-adapted to the iterate.
pub(crate) struct Newton {
    psi_hat: HarmonicExpansion,
    n_polar: usize,
    n_azimuth: usize,
    field: Option<(Field, usize)>,
}

impl Newton {
    pub fn new(psi_hat: &HarmonicExpansion, n_polar: usize, n_azimuth: usize) -> Self {
        Newton {
            psi_hat: psi_hat.trimmed(),
            n_polar,
            n_azimuth,
            field: None,
        }
    }

    fn ensure_field(&mut self, m: &Matrix3<f64>) -> Result<()> {
        let (values, vectors) = ShapeMatrix::new(*m)?.sorted_eigen();
        let ratio = values[2] / values[0];
        if ratio >= GRADED_TRIGGER {
            if !matches!(&self.field, Some((f, _)) if f.kind() == RuleKind::Product) {
                let rule = product_rule(Matrix3::identity(), self.n_polar, self.n_azimuth);
                self.field = Some((Field::new(&self.psi_hat, &rule), 0));
            }
            return Ok(());
        }
        let needed = grading_levels(ratio);
        let axis = vectors.column(2).into_owned();
        let tol = (0.25 * ratio.sqrt()).cos();
        let keep = matches!(&self.field,
            Some((f, levels)) if f.kind() != RuleKind::Product
                && *levels >= needed
                && f.axis().dot(&axis).abs() >= tol);
        if !keep {
            let levels = needed + 2;
            let rule = graded_rule(proper_frame(&vectors), levels, self.n_polar, self.n_azimuth);
            self.field = Some((Field::new(&self.psi_hat, &rule), levels));
        }
        Ok(())
    }

    fn eval(&self, m: &Matrix3<f64>, hessian: bool) -> Result<Derivatives> {
        derivatives(&self.field.as_ref().expect("field built").0, m, hessian)
    }

    pub fn solve(&mut self, m0: Matrix3<f64>, cfg: &SolverConfig) -> Result<NewtonOutcome> {
        let mut m = m0;
        let mut residual = f64::INFINITY;
        for it in 0..cfg.max_iter {
            self.ensure_field(&m)?;
            let d = self.eval(&m, true)?;
            residual = d.residual();
            let h = d.hessian.expect("requested");
            if residual <= cfg.grad_tol {
                return Ok(NewtonOutcome {
                    f: d.f(&m),
                    m,
                    residual,
                    iterations: it,
                    condition: scaled_condition(&h),
                });
            }
            let step = newton_step(&h, &d.coord_gradient());
            let dm = *ShapeMatrix::from_coords(&step.into()).matrix();
            let f0 = d.f(&m);
            let slope = d.coord_gradient().dot(&step);
            let mut tau = 1.0;
            let mut accepted = false;
            for _ in 0..cfg.max_halvings {
                let trial = m + dm * tau;
                if trial.cholesky().is_some() {
                    if let Ok(dt) = self.eval(&trial, false) {
                        let ft = dt.f(&trial);
                        let armijo = ft <= f0 + cfg.armijo * tau * slope;
                        // Near the solution f stalls at rounding level; accept
                        // full steps that still reduce the residual.
                        let flat = tau == 1.0 && dt.residual() < residual;
                        if armijo || flat {
                            m = trial;
                            accepted = true;
                            break;
                        }
                    }
                }
                tau *= 0.5;
            }
            if !accepted {
                return Err(Error::NoConvergence { iterations: it, residual });
            }
        }
        Err(Error::NoConvergence {
            iterations: cfg.max_iter,
            residual,
        })
    }
}

fn scaling(h: &Matrix6) -> Vector6 {
    Vector6::from_fn(|i, _| 1.0 / h[(i, i)].max(f64::MIN_POSITIVE).sqrt())
}

/// Newton direction from the Jacobi-scaled system, shifted if Cholesky fails.
fn newton_step(h: &Matrix6, grad: &Vector6) -> Vector6 {
    let s = scaling(h);
    let hs = Matrix6::from_fn(|i, j| s[i] * h[(i, j)] * s[j]);
    let gs = grad.component_mul(&s);
    let mut shift = 0.0;
    loop {
        let shifted = hs + Matrix6::identity() * shift;
        if let Some(ch) = shifted.cholesky() {
            return -ch.solve(&gs).component_mul(&s);
        }
        shift = if shift == 0.0 { 1e-12 } else { shift * 10.0 };
    }
}

/// Condition number of the Jacobi-scaled Newton matrix.
fn scaled_condition(h: &Matrix6) -> f64 {
    let s = scaling(h);
    let hs = Matrix6::from_fn(|i, j| s[i] * h[(i, j)] * s[j]);
    let e = SymmetricEigen::new(hs).eigenvalues;
    let max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Result of a direct solve in the strictly positive regime.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub shape_matrix: ShapeMatrix,
    pub shape: Shape,
    /// Value of f at the minimiser; the energy of the law is f/5.
    pub f: f64,
    pub residual: f64,
    pub iterations: usize,
    pub condition_estimate: f64,
}

/// Starting point t_min(I)·I: for M = tI the objective is 3t + g(I)/√t.
pub(crate) fn initial_guess(psi_hat: &HarmonicExpansion) -> Matrix3<f64> {
    let g = super::objective::g_constant() * psi_hat.coefficient(0, 0) * (4.0 * std::f64::consts::PI).sqrt();
    let t = (g / 6.0).powf(2.0 / 3.0);
    Matrix3::identity() * t
}

pub(crate) fn equilibrium_from(out: &NewtonOutcome) -> Result<Equilibrium> {
    let shape_matrix = ShapeMatrix::positive_definite(out.m)?;
    Ok(Equilibrium {
        shape: Shape::from_shape_matrix(&shape_matrix)?,
        shape_matrix,
        f: out.f,
        residual: out.residual,
        iterations: out.iterations,
        condition_estimate: out.condition,
    })
}

/// Minimises f when Ψ̂ is strictly positive.
pub fn solve_equilibrium(profile: &Profile, cfg: &SolverConfig) -> Result<Equilibrium> {
    cfg.validate()?;
    let scan = positivity_scan(profile.psi_hat(), 64)?;
    if !scan.strictly_positive {
        return Err(Error::Hypothesis(format!(
            "direct solve needs a strictly positive transform (min {:.3e}); use continuation",
            scan.min_value
        )));
    }
    let mut newton = Newton::new(profile.psi_hat(), cfg.n_polar, cfg.n_azimuth);
    let out = newton.solve(initial_guess(profile.psi_hat()), cfg)?;
    let eq = equilibrium_from(&out)?;
    let (values, _) = eq.shape_matrix.sorted_eigen();
    let ratio = values[2] / values[0];
    if ratio < cfg.degeneracy_ratio {
        return Err(Error::EigenvalueCollapse { ratio });
    }
    Ok(eq)
}

/// Newton on the face {P B Pᵀ} of flat shape matrices with a fixed unit normal:
/// the in-plane Euler-Lagrange system in the 2×2 variable B.
pub(crate) struct FaceOutcome {
    pub shape: Shape,
    pub f: f64,
    pub residual: f64,
    pub iterations: usize,
}

pub(crate) fn solve_face(
    psi_hat: &HarmonicExpansion,
    frame: &Matrix3<f64>,
    b0: Matrix2<f64>,
    cfg: &SolverConfig,
) -> Result<FaceOutcome> {
    let rule = graded_rule(*frame, DEGENERATE_LEVELS, cfg.n_polar, cfg.n_azimuth);
    let field = Field::new(psi_hat, &rule);
    let p1 = frame.column(0).into_owned();
    let p2 = frame.column(1).into_owned();
    let c = super::objective::g_constant();
    let projected: Vec<(f64, f64)> = field_nodes(&field).map(|w| (w.dot(&p1), w.dot(&p2))).collect();
    let weights = field_weights(&field);

    let eval = |b: &Matrix2<f64>, hessian: bool| -> Result<(f64, Matrix2<f64>, nalgebra::Matrix3<f64>)> {
        let mut g = 0.0;
        let mut lhs = Matrix2::zeros();
        let mut h = nalgebra::Matrix3::zeros();
        for ((u, v), wt) in projected.iter().zip(weights) {
            let s = b[(0, 0)] * u * u + 2.0 * b[(0, 1)] * u * v + b[(1, 1)] * v * v;
            if !(s > 0.0) {
                return Err(Error::NotPositiveDefinite(s));
            }
            let r = 1.0 / s.sqrt();
            g += wt * r;
            let a = wt * r * r * r;
            lhs += Matrix2::new(u * u, u * v, u * v, v * v) * a;
            if hessian {
                let phi = nalgebra::Vector3::new(u * u, v * v, 2.0 * u * v);
                h += phi * phi.transpose() * (a * r * r);
            }
        }
        let grad = Matrix2::identity() - lhs * (0.5 * c);
        Ok((c * g + b.trace(), grad, h * (0.75 * c)))
    };

    let mut b = b0;
    let mut residual = f64::INFINITY;
    for it in 0..cfg.max_iter {
        let (f0, grad, h) = eval(&b, true)?;
        residual = grad.abs().max();
        if residual <= cfg.grad_tol {
            return Ok(FaceOutcome {
                shape: face_shape(frame, &b)?,
                f: f0,
                residual,
                iterations: it,
            });
        }
        let gv = nalgebra::Vector3::new(grad[(0, 0)], grad[(1, 1)], 2.0 * grad[(0, 1)]);
        let step = h.cholesky().ok_or(Error::NoConvergence { iterations: it, residual })?.solve(&-gv);
        let db = Matrix2::new(step[0], step[2], step[2], step[1]);
        let slope = gv.dot(&step);
        let mut tau = 1.0;
        let mut accepted = false;
        for _ in 0..cfg.max_halvings {
            let trial = b + db * tau;
            if trial.cholesky().is_some() {
                if let Ok((ft, gt, _)) = eval(&trial, false) {
                    if ft <= f0 + cfg.armijo * tau * slope || (tau == 1.0 && gt.abs().max() < residual) {
                        b = trial;
                        accepted = true;
                        break;
                    }
                }
            }
            tau *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: it, residual });
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        residual,
    })
}

fn field_nodes(field: &Field) -> impl Iterator<Item = &Vector3<f64>> {
    field.nodes_slice().iter()
}

fn field_weights(field: &Field) -> &[f64] {
    field.weights_slice()
}

fn face_shape(frame: &Matrix3<f64>, b: &Matrix2<f64>) -> Result<Shape> {
    let e = SymmetricEigen::new(*b);
    let (i, j) = if e.eigenvalues[0] >= e.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let p = frame.fixed_columns::<2>(0).into_owned();
    let u = p * e.eigenvectors.column(i);
    let v = p * e.eigenvectors.column(j);
    let n = u.cross(&v);
    Shape::new(
        [e.eigenvalues[i].sqrt(), e.eigenvalues[j].sqrt(), 0.0],
        Matrix3::from_columns(&[u, v, n]),
    )
}
