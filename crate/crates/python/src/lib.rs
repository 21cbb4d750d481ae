//! Python module `anisoeq`: profiles, shapes, the equilibrium solver, energy,
//! verification and the scalar p functions.

use anisoeq_core::energy::{energy as core_energy, CandidateMeasure, EnergyResolution};
use anisoeq_core::equilibrium::{self, SolverConfig};
use anisoeq_core::harmonics::{self, PolynomialTerm};
use anisoeq_core::potential::verify_euler_lagrange;
use anisoeq_core::shape::{self, matrix_from_rows, matrix_rows};
use anisoeq_core::Error;
use nalgebra::{Matrix3, Vector3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_)
        | Error::OddComponent(_)
        | Error::DegreeTooSmall { .. }
        | Error::NotPositiveDefinite(_)
        | Error::InvalidShape(_)
        | Error::Hypothesis(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn unit(w: [f64; 3]) -> PyResult<Vector3<f64>> {
    let v = Vector3::from(w);
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(PyValueError::new_err("direction must be a nonzero finite vector"));
    }
    Ok(v / n)
}

/// Angular profile Ψ on the sphere, with its transform Ψ̂.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
pub struct Profile {
    inner: harmonics::Profile,
}

#[pymethods]
impl Profile {
    /// Ψ ≡ 1.
    #[staticmethod]
    fn coulomb() -> Self {
        Profile { inner: harmonics::Profile::coulomb() }
    }

    /// Terms are `((i, j, k), coef)` for coef·x₁ⁱx₂ʲx₃ᵏ, restricted to the sphere.
    #[staticmethod]
    #[pyo3(signature = (terms, max_degree = 8))]
    fn from_polynomial(terms: Vec<([u32; 3], f64)>, max_degree: usize) -> PyResult<Self> {
        let terms: Vec<PolynomialTerm> = terms.into_iter().map(|(exps, coef)| PolynomialTerm { exps, coef }).collect();
        let inner = harmonics::Profile::from_polynomial(&terms, max_degree).map_err(to_py)?;
        Ok(Profile { inner })
    }

    fn psi(&self, w: [f64; 3]) -> PyResult<f64> {
        Ok(self.inner.psi().eval(&unit(w)?))
    }

    fn psi_hat(&self, w: [f64; 3]) -> PyResult<f64> {
        Ok(self.inner.psi_hat().eval(&unit(w)?))
    }

    /// Profile whose transform is Ψ̂ + eps.
    fn perturbed(&self, eps: f64) -> Self {
        Profile { inner: self.inner.perturbed(eps) }
    }

    fn max_degree(&self) -> usize {
        self.inner.psi().max_degree()
    }

    fn __repr__(&self) -> String {
        format!("Profile(max_degree={})", self.inner.psi().max_degree())
    }
}

/// Ellipsoid R·diag(a)·B; a₃ = 0 is a flat shape.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
pub struct Shape {
    inner: shape::Shape,
}

#[pymethods]
impl Shape {
    #[new]
    #[pyo3(signature = (semiaxes, rotation = None))]
    fn new(semiaxes: [f64; 3], rotation: Option<[[f64; 3]; 3]>) -> PyResult<Self> {
        let r = rotation.map(|rows| matrix_from_rows(&rows)).unwrap_or_else(Matrix3::identity);
        let inner = shape::Shape::new(semiaxes, r).map_err(to_py)?;
        Ok(Shape { inner })
    }

    #[getter]
    fn semiaxes(&self) -> [f64; 3] {
        self.inner.semiaxes()
    }

    #[getter]
    fn rotation(&self) -> [[f64; 3]; 3] {
        matrix_rows(self.inner.rotation())
    }

    #[getter]
    fn shape_matrix(&self) -> [[f64; 3]; 3] {
        matrix_rows(self.inner.shape_matrix().matrix())
    }

    fn is_degenerate(&self) -> bool {
        self.inner.is_degenerate()
    }

    fn __repr__(&self) -> String {
        let [a1, a2, a3] = self.inner.semiaxes();
        format!("Shape(semiaxes=[{a1}, {a2}, {a3}])")
    }
}

#[pyclass(frozen)]
pub struct SolveResult {
    inner: equilibrium::SolveResult,
}

#[pymethods]
impl SolveResult {
    /// "ellipsoid" or "semi_ellipsoid".
    #[getter]
    fn classification(&self) -> &'static str {
        match self.inner.classification {
            equilibrium::Classification::Ellipsoid => "ellipsoid",
            equilibrium::Classification::SemiEllipsoid => "semi_ellipsoid",
        }
    }

    #[getter]
    fn shape(&self) -> Shape {
        Shape { inner: self.inner.shape.clone() }
    }

    #[getter]
    fn semiaxes(&self) -> [f64; 3] {
        self.inner.shape.semiaxes()
    }

    #[getter]
    fn el_residual(&self) -> f64 {
        self.inner.el_residual
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn condition_estimate(&self) -> f64 {
        self.inner.condition_estimate
    }

    #[getter]
    fn extrapolated_semiaxes(&self) -> Option<[f64; 2]> {
        self.inner.extrapolated_semiaxes
    }

    /// `(eps, semiaxes, residual)` per continuation step; empty on the direct path.
    #[getter]
    fn continuation_trace(&self) -> Vec<(f64, [f64; 3], f64)> {
        self.inner.continuation_trace.iter().map(|e| (e.eps, e.semiaxes, e.residual)).collect()
    }

    fn __repr__(&self) -> String {
        let [a1, a2, a3] = self.inner.shape.semiaxes();
        format!(
            "SolveResult(classification={:?}, semiaxes=[{a1}, {a2}, {a3}], energy={})",
            self.classification(),
            self.inner.energy
        )
    }
}

#[pyfunction]
#[pyo3(signature = (profile, grad_tol = None, max_iter = None, degeneracy_ratio = None))]
fn solve(
    profile: &Profile,
    grad_tol: Option<f64>,
    max_iter: Option<usize>,
    degeneracy_ratio: Option<f64>,
) -> PyResult<SolveResult> {
    let mut cfg = SolverConfig::default();
    if let Some(v) = grad_tol {
        cfg.grad_tol = v;
    }
    if let Some(v) = max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = degeneracy_ratio {
        cfg.degeneracy_ratio = v;
    }
    let inner = equilibrium::solve(&profile.inner, &cfg).map_err(to_py)?;
    Ok(SolveResult { inner })
}

/// Energy of the uniform law on `shape` (or its flat limit). Returns `(value, error)`.
#[pyfunction]
#[pyo3(signature = (profile, shape, level = 1))]
fn energy(profile: &Profile, shape: &Shape, level: usize) -> PyResult<(f64, f64)> {
    let res = EnergyResolution { level, ..EnergyResolution::default() };
    let e = core_energy(&profile.inner, &CandidateMeasure::from_shape(&shape.inner), &res).map_err(to_py)?;
    Ok((e.value, e.error))
}

/// Euler–Lagrange diagnostics for `shape`: constancy residual, potential
/// level, Hessian residual and the exterior minima.
#[pyfunction]
#[pyo3(signature = (profile, shape, n_support = 200, n_rays = 1000))]
fn verify(
    py: Python<'_>,
    profile: &Profile,
    shape: &Shape,
    n_support: usize,
    n_rays: usize,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let r = verify_euler_lagrange(&profile.inner, &shape.inner, n_support, n_rays).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("constancy_residual", r.constancy_residual)?;
    d.set_item("potential_level", r.potential_level)?;
    d.set_item("hessian_residual", r.hessian_residual)?;
    d.set_item("exterior_min", r.exterior_min)?;
    d.set_item("exterior_gap_min", r.exterior_gap_min)?;
    Ok(d.unbind())
}

#[pyfunction]
#[pyo3(signature = (t, order = 64))]
fn p_quartic(t: f64, order: usize) -> PyResult<f64> {
    equilibrium::p_quartic(t, order).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (t, alpha1 = 1.0, alpha2 = 1.0, order = 64))]
fn p_quadratic(t: f64, alpha1: f64, alpha2: f64, order: usize) -> PyResult<f64> {
    equilibrium::p_quadratic(t, alpha1, alpha2, order).map_err(to_py)
}

#[pymodule]
pub fn anisoeq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Profile>()?;
    m.add_class::<Shape>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(p_quartic, m)?)?;
    m.add_function(wrap_pyfunction!(p_quadratic, m)?)?;
    Ok(())
}
