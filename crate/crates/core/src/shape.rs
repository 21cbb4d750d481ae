//! Ellipsoids E = R D(a) B̄ and their shape matrices M = R D(a²) Rᵀ.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Volume of the unit ball.
pub const BALL_VOLUME: f64 = 4.0 * PI / 3.0;

/// Relative tolerance under which two semi-axes count as equal for gauge fixing.
pub const GAUGE_TOL: f64 = 1e-9;

const ORTHO_TOL: f64 = 1e-9;

/// Solid ellipsoid (or flat ellipse when `a3 == 0`) with canonical ordering a1 ≥ a2 ≥ a3.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    semiaxes: [f64; 3],
    rotation: Matrix3<f64>,
}

impl Shape {
    /// Validates and gauge-fixes: semi-axes are sorted descending, the rotation
    /// columns follow, and the basis inside repeated semi-axes is made canonical.
    pub fn new(semiaxes: [f64; 3], rotation: Matrix3<f64>) -> Result<Self> {
        if semiaxes.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidShape(format!(
                "semi-axes must be finite and nonnegative, got {semiaxes:?}"
            )));
        }
        if rotation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidShape("rotation has non-finite entries".into()));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if err > ORTHO_TOL {
            return Err(Error::InvalidShape(format!(
                "rotation is not orthogonal (|RᵀR - I| = {err:.2e})"
            )));
        }
        if rotation.determinant() < 0.0 {
            return Err(Error::InvalidShape("rotation has determinant -1".into()));
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| semiaxes[j].total_cmp(&semiaxes[i]));
        let a = [semiaxes[order[0]], semiaxes[order[1]], semiaxes[order[2]]];
        if !(a[1] > 0.0) {
            return Err(Error::InvalidShape(format!(
                "at most one semi-axis may vanish, got {semiaxes:?}"
            )));
        }
        let cols = Matrix3::from_columns(&[
            rotation.column(order[0]).into_owned(),
            rotation.column(order[1]).into_owned(),
            rotation.column(order[2]).into_owned(),
        ]);
        let rotation = gauge_fix(&a, &orthonormalize(&cols));
        Ok(Shape { semiaxes: a, rotation })
    }

    pub fn ball(radius: f64) -> Result<Self> {
        Self::new([radius; 3], Matrix3::identity())
    }

    pub fn axis_aligned(semiaxes: [f64; 3]) -> Result<Self> {
        Self::new(semiaxes, Matrix3::identity())
    }

    /// Shape with semi-axes √λ and principal directions of a PSD matrix.
    pub fn from_shape_matrix(m: &ShapeMatrix) -> Result<Self> {
        let (values, vectors) = m.sorted_eigen();
        let a = values.map(|v| v.max(0.0).sqrt());
        Shape::new(a, proper(&vectors))
    }

    pub fn semiaxes(&self) -> [f64; 3] {
        self.semiaxes
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn is_degenerate(&self) -> bool {
        self.semiaxes[2] == 0.0
    }

    /// R D(a): maps the unit ball onto the shape.
    pub fn transform(&self) -> Matrix3<f64> {
        self.rotation * Matrix3::from_diagonal(&Vector3::from(self.semiaxes))
    }

    pub fn shape_matrix(&self) -> ShapeMatrix {
        let d = Vector3::from(self.semiaxes.map(|a| a * a));
        let m = self.rotation * Matrix3::from_diagonal(&d) * self.rotation.transpose();
        ShapeMatrix(symmetrize(&m))
    }

    /// Lebesgue volume (zero for flat shapes).
    pub fn volume(&self) -> f64 {
        BALL_VOLUME * self.semiaxes.iter().product::<f64>()
    }

    /// Smallest over largest eigenvalue of the shape matrix.
    pub fn eigen_ratio(&self) -> f64 {
        (self.semiaxes[2] / self.semiaxes[0]).powi(2)
    }

    /// Unit normal of the flat support, i.e. the direction of the shortest axis.
    pub fn minor_axis(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    /// |D(a)Rᵀω|.
    pub fn stretch(&self, omega: &Vector3<f64>) -> f64 {
        let y = self.rotation.transpose() * omega;
        let a = self.semiaxes;
        ((a[0] * y[0]).powi(2) + (a[1] * y[1]).powi(2) + (a[2] * y[2]).powi(2)).sqrt()
    }

    /// Coordinates of `x` in the unit-ball frame, D(a)⁻¹Rᵀx. Flat shapes are rejected.
    pub fn to_ball(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        if self.is_degenerate() {
            return Err(Error::InvalidShape("flat shape has no ball coordinates".into()));
        }
        let y = self.rotation.transpose() * x;
        Ok(Vector3::new(
            y[0] / self.semiaxes[0],
            y[1] / self.semiaxes[1],
            y[2] / self.semiaxes[2],
        ))
    }

    /// The shape rotated by `q`: R ↦ QR.
    pub fn rotated(&self, q: &Matrix3<f64>) -> Result<Self> {
        Shape::new(self.semiaxes, q * self.rotation)
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Shape::new(self.semiaxes.map(|a| a * t), self.rotation)
    }

    pub fn to_spec(&self) -> ShapeSpec {
        ShapeSpec {
            semiaxes: self.semiaxes,
            rotation: matrix_rows(&self.rotation),
        }
    }
}

/// Serialised form of a [`Shape`]; rotation stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub semiaxes: [f64; 3],
    #[serde(default = "identity_rows")]
    pub rotation: [[f64; 3]; 3],
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

impl ShapeSpec {
    pub fn to_shape(&self) -> Result<Shape> {
        Shape::new(self.semiaxes, matrix_from_rows(&self.rotation))
    }
}

pub fn matrix_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

pub fn matrix_from_rows(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

/// Symmetric positive (semi)definite 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeMatrix(Matrix3<f64>);

impl ShapeMatrix {
    /// Accepts matrices symmetric up to rounding and symmetrises them exactly.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("shape matrix has non-finite entries".into()));
        }
        let scale = m.abs().max().max(f64::MIN_POSITIVE);
        let asym = (m - m.transpose()).abs().max();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "shape matrix is not symmetric (asymmetry {asym:.2e})"
            )));
        }
        Ok(ShapeMatrix(symmetrize(&m)))
    }

    /// Like [`ShapeMatrix::new`] but also requires positive definiteness.
    pub fn positive_definite(m: Matrix3<f64>) -> Result<Self> {
        let s = Self::new(m)?;
        let lmin = s.min_eigenvalue();
        if !(lmin > 0.0) {
            return Err(Error::NotPositiveDefinite(lmin));
        }
        Ok(s)
    }

    pub fn identity() -> Self {
        ShapeMatrix(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scaled(&self, t: f64) -> Self {
        ShapeMatrix(self.0 * t)
    }

    pub fn conjugated(&self, q: &Matrix3<f64>) -> Self {
        ShapeMatrix(symmetrize(&(q * self.0 * q.transpose())))
    }

    /// Eigenvalues descending with matching eigenvector columns.
    pub fn sorted_eigen(&self) -> ([f64; 3], Matrix3<f64>) {
        let eig = SymmetricEigen::new(self.0);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let values = order.map(|i| eig.eigenvalues[i]);
        let vectors = Matrix3::from_columns(&order.map(|i| eig.eigenvectors.column(i).into_owned()));
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sorted_eigen().0[2]
    }

    /// λ_min / λ_max.
    pub fn eigen_ratio(&self) -> f64 {
        let (v, _) = self.sorted_eigen();
        v[2] / v[0]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.cholesky().is_some() && self.min_eigenvalue() > 0.0
    }

    /// Entries (M11, M22, M33, M12, M13, M23).
    pub fn to_coords(&self) -> [f64; 6] {
        let m = &self.0;
        [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(0, 1)], m[(0, 2)], m[(1, 2)]]
    }

    pub fn from_coords(c: &[f64; 6]) -> Self {
        ShapeMatrix(Matrix3::new(
            c[0], c[3], c[4], //
            c[3], c[1], c[5], //
            c[4], c[5], c[2],
        ))
    }
}

pub(crate) fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

fn proper(v: &Matrix3<f64>) -> Matrix3<f64> {
    if v.determinant() < 0.0 {
        let mut w = *v;
        w.column_mut(2).neg_mut();
        w
    } else {
        *v
    }
}

fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = m.column(0).normalize();
    let c1 = (m.column(1) - c0 * c0.dot(&m.column(1))).normalize();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Deterministic choice of eigenvector basis for sorted semi-axes `a`.
///
/// Inside a group of equal semi-axes the basis is rebuilt from the coordinate
/// axes with the largest projections (lowest index on ties). Each of the first
/// two columns gets its largest component positive; the third is their cross product.
fn gauge_fix(a: &[f64; 3], r: &Matrix3<f64>) -> Matrix3<f64> {
    let same = |x: f64, y: f64| (x - y).abs() <= GAUGE_TOL * x.abs().max(y.abs());
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..3 {
        if same(a[i - 1], a[i]) {
            groups.last_mut().unwrap().push(i);
        } else {
            groups.push(vec![i]);
        }
    }
    let mut cols: Vec<Vector3<f64>> = (0..3).map(|i| r.column(i).into_owned()).collect();
    for g in groups.iter().filter(|g| g.len() > 1) {
        let basis: Vec<Vector3<f64>> = g.iter().map(|&i| cols[i]).collect();
        let project = |v: &Vector3<f64>| basis.iter().map(|b| b * b.dot(v)).sum::<Vector3<f64>>();
        let mut chosen: Vec<Vector3<f64>> = Vec::new();
        let mut used = [false; 3];
        for &slot in g {
            let mut best: Option<(usize, Vector3<f64>, f64)> = None;
            for k in 0..3 {
                if used[k] {
                    continue;
                }
                let mut v = project(&Vector3::ith(k, 1.0));
                for c in &chosen {
                    v -= c * c.dot(&v);
                }
                let n = v.norm();
                if best.as_ref().is_none_or(|b| n > b.2 + 1e-12) {
                    best = Some((k, v, n));
                }
            }
            let (k, v, n) = best.expect("three candidate axes");
            used[k] = true;
            let v = v / n;
            chosen.push(v);
            cols[slot] = v;
        }
    }
    for c in cols.iter_mut().take(2) {
        let k = (0..3)
            .max_by(|&i, &j| {
                c[i].abs()
                    .partial_cmp(&(c[j].abs()))
                    .unwrap()
                    .then(j.cmp(&i))
            })
            .unwrap();
        if c[k] < 0.0 {
            *c = -*c;
        }
    }
    let c0 = cols[0].normalize();
    let c1 = (cols[1] - c0 * c0.dot(&cols[1])).normalize();
    Matrix3::from_columns(&[c0, c1, c0.cross(&c1)])
}
