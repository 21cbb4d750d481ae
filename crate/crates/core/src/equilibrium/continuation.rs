//! ε-continuation through strictly positive perturbations and classification
//! of the limiting shape.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use super::objective::proper_frame;
use super::solver::{equilibrium_from, initial_guess, solve_equilibrium, solve_face, Newton, SolverConfig};
use crate::error::{Error, Result};
use crate::harmonics::{positivity_scan, Profile};
use crate::shape::{Shape, ShapeMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Ellipsoid,
    SemiEllipsoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub eps: f64,
    pub semiaxes: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
    /// Condition number of the scaled Newton matrix at the converged point.
    pub condition: f64,
}

/// Relative change of the smallest semiaxis over the last three steps
/// below which the trace counts as stabilised.
pub const STABLE_MINOR: f64 = 1e-3;
/// Same for the ratio a₂/a₁ on a collapsing trace.
pub const STABLE_RATIO: f64 = 1e-2;

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn classify(trace: &[TraceEntry], cfg: &SolverConfig) -> Result<Classification> {
    let Some(first) = trace.first() else {
        return Err(Error::Inconclusive("empty trace".into()));
    };
    let last = trace.last().expect("nonempty");
    let deg = cfg.degeneracy_ratio;
    let [a1, a2, a3] = last.semiaxes;
    if a2 / a1 < deg {
        return Err(Error::TheoryViolation(format!(
            "two semiaxes collapse: a2/a1 = {:.3e}",
            a2 / a1
        )));
    }
    if a1 < deg * first.semiaxes[0] {
        return Err(Error::TheoryViolation(format!(
            "all semiaxes collapse: a1 = {a1:.3e} from {:.3e}",
            first.semiaxes[0]
        )));
    }
    if trace.len() < 3 {
        return Err(Error::Inconclusive(format!("{} entries, need 3", trace.len())));
    }
    let tail = &trace[trace.len() - 3..];
    let minor: Vec<f64> = tail.iter().map(|e| e.semiaxes[2]).collect();
    let minor_change = rel_change(minor[0], minor[2]).max(rel_change(minor[1], minor[2]));
    if minor_change < STABLE_MINOR && a3 / a1 > deg {
        return Ok(Classification::Ellipsoid);
    }
    let ratios: Vec<f64> = tail.iter().map(|e| e.semiaxes[2] / e.semiaxes[0]).collect();
    let decreasing = ratios[0] > ratios[1] && ratios[1] > ratios[2];
    let planar: Vec<f64> = tail.iter().map(|e| e.semiaxes[1] / e.semiaxes[0]).collect();
    let planar_change = rel_change(planar[0], planar[2]).max(rel_change(planar[1], planar[2]));
    if a3 / a1 < deg && decreasing && planar_change < STABLE_RATIO {
        return Ok(Classification::SemiEllipsoid);
    }
    Err(Error::Inconclusive(format!(
        "a3/a1 = {:.3e}, minor change {minor_change:.3e}, a2/a1 change {planar_change:.3e}",
        a3 / a1
    )))
}

/// Value at ε = 0 of the quadratic in √ε through the last three trace points.
pub fn richardson_sqrt(eps: [f64; 3], values: [f64; 3]) -> f64 {
    let x = eps.map(f64::sqrt);
    let mut out = 0.0;
    for i in 0..3 {
        let mut l = 1.0;
        for j in 0..3 {
            if j != i {
                l *= x[j] / (x[j] - x[i]);
            }
        }
        out += l * values[i];
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub classification: Classification,
    pub shape: Shape,
    pub shape_matrix: ShapeMatrix,
    pub el_residual: f64,
    /// I(μ₀) = f(M₀)/5.
    pub energy: f64,
    pub continuation_trace: Vec<TraceEntry>,
    /// (a₁, a₂) extrapolated from the trace, for flat limits.
    pub extrapolated_semiaxes: Option<[f64; 2]>,
    pub iterations: usize,
    pub condition_estimate: f64,
}

/// Tracks the minimisers for Ψ̂ + ε along ε = eps0·eps_factor^k and resolves
/// the limit ε → 0.
pub fn continuation_solve(profile: &Profile, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let scan = positivity_scan(profile.psi_hat(), 64)?;
    if !scan.nonnegative {
        return Err(Error::Hypothesis(format!(
            "transform takes the negative value {:.3e}",
            scan.min_value
        )));
    }
    let mut trace = Vec::with_capacity(cfg.eps_steps + 1);
    let mut m = initial_guess(&profile.perturbed(cfg.eps0).psi_hat().clone());
    let mut last_vectors = Matrix3::identity();
    let mut iterations = 0;
    let mut condition = f64::NAN;
    for k in 0..=cfg.eps_steps {
        let eps = cfg.eps0 * cfg.eps_factor.powi(k as i32);
        let perturbed = profile.perturbed(eps);
        let out = Newton::new(perturbed.psi_hat(), cfg.n_polar, cfg.n_azimuth).solve(m, cfg)?;
        m = out.m;
        iterations += out.iterations;
        condition = out.condition;
        let sm = ShapeMatrix::new(m)?;
        let (values, vectors) = sm.sorted_eigen();
        last_vectors = vectors;
        trace.push(TraceEntry {
            eps,
            semiaxes: values.map(|v| v.max(0.0).sqrt()),
            residual: out.residual,
            iterations: out.iterations,
            condition: out.condition,
        });
    }
    match classify(&trace, cfg)? {
        Classification::Ellipsoid => {
            let out = Newton::new(profile.psi_hat(), cfg.n_polar, cfg.n_azimuth).solve(m, cfg)?;
            let eq = equilibrium_from(&out)?;
            Ok(SolveResult {
                classification: Classification::Ellipsoid,
                shape: eq.shape,
                shape_matrix: eq.shape_matrix,
                el_residual: eq.residual,
                energy: eq.f / 5.0,
                continuation_trace: trace,
                extrapolated_semiaxes: None,
                iterations: iterations + out.iterations,
                condition_estimate: out.condition,
            })
        }
        Classification::SemiEllipsoid => {
            let tail = &trace[trace.len() - 3..];
            let eps = [tail[0].eps, tail[1].eps, tail[2].eps];
            let extrap = [0, 1].map(|i| {
                richardson_sqrt(eps, [tail[0].semiaxes[i], tail[1].semiaxes[i], tail[2].semiaxes[i]])
            });
            let frame = proper_frame(&last_vectors);
            let b0 = Matrix2::new(extrap[0] * extrap[0], 0.0, 0.0, extrap[1] * extrap[1]);
            let face = solve_face(profile.psi_hat(), &frame, b0, cfg)?;
            Ok(SolveResult {
                classification: Classification::SemiEllipsoid,
                shape_matrix: face.shape.shape_matrix(),
                shape: face.shape,
                el_residual: face.residual,
                energy: face.f / 5.0,
                continuation_trace: trace,
                extrapolated_semiaxes: Some(extrap),
                iterations: iterations + face.iterations,
                condition_estimate: condition,
            })
        }
    }
}

/// Solves directly when Ψ̂ > 0 and by continuation when Ψ̂ ≥ 0 only.
pub fn solve(profile: &Profile, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let psi = positivity_scan(profile.psi(), 64)?;
    if !psi.strictly_positive {
        return Err(Error::Hypothesis(format!(
            "profile is not strictly positive (min {:.3e})",
            psi.min_value
        )));
    }
    let hat = positivity_scan(profile.psi_hat(), 64)?;
    if !hat.nonnegative {
        return Err(Error::Hypothesis(format!(
            "transform takes the negative value {:.3e}",
            hat.min_value
        )));
    }
    if !hat.strictly_positive {
        return continuation_solve(profile, cfg);
    }
    let eq = solve_equilibrium(profile, cfg)?;
    Ok(SolveResult {
        classification: Classification::Ellipsoid,
        shape: eq.shape,
        shape_matrix: eq.shape_matrix,
        el_residual: eq.residual,
        energy: eq.f / 5.0,
        continuation_trace: Vec::new(),
        extrapolated_semiaxes: None,
        iterations: eq.iterations,
        condition_estimate: eq.condition_estimate,
    })
}
