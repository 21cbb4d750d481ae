//! The command pipelines behind each subcommand.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use super::config::RunConfig;
use super::report::*;
use crate::energy::{divergence_check, energy, CandidateMeasure, MeasureSpec};
use crate::equilibrium::{p_quadratic, p_quartic, solve, Classification};
use crate::error::{invalid, Error, Result};
use crate::harmonics::{fourier_multiplier, positivity_scan, Profile};
use crate::potential::verify_euler_lagrange_at;
use crate::shape::{matrix_rows, Shape, ShapeSpec};

/// Grid resolution of the positivity scans in reports.
pub const SCAN_RESOLUTION: usize = 64;
/// Refinement levels used for segment laws.
pub const SEGMENT_LEVELS: usize = 6;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Hypothesis(_) | Error::OddComponent(_) => EXIT_HYPOTHESIS,
        Error::NoConvergence { .. }
        | Error::EigenvalueCollapse { .. }
        | Error::Inconclusive(_)
        | Error::TheoryViolation(_) => EXIT_NO_CONVERGENCE,
        _ => EXIT_OTHER,
    }
}

pub fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidArgument(_) => "invalid_argument",
        Error::OddComponent(_) => "odd_component",
        Error::DegreeTooSmall { .. } => "degree_too_small",
        Error::NonFiniteIntegrand(_) => "non_finite_integrand",
        Error::NotPositiveDefinite(_) => "not_positive_definite",
        Error::InvalidShape(_) => "invalid_shape",
        Error::Hypothesis(_) => "hypothesis",
        Error::NoConvergence { .. } => "no_convergence",
        Error::EigenvalueCollapse { .. } => "eigenvalue_collapse",
        Error::TheoryViolation(_) => "theory_violation",
        Error::Inconclusive(_) => "inconclusive",
        Error::Refinement(_) => "refinement",
        Error::InfiniteEnergy(_) => "infinite_energy",
    }
}

pub fn profile_summary(profile: &Profile) -> Result<ProfileSummary> {
    Ok(ProfileSummary {
        psi: profile.psi().coefficients(),
        psi_hat: profile.psi_hat().coefficients(),
        psi_positivity: positivity_scan(profile.psi(), SCAN_RESOLUTION)?,
        psi_hat_positivity: positivity_scan(profile.psi_hat(), SCAN_RESOLUTION)?,
    })
}

fn verify_shape(cfg: &RunConfig, profile: &Profile, shape: &Shape) -> Result<VerifySummary> {
    let v = &cfg.verify;
    let details = verify_euler_lagrange_at(profile, shape, v.n_support, v.n_rays, v.n_polar, v.n_azimuth)?;
    Ok(VerifySummary {
        passed: details.passes(v.constancy_tol, v.exterior_tol),
        constancy_tol: v.constancy_tol,
        exterior_tol: v.exterior_tol,
        details,
    })
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveReport> {
    let start = Instant::now();
    cfg.validate()?;
    let profile = cfg.profile()?;
    let summary = profile_summary(&profile)?;
    if !summary.psi_positivity.strictly_positive {
        return Err(Error::Hypothesis(format!(
            "profile is not strictly positive (min {:.3e} at {:?})",
            summary.psi_positivity.min_value, summary.psi_positivity.argmin
        )));
    }
    if !summary.psi_hat_positivity.nonnegative {
        return Err(Error::Hypothesis(format!(
            "transform is negative (min {:.3e} at {:?})",
            summary.psi_hat_positivity.min_value, summary.psi_hat_positivity.argmin
        )));
    }
    let result = solve(&profile, &cfg.solver_config())?;
    let verification = verify_shape(cfg, &profile, &result.shape)?;
    let estimate = energy(&profile, &CandidateMeasure::from_shape(&result.shape), &cfg.energy)?;
    let shape = ShapeReport {
        semiaxes: result.shape.semiaxes(),
        rotation: matrix_rows(result.shape.rotation()),
        shape_matrix: matrix_rows(result.shape_matrix.matrix()),
    };
    debug_assert_eq!(
        shape.semiaxes[2] == 0.0,
        result.classification == Classification::SemiEllipsoid
    );
    Ok(SolveReport {
        tool: ToolInfo::default(),
        config: cfg.clone(),
        profile: summary,
        classification: result.classification,
        shape,
        el_residual: result.el_residual,
        exterior_el_min: verification.details.exterior_min,
        verification,
        energy: EnergySummary {
            value: estimate.value,
            error: estimate.error,
            from_objective: result.energy,
        },
        extrapolated_semiaxes: result.extrapolated_semiaxes,
        iterations: result.iterations,
        condition_estimate: result.condition_estimate,
        continuation_trace: result.continuation_trace,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Reads a shape from JSON: either a bare shape or any document with a
/// top-level `shape` entry, such as a solve report.
pub fn load_shape(path: &Path) -> Result<ShapeSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_shape(&text)
}

pub fn parse_shape(text: &str) -> Result<ShapeSpec> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::InvalidShape(e.to_string()))?;
    let inner = value.get("shape").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| Error::InvalidShape(e.to_string()))
}

pub fn cmd_verify(cfg: &RunConfig, spec: &ShapeSpec) -> Result<VerifyReport> {
    let start = Instant::now();
    cfg.validate()?;
    let profile = cfg.profile()?;
    let shape = spec.to_shape()?;
    let verification = verify_shape(cfg, &profile, &shape)?;
    Ok(VerifyReport {
        tool: ToolInfo::default(),
        config: cfg.clone(),
        shape: shape.to_spec(),
        verification,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn load_measure(path: &Path) -> Result<MeasureSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("measure: {e}")))
}

pub fn cmd_energy(cfg: &RunConfig, spec: &MeasureSpec) -> Result<EnergyReport> {
    let start = Instant::now();
    cfg.validate()?;
    let profile = cfg.profile()?;
    let mu = spec.to_measure()?;
    let result = match mu {
        CandidateMeasure::SegmentLaw { .. } => {
            let levels = divergence_check(&profile, &mu, SEGMENT_LEVELS)?;
            if levels.divergent {
                EnergyOutcome::Divergent { levels }
            } else {
                EnergyOutcome::Undetermined { levels }
            }
        }
        _ => EnergyOutcome::Finite {
            estimate: energy(&profile, &mu, &cfg.energy)?,
        },
    };
    Ok(EnergyReport {
        tool: ToolInfo::default(),
        config: cfg.clone(),
        measure: mu.to_spec(),
        result,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn cmd_fourier(cfg: &RunConfig) -> Result<FourierReport> {
    cfg.validate()?;
    let profile = cfg.profile()?;
    let multipliers = (0..=cfg.max_degree)
        .step_by(2)
        .map(|degree| Ok(Multiplier { degree, value: fourier_multiplier(degree)? }))
        .collect::<Result<_>>()?;
    Ok(FourierReport {
        tool: ToolInfo::default(),
        max_degree: cfg.max_degree,
        multipliers,
        profile: profile_summary(&profile)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PVariant {
    Quartic,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub variant: PVariant,
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    /// (α₁, α₂) for the quadratic variant.
    pub alpha: [f64; 2],
    pub order: usize,
    pub log_spacing: bool,
}

/// (t, p(t)) at `steps + 1` points from t_min to t_max.
pub fn cmd_scan_p(spec: &ScanSpec) -> Result<Vec<(f64, f64)>> {
    let ScanSpec { variant, t_min, t_max, steps, alpha, order, log_spacing } = *spec;
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(invalid(format!("need t_min < t_max, got [{t_min}, {t_max}]")));
    }
    if steps == 0 {
        return Err(invalid("steps must be at least 1"));
    }
    let lower_ok = match variant {
        PVariant::Quartic => t_min >= 0.0,
        PVariant::Quadratic => t_min > 0.0,
    };
    if !lower_ok || (log_spacing && t_min <= 0.0) {
        return Err(invalid(format!("t_min = {t_min} out of range")));
    }
    (0..=steps)
        .map(|i| {
            let s = i as f64 / steps as f64;
            let t = match (i, log_spacing) {
                (0, _) => t_min,
                (i, _) if i == steps => t_max,
                (_, true) => t_min * (t_max / t_min).powf(s),
                (_, false) => t_min + s * (t_max - t_min),
            };
            let p = match variant {
                PVariant::Quartic => p_quartic(t, order)?,
                PVariant::Quadratic => p_quadratic(t, alpha[0], alpha[1], order)?,
            };
            Ok((t, p))
        })
        .collect()
}

pub fn write_csv(mut out: impl Write, rows: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "t,p")?;
    for (t, p) in rows {
        writeln!(out, "{t},{p}")?;
    }
    Ok(())
}
