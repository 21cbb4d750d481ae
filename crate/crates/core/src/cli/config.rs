//! Run configuration. Every field except the profile has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyResolution;
use crate::equilibrium::SolverConfig;
use crate::error::{invalid, Result};
use crate::harmonics::{Profile, ProfileSource};

/// Largest truncation degree accepted for Ψ.
pub const MAX_DEGREE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSource,
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub continuation: ContinuationSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub energy: EnergyResolution,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_max_degree() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        QuadratureSection {
            n_polar: d.n_polar,
            n_azimuth: d.n_azimuth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            grad_tol: d.grad_tol,
            max_iter: d.max_iter,
            armijo: d.armijo,
            max_halvings: d.max_halvings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSection {
    pub eps0: f64,
    pub eps_factor: f64,
    pub eps_steps: usize,
    pub degeneracy_ratio: f64,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        ContinuationSection {
            eps0: d.eps0,
            eps_factor: d.eps_factor,
            eps_steps: d.eps_steps,
            degeneracy_ratio: d.degeneracy_ratio,
        }
    }
}

/// Tolerances and sample counts of the Euler-Lagrange check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub constancy_tol: f64,
    pub exterior_tol: f64,
    pub n_support: usize,
    pub n_rays: usize,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        let (n_polar, n_azimuth) = crate::potential::VERIFY_RESOLUTION;
        VerifySection {
            constancy_tol: 1e-7,
            exterior_tol: 1e-8,
            n_support: 200,
            n_rays: 1000,
            n_polar,
            n_azimuth,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(profile: ProfileSource) -> Self {
        RunConfig {
            profile,
            max_degree: default_max_degree(),
            quadrature: QuadratureSection::default(),
            solver: SolverSection::default(),
            continuation: ContinuationSection::default(),
            verify: VerifySection::default(),
            energy: EnergyResolution::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            grad_tol: self.solver.grad_tol,
            max_iter: self.solver.max_iter,
            armijo: self.solver.armijo,
            max_halvings: self.solver.max_halvings,
            eps0: self.continuation.eps0,
            eps_factor: self.continuation.eps_factor,
            eps_steps: self.continuation.eps_steps,
            degeneracy_ratio: self.continuation.degeneracy_ratio,
            n_polar: self.quadrature.n_polar,
            n_azimuth: self.quadrature.n_azimuth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree > MAX_DEGREE_CAP {
            return Err(invalid(format!(
                "max_degree {} exceeds the cap {MAX_DEGREE_CAP}",
                self.max_degree
            )));
        }
        self.solver_config().validate()?;
        let v = &self.verify;
        if !(v.constancy_tol > 0.0 && v.exterior_tol > 0.0) {
            return Err(invalid("verify tolerances must be positive"));
        }
        if v.n_support < 2 || v.n_rays == 0 {
            return Err(invalid("verify needs n_support >= 2 and n_rays >= 1"));
        }
        if v.n_polar < 4 || v.n_azimuth < 8 || !v.n_azimuth.is_multiple_of(2) {
            return Err(invalid("verify resolution must have n_polar >= 4 and even n_azimuth >= 8"));
        }
        let e = &self.energy;
        if e.n_polar < 4 || e.n_azimuth < 8 || !e.n_azimuth.is_multiple_of(2) {
            return Err(invalid("energy resolution must have n_polar >= 4 and even n_azimuth >= 8"));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<Profile> {
        Profile::from_source(&self.profile, self.max_degree)
    }
}
