//! Continuous-space endemic-epidemic point-process model: conditional
//! intensity, likelihood, fitting, reproduction numbers, and diagnostics.
//!
//! The conditional intensity at location s, time t, and event type k is
//!
//! ```text
//! lambda(s, t, k) = rho(cell) nu(cell) +
//!     sum_{j} eta_j f(|s - s_j|) g(t - t_j)
//! ```
//!
//! where the sum runs over past events j with t - t_j <= eps_t_j,
//! |s - s_j| <= eps_s_j, and transmission allowed by the type matrix. The
//! endemic block is piecewise constant on the space-time grid; the epidemic
//! part decays through the spatial and temporal interaction kernels.

mod diag;
mod fit;
mod glm;
mod lik;
#[cfg(test)]
pub(crate) mod testutil;

pub use diag::{
    intensity_aggregate, intensity_surface, r0_events, IntensityCurve, IntensitySurface,
};
pub use fit::{fit_twinstim, step_select, Component, Direction, TwinstimFit};
pub use glm::{glm_equivalence, poisson_glm_irls, GlmComparison};
pub use lik::{cif_twinstim, loglik_twinstim};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{SpatialKernel, TemporalKernel};

/// Endemic design: covariates drawn from stgrid columns, plus an optional
/// multiplicative offset column (population density enters this way).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EndemicSpec {
    pub intercept: bool,
    pub covariates: Vec<String>,
    pub offset: Option<String>,
}

/// Epidemic design: covariates drawn from event marks or stgrid columns
/// (evaluated at the event's cell).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EpidemicSpec {
    pub intercept: bool,
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwinstimSpec {
    pub endemic: EndemicSpec,
    /// Absent means an endemic-only model.
    pub epidemic: Option<EpidemicSpec>,
    pub siaf: SpatialKernel,
    pub tiaf: TemporalKernel,
}

impl TwinstimSpec {
    pub fn endemic_only(endemic: EndemicSpec) -> Self {
        TwinstimSpec {
            endemic,
            epidemic: None,
            siaf: SpatialKernel::Constant,
            tiaf: TemporalKernel::Constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.siaf.validate()?;
        self.tiaf.validate()?;
        if !self.endemic.intercept && self.endemic.covariates.is_empty() && self.epidemic.is_none()
        {
            return Err(Error::Model("model has no terms at all".into()));
        }
        Ok(())
    }

    /// Coefficient names: h.* endemic, e.* epidemic, then kernel parameters.
    pub fn coef_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.endemic.intercept {
            names.push("h.(Intercept)".into());
        }
        for c in &self.endemic.covariates {
            names.push(format!("h.{c}"));
        }
        if let Some(e) = &self.epidemic {
            if e.intercept {
                names.push("e.(Intercept)".into());
            }
            for c in &e.covariates {
                names.push(format!("e.{c}"));
            }
            for p in self.siaf.param_names() {
                names.push(format!("e.{p}"));
            }
            for p in self.tiaf.param_names() {
                names.push(format!("e.{p}"));
            }
        }
        names
    }
}
