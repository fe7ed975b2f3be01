//! Additive-intensity SIR point-process model on event-history data.
//!
//! The infection intensity of a susceptible individual i is
//!
//! ```text
//! lambda_i(t) = Y_i(t) * [ exp(z_i' beta) + x_i(t)' alpha ]
//! ```
//!
//! with nonnegative epidemic coefficients alpha on the precomputed epidemic
//! terms and a Cox-style log-linear endemic part. Intensities are piecewise
//! constant on the history blocks, so the likelihood integral is exact.

mod fit;
mod lik;
mod profile;

pub use fit::{
    epidemic_proportion, fit_twinsir, step_kernel_terms, total_compensator, TwinSIRFit,
};
pub use lik::{cif_twinsir, loglik_twinsir};
pub use profile::{profile_ci, ProfileResult};

use crate::data::EventHistory;
use crate::error::{Error, Result};

/// Crate-internal access to the compiled likelihood machinery (used by the
/// simulator for the endemic rates).
pub(crate) fn lik_compiled<'a>(
    spec: &'a TwinSIRSpec,
    history: &'a EventHistory,
) -> Result<lik::Compiled<'a>> {
    lik::Compiled::new(spec, history)
}

#[derive(Debug, Clone, Default)]
pub struct TwinSIRSpec {
    /// Epidemic term columns (coefficients constrained to alpha >= 0).
    pub epidemic: Vec<String>,
    /// Endemic covariate columns entering exp(z' beta).
    pub endemic: Vec<String>,
    /// Include the endemic intercept beta_0 (the log baseline hazard).
    pub endemic_intercept: bool,
}

impl TwinSIRSpec {
    pub fn epidemic_only(columns: &[&str]) -> Self {
        TwinSIRSpec {
            epidemic: columns.iter().map(|s| s.to_string()).collect(),
            endemic: vec![],
            endemic_intercept: true,
        }
    }

    pub fn n_alpha(&self) -> usize {
        self.epidemic.len()
    }

    pub fn n_beta(&self) -> usize {
        usize::from(self.endemic_intercept) + self.endemic.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_alpha() + self.n_beta()
    }

    pub fn coef_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.epidemic.clone();
        if self.endemic_intercept {
            names.push("cox(logbaseline)".into());
        }
        for c in &self.endemic {
            names.push(format!("cox({c})"));
        }
        names
    }

    pub fn validate(&self, history: &EventHistory) -> Result<()> {
        if self.n_params() == 0 {
            return Err(Error::Model("model has no terms at all".into()));
        }
        for name in &self.epidemic {
            if history.epi_term_index(name).is_none() {
                return Err(Error::Model(format!(
                    "epidemic term {name} not found in the event history"
                )));
            }
        }
        for name in &self.endemic {
            if history.endemic_cov_index(name).is_none()
                && history.epi_term_index(name).is_none()
            {
                return Err(Error::Model(format!(
                    "endemic covariate {name} not found in the event history"
                )));
            }
        }
        Ok(())
    }
}
