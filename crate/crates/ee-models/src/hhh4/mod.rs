//! Multivariate count time-series model with endemic, autoregressive, and
//! neighbourhood components.

mod fit;
mod lik;
mod weights;

pub use fit::{
    confint_wald, fit_hhh4, fitted_components, summarize_hhh4, Hhh4Summary, SummaryRow,
    HHH4Fit,
};
pub use lik::{loglik_hhh4, mean_hhh4};
pub use weights::{neighbourhood_weights, WeightsKind, WeightsSpec};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Poisson,
    /// Common overdispersion psi across units.
    NegBin1,
    /// One overdispersion parameter per unit.
    NegBinM,
}

impl Family {
    pub fn parse(name: &str) -> Result<Family> {
        match name {
            "Poisson" => Ok(Family::Poisson),
            "NegBin1" => Ok(Family::NegBin1),
            "NegBinM" => Ok(Family::NegBinM),
            other => Err(Error::Invalid(format!(
                "unknown family \"{other}\" (expected Poisson, NegBin1, or NegBinM)"
            ))),
        }
    }
}

/// Design of one model component: optional intercept, named covariate grids,
/// and a multiplicative offset grid.
#[derive(Debug, Clone, Default)]
pub struct ComponentDesign {
    pub intercept: bool,
    /// Named T x U covariate grids.
    pub covariates: Vec<(String, Array2<f64>)>,
    /// Multiplicative offset grid (ones when absent).
    pub offset: Option<Array2<f64>>,
}

impl ComponentDesign {
    pub fn intercept_only() -> Self {
        ComponentDesign {
            intercept: true,
            covariates: vec![],
            offset: None,
        }
    }

    pub fn n_coefs(&self) -> usize {
        usize::from(self.intercept) + self.covariates.len()
    }
}

/// Append `2 s_max` seasonal covariate grids sin(s w t), cos(s w t) with
/// w = 2 pi / period and t counted from 1.
pub fn add_season_terms(
    mut design: ComponentDesign,
    s_max: u32,
    period: f64,
    t_len: usize,
    u_len: usize,
) -> Result<ComponentDesign> {
    if s_max < 1 {
        return Err(Error::Invalid("season harmonics S must be >= 1".into()));
    }
    if period <= 0.0 {
        return Err(Error::Invalid("season period must be positive".into()));
    }
    let omega = 2.0 * std::f64::consts::PI / period;
    for s in 1..=s_max {
        let sf = s as f64;
        let sin_grid = Array2::from_shape_fn((t_len, u_len), |(t, _)| {
            (sf * omega * (t as f64 + 1.0)).sin()
        });
        let cos_grid = Array2::from_shape_fn((t_len, u_len), |(t, _)| {
            (sf * omega * (t as f64 + 1.0)).cos()
        });
        design
            .covariates
            .push((format!("sin({} * pi * t/{period})", 2 * s), sin_grid));
        design
            .covariates
            .push((format!("cos({} * pi * t/{period})", 2 * s), cos_grid));
    }
    Ok(design)
}

/// Full model specification.
#[derive(Debug, Clone)]
pub struct HHH4Spec {
    pub endemic: Option<ComponentDesign>,
    pub ar: Option<ComponentDesign>,
    pub ne: Option<(ComponentDesign, WeightsSpec)>,
    pub family: Family,
    /// 1-based inclusive fitted time range; default (2, T).
    pub subset: Option<(usize, usize)>,
}

impl HHH4Spec {
    pub fn validate(&self, t_len: usize, u_len: usize) -> Result<()> {
        if self.endemic.is_none() && self.ar.is_none() && self.ne.is_none() {
            return Err(Error::Model("at least one component must be active".into()));
        }
        let check = |d: &ComponentDesign, comp: &str| -> Result<()> {
            for (name, grid) in &d.covariates {
                if grid.dim() != (t_len, u_len) {
                    return Err(Error::Dimension(format!(
                        "{comp} covariate {name} is {:?}, data is ({t_len}, {u_len})",
                        grid.dim()
                    )));
                }
            }
            if let Some(off) = &d.offset {
                if off.dim() != (t_len, u_len) {
                    return Err(Error::Dimension(format!(
                        "{comp} offset grid is {:?}, data is ({t_len}, {u_len})",
                        off.dim()
                    )));
                }
            }
            if d.n_coefs() == 0 {
                return Err(Error::Model(format!(
                    "{comp} component is active but has no coefficients"
                )));
            }
            Ok(())
        };
        if let Some(d) = &self.endemic {
            check(d, "endemic")?;
        }
        if let Some(d) = &self.ar {
            check(d, "ar")?;
        }
        if let Some((d, _)) = &self.ne {
            check(d, "ne")?;
        }
        if let Some((from, to)) = self.subset {
            if from < 2 || to < from || to > t_len {
                return Err(Error::Model(format!(
                    "subset ({from}, {to}) must lie within (2, {t_len})"
                )));
            }
        }
        Ok(())
    }

    /// 0-based fitted time rows.
    pub fn subset_rows(&self, t_len: usize) -> Vec<usize> {
        let (from, to) = self.subset.unwrap_or((2, t_len));
        (from..=to).map(|t| t - 1).collect()
    }
}
