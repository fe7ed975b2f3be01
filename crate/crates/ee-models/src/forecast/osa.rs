use ndarray::Array2;

use crate::data::CountSeries;
use crate::error::{Error, Result};
use crate::hhh4::{fit_hhh4, Family, HHH4Fit};

/// How one-step-ahead predictions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsaType {
    /// Use the full-data fit; predictions are its fitted values.
    Final,
    /// Refit on data up to t for each prediction at t+1, warm-started from
    /// the full-data estimates.
    Rolling,
}

/// Per-(unit, time) forecast means and dispersions with the realized counts.
#[derive(Debug, Clone)]
pub struct PredictiveDistribution {
    pub unit_ids: Vec<String>,
    /// 1-based predicted time indices.
    pub times: Vec<usize>,
    /// times x units predictive means.
    pub pred: Array2<f64>,
    /// Overdispersion on the internal log(1/psi) scale per prediction
    /// (+inf under the Poisson family).
    pub psi: Array2<f64>,
    /// Realized counts on the prediction window.
    pub observed: Array2<f64>,
    pub family: Family,
    /// Steps whose refit failed (coefficients reused from the previous step).
    pub warnings: Vec<String>,
}

impl PredictiveDistribution {
    pub fn n_pred(&self) -> usize {
        self.pred.len()
    }

    /// Natural-scale overdispersion for one prediction.
    pub fn psi_value(&self, row: usize, unit: usize) -> f64 {
        match self.family {
            Family::Poisson => 0.0,
            _ => (-self.psi[[row, unit]]).exp(),
        }
    }
}

/// One-step-ahead predictions for time points tp.0+1 ... tp.1+1 (1-based).
pub fn one_step_ahead(
    fit: &HHH4Fit,
    data: &CountSeries,
    tp: (usize, usize),
    osa_type: OsaType,
) -> Result<PredictiveDistribution> {
    let t_len = data.n_time();
    let (from, to) = tp;
    if from < 2 || to < from || to + 1 > t_len {
        return Err(Error::Invalid(format!(
            "prediction window ({from}, {to}) must satisfy 2 <= from <= to <= {}",
            t_len - 1
        )));
    }
    let u_len = data.n_units();
    let times: Vec<usize> = (from + 1..=to + 1).collect();
    let mut pred = Array2::<f64>::zeros((times.len(), u_len));
    let mut psi = Array2::<f64>::zeros((times.len(), u_len));
    let mut observed = Array2::<f64>::zeros((times.len(), u_len));
    let mut warnings = Vec::new();

    let mut coefs = fit.coefficients.clone();
    let mut current_fit: Option<HHH4Fit> = None;
    for (row, &t_pred) in times.iter().enumerate() {
        if osa_type == OsaType::Rolling {
            let t_fit = t_pred - 1;
            let mut spec = fit.spec.clone();
            spec.subset = Some((2, t_fit));
            match fit_hhh4(&spec, data, Some(fit.coefficients.clone())) {
                Ok(f) if f.converged => {
                    coefs = f.coefficients.clone();
                    current_fit = Some(f);
                }
                Ok(f) => {
                    warnings.push(format!(
                        "refit up to t={t_fit} did not converge; best point used"
                    ));
                    coefs = f.coefficients.clone();
                    current_fit = Some(f);
                }
                Err(e) => {
                    warnings.push(format!(
                        "refit up to t={t_fit} failed ({e}); previous coefficients reused"
                    ));
                }
            }
        }
        let mu = crate::hhh4::mean_hhh4(&fit.spec, data, &coefs, t_pred)?;
        for i in 0..u_len {
            if !(mu[i] > 0.0) {
                return Err(Error::Numeric(format!(
                    "nonpositive predictive mean at (t={t_pred}, unit={})",
                    data.unit_ids[i]
                )));
            }
            pred[[row, i]] = mu[i];
            observed[[row, i]] = data.counts[[t_pred - 1, i]];
            let psi_nat = match osa_type {
                OsaType::Final => fit.psi(i),
                OsaType::Rolling => current_fit.as_ref().map_or(fit.psi(i), |f| f.psi(i)),
            };
            psi[[row, i]] = if psi_nat > 0.0 {
                -psi_nat.ln()
            } else {
                f64::INFINITY
            };
        }
    }

    Ok(PredictiveDistribution {
        unit_ids: data.unit_ids.clone(),
        times,
        pred,
        psi,
        observed,
        family: fit.spec.family,
        warnings,
    })
}
