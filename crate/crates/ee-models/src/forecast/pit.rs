use crate::error::{Error, Result};
use crate::hhh4::Family;
use crate::prob;

use super::osa::PredictiveDistribution;

/// Non-randomized probability integral transform histogram for count
/// forecasts.
///
/// For each prediction with observation y, the conditional CDF interpolates
/// between P(y-1) and P(y); bin heights are scaled so that a perfectly
/// calibrated forecast set gives height 1 in every bin.
pub fn pit_histogram(pd: &PredictiveDistribution, n_bins: usize) -> Result<Vec<f64>> {
    if n_bins < 2 {
        return Err(Error::Invalid("PIT needs at least 2 bins".into()));
    }
    let (n_t, n_u) = pd.pred.dim();
    if n_t * n_u == 0 {
        return Err(Error::Invalid("no predictions".into()));
    }
    let mut heights = vec![0.0; n_bins];
    let n_pred = (n_t * n_u) as f64;
    for t in 0..n_t {
        for i in 0..n_u {
            let y = pd.observed[[t, i]];
            let mu = pd.pred[[t, i]];
            let psi = pd.psi_value(t, i);
            let cdf = |v: f64| -> f64 {
                if pd.family == Family::Poisson || psi == 0.0 {
                    prob::poisson_cdf(v, mu)
                } else {
                    prob::negbin_cdf(v, mu, psi)
                }
            };
            let p_lo = if y >= 1.0 { cdf(y - 1.0) } else { 0.0 };
            let p_hi = cdf(y);
            // conditional CDF of the transform at u
            let f_bar = |u: f64| -> f64 {
                if p_hi > p_lo {
                    ((u - p_lo) / (p_hi - p_lo)).clamp(0.0, 1.0)
                } else {
                    // zero predictive mass at y: point mass at u = P(y)
                    f64::from(u >= p_hi)
                }
            };
            for (j, h) in heights.iter_mut().enumerate() {
                let u_hi = (j + 1) as f64 / n_bins as f64;
                let u_lo = j as f64 / n_bins as f64;
                *h += (f_bar(u_hi) - f_bar(u_lo)) / n_pred;
            }
        }
    }
    for h in heights.iter_mut() {
        *h *= n_bins as f64;
    }
    Ok(heights)
}
