use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::EventHistory;
use crate::error::{Error, Result};
use crate::optim::{self, Options};
use crate::prob;

use super::fit::TwinSIRFit;
use super::lik::Compiled;

#[derive(Debug, Clone)]
pub struct ProfileResult {
    pub name: String,
    pub mle: f64,
    pub wald: (f64, f64),
    /// Highest-likelihood interval from the chi-squared(1) cutoff.
    pub hl: (f64, f64),
    /// (parameter value, normalized profile log-likelihood) pairs.
    pub grid: Vec<(f64, f64)>,
    /// Grid points where the inner maximization failed and the profile was
    /// interpolated from neighbors.
    pub flagged: Vec<usize>,
}

/// Normalized profile log-likelihoods and highest-likelihood intervals for
/// the selected coefficients.
///
/// The grid has `grid_size` points spanning the Wald interval (clipped at
/// zero for the constrained epidemic coefficients) and extends outward until
/// the likelihood-ratio cutoff is bracketed.
pub fn profile_ci(
    fit: &TwinSIRFit,
    history: &EventHistory,
    param_indices: &[usize],
    grid_size: usize,
    level: f64,
) -> Result<Vec<ProfileResult>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Invalid("confidence level must be in (0, 1)".into()));
    }
    if grid_size < 5 {
        return Err(Error::Invalid("profile grid needs at least 5 points".into()));
    }
    let compiled = Compiled::new(&fit.spec, history)?;
    let n_alpha = fit.spec.n_alpha();
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let z = normal.inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let cutoff = -prob::chi_squared_quantile(level, 1.0)? / 2.0;

    let mut out = Vec::new();
    for &j in param_indices {
        if j >= fit.coefficients.len() {
            return Err(Error::Invalid(format!("parameter index {j} out of range")));
        }
        let mle = fit.coefficients[j];
        let se = fit.se(j);
        let bounded = j < n_alpha;
        let wald_lo_raw = mle - z * se;
        let wald = (
            if bounded { wald_lo_raw.max(0.0) } else { wald_lo_raw },
            mle + z * se,
        );

        // inner maximization over all other coefficients at fixed theta_j
        let mut warm = fit.coefficients.clone();
        let profile_at = |value: f64, warm: &mut Vec<f64>| -> Option<f64> {
            let x0: Vec<f64> = warm
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, v)| *v)
                .collect();
            let lower: Vec<Option<f64>> = (0..fit.coefficients.len())
                .filter(|k| *k != j)
                .map(|k| if k < n_alpha { Some(0.0) } else { None })
                .collect();
            let assemble = |free: &[f64]| -> Vec<f64> {
                let mut full = Vec::with_capacity(free.len() + 1);
                full.extend_from_slice(&free[..j]);
                full.push(value);
                full.extend_from_slice(&free[j..]);
                full
            };
            let objective = |free: &[f64]| -> Result<(f64, Vec<f64>)> {
                let full = assemble(free);
                let (ll, grad) = compiled.loglik_grad(&full, false)?;
                let g: Vec<f64> = grad
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, v)| -v)
                    .collect();
                Ok((-ll, g))
            };
            let opts = Options {
                max_iter: 300,
                grad_tol: 1e-6,
            };
            match optim::minimize(objective, &x0, Some(&lower), &opts) {
                Ok(res) if res.value.is_finite() => {
                    let full = assemble(&res.x);
                    *warm = full;
                    Some(-res.value)
                }
                _ => None,
            }
        };

        let step = (wald.1 - wald.0) / (grid_size as f64 - 1.0);
        let mut values: Vec<f64> = (0..grid_size).map(|k| wald.0 + step * k as f64).collect();
        let mut profile: Vec<Option<f64>> =
            values.iter().map(|v| profile_at(*v, &mut warm)).collect();

        // extend outward until the cutoff is bracketed on both sides
        let max_extend = 80;
        for _ in 0..max_extend {
            let first_ok = profile.iter().flatten().next();
            let _ = first_ok;
            let lo_val = profile.first().and_then(|v| *v);
            let need_lower = match lo_val {
                Some(v) => v - fit.loglik > cutoff && (!bounded || values[0] > 1e-12),
                None => false,
            };
            if !need_lower {
                break;
            }
            let cand = if bounded {
                (values[0] - step).max(0.0)
            } else {
                values[0] - step
            };
            let mut w = fit.coefficients.clone();
            values.insert(0, cand);
            profile.insert(0, profile_at(cand, &mut w));
            if bounded && cand == 0.0 {
                break;
            }
        }
        for _ in 0..max_extend {
            let hi_val = profile.last().and_then(|v| *v);
            let need_upper = match hi_val {
                Some(v) => v - fit.loglik > cutoff,
                None => false,
            };
            if !need_upper {
                break;
            }
            let cand = values.last().unwrap() + step;
            let mut w = fit.coefficients.clone();
            values.push(cand);
            profile.push(profile_at(cand, &mut w));
        }

        // interpolate failed points from neighbors
        let mut flagged = Vec::new();
        let mut normalized: Vec<f64> = Vec::with_capacity(values.len());
        for k in 0..values.len() {
            match profile[k] {
                Some(v) => normalized.push(v - fit.loglik),
                None => {
                    flagged.push(k);
                    let left = (0..k).rev().find_map(|i| profile[i].map(|v| (i, v)));
                    let right = ((k + 1)..values.len()).find_map(|i| profile[i].map(|v| (i, v)));
                    let v = match (left, right) {
                        (Some((il, vl)), Some((ir, vr))) => {
                            let w = (k - il) as f64 / (ir - il) as f64;
                            vl + w * (vr - vl)
                        }
                        (Some((_, vl)), None) => vl,
                        (None, Some((_, vr))) => vr,
                        (None, None) => {
                            return Err(Error::Numeric(format!(
                                "profile maximization failed everywhere for {}",
                                fit.names[j]
                            )))
                        }
                    };
                    normalized.push(v - fit.loglik);
                }
            }
        }

        let hl = hl_interval(&values, &normalized, cutoff, bounded);
        out.push(ProfileResult {
            name: fit.names[j].clone(),
            mle,
            wald,
            hl,
            grid: values.into_iter().zip(normalized).collect(),
            flagged,
        });
    }
    Ok(out)
}

/// Crossings of the normalized profile with the likelihood-ratio cutoff,
/// by linear interpolation on the grid.
pub(crate) fn hl_interval(
    values: &[f64],
    normalized: &[f64],
    cutoff: f64,
    bounded: bool,
) -> (f64, f64) {
    let n = values.len();
    // peak of the profile
    let peak = (0..n)
        .max_by(|a, b| normalized[*a].partial_cmp(&normalized[*b]).unwrap())
        .unwrap_or(0);
    // lower crossing: walk left from the peak
    let mut lo = values[0];
    if normalized[0] >= cutoff {
        // profile stays above the cutoff at the left edge
        lo = if bounded { values[0].min(0.0).max(0.0) } else { values[0] };
    } else {
        for k in (0..peak).rev() {
            if normalized[k] < cutoff && normalized[k + 1] >= cutoff {
                let w = (cutoff - normalized[k]) / (normalized[k + 1] - normalized[k]);
                lo = values[k] + w * (values[k + 1] - values[k]);
                break;
            }
        }
    }
    let mut hi = values[n - 1];
    if normalized[n - 1] < cutoff {
        for k in peak..(n - 1) {
            if normalized[k] >= cutoff && normalized[k + 1] < cutoff {
                let w = (normalized[k] - cutoff) / (normalized[k] - normalized[k + 1]);
                hi = values[k] + w * (values[k + 1] - values[k]);
                break;
            }
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::super::fit::fit_twinsir;
    use super::super::lik::testutil::synthetic_epidemic;
    use super::super::TwinSIRSpec;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_profile_recovers_wald() {
        // exactly quadratic normalized profile: -(x - m)^2 / (2 se^2)
        let (m, se) = (0.8, 0.3);
        let values: Vec<f64> = (0..101).map(|k| m - 1.0 + 0.02 * k as f64).collect();
        let normalized: Vec<f64> = values
            .iter()
            .map(|x| -(x - m) * (x - m) / (2.0 * se * se))
            .collect();
        let cutoff = -prob::chi_squared_quantile(0.95, 1.0).unwrap() / 2.0;
        let (lo, hi) = hl_interval(&values, &normalized, cutoff, false);
        // for a quadratic, HL equals the Wald interval
        assert_relative_eq!(lo, m - 1.959963984540054 * se, epsilon = 1e-3);
        assert_relative_eq!(hi, m + 1.959963984540054 * se, epsilon = 1e-3);
    }

    #[test]
    fn profile_intervals_cover_the_mle() {
        let h = synthetic_epidemic(40, 3);
        let spec = TwinSIRSpec::epidemic_only(&["household", "nothousehold"]);
        let fit = fit_twinsir(&spec, &h, None).unwrap();
        let profs = profile_ci(&fit, &h, &[1, 2], 25, 0.95).unwrap();
        assert_eq!(profs.len(), 2);
        for p in &profs {
            assert!(p.hl.0 <= p.mle && p.mle <= p.hl.1, "{p:?}");
            // normalized profile peaks near zero
            let max = p
                .grid
                .iter()
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(max.abs() < 1e-3, "profile peak {max}");
            // alpha profiles respect the boundary
            if p.name != "cox(logbaseline)" {
                assert!(p.hl.0 >= 0.0);
            }
        }
    }

    #[test]
    fn validates_inputs() {
        let h = synthetic_epidemic(20, 3);
        let spec = TwinSIRSpec::epidemic_only(&["household", "nothousehold"]);
        let fit = fit_twinsir(&spec, &h, None).unwrap();
        assert!(profile_ci(&fit, &h, &[0], 25, 1.5).is_err());
        assert!(profile_ci(&fit, &h, &[0], 2, 0.95).is_err());
        assert!(profile_ci(&fit, &h, &[99], 25, 0.95).is_err());
    }
}
