use crate::error::{Error, Result};
use crate::prob;

/// Transformed temporal residual process of a fitted point process.
#[derive(Debug, Clone)]
pub struct ResidualDiagnostics {
    /// Ordered transformed residuals u_i in [0, 1].
    pub sorted_u: Vec<f64>,
    /// KS distance of the residuals from the uniform distribution.
    pub ks_statistic: f64,
    /// Half-width of the inverted 95% KS confidence band.
    pub ks_band: f64,
    /// True when the KS statistic stays inside the 95% band.
    pub ks_pass: bool,
    /// Lag-1 scatter pairs (u_i, u_{i+1}) in event order.
    pub lag_pairs: Vec<(f64, f64)>,
}

/// Rescale event times by the cumulative ground intensity; under the true
/// model the result is uniform on [0, 1] and serially uncorrelated.
///
/// `cumulative` must be nondecreasing with `cumulative(0) = 0`.
pub fn residual_transform<F: Fn(f64) -> f64>(
    cumulative: F,
    event_times: &[f64],
    t_end: f64,
) -> Result<ResidualDiagnostics> {
    if event_times.is_empty() {
        return Err(Error::Invalid("no event times".into()));
    }
    let at_zero = cumulative(0.0);
    if at_zero.abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "cumulative intensity at 0 is {at_zero}, expected 0"
        )));
    }
    let total = cumulative(t_end);
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Invalid(format!(
            "cumulative intensity at T is {total}"
        )));
    }
    let mut times = event_times.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut u = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    for &t in &times {
        let v = cumulative(t);
        if v + 1e-12 < prev {
            return Err(Error::Invalid(
                "cumulative intensity is not nondecreasing".into(),
            ));
        }
        prev = v;
        u.push((v / total).clamp(0.0, 1.0));
    }
    let lag_pairs: Vec<(f64, f64)> = u.windows(2).map(|w| (w[0], w[1])).collect();
    let mut sorted_u = u;
    sorted_u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks_statistic = prob::ks_statistic_uniform(&sorted_u);
    let ks_band = prob::ks_critical_value(sorted_u.len(), 0.05);
    Ok(ResidualDiagnostics {
        ks_pass: ks_statistic <= ks_band,
        ks_statistic,
        ks_band,
        sorted_u,
        lag_pairs,
    })
}
