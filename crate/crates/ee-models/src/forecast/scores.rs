use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hhh4::Family;
use crate::prob;

use super::osa::PredictiveDistribution;

/// Proper scoring rules for count forecasts; lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// Logarithmic score -log P(Y = y).
    Logs,
    /// Ranked probability score sum_k (P(Y <= k) - 1(y <= k))^2.
    Rps,
    /// Squared error score (y - mu)^2.
    Ses,
}

impl ScoreKind {
    pub fn parse(name: &str) -> Result<ScoreKind> {
        match name {
            "logs" => Ok(ScoreKind::Logs),
            "rps" => Ok(ScoreKind::Rps),
            "ses" => Ok(ScoreKind::Ses),
            other => Err(Error::Invalid(format!(
                "unknown score \"{other}\" (expected logs, rps, or ses)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScoreKind::Logs => "logs",
            ScoreKind::Rps => "rps",
            ScoreKind::Ses => "ses",
        }
    }
}

/// Tail mass below which the ranked probability sum is truncated.
const RPS_TAIL: f64 = 1e-10;

fn cdf(y: f64, mu: f64, psi: f64, family: Family) -> f64 {
    if family == Family::Poisson || psi == 0.0 {
        prob::poisson_cdf(y, mu)
    } else {
        prob::negbin_cdf(y, mu, psi)
    }
}

fn logpmf(y: f64, mu: f64, psi: f64, family: Family) -> f64 {
    if family == Family::Poisson || psi == 0.0 {
        prob::poisson_logpmf(y, mu)
    } else {
        prob::negbin_logpmf(y, mu, psi)
    }
}

fn rps_single(y: f64, mu: f64, psi: f64, family: Family) -> f64 {
    // truncate once the tail mass drops below RPS_TAIL beyond
    // max(y, mu + 20 sd)
    let var = mu * (1.0 + psi * mu);
    let k_floor = y.max(mu + 20.0 * var.sqrt()).ceil() as i64;
    let mut total = 0.0;
    let mut k = 0i64;
    loop {
        let f = cdf(k as f64, mu, psi, family);
        let h = f64::from(y <= k as f64);
        total += (f - h) * (f - h);
        if k >= k_floor && 1.0 - f < RPS_TAIL {
            break;
        }
        k += 1;
        if k > 10_000_000 {
            break;
        }
    }
    total
}

/// Per-(unit, time) scores for the requested rules.
pub fn score_predictions(
    pd: &PredictiveDistribution,
    which: &[ScoreKind],
) -> Result<Vec<(String, Array2<f64>)>> {
    let (n_t, n_u) = pd.pred.dim();
    if pd.observed.dim() != (n_t, n_u) {
        return Err(Error::Dimension(
            "observed grid does not match predictions".into(),
        ));
    }
    let mut out = Vec::new();
    for kind in which {
        let mut grid = Array2::<f64>::zeros((n_t, n_u));
        for t in 0..n_t {
            for i in 0..n_u {
                let y = pd.observed[[t, i]];
                let mu = pd.pred[[t, i]];
                let psi = pd.psi_value(t, i);
                grid[[t, i]] = match kind {
                    ScoreKind::Logs => -logpmf(y, mu, psi, pd.family),
                    ScoreKind::Rps => rps_single(y, mu, psi, pd.family),
                    ScoreKind::Ses => (y - mu) * (y - mu),
                };
            }
        }
        out.push((kind.name().to_string(), grid));
    }
    Ok(out)
}

/// Mean of each score grid.
pub fn mean_scores(scores: &[(String, Array2<f64>)]) -> Vec<(String, f64)> {
    scores
        .iter()
        .map(|(name, grid)| {
            (
                name.clone(),
                grid.iter().sum::<f64>() / grid.len() as f64,
            )
        })
        .collect()
}
