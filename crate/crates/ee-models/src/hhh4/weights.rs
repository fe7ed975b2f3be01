use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neighbourhood weight families for the spatio-temporal component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightsKind {
    /// w_ji = 1(o_ji = 1); no free parameters.
    FirstOrder,
    /// w_ji = o_ji^(-d) for 1 <= o_ji <= maxlag; parameter log(d).
    PowerLaw { maxlag: u32 },
    /// w_ji = 1 at order 1, exp(omega_k) at order k <= maxlag.
    OrderWeights { maxlag: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightsSpec {
    pub kind: WeightsKind,
    /// Row-normalize to w_ji / sum_k w_jk (default true for parametric kinds).
    pub normalize: bool,
}

impl WeightsSpec {
    pub fn first_order() -> Self {
        WeightsSpec {
            kind: WeightsKind::FirstOrder,
            normalize: false,
        }
    }

    pub fn power_law(maxlag: u32) -> Self {
        WeightsSpec {
            kind: WeightsKind::PowerLaw { maxlag },
            normalize: true,
        }
    }

    pub fn order_weights(maxlag: u32) -> Self {
        WeightsSpec {
            kind: WeightsKind::OrderWeights { maxlag },
            normalize: true,
        }
    }

    pub fn n_params(&self) -> usize {
        match self.kind {
            WeightsKind::FirstOrder => 0,
            WeightsKind::PowerLaw { .. } => 1,
            WeightsKind::OrderWeights { maxlag } => maxlag.saturating_sub(1) as usize,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self.kind {
            WeightsKind::FirstOrder => vec![],
            WeightsKind::PowerLaw { .. } => vec!["neweights.d".into()],
            WeightsKind::OrderWeights { maxlag } => (2..=maxlag)
                .map(|k| format!("neweights.logw{k}"))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let maxlag = match self.kind {
            WeightsKind::FirstOrder => return Ok(()),
            WeightsKind::PowerLaw { maxlag } => maxlag,
            WeightsKind::OrderWeights { maxlag } => maxlag,
        };
        if maxlag < 1 {
            return Err(Error::Invalid("weights maxlag must be >= 1".into()));
        }
        Ok(())
    }

    /// Raw (non-normalized) weight for a single neighbourhood order, with
    /// parameters on the internal scale (log d, omega_k).
    fn raw_weight(&self, order: u32, params: &[f64]) -> f64 {
        if order == 0 {
            return 0.0;
        }
        match self.kind {
            WeightsKind::FirstOrder => f64::from(order == 1),
            WeightsKind::PowerLaw { maxlag } => {
                if order > maxlag {
                    0.0
                } else {
                    let d = params[0].exp();
                    (order as f64).powf(-d)
                }
            }
            WeightsKind::OrderWeights { maxlag } => {
                if order > maxlag {
                    0.0
                } else if order == 1 {
                    1.0
                } else {
                    params[order as usize - 2].exp()
                }
            }
        }
    }

    /// Derivative of the raw weight with respect to internal parameter `k`.
    fn raw_weight_deriv(&self, order: u32, params: &[f64], k: usize) -> f64 {
        if order == 0 {
            return 0.0;
        }
        match self.kind {
            WeightsKind::FirstOrder => 0.0,
            WeightsKind::PowerLaw { maxlag } => {
                if order > maxlag || order == 0 {
                    0.0
                } else {
                    // d/dlogd o^(-d) = -d ln(o) o^(-d)
                    let d = params[0].exp();
                    let of = order as f64;
                    -d * of.ln() * of.powf(-d)
                }
            }
            WeightsKind::OrderWeights { maxlag } => {
                if order > maxlag || order < 2 {
                    0.0
                } else if (order as usize - 2) == k {
                    params[k].exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// The U x U weight matrix w[j, i] (flow from unit j to unit i), with
    /// internal-scale parameters.
    pub fn weights(&self, nb_order: &Array2<u32>, params: &[f64]) -> Array2<f64> {
        let u = nb_order.nrows();
        let mut w = Array2::<f64>::zeros((u, u));
        for j in 0..u {
            for i in 0..u {
                if i != j {
                    w[[j, i]] = self.raw_weight(nb_order[[j, i]], params);
                }
            }
        }
        if self.normalize {
            for j in 0..u {
                let row_sum: f64 = w.row(j).sum();
                if row_sum > 0.0 {
                    for i in 0..u {
                        w[[j, i]] /= row_sum;
                    }
                }
            }
        }
        w
    }

    /// Derivative of the (possibly normalized) weight matrix with respect to
    /// internal parameter `k`.
    pub fn weights_deriv(
        &self,
        nb_order: &Array2<u32>,
        params: &[f64],
        k: usize,
    ) -> Array2<f64> {
        let u = nb_order.nrows();
        let mut raw = Array2::<f64>::zeros((u, u));
        let mut raw_d = Array2::<f64>::zeros((u, u));
        for j in 0..u {
            for i in 0..u {
                if i != j {
                    raw[[j, i]] = self.raw_weight(nb_order[[j, i]], params);
                    raw_d[[j, i]] = self.raw_weight_deriv(nb_order[[j, i]], params, k);
                }
            }
        }
        if !self.normalize {
            return raw_d;
        }
        let mut out = Array2::<f64>::zeros((u, u));
        for j in 0..u {
            let s: f64 = raw.row(j).sum();
            let sd: f64 = raw_d.row(j).sum();
            if s > 0.0 {
                for i in 0..u {
                    out[[j, i]] = (raw_d[[j, i]] * s - raw[[j, i]] * sd) / (s * s);
                }
            }
        }
        out
    }
}

/// Evaluate neighbourhood weights with natural-scale parameters
/// (`d` for the power law, `omega_2..` for order weights).
pub fn neighbourhood_weights(
    spec: &WeightsSpec,
    nb_order: &Array2<u32>,
    params: &[f64],
) -> Result<Array2<f64>> {
    spec.validate()?;
    if params.len() != spec.n_params() {
        return Err(Error::Invalid(format!(
            "{} weight parameters supplied, spec needs {}",
            params.len(),
            spec.n_params()
        )));
    }
    let internal: Vec<f64> = match spec.kind {
        WeightsKind::PowerLaw { .. } => {
            if params[0] <= 0.0 {
                return Err(Error::Invalid("power-law decay d must be positive".into()));
            }
            vec![params[0].ln()]
        }
        _ => params.to_vec(),
    };
    Ok(spec.weights(nb_order, &internal))
}
