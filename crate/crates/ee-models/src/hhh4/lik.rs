use ndarray::{Array1, Array2};

use crate::data::CountSeries;
use crate::error::{Error, Result};
use crate::prob;

use super::{ComponentDesign, Family, HHH4Spec};

/// Parameter layout over the optimizer vector:
/// [ar..., ne..., endemic..., weight params..., overdispersion...].
pub(crate) struct Compiled<'a> {
    pub spec: &'a HHH4Spec,
    pub data: &'a CountSeries,
    pub subset: Vec<usize>,
    pub names: Vec<String>,
    pub ar_at: usize,
    pub ne_at: usize,
    pub end_at: usize,
    pub w_at: usize,
    pub psi_at: usize,
    pub n_params: usize,
}

fn component_names(prefix: &str, d: &ComponentDesign) -> Vec<String> {
    let mut out = Vec::new();
    if d.intercept {
        out.push(format!("{prefix}.1"));
    }
    for (name, _) in &d.covariates {
        out.push(format!("{prefix}.{name}"));
    }
    out
}

impl<'a> Compiled<'a> {
    pub fn new(spec: &'a HHH4Spec, data: &'a CountSeries) -> Result<Compiled<'a>> {
        let (t_len, u_len) = data.counts.dim();
        spec.validate(t_len, u_len)?;
        if let Some((_, w)) = &spec.ne {
            w.validate()?;
        }
        let subset = spec.subset_rows(t_len);
        if subset.is_empty() {
            return Err(Error::Model("empty fitting subset".into()));
        }
        let mut names = Vec::new();
        let ar_at = 0;
        if let Some(d) = &spec.ar {
            names.extend(component_names("ar", d));
        }
        let ne_at = names.len();
        if let Some((d, _)) = &spec.ne {
            names.extend(component_names("ne", d));
        }
        let end_at = names.len();
        if let Some(d) = &spec.endemic {
            names.extend(component_names("end", d));
        }
        let w_at = names.len();
        if let Some((_, w)) = &spec.ne {
            names.extend(w.param_names());
        }
        let psi_at = names.len();
        match spec.family {
            Family::Poisson => {}
            Family::NegBin1 => names.push("overdisp".into()),
            Family::NegBinM => {
                for id in &data.unit_ids {
                    names.push(format!("overdisp.{id}"));
                }
            }
        }
        let n_params = names.len();
        Ok(Compiled {
            spec,
            data,
            subset,
            names,
            ar_at,
            ne_at,
            end_at,
            w_at,
            psi_at,
            n_params,
        })
    }

    fn check_len(&self, coefs: &[f64]) -> Result<()> {
        if coefs.len() != self.n_params {
            return Err(Error::Dimension(format!(
                "{} coefficients supplied, model has {}",
                coefs.len(),
                self.n_params
            )));
        }
        Ok(())
    }

    /// exp(intercept + x^T beta) * offset for one component at (t, i).
    fn predictor(d: &ComponentDesign, coefs: &[f64], t: usize, i: usize) -> f64 {
        let mut lin = 0.0;
        let mut k = 0;
        if d.intercept {
            lin += coefs[k];
            k += 1;
        }
        for (_, grid) in &d.covariates {
            lin += coefs[k] * grid[[t, i]];
            k += 1;
        }
        let off = d.offset.as_ref().map_or(1.0, |o| o[[t, i]]);
        off * lin.exp()
    }

    /// Overdispersion psi for unit `i` (0 for Poisson).
    pub fn psi(&self, coefs: &[f64], i: usize) -> f64 {
        match self.spec.family {
            Family::Poisson => 0.0,
            Family::NegBin1 => coefs[self.psi_at].exp(),
            Family::NegBinM => coefs[self.psi_at + i].exp(),
        }
    }

    /// Internal-scale weight parameters slice.
    fn w_params<'b>(&self, coefs: &'b [f64]) -> &'b [f64] {
        &coefs[self.w_at..self.psi_at]
    }

    /// Component values at time row `t` (0-based, needs t >= 1):
    /// (endemic, autoregressive, neighbourhood) contributions per unit.
    pub fn components_at(
        &self,
        coefs: &[f64],
        t: usize,
        weights: Option<&Array2<f64>>,
    ) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let u_len = self.data.counts.ncols();
        let y_prev = self.data.counts.row(t - 1);
        let mut end = Array1::<f64>::zeros(u_len);
        let mut ar = Array1::<f64>::zeros(u_len);
        let mut ne = Array1::<f64>::zeros(u_len);
        if let Some(d) = &self.spec.endemic {
            let c = &coefs[self.end_at..self.w_at];
            for i in 0..u_len {
                end[i] = Self::predictor(d, c, t, i);
            }
        }
        if let Some(d) = &self.spec.ar {
            let c = &coefs[self.ar_at..self.ne_at];
            for i in 0..u_len {
                ar[i] = Self::predictor(d, c, t, i) * y_prev[i];
            }
        }
        if let Some((d, wspec)) = &self.spec.ne {
            let owned;
            let w = match weights {
                Some(w) => w,
                None => {
                    owned = wspec.weights(&self.data.nb_order, self.w_params(coefs));
                    &owned
                }
            };
            let c = &coefs[self.ne_at..self.end_at];
            for i in 0..u_len {
                let mut z = 0.0;
                for j in 0..u_len {
                    z += w[[j, i]] * y_prev[j];
                }
                ne[i] = Self::predictor(d, c, t, i) * z;
            }
        }
        (end, ar, ne)
    }

    /// Conditional mean vector at time row `t` (0-based, needs t >= 1).
    pub fn mean_at(&self, coefs: &[f64], t: usize) -> Array1<f64> {
        let (end, ar, ne) = self.components_at(coefs, t, None);
        end + ar + ne
    }

    /// Multiplicative autoregressive and neighbourhood factors
    /// (lambda_it, phi_it) per unit, without the lagged-count sums.
    pub fn epidemic_factors_at(&self, coefs: &[f64], t: usize) -> (Array1<f64>, Array1<f64>) {
        let u_len = self.data.counts.ncols();
        let mut lambda = Array1::<f64>::zeros(u_len);
        let mut phi = Array1::<f64>::zeros(u_len);
        if let Some(d) = &self.spec.ar {
            let c = &coefs[self.ar_at..self.ne_at];
            for i in 0..u_len {
                lambda[i] = Self::predictor(d, c, t, i);
            }
        }
        if let Some((d, _)) = &self.spec.ne {
            let c = &coefs[self.ne_at..self.end_at];
            for i in 0..u_len {
                phi[i] = Self::predictor(d, c, t, i);
            }
        }
        (lambda, phi)
    }

    /// Log-likelihood and analytic gradient over the fitted subset.
    ///
    /// With `strict`, a non-finite mean is an error; otherwise it yields
    /// `-inf` so that a line search can back away.
    pub fn loglik_grad(&self, coefs: &[f64], strict: bool) -> Result<(f64, Vec<f64>)> {
        self.check_len(coefs)?;
        let u_len = self.data.counts.ncols();
        let mut ll = 0.0;
        let mut grad = vec![0.0; self.n_params];

        // neighbourhood weights and their parameter derivatives
        let (w, w_derivs) = match &self.spec.ne {
            Some((_, wspec)) => {
                let p = self.w_params(coefs);
                let w = wspec.weights(&self.data.nb_order, p);
                let derivs: Vec<Array2<f64>> = (0..wspec.n_params())
                    .map(|k| wspec.weights_deriv(&self.data.nb_order, p, k))
                    .collect();
                (Some(w), derivs)
            }
            None => (None, vec![]),
        };

        for &t in &self.subset {
            let y_prev = self.data.counts.row(t - 1);
            let (end, ar, ne) = self.components_at(coefs, t, w.as_ref());
            for i in 0..u_len {
                let mu = end[i] + ar[i] + ne[i];
                if !mu.is_finite() {
                    if strict {
                        return Err(Error::Numeric(format!(
                            "non-finite mean at (t={}, unit={})",
                            t + 1,
                            self.data.unit_ids[i]
                        )));
                    }
                    return Ok((f64::NEG_INFINITY, grad));
                }
                let y = self.data.counts[[t, i]];
                let psi = self.psi(coefs, i);
                let (lp, dl_dmu) = if psi > 0.0 {
                    (
                        prob::negbin_logpmf(y, mu, psi),
                        if mu > 0.0 {
                            prob::negbin_dlogpmf_dmu(y, mu, psi)
                        } else {
                            0.0
                        },
                    )
                } else {
                    (
                        prob::poisson_logpmf(y, mu),
                        if mu > 0.0 { y / mu - 1.0 } else { 0.0 },
                    )
                };
                ll += lp;
                if !ll.is_finite() && !strict {
                    return Ok((f64::NEG_INFINITY, grad));
                }

                // chain rule through each component
                let mut k;
                if let Some(d) = &self.spec.ar {
                    k = self.ar_at;
                    if d.intercept {
                        grad[k] += dl_dmu * ar[i];
                        k += 1;
                    }
                    for (_, grid) in &d.covariates {
                        grad[k] += dl_dmu * ar[i] * grid[[t, i]];
                        k += 1;
                    }
                }
                if let Some((d, _)) = &self.spec.ne {
                    k = self.ne_at;
                    if d.intercept {
                        grad[k] += dl_dmu * ne[i];
                        k += 1;
                    }
                    for (_, grid) in &d.covariates {
                        grad[k] += dl_dmu * ne[i] * grid[[t, i]];
                        k += 1;
                    }
                    // weight parameters: phi_it * sum_j dw_ji y_{j,t-1}
                    if !w_derivs.is_empty() {
                        // phi predictor without the weight sum
                        let c = &coefs[self.ne_at..self.end_at];
                        let phi = Self::predictor(d, c, t, i);
                        for (kk, wd) in w_derivs.iter().enumerate() {
                            let mut dz = 0.0;
                            for j in 0..u_len {
                                dz += wd[[j, i]] * y_prev[j];
                            }
                            grad[self.w_at + kk] += dl_dmu * phi * dz;
                        }
                    }
                }
                if let Some(d) = &self.spec.endemic {
                    k = self.end_at;
                    if d.intercept {
                        grad[k] += dl_dmu * end[i];
                        k += 1;
                    }
                    for (_, grid) in &d.covariates {
                        grad[k] += dl_dmu * end[i] * grid[[t, i]];
                        k += 1;
                    }
                }
                if psi > 0.0 {
                    let size = 1.0 / psi;
                    let dl_dsize = prob::negbin_dlogpmf_dsize(y, mu, size);
                    // d size / d logpsi = -size
                    let g = -dl_dsize * size;
                    match self.spec.family {
                        Family::NegBin1 => grad[self.psi_at] += g,
                        Family::NegBinM => grad[self.psi_at + i] += g,
                        Family::Poisson => unreachable!(),
                    }
                }
            }
        }
        Ok((ll, grad))
    }
}

/// Conditional mean vector mu_.t for 1-based time index `t` (t >= 2).
pub fn mean_hhh4(
    spec: &HHH4Spec,
    data: &CountSeries,
    coefs: &[f64],
    t: usize,
) -> Result<Vec<f64>> {
    if t < 2 || t > data.n_time() {
        return Err(Error::Invalid(format!(
            "time index {t} outside (2, {})",
            data.n_time()
        )));
    }
    let c = Compiled::new(spec, data)?;
    c.check_len(coefs)?;
    Ok(c.mean_at(coefs, t - 1).to_vec())
}

/// Log-likelihood and analytic gradient at `coefs`.
pub fn loglik_hhh4(
    spec: &HHH4Spec,
    data: &CountSeries,
    coefs: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let c = Compiled::new(spec, data)?;
    c.loglik_grad(coefs, true)
}
