use ndarray::Array2;

use crate::data::EventHistory;
use crate::error::{Error, Result};

use super::TwinSIRSpec;

/// Resolved designs: epidemic term grids (block x individual) and
/// time-constant endemic covariates (individual x covariate).
pub(crate) struct Compiled<'a> {
    pub spec: &'a TwinSIRSpec,
    pub history: &'a EventHistory,
    pub names: Vec<String>,
    pub epi_grids: Vec<&'a Array2<f64>>,
    /// individual x endemic-covariate values (intercept not included).
    pub endemic_z: Array2<f64>,
    pub n_params: usize,
}

impl<'a> Compiled<'a> {
    pub fn new(spec: &'a TwinSIRSpec, history: &'a EventHistory) -> Result<Compiled<'a>> {
        spec.validate(history)?;
        let mut epi_grids = Vec::new();
        for name in &spec.epidemic {
            let idx = history.epi_term_index(name).expect("validated above");
            epi_grids.push(&history.epi_terms[idx]);
        }
        let n = history.n_individuals();
        let mut endemic_z = Array2::<f64>::zeros((n, spec.endemic.len()));
        for (c, name) in spec.endemic.iter().enumerate() {
            if let Some(idx) = history.endemic_cov_index(name) {
                for i in 0..n {
                    endemic_z[[i, c]] = history.endemic_covs[[i, idx]];
                }
            } else {
                // fall back to a time-constant column of the term grids
                let idx = history.epi_term_index(name).expect("validated above");
                let grid = &history.epi_terms[idx];
                for i in 0..n {
                    let v = grid[[0, i]];
                    for b in 1..history.n_blocks() {
                        if (grid[[b, i]] - v).abs() > 1e-12 {
                            return Err(Error::Model(format!(
                                "endemic covariate {name} varies over time for individual {}",
                                history.ids[i]
                            )));
                        }
                    }
                    endemic_z[[i, c]] = v;
                }
            }
        }
        Ok(Compiled {
            spec,
            history,
            names: spec.coef_names(),
            epi_grids,
            endemic_z,
            n_params: spec.n_params(),
        })
    }

    pub fn check_len(&self, coefs: &[f64]) -> Result<()> {
        if coefs.len() != self.n_params {
            return Err(Error::Dimension(format!(
                "{} coefficients supplied, model has {}",
                coefs.len(),
                self.n_params
            )));
        }
        Ok(())
    }

    fn alpha<'b>(&self, coefs: &'b [f64]) -> &'b [f64] {
        &coefs[..self.spec.n_alpha()]
    }

    /// Endemic rate nu_i = exp(z_i' beta), constant over time.
    pub fn nu(&self, coefs: &[f64], i: usize) -> f64 {
        let beta = &coefs[self.spec.n_alpha()..];
        let mut lin = 0.0;
        let mut k = 0;
        if self.spec.endemic_intercept {
            lin += beta[k];
            k += 1;
        }
        for c in 0..self.spec.endemic.len() {
            lin += beta[k] * self.endemic_z[[i, c]];
            k += 1;
        }
        if self.spec.n_beta() == 0 {
            0.0
        } else {
            lin.exp()
        }
    }

    /// Intensity of individual i on block b (zero when not at risk).
    pub fn intensity(&self, coefs: &[f64], b: usize, i: usize) -> f64 {
        if self.history.at_risk[[b, i]] == 0 {
            return 0.0;
        }
        let alpha = self.alpha(coefs);
        let mut epi = 0.0;
        for (m, grid) in self.epi_grids.iter().enumerate() {
            epi += alpha[m] * grid[[b, i]];
        }
        self.nu(coefs, i) + epi
    }

    /// Log-likelihood and analytic gradient; intensities are piecewise
    /// constant so the compensator is an exact sum.
    pub fn loglik_grad(&self, coefs: &[f64], strict: bool) -> Result<(f64, Vec<f64>)> {
        self.check_len(coefs)?;
        let h = self.history;
        let n_alpha = self.spec.n_alpha();
        let n = h.n_individuals();
        let mut ll = 0.0;
        let mut grad = vec![0.0; self.n_params];
        for b in 0..h.n_blocks() {
            let dt = h.blocks[b].1 - h.blocks[b].0;
            for i in 0..n {
                if h.at_risk[[b, i]] == 0 {
                    continue;
                }
                let nu = self.nu(coefs, i);
                let lam = self.intensity(coefs, b, i);
                if !lam.is_finite() {
                    if strict {
                        return Err(Error::Numeric(format!(
                            "non-finite intensity in block {b} for {}",
                            h.ids[i]
                        )));
                    }
                    return Ok((f64::NEG_INFINITY, grad));
                }
                // compensator
                ll -= lam * dt;
                for (m, grid) in self.epi_grids.iter().enumerate() {
                    grad[m] -= grid[[b, i]] * dt;
                }
                let mut k = n_alpha;
                if self.spec.endemic_intercept {
                    grad[k] -= nu * dt;
                    k += 1;
                }
                for c in 0..self.spec.endemic.len() {
                    grad[k] -= nu * self.endemic_z[[i, c]] * dt;
                    k += 1;
                }
            }
            // infection event at the block's stop time
            if let Some(i) = h.infection_event[b] {
                let lam = self.intensity(coefs, b, i);
                if !(lam > 0.0) {
                    if strict {
                        return Err(Error::Model(format!(
                            "infection of {} at t = {} has intensity {lam}",
                            h.ids[i], h.blocks[b].1
                        )));
                    }
                    return Ok((f64::NEG_INFINITY, grad));
                }
                ll += lam.ln();
                let inv = 1.0 / lam;
                let nu = self.nu(coefs, i);
                for (m, grid) in self.epi_grids.iter().enumerate() {
                    grad[m] += inv * grid[[b, i]];
                }
                let mut k = n_alpha;
                if self.spec.endemic_intercept {
                    grad[k] += inv * nu;
                    k += 1;
                }
                for c in 0..self.spec.endemic.len() {
                    grad[k] += inv * nu * self.endemic_z[[i, c]];
                    k += 1;
                }
            }
        }
        Ok((ll, grad))
    }
}

/// Intensity of one individual on one block.
pub fn cif_twinsir(
    spec: &TwinSIRSpec,
    history: &EventHistory,
    coefs: &[f64],
    individual: usize,
    block: usize,
) -> Result<f64> {
    let c = Compiled::new(spec, history)?;
    c.check_len(coefs)?;
    if individual >= history.n_individuals() || block >= history.n_blocks() {
        return Err(Error::Invalid("individual or block index out of range".into()));
    }
    Ok(c.intensity(coefs, block, individual))
}

/// Log-likelihood and analytic gradient at `coefs` (alpha block first).
pub fn loglik_twinsir(
    spec: &TwinSIRSpec,
    history: &EventHistory,
    coefs: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let c = Compiled::new(spec, history)?;
    for (m, a) in coefs[..spec.n_alpha()].iter().enumerate() {
        if *a < 0.0 {
            return Err(Error::Invalid(format!(
                "epidemic coefficient {} is negative",
                spec.epidemic[m]
            )));
        }
    }
    c.loglik_grad(coefs, true)
}
