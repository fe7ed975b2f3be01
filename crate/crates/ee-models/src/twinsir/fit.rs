use ndarray::Array2;

use crate::data::{step_distance_basis, EventHistory};
use crate::error::{Error, Result};
use crate::optim::{self, Options};

use super::lik::Compiled;
use super::TwinSIRSpec;

#[derive(Debug, Clone)]
pub struct TwinSIRFit {
    pub spec: TwinSIRSpec,
    pub names: Vec<String>,
    /// [alpha..., beta...]; every alpha >= 0.
    pub coefficients: Vec<f64>,
    /// Covariance from the observed information; rows and columns of
    /// coefficients at an active boundary come from the reduced Hessian and
    /// are zero there.
    pub covariance: Array2<f64>,
    /// Epidemic coefficients estimated exactly at the boundary alpha = 0;
    /// their reported standard errors are one-sided.
    pub at_boundary: Vec<bool>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_evals: usize,
    pub n_infections: usize,
    pub df: usize,
    /// Plain Akaike criterion -2 loglik + 2 df. The reference methodology
    /// additionally defines a one-sided criterion with simulated penalty
    /// weights, which this toolkit does not implement.
    pub aic: f64,
}

impl TwinSIRFit {
    pub fn coef_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn se(&self, k: usize) -> f64 {
        self.covariance[[k, k]].max(0.0).sqrt()
    }
}

/// Box-constrained maximum likelihood: alpha >= 0, beta free.
pub fn fit_twinsir(
    spec: &TwinSIRSpec,
    history: &EventHistory,
    start: Option<Vec<f64>>,
) -> Result<TwinSIRFit> {
    let compiled = Compiled::new(spec, history)?;
    let n_alpha = spec.n_alpha();
    let x0 = match start {
        Some(s) => {
            if s.len() != compiled.n_params {
                return Err(Error::Dimension(format!(
                    "start vector has {} entries, model has {}",
                    s.len(),
                    compiled.n_params
                )));
            }
            s
        }
        None => {
            let mut x0 = vec![0.01; compiled.n_params];
            for v in x0.iter_mut().skip(n_alpha) {
                *v = 0.0;
            }
            if spec.endemic_intercept {
                // crude scale: infections per person-time
                let person_time: f64 = (0..history.n_blocks())
                    .map(|b| {
                        let dt = history.blocks[b].1 - history.blocks[b].0;
                        (0..history.n_individuals())
                            .filter(|&i| history.at_risk[[b, i]] == 1)
                            .count() as f64
                            * dt
                    })
                    .sum();
                let n_inf = history.n_infections().max(1) as f64;
                x0[n_alpha] = (n_inf / person_time.max(1e-12)).ln();
            }
            x0
        }
    };

    let lower: Vec<Option<f64>> = (0..compiled.n_params)
        .map(|k| if k < n_alpha { Some(0.0) } else { None })
        .collect();
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (ll, grad) = compiled.loglik_grad(theta, false)?;
        Ok((-ll, grad.iter().map(|g| -g).collect()))
    };
    let out = optim::minimize(objective, &x0, Some(&lower), &Options::default())?;

    // observed information; active boundary coordinates use the reduced
    // Hessian (their covariance rows/columns stay zero)
    let hess = optim::numeric_hessian(
        |theta| Ok(objective(theta)?.1),
        &out.x,
    )?;
    let free: Vec<usize> = (0..compiled.n_params)
        .filter(|&k| !out.active[k])
        .collect();
    let mut covariance = Array2::<f64>::zeros((compiled.n_params, compiled.n_params));
    if !free.is_empty() {
        let mut reduced = Array2::<f64>::zeros((free.len(), free.len()));
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                reduced[[a, b]] = hess[[i, j]];
            }
        }
        if let Ok(inv) = optim::inverse(&reduced) {
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    covariance[[i, j]] = inv[[a, b]];
                }
            }
        } else {
            covariance.fill(f64::NAN);
        }
    }

    let loglik = -out.value;
    let df = compiled.n_params;
    Ok(TwinSIRFit {
        spec: spec.clone(),
        names: compiled.names.clone(),
        at_boundary: out.active[..n_alpha].to_vec(),
        coefficients: out.x,
        covariance,
        loglik,
        converged: out.converged,
        iterations: out.iterations,
        n_evals: out.n_evals,
        n_infections: history.n_infections(),
        df,
        aic: -2.0 * loglik + 2.0 * df as f64,
    })
}

/// Per-block epidemic proportion of the total intensity, in [0, 1].
pub fn epidemic_proportion(fit: &TwinSIRFit, history: &EventHistory) -> Result<Vec<f64>> {
    let compiled = Compiled::new(&fit.spec, history)?;
    let n_alpha = fit.spec.n_alpha();
    let mut out = Vec::with_capacity(history.n_blocks());
    for b in 0..history.n_blocks() {
        let mut total = 0.0;
        let mut epi = 0.0;
        for i in 0..history.n_individuals() {
            if history.at_risk[[b, i]] == 0 {
                continue;
            }
            let lam = compiled.intensity(&fit.coefficients, b, i);
            total += lam;
            for (m, grid) in compiled.epi_grids.iter().enumerate() {
                epi += fit.coefficients[m] * grid[[b, i]];
            }
            let _ = n_alpha;
        }
        out.push(if total > 0.0 { (epi / total).clamp(0.0, 1.0) } else { 0.0 });
    }
    Ok(out)
}

/// Total fitted compensator: sum over blocks and individuals of
/// Y_i lambda_i dt. Equals the observed number of infections at an MLE with
/// an endemic intercept (score identity).
pub fn total_compensator(fit: &TwinSIRFit, history: &EventHistory) -> Result<f64> {
    let compiled = Compiled::new(&fit.spec, history)?;
    let mut total = 0.0;
    for b in 0..history.n_blocks() {
        let dt = history.blocks[b].1 - history.blocks[b].0;
        for i in 0..history.n_individuals() {
            total += compiled.intensity(&fit.coefficients, b, i) * dt;
        }
    }
    Ok(total)
}

/// Rebuild the distance-based epidemic terms as indicator steps over
/// (0, k1), [k1, k2), ..., [km, infinity). Pair covariates are preserved.
pub fn step_kernel_terms(history: &EventHistory, knots: &[f64]) -> Result<EventHistory> {
    history.rebuild_with_basis(step_distance_basis(knots)?)
}
