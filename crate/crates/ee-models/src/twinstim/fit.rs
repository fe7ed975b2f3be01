use ndarray::Array2;

use crate::data::PointPattern;
use crate::error::{Error, Result};
use crate::kernels::SpatialKernel;
use crate::optim::{self, Options};

use super::lik::Compiled;
use super::TwinstimSpec;

/// Cubature tolerance while the optimizer iterates.
const TOL_OPTIM: f64 = 1e-5;
/// Tightened tolerance for the final likelihood and covariance evaluation.
const TOL_FINAL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct TwinstimFit {
    pub spec: TwinstimSpec,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance: Array2<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_evals: usize,
    /// Cached spatial integrals over the influence regions at the optimum.
    pub siaf_integrals: Vec<f64>,
    /// Cached temporal integrals up to min(T - t_j, eps_t_j).
    pub tiaf_integrals: Vec<f64>,
    /// Epidemic predictors eta_j at the optimum.
    pub eta: Vec<f64>,
    /// Transmission multiplicity per event (allowed destination types).
    pub multiplicity: Vec<f64>,
    pub df: usize,
    pub aic: f64,
}

impl TwinstimFit {
    pub fn coef_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn se(&self, k: usize) -> f64 {
        self.covariance[[k, k]].max(0.0).sqrt()
    }
}

/// Maximum-likelihood fit. Epidemic models are warm-started from the
/// endemic-only fit of the same endemic design.
pub fn fit_twinstim(
    spec: &TwinstimSpec,
    pattern: &PointPattern,
    start: Option<Vec<f64>>,
) -> Result<TwinstimFit> {
    spec.validate()?;
    if matches!(spec.siaf, SpatialKernel::PowerLaw) && pattern.duplicate_coordinate_pairs() > 0
    {
        return Err(Error::Model(
            "events with identical coordinates under a power-law kernel; \
             break ties with untie first"
                .into(),
        ));
    }
    let compiled = Compiled::new(spec, pattern)?;

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
            let mut x0 = vec![0.0; compiled.n_params];
            if spec.epidemic.is_some() {
                // endemic-only warm start
                let spec0 = TwinstimSpec::endemic_only(spec.endemic.clone());
                let fit0 = fit_twinstim(&spec0, pattern, None)?;
                x0[..fit0.coefficients.len()].copy_from_slice(&fit0.coefficients);
                // epidemic intercept: crude scale from the event count
                if spec.epidemic.as_ref().is_some_and(|e| e.intercept) {
                    x0[compiled.e_at] = -2.0;
                }
                let sp0 = spec.siaf.default_start();
                x0[compiled.siaf_at..compiled.tiaf_at].copy_from_slice(&sp0);
                let tp0 = spec.tiaf.default_start();
                x0[compiled.tiaf_at..].copy_from_slice(&tp0);
            } else if spec.endemic.intercept {
                // match the observed event count to the endemic volume
                let total_exposure: f64 = compiled
                    .exposure
                    .iter()
                    .zip(compiled.rho.iter())
                    .map(|(e, r)| e * r)
                    .sum::<f64>()
                    * pattern.n_types() as f64;
                let n = pattern.n_events().max(1) as f64;
                x0[0] = (n / total_exposure).ln();
            }
            x0
        }
    };

    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (ll, grad) = compiled.loglik_grad(theta, TOL_OPTIM, false)?;
        Ok((-ll, grad.iter().map(|g| -g).collect()))
    };
    let out = optim::minimize(objective, &x0, None, &Options::default())?;

    // final evaluation and covariance at the tight tolerance
    let (loglik, _) = compiled.loglik_grad(&out.x, TOL_FINAL, true)?;
    let hess = optim::numeric_hessian(
        |theta| {
            let (_, g) = compiled.loglik_grad(theta, TOL_FINAL, false)?;
            Ok(g.iter().map(|v| -v).collect())
        },
        &out.x,
    )?;
    let covariance = optim::inverse(&hess)
        .unwrap_or_else(|_| Array2::from_elem((out.x.len(), out.x.len()), f64::NAN));

    let (siaf_integrals, _) = compiled.spatial_integrals(&out.x, TOL_FINAL, false);
    let tp = compiled.tiaf_params(&out.x);
    let tiaf_integrals: Vec<f64> = if spec.epidemic.is_some() {
        compiled
            .g_limits
            .iter()
            .map(|&lim| spec.tiaf.integral(lim, tp))
            .collect()
    } else {
        vec![]
    };
    let eta: Vec<f64> = if spec.epidemic.is_some() {
        (0..pattern.n_events())
            .map(|j| compiled.eta(&out.x, j))
            .collect()
    } else {
        vec![]
    };
    let df = compiled.n_params;
    let aic = -2.0 * loglik + 2.0 * df as f64;

    Ok(TwinstimFit {
        spec: spec.clone(),
        names: compiled.names.clone(),
        coefficients: out.x,
        covariance,
        loglik,
        converged: out.converged,
        iterations: out.iterations,
        n_evals: out.n_evals,
        siaf_integrals,
        tiaf_integrals,
        eta,
        multiplicity: compiled.multiplicity.clone(),
        df,
        aic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Endemic,
    Epidemic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Drop existing terms one at a time while the AIC improves.
    Drop,
    /// Add candidate terms one at a time while the AIC improves.
    Add,
}

/// Greedy AIC-based single-term selection in one model component.
pub fn step_select(
    fit: &TwinstimFit,
    pattern: &PointPattern,
    component: Component,
    direction: Direction,
    candidates: &[String],
) -> Result<TwinstimFit> {
    let scope: Vec<String> = match (component, direction) {
        (Component::Endemic, Direction::Drop) => fit.spec.endemic.covariates.clone(),
        (Component::Epidemic, Direction::Drop) => fit
            .spec
            .epidemic
            .as_ref()
            .map(|e| e.covariates.clone())
            .unwrap_or_default(),
        (_, Direction::Add) => candidates.to_vec(),
    };
    if scope.is_empty() {
        return Err(Error::Model("empty selection scope".into()));
    }
    let mut best = fit.clone();
    let mut remaining = scope;
    loop {
        let mut improved = false;
        let mut best_candidate: Option<(usize, TwinstimFit)> = None;
        for (k, term) in remaining.iter().enumerate() {
            let mut spec = best.spec.clone();
            {
                let covs = match component {
                    Component::Endemic => &mut spec.endemic.covariates,
                    Component::Epidemic => {
                        &mut spec
                            .epidemic
                            .as_mut()
                            .ok_or_else(|| {
                                Error::Model("no epidemic component to modify".into())
                            })?
                            .covariates
                    }
                };
                match direction {
                    Direction::Drop => covs.retain(|c| c != term),
                    Direction::Add => {
                        if covs.contains(term) {
                            continue;
                        }
                        covs.push(term.clone());
                    }
                }
            }
            let cand = fit_twinstim(&spec, pattern, None)?;
            if cand.aic < best.aic - 1e-9
                && best_candidate.as_ref().map_or(true, |(_, b)| cand.aic < b.aic)
            {
                best_candidate = Some((k, cand));
            }
        }
        if let Some((k, cand)) = best_candidate {
            remaining.remove(k);
            best = cand;
            improved = true;
        }
        if !improved || remaining.is_empty() {
            break;
        }
    }
    Ok(best)
}
