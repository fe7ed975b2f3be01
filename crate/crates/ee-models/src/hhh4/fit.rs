use ndarray::Array2;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::CountSeries;
use crate::error::{Error, Result};
use crate::optim::{self, Options};

use super::lik::Compiled;
use super::{Family, HHH4Spec};

/// A fitted count model.
#[derive(Debug, Clone)]
pub struct HHH4Fit {
    pub spec: HHH4Spec,
    pub names: Vec<String>,
    /// Internal-scale estimates (log d, log psi).
    pub coefficients: Vec<f64>,
    /// Inverse observed information on the internal scale.
    pub covariance: Array2<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_evals: usize,
    /// 0-based fitted time rows.
    pub subset_rows: Vec<usize>,
    pub unit_ids: Vec<String>,
    /// subset x units grids.
    pub fitted_mean: Array2<f64>,
    pub fitted_endemic: Array2<f64>,
    pub fitted_ar: Array2<f64>,
    pub fitted_ne: Array2<f64>,
    pub df: usize,
    pub nobs: usize,
    pub aic: f64,
    pub bic: f64,
}

impl HHH4Fit {
    pub fn coef_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn se(&self, k: usize) -> f64 {
        self.covariance[[k, k]].max(0.0).sqrt()
    }

    /// Estimates and standard errors on the reporting scale: `neweights.d`
    /// and `overdisp` are delta-transformed back to their natural scale.
    pub fn reported(&self) -> Vec<(String, f64, f64)> {
        self.names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let est = self.coefficients[k];
                let se = self.se(k);
                if name == "neweights.d" || name.starts_with("overdisp") {
                    let nat = est.exp();
                    (name.clone(), nat, nat * se)
                } else {
                    (name.clone(), est, se)
                }
            })
            .collect()
    }

    /// Overdispersion psi for unit `i` (0 under the Poisson family).
    pub fn psi(&self, i: usize) -> f64 {
        match self.spec.family {
            Family::Poisson => 0.0,
            Family::NegBin1 => self.coefficients[self.coef_index("overdisp").unwrap()].exp(),
            Family::NegBinM => {
                let name = format!("overdisp.{}", self.unit_ids[i]);
                self.coefficients[self.coef_index(&name).unwrap()].exp()
            }
        }
    }

    /// Conditional mean vector at 1-based time `t` (t >= 2) for this fit.
    pub fn mean_at(&self, data: &CountSeries, t: usize) -> Result<Vec<f64>> {
        super::lik::mean_hhh4(&self.spec, data, &self.coefficients, t)
    }
}

/// Deterministic start values: endemic intercept at
/// log(mean(counts) / mean(offset)), everything else 0.
fn start_values(c: &Compiled, data: &CountSeries) -> Vec<f64> {
    let mut x = vec![0.0; c.n_params];
    if let Some(d) = &c.spec.endemic {
        if d.intercept {
            let mean_y: f64 = data.counts.iter().sum::<f64>() / data.counts.len() as f64;
            let mean_off = d
                .offset
                .as_ref()
                .map(|o| o.iter().sum::<f64>() / o.len() as f64)
                .unwrap_or(1.0);
            if mean_y > 0.0 && mean_off > 0.0 {
                x[c.end_at] = (mean_y / mean_off).ln();
            }
        }
    }
    x
}

/// Maximum-likelihood fit by quasi-Newton ascent with the analytic gradient.
///
/// Convergence requires the gradient max-norm to drop below 1e-6; the
/// covariance comes from numerically differencing the analytic score at the
/// optimum. Non-convergence is reported through the flag, with the best
/// point retained.
pub fn fit_hhh4(
    spec: &HHH4Spec,
    data: &CountSeries,
    start: Option<Vec<f64>>,
) -> Result<HHH4Fit> {
    let compiled = Compiled::new(spec, data)?;
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
        None => start_values(&compiled, data),
    };
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (ll, grad) = compiled.loglik_grad(theta, false)?;
        Ok((-ll, grad.iter().map(|g| -g).collect()))
    };
    let out = optim::minimize(objective, &x0, None, &Options::default())?;

    let hess = optim::numeric_hessian(
        |theta| Ok(objective(theta)?.1),
        &out.x,
    )?;
    let covariance = optim::inverse(&hess)
        .unwrap_or_else(|_| Array2::from_elem((out.x.len(), out.x.len()), f64::NAN));

    let loglik = -out.value;
    let subset_rows = compiled.subset.clone();
    let u_len = data.n_units();
    let mut fitted_endemic = Array2::<f64>::zeros((subset_rows.len(), u_len));
    let mut fitted_ar = Array2::<f64>::zeros((subset_rows.len(), u_len));
    let mut fitted_ne = Array2::<f64>::zeros((subset_rows.len(), u_len));
    for (row, &t) in subset_rows.iter().enumerate() {
        let (e, a, n) = compiled.components_at(&out.x, t, None);
        for i in 0..u_len {
            fitted_endemic[[row, i]] = e[i];
            fitted_ar[[row, i]] = a[i];
            fitted_ne[[row, i]] = n[i];
        }
    }
    let fitted_mean = &fitted_endemic + &fitted_ar + &fitted_ne;
    let df = compiled.n_params;
    let nobs = subset_rows.len() * u_len;
    let aic = -2.0 * loglik + 2.0 * df as f64;
    let bic = -2.0 * loglik + (nobs as f64).ln() * df as f64;

    Ok(HHH4Fit {
        spec: spec.clone(),
        names: compiled.names.clone(),
        coefficients: out.x,
        covariance,
        loglik,
        converged: out.converged,
        iterations: out.iterations,
        n_evals: out.n_evals,
        subset_rows,
        unit_ids: data.unit_ids.clone(),
        fitted_mean,
        fitted_endemic,
        fitted_ar,
        fitted_ne,
        df,
        nobs,
        aic,
        bic,
    })
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone)]
pub struct Hhh4Summary {
    pub rows: Vec<SummaryRow>,
    pub max_ev: Option<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_units: usize,
    pub n_time: usize,
}

/// Summary with optional exp-transformed coefficients, amplitude/phase
/// conversion of seasonal pairs, and the dominant eigenvalue of the epidemic
/// coupling matrix.
pub fn summarize_hhh4(
    fit: &HHH4Fit,
    data: &CountSeries,
    idx2exp: &[String],
    amplitude_shift: bool,
    max_ev: bool,
) -> Result<Hhh4Summary> {
    let reported = fit.reported();
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut consumed = vec![false; reported.len()];

    if amplitude_shift {
        // pair sin/cos covariate coefficients within each component
        for k in 0..reported.len() {
            let name = &reported[k].0;
            if let Some(rest) = name_find_sin(name) {
                let cos_name = format!("{}cos{}", rest.0, rest.1);
                if let Some(k2) = fit.coef_index(&cos_name) {
                    let gamma = fit.coefficients[k];
                    let delta = fit.coefficients[k2];
                    let a = (gamma * gamma + delta * delta).sqrt();
                    let phi = delta.atan2(gamma);
                    let vg = fit.covariance[[k, k]];
                    let vd = fit.covariance[[k2, k2]];
                    let cgd = fit.covariance[[k, k2]];
                    let var_a = if a > 0.0 {
                        (gamma * gamma * vg + delta * delta * vd + 2.0 * gamma * delta * cgd)
                            / (a * a)
                    } else {
                        0.0
                    };
                    let var_phi = if a > 0.0 {
                        (delta * delta * vg + gamma * gamma * vd - 2.0 * gamma * delta * cgd)
                            / (a * a * a * a)
                    } else {
                        0.0
                    };
                    rows.push(SummaryRow {
                        name: format!("{}A{}", rest.0, rest.1),
                        estimate: a,
                        se: var_a.max(0.0).sqrt(),
                    });
                    rows.push(SummaryRow {
                        name: format!("{}s{}", rest.0, rest.1),
                        estimate: phi,
                        se: var_phi.max(0.0).sqrt(),
                    });
                    consumed[k] = true;
                    consumed[k2] = true;
                }
            }
        }
    }

    let mut out_rows = Vec::new();
    for (k, (name, est, se)) in reported.iter().enumerate() {
        if consumed[k] {
            continue;
        }
        if idx2exp.contains(name) {
            out_rows.push(SummaryRow {
                name: format!("exp({name})"),
                estimate: est.exp(),
                se: est.exp() * se,
            });
        } else {
            out_rows.push(SummaryRow {
                name: name.clone(),
                estimate: *est,
                se: *se,
            });
        }
    }
    out_rows.extend(rows);

    let max_ev_val = if max_ev {
        Some(epidemic_dominant_eigenvalue(fit, data)?)
    } else {
        None
    };

    Ok(Hhh4Summary {
        rows: out_rows,
        max_ev: max_ev_val,
        loglik: fit.loglik,
        aic: fit.aic,
        bic: fit.bic,
        n_units: data.n_units(),
        n_time: fit.subset_rows.len(),
    })
}

/// Spectral radius of the coupling matrix with lambda_i on the diagonal and
/// phi_i w_ji off-diagonal, averaged over the fitted subset.
pub fn epidemic_dominant_eigenvalue(fit: &HHH4Fit, data: &CountSeries) -> Result<f64> {
    let compiled = Compiled::new(&fit.spec, data)?;
    let u_len = data.n_units();
    let mut lambda = vec![0.0; u_len];
    let mut phi = vec![0.0; u_len];
    // average the multiplicative factors over the fitted subset
    for &t in &fit.subset_rows {
        let (l_t, p_t) = compiled.epidemic_factors_at(&fit.coefficients, t);
        for i in 0..u_len {
            lambda[i] += l_t[i] / fit.subset_rows.len() as f64;
            phi[i] += p_t[i] / fit.subset_rows.len() as f64;
        }
    }
    let w = match &fit.spec.ne {
        Some((_, wspec)) => {
            let p = &fit.coefficients[compiled.w_at..compiled.psi_at];
            Some(wspec.weights(&data.nb_order, p))
        }
        None => None,
    };
    let mut coupling = Array2::<f64>::zeros((u_len, u_len));
    for i in 0..u_len {
        coupling[[i, i]] = lambda[i];
        if let Some(w) = &w {
            for j in 0..u_len {
                if j != i {
                    coupling[[i, j]] = phi[i] * w[[j, i]];
                }
            }
        }
    }
    Ok(optim::spectral_radius(&coupling))
}

fn name_find_sin(name: &str) -> Option<(String, String)> {
    // "end.sin(2 * pi * t/52)" -> ("end.", "(2 * pi * t/52)")
    let pos = name.find("sin(")?;
    Some((name[..pos].to_string(), name[pos + 3..].to_string()))
}

/// Wald interval on the reporting scale.
pub fn confint_wald(fit: &HHH4Fit, name: &str, level: f64) -> Result<(f64, f64)> {
    let reported = fit.reported();
    let (_, est, se) = reported
        .iter()
        .find(|(n, _, _)| n == name)
        .ok_or_else(|| Error::Invalid(format!("unknown coefficient \"{name}\"")))?;
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let z = normal.inverse_cdf(1.0 - (1.0 - level) / 2.0);
    Ok((est - z * se, est + z * se))
}

/// Endemic, autoregressive, and neighbourhood component grids; their
/// elementwise sum is the fitted mean.
pub fn fitted_components(fit: &HHH4Fit) -> (&Array2<f64>, &Array2<f64>, &Array2<f64>) {
    (&fit.fitted_endemic, &fit.fitted_ar, &fit.fitted_ne)
}

/// AIC table row ordering helper for model comparison.
pub fn aic_of(fits: &[(&str, &HHH4Fit)]) -> Vec<(String, usize, f64)> {
    let mut rows: Vec<(String, usize, f64)> = fits
        .iter()
        .map(|(n, f)| (n.to_string(), f.df, f.aic))
        .collect();
    rows.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    rows
}

/// Sum of fitted means over the subset; equals the observed total at an
/// interior Poisson MLE (score identity for the intercept).
pub fn fitted_total(fit: &HHH4Fit) -> f64 {
    fit.fitted_mean.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{validate_counts, NeighbourhoodInput, PopulationInput};
    use crate::hhh4::{add_season_terms, ComponentDesign, WeightsSpec};
    use approx::assert_relative_eq;
    use ndarray::array;

    fn small_series(counts: Array2<f64>) -> CountSeries {
        let u = counts.ncols();
        let mut adj = Array2::from_elem((u, u), false);
        for i in 0..u.saturating_sub(1) {
            adj[[i, i + 1]] = true;
            adj[[i + 1, i]] = true;
        }
        validate_counts(
            counts,
            (2001, 1),
            52,
            PopulationInput::PerUnit(vec![1.0 / u as f64; u]),
            NeighbourhoodInput::Adjacency {
                matrix: adj,
                maxlag: 5,
            },
            (0..u).map(|i| format!("u{i}")).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn endemic_only_poisson_has_closed_form() {
        // intercept-only endemic Poisson: MLE intercept = log(mean y / mean e)
        let counts = array![[2.0, 4.0], [3.0, 1.0], [5.0, 0.0], [2.0, 2.0]];
        let data = small_series(counts);
        let spec = HHH4Spec {
            endemic: Some(ComponentDesign {
                intercept: true,
                covariates: vec![],
                offset: Some(data.pop_frac.clone()),
            }),
            ar: None,
            ne: None,
            family: Family::Poisson,
            subset: None,
        };
        let fit = fit_hhh4(&spec, &data, None).unwrap();
        assert!(fit.converged);
        // subset is rows 2..4 (1-based), 6 observations
        let mean_y = (3.0 + 1.0 + 5.0 + 0.0 + 2.0 + 2.0) / 6.0;
        let expect = (mean_y / 0.5f64).ln();
        assert_relative_eq!(fit.coefficients[0], expect, epsilon = 1e-6);
        // Poisson MLE: fitted total equals observed total
        assert_relative_eq!(fitted_total(&fit), 13.0, epsilon = 1e-6);
        // components sum to the mean
        let (e, a, n) = fitted_components(&fit);
        for idx in 0..fit.fitted_mean.len() {
            let s = e.as_slice().unwrap()[idx] + a.as_slice().unwrap()[idx]
                + n.as_slice().unwrap()[idx];
            assert_relative_eq!(s, fit.fitted_mean.as_slice().unwrap()[idx], epsilon = 1e-12);
        }
        // epidemic grids identically zero for an endemic-only spec
        assert!(a.iter().all(|v| *v == 0.0));
        assert!(n.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn aic_and_bic_formulas() {
        let counts = array![[2.0, 4.0], [3.0, 1.0], [5.0, 0.0], [2.0, 2.0]];
        let data = small_series(counts);
        let spec = HHH4Spec {
            endemic: Some(ComponentDesign::intercept_only()),
            ar: None,
            ne: None,
            family: Family::Poisson,
            subset: None,
        };
        let fit = fit_hhh4(&spec, &data, None).unwrap();
        assert_relative_eq!(fit.aic, -2.0 * fit.loglik + 2.0, epsilon = 1e-12);
        assert_relative_eq!(
            fit.bic,
            -2.0 * fit.loglik + (6.0f64).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn summary_amplitude_and_maxev() {
        let counts = Array2::from_shape_fn((30, 2), |(t, i)| ((t * 7 + i * 3) % 4) as f64);
        let data = small_series(counts);
        let endemic = add_season_terms(
            ComponentDesign::intercept_only(),
            1,
            52.0,
            30,
            2,
        )
        .unwrap();
        let spec = HHH4Spec {
            endemic: Some(endemic),
            ar: Some(ComponentDesign::intercept_only()),
            ne: Some((ComponentDesign::intercept_only(), WeightsSpec::first_order())),
            family: Family::Poisson,
            subset: None,
        };
        let fit = fit_hhh4(&spec, &data, None).unwrap();
        let summary = summarize_hhh4(
            &fit,
            &data,
            &["ar.1".to_string(), "ne.1".to_string()],
            true,
            true,
        )
        .unwrap();
        assert!(summary.max_ev.is_some());
        assert!(summary.rows.iter().any(|r| r.name.starts_with("end.A")));
        assert!(summary.rows.iter().any(|r| r.name.starts_with("exp(ar.1)")));
        // amplitude identity on a constructed pair: gamma=1, delta=0
        let mut fit2 = fit.clone();
        let k_sin = fit2
            .names
            .iter()
            .position(|n| n.contains("sin"))
            .unwrap();
        let k_cos = fit2
            .names
            .iter()
            .position(|n| n.contains("cos"))
            .unwrap();
        fit2.coefficients[k_sin] = 1.0;
        fit2.coefficients[k_cos] = 0.0;
        let s2 = summarize_hhh4(&fit2, &data, &[], true, false).unwrap();
        let a_row = s2.rows.iter().find(|r| r.name.starts_with("end.A")).unwrap();
        let p_row = s2.rows.iter().find(|r| r.name.starts_with("end.s")).unwrap();
        assert_relative_eq!(a_row.estimate, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p_row.estimate, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn maxev_zero_without_epidemic_terms() {
        let counts = array![[2.0, 4.0], [3.0, 1.0], [5.0, 0.0], [2.0, 2.0]];
        let data = small_series(counts);
        let spec = HHH4Spec {
            endemic: Some(ComponentDesign::intercept_only()),
            ar: None,
            ne: None,
            family: Family::Poisson,
            subset: None,
        };
        let fit = fit_hhh4(&spec, &data, None).unwrap();
        let ev = epidemic_dominant_eigenvalue(&fit, &data).unwrap();
        assert_eq!(ev, 0.0);
    }

    #[test]
    fn maxev_invariant_under_unit_permutation() {
        // fixed coefficients: the coupling-matrix spectral radius must not
        // depend on how the units are ordered
        let counts = Array2::from_shape_fn((6, 4), |(t, i)| ((t * (i + 2)) % 5) as f64);
        let spec = HHH4Spec {
            endemic: Some(ComponentDesign::intercept_only()),
            ar: Some(ComponentDesign::intercept_only()),
            ne: Some((ComponentDesign::intercept_only(), WeightsSpec::power_law(5))),
            family: Family::Poisson,
            subset: None,
        };
        // path 0-1-2-3 versus its reversal
        let make_data = |reversed: bool| {
            let mut adj = Array2::from_elem((4, 4), false);
            for i in 0..3 {
                adj[[i, i + 1]] = true;
                adj[[i + 1, i]] = true;
            }
            let c = if reversed {
                Array2::from_shape_fn((6, 4), |(t, i)| counts[[t, 3 - i]])
            } else {
                counts.clone()
            };
            validate_counts(
                c,
                (2001, 1),
                52,
                PopulationInput::PerUnit(vec![0.25; 4]),
                NeighbourhoodInput::Adjacency {
                    matrix: adj,
                    maxlag: 5,
                },
                (0..4).map(|i| format!("u{i}")).collect(),
                None,
            )
            .unwrap()
        };
        let coefs = vec![(0.4f64).ln(), (0.1f64).ln(), 0.0, (2.0f64).ln()];
        let ev_of = |data: &CountSeries| {
            let mut fit = fit_hhh4(&spec, data, Some(coefs.clone())).unwrap();
            fit.coefficients = coefs.clone();
            epidemic_dominant_eigenvalue(&fit, data).unwrap()
        };
        let ev = ev_of(&make_data(false));
        let ev_p = ev_of(&make_data(true));
        assert!(ev > 0.3, "coupling should be nontrivial, got {ev}");
        assert_relative_eq!(ev, ev_p, max_relative = 1e-9);
    }

    #[test]
    fn confint_zero_se_degenerates() {
        let counts = array![[2.0, 4.0], [3.0, 1.0], [5.0, 0.0], [2.0, 2.0]];
        let data = small_series(counts);
        let spec = HHH4Spec {
            endemic: Some(ComponentDesign::intercept_only()),
            ar: None,
            ne: None,
            family: Family::Poisson,
            subset: None,
        };
        let mut fit = fit_hhh4(&spec, &data, None).unwrap();
        fit.covariance[[0, 0]] = 0.0;
        let (lo, hi) = confint_wald(&fit, "end.1", 0.95).unwrap();
        assert_relative_eq!(lo, hi, epsilon = 1e-14);
        assert!(confint_wald(&fit, "nonexistent", 0.95).is_err());
    }
}
