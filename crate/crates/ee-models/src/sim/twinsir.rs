use rand::Rng;

use crate::data::EventHistory;
use crate::error::{Error, Result};
use crate::twinsir::TwinSIRFit;

use super::replicate_rng;

/// Simulate an SIR epidemic from a fitted additive-intensity model.
///
/// The total intensity is piecewise constant between state changes, so the
/// waiting time to the next infection is exponential at the current total
/// rate, truncated at the next scheduled removal. The infected individual is
/// chosen with probability proportional to its intensity; removals are
/// scheduled `infectious_period` after infection (initially infectious
/// individuals count from their original infection time).
///
/// Returns a rebuilt event history over (t0, t_end] with the same epidemic
/// term definitions as the input.
pub fn simulate_twinsir(
    fit: &TwinSIRFit,
    history: &EventHistory,
    infectious_period: f64,
    t_end: f64,
    seed: u64,
) -> Result<EventHistory> {
    if !(infectious_period > 0.0) {
        return Err(Error::Invalid("infectious period must be positive".into()));
    }
    let t0 = history.t0;
    if !(t_end > t0) {
        return Err(Error::Invalid("t_end must exceed the history start".into()));
    }
    let n = history.n_individuals();
    let spec = &fit.spec;
    let n_alpha = spec.n_alpha();

    // endemic rates are time constant per individual; reuse the fitted
    // design resolution through a throwaway intensity call on block 0
    let compiled = crate::twinsir::lik_compiled(spec, history)?;
    let nu: Vec<f64> = (0..n).map(|i| compiled.nu(&fit.coefficients, i)).collect();

    // distance matrix for the basis terms
    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (history.coords[i], history.coords[j]);
            dist[i][j] = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        }
    }
    if n_alpha > 0 && history.generative_basis_len() == 0 {
        return Err(Error::Model(
            "history carries no generative epidemic-term definitions; \
             rebuild it with distance bases (step_kernel_terms) first"
                .into(),
        ));
    }

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Susceptible,
        Infectious,
        Removed,
    }
    let mut state = vec![State::Susceptible; n];
    let mut t_inf: Vec<Option<f64>> = vec![None; n];
    let mut t_rem: Vec<Option<f64>> = vec![None; n];
    // initial conditions from the base history
    for i in 0..n {
        if let Some(ti) = history.t_inf[i] {
            if ti <= t0 {
                t_inf[i] = Some(ti);
                let rem = ti + infectious_period;
                if rem > t0 {
                    state[i] = State::Infectious;
                    t_rem[i] = Some(rem);
                } else {
                    state[i] = State::Removed;
                    t_rem[i] = Some(rem);
                }
            }
        }
    }

    let mut rng = replicate_rng(seed, 0);
    let mut t = t0;
    loop {
        // current intensities of susceptibles
        let infectious: Vec<usize> = (0..n)
            .filter(|&j| state[j] == State::Infectious)
            .collect();
        let mut rates = vec![0.0f64; n];
        let mut total = 0.0;
        for i in 0..n {
            if state[i] != State::Susceptible {
                continue;
            }
            let mut lam = nu[i];
            for (m, name) in spec.epidemic.iter().enumerate() {
                let mut term = 0.0;
                for &j in &infectious {
                    term += history.eval_epi_basis(name, dist[i][j], i, j)?;
                }
                lam += fit.coefficients[m] * term;
            }
            rates[i] = lam.max(0.0);
            total += rates[i];
        }
        // next scheduled removal
        let next_rem = (0..n)
            .filter(|&j| state[j] == State::Infectious)
            .filter_map(|j| t_rem[j])
            .fold(f64::INFINITY, f64::min);
        let t_next_inf = if total > 0.0 {
            let u: f64 = rng.gen::<f64>();
            t - u.ln() / total
        } else {
            f64::INFINITY
        };
        if t_next_inf.min(next_rem) > t_end {
            break;
        }
        if next_rem <= t_next_inf {
            // process the removal
            t = next_rem;
            for j in 0..n {
                if state[j] == State::Infectious && t_rem[j] == Some(next_rem) {
                    state[j] = State::Removed;
                }
            }
        } else {
            // infection: choose the individual proportional to its rate
            t = t_next_inf;
            let mut u: f64 = rng.gen::<f64>() * total;
            let mut chosen = None;
            for (i, &r) in rates.iter().enumerate() {
                if r > 0.0 {
                    u -= r;
                    if u <= 0.0 {
                        chosen = Some(i);
                        break;
                    }
                }
            }
            let i = chosen.unwrap_or_else(|| {
                rates
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| **r > 0.0)
                    .map(|(i, _)| i)
                    .last()
                    .expect("total > 0 implies a positive rate")
            });
            state[i] = State::Infectious;
            t_inf[i] = Some(t);
            t_rem[i] = Some(t + infectious_period);
        }
    }

    // removal times beyond the horizon are censored by the rebuild (the
    // individual stays infectious through t_end)
    let t_rem_final: Vec<Option<f64>> = t_inf
        .iter()
        .zip(&t_rem)
        .map(|(ti, tr)| match (ti, tr) {
            (Some(_), Some(r)) => Some(*r),
            _ => None,
        })
        .collect();
    history.rebuild_from_times(t_inf, t_rem_final, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_event_history, household_basis, Individual};
    use crate::prob::{ks_critical_value, ks_statistic_uniform};
    use crate::twinsir::{fit_twinsir, TwinSIRSpec};
    use std::collections::BTreeMap;

    fn base_history(n: usize, index_case: bool) -> EventHistory {
        let mut inds = Vec::new();
        for k in 0..n {
            let (ti, tr) = if k == 0 && index_case {
                (Some(-0.5), Some(5.0))
            } else if k == 1 {
                // one observed infection so the history has events
                (Some(3.0), Some(8.0))
            } else {
                (None, None)
            };
            inds.push(Individual {
                id: format!("p{k}"),
                coord: [((k % 5) * 50) as f64, ((k / 5) * 50) as f64],
                t_inf: ti,
                t_rem: tr,
                covariates: BTreeMap::new(),
            });
        }
        build_event_history(inds, 0.0, household_basis(), vec![], &[], Some(30.0)).unwrap()
    }

    fn fit_with(history: &EventHistory, coefs: Vec<f64>) -> TwinSIRFit {
        let spec = TwinSIRSpec::epidemic_only(&["household", "nothousehold"]);
        let mut fit = fit_twinsir(&spec, history, Some(coefs.clone())).unwrap();
        fit.coefficients = coefs;
        fit
    }

    #[test]
    fn no_endemic_no_infectives_no_events() {
        let h = base_history(10, false);
        // history has one infection (k = 1) after t0, so susceptibles only;
        // zero endemic rate and zero epidemic coefficients
        let spec = TwinSIRSpec {
            epidemic: vec!["household".into(), "nothousehold".into()],
            endemic: vec![],
            endemic_intercept: false,
        };
        let fit = TwinSIRFit {
            spec,
            names: vec!["household".into(), "nothousehold".into()],
            coefficients: vec![0.0, 0.0],
            covariance: ndarray::Array2::zeros((2, 2)),
            at_boundary: vec![true, true],
            loglik: 0.0,
            converged: true,
            iterations: 0,
            n_evals: 0,
            n_infections: 0,
            df: 2,
            aic: 0.0,
        };
        // wipe the initial infections: fresh susceptible population
        let mut t_inf = vec![None; 10];
        let mut t_rem = vec![None; 10];
        t_inf[1] = None;
        t_rem[1] = None;
        let fresh = h.rebuild_from_times(t_inf, t_rem, 30.0).unwrap();
        let sim = simulate_twinsir(&fit, &fresh, 7.0, 30.0, 1).unwrap();
        assert_eq!(sim.n_infections(), 0);
    }

    #[test]
    fn first_waiting_time_is_exponential() {
        // all susceptible, endemic-only: time to the first infection is
        // exponential with rate n * exp(beta0)
        let h = {
            let mut t_inf = vec![None; 10];
            t_inf[1] = None;
            base_history(10, false)
                .rebuild_from_times(t_inf, vec![None; 10], 30.0)
                .unwrap()
        };
        let beta0 = -3.0f64;
        let fit = fit_with(&h, vec![0.0, 0.0, beta0]);
        let rate = 10.0 * beta0.exp();
        let mut firsts = Vec::new();
        for rep in 0..1500 {
            let sim = simulate_twinsir(&fit, &h, 1000.0, 1e4, 1000 + rep).unwrap();
            let first = sim
                .t_inf
                .iter()
                .flatten()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            if first.is_finite() {
                firsts.push(first);
            }
        }
        assert!(firsts.len() > 1400, "almost every run sees an event");
        firsts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let u: Vec<f64> = firsts.iter().map(|t| 1.0 - (-rate * t).exp()).collect();
        let d = ks_statistic_uniform(&u);
        assert!(
            d <= ks_critical_value(u.len(), 0.01),
            "KS {d} over {} samples",
            u.len()
        );
    }

    #[test]
    fn selection_frequencies_proportional_to_rates() {
        // one initial infective; household member has a boosted rate
        let inds = vec![
            Individual {
                id: "idx".into(),
                coord: [0.0, 0.0],
                t_inf: Some(-0.5),
                t_rem: Some(50.0),
                covariates: BTreeMap::new(),
            },
            Individual {
                id: "mate".into(),
                coord: [0.0, 0.0],
                t_inf: None,
                t_rem: None,
                covariates: BTreeMap::new(),
            },
            Individual {
                id: "far".into(),
                coord: [500.0, 0.0],
                t_inf: None,
                t_rem: None,
                covariates: BTreeMap::new(),
            },
        ];
        let h = build_event_history(inds, 0.0, household_basis(), vec![], &[], Some(60.0))
            .unwrap();
        let (a_h, a_nh, b0) = (0.05f64, 0.01f64, -4.0f64);
        let fit = fit_with(&h, vec![a_h, a_nh, b0]);
        let rate_mate = b0.exp() + a_h;
        let rate_far = b0.exp() + a_nh;
        let p_mate = rate_mate / (rate_mate + rate_far);
        let n_runs = 10_000;
        let mut mate_first = 0usize;
        let mut decided = 0usize;
        for rep in 0..n_runs {
            let sim = simulate_twinsir(&fit, &h, 10_000.0, 1e5, 777 + rep).unwrap();
            let tm = sim.t_inf[1];
            let tf = sim.t_inf[2];
            match (tm, tf) {
                (Some(a), Some(b)) => {
                    decided += 1;
                    if a < b {
                        mate_first += 1;
                    }
                }
                (Some(_), None) => {
                    decided += 1;
                    mate_first += 1;
                }
                (None, Some(_)) => {
                    decided += 1;
                }
                _ => {}
            }
        }
        // chi-squared test on 2 cells at the 1% level
        let obs_mate = mate_first as f64;
        let obs_far = (decided - mate_first) as f64;
        let exp_mate = decided as f64 * p_mate;
        let exp_far = decided as f64 * (1.0 - p_mate);
        let chi2 = (obs_mate - exp_mate).powi(2) / exp_mate
            + (obs_far - exp_far).powi(2) / exp_far;
        let crit = crate::prob::chi_squared_quantile(0.99, 1.0).unwrap();
        assert!(chi2 < crit, "chi2 {chi2} vs crit {crit}");
    }

    #[test]
    fn validates_inputs() {
        let h = base_history(5, true);
        let fit = fit_with(&h, vec![0.01, 0.001, -3.0]);
        assert!(simulate_twinsir(&fit, &h, 0.0, 30.0, 1).is_err());
        assert!(simulate_twinsir(&fit, &h, 5.0, -1.0, 1).is_err());
    }
}
