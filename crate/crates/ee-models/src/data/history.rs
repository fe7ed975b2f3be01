use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Distance-dependent basis function B_m applied to pairwise distances.
pub type DistanceBasis = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pairwise covariate w_ij evaluated on the covariates of a susceptible
/// individual and an infectious one.
pub type PairCovariate =
    Arc<dyn Fn(&BTreeMap<String, f64>, &BTreeMap<String, f64>) -> f64 + Send + Sync>;

/// Break points closer than this merge into one block boundary.
const BREAK_MERGE_TOL: f64 = 1e-9;

/// One member of the fixed population.
#[derive(Debug, Clone)]
pub struct Individual {
    pub id: String,
    /// Location in meters, fixed over the observation period.
    pub coord: [f64; 2],
    /// Infection time; values at or before `t0` mean initially infectious.
    pub t_inf: Option<f64>,
    /// Removal time; `None` with `t_inf` set means infectious to the end.
    pub t_rem: Option<f64>,
    pub covariates: BTreeMap<String, f64>,
}

/// Block-structured SIR counting-process data with precomputed epidemic terms.
///
/// Rows are implicit: one per (block, individual) pair, with columns split
/// into the at-risk indicator, the infection/removal event markers, and the
/// epidemic/endemic covariate grids.
#[derive(Clone)]
pub struct EventHistory {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// Consecutive intervals (start, stop].
    pub blocks: Vec<(f64, f64)>,
    /// block x individual at-risk indicator Y_i(t).
    pub at_risk: Array2<u8>,
    /// Individual infected at the stop time of each block, if any.
    pub infection_event: Vec<Option<usize>>,
    /// Individual removed at the stop time of each block, if any.
    pub removal_event: Vec<Option<usize>>,
    pub epi_term_names: Vec<String>,
    /// One block x individual grid per epidemic term.
    pub epi_terms: Vec<Array2<f64>>,
    pub endemic_cov_names: Vec<String>,
    /// individual x covariate values (time constant).
    pub endemic_covs: Array2<f64>,
    pub t0: f64,
    pub t_end: f64,
    // generative definitions, retained for rebuilds and simulation
    pub t_inf: Vec<Option<f64>>,
    pub t_rem: Vec<Option<f64>>,
    pub(crate) basis: Vec<(String, DistanceBasis)>,
    pub(crate) pair_covs: Vec<(String, PairCovariate)>,
    pub(crate) covariates: Vec<BTreeMap<String, f64>>,
}

impl std::fmt::Debug for EventHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventHistory")
            .field("individuals", &self.ids.len())
            .field("blocks", &self.blocks.len())
            .field("epi_terms", &self.epi_term_names)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .finish()
    }
}

impl EventHistory {
    pub fn n_individuals(&self) -> usize {
        self.ids.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_infections(&self) -> usize {
        self.infection_event.iter().filter(|e| e.is_some()).count()
    }

    pub fn epi_term_index(&self, name: &str) -> Option<usize> {
        self.epi_term_names.iter().position(|n| n == name)
    }

    pub fn endemic_cov_index(&self, name: &str) -> Option<usize> {
        self.endemic_cov_names.iter().position(|n| n == name)
    }

    /// Number of generative epidemic-term definitions carried along
    /// (zero for histories loaded from tables).
    pub fn generative_basis_len(&self) -> usize {
        self.basis.len() + self.pair_covs.len()
    }

    /// Evaluate a named epidemic-term definition for one
    /// (susceptible i, infectious j) pair at the given distance.
    pub fn eval_epi_basis(
        &self,
        name: &str,
        distance: f64,
        i: usize,
        j: usize,
    ) -> Result<f64> {
        if let Some((_, b)) = self.basis.iter().find(|(n, _)| n == name) {
            return Ok(b(distance));
        }
        if let Some((_, w)) = self.pair_covs.iter().find(|(n, _)| n == name) {
            return Ok(w(&self.covariates[i], &self.covariates[j]));
        }
        Err(Error::Model(format!(
            "no generative definition for epidemic term {name}"
        )))
    }

    /// Rebuild with different distance bases (pair covariates are kept).
    pub fn rebuild_with_basis(
        &self,
        basis: Vec<(String, DistanceBasis)>,
    ) -> Result<EventHistory> {
        let individuals = self.individuals();
        build_event_history(
            individuals,
            self.t0,
            basis,
            self.pair_covs.clone(),
            &self.endemic_cov_names,
            Some(self.t_end),
        )
    }

    /// Rebuild with new infection/removal times (simulation output).
    pub fn rebuild_from_times(
        &self,
        t_inf: Vec<Option<f64>>,
        t_rem: Vec<Option<f64>>,
        t_end: f64,
    ) -> Result<EventHistory> {
        let mut individuals = self.individuals();
        for (k, ind) in individuals.iter_mut().enumerate() {
            ind.t_inf = t_inf[k];
            ind.t_rem = t_rem[k];
        }
        build_event_history(
            individuals,
            self.t0,
            self.basis.clone(),
            self.pair_covs.clone(),
            &self.endemic_cov_names,
            Some(t_end),
        )
    }

    fn individuals(&self) -> Vec<Individual> {
        (0..self.ids.len())
            .map(|k| Individual {
                id: self.ids[k].clone(),
                coord: self.coords[k],
                t_inf: self.t_inf[k],
                t_rem: self.t_rem[k],
                covariates: self.covariates[k].clone(),
            })
            .collect()
    }
}

/// Build the block-structured event history from per-individual infection and
/// removal times.
///
/// Blocks break exactly at every infection/removal time inside the window;
/// break points closer than 1e-9 days merge. `t_end` defaults to the last
/// event time. Individuals with `t_inf <= t0 < t_rem` enter as initially
/// infectious (the index case) and are never at risk.
pub fn build_event_history(
    individuals: Vec<Individual>,
    t0: f64,
    basis: Vec<(String, DistanceBasis)>,
    pair_covs: Vec<(String, PairCovariate)>,
    keep_cols: &[String],
    t_end: Option<f64>,
) -> Result<EventHistory> {
    if individuals.is_empty() {
        return Err(Error::Invalid("no individuals".into()));
    }
    if !t0.is_finite() {
        return Err(Error::Invalid("t0 must be finite".into()));
    }
    let n = individuals.len();
    for ind in &individuals {
        match (ind.t_inf, ind.t_rem) {
            (Some(ti), Some(tr)) => {
                if !ti.is_finite() || !tr.is_finite() {
                    return Err(Error::Invalid(format!(
                        "individual {} has non-finite event times",
                        ind.id
                    )));
                }
                if tr <= ti {
                    return Err(Error::Invalid(format!(
                        "individual {}: removal time {tr} is not after infection time {ti}",
                        ind.id
                    )));
                }
                if tr <= t0 {
                    return Err(Error::Invalid(format!(
                        "individual {}: removed at {tr}, before the start {t0}",
                        ind.id
                    )));
                }
            }
            (None, Some(_)) => {
                return Err(Error::Invalid(format!(
                    "individual {} has a removal time but no infection time",
                    ind.id
                )));
            }
            _ => {}
        }
    }

    // break points: every infection/removal inside (t0, t_end]
    let mut breaks: Vec<f64> = Vec::new();
    for ind in &individuals {
        for t in [ind.t_inf, ind.t_rem].into_iter().flatten() {
            if t > t0 {
                breaks.push(t);
            }
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < BREAK_MERGE_TOL);
    let t_last = match t_end {
        Some(te) => {
            // infections must fall inside the window; removals may be
            // censored beyond it (the individual stays infectious)
            for ind in &individuals {
                if let Some(ti) = ind.t_inf {
                    if ti > te + BREAK_MERGE_TOL {
                        return Err(Error::Invalid(format!(
                            "individual {} is infected at {ti}, after t_end {te}",
                            ind.id
                        )));
                    }
                }
            }
            te
        }
        None => *breaks.last().ok_or_else(|| {
            Error::Invalid("no events and no explicit t_end given".into())
        })?,
    };
    breaks.retain(|&b| b <= t_last + BREAK_MERGE_TOL);
    if breaks.last().map_or(true, |&b| t_last > b + BREAK_MERGE_TOL) {
        breaks.push(t_last);
    }
    let mut blocks = Vec::with_capacity(breaks.len());
    let mut prev = t0;
    for &b in &breaks {
        blocks.push((prev, b));
        prev = b;
    }

    let n_blocks = blocks.len();
    let tol = BREAK_MERGE_TOL;
    let coords: Vec<[f64; 2]> = individuals.iter().map(|i| i.coord).collect();
    // pairwise distances
    let mut dist = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = ((coords[i][0] - coords[j][0]).powi(2)
                + (coords[i][1] - coords[j][1]).powi(2))
            .sqrt();
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }

    let mut at_risk = Array2::<u8>::zeros((n_blocks, n));
    let mut infection_event: Vec<Option<usize>> = vec![None; n_blocks];
    let mut removal_event: Vec<Option<usize>> = vec![None; n_blocks];
    let n_terms = basis.len() + pair_covs.len();
    let mut epi_terms = vec![Array2::<f64>::zeros((n_blocks, n)); n_terms];

    for (b, &(start, stop)) in blocks.iter().enumerate() {
        // infectious set on the open interval (start, stop)
        let infectious: Vec<usize> = (0..n)
            .filter(|&j| {
                let ti = individuals[j].t_inf;
                let tr = individuals[j].t_rem;
                match ti {
                    Some(ti) => {
                        ti <= start + tol && tr.map_or(true, |tr| tr >= stop - tol)
                    }
                    None => false,
                }
            })
            .collect();
        for i in 0..n {
            let susceptible = match individuals[i].t_inf {
                Some(ti) => ti >= stop - tol,
                None => true,
            };
            if susceptible {
                at_risk[[b, i]] = 1;
            }
            for (m, (_, bm)) in basis.iter().enumerate() {
                let mut s = 0.0;
                for &j in &infectious {
                    if j != i {
                        s += bm(dist[[i, j]]);
                    }
                }
                epi_terms[m][[b, i]] = s;
            }
            for (k, (_, wk)) in pair_covs.iter().enumerate() {
                let mut s = 0.0;
                for &j in &infectious {
                    if j != i {
                        s += wk(&individuals[i].covariates, &individuals[j].covariates);
                    }
                }
                epi_terms[basis.len() + k][[b, i]] = s;
            }
        }
        // events at the stop time of this block
        for (idx, ind) in individuals.iter().enumerate() {
            if let Some(ti) = ind.t_inf {
                if (ti - stop).abs() < tol {
                    if infection_event[b].is_some() {
                        return Err(Error::Invalid(format!(
                            "tied infection times at t = {stop}; jitter the data first"
                        )));
                    }
                    infection_event[b] = Some(idx);
                }
            }
            if let Some(tr) = ind.t_rem {
                if (tr - stop).abs() < tol {
                    if removal_event[b].is_some() {
                        return Err(Error::Invalid(format!(
                            "tied removal times at t = {stop}; jitter the data first"
                        )));
                    }
                    removal_event[b] = Some(idx);
                }
            }
        }
    }

    let mut endemic_covs = Array2::<f64>::zeros((n, keep_cols.len()));
    for (i, ind) in individuals.iter().enumerate() {
        for (c, name) in keep_cols.iter().enumerate() {
            let v = ind.covariates.get(name).ok_or_else(|| {
                Error::Invalid(format!("individual {} misses covariate {name}", ind.id))
            })?;
            endemic_covs[[i, c]] = *v;
        }
    }

    let epi_term_names = basis
        .iter()
        .map(|(n, _)| n.clone())
        .chain(pair_covs.iter().map(|(n, _)| n.clone()))
        .collect();

    Ok(EventHistory {
        ids: individuals.iter().map(|i| i.id.clone()).collect(),
        coords,
        blocks,
        at_risk,
        infection_event,
        removal_event,
        epi_term_names,
        epi_terms,
        endemic_cov_names: keep_cols.to_vec(),
        endemic_covs,
        t0,
        t_end: t_last,
        t_inf: individuals.iter().map(|i| i.t_inf).collect(),
        t_rem: individuals.iter().map(|i| i.t_rem).collect(),
        basis,
        pair_covs,
        covariates: individuals.into_iter().map(|i| i.covariates).collect(),
    })
}

/// Household/non-household style indicator bases.
pub fn household_basis() -> Vec<(String, DistanceBasis)> {
    vec![
        ("household".into(), Arc::new(|u: f64| f64::from(u == 0.0))),
        ("nothousehold".into(), Arc::new(|u: f64| f64::from(u > 0.0))),
    ]
}

/// Indicator bases over (0, k1), [k1, k2), ..., [km, infinity).
pub fn step_distance_basis(knots: &[f64]) -> Result<Vec<(String, DistanceBasis)>> {
    if knots.is_empty() {
        return Err(Error::Invalid("need at least one knot".into()));
    }
    let mut prev = 0.0;
    for &k in knots {
        if k <= prev {
            return Err(Error::Invalid(
                "knots must be strictly increasing and positive".into(),
            ));
        }
        prev = k;
    }
    let mut out: Vec<(String, DistanceBasis)> = Vec::new();
    let first = knots[0];
    out.push((
        "B1".into(),
        Arc::new(move |u: f64| f64::from(u > 0.0 && u < first)),
    ));
    for m in 1..knots.len() {
        let (lo, hi) = (knots[m - 1], knots[m]);
        out.push((
            format!("B{}", m + 1),
            Arc::new(move |u: f64| f64::from(u >= lo && u < hi)),
        ));
    }
    let last = *knots.last().unwrap();
    out.push((
        format!("B{}", knots.len() + 1),
        Arc::new(move |u: f64| f64::from(u >= last)),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(
        id: &str,
        xy: [f64; 2],
        t_inf: Option<f64>,
        t_rem: Option<f64>,
        class: f64,
    ) -> Individual {
        Individual {
            id: id.into(),
            coord: xy,
            t_inf,
            t_rem,
            covariates: BTreeMap::from([("CL".to_string(), class)]),
        }
    }

    fn classmate_pair() -> Vec<(String, PairCovariate)> {
        vec![(
            "c1".into(),
            Arc::new(|a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>| {
                f64::from(a["CL"] == 1.0 && b["CL"] == 1.0)
            }),
        )]
    }

    #[test]
    fn single_individual_no_events() {
        let hist = build_event_history(
            vec![person("solo", [0.0, 0.0], None, None, 0.0)],
            0.0,
            household_basis(),
            vec![],
            &[],
            Some(1.0),
        )
        .unwrap();
        assert_eq!(hist.n_blocks(), 1);
        assert_eq!(hist.blocks[0], (0.0, 1.0));
        assert_eq!(hist.at_risk[[0, 0]], 1);
        for term in &hist.epi_terms {
            assert_eq!(term[[0, 0]], 0.0);
        }
    }

    #[test]
    fn blocks_break_at_every_event() {
        // index case infectious from before t0; two later infections
        let inds = vec![
            person("idx", [0.0, 0.0], Some(-0.5), Some(8.0), 1.0),
            person("a", [0.0, 0.0], Some(2.0), Some(9.0), 1.0), // same household
            person("b", [10.0, 0.0], Some(5.0), Some(12.0), 2.0),
            person("c", [20.0, 5.0], None, None, 1.0),
        ];
        let hist = build_event_history(
            inds,
            0.0,
            household_basis(),
            classmate_pair(),
            &["CL".to_string()],
            None,
        )
        .unwrap();
        // breaks at 2, 5, 8, 9, 12 -> 5 blocks; union is (0, 12]
        assert_eq!(hist.n_blocks(), 5);
        assert_eq!(hist.blocks.first().unwrap().0, 0.0);
        assert_eq!(hist.blocks.last().unwrap().1, 12.0);
        for w in hist.blocks.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert_eq!(hist.n_infections(), 2);

        // block 0 = (0, 2]: index case infectious; "a" shares the household
        let hh = hist.epi_term_index("household").unwrap();
        let nh = hist.epi_term_index("nothousehold").unwrap();
        assert_eq!(hist.epi_terms[hh][[0, 1]], 1.0);
        assert_eq!(hist.epi_terms[nh][[0, 2]], 1.0);
        // index case is never at risk
        for b in 0..hist.n_blocks() {
            assert_eq!(hist.at_risk[[b, 0]], 0);
        }
        // classmate count: in block 1 = (2, 5], infectious = {idx, a}, both class 1
        let c1 = hist.epi_term_index("c1").unwrap();
        assert_eq!(hist.epi_terms[c1][[1, 3]], 2.0);
        // after infection, "a" stops being at risk
        assert_eq!(hist.at_risk[[0, 1]], 1);
        assert_eq!(hist.at_risk[[1, 1]], 0);
    }

    #[test]
    fn removal_before_infection_rejected() {
        let inds = vec![person("bad", [0.0, 0.0], Some(5.0), Some(4.0), 0.0)];
        assert!(build_event_history(inds, 0.0, vec![], vec![], &[], None).is_err());
    }

    #[test]
    fn household_term_counts_single_infectious_housemate() {
        let inds = vec![
            person("kid", [3.0, 4.0], None, None, 1.0),
            person("sib", [3.0, 4.0], Some(1.0), Some(6.0), 1.0),
        ];
        let hist =
            build_event_history(inds, 0.0, household_basis(), vec![], &[], Some(10.0)).unwrap();
        let hh = hist.epi_term_index("household").unwrap();
        // block (1, 6]: exactly one currently infectious housemate
        let b = hist
            .blocks
            .iter()
            .position(|&(s, e)| s == 1.0 && e == 6.0)
            .unwrap();
        assert_eq!(hist.epi_terms[hh][[b, 0]], 1.0);
    }

    #[test]
    fn step_basis_partitions_positive_distances() {
        let basis = step_distance_basis(&[100.0, 200.0]).unwrap();
        assert_eq!(basis.len(), 3);
        for d in [1.0, 99.0, 100.0, 150.0, 200.0, 1e6] {
            let total: f64 = basis.iter().map(|(_, b)| b(d)).sum();
            assert_eq!(total, 1.0, "distance {d}");
        }
        // distance zero belongs to no bin
        let total0: f64 = basis.iter().map(|(_, b)| b(0.0)).sum();
        assert_eq!(total0, 0.0);
        assert!(step_distance_basis(&[200.0, 100.0]).is_err());
    }

    #[test]
    fn rebuild_with_step_basis_keeps_pair_covariates() {
        let inds = vec![
            person("idx", [0.0, 0.0], Some(-0.5), Some(8.0), 1.0),
            person("a", [50.0, 0.0], Some(2.0), Some(9.0), 1.0),
            person("b", [150.0, 0.0], None, None, 2.0),
        ];
        let hist = build_event_history(
            inds,
            0.0,
            household_basis(),
            classmate_pair(),
            &["CL".to_string()],
            None,
        )
        .unwrap();
        let rebuilt = hist
            .rebuild_with_basis(step_distance_basis(&[100.0]).unwrap())
            .unwrap();
        assert_eq!(
            rebuilt.epi_term_names,
            vec!["B1".to_string(), "B2".to_string(), "c1".to_string()]
        );
        assert_eq!(rebuilt.n_blocks(), hist.n_blocks());
        // b is 150m from idx -> falls in B2 during block 0
        let b2 = rebuilt.epi_term_index("B2").unwrap();
        assert_eq!(rebuilt.epi_terms[b2][[0, 2]], 1.0);
    }
}
