use ndarray::Array2;
use rayon::prelude::*;

use crate::data::PointPattern;
use crate::error::{Error, Result};
use crate::geometry::point_in_polygon;

use super::TwinstimSpec;

/// Precompiled likelihood machinery: resolved designs, event-pair lists, and
/// the parameter layout [h..., e..., siaf..., tiaf...].
pub(crate) struct Compiled<'a> {
    pub spec: &'a TwinstimSpec,
    pub pattern: &'a PointPattern,
    pub names: Vec<String>,
    pub h_at: usize,
    pub e_at: usize,
    pub siaf_at: usize,
    pub tiaf_at: usize,
    pub n_params: usize,
    /// Endemic covariate grids (block x tile), resolved from stgrid.
    pub endemic_grids: Vec<Array2<f64>>,
    /// Multiplicative endemic offset per cell.
    pub rho: Array2<f64>,
    /// area * duration per cell.
    pub exposure: Array2<f64>,
    /// Epidemic design matrix (events x covariates, no intercept column).
    pub epi_design: Array2<f64>,
    /// Number of types each event can transmit to.
    pub multiplicity: Vec<f64>,
    /// For each event i: interacting sources (j, distance, time lag).
    pub pairs: Vec<Vec<(usize, f64, f64)>>,
    /// Upper integration limit min(T - t_j, eps_t_j) per event.
    pub g_limits: Vec<f64>,
}

impl<'a> Compiled<'a> {
    pub fn new(spec: &'a TwinstimSpec, pattern: &'a PointPattern) -> Result<Compiled<'a>> {
        spec.validate()?;
        let grid = &pattern.stgrid;
        let names = spec.coef_names();
        let h_at = 0;
        let e_at = spec.endemic.n_coefs();
        let mut siaf_at = e_at;
        let mut tiaf_at = e_at;
        if let Some(e) = &spec.epidemic {
            siaf_at = e_at + usize::from(e.intercept) + e.covariates.len();
            tiaf_at = siaf_at + spec.siaf.n_params();
        }
        let n_params = names.len();

        let mut endemic_grids = Vec::new();
        for name in &spec.endemic.covariates {
            let g = grid
                .covariate(name)
                .ok_or_else(|| Error::Model(format!("stgrid has no covariate {name}")))?;
            endemic_grids.push(g.clone());
        }
        let rho = match &spec.endemic.offset {
            Some(name) => {
                let g = grid.covariate(name).ok_or_else(|| {
                    Error::Model(format!("stgrid has no offset column {name}"))
                })?;
                for ((b, t), v) in g.indexed_iter() {
                    if !(*v > 0.0) {
                        return Err(Error::Model(format!(
                            "endemic offset {name} must be positive; cell (block {b}, tile {}) is {v}",
                            grid.tile_ids[t]
                        )));
                    }
                }
                g.clone()
            }
            None => Array2::ones((grid.n_blocks(), grid.n_tiles())),
        };
        let mut exposure = Array2::zeros((grid.n_blocks(), grid.n_tiles()));
        for b in 0..grid.n_blocks() {
            let dur = grid.block_bounds[b].1 - grid.block_bounds[b].0;
            for t in 0..grid.n_tiles() {
                exposure[[b, t]] = grid.area[[b, t]] * dur;
            }
        }

        let n = pattern.n_events();
        let p_e = spec.epidemic.as_ref().map_or(0, |e| e.covariates.len());
        let mut epi_design = Array2::<f64>::zeros((n, p_e));
        if let Some(e) = &spec.epidemic {
            for (c, name) in e.covariates.iter().enumerate() {
                if let Some(mark_idx) = pattern.mark_names.iter().position(|m| m == name) {
                    for (i, ev) in pattern.events.iter().enumerate() {
                        epi_design[[i, c]] = ev.marks[mark_idx];
                    }
                } else if let Some(g) = grid.covariate(name) {
                    for (i, ev) in pattern.events.iter().enumerate() {
                        epi_design[[i, c]] = g[[ev.block_idx, ev.tile_idx]];
                    }
                } else {
                    return Err(Error::Model(format!(
                        "epidemic covariate {name} is neither an event mark nor an stgrid column"
                    )));
                }
            }
        }

        let k_types = pattern.n_types();
        let multiplicity: Vec<f64> = pattern
            .events
            .iter()
            .map(|ev| {
                (0..k_types)
                    .filter(|&k| pattern.qmatrix[[ev.type_idx, k]])
                    .count() as f64
            })
            .collect();

        let mut pairs = vec![Vec::new(); n];
        for i in 0..n {
            let ei = &pattern.events[i];
            for j in 0..i {
                let ej = &pattern.events[j];
                if !(ej.time < ei.time) {
                    continue;
                }
                let dt = ei.time - ej.time;
                if dt > ej.eps_t {
                    continue;
                }
                if !pattern.qmatrix[[ej.type_idx, ei.type_idx]] {
                    continue;
                }
                let d = ((ei.loc[0] - ej.loc[0]).powi(2) + (ei.loc[1] - ej.loc[1]).powi(2))
                    .sqrt();
                if d > ej.eps_s {
                    continue;
                }
                pairs[i].push((j, d, dt));
            }
        }
        let g_limits: Vec<f64> = pattern
            .events
            .iter()
            .map(|ev| (pattern.t_end - ev.time).min(ev.eps_t))
            .collect();

        Ok(Compiled {
            spec,
            pattern,
            names,
            h_at,
            e_at,
            siaf_at,
            tiaf_at,
            n_params,
            endemic_grids,
            rho,
            exposure,
            epi_design,
            multiplicity,
            pairs,
            g_limits,
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

    /// nu(cell) = exp(h^T x_cell) (without the rho offset).
    pub fn nu(&self, coefs: &[f64], block: usize, tile: usize) -> f64 {
        let mut lin = 0.0;
        let mut k = self.h_at;
        if self.spec.endemic.intercept {
            lin += coefs[k];
            k += 1;
        }
        for g in &self.endemic_grids {
            lin += coefs[k] * g[[block, tile]];
            k += 1;
        }
        lin.exp()
    }

    /// Epidemic predictor eta_j = exp(e^T x_j).
    pub fn eta(&self, coefs: &[f64], j: usize) -> f64 {
        match &self.spec.epidemic {
            None => 0.0,
            Some(e) => {
                let mut lin = 0.0;
                let mut k = self.e_at;
                if e.intercept {
                    lin += coefs[k];
                    k += 1;
                }
                for c in 0..e.covariates.len() {
                    lin += coefs[k] * self.epi_design[[j, c]];
                    k += 1;
                }
                lin.exp()
            }
        }
    }

    pub fn siaf_params<'b>(&self, coefs: &'b [f64]) -> &'b [f64] {
        &coefs[self.siaf_at..self.tiaf_at]
    }

    pub fn tiaf_params<'b>(&self, coefs: &'b [f64]) -> &'b [f64] {
        &coefs[self.tiaf_at..self.n_params]
    }

    /// Spatial integrals F_j over the influence regions, and the integrals of
    /// the kernel-parameter derivatives, at the given tolerance.
    pub fn spatial_integrals(
        &self,
        coefs: &[f64],
        tol: f64,
        with_derivs: bool,
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        if self.spec.epidemic.is_none() {
            return (vec![], vec![]);
        }
        let sp = self.siaf_params(coefs);
        let n_sp = self.spec.siaf.n_params();
        let results: Vec<(f64, Vec<f64>)> = (0..self.pattern.n_events())
            .into_par_iter()
            .map(|j| {
                let region = &self.pattern.influence[j];
                let f = self.spec.siaf.integral_over(region, sp, tol);
                let d = if with_derivs {
                    (0..n_sp)
                        .map(|k| self.spec.siaf.integral_deriv_over(region, sp, tol, k))
                        .collect()
                } else {
                    vec![]
                };
                (f, d)
            })
            .collect();
        let mut f_vals = Vec::with_capacity(results.len());
        let mut d_vals = Vec::with_capacity(results.len());
        for (f, d) in results {
            f_vals.push(f);
            d_vals.push(d);
        }
        (f_vals, d_vals)
    }

    /// Log-likelihood and gradient. `tol` controls the spatial cubature.
    pub fn loglik_grad(
        &self,
        coefs: &[f64],
        tol: f64,
        strict: bool,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_len(coefs)?;
        let grid = &self.pattern.stgrid;
        let k_types = self.pattern.n_types() as f64;
        let mut ll = 0.0;
        let mut grad = vec![0.0; self.n_params];

        // ---- endemic integral: exact cell sums, for every type ----
        for b in 0..grid.n_blocks() {
            for t in 0..grid.n_tiles() {
                let nu = self.nu(coefs, b, t);
                let term = k_types * self.rho[[b, t]] * nu * self.exposure[[b, t]];
                if !term.is_finite() {
                    if strict {
                        return Err(Error::Numeric("non-finite endemic integral".into()));
                    }
                    return Ok((f64::NEG_INFINITY, grad));
                }
                ll -= term;
                let mut k = self.h_at;
                if self.spec.endemic.intercept {
                    grad[k] -= term;
                    k += 1;
                }
                for g in &self.endemic_grids {
                    grad[k] -= term * g[[b, t]];
                    k += 1;
                }
            }
        }

        let has_epi = self.spec.epidemic.is_some();
        let sp = self.siaf_params(coefs);
        let tp = self.tiaf_params(coefs);
        let n_sp = self.spec.siaf.n_params();
        let n_tp = self.spec.tiaf.n_params();
        let etas: Vec<f64> = (0..self.pattern.n_events())
            .map(|j| if has_epi { self.eta(coefs, j) } else { 0.0 })
            .collect();
        if etas.iter().any(|e| !e.is_finite()) {
            if strict {
                return Err(Error::Numeric("non-finite epidemic predictor".into()));
            }
            return Ok((f64::NEG_INFINITY, grad));
        }

        // ---- epidemic integral: sum_j M_j eta_j G_j F_j ----
        if has_epi {
            let (f_ints, f_derivs) = self.spatial_integrals(coefs, tol, true);
            let e = self.spec.epidemic.as_ref().unwrap();
            for j in 0..self.pattern.n_events() {
                let g_j = self.spec.tiaf.integral(self.g_limits[j], tp);
                let term = self.multiplicity[j] * etas[j] * g_j * f_ints[j];
                ll -= term;
                // epidemic predictor coefficients
                let mut k = self.e_at;
                if e.intercept {
                    grad[k] -= term;
                    k += 1;
                }
                for c in 0..e.covariates.len() {
                    grad[k] -= term * self.epi_design[[j, c]];
                    k += 1;
                }
                // kernel parameters
                for kk in 0..n_sp {
                    grad[self.siaf_at + kk] -=
                        self.multiplicity[j] * etas[j] * g_j * f_derivs[j][kk];
                }
                for kk in 0..n_tp {
                    let dg = self.spec.tiaf.integral_deriv(self.g_limits[j], tp, kk);
                    grad[self.tiaf_at + kk] -=
                        self.multiplicity[j] * etas[j] * dg * f_ints[j];
                }
            }
        }

        // ---- event log-intensities ----
        for (i, ev) in self.pattern.events.iter().enumerate() {
            let lambda_end = self.rho[[ev.block_idx, ev.tile_idx]]
                * self.nu(coefs, ev.block_idx, ev.tile_idx);
            let mut lambda_epi = 0.0;
            for &(j, d, dt) in &self.pairs[i] {
                lambda_epi += etas[j] * self.spec.siaf.eval(d, sp) * self.spec.tiaf.eval(dt, tp);
            }
            let lambda = lambda_end + lambda_epi;
            if !(lambda > 0.0) || !lambda.is_finite() {
                if strict {
                    return Err(Error::Model(format!(
                        "event {i} at t = {:.4} has intensity {lambda} at its own occurrence",
                        ev.time
                    )));
                }
                return Ok((f64::NEG_INFINITY, grad));
            }
            ll += lambda.ln();
            let inv = 1.0 / lambda;
            // endemic coefficients
            let mut k = self.h_at;
            if self.spec.endemic.intercept {
                grad[k] += inv * lambda_end;
                k += 1;
            }
            for g in &self.endemic_grids {
                grad[k] += inv * lambda_end * g[[ev.block_idx, ev.tile_idx]];
                k += 1;
            }
            if let Some(e) = &self.spec.epidemic {
                // epidemic coefficients: sum over sources of eta_j x_j f g
                let mut acc_int = 0.0;
                let mut acc_cov = vec![0.0; e.covariates.len()];
                let mut acc_sp = vec![0.0; n_sp];
                let mut acc_tp = vec![0.0; n_tp];
                for &(j, d, dt) in &self.pairs[i] {
                    let fv = self.spec.siaf.eval(d, sp);
                    let gv = self.spec.tiaf.eval(dt, tp);
                    let w = etas[j] * fv * gv;
                    acc_int += w;
                    for (c, acc) in acc_cov.iter_mut().enumerate() {
                        *acc += w * self.epi_design[[j, c]];
                    }
                    for (kk, acc) in acc_sp.iter_mut().enumerate() {
                        *acc += etas[j] * self.spec.siaf.deriv(d, sp, kk) * gv;
                    }
                    for (kk, acc) in acc_tp.iter_mut().enumerate() {
                        *acc += etas[j] * fv * self.spec.tiaf.deriv(dt, tp, kk);
                    }
                }
                let mut k = self.e_at;
                if e.intercept {
                    grad[k] += inv * acc_int;
                    k += 1;
                }
                for acc in &acc_cov {
                    grad[k] += inv * acc;
                    k += 1;
                }
                for (kk, acc) in acc_sp.iter().enumerate() {
                    grad[self.siaf_at + kk] += inv * acc;
                }
                for (kk, acc) in acc_tp.iter().enumerate() {
                    grad[self.tiaf_at + kk] += inv * acc;
                }
            }
        }
        Ok((ll, grad))
    }
}

/// Conditional intensity lambda(s, t, k) given the observed history.
///
/// The endemic cell is resolved from `tile` when given; otherwise the tile
/// is taken from a coinciding event location (tile geometry is not part of
/// the pattern).
pub fn cif_twinstim(
    spec: &TwinstimSpec,
    pattern: &PointPattern,
    coefs: &[f64],
    s: [f64; 2],
    t: f64,
    event_type: usize,
    tile: Option<&str>,
) -> Result<f64> {
    let c = Compiled::new(spec, pattern)?;
    c.check_len(coefs)?;
    if !point_in_polygon(&pattern.w, s) {
        return Err(Error::Invalid(format!(
            "location ({}, {}) lies outside the observation window",
            s[0], s[1]
        )));
    }
    if event_type >= pattern.n_types() {
        return Err(Error::Invalid(format!(
            "type index {event_type} out of range"
        )));
    }
    let block = pattern
        .stgrid
        .block_of(t)
        .ok_or_else(|| Error::Invalid(format!("time {t} outside the observation period")))?;
    let tile = match tile {
        Some(name) => pattern
            .stgrid
            .tile_index(name)
            .ok_or_else(|| Error::Invalid(format!("unknown tile \"{name}\"")))?,
        None => {
            if pattern.stgrid.n_tiles() == 1 {
                0
            } else if let Some(ev) = pattern
                .events
                .iter()
                .find(|e| (e.loc[0] - s[0]).abs() < 1e-9 && (e.loc[1] - s[1]).abs() < 1e-9)
            {
                ev.tile_idx
            } else {
                return Err(Error::Invalid(
                    "cannot resolve the endemic cell: pass the tile name for locations \
                     away from observed events"
                        .into(),
                ));
            }
        }
    };
    let lambda_end = c.rho[[block, tile]] * c.nu(coefs, block, tile);
    let sp = c.siaf_params(coefs);
    let tp = c.tiaf_params(coefs);
    let mut lambda_epi = 0.0;
    if spec.epidemic.is_some() {
        for (j, ev) in pattern.events.iter().enumerate() {
            if !(ev.time < t) {
                continue;
            }
            let dt = t - ev.time;
            if dt > ev.eps_t {
                continue;
            }
            if !pattern.qmatrix[[ev.type_idx, event_type]] {
                continue;
            }
            let d = ((s[0] - ev.loc[0]).powi(2) + (s[1] - ev.loc[1]).powi(2)).sqrt();
            if d > ev.eps_s {
                continue;
            }
            lambda_epi += c.eta(coefs, j) * spec.siaf.eval(d, sp) * spec.tiaf.eval(dt, tp);
        }
    }
    Ok(lambda_end + lambda_epi)
}

/// Log-likelihood and analytic gradient (spatial cubature tolerance 1e-7).
pub fn loglik_twinstim(
    spec: &TwinstimSpec,
    pattern: &PointPattern,
    coefs: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let c = Compiled::new(spec, pattern)?;
    c.loglik_grad(coefs, 1e-7, true)
}

impl super::EndemicSpec {
    pub fn n_coefs(&self) -> usize {
        usize::from(self.intercept) + self.covariates.len()
    }
}
