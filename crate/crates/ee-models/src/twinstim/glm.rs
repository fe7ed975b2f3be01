//! Endemic-only models are equivalent to a Poisson regression on the
//! aggregated cell counts; this module provides that independent route and
//! the coefficient comparison.

use ndarray::{Array1, Array2};

use crate::data::PointPattern;
use crate::error::{Error, Result};
use crate::optim;

use super::lik::Compiled;
use super::TwinstimSpec;

/// Result of an iteratively reweighted least squares Poisson fit.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// True when some coefficient diverged (all-zero counts and the like).
    pub diverged: bool,
}

/// Poisson GLM with log link and offset, by IRLS.
pub fn poisson_glm_irls(
    design: &Array2<f64>,
    y: &[f64],
    log_offset: &[f64],
) -> Result<GlmFit> {
    let (n, p) = design.dim();
    if y.len() != n || log_offset.len() != n {
        return Err(Error::Dimension("GLM inputs disagree in length".into()));
    }
    let mut beta = vec![0.0; p];
    let mut converged = false;
    let mut diverged = false;
    let mut iter = 0;
    while iter < 100 {
        iter += 1;
        // working response and weights
        let mut xtwx = Array2::<f64>::zeros((p, p));
        let mut xtwz = vec![0.0; p];
        for r in 0..n {
            let lin: f64 = (0..p).map(|c| design[[r, c]] * beta[c]).sum::<f64>()
                + log_offset[r];
            let mu = lin.exp();
            if !mu.is_finite() {
                diverged = true;
                break;
            }
            let w = mu;
            let z = lin - log_offset[r] + (y[r] - mu) / mu.max(1e-300);
            for a in 0..p {
                for b in 0..p {
                    xtwx[[a, b]] += w * design[[r, a]] * design[[r, b]];
                }
                xtwz[a] += w * design[[r, a]] * z;
            }
        }
        if diverged {
            break;
        }
        let new_beta = optim::solve(&xtwx, &xtwz)?;
        let delta: f64 = new_beta
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = new_beta;
        if delta < 1e-10 {
            converged = true;
            break;
        }
        if beta.iter().any(|b| b.abs() > 1e3) {
            diverged = true;
            break;
        }
    }
    Ok(GlmFit {
        coefficients: beta,
        converged,
        iterations: iter,
        // IRLS converges quadratically when the MLE exists; hitting the
        // iteration cap means the likelihood has no interior maximum
        diverged: diverged || !converged,
    })
}

#[derive(Debug, Clone)]
pub struct GlmComparison {
    pub names: Vec<String>,
    pub glm_coefficients: Vec<f64>,
    pub twinstim_coefficients: Vec<f64>,
    pub max_abs_diff: f64,
    /// Set when the aggregated counts cannot identify the model
    /// (e.g., no events at all).
    pub non_identifiable: bool,
}

/// Fit the aggregated-count Poisson regression
/// `Y_cell ~ Po(area * duration * rho * nu)` and compare with the direct
/// point-process fit of the same endemic-only specification.
pub fn glm_equivalence(spec: &TwinstimSpec, pattern: &PointPattern) -> Result<GlmComparison> {
    if spec.epidemic.is_some() {
        return Err(Error::Model(
            "the Poisson-regression equivalence only holds for endemic-only models".into(),
        ));
    }
    let compiled = Compiled::new(spec, pattern)?;
    let grid = &pattern.stgrid;
    let n_types = pattern.n_types();
    let n_cells = grid.n_blocks() * grid.n_tiles() * n_types;
    let p = spec.endemic.n_coefs();
    if p == 0 {
        return Err(Error::Model("endemic design has no coefficients".into()));
    }

    // aggregate counts per (block, tile, type)
    let mut y = vec![0.0; n_cells];
    for ev in &pattern.events {
        let idx = (ev.block_idx * grid.n_tiles() + ev.tile_idx) * n_types + ev.type_idx;
        y[idx] += 1.0;
    }
    let mut design = Array2::<f64>::zeros((n_cells, p));
    let mut log_offset = vec![0.0; n_cells];
    let mut row = 0;
    for b in 0..grid.n_blocks() {
        for t in 0..grid.n_tiles() {
            for _k in 0..n_types {
                let mut c = 0;
                if spec.endemic.intercept {
                    design[[row, c]] = 1.0;
                    c += 1;
                }
                for g in &compiled.endemic_grids {
                    design[[row, c]] = g[[b, t]];
                    c += 1;
                }
                log_offset[row] = (compiled.exposure[[b, t]] * compiled.rho[[b, t]]).ln();
                row += 1;
            }
        }
    }

    let glm = poisson_glm_irls(&design, &y, &log_offset)?;
    let ts_fit = super::fit::fit_twinstim(spec, pattern, None)?;
    let non_identifiable =
        glm.diverged || !ts_fit.converged || pattern.n_events() == 0;
    let max_abs_diff = glm
        .coefficients
        .iter()
        .zip(&ts_fit.coefficients)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(GlmComparison {
        names: compiled.names.clone(),
        glm_coefficients: glm.coefficients,
        twinstim_coefficients: ts_fit.coefficients,
        max_abs_diff,
        non_identifiable,
    })
}

#[allow(dead_code)]
fn as_array(v: &[f64]) -> Array1<f64> {
    Array1::from(v.to_vec())
}
