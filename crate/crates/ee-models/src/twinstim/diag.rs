//! Reproduction numbers and intensity aggregation for fitted point-process
//! models.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::data::PointPattern;
use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, PolygonSet};

use super::fit::TwinstimFit;
use super::lik::Compiled;

/// Expected number of secondary infections triggered by each event within
/// its observed interaction range:
/// `mu_j = eta_j * int_0^{min(T-t_j, eps_t_j)} g * int_{R_j} f`.
pub fn r0_events(fit: &TwinstimFit) -> Result<Vec<f64>> {
    if fit.spec.epidemic.is_none() {
        return Err(Error::Model(
            "reproduction numbers need an epidemic component".into(),
        ));
    }
    Ok((0..fit.eta.len())
        .map(|j| fit.eta[j] * fit.tiaf_integrals[j] * fit.siaf_integrals[j])
        .collect())
}

/// Mean reproduction number per event type.
pub fn r0_type_means(fit: &TwinstimFit, pattern: &PointPattern) -> Result<Vec<(String, f64)>> {
    let mu = r0_events(fit)?;
    let mut sums = vec![0.0; pattern.n_types()];
    let mut counts = vec![0usize; pattern.n_types()];
    for (j, ev) in pattern.events.iter().enumerate() {
        sums[ev.type_idx] += mu[j];
        counts[ev.type_idx] += 1;
    }
    Ok(pattern
        .types
        .iter()
        .enumerate()
        .map(|(k, name)| {
            (
                name.clone(),
                if counts[k] > 0 {
                    sums[k] / counts[k] as f64
                } else {
                    f64::NAN
                },
            )
        })
        .collect())
}

/// Ground intensity aggregated over space and all types, on a time grid.
#[derive(Debug, Clone)]
pub struct IntensityCurve {
    pub times: Vec<f64>,
    pub total: Vec<f64>,
    pub endemic: Vec<f64>,
}

impl IntensityCurve {
    /// Trapezoidal integral of the total curve.
    pub fn integral_total(&self) -> f64 {
        let mut s = 0.0;
        for w in 0..self.times.len().saturating_sub(1) {
            let dt = self.times[w + 1] - self.times[w];
            s += 0.5 * (self.total[w] + self.total[w + 1]) * dt;
        }
        s
    }
}

/// lambda_g(t) = sum_k int_W lambda(s, t, k) ds on `resolution` grid points.
///
/// The endemic part is the exact cell sum; the epidemic part reuses the
/// cached spatial integrals.
pub fn intensity_aggregate(
    fit: &TwinstimFit,
    pattern: &PointPattern,
    resolution: usize,
) -> Result<IntensityCurve> {
    if resolution < 2 {
        return Err(Error::Invalid("time resolution must be at least 2".into()));
    }
    let compiled = Compiled::new(&fit.spec, pattern)?;
    let grid = &pattern.stgrid;
    let k_types = pattern.n_types() as f64;
    // endemic ground intensity per block (piecewise constant)
    let mut endemic_block = vec![0.0; grid.n_blocks()];
    for b in 0..grid.n_blocks() {
        let mut s = 0.0;
        for t in 0..grid.n_tiles() {
            s += compiled.rho[[b, t]]
                * compiled.nu(&fit.coefficients, b, t)
                * grid.area[[b, t]];
        }
        endemic_block[b] = k_types * s;
    }
    let tp = compiled.tiaf_params(&fit.coefficients);
    let mut times = Vec::with_capacity(resolution);
    let mut total = Vec::with_capacity(resolution);
    let mut endemic = Vec::with_capacity(resolution);
    for r in 0..resolution {
        let t = pattern.t0
            + (pattern.t_end - pattern.t0) * (r as f64 + 0.5) / resolution as f64;
        let b = grid.block_of(t).expect("t inside the observation period");
        let mut lam = endemic_block[b];
        let e_part = lam;
        if fit.spec.epidemic.is_some() {
            for (j, ev) in pattern.events.iter().enumerate() {
                let dt = t - ev.time;
                if dt > 0.0 && dt <= ev.eps_t {
                    lam += fit.multiplicity[j]
                        * fit.eta[j]
                        * fit.siaf_integrals[j]
                        * fit.spec.tiaf.eval(dt, tp);
                }
            }
        }
        times.push(t);
        endemic.push(e_part);
        total.push(lam);
    }
    Ok(IntensityCurve {
        times,
        total,
        endemic,
    })
}

/// Accumulated epidemic proportion per spatial pixel.
#[derive(Debug, Clone)]
pub struct IntensitySurface {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major (y, x); NaN outside the observation window.
    pub proportion: Array2<f64>,
}

/// Accumulated epidemic proportion over a `resolution x resolution` pixel
/// grid; `tiles` supplies the endemic cell geometry.
pub fn intensity_surface(
    fit: &TwinstimFit,
    pattern: &PointPattern,
    tiles: &BTreeMap<String, PolygonSet>,
    resolution: usize,
) -> Result<IntensitySurface> {
    if resolution < 2 {
        return Err(Error::Invalid("pixel resolution must be at least 2".into()));
    }
    let compiled = Compiled::new(&fit.spec, pattern)?;
    let grid = &pattern.stgrid;
    for tile in &grid.tile_ids {
        if !tiles.contains_key(tile) {
            return Err(Error::Invalid(format!("tiles map misses polygon for {tile}")));
        }
    }
    let bbox = pattern
        .w
        .bbox()
        .ok_or_else(|| Error::Geometry("empty observation window".into()))?;
    let sp = compiled.siaf_params(&fit.coefficients);
    let k_types = pattern.n_types() as f64;
    let xs: Vec<f64> = (0..resolution)
        .map(|i| bbox[0] + (bbox[2] - bbox[0]) * (i as f64 + 0.5) / resolution as f64)
        .collect();
    let ys: Vec<f64> = (0..resolution)
        .map(|i| bbox[1] + (bbox[3] - bbox[1]) * (i as f64 + 0.5) / resolution as f64)
        .collect();
    let mut proportion = Array2::<f64>::from_elem((resolution, resolution), f64::NAN);
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let s = [x, y];
            if !point_in_polygon(&pattern.w, s) {
                continue;
            }
            // locate the tile
            let tile_idx = grid
                .tile_ids
                .iter()
                .position(|tid| point_in_polygon(&tiles[tid], s));
            let Some(tile_idx) = tile_idx else {
                continue;
            };
            // accumulated endemic intensity over time at this pixel
            let mut endemic_acc = 0.0;
            for b in 0..grid.n_blocks() {
                let dur = grid.block_bounds[b].1 - grid.block_bounds[b].0;
                endemic_acc += k_types
                    * compiled.rho[[b, tile_idx]]
                    * compiled.nu(&fit.coefficients, b, tile_idx)
                    * dur;
            }
            // accumulated epidemic intensity
            let mut epi_acc = 0.0;
            if fit.spec.epidemic.is_some() {
                for (j, ev) in pattern.events.iter().enumerate() {
                    let d =
                        ((x - ev.loc[0]).powi(2) + (y - ev.loc[1]).powi(2)).sqrt();
                    if d <= ev.eps_s {
                        epi_acc += fit.multiplicity[j]
                            * fit.eta[j]
                            * fit.spec.siaf.eval(d, sp)
                            * fit.tiaf_integrals[j];
                    }
                }
            }
            proportion[[iy, ix]] = if endemic_acc + epi_acc > 0.0 {
                epi_acc / (endemic_acc + epi_acc)
            } else {
                0.0
            };
        }
    }
    Ok(IntensitySurface {
        xs,
        ys,
        proportion,
    })
}
