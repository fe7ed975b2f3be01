//! Spatial and temporal interaction kernels for the point-process engines.
//!
//! Kernel shapes are static (knots, ranges); free parameters travel on the
//! log scale in the optimizer's vector and are passed to every evaluation.
//! Each spatial kernel exposes its radial antiderivative
//! `F(r) = int_0^r x f(x) dx` (and the antiderivatives of the parameter
//! derivatives), which drives both the boundary-route cubature and the
//! inverse-CDF location sampler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{adaptive_quadrature, cubature_green, polygon_disc_area, PolygonSet};

/// Spatial interaction function shape (parameters live elsewhere).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SpatialKernel {
    Constant,
    /// `f(x) = exp(-x^2 / (2 sigma^2))`, parameter `log(sigma)`.
    Gaussian,
    /// `f(x) = (x + sigma)^(-d)`, parameters `log(sigma)`, `log(d)`.
    #[serde(rename = "powerlaw")]
    PowerLaw,
    /// Piecewise constant: 1 on (0, k1), then `h_i` on [k_i, k_{i+1}),
    /// 0 beyond `max_range`. Parameters are `log(h_i)`, one per knot; the
    /// pre-knot height is fixed to 1 for identifiability.
    #[serde(rename_all = "camelCase")]
    Step { knots: Vec<f64>, max_range: f64 },
}

impl SpatialKernel {
    pub fn n_params(&self) -> usize {
        match self {
            SpatialKernel::Constant => 0,
            SpatialKernel::Gaussian => 1,
            SpatialKernel::PowerLaw => 2,
            SpatialKernel::Step { knots, .. } => knots.len(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        (1..=self.n_params()).map(|i| format!("siaf.{i}")).collect()
    }

    pub fn default_start(&self) -> Vec<f64> {
        match self {
            SpatialKernel::Constant => vec![],
            SpatialKernel::Gaussian => vec![2.0],
            SpatialKernel::PowerLaw => vec![1.0, 0.5],
            SpatialKernel::Step { knots, .. } => {
                (1..=knots.len()).map(|i| -(i as f64)).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SpatialKernel::Step { knots, max_range } = self {
            validate_knots(knots, *max_range)?;
        }
        Ok(())
    }

    /// Kernel value at distance `r >= 0`.
    pub fn eval(&self, r: f64, params: &[f64]) -> f64 {
        match self {
            SpatialKernel::Constant => 1.0,
            SpatialKernel::Gaussian => {
                let sigma = params[0].exp();
                (-r * r / (2.0 * sigma * sigma)).exp()
            }
            SpatialKernel::PowerLaw => {
                let sigma = params[0].exp();
                let d = params[1].exp();
                (r + sigma).powf(-d)
            }
            SpatialKernel::Step { knots, max_range } => {
                step_eval(r, knots, *max_range, params)
            }
        }
    }

    /// `F(r) = int_0^r x f(x) dx`.
    pub fn antider(&self, r: f64, params: &[f64]) -> f64 {
        match self {
            SpatialKernel::Constant => 0.5 * r * r,
            SpatialKernel::Gaussian => {
                let sigma = params[0].exp();
                let s2 = sigma * sigma;
                -s2 * (-r * r / (2.0 * s2)).exp_m1()
            }
            SpatialKernel::PowerLaw => {
                let sigma = params[0].exp();
                let d = params[1].exp();
                if (d - 1.0).abs() < 1e-4 || (d - 2.0).abs() < 1e-4 {
                    return adaptive_quadrature(
                        &|x: f64| x * (x + sigma).powf(-d),
                        0.0,
                        r,
                        1e-13 * (1.0 + r),
                    );
                }
                let term = |u: f64| {
                    u.powf(2.0 - d) / (2.0 - d) - sigma * u.powf(1.0 - d) / (1.0 - d)
                };
                term(r + sigma) - term(sigma)
            }
            SpatialKernel::Step { knots, max_range } => {
                // piecewise quadratic in r
                let mut total = 0.0;
                let mut lo = 0.0;
                let mut h = 1.0;
                for (i, &k) in knots.iter().enumerate() {
                    let hi = k.min(r);
                    if hi > lo {
                        total += h * 0.5 * (hi * hi - lo * lo);
                    }
                    if r <= k {
                        return total;
                    }
                    lo = k;
                    h = params[i].exp();
                }
                let hi = max_range.min(r);
                if hi > lo {
                    total += h * 0.5 * (hi * hi - lo * lo);
                }
                total
            }
        }
    }

    /// `F(infinity)` when finite.
    pub fn antider_inf(&self, params: &[f64]) -> Option<f64> {
        match self {
            SpatialKernel::Constant => None,
            SpatialKernel::Gaussian => {
                let sigma = params[0].exp();
                Some(sigma * sigma)
            }
            SpatialKernel::PowerLaw => {
                let sigma = params[0].exp();
                let d = params[1].exp();
                if d > 2.0 + 1e-8 {
                    Some(sigma.powf(2.0 - d) / ((d - 1.0) * (d - 2.0)))
                } else {
                    None
                }
            }
            SpatialKernel::Step { max_range, .. } => Some(self.antider(*max_range, params)),
        }
    }

    /// `d f(r) / d theta_k` on the internal (log) parameter scale.
    pub fn deriv(&self, r: f64, params: &[f64], k: usize) -> f64 {
        match self {
            SpatialKernel::Constant => 0.0,
            SpatialKernel::Gaussian => {
                let sigma = params[0].exp();
                let s2 = sigma * sigma;
                (-r * r / (2.0 * s2)).exp() * r * r / s2
            }
            SpatialKernel::PowerLaw => {
                let sigma = params[0].exp();
                let d = params[1].exp();
                match k {
                    0 => -d * sigma * (r + sigma).powf(-d - 1.0),
                    _ => -d * (r + sigma).ln() * (r + sigma).powf(-d),
                }
            }
            SpatialKernel::Step { knots, max_range } => {
                if r >= *max_range || r < knots[0] {
                    return 0.0;
                }
                let mut seg = 0usize;
                for (i, &kn) in knots.iter().enumerate() {
                    if r >= kn {
                        seg = i;
                    } else {
                        break;
                    }
                }
                if seg == k {
                    params[k].exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Antiderivative of the parameter derivative:
    /// `int_0^r x df(x)/dtheta_k dx`.
    pub fn antider_deriv(&self, r: f64, params: &[f64], k: usize) -> f64 {
        match self {
            SpatialKernel::Constant => 0.0,
            SpatialKernel::Gaussian => {
                let sigma = params[0].exp();
                let s2 = sigma * sigma;
                let u = r * r / (2.0 * s2);
                2.0 * s2 * (1.0 - (1.0 + u) * (-u).exp())
            }
            SpatialKernel::PowerLaw => {
                let sigma = params[0].exp();
                let d = params[1].exp();
                if (d - 1.0).abs() < 1e-4 || (d - 2.0).abs() < 1e-4 {
                    return adaptive_quadrature(
                        &|x: f64| x * self.deriv(x, params, k),
                        0.0,
                        r,
                        1e-13 * (1.0 + r),
                    );
                }
                if k == 0 {
                    // int x * (-d sigma (x+sigma)^(-d-1)) dx
                    let term =
                        |u: f64| u.powf(1.0 - d) / (1.0 - d) + sigma * u.powf(-d) / d;
                    -d * sigma * (term(r + sigma) - term(sigma))
                } else {
                    // int x * (-d ln(x+sigma) (x+sigma)^(-d)) dx
                    // via int u^a ln u du = u^(a+1) (ln u/(a+1) - 1/(a+1)^2)
                    let ilog = |a: f64, u: f64| {
                        u.powf(a + 1.0) * (u.ln() / (a + 1.0) - 1.0 / ((a + 1.0) * (a + 1.0)))
                    };
                    let hi = r + sigma;
                    let part = ilog(1.0 - d, hi) - ilog(1.0 - d, sigma)
                        - sigma * (ilog(-d, hi) - ilog(-d, sigma));
                    -d * part
                }
            }
            SpatialKernel::Step { knots, max_range } => {
                let lo = knots[k];
                let hi = if k + 1 < knots.len() {
                    knots[k + 1]
                } else {
                    *max_range
                };
                let a = lo.min(r);
                let b = hi.min(r);
                if b > a {
                    params[k].exp() * 0.5 * (b * b - a * a)
                } else {
                    0.0
                }
            }
        }
    }

    /// `int_domain f(|s|) ds` with the domain centered at the kernel origin.
    ///
    /// Step kernels are integrated exactly via circle-polygon areas; smooth
    /// kernels take the boundary route with their analytic antiderivative.
    pub fn integral_over(&self, domain: &PolygonSet, params: &[f64], tol: f64) -> f64 {
        match self {
            SpatialKernel::Constant => {
                crate::geometry::polygon_area(domain).unwrap_or(0.0)
            }
            SpatialKernel::Step { knots, max_range } => {
                let mut total = 0.0;
                let mut area_lo = 0.0;
                let mut h = 1.0;
                for (i, &k) in knots.iter().enumerate() {
                    let area_hi = polygon_disc_area(domain, k);
                    total += h * (area_hi - area_lo);
                    area_lo = area_hi;
                    h = params[i].exp();
                }
                let area_hi = polygon_disc_area(domain, *max_range);
                total += h * (area_hi - area_lo);
                total
            }
            _ => cubature_green(
                self.eval(0.0, params),
                &|r: f64| self.antider(r, params),
                domain,
                tol,
            ),
        }
    }

    /// `int_domain df(|s|)/dtheta_k ds`.
    pub fn integral_deriv_over(
        &self,
        domain: &PolygonSet,
        params: &[f64],
        tol: f64,
        k: usize,
    ) -> f64 {
        match self {
            SpatialKernel::Constant => 0.0,
            SpatialKernel::Step { knots, max_range } => {
                let lo = knots[k];
                let hi = if k + 1 < knots.len() {
                    knots[k + 1]
                } else {
                    *max_range
                };
                params[k].exp()
                    * (polygon_disc_area(domain, hi) - polygon_disc_area(domain, lo))
            }
            _ => cubature_green(
                self.deriv(0.0, params, k),
                &|r: f64| self.antider_deriv(r, params, k),
                domain,
                tol,
            ),
        }
    }

    /// Upper bound of the kernel support, if intrinsically bounded.
    pub fn bounded_range(&self) -> Option<f64> {
        match self {
            SpatialKernel::Step { max_range, .. } => Some(*max_range),
            _ => None,
        }
    }
}

fn step_eval(r: f64, knots: &[f64], max_range: f64, params: &[f64]) -> f64 {
    if r >= max_range {
        return 0.0;
    }
    let mut h = 1.0;
    for (i, &k) in knots.iter().enumerate() {
        if r >= k {
            h = params[i].exp();
        } else {
            break;
        }
    }
    h
}

fn validate_knots(knots: &[f64], max_range: f64) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::Invalid("step kernel needs at least one knot".into()));
    }
    let mut prev = 0.0;
    for &k in knots {
        if k <= prev {
            return Err(Error::Invalid(
                "step kernel knots must be strictly increasing and positive".into(),
            ));
        }
        prev = k;
    }
    if max_range <= prev {
        return Err(Error::Invalid(
            "step kernel max range must exceed the last knot".into(),
        ));
    }
    Ok(())
}

/// Temporal interaction function shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum TemporalKernel {
    Constant,
    /// `g(t) = exp(-alpha t)`, parameter `log(alpha)`.
    Exponential,
    /// Piecewise constant: 1 on [0, k1), then `h_i` on [k_i, k_{i+1}),
    /// 0 beyond `max_range`. Parameters are `log(h_i)`.
    #[serde(rename_all = "camelCase")]
    Step { knots: Vec<f64>, max_range: f64 },
}

impl TemporalKernel {
    pub fn n_params(&self) -> usize {
        match self {
            TemporalKernel::Constant => 0,
            TemporalKernel::Exponential => 1,
            TemporalKernel::Step { knots, .. } => knots.len(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        (1..=self.n_params()).map(|i| format!("tiaf.{i}")).collect()
    }

    pub fn default_start(&self) -> Vec<f64> {
        match self {
            TemporalKernel::Constant => vec![],
            TemporalKernel::Exponential => vec![-2.0],
            TemporalKernel::Step { knots, .. } => {
                (1..=knots.len()).map(|i| -(i as f64)).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TemporalKernel::Step { knots, max_range } = self {
            validate_knots(knots, *max_range)?;
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, params: &[f64]) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            TemporalKernel::Constant => 1.0,
            TemporalKernel::Exponential => {
                let alpha = params[0].exp();
                (-alpha * t).exp()
            }
            TemporalKernel::Step { knots, max_range } => {
                step_eval(t, knots, *max_range, params)
            }
        }
    }

    /// `G(t) = int_0^t g(u) du`.
    pub fn integral(&self, t: f64, params: &[f64]) -> f64 {
        let t = t.max(0.0);
        match self {
            TemporalKernel::Constant => t,
            TemporalKernel::Exponential => {
                let alpha = params[0].exp();
                -(-alpha * t).exp_m1() / alpha
            }
            TemporalKernel::Step { knots, max_range } => {
                let mut total = 0.0;
                let mut lo = 0.0;
                let mut h = 1.0;
                for (i, &k) in knots.iter().enumerate() {
                    let hi = k.min(t);
                    if hi > lo {
                        total += h * (hi - lo);
                    }
                    if t <= k {
                        return total;
                    }
                    lo = k;
                    h = params[i].exp();
                }
                let hi = max_range.min(t);
                if hi > lo {
                    total += h * (hi - lo);
                }
                total
            }
        }
    }

    /// `d g(t) / d theta_k`.
    pub fn deriv(&self, t: f64, params: &[f64], k: usize) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            TemporalKernel::Constant => 0.0,
            TemporalKernel::Exponential => {
                let alpha = params[0].exp();
                -alpha * t * (-alpha * t).exp()
            }
            TemporalKernel::Step { knots, max_range } => {
                if t >= *max_range || t < knots[0] {
                    return 0.0;
                }
                let mut seg = 0usize;
                for (i, &kn) in knots.iter().enumerate() {
                    if t >= kn {
                        seg = i;
                    } else {
                        break;
                    }
                }
                if seg == k {
                    params[k].exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// `d G(t) / d theta_k`.
    pub fn integral_deriv(&self, t: f64, params: &[f64], k: usize) -> f64 {
        let t = t.max(0.0);
        match self {
            TemporalKernel::Constant => 0.0,
            TemporalKernel::Exponential => {
                let alpha = params[0].exp();
                (alpha * t * (-alpha * t).exp() - 1.0 + (-alpha * t).exp()) / alpha
            }
            TemporalKernel::Step { knots, max_range } => {
                let lo = knots[k];
                let hi = if k + 1 < knots.len() {
                    knots[k + 1]
                } else {
                    *max_range
                };
                let a = lo.min(t);
                let b = hi.min(t);
                if b > a {
                    params[k].exp() * (b - a)
                } else {
                    0.0
                }
            }
        }
    }
}
