//! Quasi-Newton minimization shared by the three model engines.
//!
//! BFGS with a backtracking (Armijo) line search; optional elementwise lower
//! bounds are handled by gradient projection with an active set, which is all
//! the box structure the epidemic coefficients need. Also hosts the dense
//! solve/inverse helpers and the numerically differenced Hessian used for
//! covariance estimation.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub struct Options {
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the projected gradient.
    pub grad_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iter: 500,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_evals: usize,
    /// Coordinates resting on their lower bound at the solution.
    pub active: Vec<bool>,
}

const BOUND_EPS: f64 = 1e-12;
const ARMIJO_C1: f64 = 1e-4;

/// Minimize `f` starting from `x0`, optionally subject to `x[i] >= lower[i]`.
///
/// `f` returns the objective value and its gradient in one call.
pub fn minimize<F>(
    f: F,
    x0: &[f64],
    lower: Option<&[Option<f64>]>,
    opts: &Options,
) -> Result<Outcome>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::Invalid("empty parameter vector".into()));
    }
    let lb = |i: usize| -> Option<f64> { lower.and_then(|l| l[i]) };
    let mut x: Vec<f64> = x0.to_vec();
    for i in 0..n {
        if let Some(l) = lb(i) {
            if x[i] < l {
                x[i] = l;
            }
        }
    }

    let mut n_evals = 1usize;
    let (mut fx, mut gx) = f(&x)?;
    if !fx.is_finite() {
        return Err(Error::Numeric(
            "objective not finite at the start value".into(),
        ));
    }

    let mut h = Array2::<f64>::eye(n);
    let mut h_is_identity = true;
    let mut converged = false;
    let mut iter = 0usize;

    while iter < opts.max_iter {
        iter += 1;

        // Active set: at the bound with the gradient pushing into it.
        let mut active = vec![false; n];
        for i in 0..n {
            if let Some(l) = lb(i) {
                if x[i] <= l + BOUND_EPS && gx[i] > 0.0 {
                    active[i] = true;
                }
            }
        }
        let mut pg = gx.clone();
        for i in 0..n {
            if active[i] {
                pg[i] = 0.0;
            }
        }
        let pg_max = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_max < opts.grad_tol {
            converged = true;
            break;
        }

        // Search direction d = -H * pg, restricted to the free coordinates.
        let pg_arr = Array1::from(pg.clone());
        let mut d: Vec<f64> = (-&h.dot(&pg_arr)).to_vec();
        for i in 0..n {
            if active[i] {
                d[i] = 0.0;
            }
        }
        let mut slope: f64 = d.iter().zip(&gx).map(|(di, gi)| di * gi).sum();
        if slope >= 0.0 {
            h = Array2::eye(n);
            h_is_identity = true;
            d = pg.iter().map(|v| -v).collect();
            slope = d.iter().zip(&gx).map(|(di, gi)| di * gi).sum();
            if slope >= 0.0 {
                break; // projected gradient is numerically zero
            }
        }

        // Largest step staying inside the box.
        let mut alpha_max = f64::INFINITY;
        for i in 0..n {
            if d[i] < 0.0 {
                if let Some(l) = lb(i) {
                    let a = (l - x[i]) / d[i];
                    if a < alpha_max {
                        alpha_max = a;
                    }
                }
            }
        }
        let mut alpha = alpha_max.min(1.0);
        if h_is_identity {
            // steepest-descent step: cap by the parameter scale so the first
            // probes stay in a sane region when the gradient is large
            let d_inf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let x_inf = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            alpha = alpha.min(x_inf / (1e-12 + d_inf));
        }
        let mut hit_bound = alpha >= alpha_max && alpha_max.is_finite();
        let mut accepted = None;
        while alpha > 1e-20 {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if hit_bound {
                // Snap binding coordinates exactly onto the bound.
                for i in 0..n {
                    if let Some(l) = lb(i) {
                        if xt[i] < l + BOUND_EPS {
                            xt[i] = l;
                        }
                    }
                }
            }
            n_evals += 1;
            match f(&xt) {
                Ok((ft, gt)) if ft.is_finite() => {
                    if ft <= fx + ARMIJO_C1 * alpha * slope {
                        accepted = Some((xt, ft, gt));
                        break;
                    }
                }
                _ => {}
            }
            alpha *= 0.5;
            hit_bound = false;
        }

        let (xt, ft, gt) = match accepted {
            Some(t) => t,
            None => {
                if !h_is_identity {
                    h = Array2::eye(n);
                    h_is_identity = true;
                    continue;
                }
                break; // line search failed along steepest descent
            }
        };

        // BFGS update on the inverse Hessian, skipped across bound hits and
        // when the curvature condition fails.
        if !hit_bound {
            let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gt.iter().zip(&gx).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            let yy: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if sy > 1e-12 * ss * yy && sy > 0.0 {
                if h_is_identity {
                    // scale the initial inverse Hessian to the curvature of
                    // the first accepted pair
                    let gamma = sy / (yy * yy);
                    if gamma.is_finite() && gamma > 0.0 {
                        for i in 0..n {
                            h[[i, i]] = gamma;
                        }
                    }
                }
                let rho = 1.0 / sy;
                let s_a = Array1::from(s.clone());
                let y_a = Array1::from(y.clone());
                let hy = h.dot(&y_a);
                let yhy = y_a.dot(&hy);
                // H <- H + (sy + yHy) (s s^T) rho^2 - rho (H y s^T + s (H y)^T)
                let n_ = n;
                for i in 0..n_ {
                    for j in 0..n_ {
                        h[[i, j]] += (sy + yhy) * s_a[i] * s_a[j] * rho * rho
                            - rho * (hy[i] * s_a[j] + s_a[i] * hy[j]);
                    }
                }
                h_is_identity = false;
            }
        } else {
            h = Array2::eye(n);
            h_is_identity = true;
        }

        x = xt;
        fx = ft;
        gx = gt;
    }

    let mut active = vec![false; n];
    for i in 0..n {
        if let Some(l) = lb(i) {
            if x[i] <= l + BOUND_EPS {
                active[i] = true;
            }
        }
    }
    Ok(Outcome {
        x,
        value: fx,
        grad: gx,
        converged,
        iterations: iter,
        n_evals,
        active,
    })
}

/// Hessian of a scalar function from central differences of its gradient.
///
/// Step per coordinate: `1e-5 * max(1, |x_i|)`. The result is symmetrized.
pub fn numeric_hessian<G>(grad: G, x: &[f64]) -> Result<Array2<f64>>
where
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut hess = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let h = 1e-5 * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[j] += h;
        let gp = grad(&xp)?;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let gm = grad(&xm)?;
        for i in 0..n {
            hess[[i, j]] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    // symmetrize
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (hess[[i, j]] + hess[[j, i]]);
            hess[[i, j]] = v;
            hess[[j, i]] = v;
        }
    }
    Ok(hess)
}

/// Solve `A x = b` by Gauss-Jordan elimination with partial pivoting.
pub fn solve(a: &Array2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension("solve: non-square or wrong rhs".into()));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[[r, col]].abs() > m[[piv, col]].abs() {
                piv = r;
            }
        }
        if m[[piv, col]].abs() < 1e-300 {
            return Err(Error::Numeric("singular matrix in solve".into()));
        }
        if piv != col {
            for c in 0..n {
                m.swap([col, c], [piv, c]);
            }
            x.swap(col, piv);
        }
        let d = m[[col, col]];
        for c in 0..n {
            m[[col, c]] /= d;
        }
        x[col] /= d;
        for r in 0..n {
            if r != col {
                let factor = m[[r, col]];
                if factor != 0.0 {
                    for c in 0..n {
                        m[[r, c]] -= factor * m[[col, c]];
                    }
                    x[r] -= factor * x[col];
                }
            }
        }
    }
    Ok(x)
}

/// Matrix inverse via column-wise solves.
pub fn inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(a, &e)?;
        for i in 0..n {
            inv[[i, j]] = col[i];
        }
    }
    Ok(inv)
}

/// Spectral radius of a nonnegative matrix by power iteration (tol 1e-10).
pub fn spectral_radius(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = m.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut v = Array1::<f64>::from_elem(n, 1.0);
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = m.dot(&v);
        let norm = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if norm == 0.0 {
            return 0.0;
        }
        let next = &w / norm;
        let diff = (norm - lambda).abs();
        v = next;
        lambda = norm;
        if diff < 1e-10 {
            break;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (1.0, 100.0);
        let f = (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2);
        let g = vec![
            -2.0 * (a - x[0]) - 4.0 * b * (x[1] - x[0] * x[0]) * x[0],
            2.0 * b * (x[1] - x[0] * x[0]),
        ];
        Ok((f, g))
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let out = minimize(rosenbrock, &[-1.2, 1.0], None, &Options::default()).unwrap();
        assert!(out.converged, "{:?}", out);
        assert!((out.x[0] - 1.0).abs() < 1e-5);
        assert!((out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn bfgs_respects_lower_bound() {
        // minimum of (x+2)^2 + (y-3)^2 subject to x >= 0 is at (0, 3)
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let fx = (x[0] + 2.0).powi(2) + (x[1] - 3.0).powi(2);
            Ok((fx, vec![2.0 * (x[0] + 2.0), 2.0 * (x[1] - 3.0)]))
        };
        let lower = [Some(0.0), None];
        let out = minimize(f, &[1.0, 0.0], Some(&lower), &Options::default()).unwrap();
        assert!(out.converged);
        assert_relative_eq!(out.x[0], 0.0, epsilon = 1e-10);
        assert_relative_eq!(out.x[1], 3.0, epsilon = 1e-6);
        assert!(out.active[0]);
        assert!(!out.active[1]);
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let grad = |x: &[f64]| -> Result<Vec<f64>> {
            Ok(vec![2.0 * x[0] + x[1], x[0] + 6.0 * x[1]])
        };
        let h = numeric_hessian(grad, &[0.3, -0.7]).unwrap();
        assert_relative_eq!(h[[0, 0]], 2.0, epsilon = 1e-6);
        assert_relative_eq!(h[[0, 1]], 1.0, epsilon = 1e-6);
        assert_relative_eq!(h[[1, 1]], 6.0, epsilon = 1e-6);
    }

    #[test]
    fn solve_and_inverse_roundtrip() {
        let a = array![[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.0, -1.0, 2.0]];
        let x = solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let b = a.dot(&Array1::from(x));
        assert_relative_eq!(b[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(b[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(b[2], 3.0, epsilon = 1e-12);

        let inv = inverse(&a).unwrap();
        let prod = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(prod[[i, j]], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spectral_radius_known() {
        let m = array![[0.5, 0.2], [0.1, 0.4]];
        // eigenvalues of [[.5,.2],[.1,.4]]: (0.9 +- sqrt(0.01+0.08))/2 = 0.6, 0.3
        assert_relative_eq!(spectral_radius(&m), 0.6, epsilon = 1e-8);
        let z = Array2::<f64>::zeros((3, 3));
        assert_eq!(spectral_radius(&z), 0.0);
    }
}
