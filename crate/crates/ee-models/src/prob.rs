//! Count-distribution densities, tail functions, and test statistics shared
//! by the model engines and the forecast scoring code.
//!
//! The negative binomial is parametrized by its mean `mu` and overdispersion
//! `psi` so that the variance is `mu * (1 + psi * mu)`; `psi -> 0` recovers
//! the Poisson family.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::{digamma, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Log of the Poisson probability mass function.
pub fn poisson_logpmf(y: f64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return if y == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    y * mu.ln() - mu - ln_gamma(y + 1.0)
}

/// Poisson CDF P(Y <= y) via the regularized upper incomplete gamma.
pub fn poisson_cdf(y: f64, mu: f64) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    if mu <= 0.0 {
        return 1.0;
    }
    gamma_ur(y.floor() + 1.0, mu)
}

/// Log pmf of the negative binomial with mean `mu` and overdispersion `psi`.
///
/// Size (number of successes) is `1/psi`; `psi = 0` is handled by the caller
/// through [`poisson_logpmf`].
pub fn negbin_logpmf(y: f64, mu: f64, psi: f64) -> f64 {
    debug_assert!(psi > 0.0);
    if mu <= 0.0 {
        return if y == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let size = 1.0 / psi;
    // p = size / (size + mu)
    let log_p = size.ln() - (size + mu).ln();
    let log_q = mu.ln() - (size + mu).ln();
    ln_gamma(y + size) - ln_gamma(size) - ln_gamma(y + 1.0) + size * log_p + y * log_q
}

/// Negative binomial CDF P(Y <= y) via the regularized incomplete beta.
pub fn negbin_cdf(y: f64, mu: f64, psi: f64) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    if mu <= 0.0 {
        return 1.0;
    }
    let size = 1.0 / psi;
    let p = size / (size + mu);
    beta_reg(size, y.floor() + 1.0, p)
}

/// Derivative of the negative binomial log pmf with respect to `mu`.
pub fn negbin_dlogpmf_dmu(y: f64, mu: f64, psi: f64) -> f64 {
    y / mu - (1.0 + psi * y) / (1.0 + psi * mu)
}

/// Derivative of the negative binomial log pmf with respect to `size = 1/psi`.
pub fn negbin_dlogpmf_dsize(y: f64, mu: f64, size: f64) -> f64 {
    digamma(y + size) - digamma(size) + (size / (size + mu)).ln() + 1.0
        - (size + y) / (size + mu)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sided p-value for a standard-normal test statistic.
pub fn z_pvalue(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_pvalue(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Numeric(format!("t distribution: {e}")))?;
    Ok(2.0 * (1.0 - dist.cdf(t.abs())))
}

/// Quantile of the chi-squared distribution with `df` degrees of freedom.
pub fn chi_squared_quantile(p: f64, df: f64) -> Result<f64> {
    let dist =
        ChiSquared::new(df).map_err(|e| Error::Numeric(format!("chi-squared: {e}")))?;
    Ok(dist.inverse_cdf(p))
}

/// Upper tail P(X >= x) of the chi-squared distribution.
pub fn chi_squared_sf(x: f64, df: f64) -> Result<f64> {
    let dist =
        ChiSquared::new(df).map_err(|e| Error::Numeric(format!("chi-squared: {e}")))?;
    Ok(1.0 - dist.cdf(x))
}

/// P(D_n <= d) for the Kolmogorov-Smirnov statistic of a sample of size `n`.
///
/// Uses the Marsaglia-Tsang-Wang matrix method, exact for moderate `n`.
pub fn ks_cdf_exact(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let k = (nf * d).ceil() as usize;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;

    // Build the (m x m) transition matrix.
    let mut hmat = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            if i as i64 - j as i64 + 1 >= 0 {
                hmat[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hmat[i * m] -= h.powi(i as i32 + 1);
        hmat[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    hmat[(m - 1) * m] += if 2.0 * h - 1.0 > 0.0 {
        (2.0 * h - 1.0).powi(m as i32)
    } else {
        0.0
    };
    for i in 0..m {
        for j in 0..m {
            if i as i64 - j as i64 + 1 > 0 {
                let mut f = 1.0;
                for g in 1..=(i - j + 1) {
                    f *= g as f64;
                }
                hmat[i * m + j] /= f;
            }
        }
    }

    // hmat^n with scaling to avoid overflow; track the power of 10 factored out.
    let mut expo = 0i32;
    let mut pow = hmat.clone();
    let mut result = vec![0.0f64; m * m];
    // identity
    for i in 0..m {
        result[i * m + i] = 1.0;
    }
    let mut e_result = 0i32;
    let mut e_pow = 0i32;
    let mut nn = n;
    let mat_mul = |a: &[f64], b: &[f64], out: &mut [f64]| {
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for l in 0..m {
                    s += a[i * m + l] * b[l * m + j];
                }
                out[i * m + j] = s;
            }
        }
    };
    let mut tmp = vec![0.0f64; m * m];
    while nn > 0 {
        if nn & 1 == 1 {
            mat_mul(&result, &pow, &mut tmp);
            result.copy_from_slice(&tmp);
            e_result += e_pow;
            if result[(m / 2) * m + m / 2] > 1e140 {
                for v in result.iter_mut() {
                    *v *= 1e-140;
                }
                e_result += 140;
            }
        }
        nn >>= 1;
        if nn > 0 {
            mat_mul(&pow.clone(), &pow.clone(), &mut tmp);
            pow.copy_from_slice(&tmp);
            e_pow *= 2;
            if pow[(m / 2) * m + m / 2] > 1e140 {
                for v in pow.iter_mut() {
                    *v *= 1e-140;
                }
                e_pow += 140;
            }
        }
    }
    expo += e_result;

    let mut s = result[(k - 1) * m + (k - 1)];
    for i in 1..=n {
        s *= i as f64 / nf;
        if s < 1e-140 {
            s *= 1e140;
            expo -= 140;
        }
    }
    s * 10f64.powi(expo)
}

/// Asymptotic Kolmogorov distribution K(x) = P(sqrt(n) D_n <= x).
pub fn kolmogorov_cdf_asymptotic(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    1.0 - 2.0 * s
}

/// Critical value d such that P(D_n > d) = alpha.
///
/// Exact (matrix method) for n <= 100, asymptotic inversion otherwise.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let target = 1.0 - alpha;
    if n <= 100 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ks_cdf_exact(n, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        let mut lo = 0.0;
        let mut hi = 5.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if kolmogorov_cdf_asymptotic(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi) / (n as f64).sqrt()
    }
}

/// One-sample KS statistic of `sorted` (ascending) against the uniform CDF on [0, 1].
pub fn ks_statistic_uniform(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let ecdf_hi = (i as f64 + 1.0) / n;
        let ecdf_lo = i as f64 / n;
        d = d.max((ecdf_hi - u).abs()).max((u - ecdf_lo).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn poisson_basics() {
        // P(Y=0 | mu=1) = e^-1
        assert_relative_eq!(poisson_logpmf(0.0, 1.0), -1.0, epsilon = 1e-12);
        assert_relative_eq!(poisson_cdf(0.0, 2.0), (-2.0f64).exp(), epsilon = 1e-12);
        // sum of pmf equals cdf
        let mu = 3.7;
        let mut acc = 0.0;
        for y in 0..=10 {
            acc += poisson_logpmf(y as f64, mu).exp();
        }
        assert_relative_eq!(acc, poisson_cdf(10.0, mu), epsilon = 1e-12);
    }

    #[test]
    fn negbin_matches_poisson_limit() {
        let mu = 2.5;
        for y in 0..8 {
            let nb = negbin_logpmf(y as f64, mu, 1e-8);
            let po = poisson_logpmf(y as f64, mu);
            assert!((nb - po).abs() < 1e-4, "y={y}: {nb} vs {po}");
        }
    }

    #[test]
    fn negbin_cdf_consistent_with_pmf() {
        let (mu, psi) = (4.0, 0.6);
        let mut acc = 0.0;
        for y in 0..=25 {
            acc += negbin_logpmf(y as f64, mu, psi).exp();
            assert_relative_eq!(acc, negbin_cdf(y as f64, mu, psi), epsilon = 1e-10);
        }
    }

    #[test]
    fn negbin_mu_derivative_matches_fd() {
        let (y, mu, psi) = (3.0, 2.0, 0.5);
        let h = 1e-6;
        let fd = (negbin_logpmf(y, mu + h, psi) - negbin_logpmf(y, mu - h, psi)) / (2.0 * h);
        assert_relative_eq!(negbin_dlogpmf_dmu(y, mu, psi), fd, epsilon = 1e-7);
    }

    #[test]
    fn negbin_size_derivative_matches_fd() {
        let (y, mu, size) = (3.0, 2.0, 1.7);
        let h = 1e-6;
        let f = |s: f64| {
            let psi = 1.0 / s;
            negbin_logpmf(y, mu, psi)
        };
        let fd = (f(size + h) - f(size - h)) / (2.0 * h);
        assert_relative_eq!(negbin_dlogpmf_dsize(y, mu, size), fd, epsilon = 1e-7);
    }

    #[test]
    fn normal_cdf_known_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-14);
        assert_relative_eq!(normal_cdf(1.959963984540054), 0.975, epsilon = 1e-10);
    }

    #[test]
    fn ks_exact_known_value() {
        // Classical tabulated critical value: n = 10, alpha = 0.05 -> 0.40925.
        let d = ks_critical_value(10, 0.05);
        assert!((d - 0.40925).abs() < 5e-4, "got {d}");
        // n = 100, alpha = 0.05 -> about 0.1340
        let d100 = ks_critical_value(100, 0.05);
        assert!((d100 - 0.1340).abs() < 2e-3, "got {d100}");
    }

    #[test]
    fn ks_asymptotic_matches_exact_for_large_n() {
        let n = 100;
        let d = 0.12;
        let exact = ks_cdf_exact(n, d);
        let asym = kolmogorov_cdf_asymptotic((n as f64).sqrt() * d);
        assert!((exact - asym).abs() < 0.01, "{exact} vs {asym}");
    }

    #[test]
    fn chi_squared_quantile_sane() {
        // Well-known: chi2(0.95, 1) = 3.841
        let q = chi_squared_quantile(0.95, 1.0).unwrap();
        assert!((q - 3.841).abs() < 1e-2, "got {q}");
    }
}
