use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::prob;

#[derive(Debug, Clone)]
pub struct PermutationOutcome {
    /// Mean paired difference mean(A - B).
    pub diff_obs: f64,
    /// Permutation p-value from random sign flips.
    pub p_permut: f64,
    /// Paired t-test p-value.
    pub p_t: f64,
}

/// Paired comparison of two score arrays by a sign-flip permutation test and
/// a paired t-test.
pub fn permutation_test(
    scores_a: &[f64],
    scores_b: &[f64],
    n_permutations: usize,
    seed: u64,
) -> Result<PermutationOutcome> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::Dimension(
            "paired score arrays must have equal length".into(),
        ));
    }
    if scores_a.is_empty() {
        return Err(Error::Invalid("no paired scores".into()));
    }
    if n_permutations < 100 {
        return Err(Error::Invalid(
            "need at least 100 permutations for a stable p-value".into(),
        ));
    }
    let n = scores_a.len();
    let diffs: Vec<f64> = scores_a
        .iter()
        .zip(scores_b)
        .map(|(a, b)| a - b)
        .collect();
    let diff_obs = diffs.iter().sum::<f64>() / n as f64;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..n_permutations {
        let mut s = 0.0;
        for &d in &diffs {
            s += if rng.gen::<bool>() { d } else { -d };
        }
        if (s / n as f64).abs() >= diff_obs.abs() - 1e-15 {
            exceed += 1;
        }
    }
    let p_permut = exceed as f64 / n_permutations as f64;

    // paired t statistic
    let sd = {
        let var = diffs
            .iter()
            .map(|d| (d - diff_obs) * (d - diff_obs))
            .sum::<f64>()
            / (n as f64 - 1.0);
        var.sqrt()
    };
    let p_t = if sd == 0.0 {
        // all paired differences identical: degenerate t statistic
        if diff_obs == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let t = diff_obs / (sd / (n as f64).sqrt());
        prob::t_pvalue(t, n as f64 - 1.0)?
    };

    Ok(PermutationOutcome {
        diff_obs,
        p_permut,
        p_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_arrays_give_p_one() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let out = permutation_test(&a, &a, 500, 1).unwrap();
        assert_eq!(out.diff_obs, 0.0);
        assert_relative_eq!(out.p_permut, 1.0);
    }

    #[test]
    fn clear_shift_is_detected() {
        let a: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let out = permutation_test(&a, &b, 2000, 2).unwrap();
        assert_relative_eq!(out.diff_obs, -1.0);
        assert!(out.p_permut < 0.01, "p = {}", out.p_permut);
        assert!(out.p_t < 0.01);
    }

    #[test]
    fn symmetry_under_swap() {
        let a: Vec<f64> = (0..60).map(|i| ((i * 13) % 11) as f64 * 0.1).collect();
        let b: Vec<f64> = (0..60).map(|i| ((i * 7) % 13) as f64 * 0.1).collect();
        let ab = permutation_test(&a, &b, 5000, 3).unwrap();
        let ba = permutation_test(&b, &a, 5000, 3).unwrap();
        assert_relative_eq!(ab.diff_obs, -ba.diff_obs, epsilon = 1e-12);
        assert_relative_eq!(ab.p_permut, ba.p_permut, epsilon = 1e-12);
        assert_relative_eq!(ab.p_t, ba.p_t, epsilon = 1e-12);
    }

    #[test]
    fn too_few_permutations_rejected() {
        let a = vec![1.0, 2.0];
        assert!(permutation_test(&a, &a, 99, 1).is_err());
    }
}
