//! Rubin's pooling rule with the small-sample adjusted degrees of freedom,
//! and the multiply-imputed paired t-test built on it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CompletedDataset, PairedSample};
use crate::error::{Error, Result};
use crate::impute::{multiple_impute, ImputationMethod};
use crate::stats::{self, two_sided_t_p, Df, TestOutcome};

/// Pooled Rubin quantities for m imputation draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    /// Mean of the per-dataset point estimates.
    pub q_bar: f64,
    /// Mean within-imputation variance.
    pub u_bar: f64,
    /// Between-imputation variance.
    pub b: f64,
    /// Total variance u_bar + (1 + 1/m) b.
    pub total: f64,
    /// Relative increase in variance due to missingness.
    pub r: f64,
    /// Unadjusted degrees of freedom (infinite when b = 0).
    pub nu: f64,
    /// Small-sample adjusted degrees of freedom.
    pub nu_tilde: f64,
}

/// Per-dataset estimates: Q = mean difference, U = estimated variance of Q.
pub fn per_dataset_estimates(completed: &CompletedDataset) -> Result<(f64, f64)> {
    let d = completed.diffs();
    if d.len() < 2 {
        return Err(Error::Parameter("need at least 2 rows".into()));
    }
    let n = d.len() as f64;
    let q = d.iter().sum::<f64>() / n;
    let var = stats::variance(&d);
    if var <= 0.0 {
        return Err(Error::DegenerateVariance(
            "all completed differences are equal".into(),
        ));
    }
    Ok((q, var / n))
}

/// Pool m per-dataset estimates. `n` is the sample size behind each
/// estimate (used in the observed-data degrees of freedom).
pub fn rubin_pool(estimates: &[(f64, f64)], n: usize) -> Result<PooledEstimate> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::Parameter(format!(
            "Rubin pooling needs m >= 2 draws, got {m}"
        )));
    }
    let mf = m as f64;
    let q_bar = estimates.iter().map(|e| e.0).sum::<f64>() / mf;
    let u_bar = estimates.iter().map(|e| e.1).sum::<f64>() / mf;
    let b = estimates
        .iter()
        .map(|e| (e.0 - q_bar) * (e.0 - q_bar))
        .sum::<f64>()
        / (mf - 1.0);
    if u_bar <= 0.0 && b <= 0.0 {
        return Err(Error::DegenerateVariance(
            "both within- and between-imputation variance are zero".into(),
        ));
    }
    let total = u_bar + (1.0 + 1.0 / mf) * b;
    let nf = n as f64;
    let (r, nu, nu_tilde) = if b == 0.0 {
        // continuous limit: no between-imputation variability
        let nu_obs = nf * (nf - 1.0) / (nf + 2.0);
        (0.0, f64::INFINITY, nu_obs)
    } else {
        let r = (1.0 + 1.0 / mf) * b / u_bar;
        let nu = (mf - 1.0) * (1.0 + 1.0 / r) * (1.0 + 1.0 / r);
        let nu_obs = nf * (nf - 1.0) / ((1.0 + r) * (nf + 2.0));
        let nu_tilde = nu / (1.0 + nu / nu_obs);
        (r, nu, nu_tilde)
    };
    Ok(PooledEstimate {
        q_bar,
        u_bar,
        b,
        total,
        r,
        nu,
        nu_tilde,
    })
}

/// Test outcome for an already-pooled estimate: statistic q_bar / sqrt(T),
/// p two-sided from a t reference with the adjusted degrees of freedom.
pub fn pooled_test(pooled: &PooledEstimate, method_label: &str) -> Result<TestOutcome> {
    let statistic = pooled.q_bar / pooled.total.sqrt();
    Ok(TestOutcome {
        statistic,
        df: Df::Finite(pooled.nu_tilde),
        p_two_sided: two_sided_t_p(statistic, pooled.nu_tilde)?,
        method: method_label.to_string(),
    })
}

/// Pool a list of completed datasets and test H0: mean difference = 0.
pub fn pool_and_test(draws: &[CompletedDataset], method_label: &str) -> Result<TestOutcome> {
    let estimates: Vec<(f64, f64)> = draws
        .iter()
        .map(per_dataset_estimates)
        .collect::<Result<_>>()?;
    let n = draws
        .first()
        .ok_or_else(|| Error::Parameter("no completed datasets".into()))?
        .n();
    pooled_test(&rubin_pool(&estimates, n)?, method_label)
}

/// Full multiple-imputation paired t-test pipeline.
pub fn mi_t_test<R: Rng>(
    sample: &PairedSample,
    method: &ImputationMethod,
    m: usize,
    rng: &mut R,
) -> Result<TestOutcome> {
    if m < 2 {
        return Err(Error::Parameter("mi_t_test needs m >= 2".into()));
    }
    let draws = multiple_impute(sample, method, m, rng)?;
    pool_and_test(&draws, method.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{inject_mcar, MissingSpec};
    use crate::datagen::{generate, CovarianceSpec, ResidualLaw, ShiftSpec, SigmaVariant};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn completed(pairs: &[(f64, f64)]) -> CompletedDataset {
        CompletedDataset {
            matrix: pairs.iter().map(|&(a, b)| vec![a, b]).collect(),
            imputed_mask: pairs.iter().map(|_| vec![false, false]).collect(),
        }
    }

    #[test]
    fn estimates_hand_case() {
        // d = (-1, 0, 1): Q = 0, U = s^2/n = 1/3
        let c = completed(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]);
        let (q, u) = per_dataset_estimates(&c).unwrap();
        assert_relative_eq!(q, 0.0);
        assert_relative_eq!(u, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn estimates_degenerate() {
        let c = completed(&[(1.0, 1.0), (2.0, 2.0)]);
        assert!(matches!(
            per_dataset_estimates(&c).unwrap_err(),
            Error::DegenerateVariance(_)
        ));
    }

    #[test]
    fn estimates_contrast_invariance() {
        let c1 = completed(&[(0.0, 1.0), (1.0, 3.0), (2.0, 1.5)]);
        let c2 = completed(&[(5.0, 6.0), (6.0, 8.0), (7.0, 6.5)]);
        assert_eq!(
            per_dataset_estimates(&c1).unwrap(),
            per_dataset_estimates(&c2).unwrap()
        );
    }

    #[test]
    fn rubin_pool_hand_case() {
        // m = 2, Q = (0, 2), U = (1, 1)
        let p = rubin_pool(&[(0.0, 1.0), (2.0, 1.0)], 30).unwrap();
        assert_relative_eq!(p.q_bar, 1.0);
        assert_relative_eq!(p.b, 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.total, 4.0, epsilon = 1e-12);
        assert_relative_eq!(p.r, 3.0, epsilon = 1e-12);
        assert_relative_eq!(p.nu, 16.0 / 9.0, epsilon = 1e-12);
        // nu_obs = 30*29/(4*32) = 6.796875
        let nu_obs = 6.796875;
        assert_relative_eq!(p.nu_tilde, p.nu / (1.0 + p.nu / nu_obs), epsilon = 1e-12);
        assert!(p.nu_tilde < p.nu && p.nu_tilde < nu_obs);
    }

    #[test]
    fn rubin_pool_degenerate_limit() {
        let p = rubin_pool(&[(1.5, 0.25), (1.5, 0.25), (1.5, 0.25)], 20).unwrap();
        assert_eq!(p.b, 0.0);
        assert_eq!(p.total, p.u_bar);
        assert_relative_eq!(p.nu_tilde, 20.0 * 19.0 / 22.0, epsilon = 1e-12);
    }

    #[test]
    fn pooling_order_invariant() {
        // up to summation-order rounding
        let a = rubin_pool(&[(0.1, 0.3), (0.7, 0.2), (-0.2, 0.4)], 15).unwrap();
        let b = rubin_pool(&[(0.7, 0.2), (-0.2, 0.4), (0.1, 0.3)], 15).unwrap();
        assert_relative_eq!(a.q_bar, b.q_bar, epsilon = 1e-14);
        assert_relative_eq!(a.total, b.total, epsilon = 1e-14);
        assert_relative_eq!(a.nu_tilde, b.nu_tilde, epsilon = 1e-12);
    }

    #[test]
    fn pooling_location_shift() {
        let base = [(0.1, 0.3), (0.7, 0.2), (-0.2, 0.4)];
        let shifted: Vec<(f64, f64)> = base.iter().map(|&(q, u)| (q + 2.5, u)).collect();
        let a = rubin_pool(&base, 15).unwrap();
        let b = rubin_pool(&shifted, 15).unwrap();
        assert_relative_eq!(b.q_bar, a.q_bar + 2.5, epsilon = 1e-12);
        assert_relative_eq!(b.b, a.b, epsilon = 1e-12);
        assert_eq!(b.u_bar, a.u_bar);
    }

    #[test]
    fn total_at_least_within_variance() {
        for (est, n) in [
            (vec![(0.0, 1.0), (2.0, 1.0)], 30),
            (vec![(1.0, 0.5), (1.0, 0.5)], 10),
        ] {
            let p = rubin_pool(&est, n).unwrap();
            assert!(p.total >= p.u_bar);
            if p.b == 0.0 {
                assert_eq!(p.total, p.u_bar);
            }
        }
    }

    #[test]
    fn pooled_statistic_hand_case() {
        let p = rubin_pool(&[(0.0, 1.0), (2.0, 1.0)], 30).unwrap();
        let out = pooled_test(&p, "norm").unwrap();
        assert_relative_eq!(out.statistic, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn no_missing_gives_b_zero_path() {
        let sample =
            PairedSample::from_complete(vec![(1.0, 0.0), (2.0, 0.5), (0.5, 1.0), (1.5, 0.2), (0.8, 0.4)])
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = mi_t_test(&sample, &ImputationMethod::norm(), 3, &mut rng).unwrap();
        // all m datasets identical -> statistic equals mean(d)/sqrt(s^2/n)
        let d: Vec<f64> = sample
            .rows()
            .iter()
            .map(|r| r.first.unwrap() - r.second.unwrap())
            .collect();
        let n = d.len() as f64;
        let expected = crate::stats::mean(&d) / (crate::stats::variance(&d) / n).sqrt();
        assert_relative_eq!(out.statistic, expected, epsilon = 1e-12);
        match out.df {
            Df::Finite(df) => assert_relative_eq!(df, n * (n - 1.0) / (n + 2.0), epsilon = 1e-12),
            _ => panic!("expected finite df"),
        }
    }

    #[test]
    fn large_shift_rejects_almost_always() {
        let mut rejections = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let full = generate(
                30,
                ResidualLaw::StandardNormal,
                &CovarianceSpec {
                    variant: SigmaVariant::Sigma1,
                    rho: 0.1,
                },
                &ShiftSpec { delta: 5.0 },
                &mut rng,
            )
            .unwrap();
            let masked =
                inject_mcar(&full, MissingSpec::FixedCounts { n2: 5, n3: 5 }, &mut rng).unwrap();
            let out = mi_t_test(&masked, &ImputationMethod::norm(), 5, &mut rng).unwrap();
            if out.p_two_sided < 0.001 {
                rejections += 1;
            }
        }
        assert!(rejections >= 99, "only {rejections}/100 rejected");
    }
}
