//! Weighted permutation test for incompletely observed pairs.
//!
//! The statistic combines the paired-t statistic of the complete pairs with
//! the Welch statistic of the two singleton groups,
//! `sqrt(a) * T_t + sqrt(1-a) * T_w`, and is calibrated by permuting the two
//! parts separately: within-pair component swaps for the complete pairs
//! (equivalently, independent sign flips of the differences) and a uniform
//! regrouping of the pooled singleton values.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{split, PairedSample, SplitParts};
use crate::error::{Error, Result};
use crate::stats::{paired_t_stat, welch_stat, Df, TestOutcome};

/// Configuration for the Monte Carlo permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    /// Number of permutation replicates.
    pub b: usize,
    /// Override for the weight a; defaults to 2 n1 / (n + n1).
    pub a_override: Option<f64>,
    pub seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            b: 1000,
            a_override: None,
            seed: 0,
        }
    }
}

/// Recommended weight a = 2 n1 / (n + n1); 1 when all pairs are complete,
/// 0 when none are.
pub fn weight_a(n1: usize, n2: usize, n3: usize) -> f64 {
    let n = n1 + n2 + n3;
    2.0 * n1 as f64 / (n + n1) as f64
}

fn t_ml_parts(parts: &SplitParts, a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Parameter(format!("weight a = {a} outside [0, 1]")));
    }
    if a == 1.0 {
        return paired_t_stat(&parts.diffs);
    }
    if a == 0.0 {
        return welch_stat(&parts.first_only, &parts.second_only);
    }
    let tt = paired_t_stat(&parts.diffs)?;
    let tw = welch_stat(&parts.first_only, &parts.second_only)?;
    Ok(a.sqrt() * tt + (1.0 - a).sqrt() * tw)
}

/// The weighted statistic on the given sample.
pub fn t_ml(sample: &PairedSample, a: f64) -> Result<f64> {
    t_ml_parts(&split(sample), a)
}

/// Monte Carlo permutation test. Deterministic given the seed; the add-one
/// estimator keeps p in {1/(B+1), ..., 1}. Permuted replicates hitting a
/// zero variance on a needed branch are re-drawn (aborting after 100*B
/// failed redraws).
pub fn permute_and_test(sample: &PairedSample, cfg: &PermutationConfig) -> Result<TestOutcome> {
    if cfg.b == 0 {
        return Err(Error::Parameter("permutation count B must be >= 1".into()));
    }
    if let Some(a) = cfg.a_override {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Parameter(format!("a_override {a} outside [0, 1]")));
        }
    }
    let (n1, n2, n3) = sample.counts();
    let a = cfg.a_override.unwrap_or_else(|| weight_a(n1, n2, n3));
    let parts = split(sample);
    let t_obs = t_ml_parts(&parts, a)?;

    let mut pooled: Vec<f64> = parts
        .first_only
        .iter()
        .chain(parts.second_only.iter())
        .copied()
        .collect();
    let mut perm = SplitParts {
        diffs: parts.diffs.clone(),
        first_only: parts.first_only.clone(),
        second_only: parts.second_only.clone(),
    };

    let mut exceed = 0usize;
    let mut redraws = 0usize;
    let max_redraws = 100 * cfg.b;
    for b in 0..cfg.b {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b as u64 + 1);
        let t_star = loop {
            if a > 0.0 {
                for (dst, src) in perm.diffs.iter_mut().zip(&parts.diffs) {
                    *dst = if rng.random::<bool>() { *src } else { -*src };
                }
            }
            if a < 1.0 {
                pooled.shuffle(&mut rng);
                perm.first_only.clear();
                perm.first_only.extend_from_slice(&pooled[..n2]);
                perm.second_only.clear();
                perm.second_only.extend_from_slice(&pooled[n2..]);
            }
            match t_ml_parts(&perm, a) {
                Ok(t) => break t,
                Err(Error::DegenerateVariance(_)) => {
                    redraws += 1;
                    if redraws > max_redraws {
                        return Err(Error::DegenerateVariance(format!(
                            "permutation distribution degenerate: {redraws} failed redraws"
                        )));
                    }
                }
                Err(e) => return Err(e),
            }
        };
        if t_star.abs() >= t_obs.abs() {
            exceed += 1;
        }
    }
    Ok(TestOutcome {
        statistic: t_obs,
        df: Df::Permutation,
        p_two_sided: (1 + exceed) as f64 / (cfg.b + 1) as f64,
        method: "tml".into(),
    })
}

/// Exact permutation p-value by full enumeration of all sign-flip and
/// regrouping combinations. Refuses instances whose arrangement count
/// 2^n1 * C(n2+n3, n2) exceeds 1e6. Arrangements on which the statistic is
/// degenerate are counted as extreme (conservative).
pub fn enumerate_exact(sample: &PairedSample, a: f64) -> Result<f64> {
    let (n1, n2, n3) = sample.counts();
    let budget = 1e6;
    if n1 >= 63 {
        return Err(Error::Size("too many complete pairs to enumerate".into()));
    }
    let signs = 1u64 << n1;
    let groupings = binomial(n2 + n3, n2);
    if (signs as f64) * (groupings as f64) > budget {
        return Err(Error::Size(format!(
            "{signs} x {groupings} arrangements exceed the enumeration budget"
        )));
    }
    let parts = split(sample);
    let t_obs = t_ml_parts(&parts, a)?;

    let pooled: Vec<f64> = parts
        .first_only
        .iter()
        .chain(parts.second_only.iter())
        .copied()
        .collect();
    let mut perm = parts.clone();
    let mut total = 0u64;
    let mut exceed = 0u64;

    let mut comb = Combinations::new(n2 + n3, n2);
    loop {
        let group1 = comb.current();
        if a < 1.0 {
            perm.first_only.clear();
            perm.second_only.clear();
            let mut in1 = vec![false; pooled.len()];
            for &i in group1 {
                in1[i] = true;
            }
            for (i, &v) in pooled.iter().enumerate() {
                if in1[i] {
                    perm.first_only.push(v);
                } else {
                    perm.second_only.push(v);
                }
            }
        }
        for mask in 0..signs {
            if a > 0.0 {
                for (i, (dst, src)) in perm.diffs.iter_mut().zip(&parts.diffs).enumerate() {
                    *dst = if mask >> i & 1 == 1 { -*src } else { *src };
                }
            }
            total += 1;
            match t_ml_parts(&perm, a) {
                Ok(t) => {
                    if t.abs() >= t_obs.abs() {
                        exceed += 1;
                    }
                }
                Err(Error::DegenerateVariance(_)) => exceed += 1,
                Err(e) => return Err(e),
            }
            if a == 0.0 {
                break; // sign masks are irrelevant without a complete part
            }
        }
        if !comb.advance() {
            break;
        }
        if a == 1.0 {
            break; // groupings are irrelevant without an incomplete part
        }
    }
    Ok(exceed as f64 / total as f64)
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut out = 1u64;
    for i in 0..k {
        out = out * (n - i) as u64 / (i + 1) as u64;
    }
    out
}

/// Lexicographic k-subset odometer over {0, .., n-1}.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
        }
    }

    fn current(&self) -> &[usize] {
        &self.idx
    }

    fn advance(&mut self) -> bool {
        let k = self.idx.len();
        if k == 0 {
            return false;
        }
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - (k - i) {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
}
