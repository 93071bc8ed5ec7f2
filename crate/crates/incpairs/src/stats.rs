//! Classical statistics: paired t, Welch statistic, Student-t distribution
//! function and p-value transforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference distribution degrees of freedom for a test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Df {
    Finite(f64),
    Infinite,
    Permutation,
}

/// Result of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub df: Df,
    pub p_two_sided: f64,
    pub method: String,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Raw paired-t statistic sqrt(n) * mean(d) / sd(d).
pub fn paired_t_stat(d: &[f64]) -> Result<f64> {
    if d.len() < 2 {
        return Err(Error::Parameter(format!(
            "paired t needs at least 2 differences, got {}",
            d.len()
        )));
    }
    let var = variance(d);
    if var <= 0.0 {
        return Err(Error::DegenerateVariance(
            "all differences are equal".into(),
        ));
    }
    Ok((d.len() as f64).sqrt() * mean(d) / var.sqrt())
}

/// Two-sided paired t-test with a t(n-1) reference.
pub fn paired_t(d: &[f64]) -> Result<TestOutcome> {
    let t = paired_t_stat(d)?;
    let df = (d.len() - 1) as f64;
    Ok(TestOutcome {
        statistic: t,
        df: Df::Finite(df),
        p_two_sided: two_sided_t_p(t, df)?,
        method: "paired-t".into(),
    })
}

/// Welch statistic (mean(g1) - mean(g2)) / sqrt(s1^2/n2 + s2^2/n3).
pub fn welch_stat(g1: &[f64], g2: &[f64]) -> Result<f64> {
    if g1.len() < 2 || g2.len() < 2 {
        return Err(Error::Parameter(format!(
            "welch needs both groups of size >= 2, got {} and {}",
            g1.len(),
            g2.len()
        )));
    }
    let v1 = variance(g1);
    let v2 = variance(g2);
    if v1 <= 0.0 && v2 <= 0.0 {
        return Err(Error::DegenerateVariance(
            "both group variances are zero".into(),
        ));
    }
    Ok((mean(g1) - mean(g2)) / (v1 / g1.len() as f64 + v2 / g2.len() as f64).sqrt())
}

/// Two-sided p-value from a t reference with (possibly fractional) df.
pub fn two_sided_t_p(statistic: f64, df: f64) -> Result<f64> {
    let upper = 1.0 - t_cdf(statistic.abs(), df)?;
    Ok((2.0 * upper).min(1.0))
}

/// Student-t distribution function via the regularized incomplete beta
/// function; accurate to about 1e-10 over df in [1, 1e4], |x| <= 50.
pub fn t_cdf(x: f64, df: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 {
        return Err(Error::Parameter(format!("df = {df} must be positive")));
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    let z = df / (df + x * x);
    let tail = 0.5 * inc_beta(0.5 * df, 0.5, z);
    Ok(if x > 0.0 { 1.0 - tail } else { tail })
}

/// Sign-aware one-sided p-value from a two-sided one: p/2 when the statistic
/// points in the alternative's direction, 1 - p/2 otherwise, 0.5 at sign 0.
/// `literal` instead applies the transform max{p/2, 1 - p/2} regardless of
/// the statistic's sign.
pub fn one_sided_from_two(
    p_two: f64,
    statistic_sign: std::cmp::Ordering,
    direction: Direction,
    literal: bool,
) -> f64 {
    if literal {
        return (p_two / 2.0).max(1.0 - p_two / 2.0);
    }
    use std::cmp::Ordering::*;
    match (statistic_sign, direction) {
        (Equal, _) => 0.5,
        (Greater, Direction::Greater) | (Less, Direction::Less) => p_two / 2.0,
        _ => 1.0 - p_two / 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Greater,
    Less,
}

// --- special functions -------------------------------------------------

/// Lanczos log-gamma, g = 7, n = 9 coefficients.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = 0.999_999_999_999_809_9;
    for (i, c) in COEF.iter().enumerate() {
        a += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta I_x(a, b), continued fraction (modified
/// Lentz) with the symmetry switch at x = (a+1)/(a+b+2).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-14;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn paired_t_symmetric_data() {
        let out = paired_t(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_relative_eq!(out.p_two_sided, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn paired_t_hand_case() {
        // d = (1,2,3): mean 2, sd 1 -> sqrt(3)*2
        let out = paired_t(&[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(out.statistic, 3.0f64.sqrt() * 2.0, epsilon = 1e-12);
        assert_eq!(out.df, Df::Finite(2.0));
    }

    #[test]
    fn paired_t_zero_variance_errors() {
        assert!(matches!(
            paired_t(&[5.0, 5.0, 5.0]).unwrap_err(),
            Error::DegenerateVariance(_)
        ));
    }

    #[test]
    fn welch_hand_case() {
        // g1 = (0,2), g2 = (1,3): (1-2)/sqrt(2/2 + 2/2)
        let t = welch_stat(&[0.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_relative_eq!(t, -1.0 / 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn welch_identical_groups_zero() {
        assert_eq!(welch_stat(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn welch_monotone_in_shift() {
        let g2 = [0.3, -0.4, 1.1, 0.8];
        let mut last = f64::NEG_INFINITY;
        for i in 0..20 {
            let c = -2.0 + i as f64 * 0.25;
            let g1: Vec<f64> = [0.1, 0.9, -0.5, 0.4].iter().map(|v| v + c).collect();
            let t = welch_stat(&g1, &g2).unwrap();
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn t_cdf_at_zero() {
        for df in [0.5, 1.0, 3.3, 100.0] {
            assert_eq!(t_cdf(0.0, df).unwrap(), 0.5);
        }
    }

    #[test]
    fn t_cdf_normal_limit() {
        // Phi(1) = 0.8413447460685429
        assert!((t_cdf(1.0, 1e6).unwrap() - 0.841345).abs() < 1e-4);
    }

    #[test]
    fn t_cdf_table_value() {
        // 97.5% quantile of t_9 is 2.262157...
        assert!((t_cdf(2.262, 9.0).unwrap() - 0.975).abs() < 5e-4);
    }

    #[test]
    fn t_cdf_symmetry_and_monotone() {
        for df in [1.0, 2.5, 9.0, 120.0] {
            let mut last = 0.0;
            for i in 0..101 {
                let x = -5.0 + 0.1 * i as f64;
                let c = t_cdf(x, df).unwrap();
                assert!((c + t_cdf(-x, df).unwrap() - 1.0).abs() < 1e-12);
                assert!(c >= last);
                last = c;
            }
        }
    }

    #[test]
    fn t_cdf_rejects_bad_df() {
        assert!(t_cdf(1.0, 0.0).is_err());
        assert!(t_cdf(1.0, -2.0).is_err());
    }

    #[test]
    fn one_sided_transforms() {
        use std::cmp::Ordering::*;
        assert_relative_eq!(
            one_sided_from_two(0.10, Greater, Direction::Greater, false),
            0.05
        );
        assert_relative_eq!(
            one_sided_from_two(0.10, Less, Direction::Greater, false),
            0.95
        );
        assert_eq!(one_sided_from_two(0.10, Equal, Direction::Greater, false), 0.5);
        // literal max-form
        assert_relative_eq!(
            one_sided_from_two(0.10, Greater, Direction::Greater, true),
            0.95
        );
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(5.0), 24.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn paired_t_contrast_and_scale_invariance() {
        let d = [0.4, -1.2, 2.2, 0.7, -0.3];
        let t0 = paired_t_stat(&d).unwrap();
        // scaling differences by c > 0 leaves the statistic unchanged
        let scaled: Vec<f64> = d.iter().map(|v| v * 3.5).collect();
        assert_relative_eq!(paired_t_stat(&scaled).unwrap(), t0, epsilon = 1e-12);
        // adding the same constant to both components leaves d unchanged exactly
        let shifted: Vec<f64> = d.iter().map(|v| (v + 7.0) - 7.0).collect();
        assert_eq!(paired_t_stat(&shifted).unwrap(), t0);
    }
}
