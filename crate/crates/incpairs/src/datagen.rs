//! Bivariate matched-pairs data generation: X_j = S e_j + mu where S is the
//! symmetric square root of the chosen 2x2 covariance matrix and the residual
//! components e_j are i.i.d. standardized draws (mean 0, variance 1).

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::PairedSample;
use crate::error::{Error, Result};

/// Standardized residual law; every variant has mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualLaw {
    StandardNormal,
    /// Exp(1) - 1.
    StandardizedExponential,
    /// (chi2_30 - 30) / sqrt(60).
    StandardizedChiSquared,
    /// Asymmetric Laplace with skew kappa, standardized analytically.
    StandardizedAsymmetricLaplace { kappa: f64 },
}

impl ResidualLaw {
    pub fn asymmetric_laplace_default() -> Self {
        ResidualLaw::StandardizedAsymmetricLaplace { kappa: 2.0 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ResidualLaw::StandardNormal => "normal",
            ResidualLaw::StandardizedExponential => "exponential",
            ResidualLaw::StandardizedChiSquared => "chisq",
            ResidualLaw::StandardizedAsymmetricLaplace { .. } => "laplace",
        }
    }
}

const CHI_SQ_DF: f64 = 30.0;

/// One draw from the standardized law.
pub fn sample_residual<R: Rng>(law: ResidualLaw, rng: &mut R) -> f64 {
    match law {
        ResidualLaw::StandardNormal => StandardNormal.sample(rng),
        ResidualLaw::StandardizedExponential => {
            let e: f64 = Exp1.sample(rng);
            e - 1.0
        }
        ResidualLaw::StandardizedChiSquared => {
            // chi2_df = Gamma(df/2, scale 2)
            let g = Gamma::new(CHI_SQ_DF / 2.0, 2.0).expect("valid gamma");
            (g.sample(rng) - CHI_SQ_DF) / (2.0 * CHI_SQ_DF).sqrt()
        }
        ResidualLaw::StandardizedAsymmetricLaplace { kappa } => {
            // W = E1/kappa - kappa*E2 with E1, E2 ~ Exp(1) has
            // mean 1/kappa - kappa and variance 1/kappa^2 + kappa^2.
            let e1: f64 = Exp1.sample(rng);
            let e2: f64 = Exp1.sample(rng);
            let w = e1 / kappa - kappa * e2;
            let mean = 1.0 / kappa - kappa;
            let sd = (1.0 / (kappa * kappa) + kappa * kappa).sqrt();
            (w - mean) / sd
        }
    }
}

/// 2x2 covariance setting: homoscedastic Sigma1 = [[1, rho], [rho, 1]] or
/// heteroscedastic Sigma2 = [[1, 2 rho], [2 rho, 4]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub variant: SigmaVariant,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaVariant {
    Sigma1,
    Sigma2,
}

impl SigmaVariant {
    pub fn label(&self) -> &'static str {
        match self {
            SigmaVariant::Sigma1 => "sigma1",
            SigmaVariant::Sigma2 => "sigma2",
        }
    }
}

impl CovarianceSpec {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        match self.variant {
            SigmaVariant::Sigma1 => [[1.0, self.rho], [self.rho, 1.0]],
            SigmaVariant::Sigma2 => [[1.0, 2.0 * self.rho], [2.0 * self.rho, 4.0]],
        }
    }
}

/// Mean shift mu = [delta, 0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub delta: f64,
}

/// Symmetric positive-definite square root of the 2x2 covariance matrix.
///
/// Uses the closed form S = (Sigma + sqrt(det) I) / sqrt(tr + 2 sqrt(det)),
/// valid for any SPD 2x2 matrix.
pub fn matrix_sqrt(spec: &CovarianceSpec) -> Result<[[f64; 2]; 2]> {
    if spec.rho.abs() >= 1.0 {
        return Err(Error::Parameter(format!(
            "correlation rho = {} must satisfy |rho| < 1",
            spec.rho
        )));
    }
    let m = spec.matrix();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let tr = m[0][0] + m[1][1];
    let s = det.sqrt();
    let t = (tr + 2.0 * s).sqrt();
    Ok([
        [(m[0][0] + s) / t, m[0][1] / t],
        [m[1][0] / t, (m[1][1] + s) / t],
    ])
}

/// Generate n i.i.d. fully observed pairs X_j = S e_j + [delta, 0].
pub fn generate<R: Rng>(
    n: usize,
    law: ResidualLaw,
    cov: &CovarianceSpec,
    shift: &ShiftSpec,
    rng: &mut R,
) -> Result<PairedSample> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let s = matrix_sqrt(cov)?;
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let e1 = sample_residual(law, rng);
        let e2 = sample_residual(law, rng);
        let x1 = s[0][0] * e1 + s[0][1] * e2 + shift.delta;
        let x2 = s[1][0] * e1 + s[1][1] * e2;
        pairs.push((x1, x2));
    }
    PairedSample::from_complete(pairs)
}
