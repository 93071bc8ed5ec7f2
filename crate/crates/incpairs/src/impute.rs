//! The four imputation engines over an n x p matrix with missing cells:
//! Bayesian linear regression (norm), predictive mean matching (pmm),
//! iterative forest mean imputation (rf-mi) and chained forest donor draws
//! (rf-mice). `multiple_impute` produces m completed datasets.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CompletedDataset, PairedSample};
use crate::error::{Error, Result};
use crate::forest::{self, ForestParams};

pub const DEFAULT_CHAINED_SWEEPS: usize = 5;
pub const DEFAULT_PMM_DONORS: usize = 5;
pub const DEFAULT_RF_MI_MAX_ITER: usize = 10;

/// Which engine to run, with its tuning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ImputationMethod {
    Norm { sweeps: usize },
    Pmm { donors: usize, sweeps: usize },
    RfMi { forest: ForestParams, max_iter: usize },
    RfMice { forest: ForestParams, sweeps: usize },
}

impl ImputationMethod {
    pub fn norm() -> Self {
        ImputationMethod::Norm {
            sweeps: DEFAULT_CHAINED_SWEEPS,
        }
    }

    pub fn pmm() -> Self {
        ImputationMethod::Pmm {
            donors: DEFAULT_PMM_DONORS,
            sweeps: DEFAULT_CHAINED_SWEEPS,
        }
    }

    pub fn rf_mi(forest: ForestParams) -> Self {
        ImputationMethod::RfMi {
            forest,
            max_iter: DEFAULT_RF_MI_MAX_ITER,
        }
    }

    pub fn rf_mice(forest: ForestParams) -> Self {
        ImputationMethod::RfMice {
            forest,
            sweeps: DEFAULT_CHAINED_SWEEPS,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ImputationMethod::Norm { .. } => "norm",
            ImputationMethod::Pmm { .. } => "pmm",
            ImputationMethod::RfMi { .. } => "rf-mi",
            ImputationMethod::RfMice { .. } => "rf-mice",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ImputationMethod::Pmm { donors, .. } if *donors == 0 => {
                Err(Error::Parameter("pmm donor count must be >= 1".into()))
            }
            ImputationMethod::RfMi { max_iter, .. } if *max_iter == 0 => {
                Err(Error::Parameter("rf-mi max_iter must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Column-major working matrix with per-cell missingness.
#[derive(Debug, Clone)]
struct WorkMatrix {
    cols: Vec<Vec<f64>>,
    miss: Vec<Vec<bool>>,
}

impl WorkMatrix {
    fn from_sample(sample: &PairedSample) -> Self {
        let n = sample.n();
        let q = sample.aux_width();
        let mut cols = vec![vec![f64::NAN; n]; 2 + q];
        let mut miss = vec![vec![false; n]; 2 + q];
        for (i, r) in sample.rows().iter().enumerate() {
            match r.first {
                Some(v) => cols[0][i] = v,
                None => miss[0][i] = true,
            }
            match r.second {
                Some(v) => cols[1][i] = v,
                None => miss[1][i] = true,
            }
        }
        if let Some(aux) = sample.aux() {
            for (i, row) in aux.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    cols[2 + j][i] = v;
                }
            }
        }
        WorkMatrix { cols, miss }
    }

    fn n(&self) -> usize {
        self.cols[0].len()
    }

    fn p(&self) -> usize {
        self.cols.len()
    }

    /// Columns with missing cells, ascending missing count, ties by index.
    fn visit_order(&self) -> Vec<usize> {
        let mut with_counts: Vec<(usize, usize)> = self
            .miss
            .iter()
            .enumerate()
            .filter_map(|(j, m)| {
                let c = m.iter().filter(|&&b| b).count();
                (c > 0).then_some((c, j))
            })
            .collect();
        with_counts.sort();
        with_counts.into_iter().map(|(_, j)| j).collect()
    }

    fn observed_values(&self, j: usize) -> Vec<f64> {
        self.cols[j]
            .iter()
            .zip(&self.miss[j])
            .filter_map(|(&v, &m)| (!m).then_some(v))
            .collect()
    }

    fn validate_for_imputation(&self) -> Result<()> {
        for (j, m) in self.miss.iter().enumerate() {
            let obs = m.iter().filter(|&&b| !b).count();
            if obs < 2 && m.len() != obs {
                return Err(Error::Validation(format!(
                    "column {j} has {obs} observed values; need at least 2"
                )));
            }
        }
        Ok(())
    }

    /// Predictor rows (all columns except `target`) for the given row set.
    fn predictor_rows(&self, target: usize, rows: &[usize]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|&i| {
                (0..self.p())
                    .filter(|&j| j != target)
                    .map(|j| self.cols[j][i])
                    .collect()
            })
            .collect()
    }

    /// Predictor columns (column-major) over the given row set.
    fn predictor_cols(&self, target: usize, rows: &[usize]) -> Vec<Vec<f64>> {
        (0..self.p())
            .filter(|&j| j != target)
            .map(|j| rows.iter().map(|&i| self.cols[j][i]).collect())
            .collect()
    }

    fn obs_mis_rows(&self, j: usize) -> (Vec<usize>, Vec<usize>) {
        let mut obs = Vec::new();
        let mut mis = Vec::new();
        for (i, &m) in self.miss[j].iter().enumerate() {
            if m {
                mis.push(i);
            } else {
                obs.push(i);
            }
        }
        (obs, mis)
    }
}

// --- linear engines -----------------------------------------------------

struct RegressionDraw {
    beta_hat: DVector<f64>,
    beta_star: DVector<f64>,
    sigma_star: f64,
}

/// Least squares plus a posterior parameter draw: sigma*^2 from the scaled
/// inverse-chi-squared posterior and beta* ~ N(beta_hat, sigma*^2 (X'X+eI)^-1).
/// A small ridge e = 1e-8 tr(X'X)/p keeps near-collinear designs workable.
fn bayes_regression<R: Rng>(
    x_obs: &[Vec<f64>],
    y_obs: &[f64],
    rng: &mut R,
) -> Result<RegressionDraw> {
    let n_obs = y_obs.len();
    let p_design = x_obs.first().map_or(1, |r| r.len()) + 1; // + intercept
    if n_obs < p_design + 2 {
        return Err(Error::Rank(format!(
            "{n_obs} observed rows for a design with {p_design} columns; need at least {}",
            p_design + 2
        )));
    }
    let design = DMatrix::from_fn(n_obs, p_design, |i, j| {
        if j == 0 {
            1.0
        } else {
            x_obs[i][j - 1]
        }
    });
    let y = DVector::from_column_slice(y_obs);
    let xtx = design.transpose() * &design;
    let eps = 1e-8 * xtx.trace() / p_design as f64;
    let a = &xtx + DMatrix::identity(p_design, p_design) * eps;
    let chol = Cholesky::new(a)
        .ok_or_else(|| Error::Rank("design matrix not positive definite".into()))?;
    let xty = design.transpose() * &y;
    let beta_hat = chol.solve(&xty);

    let resid = &y - &design * &beta_hat;
    let sse = resid.dot(&resid).max(0.0);
    let df = (n_obs - p_design) as f64;
    let chi2 = Gamma::new(df / 2.0, 2.0)
        .expect("valid gamma")
        .sample(rng)
        .max(1e-300);
    let sigma_star = (sse / chi2).sqrt();

    let z = DVector::from_fn(p_design, |_, _| StandardNormal.sample(rng));
    // Cov(beta*) = sigma*^2 (LL')^-1, so beta* = beta_hat + sigma* L'^-1 z
    let w = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Rank("triangular solve failed".into()))?;
    let beta_star = &beta_hat + w * sigma_star;
    Ok(RegressionDraw {
        beta_hat,
        beta_star,
        sigma_star,
    })
}

fn predict(beta: &DVector<f64>, x: &[f64]) -> f64 {
    beta[0] + x.iter().zip(beta.iter().skip(1)).map(|(a, b)| a * b).sum::<f64>()
}

/// Bayesian linear regression draw for the missing rows of a target column.
pub fn norm_draw<R: Rng>(
    y_obs: &[f64],
    x_obs: &[Vec<f64>],
    x_mis: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let draw = bayes_regression(x_obs, y_obs, rng)?;
    Ok(x_mis
        .iter()
        .map(|x| {
            let z: f64 = StandardNormal.sample(rng);
            predict(&draw.beta_star, x) + draw.sigma_star * z
        })
        .collect())
}

/// Predictive mean matching (type-1): predictions for observed rows use
/// beta_hat, for missing rows beta*, and each missing row borrows the
/// observed value of one of its k nearest-prediction donors.
pub fn pmm_draw<R: Rng>(
    y_obs: &[f64],
    x_obs: &[Vec<f64>],
    x_mis: &[Vec<f64>],
    k: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if y_obs.len() < k {
        return Err(Error::Parameter(format!(
            "{} observed rows but {k} donors requested",
            y_obs.len()
        )));
    }
    let draw = bayes_regression(x_obs, y_obs, rng)?;
    let yhat_obs: Vec<f64> = x_obs.iter().map(|x| predict(&draw.beta_hat, x)).collect();
    let mut out = Vec::with_capacity(x_mis.len());
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(yhat_obs.len());
    for x in x_mis {
        let target = predict(&draw.beta_star, x);
        dist.clear();
        dist.extend(
            yhat_obs
                .iter()
                .enumerate()
                .map(|(i, &v)| ((v - target).abs(), i)),
        );
        dist.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let donor = dist[rng.random_range(0..k)].1;
        out.push(y_obs[donor]);
    }
    Ok(out)
}

// --- chained-equations driver for norm and pmm --------------------------

enum LinearKind {
    Norm,
    Pmm { donors: usize },
}

fn chained_linear<R: Rng>(
    work: &mut WorkMatrix,
    kind: &LinearKind,
    sweeps: usize,
    rng: &mut R,
) -> Result<()> {
    let order = work.visit_order();
    // initialize each missing cell with a uniform random observed value
    for &j in &order {
        let obs = work.observed_values(j);
        let (_, mis) = work.obs_mis_rows(j);
        for i in mis {
            work.cols[j][i] = obs[rng.random_range(0..obs.len())];
        }
    }
    for _ in 0..sweeps {
        for &j in &order {
            let (obs, mis) = work.obs_mis_rows(j);
            let y_obs: Vec<f64> = obs.iter().map(|&i| work.cols[j][i]).collect();
            let x_obs = work.predictor_rows(j, &obs);
            let x_mis = work.predictor_rows(j, &mis);
            let imputed = match kind {
                LinearKind::Norm => norm_draw(&y_obs, &x_obs, &x_mis, rng)?,
                LinearKind::Pmm { donors } => pmm_draw(&y_obs, &x_obs, &x_mis, *donors, rng)?,
            };
            for (&i, v) in mis.iter().zip(imputed) {
                work.cols[j][i] = v;
            }
        }
    }
    Ok(())
}

// --- forest engines ------------------------------------------------------

/// One missForest run: mean initialization, then sweeps of forest mean
/// prediction per incomplete column until the normalized squared change
/// over imputed cells first increases (the previous sweep's matrix is
/// returned) or `max_iter` is hit. Returns the change trace.
fn rf_mi_run<R: Rng>(
    work: &mut WorkMatrix,
    params: &ForestParams,
    max_iter: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let order = work.visit_order();
    if order.is_empty() {
        return Ok(Vec::new());
    }
    for &j in &order {
        let obs = work.observed_values(j);
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let (_, mis) = work.obs_mis_rows(j);
        for i in mis {
            work.cols[j][i] = mean;
        }
    }

    let snapshot = |w: &WorkMatrix| -> Vec<f64> {
        order
            .iter()
            .flat_map(|&j| {
                w.miss[j]
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m)
                    .map(move |(i, _)| w.cols[j][i])
            })
            .collect()
    };

    let mut prev_cells = snapshot(work);
    let mut prev_cols = work.cols.clone();
    let mut prev_delta = f64::INFINITY;
    let mut trace = Vec::new();
    for _ in 0..max_iter {
        for &j in &order {
            let (obs, mis) = work.obs_mis_rows(j);
            let y_obs: Vec<f64> = obs.iter().map(|&i| work.cols[j][i]).collect();
            let x_cols = work.predictor_cols(j, &obs);
            let f = forest::fit(&x_cols, &y_obs, params, rng)?;
            let x_mis = work.predictor_rows(j, &mis);
            for (&i, x) in mis.iter().zip(&x_mis) {
                work.cols[j][i] = f.predict_mean(x);
            }
        }
        let cells = snapshot(work);
        let num: f64 = cells
            .iter()
            .zip(&prev_cells)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let den: f64 = cells.iter().map(|v| v * v).sum();
        let delta = if den > 0.0 { num / den } else { num };
        trace.push(delta);
        if delta > prev_delta {
            work.cols = prev_cols; // revert to the previous sweep
            return Ok(trace);
        }
        if delta == 0.0 {
            return Ok(trace);
        }
        prev_delta = delta;
        prev_cells = cells;
        prev_cols = work.cols.clone();
    }
    Ok(trace)
}

/// Chained forest donor imputation: random-observed initialization, then
/// `sweeps` rounds where every missing cell takes a donor drawn from the
/// leaf of a freshly fitted forest.
fn rf_mice_run<R: Rng>(
    work: &mut WorkMatrix,
    params: &ForestParams,
    sweeps: usize,
    rng: &mut R,
) -> Result<()> {
    let order = work.visit_order();
    for &j in &order {
        let obs = work.observed_values(j);
        let (_, mis) = work.obs_mis_rows(j);
        for i in mis {
            work.cols[j][i] = obs[rng.random_range(0..obs.len())];
        }
    }
    for _ in 0..sweeps {
        for &j in &order {
            let (obs, mis) = work.obs_mis_rows(j);
            let y_obs: Vec<f64> = obs.iter().map(|&i| work.cols[j][i]).collect();
            let x_cols = work.predictor_cols(j, &obs);
            let f = forest::fit(&x_cols, &y_obs, params, rng)?;
            let x_mis = work.predictor_rows(j, &mis);
            for (&i, x) in mis.iter().zip(&x_mis) {
                work.cols[j][i] = f.donor_draw(x, rng);
            }
        }
    }
    Ok(())
}

// --- multiple imputation -------------------------------------------------

/// One engine run plus its rf-mi convergence trace (empty for the others).
pub struct ImputationDraw {
    pub dataset: CompletedDataset,
    pub rf_mi_trace: Vec<f64>,
}

fn run_engine<R: Rng>(
    sample: &PairedSample,
    method: &ImputationMethod,
    rng: &mut R,
) -> Result<ImputationDraw> {
    let mut work = WorkMatrix::from_sample(sample);
    work.validate_for_imputation()?;
    let mut trace = Vec::new();
    if !work.visit_order().is_empty() {
        match method {
            ImputationMethod::Norm { sweeps } => {
                chained_linear(&mut work, &LinearKind::Norm, *sweeps, rng)?
            }
            ImputationMethod::Pmm { donors, sweeps } => chained_linear(
                &mut work,
                &LinearKind::Pmm { donors: *donors },
                *sweeps,
                rng,
            )?,
            ImputationMethod::RfMi { forest, max_iter } => {
                trace = rf_mi_run(&mut work, forest, *max_iter, rng)?
            }
            ImputationMethod::RfMice { forest, sweeps } => {
                rf_mice_run(&mut work, forest, *sweeps, rng)?
            }
        }
    }
    let n = work.n();
    let p = work.p();
    let matrix = (0..n)
        .map(|i| (0..p).map(|j| work.cols[j][i]).collect())
        .collect();
    let imputed_mask = (0..n)
        .map(|i| (0..p).map(|j| work.miss[j][i]).collect())
        .collect();
    Ok(ImputationDraw {
        dataset: CompletedDataset {
            matrix,
            imputed_mask,
        },
        rf_mi_trace: trace,
    })
}

/// Run the chosen engine m times on independent sub-streams.
pub fn multiple_impute_detailed<R: Rng>(
    sample: &PairedSample,
    method: &ImputationMethod,
    m: usize,
    rng: &mut R,
) -> Result<Vec<ImputationDraw>> {
    if m == 0 {
        return Err(Error::Parameter("m must be >= 1".into()));
    }
    method.validate()?;
    (0..m)
        .map(|_| {
            let mut sub = ChaCha8Rng::seed_from_u64(rng.random());
            run_engine(sample, method, &mut sub)
        })
        .collect()
}

/// Like [`multiple_impute_detailed`] but returning only the datasets.
pub fn multiple_impute<R: Rng>(
    sample: &PairedSample,
    method: &ImputationMethod,
    m: usize,
    rng: &mut R,
) -> Result<Vec<CompletedDataset>> {
    Ok(multiple_impute_detailed(sample, method, m, rng)?
        .into_iter()
        .map(|d| d.dataset)
        .collect())
}
