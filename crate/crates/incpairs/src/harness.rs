//! Monte Carlo simulation driver: per-cell rejection rates and NRMSE over
//! configurable grids, CSV analysis of real datasets, and reproduction
//! presets with published reference values.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ingest_csv, inject_mcar, split, CsvSchema, MissingSpec};
use crate::datagen::{generate, CovarianceSpec, ResidualLaw, ShiftSpec, SigmaVariant};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::impute::ImputationMethod;
use crate::metrics::nrmse;
use crate::perm::{permute_and_test, PermutationConfig};
use crate::pool::{mi_t_test, pool_and_test};
use crate::stats::paired_t;

/// Bump when a change invalidates cached cell results.
pub const CODE_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Tml,
    Norm,
    Pmm,
    RfMi,
    RfMice,
}

impl MethodName {
    pub const ALL: [MethodName; 5] = [
        MethodName::Tml,
        MethodName::Norm,
        MethodName::Pmm,
        MethodName::RfMi,
        MethodName::RfMice,
    ];

    pub const IMPUTATION: [MethodName; 4] = [
        MethodName::Norm,
        MethodName::Pmm,
        MethodName::RfMi,
        MethodName::RfMice,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MethodName::Tml => "tml",
            MethodName::Norm => "norm",
            MethodName::Pmm => "pmm",
            MethodName::RfMi => "rf-mi",
            MethodName::RfMice => "rf-mice",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tml" | "t_ml" => Ok(MethodName::Tml),
            "norm" => Ok(MethodName::Norm),
            "pmm" => Ok(MethodName::Pmm),
            "rf-mi" | "rfmi" | "rf_mi" => Ok(MethodName::RfMi),
            "rf-mice" | "rfmice" | "rf_mice" => Ok(MethodName::RfMice),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }

    fn imputation_method(&self, tuning: &Tuning) -> Option<ImputationMethod> {
        match self {
            MethodName::Tml => None,
            MethodName::Norm => Some(ImputationMethod::Norm {
                sweeps: tuning.chained_sweeps,
            }),
            MethodName::Pmm => Some(ImputationMethod::Pmm {
                donors: tuning.pmm_donors,
                sweeps: tuning.chained_sweeps,
            }),
            MethodName::RfMi => Some(ImputationMethod::RfMi {
                forest: tuning.forest,
                max_iter: tuning.rf_mi_max_iter,
            }),
            MethodName::RfMice => Some(ImputationMethod::RfMice {
                forest: tuning.forest,
                sweeps: tuning.chained_sweeps,
            }),
        }
    }
}

/// Shared engine tuning carried by grid configs and cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tuning {
    pub forest: ForestParams,
    pub pmm_donors: usize,
    pub chained_sweeps: usize,
    pub rf_mi_max_iter: usize,
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning {
            forest: ForestParams::default(),
            pmm_donors: crate::impute::DEFAULT_PMM_DONORS,
            chained_sweeps: crate::impute::DEFAULT_CHAINED_SWEEPS,
            rf_mi_max_iter: crate::impute::DEFAULT_RF_MI_MAX_ITER,
        }
    }
}

/// One grid point of the simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationCell {
    pub law: ResidualLaw,
    pub rho: f64,
    pub sigma: SigmaVariant,
    pub sizes: (usize, usize, usize),
    pub delta: f64,
    pub method: MethodName,
    pub n_sim: usize,
    pub b_perm: usize,
    pub m: usize,
    pub seed: u64,
    pub alpha: f64,
    pub tuning: Tuning,
}

impl SimulationCell {
    /// Content hash used as the cache key; includes the code version tag.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(CODE_VERSION.as_bytes());
        h.update(serde_json::to_vec(self).expect("serializable cell"));
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self) -> Result<()> {
        let (n1, n2, n3) = self.sizes;
        if n1 + n2 + n3 == 0 {
            return Err(Error::Parameter("empty sample sizes".into()));
        }
        if self.rho.abs() >= 1.0 {
            return Err(Error::Parameter(format!("|rho| = {} >= 1", self.rho.abs())));
        }
        if self.n_sim == 0 {
            return Err(Error::Parameter("n_sim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Parameter(format!("alpha {} outside (0,1)", self.alpha)));
        }
        if self.method != MethodName::Tml && self.m < 2 {
            return Err(Error::Parameter("imputation methods need m >= 2".into()));
        }
        Ok(())
    }

    /// Replicate RNG seed: a counter-based split of the cell identity, so
    /// parallel and serial runs agree.
    fn replicate_rng(&self, replicate: usize) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.law.label().as_bytes());
        h.update(self.rho.to_le_bytes());
        h.update(self.sigma.label().as_bytes());
        h.update(self.delta.to_le_bytes());
        h.update(self.method.label().as_bytes());
        let digest = h.finalize();
        let mut rng = ChaCha8Rng::from_seed(digest.into());
        rng.set_stream(replicate as u64 + 1);
        rng
    }
}

/// Aggregated result of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub rejection_rate: f64,
    pub mc_se: f64,
    pub nrmse_mean: Option<f64>,
    pub degenerate_count: usize,
    pub seconds: f64,
}

enum ReplicateOutcome {
    Tested { rejected: bool, nrmse: Option<f64> },
    Degenerate,
}

fn run_replicate(cell: &SimulationCell, replicate: usize) -> Result<ReplicateOutcome> {
    let (n1, n2, n3) = cell.sizes;
    let n = n1 + n2 + n3;
    let mut rng = cell.replicate_rng(replicate);
    let full = generate(
        n,
        cell.law,
        &CovarianceSpec {
            variant: cell.sigma,
            rho: cell.rho,
        },
        &ShiftSpec { delta: cell.delta },
        &mut rng,
    )?;
    let masked = inject_mcar(&full, MissingSpec::FixedCounts { n2, n3 }, &mut rng)?;

    let outcome = match cell.method.imputation_method(&cell.tuning) {
        None => {
            let cfg = PermutationConfig {
                b: cell.b_perm,
                a_override: None,
                seed: rng.random(),
            };
            match permute_and_test(&masked, &cfg) {
                Ok(o) => ReplicateOutcome::Tested {
                    rejected: o.p_two_sided <= cell.alpha,
                    nrmse: None,
                },
                Err(Error::DegenerateVariance(_)) => ReplicateOutcome::Degenerate,
                Err(e) => return Err(e),
            }
        }
        Some(method) => {
            let draws = crate::impute::multiple_impute(&masked, &method, cell.m, &mut rng)?;
            match pool_and_test(&draws, method.label()) {
                Ok(o) => {
                    let report = nrmse(&full, &masked, &draws)?;
                    ReplicateOutcome::Tested {
                        rejected: o.p_two_sided <= cell.alpha,
                        nrmse: Some(report.value),
                    }
                }
                Err(Error::DegenerateVariance(_)) => ReplicateOutcome::Degenerate,
                Err(e) => return Err(e),
            }
        }
    };
    Ok(outcome)
}

/// Evaluate one grid cell: replicates are independent given their derived
/// RNG streams, so the result does not depend on thread scheduling.
pub fn run_cell(cell: &SimulationCell) -> Result<CellResult> {
    cell.validate()?;
    let start = Instant::now();
    let outcomes: Vec<ReplicateOutcome> = (0..cell.n_sim)
        .into_par_iter()
        .map(|i| run_replicate(cell, i))
        .collect::<Result<_>>()?;

    let mut rejected = 0usize;
    let mut degenerate = 0usize;
    let mut nrmse_sum = 0.0;
    let mut nrmse_count = 0usize;
    for o in &outcomes {
        match o {
            ReplicateOutcome::Tested { rejected: r, nrmse } => {
                if *r {
                    rejected += 1;
                }
                if let Some(v) = nrmse {
                    nrmse_sum += v;
                    nrmse_count += 1;
                }
            }
            ReplicateOutcome::Degenerate => degenerate += 1,
        }
    }
    if degenerate * 100 > cell.n_sim {
        return Err(Error::Validation(format!(
            "{degenerate} of {} replicates degenerate (> 1%): broken configuration",
            cell.n_sim
        )));
    }
    let evaluated = cell.n_sim - degenerate;
    let rate = rejected as f64 / evaluated as f64;
    Ok(CellResult {
        rejection_rate: rate,
        mc_se: (rate * (1.0 - rate) / evaluated as f64).sqrt(),
        nrmse_mean: (nrmse_count > 0).then(|| nrmse_sum / nrmse_count as f64),
        degenerate_count: degenerate,
        seconds: start.elapsed().as_secs_f64(),
    })
}

// --- grid configuration ---------------------------------------------------

/// JSON grid configuration; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub laws: Vec<ResidualLaw>,
    pub rhos: Vec<f64>,
    pub sigma_variants: Vec<SigmaVariant>,
    pub sizes: Vec<(usize, usize, usize)>,
    pub deltas: Vec<f64>,
    pub methods: Vec<MethodName>,
    pub n_sim: usize,
    #[serde(rename = "B")]
    pub b_perm: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub tuning: Tuning,
}

fn default_alpha() -> f64 {
    0.05
}

impl GridConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        // report every unknown key, not just the first
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        if let Some(obj) = value.as_object() {
            const KNOWN: [&str; 12] = [
                "laws",
                "rhos",
                "sigma_variants",
                "sizes",
                "deltas",
                "methods",
                "n_sim",
                "B",
                "m",
                "seed",
                "alpha",
                "tuning",
            ];
            let unknown: Vec<&str> = obj
                .keys()
                .map(String::as_str)
                .filter(|k| !KNOWN.contains(k))
                .collect();
            if !unknown.is_empty() {
                return Err(Error::Config(format!(
                    "unknown config keys: {}",
                    unknown.join(", ")
                )));
            }
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn cells(&self) -> Vec<SimulationCell> {
        let mut out = Vec::new();
        for &law in &self.laws {
            for &rho in &self.rhos {
                for &sigma in &self.sigma_variants {
                    for &sizes in &self.sizes {
                        for &delta in &self.deltas {
                            for &method in &self.methods {
                                out.push(SimulationCell {
                                    law,
                                    rho,
                                    sigma,
                                    sizes,
                                    delta,
                                    method,
                                    n_sim: self.n_sim,
                                    b_perm: self.b_perm,
                                    m: self.m,
                                    seed: self.seed,
                                    alpha: self.alpha,
                                    tuning: self.tuning,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Evaluate a grid, optionally reusing cached per-cell results keyed by the
/// cell hash, and write one long-format CSV row per cell.
pub fn run_grid(
    config: &GridConfig,
    out_path: &Path,
    cache_dir: Option<&Path>,
) -> Result<Vec<(SimulationCell, CellResult)>> {
    let cells = config.cells();
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        let cached = cache_dir.and_then(|dir| load_cached(dir, &cell.hash()));
        let result = match cached {
            Some(r) => r,
            None => {
                let r = run_cell(&cell)?;
                if let Some(dir) = cache_dir {
                    store_cached(dir, &cell.hash(), &r)?;
                }
                r
            }
        };
        results.push((cell, result));
    }
    write_results_csv(&results, out_path)?;
    Ok(results)
}

fn cache_file(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

fn load_cached(dir: &Path, key: &str) -> Option<CellResult> {
    let text = fs::read_to_string(cache_file(dir, key)).ok()?;
    serde_json::from_str(&text).ok()
}

fn store_cached(dir: &Path, key: &str, result: &CellResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        cache_file(dir, key),
        serde_json::to_string_pretty(result).expect("serializable result"),
    )?;
    Ok(())
}

pub fn write_results_csv(results: &[(SimulationCell, CellResult)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "law",
        "rho",
        "sigma",
        "n1",
        "n2",
        "n3",
        "delta",
        "method",
        "rejection_rate",
        "mc_se",
        "nrmse_mean",
        "degenerate_count",
        "seconds",
    ])?;
    for (cell, r) in results {
        w.write_record([
            cell.law.label().to_string(),
            format!("{}", cell.rho),
            cell.sigma.label().to_string(),
            cell.sizes.0.to_string(),
            cell.sizes.1.to_string(),
            cell.sizes.2.to_string(),
            format!("{}", cell.delta),
            cell.method.label().to_string(),
            format!("{}", r.rejection_rate),
            format!("{}", r.mc_se),
            r.nrmse_mean.map_or(String::new(), |v| format!("{v}")),
            r.degenerate_count.to_string(),
            format!("{:.3}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// --- dataset analysis ------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub schema: CsvSchema,
    pub methods: Vec<MethodName>,
    /// None: analyze as-is; Some(r): first inject Bernoulli(r) missingness.
    pub inject: Option<f64>,
    pub m: usize,
    pub b_perm: usize,
    pub seed: u64,
    pub tuning: Tuning,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisRow {
    pub method: String,
    pub statistic: Option<f64>,
    pub p_two_sided: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub counts: (usize, usize, usize),
    pub dropped_rows: usize,
    pub injected_rate: Option<f64>,
    pub rows: Vec<AnalysisRow>,
}

/// Analyze a CSV of matched pairs: complete-case paired t (when fully
/// observed), the weighted permutation test, and each requested imputation
/// method. A failing method yields an error row instead of aborting.
pub fn analyze_dataset(path: &Path, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let ingest = ingest_csv(path, &opts.schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rows = Vec::new();

    // complete-case analysis before injection, when possible
    if ingest.sample.is_fully_observed() {
        let parts = split(&ingest.sample);
        rows.push(match paired_t(&parts.diffs) {
            Ok(o) => AnalysisRow {
                method: "t-comp".into(),
                statistic: Some(o.statistic),
                p_two_sided: Some(o.p_two_sided),
                error: None,
            },
            Err(e) => AnalysisRow {
                method: "t-comp".into(),
                statistic: None,
                p_two_sided: None,
                error: Some(e.to_string()),
            },
        });
    }

    let sample = match opts.inject {
        Some(r) if r > 0.0 => {
            inject_mcar(&ingest.sample, MissingSpec::Bernoulli { rate: r }, &mut rng)?
        }
        _ => ingest.sample.clone(),
    };

    for method in &opts.methods {
        let row = match method {
            MethodName::Tml => {
                let cfg = PermutationConfig {
                    b: opts.b_perm,
                    a_override: None,
                    seed: rng.random(),
                };
                match permute_and_test(&sample, &cfg) {
                    Ok(o) => AnalysisRow {
                        method: method.label().into(),
                        statistic: Some(o.statistic),
                        p_two_sided: Some(o.p_two_sided),
                        error: None,
                    },
                    Err(e) => AnalysisRow {
                        method: method.label().into(),
                        statistic: None,
                        p_two_sided: None,
                        error: Some(e.to_string()),
                    },
                }
            }
            _ => {
                let imp = method
                    .imputation_method(&opts.tuning)
                    .expect("imputation method");
                match mi_t_test(&sample, &imp, opts.m, &mut rng) {
                    Ok(o) => AnalysisRow {
                        method: method.label().into(),
                        statistic: Some(o.statistic),
                        p_two_sided: Some(o.p_two_sided),
                        error: None,
                    },
                    Err(e) => AnalysisRow {
                        method: method.label().into(),
                        statistic: None,
                        p_two_sided: None,
                        error: Some(e.to_string()),
                    },
                }
            }
        };
        rows.push(row);
    }

    Ok(AnalysisReport {
        n: sample.n(),
        counts: sample.counts(),
        dropped_rows: ingest.dropped_rows,
        injected_rate: opts.inject,
        rows,
    })
}

// --- reproduction presets ---------------------------------------------------

/// Published reference rejection rates, Normal residuals, homoscedastic
/// covariance, sizes (10,10,10); columns: T_ML, RF MI, RF MICE, PMM, NORM.
pub const REFERENCE_RHOS: [f64; 6] = [-0.9, -0.5, -0.1, 0.1, 0.5, 0.9];

pub const REFERENCE_TABLE1_NORMAL_S1: [[f64; 5]; 6] = [
    [0.052, 0.070, 0.058, 0.061, 0.045],
    [0.052, 0.118, 0.071, 0.061, 0.045],
    [0.050, 0.163, 0.077, 0.055, 0.038],
    [0.054, 0.201, 0.085, 0.055, 0.041],
    [0.052, 0.260, 0.085, 0.048, 0.039],
    [0.051, 0.302, 0.048, 0.036, 0.038],
];

/// Same layout for power at delta = 0.5.
pub const REFERENCE_TABLE2_NORMAL_S1_D05: [[f64; 5]; 6] = [
    [0.260, 0.315, 0.299, 0.300, 0.264],
    [0.271, 0.396, 0.319, 0.284, 0.239],
    [0.306, 0.477, 0.349, 0.290, 0.238],
    [0.338, 0.551, 0.383, 0.306, 0.250],
    [0.439, 0.703, 0.463, 0.345, 0.302],
    [0.869, 0.967, 0.657, 0.605, 0.628],
];

pub const METHOD_ORDER: [MethodName; 5] = [
    MethodName::Tml,
    MethodName::RfMi,
    MethodName::RfMice,
    MethodName::Pmm,
    MethodName::Norm,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReproduceTarget {
    Table1,
    Table2,
    NrmseFigure,
}

impl ReproduceTarget {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(ReproduceTarget::Table1),
            "table2" => Ok(ReproduceTarget::Table2),
            "nrmse-figure" => Ok(ReproduceTarget::NrmseFigure),
            other => Err(Error::Config(format!(
                "unknown reproduce target '{other}' (expected table1, table2 or nrmse-figure)"
            ))),
        }
    }
}

/// Grid config behind a reproduce preset. `scale` multiplies the reference
/// replicate count of 10,000 (desk-scale default 0.2 => n_sim = 2000).
pub fn reproduce_config(target: ReproduceTarget, scale: f64, seed: u64) -> Result<GridConfig> {
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::Parameter("scale must be positive".into()));
    }
    let n_sim = ((10_000.0 * scale).round() as usize).max(1);
    let base = GridConfig {
        laws: vec![ResidualLaw::StandardNormal],
        rhos: REFERENCE_RHOS.to_vec(),
        sigma_variants: vec![SigmaVariant::Sigma1],
        sizes: vec![(10, 10, 10)],
        deltas: vec![0.0],
        methods: METHOD_ORDER.to_vec(),
        n_sim,
        b_perm: 1000,
        m: 5,
        seed,
        alpha: 0.05,
        tuning: Tuning::default(),
    };
    Ok(match target {
        ReproduceTarget::Table1 => base,
        ReproduceTarget::Table2 => GridConfig {
            deltas: vec![0.5],
            ..base
        },
        ReproduceTarget::NrmseFigure => GridConfig {
            laws: vec![
                ResidualLaw::StandardNormal,
                ResidualLaw::StandardizedExponential,
                ResidualLaw::StandardizedChiSquared,
                ResidualLaw::asymmetric_laplace_default(),
            ],
            methods: MethodName::IMPUTATION.to_vec(),
            ..base
        },
    })
}

/// Reference value for a cell of a reproduce run, when one exists.
pub fn reference_value(target: ReproduceTarget, cell: &SimulationCell) -> Option<f64> {
    let row = REFERENCE_RHOS.iter().position(|&r| r == cell.rho)?;
    let col = METHOD_ORDER.iter().position(|m| *m == cell.method)?;
    match target {
        ReproduceTarget::Table1 if cell.law == ResidualLaw::StandardNormal => {
            Some(REFERENCE_TABLE1_NORMAL_S1[row][col])
        }
        ReproduceTarget::Table2 if cell.law == ResidualLaw::StandardNormal => {
            Some(REFERENCE_TABLE2_NORMAL_S1_D05[row][col])
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tml_cell(n_sim: usize, seed: u64) -> SimulationCell {
        SimulationCell {
            law: ResidualLaw::StandardNormal,
            rho: 0.1,
            sigma: SigmaVariant::Sigma1,
            sizes: (10, 10, 10),
            delta: 0.0,
            method: MethodName::Tml,
            n_sim,
            b_perm: 200,
            m: 5,
            seed,
            alpha: 0.05,
            tuning: Tuning::default(),
        }
    }

    #[test]
    fn cell_hash_stable_and_sensitive() {
        let a = tml_cell(100, 1);
        let b = tml_cell(100, 1);
        assert_eq!(a.hash(), b.hash());
        let c = tml_cell(100, 2);
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn run_cell_deterministic() {
        let cell = tml_cell(50, 7);
        let r1 = run_cell(&cell).unwrap();
        let r2 = run_cell(&cell).unwrap();
        assert_eq!(r1.rejection_rate, r2.rejection_rate);
        assert_eq!(r1.degenerate_count, r2.degenerate_count);
    }

    #[test]
    fn grid_config_rejects_unknown_keys() {
        let text = r#"{"laws": [], "rhos": [], "sigma_variants": [], "sizes": [],
            "deltas": [], "methods": [], "n_sim": 1, "B": 1, "m": 2, "seed": 0,
            "bogus_key": 1, "another": 2}"#;
        match GridConfig::from_json(text).unwrap_err() {
            Error::Config(msg) => {
                assert!(msg.contains("bogus_key") && msg.contains("another"), "{msg}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_cell_count() {
        // Table 1 Normal block: 6 rhos x 5 methods x 2 sigma variants
        let cfg = GridConfig {
            laws: vec![ResidualLaw::StandardNormal],
            rhos: REFERENCE_RHOS.to_vec(),
            sigma_variants: vec![SigmaVariant::Sigma1, SigmaVariant::Sigma2],
            sizes: vec![(10, 10, 10)],
            deltas: vec![0.0],
            methods: MethodName::ALL.to_vec(),
            n_sim: 10,
            b_perm: 10,
            m: 2,
            seed: 0,
            alpha: 0.05,
            tuning: Tuning::default(),
        };
        assert_eq!(cfg.cells().len(), 60);
    }

    #[test]
    fn empty_grid_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out.csv");
        let cfg = GridConfig {
            laws: vec![],
            rhos: vec![],
            sigma_variants: vec![],
            sizes: vec![],
            deltas: vec![],
            methods: vec![],
            n_sim: 1,
            b_perm: 1,
            m: 2,
            seed: 0,
            alpha: 0.05,
            tuning: Tuning::default(),
        };
        run_grid(&cfg, &out, None).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("law,rho,sigma"));
    }

    #[test]
    fn grid_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache");
        let out = dir.path().join("out.csv");
        let cfg = GridConfig {
            laws: vec![ResidualLaw::StandardNormal],
            rhos: vec![0.1],
            sigma_variants: vec![SigmaVariant::Sigma1],
            sizes: vec![(6, 3, 3)],
            deltas: vec![0.0],
            methods: vec![MethodName::Tml],
            n_sim: 20,
            b_perm: 100,
            m: 2,
            seed: 3,
            alpha: 0.05,
            tuning: Tuning::default(),
        };
        let first = run_grid(&cfg, &out, Some(&cache)).unwrap();
        let second = run_grid(&cfg, &out, Some(&cache)).unwrap();
        assert_eq!(first[0].1, second[0].1); // identical incl. wall time => cache hit
    }

    #[test]
    fn reproduce_configs_scale() {
        let cfg = reproduce_config(ReproduceTarget::Table1, 0.2, 1).unwrap();
        assert_eq!(cfg.n_sim, 2000);
        assert_eq!(cfg.cells().len(), 30);
        let cfg = reproduce_config(ReproduceTarget::NrmseFigure, 0.05, 1).unwrap();
        assert_eq!(cfg.methods.len(), 4);
        assert_eq!(cfg.laws.len(), 4);
    }

    #[test]
    fn reference_lookup() {
        let mut cell = tml_cell(10, 0);
        cell.rho = 0.1;
        assert_eq!(
            reference_value(ReproduceTarget::Table1, &cell),
            Some(0.054)
        );
        cell.method = MethodName::RfMi;
        assert_eq!(
            reference_value(ReproduceTarget::Table1, &cell),
            Some(0.201)
        );
    }
}
