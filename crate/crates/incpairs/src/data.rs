//! Matched-pairs dataset representation, missingness patterns, CSV ingestion
//! and MCAR insertion.
//!
//! A [`PairedSample`] holds `n` pairs where each component may be missing,
//! but never both at once. Rows partition into `n1` complete pairs, `n2`
//! first-only singletons and `n3` second-only singletons.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One matched pair; each component is observed or missing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub first: Option<f64>,
    pub second: Option<f64>,
}

impl PairRow {
    pub fn complete(x1: f64, x2: f64) -> Self {
        PairRow {
            first: Some(x1),
            second: Some(x2),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.first.is_some() && self.second.is_some()
    }
}

/// A sample of n matched pairs with per-component observation flags,
/// plus optional fully observed auxiliary covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    rows: Vec<PairRow>,
    /// n x q auxiliary matrix, row-major; no missing cells allowed.
    aux: Option<Vec<Vec<f64>>>,
}

impl PairedSample {
    /// Build a sample, rejecting rows with both components missing and
    /// auxiliary matrices that are ragged, incomplete or of the wrong length.
    pub fn new(rows: Vec<PairRow>, aux: Option<Vec<Vec<f64>>>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.first.is_none() && r.second.is_none() {
                return Err(Error::Validation(format!(
                    "row {i} has both components missing"
                )));
            }
            for v in [r.first, r.second].into_iter().flatten() {
                if !v.is_finite() {
                    return Err(Error::Validation(format!("row {i} has a non-finite value")));
                }
            }
        }
        if let Some(a) = &aux {
            if a.len() != rows.len() {
                return Err(Error::Validation(format!(
                    "aux has {} rows, expected {}",
                    a.len(),
                    rows.len()
                )));
            }
            let q = a.first().map_or(0, |r| r.len());
            for (i, r) in a.iter().enumerate() {
                if r.len() != q {
                    return Err(Error::Validation(format!("aux row {i} is ragged")));
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "aux row {i} has a missing or non-finite cell"
                    )));
                }
            }
        }
        Ok(PairedSample { rows, aux })
    }

    pub fn from_complete(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(a, b)| PairRow::complete(a, b))
                .collect(),
            None,
        )
    }

    pub fn rows(&self) -> &[PairRow] {
        &self.rows
    }

    pub fn aux(&self) -> Option<&Vec<Vec<f64>>> {
        self.aux.as_ref()
    }

    /// Number of auxiliary covariates q.
    pub fn aux_width(&self) -> usize {
        self.aux.as_ref().map_or(0, |a| a.first().map_or(0, |r| r.len()))
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// (n1, n2, n3): complete, first-only, second-only counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for r in &self.rows {
            match (r.first.is_some(), r.second.is_some()) {
                (true, true) => c.0 += 1,
                (true, false) => c.1 += 1,
                (false, true) => c.2 += 1,
                (false, false) => unreachable!("rejected at construction"),
            }
        }
        c
    }

    pub fn is_fully_observed(&self) -> bool {
        self.rows.iter().all(PairRow::is_complete)
    }
}

/// `split` output: complete-pair differences and the two singleton lists,
/// all in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitParts {
    /// d_i = x1 - x2 over complete rows.
    pub diffs: Vec<f64>,
    /// x1 values of rows where x2 is missing.
    pub first_only: Vec<f64>,
    /// x2 values of rows where x1 is missing.
    pub second_only: Vec<f64>,
}

/// Partition a sample into complete-pair differences and singleton values.
pub fn split(sample: &PairedSample) -> SplitParts {
    let mut parts = SplitParts {
        diffs: Vec::new(),
        first_only: Vec::new(),
        second_only: Vec::new(),
    };
    for r in sample.rows() {
        match (r.first, r.second) {
            (Some(a), Some(b)) => parts.diffs.push(a - b),
            (Some(a), None) => parts.first_only.push(a),
            (None, Some(b)) => parts.second_only.push(b),
            (None, None) => unreachable!(),
        }
    }
    parts
}

/// How missing values are inserted into a fully observed sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingSpec {
    /// Exactly n2 rows lose x2 and n3 distinct rows lose x1.
    FixedCounts { n2: usize, n3: usize },
    /// Each component dropped independently with probability r; rows that
    /// would lose both components are re-drawn.
    Bernoulli { rate: f64 },
}

/// Insert missing values completely at random into a fully observed sample.
///
/// Fixed-counts mode slices one uniform permutation of row indices, so the
/// (n2, n3) assignment is exchangeable. Bernoulli mode re-draws a row's pair
/// of indicators whenever both fire, which slightly deflates the realized
/// missing rate relative to `r`.
pub fn inject_mcar<R: Rng>(
    full: &PairedSample,
    spec: MissingSpec,
    rng: &mut R,
) -> Result<PairedSample> {
    if !full.is_fully_observed() {
        return Err(Error::Parameter(
            "inject_mcar requires a fully observed sample".into(),
        ));
    }
    let n = full.n();
    let mut rows = full.rows().to_vec();
    match spec {
        MissingSpec::FixedCounts { n2, n3 } => {
            if n2 + n3 > n {
                return Err(Error::Parameter(format!(
                    "n2 + n3 = {} exceeds n = {n}",
                    n2 + n3
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            for &i in &idx[..n2] {
                rows[i].second = None;
            }
            for &i in &idx[n2..n2 + n3] {
                rows[i].first = None;
            }
        }
        MissingSpec::Bernoulli { rate } => {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Parameter(format!(
                    "bernoulli rate {rate} outside [0, 1)"
                )));
            }
            for row in rows.iter_mut() {
                loop {
                    let drop1 = rng.random::<f64>() < rate;
                    let drop2 = rng.random::<f64>() < rate;
                    if drop1 && drop2 {
                        continue;
                    }
                    if drop1 {
                        row.first = None;
                    }
                    if drop2 {
                        row.second = None;
                    }
                    break;
                }
            }
        }
    }
    PairedSample::new(rows, full.aux().cloned())
}

/// One imputation draw: a fully observed n x p matrix (p = 2 + q) plus the
/// mask of cells that were imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedDataset {
    /// Row-major n x p matrix; columns 0 and 1 are the pair components.
    pub matrix: Vec<Vec<f64>>,
    /// True exactly at cells that were missing in the source sample.
    pub imputed_mask: Vec<Vec<bool>>,
}

impl CompletedDataset {
    pub fn n(&self) -> usize {
        self.matrix.len()
    }

    /// Differences x1 - x2 over all rows.
    pub fn diffs(&self) -> Vec<f64> {
        self.matrix.iter().map(|r| r[0] - r[1]).collect()
    }
}

/// Column designation for CSV ingestion.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub x1: String,
    pub x2: String,
    pub aux: Vec<String>,
    pub delimiter: u8,
}

impl CsvSchema {
    pub fn new(x1: impl Into<String>, x2: impl Into<String>) -> Self {
        CsvSchema {
            x1: x1.into(),
            x2: x2.into(),
            aux: Vec::new(),
            delimiter: b',',
        }
    }
}

/// Result of CSV ingestion: the sample plus a count of rows that were
/// dropped because both pair components were missing.
#[derive(Debug)]
pub struct IngestReport {
    pub sample: PairedSample,
    pub dropped_rows: usize,
}

fn parse_cell(field: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let t = field.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    t.parse::<f64>().map(Some).map_err(|e| Error::Format {
        row,
        column: column.to_string(),
        message: e.to_string(),
    })
}

/// Read a matched-pairs CSV. Empty cells and the literal "NA"
/// (case-insensitive) read as missing; rows missing both pair components
/// are dropped and counted; auxiliary columns must be complete.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("column '{name}' not found in header")))
    };
    let ix1 = col(&schema.x1)?;
    let ix2 = col(&schema.x2)?;
    let iaux: Vec<(usize, &String)> = schema
        .aux
        .iter()
        .map(|name| col(name).map(|i| (i, name)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut aux_rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = line + 2; // 1-based, after header
        let x1 = parse_cell(record.get(ix1).unwrap_or(""), row_no, &schema.x1)?;
        let x2 = parse_cell(record.get(ix2).unwrap_or(""), row_no, &schema.x2)?;
        if x1.is_none() && x2.is_none() {
            dropped += 1;
            continue;
        }
        let mut arow = Vec::with_capacity(iaux.len());
        for (i, name) in &iaux {
            match parse_cell(record.get(*i).unwrap_or(""), row_no, name)? {
                Some(v) => arow.push(v),
                None => {
                    return Err(Error::Validation(format!(
                        "auxiliary column '{name}' has a missing cell at row {row_no}"
                    )))
                }
            }
        }
        rows.push(PairRow { first: x1, second: x2 });
        if !iaux.is_empty() {
            aux_rows.push(arow);
        }
    }
    let aux = if iaux.is_empty() { None } else { Some(aux_rows) };
    Ok(IngestReport {
        sample: PairedSample::new(rows, aux)?,
        dropped_rows: dropped,
    })
}

/// Write a sample back to CSV; missing cells emit as empty strings.
pub fn write_csv(sample: &PairedSample, schema: &CsvSchema, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(schema.delimiter)
        .from_path(path)?;
    let mut header = vec![schema.x1.clone(), schema.x2.clone()];
    header.extend(schema.aux.iter().cloned());
    w.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    for (i, r) in sample.rows().iter().enumerate() {
        let mut rec = vec![fmt(r.first), fmt(r.second)];
        if let Some(aux) = sample.aux() {
            rec.extend(aux[i].iter().map(|v| format!("{v}")));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
