//! Imputation accuracy: normalized root mean squared error over the missing
//! cells of both pair components, pooled across the m draws.

use serde::{Deserialize, Serialize};

use crate::data::{CompletedDataset, PairedSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NrmseReport {
    pub value: f64,
    pub m: usize,
    /// Missing-cell counts per component (first, second).
    pub cells: (usize, usize),
}

/// NRMSE of the draws against the truth, over the cells that are missing in
/// `masked`. The numerator sums squared errors over missing cells of both
/// components and all m draws; the denominator is m times the sum of
/// squared deviations of the true missing values around their
/// per-component means (means over the missing cells only).
pub fn nrmse(
    truth: &PairedSample,
    masked: &PairedSample,
    draws: &[CompletedDataset],
) -> Result<NrmseReport> {
    if !truth.is_fully_observed() {
        return Err(Error::Parameter("truth must be fully observed".into()));
    }
    if truth.n() != masked.n() {
        return Err(Error::Parameter("truth and masked sizes differ".into()));
    }
    if draws.is_empty() {
        return Err(Error::Parameter("need at least one draw".into()));
    }
    for d in draws {
        if d.n() != masked.n() {
            return Err(Error::Parameter("draw size mismatch".into()));
        }
        for (i, row) in masked.rows().iter().enumerate() {
            if d.imputed_mask[i][0] != row.first.is_none()
                || d.imputed_mask[i][1] != row.second.is_none()
            {
                return Err(Error::Parameter(
                    "draw mask does not match the masked sample".into(),
                ));
            }
        }
    }

    // per-component index sets of missing cells and true means over them
    let mut idx = [Vec::new(), Vec::new()];
    for (i, row) in masked.rows().iter().enumerate() {
        if row.first.is_none() {
            idx[0].push(i);
        }
        if row.second.is_none() {
            idx[1].push(i);
        }
    }
    let true_val = |component: usize, i: usize| -> f64 {
        let r = &truth.rows()[i];
        if component == 0 {
            r.first.unwrap()
        } else {
            r.second.unwrap()
        }
    };

    let mut den = 0.0;
    for (c, cells) in idx.iter().enumerate() {
        if cells.is_empty() {
            continue;
        }
        let mean = cells.iter().map(|&i| true_val(c, i)).sum::<f64>() / cells.len() as f64;
        den += cells
            .iter()
            .map(|&i| (true_val(c, i) - mean) * (true_val(c, i) - mean))
            .sum::<f64>();
    }
    let m = draws.len();
    if den <= 0.0 {
        return Err(Error::UndefinedMetric(
            "true missing values are constant per component".into(),
        ));
    }

    let mut num = 0.0;
    for d in draws {
        for (c, cells) in idx.iter().enumerate() {
            for &i in cells {
                let err = true_val(c, i) - d.matrix[i][c];
                num += err * err;
            }
        }
    }
    Ok(NrmseReport {
        value: (num / (m as f64 * den)).sqrt(),
        m,
        cells: (idx[0].len(), idx[1].len()),
    })
}
