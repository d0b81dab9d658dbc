use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationKind {
    /// `|cor(X_j, Y)|`.
    #[serde(alias = "cor")]
    MarginalCorrelation,
    /// `|X'(XX')^-1 Y|`, only for `d >= n`.
    Holp,
}

/// Nonnegative per-variable association strengths `gamma_j`.
///
/// Constant columns (or a constant response) get `gamma_j = 0`.
pub fn association_measures(ds: &Dataset, kind: AssociationKind) -> Result<Vec<f64>> {
    match kind {
        AssociationKind::MarginalCorrelation => Ok(marginal_correlation(ds)),
        AssociationKind::Holp => holp(ds),
    }
}

fn marginal_correlation(ds: &Dataset) -> Vec<f64> {
    let n = ds.n() as f64;
    let y = ds.y();
    let ybar = y.mean();
    let yc: DVector<f64> = y.map(|v| v - ybar);
    let syy = yc.norm_squared();
    (0..ds.d())
        .map(|j| {
            let col = ds.x().column(j);
            let xbar = col.sum() / n;
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            for (xi, yi) in col.iter().zip(yc.iter()) {
                let xc = xi - xbar;
                sxx += xc * xc;
                sxy += xc * yi;
            }
            if sxx <= 0.0 || syy <= 0.0 {
                0.0
            } else {
                (sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0)
            }
        })
        .collect()
}

fn holp(ds: &Dataset) -> Result<Vec<f64>> {
    let (n, d) = (ds.n(), ds.d());
    if d < n {
        return Err(Error::HolpRequiresWide { n, d });
    }
    let x = ds.x();
    let gram = x * x.transpose();
    let z = match gram.clone().cholesky().filter(|c| well_conditioned(c.l_dirty())) {
        Some(chol) => chol.solve(ds.y()),
        None => {
            let delta = 1e-8 * gram.trace() / n as f64;
            log::debug!("XX' numerically singular; adding ridge {delta:e}");
            let ridged = gram + nalgebra::DMatrix::identity(n, n) * delta;
            ridged
                .cholesky()
                .ok_or_else(|| Error::InvalidDataset("XX' is singular even after ridging".into()))?
                .solve(ds.y())
        }
    };
    Ok((x.transpose() * z).iter().map(|v| v.abs()).collect())
}

fn well_conditioned(l: &nalgebra::DMatrix<f64>) -> bool {
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    // squared diagonal ratio bounds the condition number of XX' from below
    max > 0.0 && (min / max).powi(2) > 1e-14
}
