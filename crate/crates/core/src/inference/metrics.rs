use crate::error::{Error, Result};
use crate::mask::ModelMask;

/// `(PSR, FDR)` of `selected` against `truth`. An empty selection has
/// FDR 0.
pub fn psr_fdr(selected: &ModelMask, truth: &ModelMask) -> Result<(f64, f64)> {
    selected.check_len(truth.len())?;
    if truth.size() == 0 {
        return Err(Error::InvalidConfig("true model must be nonempty".into()));
    }
    let hits = selected.intersection_size(truth);
    let psr = hits as f64 / truth.size() as f64;
    let fdr = (selected.size() - hits) as f64 / selected.size().max(1) as f64;
    Ok((psr, fdr))
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidConfig("rmse of empty vectors".into()));
    }
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}
