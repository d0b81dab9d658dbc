use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CandidateSet;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ga::softmax_half;
use crate::model::fit_least_squares;

/// Candidates whose largest leverage reaches `1 - LEVERAGE_TOL` are left
/// out of the AL weights.
pub const LEVERAGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Gic,
    Al,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub kind: WeightKind,
}

/// `exp(-GIC_k / 2)` normalised, computed after a shift by the minimum GIC.
pub fn gic_weights(gics: &[f64]) -> WeightVector {
    let neg: Vec<f64> = gics.iter().map(|g| -g).collect();
    WeightVector {
        w: softmax_half(&neg),
        kind: WeightKind::Gic,
    }
}

/// Data of the AL quadratic program `Y'Y - 2 w'a + w'Bw` over the retained
/// candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct AlProblem {
    pub yty: f64,
    pub a: DVector<f64>,
    pub b: DMatrix<f64>,
    /// Candidate indices the rows of `a` and `B` refer to.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Builds `a_k = Y' H_k Y` and `B_kl = (H_k Y)'(H_l Y)` with the
/// leave-one-out fits `H_k Y = Y - e_k / (1 - h_k)`.
pub fn al_problem(ds: &Dataset, candidates: &CandidateSet) -> Result<AlProblem> {
    let y = ds.y();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (k, m) in candidates.masks.iter().enumerate() {
        let fit = fit_least_squares(ds, m)?;
        if fit.hat_diagonals.iter().any(|&h| h >= 1.0 - LEVERAGE_TOL) {
            warn!("candidate {m} has a leverage of one and is left out of the AL weights");
            dropped.push(k);
            continue;
        }
        let e = fit.residuals(y);
        let loo = DVector::from_fn(ds.n(), |i, _| y[i] - e[i] / (1.0 - fit.hat_diagonals[i]));
        cols.push(loo);
        kept.push(k);
    }
    if kept.is_empty() {
        return Err(Error::LeverageOne);
    }
    let kk = kept.len();
    let a = DVector::from_fn(kk, |k, _| y.dot(&cols[k]));
    let b = DMatrix::from_fn(kk, kk, |k, l| cols[k].dot(&cols[l]));
    Ok(AlProblem {
        yty: ds.yty(),
        a,
        b,
        kept,
        dropped,
    })
}

pub fn al_objective(yty: f64, a: &DVector<f64>, b: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    yty - 2.0 * w.dot(a) + w.dot(&(b * w))
}

/// Gradient of the objective, zeroed where a bound is active in the right
/// direction; all zeros at a minimiser.
pub fn al_projected_gradient(a: &DVector<f64>, b: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
    let g = (b * w - a) * 2.0;
    DVector::from_fn(w.len(), |k, _| {
        if w[k] <= 0.0 {
            g[k].min(0.0)
        } else if w[k] >= 1.0 {
            g[k].max(0.0)
        } else {
            g[k]
        }
    })
}

const QP_MAX_SWEEPS: usize = 1_000_000;

/// Minimises `-2 w'a + w'Bw` over `[0, 1]^K` for a positive semidefinite
/// `B` by cyclic coordinate descent with clipping. No matrix is inverted,
/// so singular `B` is fine.
pub fn solve_box_qp(a: &DVector<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let k = a.len();
    let mut w: DVector<f64> = DVector::zeros(k);
    let scale = (0..k).map(|i| b[(i, i)]).fold(1.0f64, f64::max);
    for _ in 0..QP_MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for i in 0..k {
            let bii = b[(i, i)];
            let new = if bii > 0.0 {
                let mut r = a[i];
                for j in 0..k {
                    if j != i {
                        r -= b[(i, j)] * w[j];
                    }
                }
                (r / bii).clamp(0.0, 1.0)
            } else if a[i] > 0.0 {
                1.0
            } else {
                0.0
            };
            change = change.max((new - w[i]).abs());
            w[i] = new;
        }
        if change == 0.0 {
            break;
        }
        let pg = al_projected_gradient(a, b, &w).amax();
        if pg <= 1e-10 * scale.min(1.0) && change < 1e-15 {
            break;
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlWeights {
    /// One weight per candidate; dropped candidates get 0.
    pub weights: WeightVector,
    pub dropped: Vec<usize>,
    pub objective: f64,
}

/// Box-constrained least-squares model averaging weights on leave-one-out
/// fits. The weights need not sum to one.
pub fn al_weights(ds: &Dataset, candidates: &CandidateSet) -> Result<AlWeights> {
    let prob = al_problem(ds, candidates)?;
    let w = solve_box_qp(&prob.a, &prob.b);
    let objective = al_objective(prob.yty, &prob.a, &prob.b, &w);
    let mut full = vec![0.0; candidates.len()];
    for (i, &k) in prob.kept.iter().enumerate() {
        full[k] = w[i];
    }
    Ok(AlWeights {
        weights: WeightVector {
            w: full,
            kind: WeightKind::Al,
        },
        dropped: prob.dropped,
        objective,
    })
}

/// `sum_k w_k H_k Y`.
pub fn model_average_predict(ds: &Dataset, candidates: &CandidateSet, weights: &[f64]) -> Result<DVector<f64>> {
    if weights.len() != candidates.len() {
        return Err(Error::LengthMismatch {
            expected: candidates.len(),
            got: weights.len(),
        });
    }
    let mut out = DVector::zeros(ds.n());
    for (m, &w) in candidates.masks.iter().zip(weights) {
        if w != 0.0 {
            out += fit_least_squares(ds, m)?.fitted * w;
        }
    }
    Ok(out)
}

/// `SOIL_j = sum_k w_k 1(u^k_j = 1)`.
pub fn soil(candidates: &CandidateSet, weights: &WeightVector) -> Result<Vec<f64>> {
    if weights.w.len() != candidates.len() {
        return Err(Error::LengthMismatch {
            expected: candidates.len(),
            got: weights.w.len(),
        });
    }
    let d = candidates.d();
    let mut out = vec![0.0; d];
    for (m, &w) in candidates.masks.iter().zip(&weights.w) {
        for j in m.active() {
            out[j] += w;
        }
    }
    Ok(out.into_iter().map(|s| s.clamp(0.0, 1.0)).collect())
}
