//! Inference on a candidate model set: best model, survival model sets,
//! model averaging weights, SOIL importance and evaluation metrics.

mod metrics;
mod sms;
mod weights;

pub use metrics::{psr_fdr, rmse};
pub use sms::{
    distinguishability_test, omega_hat, pointwise_loglik, superiority_test, survival_model_set,
    vuong_eigenvalues, DistinguishabilityTest, SmsRecord, SmsResult, NULL_DRAWS,
};
pub use weights::{
    al_objective, al_problem, al_projected_gradient, al_weights, gic_weights, model_average_predict,
    soil, solve_box_qp, AlProblem, AlWeights, WeightKind, WeightVector,
};

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mask::ModelMask;
use crate::model::{gic, GicConfig};

/// Distinct candidate masks with their GIC values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub masks: Vec<ModelMask>,
    pub gics: Vec<f64>,
    pub best_index: usize,
    /// Masks dropped because their GIC is undefined (`|u| >= n` or a
    /// rank-deficient design).
    #[serde(default)]
    pub dropped: Vec<ModelMask>,
}

fn order(ga: f64, a: &ModelMask, gb: f64, b: &ModelMask) -> Ordering {
    ga.total_cmp(&gb)
        .then_with(|| a.size().cmp(&b.size()))
        .then_with(|| a.cmp(b))
}

impl CandidateSet {
    /// Deduplicates `masks` (first occurrence wins) and scores every feasible
    /// one.
    pub fn new(ds: &Dataset, masks: &[ModelMask], cfg: &GicConfig) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut gics = Vec::new();
        let mut dropped = Vec::new();
        for m in masks {
            m.check_len(ds.d())?;
            if !seen.insert(m.clone()) {
                continue;
            }
            match gic(ds, m, cfg) {
                Ok(g) => {
                    kept.push(m.clone());
                    gics.push(g);
                }
                Err(Error::SizeTooLarge { .. } | Error::RankDeficient { .. }) => dropped.push(m.clone()),
                Err(e) => return Err(e),
            }
        }
        let mut set = Self::from_parts(kept, gics)?;
        set.dropped = dropped;
        Ok(set)
    }

    pub fn from_parts(masks: Vec<ModelMask>, gics: Vec<f64>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if masks.len() != gics.len() {
            return Err(Error::LengthMismatch {
                expected: masks.len(),
                got: gics.len(),
            });
        }
        let mut seen = HashSet::new();
        if !masks.iter().all(|m| seen.insert(m)) {
            return Err(Error::InvalidConfig("candidate masks must be distinct".into()));
        }
        let best_index = (0..masks.len())
            .min_by(|&i, &j| order(gics[i], &masks[i], gics[j], &masks[j]))
            .unwrap();
        Ok(Self {
            masks,
            gics,
            best_index,
            dropped: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn best(&self) -> &ModelMask {
        &self.masks[self.best_index]
    }

    pub fn d(&self) -> usize {
        self.masks[0].len()
    }
}

/// Minimum-GIC candidate; ties go to the smaller, then lexicographically
/// smaller, mask.
pub fn best_model(candidates: &CandidateSet) -> ModelMask {
    candidates.best().clone()
}

/// Everything computed for a candidate set in one pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateReport {
    pub masks: Vec<ModelMask>,
    pub gics: Vec<f64>,
    pub best: ModelMask,
    pub gic_weights: Vec<f64>,
    pub al_weights: Vec<f64>,
    pub al_dropped: Vec<usize>,
    pub sms: SmsResult,
    pub soil: Vec<f64>,
    pub rmse_gic: f64,
    pub rmse_al: f64,
}

pub fn candidate_report(
    ds: &Dataset,
    candidates: &CandidateSet,
    alpha: f64,
    seed: u64,
) -> Result<CandidateReport> {
    let gw = gic_weights(&candidates.gics);
    let al = al_weights(ds, candidates)?;
    let sms = survival_model_set(ds, candidates, alpha, seed)?;
    let soil = soil(candidates, &gw)?;
    let rmse_gic = rmse(ds.y().as_slice(), model_average_predict(ds, candidates, &gw.w)?.as_slice())?;
    let rmse_al = rmse(ds.y().as_slice(), model_average_predict(ds, candidates, &al.weights.w)?.as_slice())?;
    Ok(CandidateReport {
        masks: candidates.masks.clone(),
        gics: candidates.gics.clone(),
        best: best_model(candidates),
        gic_weights: gw.w,
        al_weights: al.weights.w,
        al_dropped: al.dropped,
        sms,
        soil,
        rmse_gic,
        rmse_al,
    })
}
