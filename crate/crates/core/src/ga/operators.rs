use std::cmp::Ordering;

use rand::Rng;

use super::Population;
use crate::error::{Error, Result};
use crate::mask::ModelMask;

/// Smallest population for which, with probability `p_star`, no position is
/// constant across a random initial population:
/// `ceil(1 + log(-d / log p_star) / log 2)`.
pub fn min_population_size(d: usize, p_star: f64) -> usize {
    assert!(d >= 1, "d must be positive");
    assert!(p_star > 0.0 && p_star < 1.0, "p_star must lie in (0, 1)");
    let k = 1.0 + (-(d as f64) / p_star.ln()).ln() / 2f64.ln();
    k.ceil().max(1.0) as usize
}

/// Proportional selection weights `exp(f_k / 2) / sum_l exp(f_l / 2)`,
/// evaluated after subtracting the maximum.
pub fn selection_weights(fitnesses: &[f64]) -> Vec<f64> {
    softmax_half(fitnesses)
}

pub(crate) fn softmax_half(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = values.iter().map(|f| ((f - max) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Order used for elitism and best-model extraction: higher fitness first,
/// then smaller model, then lexicographically smaller mask.
pub(crate) fn rank_order(fa: f64, a: &ModelMask, fb: f64, b: &ModelMask) -> Ordering {
    fb.total_cmp(&fa)
        .then_with(|| a.size().cmp(&b.size()))
        .then_with(|| a.cmp(b))
}

pub fn elitist_index(population: &Population) -> usize {
    assert!(!population.is_empty(), "elitism on an empty population");
    population
        .members
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| {
            y.fitness
                .total_cmp(&x.fitness)
                .then_with(|| y.feasible.cmp(&x.feasible))
                .then_with(|| rank_order(x.fitness, &x.mask, y.fitness, &y.mask))
        })
        .map(|(i, _)| i)
        .unwrap()
}

pub fn elitist(population: &Population) -> ModelMask {
    population.members[elitist_index(population)].mask.clone()
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // round-off: fall back to the last index with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Two independent weighted draws (with replacement) of member indices.
pub fn select_parent_pair<R: Rng + ?Sized>(
    population: &Population,
    weights: &[f64],
    rng: &mut R,
) -> (usize, usize) {
    debug_assert_eq!(population.len(), weights.len());
    let a = categorical(weights, rng);
    let b = categorical(weights, rng);
    (a, b)
}

/// Each child position copies `p1` with probability 1/2, else `p2`.
pub fn uniform_crossover<R: Rng + ?Sized>(
    p1: &ModelMask,
    p2: &ModelMask,
    rng: &mut R,
) -> Result<ModelMask> {
    p2.check_len(p1.len())?;
    let mut child = p1.clone();
    for j in 0..p1.len() {
        let take_second: bool = rng.random();
        if take_second {
            child.set(j, p2.get(j));
        }
    }
    Ok(child)
}

/// Flip each bit independently with probability `pi_m`.
pub fn uniform_mutation<R: Rng + ?Sized>(child: &ModelMask, pi_m: f64, rng: &mut R) -> ModelMask {
    let mut out = child.clone();
    for j in 0..child.len() {
        if rng.random::<f64>() < pi_m {
            out.flip(j);
        }
    }
    out
}

/// Per-bit flip probabilities of the adaptive mutation before clipping.
///
/// Active bits are weighted by `1/gamma_j`, inactive bits by `gamma_j`, each
/// group rescaled so its total equals `group size * pi_m`. Zero `gamma_j`
/// among active bits is raised to `1e-12 * max(gamma)`; if all weights in a
/// group vanish the group falls back to the uniform rate.
pub fn adaptive_flip_probabilities(child: &ModelMask, gamma: &[f64], pi_m: f64) -> Vec<f64> {
    assert_eq!(child.len(), gamma.len(), "gamma length must equal d");
    let max_gamma = gamma.iter().copied().fold(0.0, f64::max);
    let eps = 1e-12 * max_gamma;
    let mut probs = vec![pi_m; gamma.len()];

    let active: Vec<usize> = (0..child.len()).filter(|&j| child.get(j)).collect();
    let inactive: Vec<usize> = (0..child.len()).filter(|&j| !child.get(j)).collect();

    if max_gamma > 0.0 && !active.is_empty() {
        let inv: Vec<f64> = active.iter().map(|&j| 1.0 / gamma[j].max(eps)).collect();
        let total: f64 = inv.iter().sum();
        let scale = active.len() as f64 * pi_m / total;
        for (&j, w) in active.iter().zip(&inv) {
            probs[j] = w * scale;
        }
    }
    let total_inactive: f64 = inactive.iter().map(|&j| gamma[j]).sum();
    if total_inactive > 0.0 {
        let scale = inactive.len() as f64 * pi_m / total_inactive;
        for &j in &inactive {
            probs[j] = gamma[j] * scale;
        }
    }
    probs
}

/// Data-dependent mutation: flip bit `j` with the clipped adaptive
/// probability.
pub fn adaptive_mutation<R: Rng + ?Sized>(
    child: &ModelMask,
    gamma: &[f64],
    pi_m: f64,
    rng: &mut R,
) -> ModelMask {
    let probs = adaptive_flip_probabilities(child, gamma, pi_m);
    let mut out = child.clone();
    for (j, p) in probs.into_iter().enumerate() {
        if rng.random::<f64>() < p.clamp(0.0, 1.0) {
            out.flip(j);
        }
    }
    out
}

/// Mutation operator applied to every child.
#[derive(Debug, Clone, Copy)]
pub enum Mutation<'a> {
    Uniform { pi_m: f64 },
    Adaptive { gamma: &'a [f64], pi_m: f64 },
}

impl Mutation<'_> {
    pub fn apply<R: Rng + ?Sized>(&self, child: &ModelMask, rng: &mut R) -> ModelMask {
        match *self {
            Mutation::Uniform { pi_m } => uniform_mutation(child, pi_m, rng),
            Mutation::Adaptive { gamma, pi_m } => adaptive_mutation(child, gamma, pi_m, rng),
        }
    }

    pub fn pi_m(&self) -> f64 {
        match *self {
            Mutation::Uniform { pi_m } | Mutation::Adaptive { pi_m, .. } => pi_m,
        }
    }

    pub(crate) fn validate(&self, d: usize) -> Result<()> {
        let pi = self.pi_m();
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::InvalidConfig(format!("mutation rate must lie in (0, 1), got {pi}")));
        }
        if let Mutation::Adaptive { gamma, .. } = self {
            if gamma.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    got: gamma.len(),
                });
            }
            if gamma.iter().any(|g| *g < 0.0 || !g.is_finite()) {
                return Err(Error::InvalidConfig("association measures must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}
