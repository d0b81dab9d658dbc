//! Initial populations.
//!
//! Three sources are supported: an association-guided random generator, the
//! distinct supports along a lasso path, and explicit masks from a file.
//! [`assemble_population`] turns any list of masks into a scored population
//! of exactly `K` members.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ga::{association_measures, AssociationKind, GaConfig, Member, Population};
use crate::mask::ModelMask;
use crate::model::{fitness, FitnessLedger, GicConfig};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[serde(alias = "random")]
    RandomAssoc,
    #[serde(alias = "lasso")]
    LassoPath,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub kind: InitKind,
    pub lambda_grid_size: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kind: InitKind::LassoPath,
            lambda_grid_size: 100,
        }
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Probability mass function of `HyperGeom(N, M, n)` over its support
/// `max(0, n + M - N) ..= min(n, M)`, returned with the support start.
pub fn hypergeometric_pmf(big_n: u64, big_m: u64, n: u64) -> (u64, Vec<f64>) {
    assert!(big_m <= big_n && n <= big_n);
    let lo = (n + big_m).saturating_sub(big_n);
    let hi = n.min(big_m);
    let log_total = ln_choose(big_n, n);
    let logs: Vec<f64> = (lo..=hi)
        .map(|m| ln_choose(big_m, m) + ln_choose(big_n - big_m, n - m) - log_total)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    (lo, raw.into_iter().map(|r| r / total).collect())
}

/// Exact inverse-CDF draw from a pmf table.
pub fn sample_from_pmf<R: Rng + ?Sized>(start: u64, pmf: &[f64], rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return start + i as u64;
        }
    }
    start + pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u64
}

/// Draw `count` distinct indices, each step choosing among the remaining
/// indices with probability proportional to `weights`. Once the positive
/// weights are exhausted the rest are drawn uniformly.
fn weighted_without_replacement<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut remaining: Vec<f64> = weights.to_vec();
    let mut taken = vec![false; weights.len()];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count.min(weights.len()) {
        let total: f64 = remaining.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (j, w) in remaining.iter().enumerate() {
                if *w > 0.0 {
                    acc += w;
                    chosen = Some(j);
                    if u < acc {
                        break;
                    }
                }
            }
            chosen.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..weights.len()).filter(|&j| !taken[j]).collect();
            free[rng.random_range(0..free.len())]
        };
        taken[pick] = true;
        remaining[pick] = 0.0;
        out.push(pick);
    }
    out
}

/// Association-guided random population: sizes drawn i.i.d. from
/// `HyperGeom(6m, 2m, m)` with `m = min(n, d)`, active positions drawn
/// without replacement with probabilities proportional to `gamma`.
pub fn random_initial_population<R: Rng + ?Sized>(
    ds: &Dataset,
    gamma: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<ModelMask>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("population size must be >= 2, got {k}")));
    }
    if gamma.len() != ds.d() {
        return Err(Error::LengthMismatch {
            expected: ds.d(),
            got: gamma.len(),
        });
    }
    if gamma.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(Error::InvalidConfig("association measures must be >= 0".into()));
    }
    if !gamma.iter().any(|&g| g > 0.0) {
        return Err(Error::AllGammaZero);
    }
    let m = ds.n().min(ds.d()) as u64;
    let (start, pmf) = hypergeometric_pmf(6 * m, 2 * m, m);
    Ok((0..k)
        .map(|_| {
            let size = sample_from_pmf(start, &pmf, rng) as usize;
            ModelMask::from_indices(ds.d(), weighted_without_replacement(gamma, size, rng))
        })
        .collect())
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Standardised design (centred, unit population variance) in column-major
/// vectors; constant columns are returned as `None`.
fn standardize(ds: &Dataset) -> (Vec<Option<Vec<f64>>>, Vec<f64>) {
    let n = ds.n() as f64;
    let cols = (0..ds.d())
        .map(|j| {
            let col = ds.x().column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (var > 1e-14 * (1.0 + mean * mean)).then(|| {
                let sd = var.sqrt();
                col.iter().map(|v| (v - mean) / sd).collect()
            })
        })
        .collect();
    let ybar = ds.y().mean();
    (cols, ds.y().iter().map(|v| v - ybar).collect())
}

/// Distinct supports along a coordinate-descent lasso path.
///
/// Columns are standardised and the response centred. The grid has
/// `lambda_grid_size` log-spaced values from `lambda_max = max_j |X_j'Y|/n`
/// down to `1e-3 lambda_max`. Supports with `|u| >= n` are dropped; the
/// path stops once the support reaches `n - 1` variables.
pub fn lasso_path_models(ds: &Dataset, lambda_grid_size: usize) -> Vec<ModelMask> {
    let (n, d) = (ds.n(), ds.d());
    let nf = n as f64;
    let (cols, y) = standardize(ds);
    let corr: Vec<f64> = cols
        .iter()
        .map(|c| c.as_ref().map_or(0.0, |c| dot(c, &y) / nf))
        .collect();
    let lambda_max = corr.iter().map(|c| c.abs()).fold(0.0, f64::max);
    let null = ModelMask::empty(d);
    if lambda_max <= 0.0 || lambda_grid_size == 0 {
        return vec![null];
    }
    let lambdas = lambda_grid(lambda_max, lambda_grid_size);

    let mut beta = vec![0.0; d];
    let mut resid = y.clone();
    let mut out: Vec<ModelMask> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let tol = 1e-7;
    for &lambda in &lambdas {
        // active-set cycling with full sweeps to confirm convergence
        loop {
            let full_change = sweep(&cols, &mut beta, &mut resid, lambda, nf, None);
            if full_change < tol {
                break;
            }
            let active: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
            for _ in 0..1000 {
                if sweep(&cols, &mut beta, &mut resid, lambda, nf, Some(&active)) < tol {
                    break;
                }
            }
        }
        let support = ModelMask::from_indices(d, (0..d).filter(|&j| beta[j] != 0.0));
        if support.size() >= n {
            break;
        }
        let stop = support.size() + 1 >= n;
        if seen.insert(support.clone()) {
            out.push(support);
        }
        if stop {
            break;
        }
    }
    if out.is_empty() {
        out.push(null);
    }
    out
}

/// `count` log-spaced values from `lambda_max` down to `1e-3 lambda_max`.
pub fn lambda_grid(lambda_max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => (0..count)
            .map(|i| lambda_max * 10f64.powf(-3.0 * i as f64 / (count - 1) as f64))
            .collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One coordinate-descent pass; returns the largest coefficient change.
fn sweep(
    cols: &[Option<Vec<f64>>],
    beta: &mut [f64],
    resid: &mut [f64],
    lambda: f64,
    nf: f64,
    subset: Option<&[usize]>,
) -> f64 {
    let mut max_change: f64 = 0.0;
    let mut update = |j: usize| {
        let Some(col) = &cols[j] else { return };
        let old = beta[j];
        let z = dot(col, resid) / nf + old;
        let new = soft_threshold(z, lambda);
        if new != old {
            let delta = new - old;
            for (r, x) in resid.iter_mut().zip(col) {
                *r -= delta * x;
            }
            beta[j] = new;
            max_change = max_change.max(delta.abs());
        }
    };
    let d = cols.len();
    match subset {
        Some(idx) => idx.iter().for_each(|&j| update(j)),
        None => (0..d).for_each(update),
    }
    max_change
}

/// Dedupe `masks`, score them, keep the `k` fittest (padding with random
/// association-guided members when fewer are available) and check that at
/// least one member is feasible.
pub fn assemble_population<R: Rng + ?Sized>(
    masks: &[ModelMask],
    k: usize,
    ds: &Dataset,
    gic_cfg: &GicConfig,
    gamma: &[f64],
    ledger: &mut FitnessLedger,
    rng: &mut R,
) -> Result<Population> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("population size must be >= 2, got {k}")));
    }
    let mut distinct: Vec<ModelMask> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for m in masks {
        m.check_len(ds.d())?;
        if seen.insert(m.clone()) {
            distinct.push(m.clone());
        }
    }
    if distinct.len() < k {
        let pads = random_initial_population(ds, gamma, (k - distinct.len()).max(2), rng)?;
        distinct.extend(pads.into_iter().take(k - distinct.len()));
    }

    // feasible masks first so infeasible ones have a worst fitness to inherit
    let (feasible, oversized): (Vec<_>, Vec<_>) =
        distinct.into_iter().partition(|m| m.size() < ds.n());
    let mut scored: Vec<Member> = Vec::new();
    let mut deferred = oversized;
    for m in feasible {
        match fitness(ds, &m, gic_cfg, ledger) {
            Ok(f) => scored.push(Member {
                feasible: ledger.is_feasible_cached(&m),
                mask: m,
                fitness: f,
            }),
            Err(Error::NoFeasibleHistory) => deferred.push(m),
            Err(e) => return Err(e),
        }
    }
    if ledger.worst_feasible().is_none() {
        return Err(Error::ContractViolation(
            "no candidate model with |u| < n and a computable GIC".into(),
        ));
    }
    for m in deferred {
        let f = fitness(ds, &m, gic_cfg, ledger)?;
        scored.push(Member {
            feasible: ledger.is_feasible_cached(&m),
            mask: m,
            fitness: f,
        });
    }
    scored.sort_by(|a, b| {
        b.fitness
            .total_cmp(&a.fitness)
            .then_with(|| b.feasible.cmp(&a.feasible))
            .then_with(|| a.mask.size().cmp(&b.mask.size()))
            .then_with(|| a.mask.cmp(&b.mask))
    });
    scored.truncate(k);
    if !scored.iter().any(|m| m.feasible) {
        return Err(Error::ContractViolation("no feasible member after truncation".into()));
    }
    Ok(Population {
        generation: 0,
        members: scored,
    })
}

/// Initial masks for a GA run on `ds` of size `ga.resolved_population_size(d)`.
///
/// `explicit` supplies the masks for [`InitKind::Explicit`] and is ignored
/// otherwise. Lasso and explicit masks are padded with association-guided
/// random members when there are too few.
pub fn initial_population(
    ds: &Dataset,
    ga: &GaConfig,
    init: &InitConfig,
    gic_cfg: &GicConfig,
    explicit: Option<&[ModelMask]>,
) -> Result<Vec<ModelMask>> {
    let k = ga.resolved_population_size(ds.d());
    let gamma = match association_measures(ds, ga.association_kind) {
        Ok(g) => g,
        Err(Error::HolpRequiresWide { .. }) => association_measures(ds, AssociationKind::MarginalCorrelation)?,
        Err(e) => return Err(e),
    };
    let mut rng = rng::stream(ga.seed, tag::INIT, 0, 0);
    let seeds = match init.kind {
        InitKind::RandomAssoc => random_initial_population(ds, &gamma, k, &mut rng)?,
        InitKind::LassoPath => lasso_path_models(ds, init.lambda_grid_size),
        InitKind::Explicit => explicit
            .ok_or_else(|| Error::InvalidConfig("explicit initialisation needs a mask list".into()))?
            .to_vec(),
    };
    let mut ledger = FitnessLedger::new();
    let pop = assemble_population(&seeds, k, ds, gic_cfg, &gamma, &mut ledger, &mut rng)?;
    Ok(pop.members.into_iter().map(|m| m.mask).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 0)] - 1.5 * x[(i, 3)] + Distribution::<f64>::sample(&StandardNormal, &mut rng));
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn hypergeometric_pmf_matches_direct_formula() {
        // HyperGeom(12, 4, 5): direct binomial ratios
        let (lo, pmf) = hypergeometric_pmf(12, 4, 5);
        assert_eq!(lo, 0);
        let c = |n: u64, k: u64| -> f64 { (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product() };
        for (m, p) in pmf.iter().enumerate() {
            let m = m as u64;
            let direct = c(4, m) * c(8, 5 - m) / c(12, 5);
            assert!((p - direct).abs() < 1e-12);
        }
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_sizes_have_support_and_mean() {
        let ds = gaussian(30, 60, 1);
        let gamma = vec![1.0; 60];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let masks = random_initial_population(&ds, &gamma, 10_000, &mut rng).unwrap();
        let m = 30.0;
        let sizes: Vec<f64> = masks.iter().map(|u| u.size() as f64).collect();
        assert!(sizes.iter().all(|&s| s <= m));
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        // Var HyperGeom(N, M, n) = n (M/N)(1 - M/N)(N - n)/(N - 1)
        let (nn, mm, n) = (180.0, 60.0, 30.0);
        let var = n * (mm / nn) * (1.0 - mm / nn) * (nn - n) / (nn - 1.0);
        let se = (var / sizes.len() as f64).sqrt();
        assert!((mean - m / 3.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn concentrated_gamma_activates_that_index() {
        let ds = gaussian(20, 10, 3);
        let mut gamma = vec![0.0; 10];
        gamma[7] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in random_initial_population(&ds, &gamma, 200, &mut rng).unwrap() {
            if m.size() > 0 {
                assert!(m.get(7));
            }
        }
        assert!(matches!(
            random_initial_population(&ds, &[0.0; 10], 3, &mut rng),
            Err(Error::AllGammaZero)
        ));
    }

    #[test]
    fn lasso_above_lambda_max_is_null() {
        let ds = gaussian(40, 8, 5);
        let path = lasso_path_models(&ds, 1);
        assert_eq!(path, vec![ModelMask::empty(8)]);
    }

    #[test]
    fn lasso_orthonormal_design_matches_soft_threshold() {
        // centred +-1 Walsh columns of length 8: orthogonal, unit variance
        let walsh = |i: usize, j: usize| if (i & j).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        let cols = [1usize, 2, 3, 4, 5, 6, 7];
        let x = DMatrix::from_fn(8, 7, |i, j| walsh(i, cols[j]));
        let beta = [3.0, -2.0, 1.0, 0.5, 0.0, 0.25, -0.1];
        let y = DVector::from_fn(8, |i, _| (0..7).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + 0.7);
        let ds = Dataset::new(x.clone(), y.clone()).unwrap();
        let grid = 30;
        let path = lasso_path_models(&ds, grid);

        let ybar = y.mean();
        let z: Vec<f64> = (0..7)
            .map(|j| (0..8).map(|i| x[(i, j)] * (y[i] - ybar)).sum::<f64>() / 8.0)
            .collect();
        let lmax = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut expected: Vec<ModelMask> = Vec::new();
        for i in 0..grid {
            let lambda = lmax * 10f64.powf(-3.0 * i as f64 / (grid - 1) as f64);
            let m = ModelMask::from_indices(7, (0..7).filter(|&j| z[j].abs() > lambda));
            if m.size() >= 8 {
                break;
            }
            let stop = m.size() + 1 >= 8;
            if !expected.contains(&m) {
                expected.push(m);
            }
            if stop {
                break;
            }
        }
        assert_eq!(path, expected);
    }

    #[test]
    fn lasso_path_is_distinct_and_feasible() {
        let ds = gaussian(30, 80, 6);
        let path = lasso_path_models(&ds, 100);
        let set: std::collections::HashSet<_> = path.iter().collect();
        assert_eq!(set.len(), path.len());
        assert!(path.iter().all(|m| m.size() < 30));
        assert!(path.iter().any(|m| m.get(0) && m.get(3)));
    }

    #[test]
    fn assemble_truncates_and_pads() {
        let ds = gaussian(40, 6, 7);
        let gic = GicConfig::for_dataset(&ds);
        let gamma = vec![1.0; 6];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let masks: Vec<ModelMask> = ["100100", "100000", "000100", "111111", "010000"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let mut ledger = FitnessLedger::new();
        let pop = assemble_population(&masks, 3, &ds, &gic, &gamma, &mut ledger, &mut rng).unwrap();
        assert_eq!(pop.len(), 3);
        let mut all: Vec<(f64, String)> = masks
            .iter()
            .map(|m| (-crate::model::gic(&ds, m, &gic).unwrap(), m.to_string()))
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0));
        let kept: Vec<String> = pop.masks().map(|m| m.to_string()).collect();
        assert_eq!(kept, all.iter().take(3).map(|x| x.1.clone()).collect::<Vec<_>>());

        let mut ledger = FitnessLedger::new();
        let pop = assemble_population(&masks[..1], 4, &ds, &gic, &gamma, &mut ledger, &mut rng).unwrap();
        assert_eq!(pop.len(), 4);
        assert!(pop.masks().any(|m| *m == masks[0]));
    }

    #[test]
    fn assemble_rejects_all_oversized() {
        let ds = gaussian(3, 6, 8);
        let gic = GicConfig::for_dataset(&ds);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let masks = vec![ModelMask::from_indices(6, 0..3), ModelMask::full(6)];
        let mut ledger = FitnessLedger::new();
        assert!(matches!(
            assemble_population(&masks, 2, &ds, &gic, &[1.0; 6], &mut ledger, &mut rng),
            Err(Error::ContractViolation(_))
        ));
    }
}
