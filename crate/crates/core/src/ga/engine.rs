use std::collections::HashSet;

use rand::Rng;

use super::operators::{elitist_index, select_parent_pair, selection_weights, uniform_crossover, Mutation};
use super::{association_measures, should_terminate, GaConfig, GaResult, Member, MutationKind, Population};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mask::ModelMask;
use crate::model::{fitness, FitnessLedger, GicConfig};
use crate::rng::{self, tag};

/// What an observer sees once per generation: the population and the
/// selection weights used to breed the next generation from it.
#[derive(Debug)]
pub struct GenerationView<'a> {
    pub population: &'a Population,
    pub weights: &'a [f64],
    pub elite_index: usize,
}

/// One child: proportional selection of two parents, uniform crossover,
/// then mutation.
pub fn breed_child<R: Rng + ?Sized>(
    population: &Population,
    weights: &[f64],
    mutation: &Mutation<'_>,
    rng: &mut R,
) -> Result<ModelMask> {
    let (a, b) = select_parent_pair(population, weights, rng);
    let child = uniform_crossover(&population.members[a].mask, &population.members[b].mask, rng)?;
    Ok(mutation.apply(&child, rng))
}

/// Run the GA from `initial` with a fresh fitness ledger.
pub fn run_ga(
    ds: &Dataset,
    cfg: &GaConfig,
    gic_cfg: &GicConfig,
    initial: &[ModelMask],
) -> Result<GaResult> {
    let mut ledger = FitnessLedger::new();
    run_ga_observed(ds, cfg, gic_cfg, initial, &mut ledger, |_| {})
}

fn refresh(pop: &mut Population, ledger: &FitnessLedger) {
    for m in &mut pop.members {
        if !m.feasible {
            if let Some(w) = ledger.worst_feasible() {
                m.fitness = w;
            }
        }
    }
}

fn score(
    ds: &Dataset,
    mask: ModelMask,
    gic_cfg: &GicConfig,
    ledger: &mut FitnessLedger,
) -> Result<Member> {
    let f = fitness(ds, &mask, gic_cfg, ledger)?;
    let feasible = ledger.is_feasible_cached(&mask);
    Ok(Member {
        mask,
        fitness: f,
        feasible,
    })
}

/// Run the GA, calling `observer` once for every generation (including
/// generation 0 and the final one). The population size is the length of
/// `initial`; `cfg.population_size` is only consulted by initialisers.
pub fn run_ga_observed<F>(
    ds: &Dataset,
    cfg: &GaConfig,
    gic_cfg: &GicConfig,
    initial: &[ModelMask],
    ledger: &mut FitnessLedger,
    mut observer: F,
) -> Result<GaResult>
where
    F: FnMut(&GenerationView<'_>),
{
    let d = ds.d();
    let k = initial.len();
    if k < 2 {
        return Err(Error::ContractViolation(format!("population size {k} < 2")));
    }
    for m in initial {
        m.check_len(d)?;
    }
    cfg.validate(d)?;
    let pi_m = cfg.resolved_mutation_rate(d);
    let gamma;
    let mutation = match cfg.mutation_kind {
        MutationKind::Uniform => Mutation::Uniform { pi_m },
        MutationKind::Adaptive => {
            gamma = association_measures(ds, cfg.association_kind)?;
            Mutation::Adaptive { gamma: &gamma, pi_m }
        }
    };
    mutation.validate(d)?;

    let mut seen: HashSet<ModelMask> = HashSet::new();

    // feasible members first so that infeasible ones have a history to inherit
    let mut slots: Vec<Option<Member>> = vec![None; k];
    for (i, m) in initial.iter().enumerate() {
        if m.size() < ds.n() {
            match score(ds, m.clone(), gic_cfg, ledger) {
                Ok(member) => slots[i] = Some(member),
                Err(Error::NoFeasibleHistory) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if ledger.worst_feasible().is_none() {
        return Err(Error::ContractViolation(
            "initial population has no model with a computable GIC".into(),
        ));
    }
    let members = slots
        .into_iter()
        .zip(initial)
        .map(|(slot, m)| match slot {
            Some(member) => Ok(member),
            None => score(ds, m.clone(), gic_cfg, ledger),
        })
        .collect::<Result<Vec<_>>>()?;
    seen.extend(initial.iter().cloned());

    let mut pop = Population {
        generation: 0,
        members,
    };
    refresh(&mut pop, ledger);
    let mut fitness_history: Vec<Vec<f64>> = vec![pop.fitnesses()];
    let mut mean_history = vec![pop.mean_fitness()];
    let mut best_history = vec![pop.best_fitness()];

    loop {
        let t = pop.generation;
        let weights = selection_weights(&pop.fitnesses());
        let elite = elitist_index(&pop);
        observer(&GenerationView {
            population: &pop,
            weights: &weights,
            elite_index: elite,
        });
        let lagged = t
            .checked_sub(cfg.termination_gap)
            .map(|lag| fitness_history[lag].as_slice())
            .unwrap_or(&[]);
        if should_terminate(t, &fitness_history[t], lagged, cfg) {
            break;
        }

        let mut next = Vec::with_capacity(k);
        next.push(pop.members[elite].clone());
        for slot in 1..k {
            let mut child_rng = rng::stream(cfg.seed, tag::GA_CHILD, (t + 1) as u64, slot as u64);
            let child = breed_child(&pop, &weights, &mutation, &mut child_rng)?;
            seen.insert(child.clone());
            next.push(score(ds, child, gic_cfg, ledger)?);
        }
        pop = Population {
            generation: t + 1,
            members: next,
        };
        refresh(&mut pop, ledger);
        fitness_history.push(pop.fitnesses());
        mean_history.push(pop.mean_fitness());
        best_history.push(pop.best_fitness());
    }

    let elite = elitist_index(&pop);
    Ok(GaResult {
        best: pop.members[elite].mask.clone(),
        best_fitness: pop.members[elite].fitness,
        generations_run: pop.generation,
        final_population: pop,
        mean_fitness_history: mean_history,
        best_fitness_history: best_history,
        models_evaluated: seen.len(),
        population_size: k,
        mutation_rate: pi_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::AssociationKind;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn signal_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |i, _| {
            3.0 * x[(i, 0)] - 2.0 * x[(i, 1)] + 2.0 * x[(i, 2)] + Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        Dataset::new(x, y).unwrap()
    }

    fn random_masks(d: usize, k: usize, seed: u64) -> Vec<ModelMask> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k)
            .map(|_| ModelMask::from_indices(d, (0..d).filter(|_| rng.random::<f64>() < 0.2)))
            .collect()
    }

    #[test]
    fn frozen_population_stays_put() {
        let ds = signal_dataset(60, 10, 1);
        let gic = GicConfig::for_dataset(&ds);
        let m = ModelMask::from_indices(10, [0, 4]);
        let cfg = GaConfig {
            mutation_kind: MutationKind::Uniform,
            mutation_rate: Some(1e-12),
            seed: 3,
            ..GaConfig::default()
        };
        let res = run_ga(&ds, &cfg, &gic, &vec![m.clone(); 6]).unwrap();
        assert_eq!(res.best, m);
        assert_eq!(res.generations_run, cfg.termination_gap);
        assert_eq!(res.models_evaluated, 1);
    }

    #[test]
    fn finds_strong_signal_and_is_monotone() {
        let ds = signal_dataset(100, 20, 2);
        let gic = GicConfig::for_dataset(&ds);
        let cfg = GaConfig {
            population_size: 20,
            seed: 11,
            ..GaConfig::default()
        };
        let res = run_ga(&ds, &cfg, &gic, &random_masks(20, 20, 5)).unwrap();
        assert_eq!(res.best, ModelMask::from_indices(20, [0, 1, 2]));
        assert!(res.best_fitness_history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(res.final_population.len(), 20);
        assert!(res.models_evaluated <= 20 * (res.generations_run + 1));
        assert_eq!(res.mean_fitness_history.len(), res.generations_run + 1);
    }

    #[test]
    fn runs_are_deterministic() {
        let ds = signal_dataset(50, 15, 3);
        let gic = GicConfig::for_dataset(&ds);
        let cfg = GaConfig {
            seed: 99,
            max_generations: 25,
            ..GaConfig::default()
        };
        let init = random_masks(15, 12, 1);
        let a = run_ga(&ds, &cfg, &gic, &init).unwrap();
        let b = run_ga(&ds, &cfg, &gic, &init).unwrap();
        assert_eq!(a.final_population, b.final_population);
        assert_eq!(a.best_fitness_history, b.best_fitness_history);
        let c = run_ga(&ds, &GaConfig { seed: 100, ..cfg.clone() }, &gic, &init).unwrap();
        assert_ne!(a.final_population, c.final_population);
    }

    #[test]
    fn infeasible_members_inherit_worst_fitness() {
        let ds = signal_dataset(8, 12, 4);
        let gic = GicConfig::for_dataset(&ds);
        let cfg = GaConfig {
            max_generations: 15,
            mutation_kind: MutationKind::Adaptive,
            association_kind: AssociationKind::Holp,
            seed: 1,
            ..GaConfig::default()
        };
        let init = vec![
            ModelMask::from_indices(12, [0]),
            ModelMask::from_indices(12, 0..9),
            ModelMask::from_indices(12, [1, 2]),
            ModelMask::full(12),
        ];
        let mut ledger = FitnessLedger::new();
        let mut checked = 0;
        run_ga_observed(&ds, &cfg, &gic, &init, &mut ledger, |view| {
            for m in &view.population.members {
                if m.mask.size() >= ds.n() {
                    checked += 1;
                    assert!(!m.feasible);
                }
            }
            let worst = view
                .population
                .members
                .iter()
                .filter(|m| !m.feasible)
                .map(|m| m.fitness)
                .collect::<Vec<_>>();
            let min_feasible = view
                .population
                .members
                .iter()
                .filter(|m| m.feasible)
                .map(|m| m.fitness)
                .fold(f64::INFINITY, f64::min);
            for w in worst {
                assert!(w <= min_feasible);
            }
        })
        .unwrap();
        assert!(checked >= 2);
        // replay: worst feasible equals the minimum cached feasible fitness
        let min_cached = ledger.feasible_entries().map(|(_, f)| f).fold(f64::INFINITY, f64::min);
        assert_eq!(ledger.worst_feasible(), Some(min_cached));
    }

    #[test]
    fn rejects_bad_initial_population() {
        let ds = signal_dataset(5, 8, 4);
        let gic = GicConfig::for_dataset(&ds);
        let cfg = GaConfig::default();
        assert!(matches!(
            run_ga(&ds, &cfg, &gic, &[ModelMask::empty(8)]),
            Err(Error::ContractViolation(_))
        ));
        let all_big = vec![ModelMask::full(8); 3];
        assert!(matches!(
            run_ga(&ds, &cfg, &gic, &all_big),
            Err(Error::ContractViolation(_))
        ));
    }
}
