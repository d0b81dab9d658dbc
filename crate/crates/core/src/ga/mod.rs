//! The evolutionary loop: proportional selection, uniform crossover,
//! uniform or adaptive mutation, elitism and adaptive termination.

mod association;
mod engine;
mod operators;
mod termination;

pub use association::{association_measures, AssociationKind};
pub use engine::{breed_child, run_ga, run_ga_observed, GenerationView};
pub use operators::{
    adaptive_flip_probabilities, adaptive_mutation, elitist, elitist_index, min_population_size,
    select_parent_pair, selection_weights, uniform_crossover, uniform_mutation, Mutation,
};
pub(crate) use operators::softmax_half;
pub use termination::{should_terminate, welch_t_test, WelchTest};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::ModelMask;

/// `P*` used by the automatic population size rule.
pub const AUTO_P_STAR: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    Uniform,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// `K`; 0 selects `4 * min_population_size(d, 0.9999)`.
    pub population_size: usize,
    /// `pi_m`; `None` selects `1/d`.
    pub mutation_rate: Option<f64>,
    pub mutation_kind: MutationKind,
    pub association_kind: AssociationKind,
    pub termination_alpha: f64,
    pub termination_gap: usize,
    pub max_generations: usize,
    /// Stop when equality of mean fitness is rejected instead of when it is
    /// not rejected.
    pub terminate_on_reject: bool,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 0,
            mutation_rate: None,
            mutation_kind: MutationKind::Adaptive,
            association_kind: AssociationKind::MarginalCorrelation,
            termination_alpha: 0.05,
            termination_gap: 10,
            max_generations: 200,
            terminate_on_reject: false,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn resolved_population_size(&self, d: usize) -> usize {
        if self.population_size == 0 {
            4 * min_population_size(d, AUTO_P_STAR)
        } else {
            self.population_size
        }
    }

    pub fn resolved_mutation_rate(&self, d: usize) -> f64 {
        self.mutation_rate.unwrap_or(1.0 / d as f64)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let k = self.resolved_population_size(d);
        if k < 2 {
            return Err(Error::InvalidConfig(format!("population size must be >= 2, got {k}")));
        }
        let pi = self.resolved_mutation_rate(d);
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::InvalidConfig(format!("mutation rate must lie in (0, 1), got {pi}")));
        }
        if self.termination_gap < 1 {
            return Err(Error::InvalidConfig("termination gap must be >= 1".into()));
        }
        if !(self.termination_alpha > 0.0 && self.termination_alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "termination alpha must lie in (0, 1), got {}",
                self.termination_alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub mask: ModelMask,
    pub fitness: f64,
    /// False for oversized or rank-deficient models, whose fitness tracks the
    /// worst feasible fitness of the run.
    #[serde(default = "feasible_default")]
    pub feasible: bool,
}

fn feasible_default() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub generation: usize,
    pub members: Vec<Member>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn fitnesses(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.fitness).collect()
    }

    pub fn masks(&self) -> impl Iterator<Item = &ModelMask> {
        self.members.iter().map(|m| &m.mask)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.members.iter().map(|m| m.fitness).sum::<f64>() / self.len() as f64
    }

    pub fn best_fitness(&self) -> f64 {
        self.members
            .iter()
            .map(|m| m.fitness)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distinct masks in first-appearance order.
    pub fn distinct_masks(&self) -> Vec<ModelMask> {
        let mut seen = std::collections::HashSet::new();
        self.masks().filter(|m| seen.insert(*m)).cloned().collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaResult {
    pub final_population: Population,
    pub best: ModelMask,
    pub best_fitness: f64,
    pub generations_run: usize,
    pub mean_fitness_history: Vec<f64>,
    pub best_fitness_history: Vec<f64>,
    pub models_evaluated: usize,
    pub population_size: usize,
    pub mutation_rate: f64,
}
