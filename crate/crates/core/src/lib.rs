//! Candidate model search for linear regression with a genetic algorithm,
//! and multi-model inference on the resulting candidate set.
//!
//! The crate is organised by subsystem:
//!
//! * [`model`]: least squares, GIC and the history-aware fitness.
//! * [`ga`]: selection, crossover, mutation, elitism and termination.
//! * [`init`]: initial populations (association-guided random, lasso path).
//! * [`schema`]: schema algebra and exact child-matching probabilities.
//! * [`markov`]: exact Markov chain of the GA on tiny instances.
//! * [`inference`]: best model, survival model sets, model averaging, SOIL.
//! * [`sim`]: simulation cases and seeded experiments.

pub mod dataset;
pub mod error;
pub mod ga;
pub mod inference;
pub mod init;
pub mod markov;
pub mod mask;
pub mod model;
pub mod rng;
pub mod schema;
pub mod sim;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use ga::{GaConfig, GaResult, Member, MutationKind, Population};
pub use mask::ModelMask;
pub use model::{fit_least_squares, fitness, gic, FitResult, FitnessLedger, GicConfig};
pub use schema::Schema;
pub use inference::CandidateSet;
pub use sim::{CaseSpec, ExperimentConfig, ExperimentReport};
