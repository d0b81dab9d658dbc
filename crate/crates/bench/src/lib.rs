//! Fixtures shared by the benchmarks.

use cand_core::ga::{selection_weights, Member};
use cand_core::{Dataset, ModelMask, Population};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian design with the first `s` coefficients equal to one.
pub fn gaussian_dataset(n: usize, d: usize, s: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let y = DVector::from_fn(n, |i, _| {
        (0..s).map(|j| x[(i, j)]).sum::<f64>() + Distribution::<f64>::sample(&StandardNormal, &mut rng)
    });
    Dataset::new(x, y).unwrap()
}

/// Random population of `k` masks over `d` bits with softmax weights.
pub fn random_population(d: usize, k: usize, seed: u64) -> (Population, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members: Vec<Member> = (0..k)
        .map(|_| Member {
            mask: ModelMask::from_bools(&(0..d).map(|_| rng.random_bool(0.3)).collect::<Vec<_>>()),
            fitness: rng.random_range(-5.0..5.0),
            feasible: true,
        })
        .collect();
    let pop = Population {
        generation: 0,
        members,
    };
    let w = selection_weights(&pop.fitnesses());
    (pop, w)
}
