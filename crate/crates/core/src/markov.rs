//! The GA with proportional selection, uniform crossover, uniform mutation
//! and elitism as an exact Markov chain over population multisets, for tiny
//! `(d, K)`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{breed_child, elitist_index, selection_weights, Member, Mutation, Population};
use crate::mask::ModelMask;

/// Largest state space the exact chain will build.
pub const MAX_STATES: u128 = 100_000;

/// A population state: `K` mask codes in non-decreasing order.
pub type State = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub d: usize,
    pub k: usize,
    pub pi_m: f64,
    /// Fitness of every mask, indexed by mask code (bit `j` is position `j`).
    pub fitness_table: Vec<f64>,
}

impl ChainSpec {
    pub fn new(d: usize, k: usize, pi_m: f64, fitness_table: Vec<f64>) -> Result<Self> {
        let spec = Self {
            d,
            k,
            pi_m,
            fitness_table,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 16 {
            return Err(Error::InvalidConfig(format!("d must lie in 1..=16, got {}", self.d)));
        }
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("K must be >= 2, got {}", self.k)));
        }
        if !(self.pi_m > 0.0 && self.pi_m < 1.0) {
            return Err(Error::InvalidConfig(format!("pi_m must lie in (0, 1), got {}", self.pi_m)));
        }
        if self.fitness_table.len() != 1 << self.d {
            return Err(Error::LengthMismatch {
                expected: 1 << self.d,
                got: self.fitness_table.len(),
            });
        }
        if self.fitness_table.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidConfig("fitness table must be finite".into()));
        }
        let best = self.best_code();
        let top = self.fitness_table[best as usize];
        if self
            .fitness_table
            .iter()
            .enumerate()
            .any(|(i, &f)| i != best as usize && f == top)
        {
            return Err(Error::InvalidConfig("fitness table must have a unique maximum".into()));
        }
        let count = multiset_count(1 << self.d, self.k);
        if count > MAX_STATES {
            return Err(Error::TooLarge(count));
        }
        Ok(())
    }

    /// Code of the best mask `u*`.
    pub fn best_code(&self) -> u32 {
        let mut best = 0;
        for (i, f) in self.fitness_table.iter().enumerate() {
            if *f > self.fitness_table[best] {
                best = i;
            }
        }
        best as u32
    }

    fn mask(&self, code: u32) -> ModelMask {
        ModelMask::from_code(self.d, code as u64)
    }
}

/// Parses `2^d` whitespace- or comma-separated fitness values.
pub fn parse_fitness_table(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("fitness value {t:?}: {e}")))
        })
        .collect()
}

/// `C(m + k - 1, k)`, saturating.
pub fn multiset_count(m: usize, k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c.saturating_mul(m as u128 + i) / (i + 1);
    }
    c
}

/// All size-`k` multisets over the `2^d` masks, in lexicographic order of
/// their sorted code sequences.
pub fn enumerate_states(d: usize, k: usize) -> Result<Vec<State>> {
    if d > 16 {
        return Err(Error::TooLarge(u128::MAX));
    }
    let m = 1usize << d;
    let count = multiset_count(m, k);
    if count > MAX_STATES {
        return Err(Error::TooLarge(count));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = Vec::with_capacity(k);
    fn rec(m: u32, k: usize, start: u32, cur: &mut Vec<u32>, out: &mut Vec<State>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for c in start..m {
            cur.push(c);
            rec(m, k, c, cur, out);
            cur.pop();
        }
    }
    rec(m as u32, k, 0, &mut cur, &mut out);
    Ok(out)
}

pub fn contains_best(state: &State, spec: &ChainSpec) -> bool {
    state.contains(&spec.best_code())
}

/// Law of one bred child over all `2^d` masks, by the per-position product
/// over ordered parent pairs.
pub fn child_mask_law(state: &State, spec: &ChainSpec) -> Vec<f64> {
    let fit: Vec<f64> = state.iter().map(|&c| spec.fitness_table[c as usize]).collect();
    let w = selection_weights(&fit);
    let m = 1u32 << spec.d;
    let pi = spec.pi_m;
    let mut q = vec![0.0; m as usize];
    for (v, qv) in q.iter_mut().enumerate() {
        let v = v as u32;
        let mut total = 0.0;
        for (a, wa) in state.iter().zip(&w) {
            for (b, wb) in state.iter().zip(&w) {
                let mut p = 1.0;
                for j in 0..spec.d {
                    let bit = (v >> j) & 1;
                    let hits = (((a >> j) & 1) == bit) as u8 + (((b >> j) & 1) == bit) as u8;
                    let qj = hits as f64 / 2.0;
                    p *= qj * (1.0 - pi) + (1.0 - qj) * pi;
                }
                total += wa * wb * p;
            }
        }
        *qv = total;
    }
    q
}

fn elite_code(state: &State, spec: &ChainSpec) -> u32 {
    *state
        .iter()
        .max_by(|a, b| spec.fitness_table[**a as usize].total_cmp(&spec.fitness_table[**b as usize]))
        .unwrap()
}

/// One-step transition law from `state` as `(next state, probability)`
/// pairs: the elite survives and the other `K - 1` members are i.i.d. draws
/// from [`child_mask_law`].
pub fn one_step_kernel(state: &State, spec: &ChainSpec) -> Vec<(State, f64)> {
    let q = child_mask_law(state, spec);
    let elite = elite_code(state, spec);
    let children = spec.k - 1;
    let ln_fact = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    let mut out: HashMap<State, f64> = HashMap::new();
    let mut counts = vec![0usize; q.len()];
    fn rec(
        pos: usize,
        left: usize,
        counts: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            f(counts);
            counts[pos] = 0;
            return;
        }
        for c in 0..=left {
            counts[pos] = c;
            rec(pos + 1, left - c, counts, f);
        }
        counts[pos] = 0;
    }
    let total_ln = ln_fact(children);
    rec(0, children, &mut counts, &mut |counts: &[usize]| {
        let mut p = total_ln.exp();
        let mut next = vec![elite];
        for (code, &c) in counts.iter().enumerate() {
            if c > 0 {
                p *= q[code].powi(c as i32) / ln_fact(c).exp();
                next.extend(std::iter::repeat_n(code as u32, c));
            }
        }
        if p > 0.0 {
            next.sort_unstable();
            *out.entry(next).or_insert(0.0) += p;
        }
    });
    let mut v: Vec<(State, f64)> = out.into_iter().collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

/// Sparse row-stochastic matrix: row `i` lists `(column, probability)`.
pub type SparseMatrix = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone)]
pub struct Chain {
    pub spec: ChainSpec,
    pub states: Vec<State>,
    pub transition: SparseMatrix,
    index: HashMap<State, usize>,
}

impl Chain {
    pub fn build(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        let states = enumerate_states(spec.d, spec.k)?;
        let index: HashMap<State, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let transition = states
            .iter()
            .map(|s| {
                one_step_kernel(s, spec)
                    .into_iter()
                    .map(|(t, p)| (index[&t], p))
                    .collect()
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            states,
            transition,
            index,
        })
    }

    pub fn state_index(&self, state: &State) -> Option<usize> {
        let mut s = state.clone();
        s.sort_unstable();
        self.index.get(&s).copied()
    }

    /// Indicator of `M_max` (states containing `u*`) per state.
    pub fn in_m_max(&self) -> Vec<bool> {
        self.states.iter().map(|s| contains_best(s, &self.spec)).collect()
    }

    /// Largest `|row sum - 1|`.
    pub fn max_row_error(&self) -> f64 {
        self.transition
            .iter()
            .map(|r| (r.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `P(u* in Psi(t))` for `t = 0..=steps` from the initial law `start`.
    pub fn absorption_curve(&self, start: &[f64], steps: usize) -> Vec<f64> {
        let mask = self.in_m_max();
        let mass = |p: &[f64]| p.iter().zip(&mask).filter(|(_, m)| **m).map(|(x, _)| x).sum::<f64>();
        let mut p = start.to_vec();
        let mut out = vec![mass(&p)];
        for _ in 0..steps {
            p = left_multiply(&p, &self.transition);
            out.push(mass(&p));
        }
        out
    }
}

/// `p' P` for a sparse `P`.
pub fn left_multiply(p: &[f64], transition: &SparseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for (i, row) in transition.iter().enumerate() {
        if p[i] == 0.0 {
            continue;
        }
        for &(j, pij) in row {
            out[j] += p[i] * pij;
        }
    }
    out
}

pub const STATIONARY_TOL: f64 = 1e-12;
pub const STATIONARY_MAX_ITER: usize = 1_000_000;

/// Power iteration from the uniform law until successive iterates differ by
/// less than `1e-12` in L1.
pub fn stationary_distribution(transition: &SparseMatrix) -> Result<Vec<f64>> {
    let n = transition.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty transition matrix".into()));
    }
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..STATIONARY_MAX_ITER {
        let mut next = left_multiply(&p, transition);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if change < STATIONARY_TOL {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence(STATIONARY_MAX_ITER))
}

/// Smallest one-step probability of landing in `M_max`, over all states.
pub fn xi(chain: &Chain) -> Result<f64> {
    let mask = chain.in_m_max();
    let xi = chain
        .transition
        .iter()
        .map(|row| row.iter().filter(|(j, _)| mask[*j]).map(|(_, p)| p).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    if xi <= 1e-15 {
        return Err(Error::XiZero);
    }
    Ok(xi.min(1.0))
}

/// Smallest `T` with `(1 - xi)^T <= alpha`; 0 for `alpha >= 1`.
pub fn t_alpha(xi: f64, alpha: f64) -> Result<usize> {
    if alpha >= 1.0 {
        return Ok(0);
    }
    if alpha < 1e-6 {
        return Err(Error::InvalidConfig(format!("alpha must be >= 1e-6, got {alpha}")));
    }
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::XiZero);
    }
    if xi >= 1.0 {
        return Ok(1);
    }
    let mut t = (alpha.ln() / (1.0 - xi).ln()).ceil().max(0.0) as usize;
    while t > 0 && (1.0 - xi).powi(t as i32 - 1) <= alpha {
        t -= 1;
    }
    while (1.0 - xi).powi(t as i32) > alpha {
        t += 1;
    }
    Ok(t)
}

pub fn xi_and_t_alpha(chain: &Chain, alpha: f64) -> Result<(f64, usize)> {
    let x = xi(chain)?;
    Ok((x, t_alpha(x, alpha)?))
}

/// Simulates the GA operators directly (not the kernel) from `start` for
/// `steps` generations and returns the canonical state after each one.
pub fn simulate<R: Rng + ?Sized>(
    spec: &ChainSpec,
    start: &State,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<State>> {
    if start.len() != spec.k {
        return Err(Error::LengthMismatch {
            expected: spec.k,
            got: start.len(),
        });
    }
    let mutation = Mutation::Uniform { pi_m: spec.pi_m };
    let mut pop = Population {
        generation: 0,
        members: start
            .iter()
            .map(|&c| Member {
                mask: spec.mask(c),
                fitness: spec.fitness_table[c as usize],
                feasible: true,
            })
            .collect(),
    };
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let w = selection_weights(&pop.fitnesses());
        let elite = elitist_index(&pop);
        let mut next = vec![pop.members[elite].clone()];
        for _ in 1..spec.k {
            let child = breed_child(&pop, &w, &mutation, rng)?;
            let code = child.code() as usize;
            next.push(Member {
                mask: child,
                fitness: spec.fitness_table[code],
                feasible: true,
            });
        }
        pop = Population {
            generation: t + 1,
            members: next,
        };
        let mut s: State = pop.members.iter().map(|m| m.mask.code() as u32).collect();
        s.sort_unstable();
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub d: usize,
    pub k: usize,
    pub pi_m: f64,
    pub best_mask: String,
    pub state_count: usize,
    pub m_max_state_count: usize,
    pub max_row_error: f64,
    pub stationary_mass_m_max: f64,
    pub min_stationary_mass_m_max: f64,
    pub max_stationary_mass_outside: f64,
    pub xi: f64,
    pub alpha: f64,
    pub t_alpha: usize,
}

pub fn verify(spec: &ChainSpec, alpha: f64) -> Result<MarkovReport> {
    let chain = Chain::build(spec)?;
    let pi = stationary_distribution(&chain.transition)?;
    let mask = chain.in_m_max();
    let mut on = 0.0;
    let mut min_on = f64::INFINITY;
    let mut max_off: f64 = 0.0;
    for (p, m) in pi.iter().zip(&mask) {
        if *m {
            on += p;
            min_on = min_on.min(*p);
        } else {
            max_off = max_off.max(*p);
        }
    }
    let (x, t) = xi_and_t_alpha(&chain, alpha)?;
    Ok(MarkovReport {
        d: spec.d,
        k: spec.k,
        pi_m: spec.pi_m,
        best_mask: spec.mask(spec.best_code()).to_string(),
        state_count: chain.states.len(),
        m_max_state_count: mask.iter().filter(|m| **m).count(),
        max_row_error: chain.max_row_error(),
        stationary_mass_m_max: on,
        min_stationary_mass_m_max: min_on,
        max_stationary_mass_outside: max_off,
        xi: x,
        alpha,
        t_alpha: t,
    })
}
