//! Schemata over model masks and the probability that one child
//! construction (selection, uniform crossover, uniform mutation) lands in a
//! schema.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ga::{breed_child, run_ga_observed, GaConfig, GaResult, GenerationView, Mutation, Population};
use crate::mask::ModelMask;
use crate::model::{FitnessLedger, GicConfig};
use crate::rng::{self, tag};

/// A pattern over `{0, 1, *}`; `None` is the wildcard.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Schema {
    pattern: Vec<Option<bool>>,
}

impl Schema {
    pub fn new(pattern: Vec<Option<bool>>) -> Self {
        Self { pattern }
    }

    /// The all-wildcard schema of length `d`.
    pub fn any(d: usize) -> Self {
        Self {
            pattern: vec![None; d],
        }
    }

    /// The order-`d` schema matching exactly `mask`.
    pub fn exact(mask: &ModelMask) -> Self {
        Self {
            pattern: mask.iter().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn pattern(&self) -> &[Option<bool>] {
        &self.pattern
    }

    pub fn order(&self) -> usize {
        self.pattern.iter().filter(|p| p.is_some()).count()
    }

    /// Number of masks matching the schema, `2^(d - order)`; `None` when it
    /// does not fit in a `u128`.
    pub fn expansion_count(&self) -> Option<u128> {
        let free = (self.len() - self.order()) as u32;
        1u128.checked_shl(free)
    }

    fn fixed(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.pattern
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|b| (j, b)))
    }

    fn check(&self, mask: &ModelMask) -> Result<()> {
        mask.check_len(self.len())
    }

    pub fn matches(&self, mask: &ModelMask) -> Result<bool> {
        self.check(mask)?;
        Ok(self.fixed().all(|(j, b)| mask.get(j) == b))
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.pattern {
            let c = match p {
                Some(true) => '1',
                Some(false) => '0',
                None => '*',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Schema({self})")
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty schema".into()));
        }
        let pattern = s
            .chars()
            .map(|c| match c {
                '0' => Ok(Some(false)),
                '1' => Ok(Some(true)),
                '*' => Ok(None),
                other => Err(Error::Parse(format!("invalid schema character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pattern })
    }
}

impl Serialize for Schema {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One schema per non-blank line; `#` starts a comment line.
pub fn parse_schema_lines(text: &str, d: usize) -> Result<Vec<Schema>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let h: Schema = l.parse()?;
            if h.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    got: h.len(),
                });
            }
            Ok(h)
        })
        .collect()
}

/// Fixed positions where `u` differs from `h`.
pub fn hamming_to_schema(u: &ModelMask, h: &Schema) -> Result<usize> {
    h.check(u)?;
    Ok(h.fixed().filter(|&(j, b)| u.get(j) != b).count())
}

/// Fixed positions of `h` where `u` and `v` disagree.
pub fn hamming_fixed(u: &ModelMask, v: &ModelMask, h: &Schema) -> Result<usize> {
    h.check(u)?;
    h.check(v)?;
    Ok(h.fixed().filter(|&(j, _)| u.get(j) != v.get(j)).count())
}

/// Fixed positions where `u` and `v` agree with each other but not with `h`.
pub fn h_kl(u: &ModelMask, v: &ModelMask, h: &Schema) -> Result<usize> {
    h.check(u)?;
    h.check(v)?;
    Ok(h.fixed()
        .filter(|&(j, b)| u.get(j) == v.get(j) && u.get(j) != b)
        .count())
}

fn check_weights(pop: &Population, weights: &[f64]) -> Result<()> {
    if pop.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: pop.len(),
            got: weights.len(),
        });
    }
    Ok(())
}

/// Selection mass on members matching `h`.
pub fn alpha_selection(pop: &Population, weights: &[f64], h: &Schema) -> Result<f64> {
    check_weights(pop, weights)?;
    let mut total = 0.0;
    for (m, w) in pop.members.iter().zip(weights) {
        if h.matches(&m.mask)? {
            total += w;
        }
    }
    Ok(total)
}

/// Per-pair counts on the fixed positions of `h`:
/// (disagreements, agreements that miss `h`).
fn pair_counts(u: &ModelMask, v: &ModelMask, h: &Schema) -> (i32, i32) {
    let mut dis = 0;
    let mut miss = 0;
    for (j, b) in h.fixed() {
        let (a, c) = (u.get(j), v.get(j));
        if a != c {
            dis += 1;
        } else if a != b {
            miss += 1;
        }
    }
    (dis, miss)
}

/// Exact probability that one child matches `h` under uniform mutation.
///
/// Sums over ordered parent pairs `(k, l)` of
/// `w_k w_l pi^h (1 - pi)^(ord - D) / 2^(D - h)`, where `h` counts fixed
/// positions on which both parents miss the schema and `D` counts fixed
/// positions on which the parents do not both match it.
pub fn alpha_exact(pop: &Population, weights: &[f64], h: &Schema, pi_m: f64) -> Result<f64> {
    check_weights(pop, weights)?;
    for m in &pop.members {
        h.check(&m.mask)?;
    }
    let ord = h.order() as i32;
    let mut total = 0.0;
    for (mk, wk) in pop.members.iter().zip(weights) {
        for (ml, wl) in pop.members.iter().zip(weights) {
            let (dis, miss) = pair_counts(&mk.mask, &ml.mask, h);
            let big_d = dis + miss;
            total += wk * wl * pi_m.powi(miss) * (1.0 - pi_m).powi(ord - big_d) / 2f64.powi(dis);
        }
    }
    Ok(total)
}

/// The three-term closed form (both parents match / one matches / neither
/// matches), evaluated term by term with `delta_H` as the count of fixed
/// positions on which the parents disagree. The one-match term is summed
/// once rather than over both parent orders, so it differs from
/// [`alpha_exact`] whenever some but not all members match.
pub fn alpha_paper_theorem(pop: &Population, weights: &[f64], h: &Schema, pi_m: f64) -> Result<f64> {
    check_weights(pop, weights)?;
    let ord = h.order() as i32;
    let alpha_sel = alpha_selection(pop, weights, h)?;
    let q = 1.0 - pi_m;
    let mut outside = Vec::new();
    for (m, &w) in pop.members.iter().zip(weights) {
        if !h.matches(&m.mask)? {
            outside.push((&m.mask, w));
        }
    }
    let first = alpha_sel * alpha_sel * q.powi(ord);
    let mut second = 0.0;
    for (u, w) in &outside {
        let delta = hamming_to_schema(u, h)? as i32;
        second += w * q.powi(ord) / (2.0 * q).powi(delta);
    }
    second *= alpha_sel;
    let mut third = 0.0;
    for (u, wk) in &outside {
        for (v, wl) in &outside {
            let hk = h_kl(u, v, h)? as i32;
            let dh = hamming_fixed(u, v, h)? as i32;
            third += wk * wl * (2.0 * pi_m).powi(hk) * q.powi(ord) / (2.0 * q).powi(dh);
        }
    }
    Ok(first + second + third)
}

/// Lower bound on the child-matching probability for `pi_m <= 0.5`.
pub fn alpha_lower_bound(alpha_sel: f64, order: usize, pi_m: f64) -> Result<f64> {
    if pi_m > 0.5 {
        return Err(Error::PiTooLarge(pi_m));
    }
    let o = order as i32;
    let a = alpha_sel;
    Ok((1.0 - pi_m).powi(o) * a * a + 2f64.powi(-o) * a * (1.0 - a) + (1.0 - a).powi(2) * pi_m.powi(o))
}

/// Independent-position evaluation of the child-matching probability: each
/// fixed position of the child matches with probability
/// `q_j (1 - pi) + (1 - q_j) pi`, `q_j` being the chance crossover copies a
/// matching bit.
pub fn alpha_oracle(pop: &Population, weights: &[f64], h: &Schema, pi_m: f64) -> Result<f64> {
    check_weights(pop, weights)?;
    for m in &pop.members {
        h.check(&m.mask)?;
    }
    let mut total = 0.0;
    for (mk, wk) in pop.members.iter().zip(weights) {
        for (ml, wl) in pop.members.iter().zip(weights) {
            let mut p = 1.0;
            for (j, b) in h.fixed() {
                let hits = (mk.mask.get(j) == b) as u8 + (ml.mask.get(j) == b) as u8;
                let qj = hits as f64 / 2.0;
                p *= qj * (1.0 - pi_m) + (1.0 - qj) * pi_m;
            }
            total += wk * wl * p;
        }
    }
    Ok(total)
}

/// Per-generation record of one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub generation: usize,
    /// Members matching the schema, elite included.
    pub matches: usize,
    pub elite_matches: bool,
    /// Matching members outside the elite slot.
    pub child_matches: usize,
    pub alpha_sel: f64,
    /// Mean fitness of matching members; `None` when nothing matches.
    pub mean_fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaTrace {
    pub schema: Schema,
    pub records: Vec<TraceRecord>,
}

/// Observer for [`run_ga_observed`] that records every schema each
/// generation.
#[derive(Debug, Clone)]
pub struct SchemaTracer {
    traces: Vec<SchemaTrace>,
}

impl SchemaTracer {
    pub fn new(schemata: &[Schema]) -> Self {
        Self {
            traces: schemata
                .iter()
                .map(|h| SchemaTrace {
                    schema: h.clone(),
                    records: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn observe(&mut self, view: &GenerationView<'_>) {
        let pop = view.population;
        // slot 0 holds the elite carried over from the previous generation
        let elite_slot = if pop.generation == 0 { None } else { Some(0) };
        for trace in &mut self.traces {
            let h = &trace.schema;
            let mut matches = 0;
            let mut child_matches = 0;
            let mut elite_matches = false;
            let mut alpha_sel = 0.0;
            let mut fit_sum = 0.0;
            for (i, (m, w)) in pop.members.iter().zip(view.weights).enumerate() {
                if h.matches(&m.mask).unwrap_or(false) {
                    matches += 1;
                    alpha_sel += w;
                    fit_sum += m.fitness;
                    if Some(i) == elite_slot {
                        elite_matches = true;
                    } else {
                        child_matches += 1;
                    }
                }
            }
            trace.records.push(TraceRecord {
                generation: pop.generation,
                matches,
                elite_matches,
                child_matches,
                alpha_sel,
                mean_fitness: (matches > 0).then(|| fit_sum / matches as f64),
            });
        }
    }

    pub fn into_traces(self) -> Vec<SchemaTrace> {
        self.traces
    }
}

/// Run the GA and trace `schemata` every generation.
pub fn trace_schemata(
    ds: &Dataset,
    cfg: &GaConfig,
    gic_cfg: &GicConfig,
    initial: &[ModelMask],
    schemata: &[Schema],
) -> Result<(GaResult, Vec<SchemaTrace>)> {
    for h in schemata {
        if h.len() != ds.d() {
            return Err(Error::LengthMismatch {
                expected: ds.d(),
                got: h.len(),
            });
        }
    }
    let mut tracer = SchemaTracer::new(schemata);
    let mut ledger = FitnessLedger::new();
    let res = run_ga_observed(ds, cfg, gic_cfg, initial, &mut ledger, |v| tracer.observe(v))?;
    Ok((res, tracer.into_traces()))
}

/// CSV with columns `schema,t,m,elite_match,child_matches,alpha_sel,mean_fitness`.
pub fn write_traces_csv<W: Write>(traces: &[SchemaTrace], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["schema", "t", "m", "elite_match", "child_matches", "alpha_sel", "mean_fitness"])?;
    for tr in traces {
        let name = tr.schema.to_string();
        for r in &tr.records {
            out.write_record([
                name.clone(),
                r.generation.to_string(),
                r.matches.to_string(),
                (r.elite_matches as u8).to_string(),
                r.child_matches.to_string(),
                r.alpha_sel.to_string(),
                r.mean_fitness.map(|f| f.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Replays one generation step from a frozen population `replays` times and
/// returns how many of the `K - 1` bred children match `h` in each replay.
pub fn replay_child_matches(
    pop: &Population,
    weights: &[f64],
    h: &Schema,
    pi_m: f64,
    replays: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check_weights(pop, weights)?;
    let mutation = Mutation::Uniform { pi_m };
    let k = pop.len();
    (0..replays)
        .map(|r| {
            let mut count = 0;
            for slot in 1..k {
                let mut g = rng::stream(seed, tag::SCHEMA_REPLAY, r as u64, slot as u64);
                let child = breed_child(pop, weights, &mutation, &mut g)?;
                if h.matches(&child)? {
                    count += 1;
                }
            }
            Ok(count)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::{selection_weights, Member};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pop_of(masks: &[&str]) -> Population {
        Population {
            generation: 0,
            members: masks
                .iter()
                .map(|m| Member {
                    mask: m.parse().unwrap(),
                    fitness: 0.0,
                    feasible: true,
                })
                .collect(),
        }
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (Population, Vec<f64>, Schema) {
        let d = rng.random_range(1..=6);
        let k = rng.random_range(1..=8);
        let members: Vec<Member> = (0..k)
            .map(|_| Member {
                mask: ModelMask::from_code(d, rng.random_range(0..(1u64 << d))),
                fitness: rng.random_range(-5.0..5.0),
                feasible: true,
            })
            .collect();
        let pop = Population {
            generation: 0,
            members,
        };
        let w = selection_weights(&pop.fitnesses());
        let h = Schema::new(
            (0..d)
                .map(|_| match rng.random_range(0..3) {
                    0 => None,
                    1 => Some(false),
                    _ => Some(true),
                })
                .collect(),
        );
        (pop, w, h)
    }

    #[test]
    fn matching_and_order() {
        let h: Schema = "10*0*".parse().unwrap();
        assert!(h.matches(&"10000".parse().unwrap()).unwrap());
        assert!(h.matches(&"10100".parse().unwrap()).unwrap());
        assert!(!h.matches(&"11000".parse().unwrap()).unwrap());
        assert_eq!(h.order(), 3);
        assert_eq!(h.expansion_count(), Some(4));
        assert_eq!(Schema::any(7).order(), 0);
        assert_eq!(Schema::any(7).expansion_count(), Some(128));
        let m: ModelMask = "0110".parse().unwrap();
        assert_eq!(Schema::exact(&m).expansion_count(), Some(1));
        assert!(Schema::exact(&m).matches(&m).unwrap());
        assert!(!Schema::exact(&m).matches(&"0111".parse().unwrap()).unwrap());
        assert!(h.matches(&"1000".parse().unwrap()).is_err());
        assert_eq!(h.to_string(), "10*0*");
        assert!("10x".parse::<Schema>().is_err());
        assert_eq!(Schema::any(200).expansion_count(), None);
    }

    #[test]
    fn distances_on_small_example() {
        let h: Schema = "1*".parse().unwrap();
        let u: ModelMask = "00".parse().unwrap();
        let v: ModelMask = "01".parse().unwrap();
        assert_eq!(u.hamming(&v).unwrap(), 1);
        assert_eq!(hamming_to_schema(&u, &h).unwrap(), 1);
        assert_eq!(hamming_fixed(&u, &v, &h).unwrap(), 0);
        assert_eq!(h_kl(&u, &v, &h).unwrap(), 1);
    }

    #[test]
    fn d1_fixture_exact_vs_closed_form() {
        let pop = pop_of(&["1", "0"]);
        let w = [0.5, 0.5];
        let h: Schema = "1".parse().unwrap();
        let exact = alpha_exact(&pop, &w, &h, 0.0).unwrap();
        let oracle = alpha_oracle(&pop, &w, &h, 0.0).unwrap();
        let literal = alpha_paper_theorem(&pop, &w, &h, 0.0).unwrap();
        assert!((exact - 0.5).abs() < 1e-15);
        assert!((oracle - 0.5).abs() < 1e-15);
        assert!((literal - 0.375).abs() < 1e-15);
    }

    #[test]
    fn trivial_alpha_cases() {
        let pop = pop_of(&["101", "100", "111"]);
        let w = selection_weights(&[1.0, 0.0, -1.0]);
        let h: Schema = "1**".parse().unwrap();
        assert!((alpha_exact(&pop, &w, &h, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((alpha_selection(&pop, &w, &h).unwrap() - 1.0).abs() < 1e-15);
        // all match: the closed form agrees
        for pi in [0.0, 0.1, 0.4] {
            let a = alpha_exact(&pop, &w, &h, pi).unwrap();
            let b = alpha_paper_theorem(&pop, &w, &h, pi).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        let any = Schema::any(3);
        for pi in [0.0, 0.2, 0.7] {
            assert!((alpha_exact(&pop, &w, &any, pi).unwrap() - 1.0).abs() < 1e-14);
        }
        let none: Schema = "0**".parse().unwrap();
        assert_eq!(alpha_selection(&pop, &w, &none).unwrap(), 0.0);
        let half = pop_of(&["10", "00", "11", "01"]);
        let uw = [0.25; 4];
        assert!((alpha_selection(&half, &uw, &"1*".parse().unwrap()).unwrap() - 0.5).abs() < 1e-15);
        // pi = 0.5 makes every child bit a fair coin
        let h3: Schema = "1*0".parse().unwrap();
        assert!((alpha_oracle(&pop, &w, &h3, 0.5).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_arithmetic() {
        assert!((alpha_lower_bound(1.0, 3, 0.2).unwrap() - 0.8f64.powi(3)).abs() < 1e-15);
        assert!((alpha_lower_bound(0.0, 2, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(alpha_lower_bound(0.5, 2, 0.6), Err(Error::PiTooLarge(_))));
    }

    #[test]
    fn exact_equals_oracle_on_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for i in 0..300 {
            let (pop, w, h) = random_instance(&mut rng);
            let pi = [0.0, 0.1, 0.3, 0.5][i % 4];
            let exact = alpha_exact(&pop, &w, &h, pi).unwrap();
            let oracle = alpha_oracle(&pop, &w, &h, pi).unwrap();
            assert!((exact - oracle).abs() <= 1e-12, "{exact} vs {oracle}");
            assert!((-1e-12..=1.0 + 1e-12).contains(&exact));
            let sel = alpha_selection(&pop, &w, &h).unwrap();
            let lb = alpha_lower_bound(sel, h.order(), pi).unwrap();
            assert!(lb <= exact + 1e-12, "bound {lb} > exact {exact}");
        }
    }

    #[test]
    fn replay_matches_binomial_mean() {
        let pop = pop_of(&["1100", "1010", "0001", "1111", "0000"]);
        let w = selection_weights(&[2.0, 1.0, 0.0, -1.0, 0.5]);
        let h: Schema = "1*0*".parse().unwrap();
        let pi = 0.1;
        let alpha = alpha_exact(&pop, &w, &h, pi).unwrap();
        let reps = 4000;
        let counts = replay_child_matches(&pop, &w, &h, pi, reps, 5).unwrap();
        let mean = counts.iter().sum::<usize>() as f64 / reps as f64;
        let k1 = (pop.len() - 1) as f64;
        let se = (k1 * alpha * (1.0 - alpha) / reps as f64).sqrt();
        assert!((mean - k1 * alpha).abs() < 3.0 * se, "{mean} vs {}", k1 * alpha);
    }

    #[test]
    fn tracer_counts_elite_separately() {
        let mut pop = pop_of(&["110", "010", "111"]);
        pop.generation = 3;
        let w = [0.5, 0.25, 0.25];
        let mut tracer = SchemaTracer::new(&[Schema::any(3), "11*".parse().unwrap()]);
        tracer.observe(&GenerationView {
            population: &pop,
            weights: &w,
            elite_index: 0,
        });
        let traces = tracer.into_traces();
        let r = &traces[0].records[0];
        assert_eq!((r.matches, r.child_matches, r.elite_matches), (3, 2, true));
        assert!((r.alpha_sel - 1.0).abs() < 1e-15);
        let r = &traces[1].records[0];
        assert_eq!((r.matches, r.child_matches, r.elite_matches), (2, 1, true));
        assert!((r.alpha_sel - 0.75).abs() < 1e-15);
        let mut buf = Vec::new();
        write_traces_csv(&traces, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("schema,t,m,"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn parses_schema_files() {
        let hs = parse_schema_lines("# c\n1*0\n\n***\n", 3).unwrap();
        assert_eq!(hs.len(), 2);
        assert!(parse_schema_lines("1*", 3).is_err());
    }

    proptest! {
        #[test]
        fn alpha_is_permutation_invariant(seed in any::<u64>(), pi in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (pop, w, h) = random_instance(&mut rng);
            let a = alpha_exact(&pop, &w, &h, pi).unwrap();
            let mut idx: Vec<usize> = (0..pop.len()).collect();
            idx.reverse();
            let perm = Population {
                generation: 0,
                members: idx.iter().map(|&i| pop.members[i].clone()).collect(),
            };
            let pw: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
            let b = alpha_exact(&perm, &pw, &h, pi).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&a));
        }

        #[test]
        fn distance_bounds(a in 0u64..64, b in 0u64..64, pat in proptest::collection::vec(0u8..3, 6)) {
            let u = ModelMask::from_code(6, a);
            let v = ModelMask::from_code(6, b);
            let h = Schema::new(pat.iter().map(|p| match p { 0 => None, 1 => Some(false), _ => Some(true) }).collect());
            prop_assert!(hamming_fixed(&u, &v, &h).unwrap() <= u.hamming(&v).unwrap());
            prop_assert!(h_kl(&u, &v, &h).unwrap() <= h.order());
        }
    }
}
