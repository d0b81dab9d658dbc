//! Simulation cases 1 to 6 and seeded end-to-end experiments.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ga::{run_ga, GaConfig};
use crate::inference::{
    al_weights, gic_weights, model_average_predict, psr_fdr, rmse, soil, survival_model_set, CandidateSet,
};
use crate::init::{initial_population, InitConfig};
use crate::mask::ModelMask;
use crate::model::GicConfig;
use crate::rng::{self, tag};
use crate::schema::Schema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub case_id: u8,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CaseSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(1..=6).contains(&self.case_id) {
            return bad(format!("case id must lie in 1..=6, got {}", self.case_id));
        }
        if self.n < 2 || self.d < 1 {
            return bad(format!("need n >= 2 and d >= 1, got n = {}, d = {}", self.n, self.d));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if self.s == 0 || self.s > self.n.min(self.d) {
            return bad(format!("s must lie in 1..=min(n, d), got {}", self.s));
        }
        let min_s = match self.case_id {
            1 => 2,
            2 => 3,
            3 | 4 => 4,
            _ => 1,
        };
        if self.s < min_s {
            return bad(format!("case {} needs s >= {min_s}", self.case_id));
        }
        let extra = match self.case_id {
            2 => 1,
            3 | 4 => 2,
            _ => 0,
        };
        if self.d < self.s + extra {
            return bad(format!("case {} needs d >= s + {extra}", self.case_id));
        }
        Ok(())
    }

    pub fn truth(&self) -> ModelMask {
        ModelMask::from_indices(self.d, 0..self.s)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub dataset: Dataset,
    pub truth: ModelMask,
    pub beta: DVector<f64>,
}

/// `n` rows i.i.d. `N(0, Sigma)` with `Sigma_kl = rho^|k-l|`, via
/// `X_j = rho X_{j-1} + sqrt(1 - rho^2) Z_j`.
pub fn toeplitz_gaussian_rows<R: Rng + ?Sized>(n: usize, d: usize, rho: f64, rng: &mut R) -> DMatrix<f64> {
    let c = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            let v = if j == 0 { z } else { rho * prev + c * z };
            x[(i, j)] = v;
            prev = v;
        }
    }
    x
}

fn case1_beta(s: usize, d: usize) -> DVector<f64> {
    let mut b = DVector::zeros(d);
    for j in 0..s - 2 {
        b[j] = 4.0;
    }
    b[s - 2] = -6.0 * 2f64.sqrt();
    b[s - 1] = 4.0 / 3.0;
    b
}

pub fn generate_case(spec: &CaseSpec) -> Result<GeneratedData> {
    spec.validate()?;
    let (n, d, s, rho) = (spec.n, spec.d, spec.s, spec.rho);
    let mut g = rng::stream(spec.seed, tag::CASE_DATA, 0, 0);
    let mut x = toeplitz_gaussian_rows(n, d, rho, &mut g);
    let weak = 3.0 * (n as f64).ln() / (n as f64).sqrt();
    let beta = match spec.case_id {
        1 => case1_beta(s, d),
        2 => {
            let eta = Normal::new(0.0, 0.1).unwrap();
            for i in 0..n {
                x[(i, s)] = 0.5 * x[(i, 0)] + 2.0 * x[(i, s - 3)] + eta.sample(&mut g);
            }
            case1_beta(s, d)
        }
        3 | 4 => {
            let eta = Normal::new(0.0, 1.0 / 3.0).unwrap();
            let c = 2.0 / (3.0 * (1.0 + rho).sqrt());
            for i in 0..n {
                x[(i, s)] = c * (x[(i, 0)] + x[(i, 1)]) + eta.sample(&mut g);
            }
            for i in 0..n {
                x[(i, s + 1)] = c * (x[(i, 2)] + x[(i, 3)]) + eta.sample(&mut g);
            }
            let level = if spec.case_id == 3 { 3.0 } else { weak };
            DVector::from_fn(d, |j, _| if j < s { level } else { 0.0 })
        }
        5 => {
            let mut draws: Vec<f64> = (0..s).map(|_| g.random_range(0.5..1.5)).collect();
            draws.sort_by(|a, b| b.total_cmp(a));
            DVector::from_fn(d, |j, _| if j < s { draws[j] } else { 0.0 })
        }
        6 => DVector::from_fn(d, |j, _| if j < s { weak } else { 0.0 }),
        _ => unreachable!("validated"),
    };
    let mut y = &x * &beta;
    for i in 0..n {
        let e: f64 = StandardNormal.sample(&mut g);
        y[i] += e;
    }
    Ok(GeneratedData {
        dataset: Dataset::new(x, y)?,
        truth: spec.truth(),
        beta,
    })
}

/// Three reference schemata: `(1_s, 0_2s, *...)`, `(1_{s+2}, *...)` and
/// `(1_{s-1}, 0, *...)`. Positions beyond `d` are cut off.
pub fn reference_schemata(s: usize, d: usize) -> Vec<Schema> {
    let build = |prefix: Vec<Option<bool>>| {
        let mut p: Vec<Option<bool>> = prefix.into_iter().take(d).collect();
        p.resize(d, None);
        Schema::new(p)
    };
    let mut h1 = vec![Some(true); s];
    h1.extend(std::iter::repeat_n(Some(false), 2 * s));
    let h2 = vec![Some(true); s + 2];
    let mut h3 = vec![Some(true); s.saturating_sub(1)];
    h3.push(Some(false));
    vec![build(h1), build(h2), build(h3)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Case grid; each entry's `seed` is ignored in favour of keyed seeds.
    pub cases: Vec<CaseSpec>,
    pub replicates: usize,
    pub seed: u64,
    pub ga: GaConfig,
    pub init: InitConfig,
    /// `None` selects `3.5 log d`.
    pub kappa_n: Option<f64>,
    pub sms_alpha: f64,
    pub compute_sms: bool,
    pub compute_al: bool,
    /// Record wall time per replicate; off makes reports bit-reproducible.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cases: vec![CaseSpec {
                case_id: 1,
                n: 200,
                d: 400,
                s: 6,
                rho: 0.5,
                seed: 0,
            }],
            replicates: 20,
            seed: 0,
            ga: GaConfig::default(),
            init: InitConfig::default(),
            kappa_n: None,
            sms_alpha: 0.05,
            compute_sms: true,
            compute_al: true,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub case_index: usize,
    pub case_id: u8,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub rho: f64,
    pub replicate: usize,
    pub data_seed: u64,
    pub ga_seed: u64,
    pub best: ModelMask,
    pub recovered: bool,
    pub psr: f64,
    pub fdr: f64,
    pub avg_fitness: f64,
    pub best_fitness: f64,
    pub generations: usize,
    pub models_evaluated: usize,
    pub population_size: usize,
    pub candidates: usize,
    pub sms_relative_size: Option<f64>,
    pub rmse_gic: f64,
    pub rmse_al: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub soil: Vec<f64>,
}

impl ReplicateResult {
    fn metrics(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("recovered", Some(self.recovered as u8 as f64)),
            ("psr", Some(self.psr)),
            ("fdr", Some(self.fdr)),
            ("avg_fitness", Some(self.avg_fitness)),
            ("best_fitness", Some(self.best_fitness)),
            ("generations", Some(self.generations as f64)),
            ("models_evaluated", Some(self.models_evaluated as f64)),
            ("candidates", Some(self.candidates as f64)),
            ("sms_relative_size", self.sms_relative_size),
            ("rmse_gic", Some(self.rmse_gic)),
            ("rmse_al", self.rmse_al),
            ("wall_time_s", self.wall_time_s),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: CaseSpec,
    pub metrics: BTreeMap<String, MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub replicates: Vec<ReplicateResult>,
    pub summary: Vec<CaseSummary>,
}

/// One replicate: generate, initialise, search, then score the final
/// population as a candidate set.
pub fn run_replicate(cfg: &ExperimentConfig, case_index: usize, replicate: usize) -> Result<ReplicateResult> {
    let (c, r) = (case_index as u64, replicate as u64);
    let mut spec = cfg.cases[case_index].clone();
    spec.seed = rng::derive_seed(cfg.seed, tag::CASE_DATA, c, r);
    let ga_seed = rng::derive_seed(cfg.seed, tag::GA_SEED, c, r);
    let start = Instant::now();
    let data = generate_case(&spec)?;
    let ds = &data.dataset;
    let gic_cfg = match cfg.kappa_n {
        Some(k) => GicConfig::with_kappa(ds, k),
        None => GicConfig::for_dataset(ds),
    };
    let ga = GaConfig {
        seed: ga_seed,
        ..cfg.ga.clone()
    };
    let init = initial_population(ds, &ga, &cfg.init, &gic_cfg, None)?;
    let res = run_ga(ds, &ga, &gic_cfg, &init)?;
    let (psr, fdr) = psr_fdr(&res.best, &data.truth)?;
    let cand = CandidateSet::new(ds, &res.final_population.distinct_masks(), &gic_cfg)?;
    let gw = gic_weights(&cand.gics);
    let rmse_gic = rmse(ds.y().as_slice(), model_average_predict(ds, &cand, &gw.w)?.as_slice())?;
    let rmse_al = if cfg.compute_al {
        let al = al_weights(ds, &cand)?;
        Some(rmse(ds.y().as_slice(), model_average_predict(ds, &cand, &al.weights.w)?.as_slice())?)
    } else {
        None
    };
    let sms_relative_size = if cfg.compute_sms {
        Some(survival_model_set(ds, &cand, cfg.sms_alpha, ga_seed)?.relative_size())
    } else {
        None
    };
    let soil = soil(&cand, &gw)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(ReplicateResult {
        case_index,
        case_id: spec.case_id,
        n: spec.n,
        d: spec.d,
        s: spec.s,
        rho: spec.rho,
        replicate,
        data_seed: spec.seed,
        ga_seed,
        recovered: res.best == data.truth,
        best: res.best,
        psr,
        fdr,
        avg_fitness: res.final_population.mean_fitness(),
        best_fitness: res.best_fitness,
        generations: res.generations_run,
        models_evaluated: res.models_evaluated,
        population_size: res.population_size,
        candidates: cand.len(),
        sms_relative_size,
        rmse_gic,
        rmse_al,
        wall_time_s: cfg.timing.then_some(elapsed),
        soil,
    })
}

fn summarise(values: &[f64]) -> MetricSummary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n.max(1) as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MetricSummary { mean, sd, count: n }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.cases.is_empty() || cfg.replicates == 0 {
        return Err(Error::InvalidConfig("experiment needs at least one case and one replicate".into()));
    }
    for c in &cfg.cases {
        c.validate()?;
    }
    let mut replicates = Vec::new();
    let mut summary = Vec::new();
    for ci in 0..cfg.cases.len() {
        let rows = (0..cfg.replicates)
            .map(|r| run_replicate(cfg, ci, r))
            .collect::<Result<Vec<_>>>()?;
        let mut metrics: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for row in &rows {
            for (name, v) in row.metrics() {
                if let Some(v) = v {
                    metrics.entry(name.to_string()).or_default().push(v);
                }
            }
        }
        summary.push(CaseSummary {
            case: cfg.cases[ci].clone(),
            metrics: metrics.into_iter().map(|(k, v)| (k, summarise(&v))).collect(),
        });
        replicates.extend(rows);
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        replicates,
        summary,
    })
}

/// Long-form CSV: one row per replicate and metric.
pub fn write_results_csv<W: Write>(report: &ExperimentReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["case_index", "case", "n", "d", "s", "rho", "replicate", "metric", "value"])?;
    for r in &report.replicates {
        for (name, v) in r.metrics() {
            if let Some(v) = v {
                out.write_record([
                    r.case_index.to_string(),
                    r.case_id.to_string(),
                    r.n.to_string(),
                    r.d.to_string(),
                    r.s.to_string(),
                    r.rho.to_string(),
                    r.replicate.to_string(),
                    name.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// SOIL per replicate and variable.
pub fn write_soil_csv<W: Write>(report: &ExperimentReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["case_index", "replicate", "variable", "soil"])?;
    for r in &report.replicates {
        for (j, v) in r.soil.iter().enumerate() {
            out.write_record([r.case_index.to_string(), r.replicate.to_string(), (j + 1).to_string(), v.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes `results.csv`, `soil.csv` and `summary.json` into `dir`.
pub fn write_experiment(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_results_csv(report, std::fs::File::create(dir.join("results.csv"))?)?;
    write_soil_csv(report, std::fs::File::create(dir.join("soil.csv"))?)?;
    let f = std::fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(f, report)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(case_id: u8, n: usize, d: usize, s: usize, rho: f64, seed: u64) -> CaseSpec {
        CaseSpec {
            case_id,
            n,
            d,
            s,
            rho,
            seed,
        }
    }

    fn col_cor(x: &DMatrix<f64>, a: usize, b: usize) -> f64 {
        let n = x.nrows() as f64;
        let ma = x.column(a).sum() / n;
        let mb = x.column(b).sum() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for i in 0..x.nrows() {
            let (u, v) = (x[(i, a)] - ma, x[(i, b)] - mb);
            sab += u * v;
            saa += u * u;
            sbb += v * v;
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn toeplitz_moments() {
        let mut g = ChaCha8Rng::seed_from_u64(1);
        let x = toeplitz_gaussian_rows(5000, 4, 0.5, &mut g);
        let r = col_cor(&x, 0, 2);
        // se of a correlation near 0.25 is about (1 - r^2)/sqrt(n)
        assert!((r - 0.25).abs() < 3.0 * (1.0 - 0.0625) / 5000f64.sqrt());
        for j in 0..4 {
            let var = x.column(j).iter().map(|v| v * v).sum::<f64>() / 5000.0;
            assert!((var - 1.0).abs() < 3.0 * (2.0 / 5000f64).sqrt());
        }
        let mut g = ChaCha8Rng::seed_from_u64(2);
        let x = toeplitz_gaussian_rows(2000, 3, 0.0, &mut g);
        let tol = 4.0 / 2000f64.sqrt();
        for a in 0..3 {
            for b in 0..3 {
                let c = x.column(a).dot(&x.column(b)) / 2000.0;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((c - want).abs() < tol * if a == b { 1.5 } else { 1.0 });
            }
        }
    }

    #[test]
    fn case_truth_and_beta() {
        let g = generate_case(&spec(1, 50, 20, 6, 0.5, 3)).unwrap();
        assert_eq!(g.truth, ModelMask::from_indices(20, 0..6));
        assert_eq!(g.beta[0], 4.0);
        assert!((g.beta[4] + 6.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((g.beta[5] - 4.0 / 3.0).abs() < 1e-15);
        assert!(g.beta.iter().skip(6).all(|b| *b == 0.0));

        let g = generate_case(&spec(5, 100, 12, 4, 0.5, 3)).unwrap();
        let b: Vec<f64> = g.beta.iter().take(4).copied().collect();
        assert!(b.windows(2).all(|w| w[0] >= w[1]));
        assert!(b.iter().all(|v| (0.5..1.5).contains(v)));
        assert_eq!(g.truth.size(), 4);

        let g = generate_case(&spec(6, 100, 12, 4, 0.0, 3)).unwrap();
        assert!((g.beta[0] - 3.0 * 100f64.ln() / 10.0).abs() < 1e-15);
    }

    #[test]
    fn redefinitions_touch_only_their_columns() {
        let base = generate_case(&spec(1, 40, 12, 4, 0.5, 9)).unwrap();
        let c3 = generate_case(&spec(3, 40, 12, 4, 0.5, 9)).unwrap();
        let c2 = generate_case(&spec(2, 40, 12, 4, 0.5, 9)).unwrap();
        for j in 0..12 {
            let same3 = base.dataset.x().column(j) == c3.dataset.x().column(j);
            assert_eq!(same3, j != 4 && j != 5, "column {j}");
            let same2 = base.dataset.x().column(j) == c2.dataset.x().column(j);
            assert_eq!(same2, j != 4, "column {j}");
        }
    }

    #[test]
    fn case3_redefined_columns_are_standard() {
        let g = generate_case(&spec(3, 20_000, 8, 4, 0.0, 4)).unwrap();
        let x = g.dataset.x();
        for j in [4, 5] {
            let var = x.column(j).iter().map(|v| v * v).sum::<f64>() / 20_000.0;
            assert!((var - 1.0).abs() < 3.0 * (2.0 / 20_000f64).sqrt(), "var {var}");
        }
        let g = generate_case(&spec(4, 20_000, 8, 4, 0.9, 5)).unwrap();
        let var = g.dataset.x().column(5).iter().map(|v| v * v).sum::<f64>() / 20_000.0;
        assert!((var - 1.0).abs() < 3.0 * (2.0 / 20_000f64).sqrt(), "var {var}");
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_case(&spec(7, 40, 12, 4, 0.5, 0)).is_err());
        assert!(generate_case(&spec(3, 40, 5, 4, 0.5, 0)).is_err());
        assert!(generate_case(&spec(1, 40, 12, 4, 1.0, 0)).is_err());
        assert!(generate_case(&spec(1, 40, 12, 0, 0.5, 0)).is_err());
    }

    #[test]
    fn reference_schemata_shapes() {
        let hs = reference_schemata(3, 12);
        assert_eq!(hs[0].to_string(), "111000000***");
        assert_eq!(hs[1].to_string(), "11111*******");
        assert_eq!(hs[2].to_string(), "110*********");
    }

    #[test]
    fn experiment_is_reproducible_and_counts_rows() {
        let cfg = ExperimentConfig {
            cases: vec![spec(1, 60, 30, 3, 0.5, 0), spec(5, 60, 10, 3, 0.0, 0)],
            replicates: 2,
            seed: 11,
            ga: GaConfig {
                max_generations: 30,
                ..GaConfig::default()
            },
            timing: false,
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicates.len(), 4);
        assert_eq!(a.summary.len(), 2);
        assert_ne!(a.replicates[0].data_seed, a.replicates[2].data_seed);
        let mut buf = Vec::new();
        write_results_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let metric_rows = a.replicates[0].metrics().iter().filter(|(_, v)| v.is_some()).count();
        assert_eq!(text.lines().count(), 1 + 4 * metric_rows);
        assert!(!text.contains("wall_time_s"));
        let json = serde_json::to_string(&a).unwrap();
        let back: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.replicates.len(), 4);
    }
}
