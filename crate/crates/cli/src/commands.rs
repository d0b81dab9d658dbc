use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use cand_core::ga::{run_ga, AssociationKind};
use cand_core::inference::{
    al_weights, gic_weights, model_average_predict, rmse, soil as soil_importance, survival_model_set, SmsRecord,
    WeightKind, WeightVector,
};
use cand_core::init::{initial_population, InitConfig, InitKind};
use cand_core::markov::{self, ChainSpec};
use cand_core::mask::parse_mask_lines;
use cand_core::schema::{parse_schema_lines, trace_schemata, write_traces_csv};
use cand_core::sim::{generate_case, run_experiment, write_experiment, CaseSpec, ExperimentConfig};
use cand_core::{gic, CandidateSet, Dataset, Error, GaConfig, GicConfig, Member, ModelMask, MutationKind, Result};
use serde::{Deserialize, Serialize};

use crate::{
    AssocArg, AverageArgs, CandidateArgs, GaArgs, InitArg, MarkovArgs, MutationArg, SchemaTraceArgs, SearchArgs,
    SimulateArgs, SmsArgs, WeightArg,
};

/// Config file for `search` and `schema-trace`: GA keys at the top level plus
/// the initialisation and penalty keys below.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RunFile {
    #[serde(flatten)]
    ga: GaConfig,
    init: Option<InitKind>,
    init_file: Option<PathBuf>,
    lambda_grid_size: Option<usize>,
    kappa_n: Option<f64>,
}

struct Settings {
    ga: GaConfig,
    init: InitConfig,
    init_file: Option<PathBuf>,
    kappa_n: Option<f64>,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

fn apply_ga_args(ga: &mut GaConfig, a: &GaArgs) {
    if let Some(k) = a.pop_size {
        ga.population_size = k;
    }
    if let Some(p) = a.mutation_rate {
        ga.mutation_rate = Some(p);
    }
    if let Some(m) = a.mutation {
        ga.mutation_kind = match m {
            MutationArg::Uniform => MutationKind::Uniform,
            MutationArg::Adaptive => MutationKind::Adaptive,
        };
    }
    if let Some(k) = a.assoc {
        ga.association_kind = match k {
            AssocArg::Cor => AssociationKind::MarginalCorrelation,
            AssocArg::Holp => AssociationKind::Holp,
        };
    }
    if let Some(v) = a.term_alpha {
        ga.termination_alpha = v;
    }
    if let Some(v) = a.term_gap {
        ga.termination_gap = v;
    }
    if let Some(v) = a.max_gen {
        ga.max_generations = v;
    }
    if a.terminate_on_reject {
        ga.terminate_on_reject = true;
    }
    if let Some(s) = a.seed {
        ga.seed = s;
    }
}

fn apply_init_args(init: &mut InitConfig, a: &GaArgs) {
    if let Some(k) = a.init {
        init.kind = match k {
            InitArg::Random => InitKind::RandomAssoc,
            InitArg::Lasso => InitKind::LassoPath,
            InitArg::Explicit => InitKind::Explicit,
        };
    }
    if let Some(g) = a.lambda_grid_size {
        init.lambda_grid_size = g;
    }
}

fn resolve(config: Option<&Path>, args: &GaArgs) -> Result<Settings> {
    let file: RunFile = match config {
        Some(p) => read_json(p)?,
        None => RunFile::default(),
    };
    let mut ga = file.ga;
    apply_ga_args(&mut ga, args);
    let mut init = InitConfig::default();
    if let Some(k) = file.init {
        init.kind = k;
    }
    if let Some(g) = file.lambda_grid_size {
        init.lambda_grid_size = g;
    }
    apply_init_args(&mut init, args);
    Ok(Settings {
        ga,
        init,
        init_file: args.init_file.clone().or(file.init_file),
        kappa_n: args.kappa.or(file.kappa_n),
    })
}

fn gic_config(ds: &Dataset, kappa_n: Option<f64>) -> Result<GicConfig> {
    match kappa_n {
        Some(k) if !(k.is_finite() && k >= 0.0) => {
            Err(Error::InvalidConfig(format!("kappa must be finite and nonnegative, got {k}")))
        }
        Some(k) => Ok(GicConfig::with_kappa(ds, k)),
        None => Ok(GicConfig::for_dataset(ds)),
    }
}

fn initial(ds: &Dataset, s: &Settings, gic_cfg: &GicConfig) -> Result<Vec<ModelMask>> {
    s.ga.validate(ds.d())?;
    let explicit = match (&s.init.kind, &s.init_file) {
        (InitKind::Explicit, Some(p)) => Some(parse_mask_lines(&read_text(p)?, ds.d())?),
        (InitKind::Explicit, None) => {
            return Err(Error::InvalidConfig("--init explicit needs --init-file".into()));
        }
        _ => None,
    };
    initial_population(ds, &s.ga, &s.init, gic_cfg, explicit.as_deref())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
struct SearchReport {
    n: usize,
    d: usize,
    kappa_n: f64,
    config: GaConfig,
    best: ModelMask,
    best_variables: Vec<String>,
    best_gic: f64,
    best_fitness: f64,
    generations: usize,
    models_evaluated: usize,
    population_size: usize,
    mutation_rate: f64,
    mean_fitness_history: Vec<f64>,
    best_fitness_history: Vec<f64>,
    final_population: Vec<Member>,
}

fn variable_names(ds: &Dataset, idx: &[usize]) -> Vec<String> {
    idx.iter()
        .map(|&j| match ds.column_names() {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        })
        .collect()
}

pub fn search(a: SearchArgs) -> Result<()> {
    let ds = Dataset::from_csv_path(&a.data.data, !a.data.no_header)?;
    let s = resolve(a.config.as_deref(), &a.ga)?;
    let gic_cfg = gic_config(&ds, s.kappa_n)?;
    let init = initial(&ds, &s, &gic_cfg)?;
    let res = run_ga(&ds, &s.ga, &gic_cfg, &init)?;
    if let Some(p) = &a.candidates_out {
        let mut w = File::create(p)?;
        for m in res.final_population.distinct_masks() {
            writeln!(w, "{m}")?;
        }
    }
    let report = SearchReport {
        n: ds.n(),
        d: ds.d(),
        kappa_n: gic_cfg.kappa_n,
        config: s.ga.clone(),
        best_variables: variable_names(&ds, &res.best.active()),
        best_gic: gic(&ds, &res.best, &gic_cfg)?,
        best: res.best,
        best_fitness: res.best_fitness,
        generations: res.generations_run,
        models_evaluated: res.models_evaluated,
        population_size: res.population_size,
        mutation_rate: res.mutation_rate,
        mean_fitness_history: res.mean_fitness_history,
        best_fitness_history: res.best_fitness_history,
        final_population: res.final_population.members,
    };
    write_json(&report, a.out.as_deref())
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    let flags_given = a.case.is_some() || a.n.is_some() || a.d.is_some() || a.s.is_some() || a.rho.is_some();
    if flags_given {
        let base = cfg.cases.first().cloned().unwrap_or(CaseSpec {
            case_id: 1,
            n: 200,
            d: 400,
            s: 6,
            rho: 0.5,
            seed: 0,
        });
        cfg.cases = vec![CaseSpec {
            case_id: a.case.unwrap_or(base.case_id),
            n: a.n.unwrap_or(base.n),
            d: a.d.unwrap_or(base.d),
            s: a.s.unwrap_or(base.s),
            rho: a.rho.unwrap_or(base.rho),
            seed: 0,
        }];
    }
    if let Some(r) = a.reps {
        cfg.replicates = r;
    }
    if let Some(s) = a.ga.seed {
        cfg.seed = s;
    }
    apply_ga_args(&mut cfg.ga, &a.ga);
    apply_init_args(&mut cfg.init, &a.ga);
    if matches!(cfg.init.kind, InitKind::Explicit) {
        return Err(Error::InvalidConfig("simulate does not support explicit initial masks".into()));
    }
    if let Some(k) = a.ga.kappa {
        cfg.kappa_n = Some(k);
    }
    if let Some(al) = a.sms_alpha {
        cfg.sms_alpha = al;
    }
    cfg.compute_sms &= !a.no_sms;
    cfg.compute_al &= !a.no_al;
    cfg.timing &= !a.no_timing;
    for c in &cfg.cases {
        cfg.ga.validate(c.d)?;
    }
    let report = run_experiment(&cfg)?;
    write_experiment(&report, &a.out)?;
    let mut out = io::stdout().lock();
    for c in &report.summary {
        let get = |k: &str| c.metrics.get(k).map(|m| m.mean).unwrap_or(f64::NAN);
        writeln!(
            out,
            "case {} (n = {}, d = {}, s = {}, rho = {}): recovered {:.3}, PSR {:.3}, FDR {:.3}, generations {:.1}",
            c.case.case_id,
            c.case.n,
            c.case.d,
            c.case.s,
            c.case.rho,
            get("recovered"),
            get("psr"),
            get("fdr"),
            get("generations")
        )?;
    }
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(())
}

pub fn schema_trace(a: SchemaTraceArgs) -> Result<()> {
    let ds = match &a.data {
        Some(p) => Dataset::from_csv_path(p, !a.no_header)?,
        None => {
            generate_case(&CaseSpec {
                case_id: a.case,
                n: a.n,
                d: a.d,
                s: a.s,
                rho: a.rho,
                seed: a.data_seed,
            })?
            .dataset
        }
    };
    let schemata = parse_schema_lines(&read_text(&a.schemata)?, ds.d())?;
    if schemata.is_empty() {
        return Err(Error::InvalidConfig("schema file has no patterns".into()));
    }
    let s = resolve(a.config.as_deref(), &a.ga)?;
    let gic_cfg = gic_config(&ds, s.kappa_n)?;
    let init = initial(&ds, &s, &gic_cfg)?;
    let (_, traces) = trace_schemata(&ds, &s.ga, &gic_cfg, &init, &schemata)?;
    write_traces_csv(&traces, output(a.out.as_deref())?)
}

pub fn markov_verify(a: MarkovArgs) -> Result<()> {
    let table = markov::parse_fitness_table(&read_text(&a.fitness_table)?)?;
    let spec = ChainSpec::new(a.d, a.k, a.pi_m, table)?;
    let report = markov::verify(&spec, a.alpha)?;
    write_json(&report, a.out.as_deref())
}

fn load_candidates(a: &CandidateArgs) -> Result<(Dataset, CandidateSet)> {
    let ds = Dataset::from_csv_path(&a.data.data, !a.data.no_header)?;
    let masks = parse_mask_lines(&read_text(&a.candidates)?, ds.d())?;
    let cfg = gic_config(&ds, a.kappa)?;
    let cand = CandidateSet::new(&ds, &masks, &cfg)?;
    Ok((ds, cand))
}

#[derive(Serialize)]
struct SmsReport {
    alpha: f64,
    best: ModelMask,
    survivors: Vec<ModelMask>,
    relative_size: f64,
    dropped: Vec<ModelMask>,
    records: Vec<SmsRecord>,
}

pub fn sms(a: SmsArgs) -> Result<()> {
    let (ds, cand) = load_candidates(&a.cand)?;
    let res = survival_model_set(&ds, &cand, a.alpha, a.seed)?;
    if let Some(p) = &a.cand.csv {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record([
            "index",
            "mask",
            "gic",
            "omega_hat",
            "dis_statistic",
            "dis_p_value",
            "dis_rejected",
            "sup_rejected",
            "survives",
        ])?;
        for r in &res.records {
            w.write_record([
                r.index.to_string(),
                r.mask.to_string(),
                r.gic.to_string(),
                r.omega_hat.to_string(),
                r.dis_statistic.to_string(),
                r.dis_p_value.to_string(),
                r.dis_rejected.to_string(),
                r.sup_rejected.to_string(),
                r.survives.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let report = SmsReport {
        alpha: res.alpha,
        best: cand.best().clone(),
        survivors: res.survivors.iter().map(|&i| cand.masks[i].clone()).collect(),
        relative_size: res.relative_size(),
        dropped: cand.dropped.clone(),
        records: res.records,
    };
    write_json(&report, a.cand.out.as_deref())
}

struct Weighted {
    weights: WeightVector,
    al_dropped: Vec<usize>,
    al_objective: Option<f64>,
}

fn weights_for(ds: &Dataset, cand: &CandidateSet, kind: WeightArg) -> Result<Weighted> {
    Ok(match kind {
        WeightArg::Gic => Weighted {
            weights: gic_weights(&cand.gics),
            al_dropped: Vec::new(),
            al_objective: None,
        },
        WeightArg::Al => {
            let al = al_weights(ds, cand)?;
            Weighted {
                weights: al.weights,
                al_dropped: al.dropped,
                al_objective: Some(al.objective),
            }
        }
    })
}

#[derive(Serialize)]
struct ModelWeight {
    mask: ModelMask,
    gic: f64,
    weight: f64,
}

#[derive(Serialize)]
struct AverageReport {
    kind: WeightKind,
    best: ModelMask,
    models: Vec<ModelWeight>,
    rmse_in_sample: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    al_objective: Option<f64>,
    al_dropped: Vec<ModelMask>,
    dropped: Vec<ModelMask>,
}

pub fn average(a: AverageArgs) -> Result<()> {
    let (ds, cand) = load_candidates(&a.cand)?;
    let wt = weights_for(&ds, &cand, a.weights)?;
    let yhat = model_average_predict(&ds, &cand, &wt.weights.w)?;
    if let Some(p) = &a.cand.csv {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["index", "mask", "gic", "weight"])?;
        for (i, m) in cand.masks.iter().enumerate() {
            w.write_record([i.to_string(), m.to_string(), cand.gics[i].to_string(), wt.weights.w[i].to_string()])?;
        }
        w.flush()?;
    }
    let report = AverageReport {
        kind: wt.weights.kind,
        best: cand.best().clone(),
        models: cand
            .masks
            .iter()
            .enumerate()
            .map(|(i, m)| ModelWeight {
                mask: m.clone(),
                gic: cand.gics[i],
                weight: wt.weights.w[i],
            })
            .collect(),
        rmse_in_sample: rmse(ds.y().as_slice(), yhat.as_slice())?,
        al_objective: wt.al_objective,
        al_dropped: wt.al_dropped.iter().map(|&i| cand.masks[i].clone()).collect(),
        dropped: cand.dropped.clone(),
    };
    write_json(&report, a.cand.out.as_deref())
}

#[derive(Serialize)]
struct SoilEntry {
    variable: usize,
    name: String,
    soil: f64,
}

#[derive(Serialize)]
struct SoilReport {
    kind: WeightKind,
    soil: Vec<SoilEntry>,
}

pub fn soil(a: AverageArgs) -> Result<()> {
    let (ds, cand) = load_candidates(&a.cand)?;
    let wt = weights_for(&ds, &cand, a.weights)?;
    let values = soil_importance(&cand, &wt.weights)?;
    let names = variable_names(&ds, &(0..ds.d()).collect::<Vec<_>>());
    let entries: Vec<SoilEntry> = values
        .iter()
        .zip(names)
        .enumerate()
        .map(|(j, (&soil, name))| SoilEntry {
            variable: j + 1,
            name,
            soil,
        })
        .collect();
    if let Some(p) = &a.cand.csv {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["variable", "name", "soil"])?;
        for e in &entries {
            w.write_record([e.variable.to_string(), e.name.clone(), e.soil.to_string()])?;
        }
        w.flush()?;
    }
    write_json(
        &SoilReport {
            kind: wt.weights.kind,
            soil: entries,
        },
        a.cand.out.as_deref(),
    )
}
