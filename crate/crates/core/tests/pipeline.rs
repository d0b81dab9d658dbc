use cand_core::ga::{run_ga, GaConfig};
use cand_core::inference::{candidate_report, psr_fdr};
use cand_core::init::{initial_population, InitConfig, InitKind};
use cand_core::sim::{generate_case, CaseSpec};
use cand_core::{CandidateSet, GicConfig, MutationKind};
use proptest::prelude::*;

fn case(case_id: u8, seed: u64) -> CaseSpec {
    CaseSpec {
        case_id,
        n: 100,
        d: 40,
        s: 4,
        rho: 0.5,
        seed,
    }
}

#[test]
fn search_and_inference_end_to_end() {
    for (case_id, kind) in [(1, MutationKind::Adaptive), (3, MutationKind::Uniform)] {
        let data = generate_case(&case(case_id, 11)).unwrap();
        let ds = &data.dataset;
        let gic_cfg = GicConfig::for_dataset(ds);
        let ga = GaConfig {
            mutation_kind: kind,
            seed: 5,
            ..GaConfig::default()
        };
        let init = initial_population(ds, &ga, &InitConfig::default(), &gic_cfg, None).unwrap();
        let res = run_ga(ds, &ga, &gic_cfg, &init).unwrap();
        assert_eq!(res.best, data.truth, "case {case_id}");
        assert!(res.models_evaluated <= res.population_size * (res.generations_run + 1));
        let cand = CandidateSet::new(ds, &res.final_population.distinct_masks(), &gic_cfg).unwrap();
        let rep = candidate_report(ds, &cand, 0.05, 1).unwrap();
        assert_eq!(rep.best, data.truth);
        assert!(rep.sms.survivors.contains(&cand.best_index));
        for j in 0..4 {
            assert!(rep.soil[j] > 0.9, "soil of signal {j} = {}", rep.soil[j]);
        }
        assert_eq!(psr_fdr(&rep.best, &data.truth).unwrap(), (1.0, 0.0));
    }
}

#[test]
fn random_init_also_finds_truth() {
    let data = generate_case(&case(5, 2)).unwrap();
    let ds = &data.dataset;
    let gic_cfg = GicConfig::for_dataset(ds);
    let ga = GaConfig {
        seed: 1,
        ..GaConfig::default()
    };
    let init_cfg = InitConfig {
        kind: InitKind::RandomAssoc,
        ..InitConfig::default()
    };
    let init = initial_population(ds, &ga, &init_cfg, &gic_cfg, None).unwrap();
    let res = run_ga(ds, &ga, &gic_cfg, &init).unwrap();
    let (psr, _) = psr_fdr(&res.best, &data.truth).unwrap();
    assert!(psr >= 0.75, "psr {psr}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ga_invariants_hold_for_any_seed(seed in any::<u64>(), data_seed in 0u64..50) {
        let data = generate_case(&case(1, data_seed)).unwrap();
        let ds = &data.dataset;
        let gic_cfg = GicConfig::for_dataset(ds);
        let ga = GaConfig { population_size: 16, max_generations: 40, seed, ..GaConfig::default() };
        let init = initial_population(ds, &ga, &InitConfig::default(), &gic_cfg, None).unwrap();
        let a = run_ga(ds, &ga, &gic_cfg, &init).unwrap();
        prop_assert_eq!(a.final_population.len(), 16);
        prop_assert!(a.best_fitness_history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(a.models_evaluated <= 16 * (a.generations_run + 1));
        let b = run_ga(ds, &ga, &gic_cfg, &init).unwrap();
        prop_assert_eq!(a.best, b.best);
        prop_assert_eq!(a.mean_fitness_history, b.mean_fitness_history);
    }
}
