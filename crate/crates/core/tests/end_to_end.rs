use bocoa::bo::{self, Method, Provenance, Termination, CONFIG_NAMES};
use bocoa::doe;
use bocoa::metrics::{self, GpVariant, RegressionReport};
use bocoa::testbed::{make_instance, TestFunctionId};
use proptest::prelude::*;

fn running_min(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|v| {
            best = best.min(*v);
            best
        })
        .collect()
}

#[test]
fn every_configuration_completes() {
    let d = 2;
    let inst = make_instance(TestFunctionId::Rosenbrock, d, 3).unwrap();
    for name in CONFIG_NAMES {
        let config = bo::config_from_name(name, d).unwrap();
        let r = bo::run(&config, &inst, 11);
        assert_eq!(r.termination, Termination::BudgetExhausted, "{name}");
        assert_eq!(r.evaluations.len(), config.budget(d), "{name}");
        assert_eq!(r.initial_design_size, doe::doe_size(config.doe_class, d), "{name}");
        assert!(r.evaluations.iter().all(|(x, _)| inst.space().contains(x)), "{name}");
        for (x, f) in &r.evaluations {
            assert_eq!(*f, inst.value(x), "{name}");
        }
        assert_eq!(r.best_so_far, running_min(&r.values()), "{name}");
        assert_eq!(r.warp.is_some(), config.output_warp, "{name}");
    }
}

#[test]
fn provenance_round_trip_replays_exactly() {
    let inst = make_instance(TestFunctionId::Schwefel, 3, 8).unwrap();
    for name in ["WarpS", "ExpScalM", "MeanS"] {
        let config = bo::config_from_name(name, 3).unwrap();
        let r = bo::run(&config, &inst, 5);
        let prov = Provenance::new("x", Method::Bo { config }, &r);
        let json = serde_json::to_string(&prov).unwrap();
        let back: Provenance = serde_json::from_str(&json).unwrap();
        assert_eq!(back.replay().unwrap(), r, "{name}");
    }
}

#[test]
fn tampered_provenance_is_rejected() {
    let inst = make_instance(TestFunctionId::Sphere, 2, 1).unwrap();
    let r = bo::random_search_baseline(&inst, 20, 4);
    let mut prov = Provenance::new("r", Method::RandomSearch { budget: 20 }, &r);
    prov.instance.f_opt += 1.0;
    assert!(prov.replay().is_err());
}

#[test]
fn regression_report_ranks_variants() {
    let entries: Vec<_> = GpVariant::ALL
        .iter()
        .map(|v| metrics::regression_experiment(*v, TestFunctionId::Ellipsoidal, 2, 2, 3).unwrap())
        .collect();
    for e in &entries {
        assert!(e.q2_values.iter().all(|q| *q <= 1.0));
        assert!((0.0..=1.0).contains(&e.ks_mean));
        assert_eq!(e.instances_used + e.instances_skipped, 2);
    }
    let report = RegressionReport::new(entries);
    let mut ranks: Vec<usize> = report.entries.iter().map(|r| r.rank_q2).collect();
    ranks.sort();
    assert_eq!(ranks, [1, 2, 3, 4, 5]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_search_invariants(fid in 0usize..12, d in prop::sample::select(vec![2usize, 3, 5, 10]), seed in any::<u64>(), budget in 1usize..120) {
        let inst = make_instance(TestFunctionId::ALL[fid], d, seed).unwrap();
        let r = bo::random_search_baseline(&inst, budget, seed ^ 0x5eed);
        prop_assert_eq!(r.evaluations.len(), budget);
        prop_assert!(r.evaluations.iter().all(|(x, _)| inst.space().contains(x)));
        prop_assert_eq!(&r.best_so_far, &running_min(&r.values()));
        prop_assert!(r.values().iter().all(|f| *f >= inst.f_opt() - 1e-9 * (1.0 + inst.f_opt().abs())));
    }

    #[test]
    fn ertd_is_a_monotone_proportion(hits in prop::collection::vec(prop::option::of(1usize..200), 1..60), max in 1usize..200) {
        let c = metrics::ertd_from_hits(&hits, max).unwrap();
        prop_assert_eq!(c.evals.len(), max);
        prop_assert!(c.proportion.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.proportion.iter().all(|p| (0.0..=1.0).contains(p)));
        let solved = hits.iter().filter(|h| h.is_some_and(|h| h <= max)).count();
        prop_assert_eq!(c.final_value(), solved as f64 / hits.len() as f64);
    }
}
