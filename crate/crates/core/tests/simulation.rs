use hyql_core::collab::UserId;
use hyql_core::hyql::{Source, Variant};
use hyql_core::sim::{early_precision, run_experiment, run_single, summarize, Run, RunKey, SimConfig};

fn quick() -> SimConfig {
    SimConfig {
        seeds: (0..6).collect(),
        ..SimConfig::default()
    }
}

#[test]
fn every_run_logs_n_trials_with_matching_curves() {
    let config = quick();
    let runs = run_experiment(&config).unwrap();
    assert_eq!(runs.len(), 6 * 2 * 2);
    for r in &runs {
        assert_eq!(r.log.len(), 100);
        assert_eq!(r.curve.values.len(), 10);
        assert!(r
            .log
            .records
            .iter()
            .enumerate()
            .all(|(t, rec)| rec.trial as usize == t && rec.key() == r.key));
    }
    let keys: Vec<RunKey> = runs.iter().map(|r| r.key).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn sources_respect_the_variant() {
    for r in run_experiment(&quick()).unwrap() {
        for rec in &r.log.records {
            let allowed = match r.key.variant {
                Variant::HyQL => rec.source != Source::ExploreRandom,
                _ => matches!(rec.source, Source::ExploitGreedy | Source::ExploreRandom),
            };
            assert!(allowed, "{:?} from {}", rec.source, r.key.variant);
        }
    }
}

#[test]
fn hybrid_leads_early_on_a_few_seeds() {
    let runs = run_experiment(&quick()).unwrap();
    let early = |v: Variant| {
        let s = summarize(runs.iter().filter(|r| r.key.variant == v).map(|r| &r.curve)).unwrap();
        s.mean[..5].iter().sum::<f64>() / 5.0
    };
    assert!(early(Variant::HyQL) > early(Variant::QLearning));
    for r in &runs {
        assert!(early_precision(&r.curve, 5).unwrap() <= 1.0);
    }
}

#[test]
fn q_values_stay_within_the_bound() {
    let config = quick();
    let bound = config.agent.params.value_bound();
    for r in run_experiment(&config).unwrap() {
        let (lo, hi) = r.q_range();
        assert!(lo >= 0.0 && hi <= bound, "{:?}: [{lo}, {hi}]", r.key);
        for rec in &r.log.records {
            assert!((0.0..=bound).contains(&rec.q_after));
        }
    }
}

#[test]
fn interrupted_run_resumes_identically() {
    let config = quick();
    for variant in [Variant::QLearning, Variant::HyQL] {
        let key = RunKey {
            seed: 4,
            variant,
            target: UserId(0),
        };
        let whole = run_single(&config, key).unwrap();
        for stop in [0, 1, 37, 99] {
            let mut run = Run::start(&config, key).unwrap();
            for _ in 0..stop {
                run.step().unwrap();
            }
            let rng = run.feedback_rng().clone();
            let (agent, records) = run.into_parts();
            let mut resumed = Run::resume(&config, key, agent, rng, records).unwrap();
            resumed.run_to_end().unwrap();
            assert_eq!(resumed.records(), &whole.log.records[..]);
            assert_eq!(resumed.agent(), &whole.agent);
        }
    }
}

#[test]
fn drift_mode_runs() {
    let config = SimConfig {
        drift: Some(hyql_core::sim::Drift {
            at_trial: 50,
            fraction: 0.5,
        }),
        seeds: vec![1],
        ..SimConfig::default()
    };
    let runs = run_experiment(&config).unwrap();
    assert_eq!(runs.len(), 4);
}
