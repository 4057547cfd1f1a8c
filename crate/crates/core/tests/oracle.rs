use core_sched::scheduler::grid_fraction;
use core_sched::synth::{random_bundle, SynthSpec};
use core_sched::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// All per-slot quanta vectors over `k` threads with sum at most `q`.
fn slot_choices(k: usize, q: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v: Vec<u32>| {
                let used: u32 = v.iter().sum();
                (0..=q - used).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

/// Runs the engine on every quantized matrix, idle quanta included.
fn naive_max_kappa(b: &TaskBundle, eta: f64, eps: f64, q: u32) -> f64 {
    let choices = slot_choices(b.len(), q);
    let mut idx = vec![0usize; b.horizon];
    let params = SimParams::new(eta, eps);
    let mut best: f64 = 0.0;
    loop {
        let matrix: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| {
                choices[i]
                    .iter()
                    .map(|&x| grid_fraction(x, eta, q))
                    .collect()
            })
            .collect();
        let trace = run(b, &StrategyConfig::scripted(matrix), &params).unwrap();
        best = best.max(thread_throughput(&trace));
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < choices.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn small_bundle(seed: u64) -> TaskBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_bundle(
        &mut rng,
        &SynthSpec {
            max_threads: 2,
            max_horizon: 3,
            ..SynthSpec::default()
        },
    )
}

#[test]
fn slot_choice_count() {
    // C(q + k, k) vectors with sum at most q
    assert_eq!(slot_choices(2, 2).len(), 6);
    assert_eq!(slot_choices(3, 2).len(), 10);
}

#[test]
fn matches_naive_enumeration_on_small_bundles() {
    for seed in 0..150 {
        let b = small_bundle(seed);
        for q in 1..=2 {
            for eta in [0.5, 1.0] {
                let fast = oracle_max_kappa(&b, eta, 0.1, q).unwrap();
                let slow = naive_max_kappa(&b, eta, 0.1, q);
                assert_eq!(fast.kappa_star, slow, "seed {seed} q {q} eta {eta}");
            }
        }
    }
}

#[test]
fn witness_achieves_the_reported_kappa() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..60 {
        let b = random_bundle(&mut rng, &SynthSpec::default());
        let r = oracle_max_kappa(&b, 0.8, 0.1, 3).unwrap();
        let trace = run(
            &b,
            &StrategyConfig::scripted(r.witness.clone()),
            &SimParams::new(0.8, 0.1),
        )
        .unwrap();
        assert_eq!(thread_throughput(&trace), r.kappa_star);
        assert_eq!(trace.succeeded(), r.succeeded);
        for row in &r.witness {
            for &f in row {
                let units = f * 3.0 / 0.8;
                assert!((units - units.round()).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn oversized_instances_are_refused() {
    let doc = builtin_scenario("fig3").unwrap();
    let err = oracle_max_kappa(&doc.bundle, 0.5, 0.01, 2).unwrap_err();
    assert!(matches!(err, Error::OracleLimit { threads: 5, .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantized_strategies_never_beat_the_oracle(seed in any::<u64>(), q in 1u32..=4, eta in 0.1f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_bundle(&mut rng, &SynthSpec::default());
        let star = oracle_max_kappa(&b, eta, 0.1, q).unwrap().kappa_star;
        for s in [
            StrategyConfig::uniform(),
            StrategyConfig::exclusive_static(),
            StrategyConfig::edf_greedy(),
            StrategyConfig::adaptive(),
        ] {
            let trace = run(&b, &s.with_quantum(Some(q)), &SimParams::new(eta, 0.1)).unwrap();
            prop_assert!(thread_throughput(&trace) <= star);
        }
    }

    #[test]
    fn frontier_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_bundle(&mut rng, &SynthSpec::default());
        let pts = frontier(&b, &FrontierSource::Oracle, &[0.0, 0.25, 0.5, 0.75, 1.0], 0.1, Some(2), 0).unwrap();
        prop_assert!(pts.windows(2).all(|w| w[0].kappa <= w[1].kappa));
    }
}
