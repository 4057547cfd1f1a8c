use core_sched::*;

fn run_builtin(name: &str) -> (ScenarioDoc, Trace) {
    let doc = builtin_scenario(name).unwrap();
    let trace = run(&doc.bundle, &doc.strategy, &doc.params).unwrap();
    (doc, trace)
}

#[test]
fn fig1_data_throughput_follows_arrivals() {
    let (_, trace) = run_builtin("fig1");
    let got: Vec<f64> = data_throughput_series(&trace)
        .iter()
        .map(|d| d.value)
        .collect();
    let expected = [0.5, 0.25, 0.5];
    for (g, e) in got.iter().zip(expected) {
        assert!((g - e).abs() <= 1e-12, "{got:?}");
    }
    assert_eq!(got.len(), 3);
}

#[test]
fn fig3_outcomes_and_alive_sets() {
    let (doc, trace) = run_builtin("fig3");
    assert_eq!(trace.succeeded(), vec![1, 3, 4]);
    assert_eq!(trace.outcome(1).unwrap().switching_time, Some(3));
    assert_eq!(trace.outcome(2).unwrap().status, ThreadStatus::FailError);
    assert_eq!(trace.outcome(5).unwrap().status, ThreadStatus::FailDeadline);
    assert_eq!(thread_throughput(&trace), 0.6);

    let formal: Vec<ThreadId> = alive_set(&doc.bundle, 5).unwrap().into_iter().collect();
    assert_eq!(formal, vec![2, 3, 4]);
    assert_eq!(trace.effective_alive(8), vec![2, 4]);

    let pass = verify(&trace, &VerifyParams::new(0.5, 0.6, 0.01, 0.05)).unwrap();
    assert!(pass.learnable);
    assert_eq!(pass.error_violations(), vec![2]);
    assert_eq!(pass.deadline_violations(), vec![5]);
    let fail = verify(&trace, &VerifyParams::new(0.5, 0.8, 0.01, 0.05)).unwrap();
    assert!(!fail.learnable);
}

#[test]
fn fig3_weighted_throughput() {
    let (mut doc, _) = run_builtin("fig3");
    for (th, w) in doc.bundle.threads.iter_mut().zip([1.0, 4.0, 1.0, 1.0, 1.0]) {
        th.weight = w;
    }
    let trace = run(&doc.bundle, &doc.strategy, &doc.params).unwrap();
    // successes 1, 3, 4 carry weight 3 of 8
    assert_eq!(
        weighted_thread_throughput(&trace, &doc.bundle).unwrap(),
        0.375
    );
}

#[test]
fn fig4_adaptive_beats_uniform() {
    let (doc, adaptive) = run_builtin("fig4");
    let uniform = run(&doc.bundle, &StrategyConfig::uniform(), &doc.params).unwrap();
    assert_eq!(thread_throughput(&adaptive), 0.5);
    assert_eq!(thread_throughput(&uniform), 0.0);
    assert!(average_error(&adaptive).unwrap() < average_error(&uniform).unwrap());
}

#[test]
fn fig2_uniform_split() {
    let (_, trace) = run_builtin("fig2");
    assert_eq!(trace.succeeded(), vec![1, 3, 5]);
    assert_eq!(thread_throughput(&trace), 0.6);
}

#[test]
fn builtins_survive_a_json_round_trip() {
    for name in BUILTIN_NAMES {
        let doc = builtin_scenario(name).unwrap();
        assert_eq!(parse_scenario(&doc.to_json()).unwrap(), doc, "{name}");
    }
}

#[test]
fn unknown_builtin_lists_valid_names() {
    let err = builtin_scenario("fig9").unwrap_err().to_string();
    assert!(err.contains("fig1") && err.contains("fig4"), "{err}");
}

#[test]
fn oracle_scenario_replays_its_witness() {
    let (doc, _) = run_builtin("fig2");
    let small = TaskBundle::new(
        3,
        ResourceProfile::constant(100.0, 3),
        doc.bundle.threads[..3]
            .iter()
            .map(|t| ThreadSpec {
                deadline: 3,
                ..t.clone()
            })
            .collect(),
    );
    let params = SimParams::new(1.0, 0.01);
    let result = oracle_max_kappa(&small, 1.0, 0.01, 4).unwrap();
    let trace = run(&small, &StrategyConfig::Oracle { quantum: 4 }, &params).unwrap();
    assert_eq!(thread_throughput(&trace), result.kappa_star);
    assert_eq!(trace.succeeded(), result.succeeded);
}
