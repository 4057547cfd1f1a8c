//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.
//!
//! Every trace produced here goes through [`Audit::record`], which is what
//! the budget criterion checks.

use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use core_sched::scheduler::grid_fraction;
use core_sched::synth::{random_bundle, SynthSpec};
use core_sched::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal as StdNormal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_core-sched"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Budget and aliveness audit over every trace the suite produces.
#[derive(Default)]
struct Audit {
    traces: usize,
    slots: usize,
    violations: Vec<String>,
}

static AUDIT: Mutex<Audit> = Mutex::new(Audit {
    traces: 0,
    slots: 0,
    violations: Vec::new(),
});

impl Audit {
    fn record(bundle: &TaskBundle, trace: &Trace) {
        let mut a = AUDIT.lock().unwrap();
        a.traces += 1;
        let eta = trace.params.eta_cap;
        for slot in &trace.slots {
            a.slots += 1;
            let t = slot.timeslot;
            let total: f64 = slot.allocation.fractions.values().sum();
            if total > eta + 1e-9 {
                a.violations.push(format!("t={t}: sum {total} > eta {eta}"));
            }
            for (&id, &f) in &slot.allocation.fractions {
                if f == 0.0 {
                    continue;
                }
                let spec = bundle.thread(id).unwrap();
                let decided_before = trace.outcome(id).is_some_and(|o| o.decided_at < t);
                if !spec.lifespan_contains(t) || decided_before {
                    a.violations
                        .push(format!("t={t}: thread {id} not alive but got {f}"));
                }
            }
        }
    }
}

fn audited_run(bundle: &TaskBundle, strategy: &StrategyConfig, params: &SimParams) -> Trace {
    let trace = run(bundle, strategy, params).unwrap();
    Audit::record(bundle, &trace);
    trace
}

fn builtin_strategies() -> Vec<StrategyConfig> {
    vec![
        StrategyConfig::uniform(),
        StrategyConfig::exclusive_static(),
        StrategyConfig::edf_greedy(),
        StrategyConfig::adaptive(),
    ]
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

fn fig1() -> Outcome {
    let start = Instant::now();
    let out = bin()
        .args(["simulate", "--scenario", "fig1", "--format", "structured"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into()
    })?;
    let trace = read_trace(&String::from_utf8(out.stdout).unwrap()).map_err(|e| e.to_string())?;
    Audit::record(&builtin_scenario("fig1").unwrap().bundle, &trace);
    let got: Vec<f64> = data_throughput_series(&trace)
        .iter()
        .map(|d| d.value)
        .collect();
    let expected = [0.5, 0.25, 0.5];
    ensure(
        got.len() == 3
            && got
                .iter()
                .zip(expected)
                .all(|(g, e)| (g - e).abs() <= 1e-12),
        || format!("data throughput {got:?}"),
    )?;
    within(Duration::from_secs(1), start.elapsed())?;
    Ok(format!("data throughput {got:?} in {:?}", start.elapsed()))
}

fn fig3() -> Outcome {
    let start = Instant::now();
    let doc = builtin_scenario("fig3").unwrap();
    let trace = audited_run(&doc.bundle, &doc.strategy, &doc.params);
    ensure(trace.succeeded() == vec![1, 3, 4], || {
        format!("I_succ {:?}", trace.succeeded())
    })?;
    ensure(thread_throughput(&trace) == 0.6, || "kappa".into())?;
    let v = verify(&trace, &VerifyParams::new(0.5, 0.6, 0.01, 0.05)).map_err(|e| e.to_string())?;
    ensure(v.learnable, || "verdict at kappa 0.6".into())?;
    ensure(v.error_violations() == vec![2], || {
        format!("error flags {:?}", v.error_violations())
    })?;
    ensure(v.deadline_violations() == vec![5], || {
        format!("deadline flags {:?}", v.deadline_violations())
    })?;
    let mut codes = Vec::new();
    for kappa in ["0.6", "0.8"] {
        let status = bin()
            .args([
                "verify",
                "--scenario",
                "fig3",
                "--eta",
                "0.5",
                "--kappa",
                kappa,
            ])
            .args(["--epsilon", "0.01", "--delta", "0.05"])
            .output()
            .map_err(|e| e.to_string())?
            .status;
        codes.push(status.code());
    }
    ensure(codes == [Some(0), Some(1)], || {
        format!("verify exit codes {codes:?}")
    })?;
    within(Duration::from_secs(1), start.elapsed())?;
    Ok(format!(
        "I_succ {{1,3,4}}, error flag on 2, deadline flag on 5, verify exits {codes:?} in {:?}",
        start.elapsed()
    ))
}

fn fig4() -> Outcome {
    let start = Instant::now();
    let doc = builtin_scenario("fig4").unwrap();
    let adaptive = audited_run(&doc.bundle, &StrategyConfig::adaptive(), &doc.params);
    let uniform = audited_run(&doc.bundle, &StrategyConfig::uniform(), &doc.params);
    let (ka, ku) = (thread_throughput(&adaptive), thread_throughput(&uniform));
    let (ea, eu) = (
        average_error(&adaptive).unwrap(),
        average_error(&uniform).unwrap(),
    );
    ensure(ka == 0.5 && ku == 0.0, || {
        format!("kappa adaptive {ka}, uniform {ku}")
    })?;
    ensure(ea < eu, || {
        format!("average error adaptive {ea} vs uniform {eu}")
    })?;
    within(Duration::from_secs(1), start.elapsed())?;
    Ok(format!(
        "kappa {ka} vs {ku}, average error {ea:.4} vs {eu:.4}"
    ))
}

fn monotonicity() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 200,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let kappas: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    // Caps on a binary grid; the coarse one is a subset of the fine one.
    let fine = [0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0];
    let coarse = [0.25, 0.5, 0.75, 1.0];
    let epsilons = [0.02, 0.05, 0.1, 0.2, 0.4, 0.8];
    runner
        .run(
            &(proptest::num::u64::ANY, 1u32..=3, 0usize..4),
            |(seed, q, si)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let b = random_bundle(&mut rng, &SynthSpec::default());
                let trace = audited_run(&b, &builtin_strategies()[si], &SimParams::new(0.75, 0.1));
                let verdicts: Vec<bool> = kappas
                    .iter()
                    .map(|&k| {
                        verify(&trace, &VerifyParams::new(0.75, k, 0.1, 0.05))
                            .unwrap()
                            .learnable
                    })
                    .collect();
                if verdicts.windows(2).any(|w| !w[0] && w[1]) {
                    return Err(TestCaseError::fail(format!(
                        "verdict not monotone in kappa: {verdicts:?}"
                    )));
                }
                let star =
                    |eta: f64, eps: f64| oracle_max_kappa(&b, eta, eps, q).unwrap().kappa_star;
                let on_fine: Vec<f64> = fine.iter().map(|&e| star(e, 0.1)).collect();
                let on_coarse: Vec<f64> = coarse.iter().map(|&e| star(e, 0.1)).collect();
                for series in [&on_fine, &on_coarse] {
                    if series.windows(2).any(|w| w[0] > w[1]) {
                        return Err(TestCaseError::fail(format!(
                            "kappa*(eta) decreased: {series:?}"
                        )));
                    }
                }
                for (i, &e) in coarse.iter().enumerate() {
                    let j = fine.iter().position(|&f| f == e).unwrap();
                    if on_fine[j] != on_coarse[i] {
                        return Err(TestCaseError::fail("grids disagree at a shared cap"));
                    }
                }
                let by_eps: Vec<f64> = epsilons.iter().map(|&e| star(0.75, e)).collect();
                if by_eps.windows(2).any(|w| w[0] > w[1]) {
                    return Err(TestCaseError::fail(format!(
                        "kappa*(epsilon) decreased: {by_eps:?}"
                    )));
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())?;
    Ok("200 bundles, zero violations".into())
}

/// Per-slot quanta vectors over `k` threads with sum at most `q`.
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
    let params = SimParams::new(eta, eps);
    let mut idx = vec![0usize; b.horizon];
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
        let trace = audited_run(b, &StrategyConfig::scripted(matrix), &params);
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

fn oracle_dominance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d0c);
    let mut checked = 0;
    for _ in 0..120 {
        let b = random_bundle(&mut rng, &SynthSpec::default());
        let q = rng.random_range(1..=4);
        let eta = [0.25, 0.5, 0.75, 1.0][rng.random_range(0..4)];
        let params = SimParams::new(eta, 0.1);
        let star = oracle_max_kappa(&b, eta, 0.1, q).unwrap().kappa_star;
        for s in builtin_strategies() {
            let trace = audited_run(&b, &s.with_quantum(Some(q)), &params);
            let k = thread_throughput(&trace);
            ensure(k <= star, || {
                format!("{} reached {k} > oracle {star}", trace.params.eta_cap)
            })?;
        }
        checked += 1;
    }
    let small = SynthSpec {
        max_threads: 2,
        max_horizon: 3,
        ..SynthSpec::default()
    };
    let mut shapes = std::collections::BTreeSet::new();
    let mut compared = 0;
    for _ in 0..200 {
        let b = random_bundle(&mut rng, &small);
        shapes.insert((b.len(), b.horizon));
        for q in 1..=2 {
            for eta in [0.5, 1.0] {
                let fast = oracle_max_kappa(&b, eta, 0.1, q).unwrap().kappa_star;
                let slow = naive_max_kappa(&b, eta, 0.1, q);
                ensure(fast == slow, || {
                    format!("oracle {fast} vs naive {slow} on {b:?}")
                })?;
                compared += 1;
            }
        }
    }
    ensure(shapes.len() == 6, || {
        format!("small shapes covered: {shapes:?}")
    })?;
    within(Duration::from_secs(60), start.elapsed())?;
    Ok(format!(
        "{checked} bundles dominated, {compared} naive comparisons equal, in {:?}",
        start.elapsed()
    ))
}

fn determinism() -> Outcome {
    let mut runs = 0;
    let mut check = |b: &TaskBundle, s: &StrategyConfig, p: &SimParams| -> Result<(), String> {
        let a = audited_run(b, s, p);
        let c = audited_run(b, s, p);
        for f in [TraceFormat::Csv, TraceFormat::Structured] {
            ensure(write_trace(&a, f) == write_trace(&c, f), || {
                format!("{} differs between identical runs", s.kind())
            })?;
        }
        let noiseless = b.threads.iter().all(|t| t.curve.sigma() == 0.0);
        if noiseless {
            let replay = audited_run(b, &StrategyConfig::scripted(a.allocation_matrix()), p);
            ensure(replay.processed_ledger() == a.processed_ledger(), || {
                format!("{} replay ledger differs", s.kind())
            })?;
        }
        runs += 1;
        Ok(())
    };
    for name in BUILTIN_NAMES {
        let doc = builtin_scenario(name).unwrap();
        for seed in [0, 7, u64::MAX] {
            let p = doc.params.with_seed(seed);
            check(&doc.bundle, &doc.strategy, &p)?;
            for s in builtin_strategies() {
                check(&doc.bundle, &s, &p)?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xde7);
    for noise in [0.0, 0.2] {
        let spec = SynthSpec {
            max_sigma: noise,
            ..SynthSpec::default()
        };
        for _ in 0..50 {
            let b = random_bundle(&mut rng, &spec);
            let p = SimParams::new(rng.random_range(0.0..=1.0), 0.1).with_seed(rng.random());
            for s in builtin_strategies() {
                check(&b, &s, &p)?;
            }
        }
    }
    let cli = |seed: &str| {
        bin()
            .args([
                "simulate",
                "--scenario",
                "fig4",
                "--strategy",
                "edf-greedy",
                "--seed",
                seed,
            ])
            .output()
            .map(|o| o.stdout)
            .map_err(|e| e.to_string())
    };
    ensure(cli("11")? == cli("11")?, || {
        "CLI output differs for one seed".into()
    })?;
    Ok(format!(
        "{runs} run pairs byte-identical, noiseless replays exact"
    ))
}

/// One thread, two slots, arrivals capped at 50 per slot. After slot 1 the
/// true error is 0.9; edf-greedy then requests enough data for the error
/// it observed, so the thread succeeds exactly when the noisy observation
/// is above a threshold computed below.
fn calibration_bundle(sigma: f64) -> TaskBundle {
    let curve = LearningCurve::piecewise(vec![(0.0, 1.0), (50.0, 0.9), (100.0, 0.0)])
        .unwrap()
        .with_noise(sigma)
        .unwrap();
    TaskBundle::new(
        2,
        ResourceProfile::constant(100.0, 2),
        vec![ThreadSpec::new(1, 1, 2, curve).with_arrival_cap(ArrivalCap::Constant(50.0))],
    )
}

const CAL_EPS: f64 = 0.05;

/// Observation level above which the slot-2 request covers the remaining need.
fn calibration_threshold() -> f64 {
    // units still needed after 50: 0.9 - 0.9 * x / 50 <= eps
    let remaining = 50.0 * (0.9 - CAL_EPS) / 0.9;
    // request for observation o is (o - eps) / ((1 - o) / 50) units
    let r = remaining / 50.0;
    (r + CAL_EPS) / (1.0 + r)
}

fn calibration() -> Outcome {
    let start = Instant::now();
    let c = calibration_threshold();
    let z90 = StdNormal::new(0.0, 1.0).unwrap().inverse_cdf(0.9);
    let sigma = (0.9 - c) / z90;
    let bundle = calibration_bundle(sigma);

    // Brute-force sampling of the success probability, independent of the engine.
    let mut rng = ChaCha8Rng::seed_from_u64(0xca1);
    let normal = Normal::new(0.9, sigma).unwrap();
    let draws = 400_000;
    let hits = (0..draws)
        .filter(|_| normal.sample(&mut rng).clamp(0.0, 1.0) >= c)
        .count();
    let p_hat = hits as f64 / draws as f64;
    ensure((p_hat - 0.9).abs() < 0.003, || {
        format!("sampled success rate {p_hat}")
    })?;
    let binom = Binomial::new(p_hat, 1000).unwrap();
    // accept iff passes >= (1 - delta) * 1000
    let expect_accept_05 = 1.0 - binom.cdf(949);
    let expect_accept_20 = 1.0 - binom.cdf(799);

    // The engine agrees with the sampler on a single replicate's success rate.
    let engine_rate = (0..2000u64)
        .filter(|&s| {
            let t = audited_run(
                &bundle,
                &StrategyConfig::edf_greedy(),
                &SimParams::new(1.0, CAL_EPS).with_seed(s),
            );
            t.outcomes[0].status.is_success()
        })
        .count() as f64
        / 2000.0;
    ensure((engine_rate - 0.9).abs() < 0.03, || {
        format!("engine success rate {engine_rate}")
    })?;

    let mut good = 0;
    for trial in 0..100u64 {
        let seed = derive_seed(0x5eed, trial);
        let at = |delta: f64| {
            let p = VerifyParams::new(1.0, 1.0, CAL_EPS, delta).with_replicates(1000);
            verify_stochastic(&bundle, &StrategyConfig::edf_greedy(), &p, seed).unwrap()
        };
        if !at(0.05).learnable && at(0.2).learnable {
            good += 1;
        }
    }
    ensure(good >= 95, || format!("{good}/100 meta-trials behaved"))?;
    within(Duration::from_secs(30), start.elapsed())?;
    Ok(format!(
        "{good}/100 meta-trials (expected accept rates {expect_accept_05:.2e} at 0.05, {expect_accept_20:.4} at 0.2; p = {p_hat:.4}) in {:?}",
        start.elapsed()
    ))
}

fn budget() -> Outcome {
    let a = AUDIT.lock().unwrap();
    ensure(a.traces > 0, || "no traces audited".into())?;
    ensure(a.violations.is_empty(), || {
        format!("{:?}", &a.violations[..a.violations.len().min(5)])
    })?;
    Ok(format!(
        "{} traces, {} slots, zero violations",
        a.traces, a.slots
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("fig1 reproduction", fig1),
        ("fig3 reproduction", fig3),
        ("fig4 reproduction", fig4),
        ("monotonicity suite", monotonicity),
        ("oracle dominance", oracle_dominance),
        ("determinism", determinism),
        ("stochastic verifier calibration", calibration),
        // last, so it sees every trace above
        ("budget invariant", budget),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
