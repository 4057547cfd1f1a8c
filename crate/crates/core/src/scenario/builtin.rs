//! Canonical scenarios shipped with the tool.
//!
//! * `fig1`: one stream whose received volume and processing capacity
//!   change over three slots, giving processed/received ratios 0.5, 0.25,
//!   0.5.
//! * `fig2`: five threads of which three finish in time under an even
//!   split (thread throughput 0.6). Illustrative; any 3-of-5 pattern would
//!   do.
//! * `fig3`: five threads sharing `eta * N = 32` of `N = 64` units per slot
//!   under a hand-written schedule that completes threads 1, 3 and 4.
//! * `fig4`: two threads with equal lifespans, one of which stalls on a
//!   near-flat stretch of its curve; an even split finishes neither, the
//!   adaptive strategy finishes one.

use crate::bundle::{ArrivalCap, ResourceProfile, TaskBundle, ThreadSpec};
use crate::curve::{LearningCurve, Segment};
use crate::engine::SimParams;
use crate::error::{Error, Result};
use crate::learnability::VerifyParams;
use crate::scheduler::StrategyConfig;

use super::ScenarioDoc;

pub const BUILTIN_NAMES: [&str; 4] = ["fig1", "fig2", "fig3", "fig4"];

pub fn builtin_scenario(name: &str) -> Result<ScenarioDoc> {
    match name {
        "fig1" => Ok(fig1()),
        "fig2" => Ok(fig2()),
        "fig3" => Ok(fig3()),
        "fig4" => Ok(fig4()),
        _ => Err(Error::Usage(format!(
            "unknown scenario {name:?}; valid names: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn linear(need: f64) -> LearningCurve {
    LearningCurve::linear_need(need).expect("positive need")
}

fn fig1() -> ScenarioDoc {
    // Received volume doubles in slot 2 (arrival 100 -> 200) while capacity
    // stays at 50; capacity doubles in slot 3.
    let stream = ThreadSpec::new(1, 1, 3, linear(10_000.0))
        .with_arrival_cap(ArrivalCap::PerSlot(vec![100.0, 200.0, 200.0]));
    let bundle = TaskBundle::new(3, ResourceProfile(vec![50.0, 50.0, 100.0]), vec![stream]);
    let mut doc = ScenarioDoc::new(bundle, StrategyConfig::uniform(), SimParams::new(1.0, 0.01));
    doc.description = Some("data throughput 0.5, 0.25, 0.5 over three slots".into());
    doc
}

fn fig2() -> ScenarioDoc {
    // Even split gives 20 units/slot each; 60-unit threads finish at slot 3,
    // 200-unit threads cannot finish by slot 4.
    let needs = [60.0, 200.0, 60.0, 200.0, 60.0];
    let threads = needs
        .iter()
        .enumerate()
        .map(|(i, &need)| ThreadSpec::new(i as u32 + 1, 1, 4, linear(need)))
        .collect();
    let bundle = TaskBundle::new(4, ResourceProfile::constant(100.0, 4), threads);
    let mut doc = ScenarioDoc::new(bundle, StrategyConfig::uniform(), SimParams::new(1.0, 0.01));
    doc.description = Some("three of five threads succeed: thread throughput 0.6".into());
    doc
}

/// Slot `j` covers the interval between boundaries `t_{j-1}` and `t_j`.
///
/// Units per slot (fraction = units / 64):
///
/// | slot | T1 | T2 | T3 | T4 | T5 | note                                   |
/// |------|----|----|----|----|----|----------------------------------------|
/// | 1    | 16 |  . | 16 |  . |  . | 32 split evenly between threads 1, 3   |
/// | 2-3  | 16 |  8 |  8 |  . |  . | thread 1 keeps 16, rest split 2 and 3  |
/// | 4    |  . | 16 | 16 |  . |  . | thread 1 done at end of slot 3         |
/// | 5    |  . |  . | 16 | 16 |  . | thread 4 arrives; thread 2 dropped     |
/// | 6    |  . |  . |  8 |  8 | 16 | thread 5 arrives with a short lifespan |
/// | 7    |  . |  . | 16 |  . | 16 | thread 4 paused; 3 done, 5 fails       |
/// | 8-9  |  . |  . |  . | 32 |  . | thread 4 alone; done at slot 9         |
///
/// Needs: 48, 128, 88, 80, 64 units. Thread 2 sits idle from slot 5 until
/// its deadline (fails on error); thread 5 is still being fed when its
/// deadline passes (fails on deadline).
fn fig3() -> ScenarioDoc {
    let threads = vec![
        ThreadSpec::new(1, 1, 4, linear(48.0)),
        ThreadSpec::new(2, 2, 8, linear(128.0)),
        ThreadSpec::new(3, 1, 7, linear(88.0)),
        ThreadSpec::new(4, 5, 9, linear(80.0)),
        ThreadSpec::new(5, 6, 7, linear(64.0)),
    ];
    let units: [[f64; 5]; 9] = [
        [16.0, 0.0, 16.0, 0.0, 0.0],
        [16.0, 8.0, 8.0, 0.0, 0.0],
        [16.0, 8.0, 8.0, 0.0, 0.0],
        [0.0, 16.0, 16.0, 0.0, 0.0],
        [0.0, 0.0, 16.0, 16.0, 0.0],
        [0.0, 0.0, 8.0, 8.0, 16.0],
        [0.0, 0.0, 16.0, 0.0, 16.0],
        [0.0, 0.0, 0.0, 32.0, 0.0],
        [0.0, 0.0, 0.0, 32.0, 0.0],
    ];
    let matrix = units
        .iter()
        .map(|row| row.iter().map(|u| u / 64.0).collect())
        .collect();
    let bundle = TaskBundle::new(9, ResourceProfile::constant(64.0, 9), threads);
    let mut doc = ScenarioDoc::new(
        bundle,
        StrategyConfig::scripted(matrix),
        SimParams::new(0.5, 0.01),
    );
    doc.description = Some("five threads, N = 64, eta = 0.5, scripted schedule".into());
    doc.verify = Some(VerifyParams::new(0.5, 0.6, 0.01, 0.05));
    doc
}

fn fig4() -> ScenarioDoc {
    // Thread 1 slows to 2% of its rate after 20 units; thread 2 keeps a
    // steady slope but needs more than an even split provides.
    let stalled = linear(100.0)
        .with_segments(vec![Segment {
            start: 20.0,
            end: 1000.0,
            rate_multiplier: 0.02,
        }])
        .expect("ordered segment");
    let threads = vec![
        ThreadSpec::new(1, 1, 20, stalled),
        ThreadSpec::new(2, 1, 20, linear(130.0)),
    ];
    let bundle = TaskBundle::new(20, ResourceProfile::constant(10.0, 20), threads);
    let mut doc = ScenarioDoc::new(bundle, StrategyConfig::adaptive(), SimParams::new(1.0, 0.1));
    doc.description = Some("adaptive reallocation away from a stalled thread".into());
    doc
}
