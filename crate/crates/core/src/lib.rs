//! Simulation and verification of deadline-bounded learning threads that
//! share a per-timeslot data-processing budget.
//!
//! A [`TaskBundle`] holds threads (lifespan, learning curve, weight) and the
//! capacity `N_t` available at each timeslot. A scheduling strategy decides,
//! slot by slot, which fraction of the capacity each alive thread gets; the
//! [`engine`] turns that into processed data, errors and per-thread
//! outcomes. The [`learnability`] module measures data and thread
//! throughput, checks `(eta, kappa)` learnability of a run (deterministically
//! or over noisy replicates), and finds the best achievable thread
//! throughput by exhaustive search on small instances.
//!
//! ```
//! use core_sched::{builtin_scenario, run, thread_throughput};
//!
//! let doc = builtin_scenario("fig3").unwrap();
//! let trace = run(&doc.bundle, &doc.strategy, &doc.params).unwrap();
//! assert_eq!(thread_throughput(&trace), 0.6);
//! ```

pub mod bundle;
pub mod curve;
pub mod engine;
pub mod error;
pub mod learnability;
pub mod scenario;
pub mod scheduler;
pub mod synth;

pub use bundle::{
    alive_set, validate_bundle, AllocationRow, ArrivalCap, ResourceProfile, TaskBundle, ThreadId,
    ThreadSpec, ValidationReport, Violation,
};
pub use curve::{Family, LearningCurve, Noise, Segment};
pub use engine::{
    derive_seed, run, run_timed, SimParams, SimState, SlotRecord, ThreadOutcome, ThreadSlot,
    ThreadStatus, Trace,
};
pub use error::{CurveError, Error, Result};
pub use learnability::{
    average_error, data_throughput, data_throughput_series, frontier, oracle_max_kappa,
    oracle_max_kappa_with_limits, thread_throughput, verify, verify_stochastic,
    weighted_thread_throughput, Condition, DataThroughput, FrontierPoint, FrontierSource,
    OracleLimits, OracleResult, ThreadCheck, Verdict, VerifyParams,
};
pub use scenario::{
    builtin_scenario, parse_scenario, read_trace, write_trace, ScenarioDoc, TraceFormat,
    BUILTIN_NAMES, CSV_HEADER, SCHEMA_VERSION,
};
pub use scheduler::{
    allocate, detect_plateau, estimate_marginal_gain, quantize, AdaptiveParams, Observation,
    SchedulerView, StrategyConfig, ThreadView, BUDGET_TOLERANCE,
};
