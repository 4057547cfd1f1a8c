//! Trace serialization.
//!
//! CSV layout (frozen for `core-scenario/1`): one row per effectively alive
//! thread per timeslot under [`CSV_HEADER`], followed by one outcome row per
//! thread of the form
//!
//! ```text
//! outcome,<thread_id>,<status>,<switching_time>,,,<final_true_error>,
//! ```
//!
//! where `switching_time` is empty for failed threads. The structured form
//! is the JSON encoding of [`Trace`] and reads back losslessly.

use std::str::FromStr;

use crate::engine::Trace;
use crate::error::{Error, Result};

use super::classify_json_error;

pub const CSV_HEADER: [&str; 8] = [
    "t",
    "thread_id",
    "fraction",
    "granted_units",
    "processed_units",
    "cumulative_units",
    "true_error",
    "observed_error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Structured,
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "structured" | "json" => Ok(TraceFormat::Structured),
            _ => Err(Error::Usage(format!(
                "unknown trace format {s:?}; expected csv or structured"
            ))),
        }
    }
}

pub fn write_trace(trace: &Trace, format: TraceFormat) -> String {
    match format {
        TraceFormat::Csv => write_csv(trace),
        TraceFormat::Structured => {
            let mut s = serde_json::to_string_pretty(trace).expect("trace serializes");
            s.push('\n');
            s
        }
    }
}

fn write_csv(trace: &Trace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for slot in &trace.slots {
        for th in &slot.threads {
            w.write_record([
                slot.timeslot.to_string(),
                th.thread_id.to_string(),
                th.fraction.to_string(),
                th.granted_units.to_string(),
                th.processed_units.to_string(),
                th.cumulative_units.to_string(),
                th.true_error.to_string(),
                th.observed_error.map(|e| e.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
    }
    for o in &trace.outcomes {
        w.write_record([
            "outcome".to_string(),
            o.id.to_string(),
            o.status.as_str().to_string(),
            o.switching_time.map(|s| s.to_string()).unwrap_or_default(),
            String::new(),
            String::new(),
            o.final_true_error.to_string(),
            String::new(),
        ])
        .expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// Reads the structured form back into a [`Trace`].
pub fn read_trace(text: &str) -> Result<Trace> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(classify_json_error)
}
