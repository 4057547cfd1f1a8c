//! Versioned scenario documents, built-in scenarios and trace output.

mod builtin;
mod trace_io;

use serde::{Deserialize, Serialize};

pub use builtin::{builtin_scenario, BUILTIN_NAMES};
pub use trace_io::{read_trace, write_trace, TraceFormat, CSV_HEADER};

use crate::bundle::TaskBundle;
use crate::engine::SimParams;
use crate::error::{Error, Result};
use crate::learnability::VerifyParams;
use crate::scheduler::StrategyConfig;

pub const SCHEMA_VERSION: &str = "core-scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub bundle: TaskBundle,
    pub strategy: StrategyConfig,
    pub params: SimParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyParams>,
}

impl ScenarioDoc {
    pub fn new(bundle: TaskBundle, strategy: StrategyConfig, params: SimParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            description: None,
            bundle,
            strategy,
            params,
            verify: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Converts a deserialization failure into a syntax error (with position)
/// or a schema error (with the path to the offending field).
pub(crate) fn classify_json_error(err: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = err.path().to_string();
    let inner = err.into_inner();
    match inner.classify() {
        serde_json::error::Category::Syntax | serde_json::error::Category::Eof => Error::Syntax {
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        },
        _ => Error::Schema {
            path,
            message: inner.to_string(),
        },
    }
}

/// Parses and fully validates a scenario document. Unknown fields are
/// rejected.
pub fn parse_scenario(text: &str) -> Result<ScenarioDoc> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc =
        serde_path_to_error::deserialize(&mut de).map_err(classify_json_error)?;
    de.end().map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: "schema_version".into(),
            message: format!(
                "unrecognized version {:?}, expected {SCHEMA_VERSION:?}",
                doc.schema_version
            ),
        });
    }
    doc.bundle.ensure_valid()?;
    doc.params.check()?;
    doc.strategy.check()?;
    if let Some(v) = &doc.verify {
        v.check()?;
    }
    Ok(doc)
}
