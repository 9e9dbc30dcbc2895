//! Library surface of the `qobs` command-line tool: command implementations,
//! Monte-Carlo simulation, and the output envelope, kept callable so the
//! acceptance suite can drive them directly.

pub mod commands;
pub mod error;
pub mod sim;

use std::time::{SystemTime, UNIX_EPOCH};

use qobs::numerics::Tolerances;
use serde_json::Value;

pub use error::{CliError, CliResult, ExitClass};

/// Attaches the resolved tolerance block (and a timestamp unless suppressed)
/// to a command's JSON output. Keys already present are left alone so
/// reports that embed their own tolerances are not duplicated.
pub fn envelope(mut value: Value, tol: &Tolerances, timestamp: bool) -> Value {
    if let Value::Object(map) = &mut value {
        if !map.contains_key("tolerances") {
            map.insert(
                "tolerances".into(),
                serde_json::to_value(tol).unwrap_or(Value::Null),
            );
        }
        if timestamp && !map.contains_key("generated_at") {
            let seconds = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            map.insert("generated_at".into(), Value::from(seconds));
        }
    }
    value
}

/// Serializes with stable key order (serde_json maps are sorted), so equal
/// inputs produce byte-identical output.
pub fn render(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).unwrap_or_else(|_| "null".into());
    text.push('\n');
    text
}
