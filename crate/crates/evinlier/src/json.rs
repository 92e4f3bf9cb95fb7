//! Canonical JSON: sorted object keys, two-space indentation, shortest
//! round-trip floats, trailing newline. Non-finite numbers become `null`.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, CliResult};

pub fn to_canonical<T: Serialize>(value: &T) -> CliResult<String> {
    // serde_json's Map is a BTreeMap here, so going through Value sorts keys.
    let v = serde_json::to_value(value).map_err(|e| CliError::Numerical(format!("serialising report: {e}")))?;
    canonical_value(&v)
}

pub fn canonical_value(v: &serde_json::Value) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Reads `null` back as NaN.
pub fn nullable_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}
