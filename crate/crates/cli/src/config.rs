//! Layered configuration: defaults, then a JSON file, then `--set
//! dotted.key=value` overrides, then dedicated flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Bad user input; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Recursively overlays `top` onto `base`. Keys absent from `base` are
/// rejected so typos do not silently vanish.
pub fn merge(base: &mut Value, top: &Value, path: &str) -> Result<(), UsageError> {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &p)?,
                    None => return Err(usage(format!("unknown config key `{p}`"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

/// Sets one dotted key; the value is read as JSON, falling back to a plain string.
pub fn set_dotted(root: &mut Value, key: &str, raw: &str) -> Result<(), UsageError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_value(root, key, value)
}

pub fn set_value(root: &mut Value, key: &str, value: Value) -> Result<(), UsageError> {
    let mut slot = root;
    for part in key.split('.') {
        slot = match slot {
            Value::Object(m) => m
                .get_mut(part)
                .ok_or_else(|| usage(format!("unknown config key `{key}`")))?,
            Value::Array(a) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| usage(format!("`{part}` in `{key}` is not an index")))?;
                let len = a.len();
                a.get_mut(i)
                    .ok_or_else(|| usage(format!("index {i} in `{key}` out of range (len {len})")))?
            }
            _ => return Err(usage(format!("`{key}` goes through a non-object value"))),
        };
    }
    *slot = value;
    Ok(())
}

/// Builds the effective config of type `T`.
pub fn resolve<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: Option<&Path>,
    sets: &[String],
    flags: Vec<(&str, Value)>,
) -> Result<T, UsageError> {
    let mut v = serde_json::to_value(defaults).map_err(|e| usage(e.to_string()))?;
    if let Some(p) = file {
        let text = std::fs::read_to_string(p)
            .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
        let top: Value = serde_json::from_str(&text)
            .map_err(|e| usage(format!("config {} is not valid JSON: {e}", p.display())))?;
        merge(&mut v, &top, "")?;
    }
    for s in sets {
        let (k, raw) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects key=value, got `{s}`")))?;
        set_dotted(&mut v, k.trim(), raw.trim())?;
    }
    for (k, val) in flags {
        set_value(&mut v, k, val)?;
    }
    serde_json::from_value(v).map_err(|e| usage(format!("invalid config: {e}")))
}
