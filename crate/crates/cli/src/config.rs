//! Config files: a JSON object whose keys override the matching flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Applies the config file at `path` over `args`. Keys must name existing
/// fields; `config` itself cannot be overridden.
pub fn apply<T: Serialize + DeserializeOwned>(args: T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let overrides: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let serde_json::Value::Object(overrides) = overrides else {
        bail!("config {} must hold a JSON object", path.display());
    };
    let mut value = serde_json::to_value(args)?;
    let fields = value.as_object_mut().expect("argument structs serialize to objects");
    for (key, v) in overrides {
        if key == "config" {
            continue;
        }
        if !fields.contains_key(&key) {
            let mut known: Vec<&String> = fields.keys().filter(|k| *k != "config").collect();
            known.sort();
            bail!("config {}: unknown key {key:?}; expected one of {known:?}", path.display());
        }
        fields.insert(key, v);
    }
    serde_json::from_value(value).with_context(|| format!("config {} has a value of the wrong type", path.display()))
}
