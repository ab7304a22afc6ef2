//! Layered configuration: typed defaults, then the config file, then `key=value`
//! overrides, then command-line flags.

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::path::Path;

/// Parses `key=value`; the value is read as JSON when possible, else as a string.
pub fn parse_override(arg: &str) -> std::result::Result<(String, Value), String> {
    let (key, raw) = arg.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {arg:?}"))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(format!("invalid key in {arg:?}"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Reads a TOML or JSON file into a JSON value. TOML is chosen by extension,
/// otherwise JSON is tried first.
pub fn load(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let parsed = if is_toml {
        toml::from_str::<Value>(&text).map_err(anyhow::Error::from)
    } else {
        serde_json::from_str::<Value>(&text).map_err(anyhow::Error::from).or_else(|_| toml::from_str::<Value>(&text).map_err(Into::into))
    };
    parsed.with_context(|| format!("cannot parse config file {}", path.display()))
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) {
    let mut cur = root;
    for part in key.split('.') {
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        cur = cur.as_object_mut().unwrap().entry(part).or_insert(Value::Null);
    }
    *cur = value;
}

fn unknown_keys(given: &Value, known: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(g), Value::Object(k)) = (given, known) else { return };
    for (key, v) in g {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match k.get(key) {
            Some(kv) => unknown_keys(v, kv, &path, out),
            None => out.push(path),
        }
    }
}

/// Builds the effective configuration. Later layers win; keys that the target
/// type does not know are rejected.
pub fn effective<T: Serialize + DeserializeOwned + Default>(
    file: Option<Value>,
    overrides: &[(String, Value)],
    flags: &[(&str, Value)],
) -> Result<T> {
    let mut v = serde_json::to_value(T::default())?;
    if let Some(f) = file {
        if !f.is_object() {
            bail!("config file must hold a table of settings");
        }
        merge(&mut v, f);
    }
    for (k, val) in overrides {
        set_path(&mut v, k, val.clone());
    }
    for (k, val) in flags {
        set_path(&mut v, k, val.clone());
    }
    let typed: T = serde_json::from_value(v.clone()).context("invalid configuration")?;
    let mut unknown = Vec::new();
    unknown_keys(&v, &serde_json::to_value(&typed)?, "", &mut unknown);
    if !unknown.is_empty() {
        bail!("unknown config keys: {}", unknown.join(", "));
    }
    Ok(typed)
}
