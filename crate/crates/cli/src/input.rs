//! Reading parameter and scenario files, with `--set key=value` overrides.

use std::fs;
use std::path::Path;

use cran_bbu::{CostModelParams, ParamsDocument, Scenario};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Decodes `text` as `T`. Without overrides the typed decode runs on the raw
/// text so errors carry line and column.
fn decode<T: DeserializeOwned>(origin: &str, text: &str, sets: &[String]) -> Result<T> {
    let malformed = |e: serde_json::Error| CliError::invalid(format!("{origin}: malformed JSON: {e}"));
    if sets.is_empty() {
        return serde_json::from_str(text).map_err(malformed);
    }
    let mut doc: Value = serde_json::from_str(text).map_err(malformed)?;
    for set in sets {
        apply_override(&mut doc, set)?;
    }
    serde_json::from_value(doc).map_err(|e| CliError::invalid(format!("{origin} after overrides: {e}")))
}

/// Applies one `a.b.0.c=value` override. The value is read as JSON when it
/// parses, otherwise as a string. Only the last path segment may be new.
pub fn apply_override(doc: &mut Value, set: &str) -> Result<()> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| CliError::invalid(format!("override {set:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::invalid(format!("override key {key:?} has an empty segment")));
    }
    let (last, parents) = segments.split_last().expect("split yields one segment");
    let mut node = doc;
    for seg in parents {
        node = match node {
            Value::Object(map) => map.get_mut(*seg),
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| CliError::invalid(format!("override {key:?}: no {seg:?} in document")))?;
    }
    match node {
        Value::Object(map) => {
            map.insert(last.to_string(), value);
        }
        Value::Array(items) => {
            let slot = last
                .parse::<usize>()
                .ok()
                .and_then(|i| items.get_mut(i))
                .ok_or_else(|| CliError::invalid(format!("override {key:?}: index {last:?} out of range")))?;
            *slot = value;
        }
        _ => return Err(CliError::invalid(format!("override {key:?}: parent is not an object or array"))),
    }
    Ok(())
}

/// Loads a parameter file, or the built-in synthetic table when `path` is `None`.
pub fn load_params(path: Option<&Path>, sets: &[String]) -> Result<CostModelParams> {
    let doc: ParamsDocument = match path {
        Some(p) => decode(&p.display().to_string(), &read_text(p)?, sets)?,
        None => {
            let text = serde_json::to_string(&CostModelParams::synthetic_default().to_document())
                .expect("params serialize");
            decode("built-in parameters", &text, sets)?
        }
    };
    Ok(CostModelParams::try_from(doc)?)
}

pub fn load_scenario(path: &Path, sets: &[String]) -> Result<Scenario> {
    decode(&path.display().to_string(), &read_text(path)?, sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn override_paths() {
        let mut doc = json!({"a": {"b": 1}, "list": [{"x": 1}, {"x": 2}]});
        apply_override(&mut doc, "a.b=2.5").unwrap();
        apply_override(&mut doc, "a.c=hello").unwrap();
        apply_override(&mut doc, "list.1.x=7").unwrap();
        apply_override(&mut doc, "list.0={\"y\":true}").unwrap();
        assert_eq!(doc, json!({"a": {"b": 2.5, "c": "hello"}, "list": [{"y": true}, {"x": 7}]}));
    }

    #[test]
    fn override_errors() {
        let mut doc = json!({"a": [1]});
        for bad in ["a", "b.c=1", "a.3=1", "a..b=1", "a.0.x=1"] {
            assert!(matches!(apply_override(&mut doc, bad), Err(CliError::Invalid(_))), "{bad}");
        }
    }

    #[test]
    fn builtin_params_accept_overrides() {
        let p = load_params(None, &["t_const_us=0".into(), "alpha_prb.25=350".into()]).unwrap();
        assert_eq!(p.t_const(), 0.0);
        assert_eq!(p.alpha_table()[&25], 350.0);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = decode::<Value>("x.json", "{\n  \"a\": 1,,\n}", &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("column"), "{msg}");
    }
}
