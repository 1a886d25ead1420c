//! Config ingestion: JSON network descriptions with optional named
//! parameters and arithmetic expressions, or a previously written artifact.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use roving::model::{self, NetworkModel, RawConfig};
use serde_json::{Map, Number, Value};

/// Keys whose string values are names, not expressions.
const NAME_KEYS: [&str; 2] = ["type", "discipline"];

/// Parses a `key=value` override.
pub fn parse_param(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("empty parameter name in {s:?}"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn eval(expr: &str, params: &mut BTreeMap<String, f64>) -> Result<f64> {
    let v = fasteval::ez_eval(expr, params).map_err(|e| anyhow!("cannot evaluate {expr:?}: {e}"))?;
    if !v.is_finite() {
        bail!("{expr:?} evaluates to {v}");
    }
    Ok(v)
}

fn number(v: f64) -> Value {
    // integral results stay integers so that e.g. Erlang phases parse
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::Number(Number::from(v as i64))
    } else {
        Number::from_f64(v).map_or(Value::Null, Value::Number)
    }
}

fn resolve(value: &mut Value, key: Option<&str>, params: &mut BTreeMap<String, f64>) -> Result<()> {
    match value {
        Value::String(s) if !key.is_some_and(|k| NAME_KEYS.contains(&k)) => {
            let v = eval(s, params).with_context(|| format!("in field {:?}", key.unwrap_or("?")))?;
            *value = number(v);
        }
        Value::Array(items) => {
            for item in items {
                resolve(item, key, params)?;
            }
        }
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                resolve(v, Some(k), params)?;
            }
        }
        _ => {}
    }
    Ok(())
}

/// Evaluates the `params` block in file order, overrides first taking
/// precedence, and returns the final parameter table.
fn parameters(block: Option<Value>, overrides: &[(String, String)]) -> Result<BTreeMap<String, f64>> {
    let mut params = BTreeMap::new();
    let entries: Map<String, Value> = match block {
        None => Map::new(),
        Some(Value::Object(m)) => m,
        Some(other) => bail!("\"params\" must be an object, got {other}"),
    };
    for (name, _) in overrides {
        if !entries.contains_key(name) {
            bail!("unknown parameter {name:?}; the config defines {:?}", entries.keys().collect::<Vec<_>>());
        }
    }
    for (name, v) in entries {
        let value = match overrides.iter().rev().find(|(k, _)| *k == name) {
            Some((_, expr)) => eval(expr, &mut params)?,
            None => match v {
                Value::Number(n) => n.as_f64().ok_or_else(|| anyhow!("parameter {name} is not a number"))?,
                Value::String(s) => eval(&s, &mut params)?,
                other => bail!("parameter {name} must be a number or expression, got {other}"),
            },
        };
        params.insert(name, value);
    }
    Ok(params)
}

/// A config after expression evaluation, ready for validation.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub raw: RawConfig,
    pub params: BTreeMap<String, f64>,
}

pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
    from_value(doc, overrides)
}

pub fn from_value(doc: Value, overrides: &[(String, String)]) -> Result<Loaded> {
    let Value::Object(mut top) = doc else {
        bail!("config must be a JSON object");
    };
    // artifacts written by this tool carry the resolved model under "model"
    if let Some(model) = top.remove("model") {
        if !overrides.is_empty() {
            bail!("--param cannot be applied to an artifact; its parameters are already resolved");
        }
        let raw = serde_json::from_value(model).context("artifact \"model\" section")?;
        return Ok(Loaded {
            raw,
            params: BTreeMap::new(),
        });
    }
    let mut params = parameters(top.remove("params"), overrides)?;
    let mut body = Value::Object(top);
    resolve(&mut body, None, &mut params)?;
    let raw = serde_json::from_value(body).context("config does not describe a network")?;
    Ok(Loaded { raw, params })
}

/// Validates the config and applies the load target, if any.
pub fn build_model(loaded: &Loaded, rho: Option<f64>) -> Result<NetworkModel, model::ModelError> {
    let model = model::validate(loaded.raw.clone())?;
    match rho {
        Some(r) => model.with_load(r),
        None => Ok(model),
    }
}
