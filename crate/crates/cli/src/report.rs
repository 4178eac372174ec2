//! JSON manifests and summaries, checksums, and the normalizer sidecar file.

use std::fs;
use std::path::{Path, PathBuf};

use neural_pde::pipeline::{Normalizer, Transform};
use neural_pde::GridSpec;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::CliError;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(format!("cannot read {}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(format!("cannot write {}", path.display())))
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(format!("cannot read {}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| neural_pde::Error::Format(format!("{}: {e}", path.display())).into())
}

pub fn config_json(settings: &Settings) -> Value {
    let map: Map<String, Value> = settings
        .iter()
        .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
        .collect();
    Value::Object(map)
}

pub fn grid_json(g: &GridSpec) -> Value {
    json!({
        "x_min": g.x_min,
        "x_max": g.x_max,
        "nx": g.nx,
        "y_min": g.y_min,
        "y_max": g.y_max,
        "ny": g.ny,
        "dt": g.dt,
        "n_steps": g.n_steps,
    })
}

/// Fields every manifest and summary carries.
pub fn provenance(settings: &Settings, seed: u64, seed_source: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!(env!("CARGO_PKG_NAME")));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("config".into(), config_json(settings));
    m.insert("config_hash".into(), json!(settings.hash()));
    m.insert("seed".into(), json!(seed));
    m.insert("seed_source".into(), json!(seed_source));
    m
}

/// `model.npm` → `model.norm.json`.
pub fn normalizer_path(model: &Path) -> PathBuf {
    model.with_extension("norm.json")
}

pub fn normalizer_json(n: &Normalizer) -> Value {
    let items: Vec<Value> = n
        .transforms
        .iter()
        .map(|t| match t {
            Transform::Identity => json!({"type": "identity"}),
            Transform::Sigmoid => json!({"type": "sigmoid"}),
            Transform::MinMax { min, max } => json!({"type": "minmax", "min": min, "max": max}),
        })
        .collect();
    json!({ "transforms": items })
}

pub fn parse_normalizer(v: &Value) -> Result<Normalizer, CliError> {
    let bad = |what: &str| CliError::Core(neural_pde::Error::Format(format!("normalizer file: {what}")));
    let items = v
        .get("transforms")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing transforms list"))?;
    let transforms = items
        .iter()
        .map(|t| match t.get("type").and_then(Value::as_str) {
            Some("identity") => Ok(Transform::Identity),
            Some("sigmoid") => Ok(Transform::Sigmoid),
            Some("minmax") => {
                let min = t.get("min").and_then(Value::as_f64).ok_or_else(|| bad("minmax without min"))?;
                let max = t.get("max").and_then(Value::as_f64).ok_or_else(|| bad("minmax without max"))?;
                Ok(Transform::MinMax { min, max })
            }
            _ => Err(bad("unknown transform type")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if transforms.is_empty() {
        return Err(bad("empty transforms list"));
    }
    Ok(Normalizer { transforms })
}

/// Normalizer stored next to `model`, or identity when there is none.
pub fn load_normalizer(model: &Path, num_vars: usize) -> Result<Normalizer, CliError> {
    let path = normalizer_path(model);
    if !path.exists() {
        return Ok(Normalizer::identity(num_vars));
    }
    let n = parse_normalizer(&read_json(&path)?)?;
    if n.transforms.len() != num_vars {
        return Err(neural_pde::Error::shape(
            "normalizer variables vs data variables",
            num_vars,
            n.transforms.len(),
        )
        .into());
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizer_round_trip() {
        let n = Normalizer {
            transforms: vec![
                Transform::MinMax {
                    min: -0.1234567890123,
                    max: 0.9876543210987,
                },
                Transform::Sigmoid,
                Transform::Identity,
            ],
        };
        let text = serde_json::to_string(&normalizer_json(&n)).unwrap();
        let back = parse_normalizer(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, n);
        assert!(parse_normalizer(&json!({"transforms": [{"type": "log"}]})).is_err());
    }
}
