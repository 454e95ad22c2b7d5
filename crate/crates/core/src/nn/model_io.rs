//! Versioned text format for trained networks. Parameters are written in
//! decimal with 17 significant digits, so save -> load -> forward is
//! bit-identical to the original network.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::jsonfmt;

use super::{Activation, DenseLayer, Matrix, Mlp, NnError};

pub const FORMAT_VERSION: i64 = 1;
pub const MODEL_FILE_EXTENSION: &str = ".model.json";

/// A parsed model file: the network plus whatever metadata was stored with it.
#[derive(Debug)]
pub struct ModelFile {
    pub model_type: String,
    pub metadata: Value,
    pub mlp: Mlp,
}

/// Write `mlp` with a type tag and caller metadata.
pub fn save_model(mlp: &Mlp, model_type: &str, metadata: &Value, path: &Path) -> Result<(), NnError> {
    let mut layers = Vec::with_capacity(mlp.layers().len());
    for layer in mlp.layers() {
        if !layer.weights.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
            return Err(NnError::Malformed("refusing to save non-finite parameters".into()));
        }
        let weights: Vec<Value> = (0..layer.weights.rows())
            .map(|r| Value::Array(layer.weights.row(r).iter().map(|&v| json!(v)).collect()))
            .collect();
        layers.push(json!({
            "activation": layer.activation.name(),
            "weights": weights,
            "bias": layer.bias.iter().map(|&v| json!(v)).collect::<Vec<Value>>(),
        }));
    }
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "type": model_type,
        "metadata": metadata,
        "layers": layers,
    });
    std::fs::write(path, jsonfmt::to_string_pretty(&doc))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile, NnError> {
    let text = std::fs::read_to_string(path)?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| NnError::Malformed(format!("json parse: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| NnError::Malformed("root is not an object".into()))?;
    let version = obj
        .get("format_version")
        .and_then(Value::as_i64)
        .ok_or_else(|| NnError::Malformed("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(NnError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let model_type = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| NnError::Malformed("missing type tag".into()))?
        .to_string();
    let metadata = obj.get("metadata").cloned().unwrap_or(Value::Object(Map::new()));
    let layers_value = obj
        .get("layers")
        .and_then(Value::as_array)
        .ok_or_else(|| NnError::Malformed("missing layers array".into()))?;
    let mut layers = Vec::with_capacity(layers_value.len());
    for (i, lv) in layers_value.iter().enumerate() {
        layers.push(parse_layer(lv).map_err(|e| match e {
            NnError::Malformed(m) => NnError::Malformed(format!("layer {i}: {m}")),
            other => other,
        })?);
    }
    let mlp = Mlp::new(layers)?;
    Ok(ModelFile { model_type, metadata, mlp })
}

fn parse_layer(value: &Value) -> Result<DenseLayer, NnError> {
    let obj = value.as_object().ok_or_else(|| NnError::Malformed("layer is not an object".into()))?;
    let activation = Activation::from_name(
        obj.get("activation")
            .and_then(Value::as_str)
            .ok_or_else(|| NnError::Malformed("missing activation".into()))?,
    )?;
    let rows_v = obj
        .get("weights")
        .and_then(Value::as_array)
        .ok_or_else(|| NnError::Malformed("missing weights".into()))?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(rows_v.len());
    for row in rows_v {
        let row = row.as_array().ok_or_else(|| NnError::Malformed("weight row is not an array".into()))?;
        rows.push(row.iter().map(parse_f64).collect::<Result<_, _>>()?);
    }
    if rows.is_empty() {
        return Err(NnError::Malformed("empty weight matrix".into()));
    }
    let weights = Matrix::from_rows(&rows)?;
    let bias: Vec<f64> = obj
        .get("bias")
        .and_then(Value::as_array)
        .ok_or_else(|| NnError::Malformed("missing bias".into()))?
        .iter()
        .map(parse_f64)
        .collect::<Result<_, _>>()?;
    if bias.len() != weights.cols() {
        return Err(NnError::Malformed(format!(
            "bias length {} does not match output dim {}",
            bias.len(),
            weights.cols()
        )));
    }
    Ok(DenseLayer { weights, bias, activation })
}

fn parse_f64(v: &Value) -> Result<f64, NnError> {
    v.as_f64().ok_or_else(|| NnError::Malformed(format!("expected number, got {v}")))
}

/// Read an f64 array out of a metadata value.
pub fn metadata_f64_array(metadata: &Value, key: &str) -> Result<Vec<f64>, NnError> {
    metadata
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| NnError::Malformed(format!("metadata missing array {key:?}")))?
        .iter()
        .map(parse_f64)
        .collect()
}

/// Read a string array out of a metadata value.
pub fn metadata_string_array(metadata: &Value, key: &str) -> Result<Vec<String>, NnError> {
    metadata
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| NnError::Malformed(format!("metadata missing array {key:?}")))?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| NnError::Malformed(format!("expected string, got {v}")))
        })
        .collect()
}
