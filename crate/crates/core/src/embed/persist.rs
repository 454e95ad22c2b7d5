//! Embedder persistence on top of the network model format. A saved embedder
//! carries its column space and normalization statistics, so a reload
//! reproduces transform outputs bit-for-bit.

use std::path::Path;

use serde_json::{json, Value};

use crate::nn::{load_model, metadata_f64_array, metadata_string_array, save_model, Mlp, NnError};

use super::{CountVectorSpace, EmbedError, Gtfs2VecModel, Hex2VecModel, MinMaxStats};

const HEX2VEC_TYPE: &str = "hex2vec";
const GTFS2VEC_TYPE: &str = "gtfs2vec";

#[derive(Debug, Clone)]
pub enum EmbedderModel {
    Hex2Vec(Hex2VecModel),
    Gtfs2Vec(Gtfs2VecModel),
}

pub fn save_embedder(model: &EmbedderModel, path: &Path) -> Result<(), EmbedError> {
    match model {
        EmbedderModel::Hex2Vec(m) => {
            let (space, stats, encoder) = m.parts();
            let metadata = json!({
                "columns": space.columns(),
                "norm_min": stats.min,
                "norm_max": stats.max,
                "sizes": encoder.layers().iter().map(|l| l.output_dim()).collect::<Vec<_>>(),
            });
            save_model(encoder, HEX2VEC_TYPE, &metadata, path)?;
        }
        EmbedderModel::Gtfs2Vec(m) => {
            let (stats, encoder, decoder) = m.parts();
            let metadata = json!({
                "latent": encoder.output_dim(),
                "encoder_layers": encoder.layers().len(),
                "norm_min": stats.min,
                "norm_max": stats.max,
            });
            let stacked = Mlp::new(
                encoder.layers().iter().chain(decoder.layers()).cloned().collect(),
            )
            .map_err(EmbedError::Model)?;
            save_model(&stacked, GTFS2VEC_TYPE, &metadata, path)?;
        }
    }
    Ok(())
}

pub fn load_hex2vec(path: &Path) -> Result<Hex2VecModel, EmbedError> {
    let file = load_model(path)?;
    if file.model_type != HEX2VEC_TYPE {
        return Err(EmbedError::Model(NnError::Malformed(format!(
            "expected type {HEX2VEC_TYPE:?}, found {:?}",
            file.model_type
        ))));
    }
    let columns = metadata_string_array(&file.metadata, "columns")?;
    let stats = MinMaxStats {
        min: metadata_f64_array(&file.metadata, "norm_min")?,
        max: metadata_f64_array(&file.metadata, "norm_max")?,
    };
    if stats.min.len() != columns.len() || stats.max.len() != columns.len() {
        return Err(EmbedError::Model(NnError::Malformed(
            "normalization stats do not match columns".into(),
        )));
    }
    if file.mlp.input_dim() != columns.len() {
        return Err(EmbedError::Model(NnError::Malformed(format!(
            "encoder input dim {} does not match {} columns",
            file.mlp.input_dim(),
            columns.len()
        ))));
    }
    Ok(Hex2VecModel::from_parts(CountVectorSpace::from_columns(columns), stats, file.mlp))
}

pub fn load_gtfs2vec(path: &Path) -> Result<Gtfs2VecModel, EmbedError> {
    let file = load_model(path)?;
    if file.model_type != GTFS2VEC_TYPE {
        return Err(EmbedError::Model(NnError::Malformed(format!(
            "expected type {GTFS2VEC_TYPE:?}, found {:?}",
            file.model_type
        ))));
    }
    let encoder_layers = file
        .metadata
        .get("encoder_layers")
        .and_then(Value::as_u64)
        .ok_or_else(|| EmbedError::Model(NnError::Malformed("missing encoder_layers".into())))?
        as usize;
    let layers = file.mlp.layers().to_vec();
    if encoder_layers == 0 || encoder_layers >= layers.len() {
        return Err(EmbedError::Model(NnError::Malformed(format!(
            "encoder_layers {encoder_layers} out of range for {} layers",
            layers.len()
        ))));
    }
    let stats = MinMaxStats {
        min: metadata_f64_array(&file.metadata, "norm_min")?,
        max: metadata_f64_array(&file.metadata, "norm_max")?,
    };
    let (enc, dec) = layers.split_at(encoder_layers);
    let encoder = Mlp::new(enc.to_vec()).map_err(EmbedError::Model)?;
    let decoder = Mlp::new(dec.to_vec()).map_err(EmbedError::Model)?;
    if stats.min.len() != encoder.input_dim() || stats.max.len() != encoder.input_dim() {
        return Err(EmbedError::Model(NnError::Malformed(
            "normalization stats do not match encoder input".into(),
        )));
    }
    Ok(Gtfs2VecModel::from_parts(stats, encoder, decoder))
}

/// Load either embedder kind, dispatching on the file's type tag.
pub fn load_embedder(path: &Path) -> Result<EmbedderModel, EmbedError> {
    let file = load_model(path)?;
    match file.model_type.as_str() {
        HEX2VEC_TYPE => Ok(EmbedderModel::Hex2Vec(load_hex2vec(path)?)),
        GTFS2VEC_TYPE => Ok(EmbedderModel::Gtfs2Vec(load_gtfs2vec(path)?)),
        other => Err(EmbedError::Model(NnError::Malformed(format!(
            "unknown embedder type {other:?}"
        )))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{gtfs2vec_fit, gtfs2vec_transform, hex2vec_fit, hex2vec_transform};
    use crate::embed::{Gtfs2VecParams, Hex2VecParams};
    use crate::join::JointIndex;
    use std::collections::BTreeSet;

    #[test]
    fn hex2vec_round_trip_is_bit_identical() {
        let (counts, graph) = crate::embed::hex2vec::tests::two_cluster_fixture();
        let params = Hex2VecParams { epochs: 3, ..Default::default() };
        let model = hex2vec_fit(&counts, &graph, &params).unwrap();
        let before = hex2vec_transform(&model, &counts).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.model.json");
        save_embedder(&EmbedderModel::Hex2Vec(model), &path).unwrap();
        let loaded = match load_embedder(&path).unwrap() {
            EmbedderModel::Hex2Vec(m) => m,
            _ => panic!("wrong type"),
        };
        let after = hex2vec_transform(&loaded, &counts).unwrap();
        assert_eq!(loaded.columns(), counts.columns());
        let same = before
            .values()
            .data()
            .iter()
            .zip(after.values().data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn gtfs2vec_round_trip_is_bit_identical() {
        let stops = crate::embed::gtfs2vec::tests::toy_stops();
        let region_ids: Vec<String> = vec!["r0".into(), "r1".into()];
        let mut pairs = BTreeSet::new();
        pairs.insert(("r0".to_string(), "S1".to_string()));
        pairs.insert(("r1".to_string(), "S2".to_string()));
        pairs.insert(("r1".to_string(), "S3".to_string()));
        let joint = JointIndex::new(pairs);
        let params = Gtfs2VecParams { epochs: 4, ..Default::default() };
        let (model, _) = gtfs2vec_fit(&region_ids, &stops, &joint, &params).unwrap();
        let before = gtfs2vec_transform(&model, &region_ids, &stops, &joint).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.model.json");
        save_embedder(&EmbedderModel::Gtfs2Vec(model), &path).unwrap();
        let loaded = match load_embedder(&path).unwrap() {
            EmbedderModel::Gtfs2Vec(m) => m,
            _ => panic!("wrong type"),
        };
        let after = gtfs2vec_transform(&loaded, &region_ids, &stops, &joint).unwrap();
        let same = before
            .values()
            .data()
            .iter()
            .zip(after.values().data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn cross_type_load_is_rejected() {
        let stops = crate::embed::gtfs2vec::tests::toy_stops();
        let region_ids: Vec<String> = vec!["r0".into()];
        let mut pairs = BTreeSet::new();
        pairs.insert(("r0".to_string(), "S1".to_string()));
        let joint = JointIndex::new(pairs);
        let params = Gtfs2VecParams { epochs: 1, ..Default::default() };
        let (model, _) = gtfs2vec_fit(&region_ids, &stops, &joint, &params).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.model.json");
        save_embedder(&EmbedderModel::Gtfs2Vec(model), &path).unwrap();
        assert!(matches!(load_hex2vec(&path), Err(EmbedError::Model(NnError::Malformed(_)))));
    }

    #[test]
    fn metadata_columns_survive_verbatim() {
        let (counts, graph) = crate::embed::hex2vec::tests::two_cluster_fixture();
        let params = Hex2VecParams { epochs: 1, ..Default::default() };
        let model = hex2vec_fit(&counts, &graph, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.model.json");
        save_embedder(&EmbedderModel::Hex2Vec(model), &path).unwrap();
        let file = crate::nn::load_model(&path).unwrap();
        let columns = metadata_string_array(&file.metadata, "columns").unwrap();
        assert_eq!(columns, counts.columns());
    }
}
