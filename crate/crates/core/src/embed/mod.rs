//! Embedders: turn joined regions and features into per-region vectors.
//! Count and Contextual Count are closed-form; Hex2Vec and GTFS2Vec are
//! trained models with fit/transform and persistence.

mod gtfs2vec;
mod hex2vec;
mod persist;

pub use gtfs2vec::{
    gtfs2vec_fit, gtfs2vec_transform, region_stop_matrix, Gtfs2VecModel, Gtfs2VecParams,
    GTFS_INPUT_DIM,
};
pub use hex2vec::{hex2vec_fit, hex2vec_transform, Hex2VecModel, Hex2VecParams};
pub use persist::{load_embedder, load_gtfs2vec, load_hex2vec, save_embedder, EmbedderModel};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::io::{FeatureCollection, TagFilter};
use crate::join::{JointIndex, NeighbourhoodGraph};
use crate::nn::{Matrix, NnError};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("joint references unknown id {0:?}")]
    InconsistentJoint(String),
    #[error("region {0:?} is missing from the neighbourhood graph")]
    UnknownRegion(String),
    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),
    #[error("joint index is empty")]
    EmptyJoint,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Model(#[from] NnError),
}

/// Dense regions x dimensions matrix with named columns and a region-id row
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    region_ids: Vec<String>,
    columns: Vec<String>,
    values: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(region_ids: Vec<String>, columns: Vec<String>, values: Matrix) -> Result<Self, EmbedError> {
        if values.rows() != region_ids.len() {
            return Err(EmbedError::ShapeMismatch(format!(
                "{} rows vs {} region ids",
                values.rows(),
                region_ids.len()
            )));
        }
        if values.cols() != columns.len() {
            return Err(EmbedError::ShapeMismatch(format!(
                "{} cols vs {} column names",
                values.cols(),
                columns.len()
            )));
        }
        let unique: BTreeSet<&String> = columns.iter().collect();
        if unique.len() != columns.len() {
            return Err(EmbedError::ShapeMismatch("duplicate column names".into()));
        }
        if !values.is_finite() {
            return Err(EmbedError::ShapeMismatch("non-finite values".into()));
        }
        Ok(Self { region_ids, columns, values })
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row_of(&self, region_id: &str) -> Option<&[f64]> {
        self.region_ids.iter().position(|r| r == region_id).map(|i| self.values.row(i))
    }

    /// CSV: first column region_id, then named columns; rows sorted by
    /// region_id; values with 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("region_id");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        let mut order: Vec<usize> = (0..self.region_ids.len()).collect();
        order.sort_by(|&a, &b| self.region_ids[a].cmp(&self.region_ids[b]));
        for i in order {
            out.push_str(&self.region_ids[i]);
            for v in self.values.row(i) {
                out.push(',');
                out.push_str(&crate::jsonfmt::format_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_string(text: &str) -> Result<Self, EmbedError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| EmbedError::ShapeMismatch("empty csv".into()))?;
        let mut fields = header.split(',');
        if fields.next() != Some("region_id") {
            return Err(EmbedError::ShapeMismatch("csv must start with region_id column".into()));
        }
        let columns: Vec<String> = fields.map(str::to_string).collect();
        let mut region_ids = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            region_ids.push(
                fields
                    .next()
                    .ok_or_else(|| EmbedError::ShapeMismatch("missing region id".into()))?
                    .to_string(),
            );
            let row: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| EmbedError::ShapeMismatch(format!("bad number {f:?}")))
                })
                .collect::<Result<_, _>>()?;
            if row.len() != columns.len() {
                return Err(EmbedError::ShapeMismatch(format!(
                    "row has {} values, header has {} columns",
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        let values = if rows.is_empty() {
            Matrix::zeros(0, columns.len())
        } else {
            Matrix::from_rows(&rows).map_err(|e| EmbedError::ShapeMismatch(e.to_string()))?
        };
        Self::new(region_ids, columns, values)
    }
}

/// Sorted "key=value" column space derived from a tag filter.
///
/// Keys with an explicit value list contribute one column per value; keys
/// with an empty list expand to the distinct values observed in the feature
/// collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVectorSpace {
    columns: Vec<String>,
}

impl CountVectorSpace {
    pub fn from_filter(filter: &TagFilter, features: &FeatureCollection) -> Self {
        let mut columns: BTreeSet<String> = BTreeSet::new();
        for (key, values) in filter.entries() {
            if values.is_empty() {
                for feature in features.iter() {
                    if let Some(v) = feature.tags.get(key) {
                        columns.insert(format!("{key}={v}"));
                    }
                }
            } else {
                for v in values {
                    columns.insert(format!("{key}={v}"));
                }
            }
        }
        Self { columns: columns.into_iter().collect() }
    }

    pub fn from_columns(mut columns: Vec<String>) -> Self {
        columns.sort();
        columns.dedup();
        Self { columns }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

fn feature_map(features: &FeatureCollection) -> BTreeMap<&str, &crate::io::Feature> {
    features.iter().map(|f| (f.feature_id.as_str(), f)).collect()
}

/// Count embedder: entry (region, "key=value") is the number of joined
/// features carrying that tag pair. Regions with no features keep zero rows.
pub fn count_embed(
    region_ids: &[String],
    features: &FeatureCollection,
    joint: &JointIndex,
    filter: &TagFilter,
) -> Result<EmbeddingMatrix, EmbedError> {
    let space = CountVectorSpace::from_filter(filter, features);
    count_embed_in_space(&space, region_ids, features, joint)
}

/// Count embedder against a frozen column space (used for transfer, where the
/// fit-time columns must be reproduced exactly).
pub fn count_embed_in_space(
    space: &CountVectorSpace,
    region_ids: &[String],
    features: &FeatureCollection,
    joint: &JointIndex,
) -> Result<EmbeddingMatrix, EmbedError> {
    let col_index: BTreeMap<&str, usize> =
        space.columns().iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let row_index: BTreeMap<&str, usize> =
        region_ids.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let by_id = feature_map(features);

    let mut values = Matrix::zeros(region_ids.len(), space.len());
    for (region_id, feature_id) in joint.pairs() {
        let &row = row_index
            .get(region_id.as_str())
            .ok_or_else(|| EmbedError::InconsistentJoint(region_id.clone()))?;
        let feature = by_id
            .get(feature_id.as_str())
            .ok_or_else(|| EmbedError::InconsistentJoint(feature_id.clone()))?;
        for (k, v) in &feature.tags {
            if let Some(&col) = col_index.get(format!("{k}={v}").as_str()) {
                values.set(row, col, values.get(row, col) + 1.0);
            }
        }
    }
    EmbeddingMatrix::new(region_ids.to_vec(), space.columns().to_vec(), values)
}

/// Contextual count embedder: for each distance d in 0..=k, the mean count
/// vector over the ring of regions at distance d, concatenated with column
/// suffix "_d{d}". Empty rings contribute zero blocks.
pub fn contextual_count_embed(
    region_ids: &[String],
    features: &FeatureCollection,
    joint: &JointIndex,
    filter: &TagFilter,
    graph: &NeighbourhoodGraph,
    k: usize,
) -> Result<EmbeddingMatrix, EmbedError> {
    let counts = count_embed(region_ids, features, joint, filter)?;
    let dims = counts.columns().len();
    let row_index: BTreeMap<&str, usize> =
        region_ids.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    for id in region_ids {
        if !graph.contains_node(id) {
            return Err(EmbedError::UnknownRegion(id.clone()));
        }
    }

    let mut columns = Vec::with_capacity((k + 1) * dims);
    for d in 0..=k {
        for c in counts.columns() {
            columns.push(format!("{c}_d{d}"));
        }
    }
    let mut values = Matrix::zeros(region_ids.len(), (k + 1) * dims);
    for (row, region_id) in region_ids.iter().enumerate() {
        for d in 0..=k {
            let members = crate::join::ring(graph, region_id, d)
                .map_err(|_| EmbedError::UnknownRegion(region_id.clone()))?;
            // Ring members outside this region set (possible when the graph
            // covers more regions) are skipped rather than invented.
            let rows: Vec<usize> =
                members.iter().filter_map(|m| row_index.get(m.as_str()).copied()).collect();
            if rows.is_empty() {
                continue;
            }
            let inv = 1.0 / rows.len() as f64;
            for col in 0..dims {
                let mean = rows.iter().map(|&r| counts.values().get(r, col)).sum::<f64>() * inv;
                values.set(row, d * dims + col, mean);
            }
        }
    }
    EmbeddingMatrix::new(region_ids.to_vec(), columns, values)
}

/// Shared min-max normalization: stats frozen at fit time, constants map
/// to 0.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MinMaxStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxStats {
    pub fn fit(values: &Matrix) -> Self {
        let mut min = vec![f64::INFINITY; values.cols()];
        let mut max = vec![f64::NEG_INFINITY; values.cols()];
        for r in 0..values.rows() {
            for (c, &v) in values.row(r).iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        if values.rows() == 0 {
            min.iter_mut().for_each(|v| *v = 0.0);
            max.iter_mut().for_each(|v| *v = 0.0);
        }
        Self { min, max }
    }

    pub fn apply(&self, values: &Matrix) -> Matrix {
        let mut out = values.clone();
        for r in 0..out.rows() {
            for c in 0..out.cols() {
                let span = self.max[c] - self.min[c];
                let v = if span > 0.0 { (out.get(r, c) - self.min[c]) / span } else { 0.0 };
                out.set(r, c, v);
            }
        }
        out
    }
}
