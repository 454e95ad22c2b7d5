//! Loaders: GeoJSON, OSM XML with tag filters, GTFS feeds, and a local
//! gazetteer standing in for online geocoding. Loaders are pure functions of
//! file content and the collections they return are immutable.

mod geojson;
mod gtfs;
mod osm;

pub use geojson::{load_geojson, write_geojson, write_geojson_string};
pub use gtfs::{load_gtfs, validate_gtfs, GtfsStopFeatures};
pub use osm::{load_osm_xml, OsmStats};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{Geometry, GeometryError, MultiPolygon};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("name not found in gazetteer: {0:?}")]
    NotFound(String),
}

impl From<GeometryError> for LoadError {
    fn from(e: GeometryError) -> Self {
        LoadError::Malformed(e.to_string())
    }
}

/// A tagged vector geometry with a collection-unique identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub feature_id: String,
    pub geometry: Geometry,
    pub tags: BTreeMap<String, String>,
}

/// Ordered set of features with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureCollection {
    features: Vec<Feature>,
}

impl FeatureCollection {
    pub fn new(features: Vec<Feature>) -> Result<Self, LoadError> {
        let mut seen = BTreeSet::new();
        for f in &features {
            if f.feature_id.is_empty() {
                return Err(LoadError::Malformed("empty feature id".into()));
            }
            if !seen.insert(f.feature_id.as_str()) {
                return Err(LoadError::Malformed(format!("duplicate feature id {:?}", f.feature_id)));
            }
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Feature> {
        self.features.iter()
    }
}

/// OSM tag filter: key -> accepted values, empty list accepting any value.
#[derive(Debug, Clone, PartialEq)]
pub struct TagFilter {
    entries: BTreeMap<String, Vec<String>>,
}

impl TagFilter {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self, LoadError> {
        if entries.is_empty() {
            return Err(LoadError::Malformed("tag filter needs at least one key".into()));
        }
        for (key, values) in &entries {
            let mut seen = BTreeSet::new();
            for v in values {
                if !seen.insert(v.as_str()) {
                    return Err(LoadError::Malformed(format!(
                        "duplicate value {v:?} for filter key {key:?}"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Parse the JSON form, e.g. `{"leisure": ["park"], "amenity": []}`.
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let entries: BTreeMap<String, Vec<String>> = serde_json::from_str(text)
            .map_err(|e| LoadError::Malformed(format!("tag filter: {e}")))?;
        Self::new(entries)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, LoadError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<String>> {
        &self.entries
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// True iff the (key, value) pair matches: key present and value accepted.
    pub fn matches(&self, key: &str, value: &str) -> bool {
        match self.entries.get(key) {
            Some(values) => values.is_empty() || values.iter().any(|v| v == value),
            None => false,
        }
    }
}

/// Name -> geometry lookup table loaded from a GeoJSON file whose features
/// carry a "name" property. Offline stand-in for geocoding.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: BTreeMap<String, MultiPolygon>,
}

fn normalize_name(name: &str) -> String {
    name.trim().to_lowercase()
}

impl Gazetteer {
    pub fn from_geojson_file(path: &Path) -> Result<Self, LoadError> {
        let fc = load_geojson(path)?;
        let mut entries = BTreeMap::new();
        for feature in fc.iter() {
            let name = feature.tags.get("name").ok_or_else(|| {
                LoadError::Malformed(format!("gazetteer feature {:?} has no name", feature.feature_id))
            })?;
            let polygons = crate::geometry::flatten(std::slice::from_ref(&feature.geometry));
            if polygons.is_empty() {
                return Err(LoadError::Malformed(format!(
                    "gazetteer entry {name:?} has non-areal geometry"
                )));
            }
            let key = normalize_name(name);
            if entries.insert(key, MultiPolygon::new(polygons)?).is_some() {
                return Err(LoadError::Malformed(format!("duplicate gazetteer name {name:?}")));
            }
        }
        Ok(Self { entries })
    }

    /// Exact-match lookup, case-insensitive and whitespace-trimmed.
    pub fn geocode(&self, name: &str) -> Result<&MultiPolygon, LoadError> {
        self.entries
            .get(&normalize_name(name))
            .ok_or_else(|| LoadError::NotFound(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Coordinate;

    #[test]
    fn tag_filter_matching() {
        let filter = TagFilter::from_json(r#"{"leisure": ["park"], "amenity": []}"#).unwrap();
        assert!(filter.matches("leisure", "park"));
        assert!(!filter.matches("leisure", "garden"));
        // Empty list accepts any value.
        assert!(filter.matches("amenity", "restaurant"));
        assert!(filter.matches("amenity", "bench"));
        assert!(!filter.matches("shop", "bakery"));
    }

    #[test]
    fn tag_filter_rejects_bad_inputs() {
        assert!(TagFilter::from_json("{}").is_err());
        assert!(TagFilter::from_json(r#"{"a": ["x", "x"]}"#).is_err());
        assert!(TagFilter::from_json("not json").is_err());
    }

    #[test]
    fn collection_rejects_duplicate_ids() {
        let point = |id: &str| Feature {
            feature_id: id.to_string(),
            geometry: Geometry::Point(Coordinate::new(0.0, 0.0).unwrap()),
            tags: BTreeMap::new(),
        };
        assert!(FeatureCollection::new(vec![point("a"), point("a")]).is_err());
        assert!(FeatureCollection::new(vec![point("a"), point("b")]).is_ok());
    }

    #[test]
    fn gazetteer_lookup_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gaz.geojson");
        std::fs::write(
            &path,
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","id":"g1","properties":{"name":"City A"},
                 "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}
            ]}"#,
        )
        .unwrap();
        let gaz = Gazetteer::from_geojson_file(&path).unwrap();
        assert!(gaz.geocode("City A").is_ok());
        assert!(gaz.geocode("  city a ").is_ok());
        assert!(gaz.geocode("CITY A").is_ok());
        assert!(matches!(gaz.geocode("City B"), Err(LoadError::NotFound(_))));
    }
}
