//! Regionalizers: split an area of interest into micro-regions using a
//! hexagonal grid, slippy map tiles, or Voronoi cells around seed geometries.
//!
//! All three are deterministic: the same area yields byte-identical region
//! sets (ids and vertex coordinates) on every run.

mod hex;
mod slippy;
mod voronoi;

pub use hex::{hex_cell_of, hex_cell_polygon, hex_cell_size, regionalize_hex, HexCellId};
pub use slippy::{regionalize_slippy, tile_bounds, tile_of, TileId};
pub use voronoi::regionalize_voronoi;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{GeometryError, LocalPlane, Polygon};
use crate::io::{Feature, FeatureCollection, LoadError};

#[derive(Debug, Error)]
pub enum RegionalizeError {
    #[error("resolution {0} out of range [0, 15]")]
    InvalidResolution(u32),
    #[error("zoom {0} out of range [0, 22]")]
    InvalidZoom(u32),
    #[error("area has no polygons")]
    EmptyArea,
    #[error("voronoi needs at least one seed")]
    NoSeeds,
    #[error("duplicate seed location for features {0:?} and {1:?}")]
    DuplicateSeeds(String, String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Hex,
    Slippy,
    Voronoi,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Hex => "hex",
            Method::Slippy => "slippy",
            Method::Voronoi => "voronoi",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "hex" => Some(Method::Hex),
            "slippy" => Some(Method::Slippy),
            "voronoi" => Some(Method::Voronoi),
            _ => None,
        }
    }
}

/// One micro-region.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub region_id: String,
    pub polygon: Polygon,
}

/// Ordered set of regions; ids are unique and sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    regions: Vec<Region>,
    method: Method,
    params: String,
    frame: Option<LocalPlane>,
}

impl RegionSet {
    pub(crate) fn new(
        mut regions: Vec<Region>,
        method: Method,
        params: String,
        frame: Option<LocalPlane>,
    ) -> Self {
        regions.sort_by(|a, b| a.region_id.cmp(&b.region_id));
        Self { regions, method, params, frame }
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &str {
        &self.params
    }

    pub fn frame(&self) -> Option<LocalPlane> {
        self.frame
    }

    pub fn region_ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.region_id.clone()).collect()
    }

    /// GeoJSON-ready view: one feature per region with region_id, method and
    /// params properties.
    pub fn to_feature_collection(&self) -> FeatureCollection {
        let features = self
            .regions
            .iter()
            .map(|r| Feature {
                feature_id: r.region_id.clone(),
                geometry: crate::geometry::Geometry::Polygon(r.polygon.clone()),
                tags: BTreeMap::from([
                    ("region_id".to_string(), r.region_id.clone()),
                    ("method".to_string(), self.method.name().to_string()),
                    ("params".to_string(), self.params.clone()),
                ]),
            })
            .collect();
        FeatureCollection::new(features).expect("region ids are unique")
    }

    /// Rebuild a region set from its GeoJSON form.
    pub fn from_feature_collection(fc: &FeatureCollection) -> Result<Self, LoadError> {
        let mut regions = Vec::with_capacity(fc.len());
        let mut method = None;
        let mut params = String::new();
        for feature in fc.iter() {
            let polygon = match &feature.geometry {
                crate::geometry::Geometry::Polygon(p) => p.clone(),
                other => {
                    return Err(LoadError::Malformed(format!(
                        "region {:?} is not a polygon: {other:?}",
                        feature.feature_id
                    )))
                }
            };
            let region_id = feature
                .tags
                .get("region_id")
                .cloned()
                .unwrap_or_else(|| feature.feature_id.clone());
            if let Some(m) = feature.tags.get("method") {
                let parsed = Method::from_name(m)
                    .ok_or_else(|| LoadError::Malformed(format!("unknown region method {m:?}")))?;
                if *method.get_or_insert(parsed) != parsed {
                    return Err(LoadError::Malformed("mixed region methods in one file".into()));
                }
            }
            if let Some(p) = feature.tags.get("params") {
                params = p.clone();
            }
            regions.push(Region { region_id, polygon });
        }
        let method = method.ok_or_else(|| LoadError::Malformed("regions file has no method property".into()))?;
        Ok(Self::new(regions, method, params, None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Coordinate;

    #[test]
    fn region_set_sorts_ids() {
        let sq = |lon: f64| {
            Polygon::rectangle(
                Coordinate::new(lon, 0.0).unwrap(),
                Coordinate::new(lon + 1.0, 1.0).unwrap(),
            )
            .unwrap()
        };
        let set = RegionSet::new(
            vec![
                Region { region_id: "b".into(), polygon: sq(0.0) },
                Region { region_id: "a".into(), polygon: sq(2.0) },
            ],
            Method::Hex,
            "resolution=8".into(),
            None,
        );
        assert_eq!(set.region_ids(), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn feature_collection_round_trip() {
        let sq = Polygon::rectangle(
            Coordinate::new(0.0, 0.0).unwrap(),
            Coordinate::new(1.0, 1.0).unwrap(),
        )
        .unwrap();
        let set = RegionSet::new(
            vec![Region { region_id: "tile_1_0_0".into(), polygon: sq }],
            Method::Slippy,
            "zoom=1".into(),
            None,
        );
        let fc = set.to_feature_collection();
        let back = RegionSet::from_feature_collection(&fc).unwrap();
        assert_eq!(back.method(), Method::Slippy);
        assert_eq!(back.params(), "zoom=1");
        assert_eq!(back.region_ids(), set.region_ids());
    }
}
