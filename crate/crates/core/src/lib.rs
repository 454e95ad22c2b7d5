//! Geospatial representation-learning toolkit: load vector features from
//! offline sources (GeoJSON, OSM XML, GTFS), tessellate an area into
//! micro-regions (hex grid, slippy tiles, Voronoi), join features to regions,
//! and embed regions into vectors with count-based and trained embedders.
//! Downstream clustering and regression operators round out the pipeline.

pub mod analysis;
pub mod embed;
pub mod geometry;
pub mod io;
pub mod join;
pub mod jsonfmt;
pub mod nn;
pub mod regionalize;
