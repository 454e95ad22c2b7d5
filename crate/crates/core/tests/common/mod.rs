//! Shared fixture builders for the integration suites.

#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use regionkit::geometry::{Coordinate, Geometry, LinearRing, Polygon};
use regionkit::io::{Feature, FeatureCollection};
use regionkit::nn::Rng;
use std::collections::BTreeMap;

pub fn coord(lon: f64, lat: f64) -> Coordinate {
    Coordinate::new(lon, lat).unwrap()
}

pub fn rect(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Polygon {
    Polygon::rectangle(coord(min_lon, min_lat), coord(max_lon, max_lat)).unwrap()
}

/// Random convex polygon: vertices on an ellipse at sorted random angles.
pub fn random_convex_polygon(rng: &mut Rng, center: (f64, f64), radius: f64) -> Polygon {
    loop {
        let n = 3 + rng.next_index(6);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, std::f64::consts::TAU)).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        if angles.len() < 3 {
            continue;
        }
        let rx = radius * rng.uniform(0.5, 1.0);
        let ry = radius * rng.uniform(0.5, 1.0);
        let coords: Vec<Coordinate> = angles
            .iter()
            .map(|a| coord(center.0 + rx * a.cos(), center.1 + ry * a.sin()))
            .collect();
        if let Ok(ring) = LinearRing::new(coords) {
            return Polygon::new(ring, Vec::new());
        }
    }
}

pub fn point_feature(id: &str, lon: f64, lat: f64) -> Feature {
    Feature {
        feature_id: id.to_string(),
        geometry: Geometry::Point(coord(lon, lat)),
        tags: BTreeMap::new(),
    }
}

/// Mixed random feature collection: points, short linestrings, rectangles and
/// two-part multipolygons scattered over the given bounds.
pub fn random_features(rng: &mut Rng, count: usize, bounds: (f64, f64, f64, f64)) -> FeatureCollection {
    let (min_lon, min_lat, max_lon, max_lat) = bounds;
    let lon = |rng: &mut Rng| rng.uniform(min_lon, max_lon);
    let lat = |rng: &mut Rng| rng.uniform(min_lat, max_lat);
    let mut features = Vec::with_capacity(count);
    for i in 0..count {
        let geometry = match rng.next_index(4) {
            0 => Geometry::Point(coord(lon(rng), lat(rng))),
            1 => {
                let n = 2 + rng.next_index(3);
                let coords = (0..n).map(|_| coord(lon(rng), lat(rng))).collect();
                Geometry::LineString(coords)
            }
            2 => {
                let (x, y) = (lon(rng), lat(rng));
                let w = rng.uniform(0.001, (max_lon - min_lon) / 8.0);
                let h = rng.uniform(0.001, (max_lat - min_lat) / 8.0);
                Geometry::Polygon(rect(x, y, (x + w).min(max_lon + 1.0), (y + h).min(89.0)))
            }
            _ => {
                let mk = |rng: &mut Rng| {
                    let (x, y) = (lon(rng), lat(rng));
                    rect(x, y, x + 0.01, y + 0.01)
                };
                Geometry::MultiPolygon(
                    regionkit::geometry::MultiPolygon::new(vec![mk(rng), mk(rng)]).unwrap(),
                )
            }
        };
        features.push(Feature { feature_id: format!("f{i}"), geometry, tags: BTreeMap::new() });
    }
    FeatureCollection::new(features).unwrap()
}

/// Rejection-sample a point inside one of the polygons.
pub fn random_point_inside(rng: &mut Rng, polygons: &[Polygon]) -> Coordinate {
    let bbox = regionkit::geometry::BBox::of_polygons(polygons).unwrap();
    loop {
        let p = coord(rng.uniform(bbox.min_lon, bbox.max_lon), rng.uniform(bbox.min_lat, bbox.max_lat));
        if polygons.iter().any(|poly| regionkit::geometry::point_in_polygon(p, poly)) {
            return p;
        }
    }
}

/// Write a zip archive of (name, content) text entries.
pub fn write_zip(path: &Path, files: &[(&str, &str)]) {
    let file = std::fs::File::create(path).unwrap();
    let mut writer = zip::ZipWriter::new(file);
    let options = zip::write::SimpleFileOptions::default();
    for (name, content) in files {
        writer.start_file(*name, options).unwrap();
        writer.write_all(content.as_bytes()).unwrap();
    }
    writer.finish().unwrap();
}

pub const TOY_STOPS: &str = "\
stop_id,stop_name,stop_lat,stop_lon
S1,Alpha,51.1050,17.0300
S2,Beta,51.1100,17.0420
S3,Gamma,51.1200,17.0550
";

pub const TOY_TRIPS: &str = "\
route_id,service_id,trip_id,trip_headsign
R1,WK,T1,Centre
R1,WK,T2,Airport
R2,WK,T3,Centre
R2,WK,T4,
";

pub const TOY_STOP_TIMES: &str = "\
trip_id,arrival_time,departure_time,stop_id,stop_sequence
T1,08:04:30,08:05:00,S1,1
T1,08:14:00,08:15:00,S2,2
T2,08:19:00,08:20:00,S1,1
T3,09:09:00,09:10:00,S1,1
T3,09:29:00,,S2,2
T4,24:29:00,24:30:00,S2,1
";

/// Write the hand-enumerated toy feed used by the GTFS oracles.
pub fn write_toy_gtfs(path: &Path) {
    write_zip(
        path,
        &[("stops.txt", TOY_STOPS), ("trips.txt", TOY_TRIPS), ("stop_times.txt", TOY_STOP_TIMES)],
    );
}
