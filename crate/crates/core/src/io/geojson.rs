//! GeoJSON FeatureCollection reader/writer (RFC 7946 subset, WGS84 only).
//! Coordinates are written with 9 decimal digits.

use std::path::Path;

use serde_json::Value;

use crate::geometry::{Coordinate, Geometry, LinearRing, MultiPolygon, Polygon};

use super::{Feature, FeatureCollection, LoadError};

pub fn load_geojson(path: &Path) -> Result<FeatureCollection, LoadError> {
    let text = std::fs::read_to_string(path)?;
    parse_geojson(&text)
}

pub fn parse_geojson(text: &str) -> Result<FeatureCollection, LoadError> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| LoadError::Malformed(format!("geojson parse: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| LoadError::Malformed("root is not an object".into()))?;
    match obj.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => {}
        other => {
            return Err(LoadError::Malformed(format!(
                "expected FeatureCollection, got {other:?}"
            )))
        }
    }
    let features_value = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| LoadError::Malformed("missing features array".into()))?;

    let mut features = Vec::with_capacity(features_value.len());
    for (index, fv) in features_value.iter().enumerate() {
        features.push(parse_feature(fv, index)?);
    }
    FeatureCollection::new(features)
}

fn parse_feature(value: &Value, index: usize) -> Result<Feature, LoadError> {
    let obj = value
        .as_object()
        .ok_or_else(|| LoadError::Malformed(format!("feature {index} is not an object")))?;
    let feature_id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(other) => return Err(LoadError::Malformed(format!("feature {index}: bad id {other}"))),
        None => format!("f{index}"),
    };
    let geometry = parse_geometry(
        obj.get("geometry")
            .ok_or_else(|| LoadError::Malformed(format!("feature {index}: missing geometry")))?,
    )?;
    let mut tags = std::collections::BTreeMap::new();
    if let Some(props) = obj.get("properties").and_then(Value::as_object) {
        for (k, v) in props {
            let rendered = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                Value::Null => continue,
                other => other.to_string(),
            };
            tags.insert(k.clone(), rendered);
        }
    }
    Ok(Feature { feature_id, geometry, tags })
}

fn parse_geometry(value: &Value) -> Result<Geometry, LoadError> {
    let obj = value.as_object().ok_or_else(|| LoadError::Malformed("geometry is not an object".into()))?;
    let gtype = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| LoadError::Malformed("geometry missing type".into()))?;
    let coords = obj
        .get("coordinates")
        .ok_or_else(|| LoadError::Malformed("geometry missing coordinates".into()))?;
    match gtype {
        "Point" => Ok(Geometry::Point(parse_position(coords)?)),
        "LineString" => {
            let line = parse_positions(coords)?;
            if line.len() < 2 {
                return Err(LoadError::Malformed("linestring needs at least 2 positions".into()));
            }
            Ok(Geometry::LineString(line))
        }
        "Polygon" => Ok(Geometry::Polygon(parse_polygon(coords)?)),
        "MultiPolygon" => {
            let arr = coords
                .as_array()
                .ok_or_else(|| LoadError::Malformed("multipolygon coordinates not an array".into()))?;
            let polygons: Vec<Polygon> = arr.iter().map(parse_polygon).collect::<Result<_, _>>()?;
            Ok(Geometry::MultiPolygon(MultiPolygon::new(polygons)?))
        }
        other => Err(LoadError::Malformed(format!("unsupported geometry type {other:?}"))),
    }
}

fn parse_polygon(coords: &Value) -> Result<Polygon, LoadError> {
    let rings = coords
        .as_array()
        .ok_or_else(|| LoadError::Malformed("polygon coordinates not an array".into()))?;
    if rings.is_empty() {
        return Err(LoadError::Malformed("polygon without rings".into()));
    }
    let mut parsed: Vec<LinearRing> = Vec::with_capacity(rings.len());
    for ring in rings {
        parsed.push(LinearRing::new(parse_positions(ring)?)?);
    }
    let exterior = parsed.remove(0);
    Ok(Polygon::new(exterior, parsed))
}

fn parse_positions(value: &Value) -> Result<Vec<Coordinate>, LoadError> {
    value
        .as_array()
        .ok_or_else(|| LoadError::Malformed("position list is not an array".into()))?
        .iter()
        .map(parse_position)
        .collect()
}

fn parse_position(value: &Value) -> Result<Coordinate, LoadError> {
    let arr = value
        .as_array()
        .ok_or_else(|| LoadError::Malformed("position is not an array".into()))?;
    if arr.len() < 2 {
        return Err(LoadError::Malformed("position needs lon and lat".into()));
    }
    let lon = arr[0].as_f64().ok_or_else(|| LoadError::Malformed("lon is not a number".into()))?;
    let lat = arr[1].as_f64().ok_or_else(|| LoadError::Malformed("lat is not a number".into()))?;
    Ok(Coordinate::new(lon, lat)?)
}

pub fn write_geojson(fc: &FeatureCollection, path: &Path) -> Result<(), LoadError> {
    std::fs::write(path, write_geojson_string(fc))?;
    Ok(())
}

/// RFC 7946-shaped document, features in input order, coordinates with
/// 9 decimal digits.
pub fn write_geojson_string(fc: &FeatureCollection) -> String {
    let mut out = String::from("{\"type\":\"FeatureCollection\",\"features\":[");
    for (i, feature) in fc.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"type\":\"Feature\",\"id\":");
        write_json_string(&feature.feature_id, &mut out);
        out.push_str(",\"properties\":{");
        for (j, (k, v)) in feature.tags.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write_json_string(k, &mut out);
            out.push(':');
            write_json_string(v, &mut out);
        }
        out.push_str("},\"geometry\":");
        write_geometry(&feature.geometry, &mut out);
        out.push('}');
    }
    out.push_str("]}\n");
    out
}

fn write_geometry(geometry: &Geometry, out: &mut String) {
    match geometry {
        Geometry::Point(c) => {
            out.push_str("{\"type\":\"Point\",\"coordinates\":");
            write_position(*c, out);
            out.push('}');
        }
        Geometry::LineString(cs) => {
            out.push_str("{\"type\":\"LineString\",\"coordinates\":[");
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_position(*c, out);
            }
            out.push_str("]}");
        }
        Geometry::Polygon(p) => {
            out.push_str("{\"type\":\"Polygon\",\"coordinates\":");
            write_polygon_rings(p, out);
            out.push('}');
        }
        Geometry::MultiPolygon(mp) => {
            out.push_str("{\"type\":\"MultiPolygon\",\"coordinates\":[");
            for (i, p) in mp.polygons().iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_polygon_rings(p, out);
            }
            out.push_str("]}");
        }
    }
}

fn write_polygon_rings(polygon: &Polygon, out: &mut String) {
    out.push('[');
    for (i, ring) in polygon.rings().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for (j, c) in ring.coords().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write_position(*c, out);
        }
        out.push(']');
    }
    out.push(']');
}

fn write_position(c: Coordinate, out: &mut String) {
    out.push_str(&format!("[{:.9},{:.9}]", c.lon(), c.lat()));
}

fn write_json_string(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}
