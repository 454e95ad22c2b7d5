//! OSM XML reader with tag filtering. Nodes become points, closed ways become
//! polygons, open ways become linestrings. Relations are skipped and counted;
//! assembling multipolygon relations is out of scope.

use std::collections::BTreeMap;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::geometry::{Coordinate, Geometry, LinearRing, Polygon};

use super::{Feature, FeatureCollection, LoadError, TagFilter};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OsmStats {
    /// Relations present in the file; they are not converted to features.
    pub relations_skipped: usize,
}

#[derive(Debug)]
enum Element {
    Node { id: i64, tags: BTreeMap<String, String> },
    Way { id: i64, refs: Vec<i64>, tags: BTreeMap<String, String> },
}

pub fn load_osm_xml(path: &Path, filter: &TagFilter) -> Result<(FeatureCollection, OsmStats), LoadError> {
    let text = std::fs::read_to_string(path)?;
    parse_osm_xml(&text, filter)
}

pub fn parse_osm_xml(text: &str, filter: &TagFilter) -> Result<(FeatureCollection, OsmStats), LoadError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut nodes: BTreeMap<i64, Coordinate> = BTreeMap::new();
    let mut elements: Vec<Element> = Vec::new();
    let mut stats = OsmStats::default();

    // Stack depth is at most one element (node/way/relation); nested tag/nd
    // entries mutate the element under construction.
    let mut current: Option<Element> = None;
    let mut in_relation = false;

    loop {
        let event = reader
            .read_event()
            .map_err(|e| LoadError::Malformed(format!("xml parse: {e}")))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                match e.name().as_ref() {
                    b"node" => {
                        let id = attr_i64(e, "id")?;
                        let lat = attr_f64(e, "lat")?;
                        let lon = attr_f64(e, "lon")?;
                        nodes.insert(id, Coordinate::new(lon, lat)?);
                        let node = Element::Node { id, tags: BTreeMap::new() };
                        if empty {
                            elements.push(node);
                        } else {
                            current = Some(node);
                        }
                    }
                    b"way" => {
                        let id = attr_i64(e, "id")?;
                        let way = Element::Way { id, refs: Vec::new(), tags: BTreeMap::new() };
                        if empty {
                            elements.push(way);
                        } else {
                            current = Some(way);
                        }
                    }
                    b"relation" => {
                        stats.relations_skipped += 1;
                        if !empty {
                            in_relation = true;
                        }
                    }
                    b"nd" => {
                        if let Some(Element::Way { refs, .. }) = current.as_mut() {
                            refs.push(attr_i64(e, "ref")?);
                        }
                    }
                    b"tag" => {
                        if !in_relation {
                            if let Some(element) = current.as_mut() {
                                let k = attr_string(e, "k")?;
                                let v = attr_string(e, "v")?;
                                match element {
                                    Element::Node { tags, .. } | Element::Way { tags, .. } => {
                                        tags.insert(k, v);
                                    }
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                b"node" | b"way" => {
                    if let Some(element) = current.take() {
                        elements.push(element);
                    }
                }
                b"relation" => in_relation = false,
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }

    let mut features = Vec::new();
    for element in elements {
        let (id_str, tags, geometry) = match element {
            Element::Node { id, tags } => {
                let coord = nodes[&id];
                (format!("node/{id}"), tags, Geometry::Point(coord))
            }
            Element::Way { id, refs, tags } => {
                if tags.is_empty() || !element_matches(&tags, filter) {
                    continue;
                }
                if refs.len() < 2 {
                    return Err(LoadError::Malformed(format!("way {id} has fewer than 2 node refs")));
                }
                let coords: Vec<Coordinate> = refs
                    .iter()
                    .map(|r| {
                        nodes.get(r).copied().ok_or_else(|| {
                            LoadError::Malformed(format!("way {id} references missing node {r}"))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let geometry = if refs.first() == refs.last() {
                    Geometry::Polygon(Polygon::new(LinearRing::new(coords)?, Vec::new()))
                } else {
                    Geometry::LineString(coords)
                };
                (format!("way/{id}"), tags, geometry)
            }
        };
        if !element_matches(&tags, filter) {
            continue;
        }
        let kept: BTreeMap<String, String> =
            tags.into_iter().filter(|(k, _)| filter.contains_key(k)).collect();
        features.push(Feature { feature_id: id_str, geometry, tags: kept });
    }
    Ok((FeatureCollection::new(features)?, stats))
}

fn element_matches(tags: &BTreeMap<String, String>, filter: &TagFilter) -> bool {
    tags.iter().any(|(k, v)| filter.matches(k, v))
}

fn attr_string(e: &BytesStart<'_>, name: &str) -> Result<String, LoadError> {
    for attr in e.attributes() {
        let attr = attr.map_err(|err| LoadError::Malformed(format!("bad attribute: {err}")))?;
        if attr.key.as_ref() == name.as_bytes() {
            return Ok(attr
                .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                .map_err(|err| LoadError::Malformed(format!("bad attribute value: {err}")))?
                .into_owned());
        }
    }
    Err(LoadError::Malformed(format!(
        "element <{}> missing attribute {name:?}",
        String::from_utf8_lossy(e.name().as_ref())
    )))
}

fn attr_i64(e: &BytesStart<'_>, name: &str) -> Result<i64, LoadError> {
    let raw = attr_string(e, name)?;
    raw.parse().map_err(|_| LoadError::Malformed(format!("attribute {name}={raw:?} is not an integer")))
}

fn attr_f64(e: &BytesStart<'_>, name: &str) -> Result<f64, LoadError> {
    let raw = attr_string(e, name)?;
    raw.parse().map_err(|_| LoadError::Malformed(format!("attribute {name}={raw:?} is not a number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn park_restaurant_filter() -> TagFilter {
        TagFilter::from_json(r#"{"leisure": ["park"], "amenity": ["restaurant"]}"#).unwrap()
    }

    #[test]
    fn tagged_node_becomes_point_feature() {
        let xml = r#"<?xml version="1.0"?>
            <osm version="0.6">
              <node id="101" lat="51.1" lon="17.03">
                <tag k="amenity" v="restaurant"/>
                <tag k="name" v="Pierogi"/>
              </node>
            </osm>"#;
        let (fc, _) = parse_osm_xml(xml, &park_restaurant_filter()).unwrap();
        assert_eq!(fc.len(), 1);
        let f = &fc.features()[0];
        assert_eq!(f.feature_id, "node/101");
        assert!(matches!(f.geometry, Geometry::Point(_)));
        // Only filter keys are retained.
        assert_eq!(f.tags.len(), 1);
        assert_eq!(f.tags.get("amenity").unwrap(), "restaurant");
    }

    #[test]
    fn closed_way_becomes_polygon() {
        let xml = r#"<osm>
            <node id="1" lat="0.0" lon="0.0"/>
            <node id="2" lat="0.0" lon="1.0"/>
            <node id="3" lat="1.0" lon="1.0"/>
            <node id="4" lat="1.0" lon="0.0"/>
            <way id="9">
              <nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/>
              <tag k="leisure" v="park"/>
            </way>
          </osm>"#;
        let (fc, _) = parse_osm_xml(xml, &park_restaurant_filter()).unwrap();
        assert_eq!(fc.len(), 1);
        assert_eq!(fc.features()[0].feature_id, "way/9");
        assert!(matches!(fc.features()[0].geometry, Geometry::Polygon(_)));
    }

    #[test]
    fn open_way_becomes_linestring() {
        let xml = r#"<osm>
            <node id="1" lat="0.0" lon="0.0"/>
            <node id="2" lat="0.5" lon="1.0"/>
            <way id="9">
              <nd ref="1"/><nd ref="2"/>
              <tag k="amenity" v="restaurant"/>
            </way>
          </osm>"#;
        let (fc, _) = parse_osm_xml(xml, &park_restaurant_filter()).unwrap();
        assert!(matches!(fc.features()[0].geometry, Geometry::LineString(_)));
    }

    #[test]
    fn filter_miss_is_excluded() {
        let xml = r#"<osm><node id="7" lat="1" lon="2"><tag k="shop" v="bakery"/></node></osm>"#;
        let (fc, _) = parse_osm_xml(xml, &park_restaurant_filter()).unwrap();
        assert!(fc.is_empty());
        // Value outside the accepted list is also a miss.
        let xml = r#"<osm><node id="7" lat="1" lon="2"><tag k="leisure" v="garden"/></node></osm>"#;
        let (fc, _) = parse_osm_xml(xml, &park_restaurant_filter()).unwrap();
        assert!(fc.is_empty());
    }

    #[test]
    fn relations_are_counted_not_loaded() {
        let xml = r#"<osm>
            <node id="1" lat="0" lon="0"><tag k="leisure" v="park"/></node>
            <relation id="5"><member type="way" ref="9" role="outer"/><tag k="leisure" v="park"/></relation>
          </osm>"#;
        let (fc, stats) = parse_osm_xml(xml, &park_restaurant_filter()).unwrap();
        assert_eq!(fc.len(), 1);
        assert_eq!(stats.relations_skipped, 1);
    }

    #[test]
    fn way_with_missing_node_is_malformed() {
        let xml = r#"<osm>
            <node id="1" lat="0" lon="0"/>
            <way id="9"><nd ref="1"/><nd ref="999"/><tag k="leisure" v="park"/></way>
          </osm>"#;
        let err = parse_osm_xml(xml, &park_restaurant_filter()).unwrap_err();
        assert!(matches!(err, LoadError::Malformed(_)));
        assert!(err.to_string().contains("999"));
    }

    #[test]
    fn broken_xml_is_malformed() {
        let err = parse_osm_xml("<osm><node id=", &park_restaurant_filter()).unwrap_err();
        assert!(matches!(err, LoadError::Malformed(_)));
    }
}
