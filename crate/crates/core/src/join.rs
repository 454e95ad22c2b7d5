//! Spatial join (intersection predicate, grid-index accelerated) and region
//! neighbourhood graphs with ring-distance queries.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::geometry::{
    point_in_polygon, polygons_intersect, segments_intersect, BBox, Geometry, Polygon,
};
use crate::io::FeatureCollection;
use crate::regionalize::{HexCellId, Method, RegionSet};

#[derive(Debug, Error)]
pub enum JoinError {
    #[error("region set is empty")]
    EmptyRegions,
    #[error("expected a {expected} region set, got {found}")]
    WrongMethod { expected: &'static str, found: &'static str },
    #[error("unknown region id {0:?}")]
    UnknownRegion(String),
}

/// Set of (region_id, feature_id) intersection pairs, canonically ordered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JointIndex {
    pairs: BTreeSet<(String, String)>,
}

impl JointIndex {
    pub fn new(pairs: BTreeSet<(String, String)>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(String, String)> {
        self.pairs.iter()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, region_id: &str, feature_id: &str) -> bool {
        self.pairs.contains(&(region_id.to_string(), feature_id.to_string()))
    }

    /// Feature ids joined to one region.
    pub fn features_of(&self, region_id: &str) -> Vec<&str> {
        self.pairs
            .range((region_id.to_string(), String::new())..)
            .take_while(|(r, _)| r == region_id)
            .map(|(_, f)| f.as_str())
            .collect()
    }

    /// CSV with header `region_id,feature_id`, rows sorted lexicographically.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("region_id,feature_id\n");
        for (r, f) in &self.pairs {
            out.push_str(r);
            out.push(',');
            out.push_str(f);
            out.push('\n');
        }
        out
    }

    pub fn from_csv_string(text: &str) -> Result<Self, JoinError> {
        let mut lines = text.lines();
        match lines.next() {
            Some("region_id,feature_id") => {}
            other => {
                return Err(JoinError::UnknownRegion(format!(
                    "bad joint csv header: {other:?}"
                )))
            }
        }
        let mut pairs = BTreeSet::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let Some((r, f)) = line.split_once(',') else {
                return Err(JoinError::UnknownRegion(format!("bad joint csv row: {line:?}")));
            };
            pairs.insert((r.to_string(), f.to_string()));
        }
        Ok(Self { pairs })
    }
}

/// Uniform grid over region bounding boxes; every region is registered in
/// every bucket its bbox overlaps.
pub struct GridIndex {
    cell_size: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex {
    /// Cell size heuristic: median region bbox width, so one bucket holds
    /// about one region for regular tessellations.
    pub fn build(regions: &RegionSet) -> Self {
        let bboxes: Vec<BBox> = regions.regions().iter().map(|r| r.polygon.bbox()).collect();
        let mut widths: Vec<f64> = bboxes.iter().map(|b| b.width()).collect();
        widths.sort_by(|a, b| a.partial_cmp(b).expect("finite widths"));
        let median = widths.get(widths.len() / 2).copied().unwrap_or(1.0);
        let cell_size = if median > 1e-9 { median } else { 1e-9 };
        let mut index = Self { cell_size, buckets: HashMap::new() };
        for (i, bbox) in bboxes.iter().enumerate() {
            for key in index.keys_of(bbox) {
                index.buckets.entry(key).or_default().push(i);
            }
        }
        index
    }

    fn keys_of(&self, bbox: &BBox) -> Vec<(i64, i64)> {
        let x0 = (bbox.min_lon / self.cell_size).floor() as i64;
        let x1 = (bbox.max_lon / self.cell_size).floor() as i64;
        let y0 = (bbox.min_lat / self.cell_size).floor() as i64;
        let y1 = (bbox.max_lat / self.cell_size).floor() as i64;
        let mut keys = Vec::with_capacity(((x1 - x0 + 1) * (y1 - y0 + 1)) as usize);
        for x in x0..=x1 {
            for y in y0..=y1 {
                keys.push((x, y));
            }
        }
        keys
    }

    /// Candidate region indices whose buckets overlap the probe bbox, sorted
    /// and deduplicated.
    pub fn candidates(&self, bbox: &BBox) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .keys_of(bbox)
            .into_iter()
            .filter_map(|k| self.buckets.get(&k))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Closed-set intersection test between a feature geometry and a region
/// polygon.
pub fn feature_intersects_polygon(geometry: &Geometry, polygon: &Polygon) -> bool {
    match geometry {
        Geometry::Point(p) => point_in_polygon(*p, polygon),
        Geometry::LineString(coords) => {
            if coords.iter().any(|p| point_in_polygon(*p, polygon)) {
                return true;
            }
            coords.windows(2).any(|seg| {
                polygon
                    .rings()
                    .any(|ring| {
                        ring.coords()
                            .windows(2)
                            .any(|edge| segments_intersect(seg[0], seg[1], edge[0], edge[1]))
                    })
            })
        }
        Geometry::Polygon(p) => polygons_intersect(p, polygon),
        Geometry::MultiPolygon(mp) => mp.polygons().iter().any(|p| polygons_intersect(p, polygon)),
    }
}

/// Pair every feature with every region whose polygon it intersects.
///
/// Grid-accelerated, but the result is identical to the brute-force double
/// loop: the index only prunes bbox-disjoint pairs.
pub fn intersection_join(regions: &RegionSet, features: &FeatureCollection) -> Result<JointIndex, JoinError> {
    if regions.is_empty() {
        return Err(JoinError::EmptyRegions);
    }
    let index = GridIndex::build(regions);
    let mut pairs = BTreeSet::new();
    for feature in features.iter() {
        let bbox = feature.geometry.bbox();
        for region_idx in index.candidates(&bbox) {
            let region = &regions.regions()[region_idx];
            if !bbox.overlaps(&region.polygon.bbox()) {
                continue;
            }
            if feature_intersects_polygon(&feature.geometry, &region.polygon) {
                pairs.insert((region.region_id.clone(), feature.feature_id.clone()));
            }
        }
    }
    Ok(JointIndex { pairs })
}

/// Reference joiner without the grid index; the oracle the accelerated path
/// is tested against.
pub fn intersection_join_bruteforce(
    regions: &RegionSet,
    features: &FeatureCollection,
) -> Result<JointIndex, JoinError> {
    if regions.is_empty() {
        return Err(JoinError::EmptyRegions);
    }
    let mut pairs = BTreeSet::new();
    for feature in features.iter() {
        for region in regions.regions() {
            if feature_intersects_polygon(&feature.geometry, &region.polygon) {
                pairs.insert((region.region_id.clone(), feature.feature_id.clone()));
            }
        }
    }
    Ok(JointIndex { pairs })
}

/// Undirected adjacency over region ids: no self loops, symmetric.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeighbourhoodGraph {
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl NeighbourhoodGraph {
    pub fn new(nodes: impl IntoIterator<Item = String>) -> Self {
        Self { adjacency: nodes.into_iter().map(|n| (n, BTreeSet::new())).collect() }
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        if a == b {
            return;
        }
        self.adjacency.entry(a.to_string()).or_default().insert(b.to_string());
        self.adjacency.entry(b.to_string()).or_default().insert(a.to_string());
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.adjacency.keys().map(String::as_str)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.adjacency.contains_key(id)
    }

    pub fn neighbours(&self, id: &str) -> impl Iterator<Item = &str> {
        self.adjacency.get(id).into_iter().flatten().map(String::as_str)
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.adjacency.get(a).map(|s| s.contains(b)).unwrap_or(false)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Undirected edges, each reported once with a < b.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for (a, neighbours) in &self.adjacency {
            for b in neighbours {
                if a < b {
                    out.push((a.as_str(), b.as_str()));
                }
            }
        }
        out
    }
}

/// Adjacency neighbourhood: regions touching each other (shared boundary or
/// overlap, closed-set semantics, so corner-touching tiles are adjacent).
pub fn adjacency_neighbourhood(regions: &RegionSet) -> NeighbourhoodGraph {
    let mut graph = NeighbourhoodGraph::new(regions.regions().iter().map(|r| r.region_id.clone()));
    if regions.is_empty() {
        return graph;
    }
    let index = GridIndex::build(regions);
    let items = regions.regions();
    for (i, region) in items.iter().enumerate() {
        for j in index.candidates(&region.polygon.bbox()) {
            if j <= i {
                continue;
            }
            if polygons_intersect(&region.polygon, &items[j].polygon) {
                graph.add_edge(&region.region_id, &items[j].region_id);
            }
        }
    }
    graph
}

/// Hex neighbourhood: edges between cells at axial distance 1, restricted to
/// cells present in the set.
pub fn hex_neighbourhood(regions: &RegionSet) -> Result<NeighbourhoodGraph, JoinError> {
    if regions.method() != Method::Hex {
        return Err(JoinError::WrongMethod { expected: "hex", found: regions.method().name() });
    }
    let mut graph = NeighbourhoodGraph::new(regions.regions().iter().map(|r| r.region_id.clone()));
    let present: BTreeSet<&str> = regions.regions().iter().map(|r| r.region_id.as_str()).collect();
    for region in regions.regions() {
        let Some(cell) = HexCellId::parse(&region.region_id) else {
            return Err(JoinError::UnknownRegion(format!(
                "region id {:?} is not a hex cell id",
                region.region_id
            )));
        };
        for neighbour in cell.neighbours() {
            let id = neighbour.render();
            if present.contains(id.as_str()) {
                graph.add_edge(&region.region_id, &id);
            }
        }
    }
    Ok(graph)
}

/// Region ids at exactly breadth-first distance `k` from `center`.
pub fn ring(graph: &NeighbourhoodGraph, center: &str, k: usize) -> Result<BTreeSet<String>, JoinError> {
    if !graph.contains_node(center) {
        return Err(JoinError::UnknownRegion(center.to_string()));
    }
    let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
    dist.insert(center, 0);
    let mut queue = VecDeque::from([center]);
    let mut out = BTreeSet::new();
    if k == 0 {
        out.insert(center.to_string());
        return Ok(out);
    }
    while let Some(node) = queue.pop_front() {
        let d = dist[node];
        if d >= k {
            continue;
        }
        for next in graph.neighbours(node) {
            if !dist.contains_key(next) {
                dist.insert(next, d + 1);
                if d + 1 == k {
                    out.insert(next.to_string());
                }
                queue.push_back(next);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Coordinate;
    use crate::io::Feature;
    use crate::regionalize::{regionalize_hex, regionalize_slippy, Region};
    use std::collections::BTreeMap;

    fn coord(lon: f64, lat: f64) -> Coordinate {
        Coordinate::new(lon, lat).unwrap()
    }

    fn square(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Polygon {
        Polygon::rectangle(coord(min_lon, min_lat), coord(max_lon, max_lat)).unwrap()
    }

    fn region_set(regions: Vec<(&str, Polygon)>) -> RegionSet {
        RegionSet::new(
            regions
                .into_iter()
                .map(|(id, polygon)| Region { region_id: id.to_string(), polygon })
                .collect(),
            Method::Voronoi,
            String::new(),
            None,
        )
    }

    fn point_feature(id: &str, lon: f64, lat: f64) -> Feature {
        Feature {
            feature_id: id.to_string(),
            geometry: Geometry::Point(coord(lon, lat)),
            tags: BTreeMap::new(),
        }
    }

    #[test]
    fn point_in_one_hex_cell_gives_one_pair() {
        let area = vec![square(0.0, 0.0, 0.5, 0.5)];
        let regions = regionalize_hex(&area, 6).unwrap();
        let features =
            FeatureCollection::new(vec![point_feature("p", 0.01, 0.01)]).unwrap();
        let joint = intersection_join(&regions, &features).unwrap();
        assert_eq!(joint.len(), 1);
    }

    #[test]
    fn outside_feature_contributes_nothing() {
        let regions = region_set(vec![("a", square(0.0, 0.0, 1.0, 1.0))]);
        let features = FeatureCollection::new(vec![point_feature("far", 40.0, 40.0)]).unwrap();
        let joint = intersection_join(&regions, &features).unwrap();
        assert!(joint.is_empty());
    }

    #[test]
    fn empty_regions_is_an_error() {
        let regions = region_set(vec![]);
        let features = FeatureCollection::new(vec![]).unwrap();
        assert!(matches!(intersection_join(&regions, &features), Err(JoinError::EmptyRegions)));
    }

    #[test]
    fn linestring_crossing_without_interior_vertices_still_joins() {
        let regions = region_set(vec![("a", square(0.0, 0.0, 1.0, 1.0))]);
        let line = Feature {
            feature_id: "l".to_string(),
            geometry: Geometry::LineString(vec![coord(-1.0, 0.5), coord(2.0, 0.5)]),
            tags: BTreeMap::new(),
        };
        let features = FeatureCollection::new(vec![line]).unwrap();
        let joint = intersection_join(&regions, &features).unwrap();
        assert!(joint.contains("a", "l"));
    }

    #[test]
    fn joint_csv_round_trip() {
        let mut pairs = BTreeSet::new();
        pairs.insert(("r2".to_string(), "f1".to_string()));
        pairs.insert(("r1".to_string(), "f9".to_string()));
        let joint = JointIndex::new(pairs);
        let text = joint.to_csv_string();
        assert!(text.starts_with("region_id,feature_id\nr1,f9\nr2,f1"));
        assert_eq!(JointIndex::from_csv_string(&text).unwrap(), joint);
    }

    #[test]
    fn disjoint_squares_have_no_edges() {
        let regions = region_set(vec![
            ("a", square(0.0, 0.0, 1.0, 1.0)),
            ("b", square(5.0, 5.0, 6.0, 6.0)),
        ]);
        let graph = adjacency_neighbourhood(&regions);
        assert_eq!(graph.edge_count(), 0);
        assert_eq!(graph.node_count(), 2);
    }

    #[test]
    fn two_by_two_tiles_touch_diagonally() {
        let world = square(-180.0, -85.0, 180.0, 85.0);
        let regions = regionalize_slippy(&[world], 1).unwrap();
        let graph = adjacency_neighbourhood(&regions);
        assert_eq!(graph.node_count(), 4);
        // Corner point is shared by all four tiles, so the graph is complete.
        for a in graph.nodes() {
            for b in graph.nodes() {
                if a != b {
                    assert!(graph.has_edge(a, b), "{a} - {b}");
                }
            }
        }
    }

    #[test]
    fn hex_neighbourhood_requires_hex_method() {
        let regions = region_set(vec![("a", square(0.0, 0.0, 1.0, 1.0))]);
        assert!(matches!(
            hex_neighbourhood(&regions),
            Err(JoinError::WrongMethod { expected: "hex", .. })
        ));
    }

    #[test]
    fn hex_flower_center_has_degree_six() {
        // An area the size of a cell neighbourhood: the middle cell keeps all
        // six neighbours in the set.
        let area = vec![square(-0.6, -0.6, 0.6, 0.6)];
        let regions = regionalize_hex(&area, 5).unwrap();
        let graph = hex_neighbourhood(&regions).unwrap();
        let center_degree = graph.neighbours("hex_5_0_0").count();
        assert_eq!(center_degree, 6);
        // Hex edges are a subset of geometric adjacency edges.
        let geometric = adjacency_neighbourhood(&regions);
        for (a, b) in graph.edges() {
            assert!(geometric.has_edge(a, b), "{a} - {b} missing geometrically");
        }
    }

    #[test]
    fn ring_distances() {
        let mut graph = NeighbourhoodGraph::new(["a", "b", "c", "d", "x"].map(String::from));
        graph.add_edge("a", "b");
        graph.add_edge("b", "c");
        graph.add_edge("c", "d");
        assert_eq!(ring(&graph, "a", 0).unwrap(), BTreeSet::from(["a".to_string()]));
        assert_eq!(ring(&graph, "a", 2).unwrap(), BTreeSet::from(["c".to_string()]));
        assert!(ring(&graph, "a", 4).unwrap().is_empty());
        // Isolated node never appears in any ring of a.
        for k in 0..5 {
            assert!(!ring(&graph, "a", k).unwrap().contains("x"));
        }
        assert!(matches!(ring(&graph, "zz", 1), Err(JoinError::UnknownRegion(_))));
    }
}
