//! Planar/spherical geometry kernel: coordinates, rings, polygons, predicates,
//! half-plane clipping and the Web Mercator / local-plane projections.
//!
//! All predicates use closed-set semantics: boundary points count as inside.
//! Orientation sign tests resolve degeneracies with a fixed 1e-12 epsilon.

use thiserror::Error;

/// Epsilon for orientation sign tests.
pub const ORIENT_EPS: f64 = 1e-12;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Latitude where the Web Mercator y coordinate reaches 0/1, i.e. atan(sinh(pi)) in degrees.
pub const MAX_MERCATOR_LAT: f64 = 85.051_128_779_806_59;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid coordinate: lon={lon} lat={lat} ({reason})")]
    InvalidCoordinate { lon: f64, lat: f64, reason: &'static str },
    #[error("invalid ring: {0}")]
    InvalidRing(String),
    #[error("multipolygon must contain at least one polygon")]
    EmptyMultiPolygon,
    #[error("invalid bbox: min must not exceed max")]
    InvalidBBox,
    #[error("local plane reference latitude {0} out of range (-89, 89)")]
    InvalidLatRef(f64),
}

/// A WGS84 longitude/latitude pair in degrees.
///
/// Longitudes outside [-180, 180] are wrapped into that closed range; the
/// endpoints themselves are kept as given so rectangles touching the
/// antimeridian keep distinct east/west edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinate {
    lon: f64,
    lat: f64,
}

/// Tolerance for clamping values a rounding error beyond the valid range.
const RANGE_SLACK: f64 = 1e-9;

impl Coordinate {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeometryError> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(GeometryError::InvalidCoordinate { lon, lat, reason: "not finite" });
        }
        let lat = if lat > 90.0 && lat <= 90.0 + RANGE_SLACK {
            90.0
        } else if lat < -90.0 && lat >= -90.0 - RANGE_SLACK {
            -90.0
        } else {
            lat
        };
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeometryError::InvalidCoordinate { lon, lat, reason: "latitude out of range" });
        }
        let lon = if lon >= -180.0 - RANGE_SLACK && lon <= 180.0 + RANGE_SLACK {
            lon.clamp(-180.0, 180.0)
        } else {
            lon - 360.0 * ((lon + 180.0) / 360.0).floor()
        };
        Ok(Self { lon, lat })
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }
}

/// A point in a [`LocalPlane`] working frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(&self, other: PlanarPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn sub(&self, other: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(self.x - other.x, self.y - other.y)
    }

    pub fn dist2(&self, other: PlanarPoint) -> f64 {
        let d = self.sub(other);
        d.x * d.x + d.y * d.y
    }
}

/// Equirectangular working frame: x = lon * cos(lat_ref), y = lat.
///
/// Distortion is bounded at city scale; the reference latitude is quantized
/// to two decimals so region ids stay stable under tiny area perturbations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPlane {
    lat_ref: f64,
}

impl LocalPlane {
    pub fn new(lat_ref: f64) -> Result<Self, GeometryError> {
        if !lat_ref.is_finite() || lat_ref.abs() >= 89.0 {
            return Err(GeometryError::InvalidLatRef(lat_ref));
        }
        Ok(Self { lat_ref })
    }

    /// Frame anchored at the area centroid latitude, rounded to 2 decimals.
    pub fn for_area(polygons: &[Polygon]) -> Result<Self, GeometryError> {
        let lat = centroid_lat(polygons);
        Self::new((lat * 100.0).round() / 100.0)
    }

    pub fn lat_ref(&self) -> f64 {
        self.lat_ref
    }

    pub fn scale(&self) -> f64 {
        self.lat_ref.to_radians().cos()
    }

    pub fn to_plane(&self, c: Coordinate) -> PlanarPoint {
        PlanarPoint::new(c.lon() * self.scale(), c.lat())
    }

    pub fn to_lonlat(&self, p: PlanarPoint) -> Result<Coordinate, GeometryError> {
        Coordinate::new(p.x / self.scale(), p.y)
    }
}

/// Closed ring of coordinates (first == last), at least 3 distinct vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRing {
    coords: Vec<Coordinate>,
}

impl LinearRing {
    /// Builds a ring, dropping consecutive duplicate vertices and closing it
    /// if the input is open.
    pub fn new(mut coords: Vec<Coordinate>) -> Result<Self, GeometryError> {
        coords.dedup();
        if coords.len() >= 2 && coords.first() == coords.last() {
            coords.pop();
        }
        if coords.len() < 3 {
            return Err(GeometryError::InvalidRing(format!(
                "need at least 3 distinct vertices, got {}",
                coords.len()
            )));
        }
        coords.push(coords[0]);
        let ring = Self { coords };
        if ring.signed_area() == 0.0 {
            return Err(GeometryError::InvalidRing("zero signed area".into()));
        }
        Ok(ring)
    }

    /// Closed coordinate list (first == last).
    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    /// Vertices without the closing duplicate.
    pub fn open_coords(&self) -> &[Coordinate] {
        &self.coords[..self.coords.len() - 1]
    }

    /// Shoelace area in raw lon/lat space; positive for counter-clockwise.
    pub fn signed_area(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.coords.windows(2) {
            acc += w[0].lon() * w[1].lat() - w[1].lon() * w[0].lat();
        }
        acc / 2.0
    }

    fn reverse(&mut self) {
        self.coords.reverse();
    }

    fn edges(&self) -> impl Iterator<Item = (Coordinate, Coordinate)> + '_ {
        self.coords.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Polygon with an exterior ring and optional holes.
///
/// Orientation is normalized on construction: exterior counter-clockwise,
/// holes clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: LinearRing,
    holes: Vec<LinearRing>,
}

impl Polygon {
    pub fn new(mut exterior: LinearRing, mut holes: Vec<LinearRing>) -> Self {
        if exterior.signed_area() < 0.0 {
            exterior.reverse();
        }
        for hole in &mut holes {
            if hole.signed_area() > 0.0 {
                hole.reverse();
            }
        }
        Self { exterior, holes }
    }

    pub fn exterior(&self) -> &LinearRing {
        &self.exterior
    }

    pub fn holes(&self) -> &[LinearRing] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &LinearRing> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn bbox(&self) -> BBox {
        BBox::of_coords(self.exterior.coords()).expect("ring is nonempty")
    }

    /// Axis-aligned rectangle polygon.
    pub fn rectangle(min: Coordinate, max: Coordinate) -> Result<Self, GeometryError> {
        let ring = LinearRing::new(vec![
            min,
            Coordinate::new(max.lon(), min.lat())?,
            max,
            Coordinate::new(min.lon(), max.lat())?,
        ])?;
        Ok(Self::new(ring, Vec::new()))
    }
}

/// Nonempty collection of polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPolygon {
    polygons: Vec<Polygon>,
}

impl MultiPolygon {
    pub fn new(polygons: Vec<Polygon>) -> Result<Self, GeometryError> {
        if polygons.is_empty() {
            return Err(GeometryError::EmptyMultiPolygon);
        }
        Ok(Self { polygons })
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }
}

/// Any feature geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Coordinate),
    LineString(Vec<Coordinate>),
    Polygon(Polygon),
    MultiPolygon(MultiPolygon),
}

impl Geometry {
    pub fn bbox(&self) -> BBox {
        match self {
            Geometry::Point(c) => BBox::of_coords(std::slice::from_ref(c)).expect("one coord"),
            Geometry::LineString(cs) => BBox::of_coords(cs).expect("linestring is nonempty"),
            Geometry::Polygon(p) => p.bbox(),
            Geometry::MultiPolygon(mp) => {
                let mut b = mp.polygons()[0].bbox();
                for p in &mp.polygons()[1..] {
                    b = b.union(&p.bbox());
                }
                b
            }
        }
    }
}

/// Axis-aligned bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GeometryError> {
        if min_lon > max_lon || min_lat > max_lat {
            return Err(GeometryError::InvalidBBox);
        }
        Ok(Self { min_lon, min_lat, max_lon, max_lat })
    }

    pub fn of_coords(coords: &[Coordinate]) -> Option<Self> {
        let first = coords.first()?;
        let mut b = Self {
            min_lon: first.lon(),
            min_lat: first.lat(),
            max_lon: first.lon(),
            max_lat: first.lat(),
        };
        for c in &coords[1..] {
            b.min_lon = b.min_lon.min(c.lon());
            b.min_lat = b.min_lat.min(c.lat());
            b.max_lon = b.max_lon.max(c.lon());
            b.max_lat = b.max_lat.max(c.lat());
        }
        Some(b)
    }

    pub fn of_polygons(polygons: &[Polygon]) -> Option<Self> {
        let mut it = polygons.iter().map(|p| p.bbox());
        let first = it.next()?;
        Some(it.fold(first, |acc, b| acc.union(&b)))
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_lon: self.min_lon.min(other.min_lon),
            min_lat: self.min_lat.min(other.min_lat),
            max_lon: self.max_lon.max(other.max_lon),
            max_lat: self.max_lat.max(other.max_lat),
        }
    }

    pub fn overlaps(&self, other: &BBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }
}

/// Sign of the cross product (b - a) x (c - a), with degenerate cases
/// flattened to 0 by [`ORIENT_EPS`].
fn orient(a: Coordinate, b: Coordinate, c: Coordinate) -> i32 {
    let cross = (b.lon() - a.lon()) * (c.lat() - a.lat()) - (c.lon() - a.lon()) * (b.lat() - a.lat());
    if cross.abs() <= ORIENT_EPS {
        0
    } else if cross > 0.0 {
        1
    } else {
        -1
    }
}

/// Collinear `p` lies within the closed bounding box of segment a-b.
fn collinear_on_segment(p: Coordinate, a: Coordinate, b: Coordinate) -> bool {
    p.lon() >= a.lon().min(b.lon()) - ORIENT_EPS
        && p.lon() <= a.lon().max(b.lon()) + ORIENT_EPS
        && p.lat() >= a.lat().min(b.lat()) - ORIENT_EPS
        && p.lat() <= a.lat().max(b.lat()) + ORIENT_EPS
}

/// True iff the closed segments a1-a2 and b1-b2 share at least one point.
pub fn segments_intersect(a1: Coordinate, a2: Coordinate, b1: Coordinate, b2: Coordinate) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && collinear_on_segment(a1, b1, b2))
        || (d2 == 0 && collinear_on_segment(a2, b1, b2))
        || (d3 == 0 && collinear_on_segment(b1, a1, a2))
        || (d4 == 0 && collinear_on_segment(b2, a1, a2))
}

fn point_on_ring(p: Coordinate, ring: &LinearRing) -> bool {
    ring.edges().any(|(a, b)| orient(a, b, p) == 0 && collinear_on_segment(p, a, b))
}

/// Even-odd ray cast; boundary points are resolved separately by callers.
fn point_in_ring_raycast(p: Coordinate, ring: &LinearRing) -> bool {
    let mut inside = false;
    for (a, b) in ring.edges() {
        if (a.lat() > p.lat()) != (b.lat() > p.lat()) {
            let t = (p.lat() - a.lat()) / (b.lat() - a.lat());
            let lon_cross = a.lon() + t * (b.lon() - a.lon());
            if p.lon() < lon_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Closed-set point-in-polygon: boundary counts as inside, hole interiors are
/// excluded but hole boundaries count as inside.
pub fn point_in_polygon(p: Coordinate, poly: &Polygon) -> bool {
    if point_on_ring(p, poly.exterior()) {
        return true;
    }
    if !point_in_ring_raycast(p, poly.exterior()) {
        return false;
    }
    for hole in poly.holes() {
        if point_on_ring(p, hole) {
            return true;
        }
        if point_in_ring_raycast(p, hole) {
            return false;
        }
    }
    true
}

/// Strict interior membership: inside and not on any ring boundary.
pub fn point_strictly_in_polygon(p: Coordinate, poly: &Polygon) -> bool {
    if poly.rings().any(|r| point_on_ring(p, r)) {
        return false;
    }
    point_in_polygon(p, poly)
}

/// Closed-set polygon intersection test: any edge pair intersects, or a
/// vertex of one polygon lies inside the other (covers containment).
pub fn polygons_intersect(a: &Polygon, b: &Polygon) -> bool {
    if !a.bbox().overlaps(&b.bbox()) {
        return false;
    }
    for ra in a.rings() {
        for (a1, a2) in ra.edges() {
            for rb in b.rings() {
                for (b1, b2) in rb.edges() {
                    if segments_intersect(a1, a2, b1, b2) {
                        return true;
                    }
                }
            }
        }
    }
    a.rings().flat_map(|r| r.open_coords()).any(|v| point_in_polygon(*v, b))
        || b.rings().flat_map(|r| r.open_coords()).any(|v| point_in_polygon(*v, a))
}

/// Sutherland-Hodgman clip of a planar ring to the half-plane
/// `{ x : (x - line_point) . normal <= 0 }`.
///
/// The ring is an open vertex list; an empty result means fully clipped away.
pub fn clip_polygon_halfplane(
    ring: &[PlanarPoint],
    line_point: PlanarPoint,
    normal: PlanarPoint,
) -> Vec<PlanarPoint> {
    let mut out: Vec<PlanarPoint> = Vec::with_capacity(ring.len() + 2);
    for i in 0..ring.len() {
        let cur = ring[i];
        let next = ring[(i + 1) % ring.len()];
        let d_cur = cur.sub(line_point).dot(normal);
        let d_next = next.sub(line_point).dot(normal);
        let cur_in = d_cur <= 0.0;
        let next_in = d_next <= 0.0;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            let t = d_cur / (d_cur - d_next);
            out.push(PlanarPoint::new(
                cur.x + t * (next.x - cur.x),
                cur.y + t * (next.y - cur.y),
            ));
        }
    }
    out.dedup();
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 || planar_ring_area(&out).abs() == 0.0 {
        return Vec::new();
    }
    out
}

/// Signed shoelace area of an open planar ring.
pub fn planar_ring_area(ring: &[PlanarPoint]) -> f64 {
    let mut acc = 0.0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

/// Unsigned polygon area (exterior minus holes) in frame coordinates.
pub fn planar_area(poly: &Polygon, frame: &LocalPlane) -> f64 {
    let ring_area = |ring: &LinearRing| -> f64 {
        let pts: Vec<PlanarPoint> = ring.open_coords().iter().map(|c| frame.to_plane(*c)).collect();
        planar_ring_area(&pts).abs()
    };
    let holes: f64 = poly.holes().iter().map(ring_area).sum();
    (ring_area(poly.exterior()) - holes).max(0.0)
}

/// Web Mercator unit-square projection.
///
/// Latitudes beyond [`MAX_MERCATOR_LAT`] are clamped, never rejected.
pub fn mercator_normalize(p: Coordinate) -> (f64, f64) {
    let lat = p.lat().clamp(-MAX_MERCATOR_LAT, MAX_MERCATOR_LAT);
    let x = (p.lon() + 180.0) / 360.0;
    let y = (1.0 - lat.to_radians().tan().asinh() / std::f64::consts::PI) / 2.0;
    (x.clamp(0.0, 1.0), y.clamp(0.0, 1.0))
}

/// Great-circle distance in meters on the mean-radius sphere.
pub fn haversine_distance(a: Coordinate, b: Coordinate) -> f64 {
    let (lat1, lat2) = (a.lat().to_radians(), b.lat().to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon() - a.lon()).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Order-preserving expansion of multipolygons into their member polygons.
/// Non-areal geometries are dropped.
pub fn flatten(geoms: &[Geometry]) -> Vec<Polygon> {
    let mut out = Vec::new();
    for g in geoms {
        match g {
            Geometry::Polygon(p) => out.push(p.clone()),
            Geometry::MultiPolygon(mp) => out.extend(mp.polygons().iter().cloned()),
            Geometry::Point(_) | Geometry::LineString(_) => {}
        }
    }
    out
}

/// Area-weighted centroid latitude of a polygon set, in raw lon/lat space.
/// Falls back to the bbox center for degenerate inputs.
pub fn centroid_lat(polygons: &[Polygon]) -> f64 {
    let mut area_sum = 0.0;
    let mut moment_sum = 0.0;
    for poly in polygons {
        for ring in poly.rings() {
            let mut a = 0.0;
            let mut m = 0.0;
            for w in ring.coords().windows(2) {
                let cross = w[0].lon() * w[1].lat() - w[1].lon() * w[0].lat();
                a += cross;
                m += (w[0].lat() + w[1].lat()) * cross;
            }
            // Exterior rings are CCW (positive), holes CW (negative), so holes
            // subtract themselves from both sums.
            area_sum += a / 2.0;
            moment_sum += m / 6.0;
        }
    }
    if area_sum.abs() < 1e-30 {
        return BBox::of_polygons(polygons)
            .map(|b| (b.min_lat + b.max_lat) / 2.0)
            .unwrap_or(0.0);
    }
    moment_sum / area_sum
}
