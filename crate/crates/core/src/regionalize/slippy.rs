//! Slippy map (z/x/y Web Mercator) tile regionalizer matching the standard
//! OSM tile addressing scheme.

use crate::geometry::{mercator_normalize, polygons_intersect, BBox, Coordinate, Polygon};

use super::{Method, Region, RegionSet, RegionalizeError};

pub const MAX_ZOOM: u32 = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileId {
    pub z: u32,
    pub x: u32,
    pub y: u32,
}

impl TileId {
    pub fn render(&self) -> String {
        format!("tile_{}_{}_{}", self.z, self.x, self.y)
    }

    pub fn parse(id: &str) -> Option<Self> {
        let mut parts = id.split('_');
        if parts.next()? != "tile" {
            return None;
        }
        let z: u32 = parts.next()?.parse().ok()?;
        let x: u32 = parts.next()?.parse().ok()?;
        let y: u32 = parts.next()?.parse().ok()?;
        if parts.next().is_some() || z > MAX_ZOOM {
            return None;
        }
        let n = 1u32 << z;
        if x >= n || y >= n {
            return None;
        }
        Some(Self { z, x, y })
    }
}

fn check_zoom(z: u32) -> Result<(), RegionalizeError> {
    if z > MAX_ZOOM {
        return Err(RegionalizeError::InvalidZoom(z));
    }
    Ok(())
}

/// Tile containing a coordinate: floor(2^z * mercator), clamped to the grid.
pub fn tile_of(p: Coordinate, z: u32) -> Result<TileId, RegionalizeError> {
    check_zoom(z)?;
    let n = 1u64 << z;
    let (mx, my) = mercator_normalize(p);
    let x = ((n as f64 * mx).floor() as u64).min(n - 1) as u32;
    let y = ((n as f64 * my).floor() as u64).min(n - 1) as u32;
    Ok(TileId { z, x, y })
}

/// Inverse Web Mercator of a tile corner.
fn tile_corner_lonlat(z: u32, x: u32, y: u32) -> (f64, f64) {
    let n = (1u64 << z) as f64;
    let lon = x as f64 / n * 360.0 - 180.0;
    let lat = (std::f64::consts::PI * (1.0 - 2.0 * y as f64 / n)).sinh().atan().to_degrees();
    (lon, lat)
}

/// Lon/lat bounds rectangle of a tile.
pub fn tile_bounds(t: &TileId) -> BBox {
    let (west, north) = tile_corner_lonlat(t.z, t.x, t.y);
    let (east, south) = tile_corner_lonlat(t.z, t.x + 1, t.y + 1);
    BBox { min_lon: west, min_lat: south, max_lon: east, max_lat: north }
}

fn tile_polygon(t: &TileId) -> Result<Polygon, RegionalizeError> {
    let b = tile_bounds(t);
    Ok(Polygon::rectangle(
        Coordinate::new(b.min_lon, b.min_lat)?,
        Coordinate::new(b.max_lon, b.max_lat)?,
    )?)
}

/// All tiles whose bounds rectangle intersects the area.
pub fn regionalize_slippy(area: &[Polygon], z: u32) -> Result<RegionSet, RegionalizeError> {
    check_zoom(z)?;
    if area.is_empty() {
        return Err(RegionalizeError::EmptyArea);
    }
    let bbox = BBox::of_polygons(area).expect("area is nonempty");
    let nw = tile_of(Coordinate::new(bbox.min_lon, bbox.max_lat)?, z)?;
    let se = tile_of(Coordinate::new(bbox.max_lon, bbox.min_lat)?, z)?;

    let mut regions = Vec::new();
    for x in nw.x..=se.x {
        for y in nw.y..=se.y {
            let tile = TileId { z, x, y };
            let polygon = tile_polygon(&tile)?;
            if area.iter().any(|a| polygons_intersect(&polygon, a)) {
                regions.push(Region { region_id: tile.render(), polygon });
            }
        }
    }
    Ok(RegionSet::new(regions, Method::Slippy, format!("zoom={z}"), None))
}
