//! Self-contained pointy-top hexagonal grid over a local plane, addressed by
//! axial (q, r) coordinates with cube rounding.
//!
//! Cell size is s(res) = 10 * 2^-res frame degrees (center to vertex), so
//! resolution 8 gives cells roughly 4 km across at mid latitudes.

use crate::geometry::{polygons_intersect, BBox, Coordinate, LinearRing, LocalPlane, PlanarPoint, Polygon};

use super::{Method, Region, RegionSet, RegionalizeError};

pub const MAX_RESOLUTION: u32 = 15;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Axial hex cell address at a given resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HexCellId {
    pub res: u32,
    pub q: i64,
    pub r: i64,
}

impl HexCellId {
    pub fn render(&self) -> String {
        format!("hex_{}_{}_{}", self.res, self.q, self.r)
    }

    pub fn parse(id: &str) -> Option<Self> {
        let mut parts = id.split('_');
        if parts.next()? != "hex" {
            return None;
        }
        let res = parts.next()?.parse().ok()?;
        let q = parts.next()?.parse().ok()?;
        let r = parts.next()?.parse().ok()?;
        if parts.next().is_some() || res > MAX_RESOLUTION {
            return None;
        }
        Some(Self { res, q, r })
    }

    /// The six axial direction offsets.
    pub fn neighbours(&self) -> [HexCellId; 6] {
        const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
        DIRS.map(|(dq, dr)| HexCellId { res: self.res, q: self.q + dq, r: self.r + dr })
    }
}

/// Center-to-vertex cell size in frame degrees.
pub fn hex_cell_size(res: u32) -> f64 {
    10.0 * 2.0_f64.powi(-(res as i32))
}

fn check_resolution(res: u32) -> Result<(), RegionalizeError> {
    if res > MAX_RESOLUTION {
        return Err(RegionalizeError::InvalidResolution(res));
    }
    Ok(())
}

/// Fractional axial coordinates of a frame point.
fn fractional_axial(p: PlanarPoint, size: f64) -> (f64, f64) {
    let q = (SQRT3 / 3.0 * p.x - p.y / 3.0) / size;
    let r = (2.0 / 3.0 * p.y) / size;
    (q, r)
}

/// Cube rounding: round q, r, s and fix the coordinate with the largest
/// rounding error so q + r + s == 0 again.
fn cube_round(qf: f64, rf: f64) -> (i64, i64) {
    let sf = -qf - rf;
    let mut q = qf.round();
    let mut r = rf.round();
    let s = sf.round();
    let dq = (q - qf).abs();
    let dr = (r - rf).abs();
    let ds = (s - sf).abs();
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    (q as i64, r as i64)
}

/// Hex cell containing a coordinate.
pub fn hex_cell_of(p: Coordinate, res: u32, frame: &LocalPlane) -> Result<HexCellId, RegionalizeError> {
    check_resolution(res)?;
    let (qf, rf) = fractional_axial(frame.to_plane(p), hex_cell_size(res));
    let (q, r) = cube_round(qf, rf);
    Ok(HexCellId { res, q, r })
}

/// Frame-space center of a cell.
pub fn hex_cell_center(c: &HexCellId) -> PlanarPoint {
    let s = hex_cell_size(c.res);
    PlanarPoint::new(s * SQRT3 * (c.q as f64 + c.r as f64 / 2.0), s * 1.5 * c.r as f64)
}

/// Pointy-top hexagon polygon of a cell, mapped back to lon/lat.
pub fn hex_cell_polygon(c: &HexCellId, frame: &LocalPlane) -> Result<Polygon, RegionalizeError> {
    let s = hex_cell_size(c.res);
    let center = hex_cell_center(c);
    let mut coords = Vec::with_capacity(6);
    for k in 0..6 {
        let angle = (30.0 + 60.0 * k as f64).to_radians();
        let vertex = PlanarPoint::new(center.x + s * angle.cos(), center.y + s * angle.sin());
        coords.push(frame.to_lonlat(vertex)?);
    }
    Ok(Polygon::new(LinearRing::new(coords)?, Vec::new()))
}

/// All hex cells whose polygon intersects the area.
pub fn regionalize_hex(area: &[Polygon], res: u32) -> Result<RegionSet, RegionalizeError> {
    check_resolution(res)?;
    if area.is_empty() {
        return Err(RegionalizeError::EmptyArea);
    }
    let frame = LocalPlane::for_area(area)?;
    let bbox = BBox::of_polygons(area).expect("area is nonempty");
    let size = hex_cell_size(res);

    // q and r are linear in frame x/y, so their extremes over the bbox are at
    // its corners; pad by 2 cells to cover hexagons poking in from outside.
    let corners = [
        (bbox.min_lon, bbox.min_lat),
        (bbox.min_lon, bbox.max_lat),
        (bbox.max_lon, bbox.min_lat),
        (bbox.max_lon, bbox.max_lat),
    ];
    let mut q_lo = f64::INFINITY;
    let mut q_hi = f64::NEG_INFINITY;
    let mut r_lo = f64::INFINITY;
    let mut r_hi = f64::NEG_INFINITY;
    for (lon, lat) in corners {
        let c = Coordinate::new(lon, lat)?;
        let (qf, rf) = fractional_axial(frame.to_plane(c), size);
        q_lo = q_lo.min(qf);
        q_hi = q_hi.max(qf);
        r_lo = r_lo.min(rf);
        r_hi = r_hi.max(rf);
    }

    let mut regions = Vec::new();
    for q in (q_lo.floor() as i64 - 2)..=(q_hi.ceil() as i64 + 2) {
        for r in (r_lo.floor() as i64 - 2)..=(r_hi.ceil() as i64 + 2) {
            let cell = HexCellId { res, q, r };
            let polygon = hex_cell_polygon(&cell, &frame)?;
            if area.iter().any(|a| polygons_intersect(&polygon, a)) {
                regions.push(Region { region_id: cell.render(), polygon });
            }
        }
    }
    Ok(RegionSet::new(regions, Method::Hex, format!("resolution={res}"), Some(frame)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame0() -> LocalPlane {
        LocalPlane::new(0.0).unwrap()
    }

    #[test]
    fn origin_maps_to_cell_zero() {
        let p = Coordinate::new(0.0, 0.0).unwrap();
        for res in [0, 5, 8, 15] {
            let cell = hex_cell_of(p, res, &frame0()).unwrap();
            assert_eq!((cell.q, cell.r), (0, 0));
        }
    }

    #[test]
    fn cell_centers_round_trip() {
        let frame = frame0();
        for (q, r) in [(3, -2), (0, 0), (-7, 11), (25, 4)] {
            let cell = HexCellId { res: 8, q, r };
            let center = hex_cell_center(&cell);
            let lonlat = frame.to_lonlat(center).unwrap();
            let back = hex_cell_of(lonlat, 8, &frame).unwrap();
            assert_eq!(back, cell);
        }
    }

    #[test]
    fn id_strings_round_trip() {
        for (res, q, r) in [(0, 0, 0), (8, 3, -2), (15, -100, 255)] {
            let cell = HexCellId { res, q, r };
            assert_eq!(HexCellId::parse(&cell.render()), Some(cell));
        }
        assert_eq!(HexCellId::parse("tile_1_0_0"), None);
        assert_eq!(HexCellId::parse("hex_99_0_0"), None);
    }

    #[test]
    fn invalid_resolution_is_rejected() {
        let p = Coordinate::new(0.0, 0.0).unwrap();
        assert!(matches!(
            hex_cell_of(p, 16, &frame0()),
            Err(RegionalizeError::InvalidResolution(16))
        ));
    }

    #[test]
    fn cell_polygon_shape() {
        let frame = frame0();
        let cell = HexCellId { res: 8, q: 0, r: 0 };
        let s = hex_cell_size(8);
        let poly = hex_cell_polygon(&cell, &frame).unwrap();
        // North vertex at lat == s.
        let north = poly
            .exterior()
            .open_coords()
            .iter()
            .map(|c| c.lat())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((north - s).abs() < 1e-12);
        // Regular hexagon area: (3 sqrt 3 / 2) s^2.
        let area = crate::geometry::planar_area(&poly, &frame);
        let expected = 1.5 * SQRT3 * s * s;
        assert!((area - expected).abs() / expected < 1e-9);
    }

    #[test]
    fn adjacent_cells_share_two_vertices() {
        let frame = frame0();
        let a = hex_cell_polygon(&HexCellId { res: 6, q: 0, r: 0 }, &frame).unwrap();
        let b = hex_cell_polygon(&HexCellId { res: 6, q: 1, r: 0 }, &frame).unwrap();
        let mut shared = 0;
        for va in a.exterior().open_coords() {
            for vb in b.exterior().open_coords() {
                if (va.lon() - vb.lon()).abs() < 1e-9 && (va.lat() - vb.lat()).abs() < 1e-9 {
                    shared += 1;
                }
            }
        }
        assert_eq!(shared, 2);
    }

    #[test]
    fn tiny_area_yields_single_cell() {
        let sq = Polygon::rectangle(
            Coordinate::new(0.001, 0.001).unwrap(),
            Coordinate::new(0.002, 0.002).unwrap(),
        )
        .unwrap();
        let set = regionalize_hex(&[sq], 5).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.regions()[0].region_id, "hex_5_0_0");
    }

    #[test]
    fn empty_area_is_an_error() {
        assert!(matches!(regionalize_hex(&[], 8), Err(RegionalizeError::EmptyArea)));
    }
}
