//! Voronoi (Thiessen) regionalizer: the area bounding box is divided among
//! seed geometries by successive perpendicular-bisector half-plane clips in
//! the local plane frame. O(seeds^2) and robust with only the clipping
//! primitive; the joiner restricts results to the area itself.

use crate::geometry::{
    clip_polygon_halfplane, BBox, Coordinate, Geometry, LinearRing, LocalPlane, PlanarPoint, Polygon,
};
use crate::io::FeatureCollection;

use super::{Method, Region, RegionSet, RegionalizeError};

/// Representative frame point of a seed feature: points map directly,
/// anything else reduces to its bbox center.
fn seed_point(geometry: &Geometry, frame: &LocalPlane) -> PlanarPoint {
    match geometry {
        Geometry::Point(c) => frame.to_plane(*c),
        other => {
            let b = other.bbox();
            let center = Coordinate::new((b.min_lon + b.max_lon) / 2.0, (b.min_lat + b.max_lat) / 2.0)
                .expect("bbox center of valid geometry is valid");
            frame.to_plane(center)
        }
    }
}

/// Voronoi cells of the seed features, clipped to the area bounding box.
/// Cells that end up empty are dropped.
pub fn regionalize_voronoi(
    area: &[Polygon],
    seeds: &FeatureCollection,
) -> Result<RegionSet, RegionalizeError> {
    if area.is_empty() {
        return Err(RegionalizeError::EmptyArea);
    }
    if seeds.is_empty() {
        return Err(RegionalizeError::NoSeeds);
    }
    let frame = LocalPlane::for_area(area)?;
    let points: Vec<(String, PlanarPoint)> = seeds
        .iter()
        .map(|f| (f.feature_id.clone(), seed_point(&f.geometry, &frame)))
        .collect();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i].1 == points[j].1 {
                return Err(RegionalizeError::DuplicateSeeds(
                    points[i].0.clone(),
                    points[j].0.clone(),
                ));
            }
        }
    }

    let bbox = BBox::of_polygons(area).expect("area is nonempty");
    let sw = frame.to_plane(Coordinate::new(bbox.min_lon, bbox.min_lat)?);
    let ne = frame.to_plane(Coordinate::new(bbox.max_lon, bbox.max_lat)?);
    let bbox_ring = vec![
        PlanarPoint::new(sw.x, sw.y),
        PlanarPoint::new(ne.x, sw.y),
        PlanarPoint::new(ne.x, ne.y),
        PlanarPoint::new(sw.x, ne.y),
    ];

    let mut regions = Vec::new();
    for (i, (feature_id, site)) in points.iter().enumerate() {
        let mut cell = bbox_ring.clone();
        for (j, (_, other)) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            // Keep the side of the bisector closer to `site`:
            // (x - mid) . (other - site) <= 0.
            let mid = PlanarPoint::new((site.x + other.x) / 2.0, (site.y + other.y) / 2.0);
            let normal = other.sub(*site);
            cell = clip_polygon_halfplane(&cell, mid, normal);
            if cell.is_empty() {
                break;
            }
        }
        if cell.is_empty() {
            continue;
        }
        let coords: Vec<Coordinate> =
            cell.iter().map(|p| frame.to_lonlat(*p)).collect::<Result<_, _>>()?;
        let Ok(ring) = LinearRing::new(coords) else {
            continue; // degenerate sliver after clipping
        };
        regions.push(Region {
            region_id: format!("voronoi_{feature_id}"),
            polygon: Polygon::new(ring, Vec::new()),
        });
    }
    Ok(RegionSet::new(
        regions,
        Method::Voronoi,
        format!("seed_count={}", points.len()),
        Some(frame),
    ))
}
