//! Great-circle distance and point/polygon relations on WGS84 coordinates.

use crate::model::{Geometry, LatLon};

/// Mean Earth radius (IUGG), metres.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Target spacing of sample points along a polygon edge.
pub const EDGE_SAMPLE_STEP_M: f64 = 25.0;

/// Upper bound on samples per edge.
pub const MAX_EDGE_SAMPLES: usize = 4096;

pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Crossing-number test in the lon/lat plane. `ring` is closed (first == last).
pub fn point_in_ring(p: LatLon, ring: &[LatLon]) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to the segment `a..b`, by sampling the segment at
/// roughly [`EDGE_SAMPLE_STEP_M`] spacing (linear in lat/lon) and taking the
/// nearest sample.
pub fn distance_to_segment_m(p: LatLon, a: LatLon, b: LatLon) -> f64 {
    let len = haversine_m(a, b);
    let n = ((len / EDGE_SAMPLE_STEP_M).ceil() as usize).clamp(1, MAX_EDGE_SAMPLES);
    (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            let s = LatLon::new(a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon));
            haversine_m(p, s)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn distance_to_ring_boundary_m(p: LatLon, ring: &[LatLon]) -> f64 {
    ring.windows(2).map(|w| distance_to_segment_m(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

/// Zero inside (or on) the polygon, otherwise distance to its boundary.
pub fn point_polygon_distance_m(p: LatLon, ring: &[LatLon]) -> f64 {
    if point_in_ring(p, ring) {
        0.0
    } else {
        distance_to_ring_boundary_m(p, ring)
    }
}

/// Minimum distance between two geometries; zero when they overlap.
///
/// Polygon pairs are zero if any vertex lies inside the other ring or any
/// two edges cross; otherwise the minimum vertex-to-boundary distance in
/// either direction.
pub fn geometry_distance_m(a: &Geometry, b: &Geometry) -> f64 {
    match (a, b) {
        (Geometry::Point(p), Geometry::Point(q)) => haversine_m(*p, *q),
        (Geometry::Point(p), Geometry::Polygon(r)) | (Geometry::Polygon(r), Geometry::Point(p)) => {
            point_polygon_distance_m(*p, r)
        }
        (Geometry::Polygon(r1), Geometry::Polygon(r2)) => {
            if r1.iter().any(|p| point_in_ring(*p, r2))
                || r2.iter().any(|p| point_in_ring(*p, r1))
                || rings_cross(r1, r2)
            {
                return 0.0;
            }
            let d1 = r1.iter().map(|p| distance_to_ring_boundary_m(*p, r2));
            let d2 = r2.iter().map(|p| distance_to_ring_boundary_m(*p, r1));
            d1.chain(d2).fold(f64::INFINITY, f64::min)
        }
    }
}

/// Smallest pairwise distance between two geometry sets, `None` if either is empty.
pub fn min_distance_m<'a, 'b>(a: impl IntoIterator<Item = &'a Geometry>, b: &'b [Geometry]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for ga in a {
        for gb in b {
            let d = geometry_distance_m(ga, gb);
            best = Some(best.map_or(d, |x| x.min(d)));
        }
    }
    best
}

fn rings_cross(r1: &[LatLon], r2: &[LatLon]) -> bool {
    r1.windows(2).any(|e1| r2.windows(2).any(|e2| segments_intersect(e1[0], e1[1], e2[0], e2[1])))
}

fn segments_intersect(p1: LatLon, p2: LatLon, q1: LatLon, q2: LatLon) -> bool {
    fn orient(a: LatLon, b: LatLon, c: LatLon) -> f64 {
        (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0) != (d2 > 0.0)) && ((d3 > 0.0) != (d4 > 0.0)) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}
