use serde_json::{json, Value};

/// A WGS84 coordinate in decimal degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Location geometry. Encoded as a GeoJSON geometry object
/// (`[lon, lat]` coordinate order, single outer ring for polygons).
#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    Point(LatLon),
    /// Closed ring: at least four vertices, first equal to last.
    Polygon(Vec<LatLon>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    Shape(String),
    OutOfRange { lat: f64, lon: f64 },
    RingTooShort(usize),
    RingNotClosed,
}

impl std::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryError::Shape(msg) => write!(f, "malformed geometry: {msg}"),
            GeometryError::OutOfRange { lat, lon } => {
                write!(f, "coordinate out of range: lat {lat}, lon {lon}")
            }
            GeometryError::RingTooShort(n) => {
                write!(f, "polygon ring has {n} vertices, at least 4 required")
            }
            GeometryError::RingNotClosed => f.write_str("polygon ring is not closed"),
        }
    }
}

impl std::error::Error for GeometryError {}

impl Geometry {
    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Geometry::Point(p) => check_point(p),
            Geometry::Polygon(ring) => {
                if ring.len() < 4 {
                    return Err(GeometryError::RingTooShort(ring.len()));
                }
                if ring.first() != ring.last() {
                    return Err(GeometryError::RingNotClosed);
                }
                ring.iter().try_for_each(check_point)
            }
        }
    }

    /// All vertices (for a polygon, the closing vertex is included).
    pub fn vertices(&self) -> &[LatLon] {
        match self {
            Geometry::Point(p) => std::slice::from_ref(p),
            Geometry::Polygon(ring) => ring,
        }
    }

    /// `(min_lat, min_lon, max_lat, max_lon)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let vs = self.vertices();
        vs.iter().fold((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b, c, d), p| {
            (a.min(p.lat), b.min(p.lon), c.max(p.lat), d.max(p.lon))
        })
    }

    pub fn to_json(&self) -> Value {
        match self {
            Geometry::Point(p) => json!({"type": "Point", "coordinates": [p.lon, p.lat]}),
            Geometry::Polygon(ring) => {
                let coords: Vec<Value> = ring.iter().map(|p| json!([p.lon, p.lat])).collect();
                json!({"type": "Polygon", "coordinates": [coords]})
            }
        }
    }

    /// Decodes a GeoJSON `Point` or single-ring `Polygon`. Range and ring checks
    /// are left to [`Geometry::validate`].
    pub fn from_json(value: &Value) -> Result<Geometry, GeometryError> {
        let obj = value.as_object().ok_or_else(|| GeometryError::Shape("expected an object".into()))?;
        let kind =
            obj.get("type").and_then(Value::as_str).ok_or_else(|| GeometryError::Shape("missing \"type\"".into()))?;
        let coords = obj.get("coordinates").ok_or_else(|| GeometryError::Shape("missing \"coordinates\"".into()))?;
        if obj.len() != 2 {
            return Err(GeometryError::Shape("unexpected geometry member".into()));
        }
        match kind {
            "Point" => Ok(Geometry::Point(position(coords)?)),
            "Polygon" => {
                let rings = coords
                    .as_array()
                    .ok_or_else(|| GeometryError::Shape("polygon coordinates must be an array".into()))?;
                if rings.len() != 1 {
                    return Err(GeometryError::Shape(format!("expected exactly one ring, found {}", rings.len())));
                }
                let ring = rings[0]
                    .as_array()
                    .ok_or_else(|| GeometryError::Shape("ring must be an array".into()))?
                    .iter()
                    .map(position)
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Geometry::Polygon(ring))
            }
            other => Err(GeometryError::Shape(format!("unsupported geometry type {other:?}"))),
        }
    }
}

fn check_point(p: &LatLon) -> Result<(), GeometryError> {
    if p.is_valid() {
        Ok(())
    } else {
        Err(GeometryError::OutOfRange { lat: p.lat, lon: p.lon })
    }
}

fn position(v: &Value) -> Result<LatLon, GeometryError> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| GeometryError::Shape("position must be [lon, lat]".into()))?;
    let lon = arr[0].as_f64().ok_or_else(|| GeometryError::Shape("longitude must be a number".into()))?;
    let lat = arr[1].as_f64().ok_or_else(|| GeometryError::Shape("latitude must be a number".into()))?;
    Ok(LatLon { lat, lon })
}
