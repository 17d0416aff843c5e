//! Selection shapes in the (lon, lat) plane. Longitude wraparound is not
//! handled; a rectangle crossing the antimeridian is rejected.

use super::EditError;

/// Axis-aligned selection, boundaries inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Rect {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self, EditError> {
        let all = [lat_min, lat_max, lon_min, lon_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(EditError::InvalidRect("non-finite bound".into()));
        }
        if lat_min > lat_max {
            return Err(EditError::InvalidRect(format!(
                "lat_min {lat_min} exceeds lat_max {lat_max}"
            )));
        }
        if lat_min < -90.0 || lat_max > 90.0 {
            return Err(EditError::InvalidRect("latitude outside [-90, 90]".into()));
        }
        if lon_min < -180.0 || lon_max > 180.0 {
            return Err(EditError::InvalidRect("longitude outside [-180, 180]".into()));
        }
        if lon_min > lon_max {
            return Err(EditError::Wraparound);
        }
        Ok(Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        self.lat_min <= lat && lat <= self.lat_max && self.lon_min <= lon && lon <= self.lon_max
    }

    /// `self` lies inside `other`.
    pub fn within(&self, other: &Rect) -> bool {
        other.lat_min <= self.lat_min
            && self.lat_max <= other.lat_max
            && other.lon_min <= self.lon_min
            && self.lon_max <= other.lon_max
    }

    /// Corners as `(lat, lon)`, counter-clockwise from the south-west.
    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.lat_min, self.lon_min),
            (self.lat_min, self.lon_max),
            (self.lat_max, self.lon_max),
            (self.lat_max, self.lon_min),
        ]
    }
}

/// Simple polygon over `(lat, lon)` vertices, implicitly closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

/// Relative area below which a polygon counts as collinear.
const DEGENERATE_AREA: f64 = 1e-9;

type Pt = (f64, f64);

/// Twice the signed area of triangle `a b c`, points as `(x, y)`.
fn orient(a: Pt, b: Pt, c: Pt) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// `p` on the closed segment `a b`, given that the three are collinear.
fn within_box(a: Pt, b: Pt, p: Pt) -> bool {
    a.0.min(b.0) <= p.0 && p.0 <= a.0.max(b.0) && a.1.min(b.1) <= p.1 && p.1 <= a.1.max(b.1)
}

fn on_segment(a: Pt, b: Pt, p: Pt) -> bool {
    orient(a, b, p) == 0.0 && within_box(a, b, p)
}

/// Closed segments `p1 p2` and `q1 q2` share at least one point.
fn segments_touch(p1: Pt, p2: Pt, q1: Pt, q2: Pt) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && within_box(q1, q2, p1))
        || (d2 == 0.0 && within_box(q1, q2, p2))
        || (d3 == 0.0 && within_box(p1, p2, q1))
        || (d4 == 0.0 && within_box(p1, p2, q2))
}

impl Polygon {
    /// Validates a polygon from `(lat, lon)` vertices.
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self, EditError> {
        let invalid = |m: &str| Err(EditError::InvalidPolygon(m.into()));
        if vertices.len() < 3 {
            return invalid("need at least 3 vertices");
        }
        if vertices
            .iter()
            .any(|&(lat, lon)| !lat.is_finite() || !lon.is_finite() || lat.abs() > 90.0 || lon.abs() > 180.0)
        {
            return invalid("vertex outside the valid coordinate range");
        }
        let poly = Self { vertices };
        let pts: Vec<Pt> = poly.points().collect();
        let n = pts.len();
        let edge = |i: usize| (pts[i], pts[(i + 1) % n]);

        if (0..n).any(|i| pts[i] == pts[(i + 1) % n]) {
            return invalid("repeated consecutive vertex");
        }
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for p in &pts {
            lo = (lo.0.min(p.0), lo.1.min(p.1));
            hi = (hi.0.max(p.0), hi.1.max(p.1));
        }
        let diag2 = (hi.0 - lo.0).powi(2) + (hi.1 - lo.1).powi(2);
        if poly.signed_area2().abs() <= DEGENERATE_AREA * diag2 {
            return invalid("polygon is degenerate (collinear vertices)");
        }
        for i in 0..n {
            let (a, b) = edge(i);
            // Adjacent edges share vertex b; they must not fold back onto each other.
            let (_, c) = edge((i + 1) % n);
            if orient(a, b, c) == 0.0 && (c.0 - b.0) * (a.0 - b.0) + (c.1 - b.1) * (a.1 - b.1) > 0.0 {
                return invalid("edges overlap");
            }
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (p, q) = edge(j);
                if segments_touch(a, b, p, q) {
                    return invalid("polygon is self-intersecting");
                }
            }
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Vertices as `(x, y) = (lon, lat)`.
    fn points(&self) -> impl Iterator<Item = Pt> + '_ {
        self.vertices.iter().map(|&(lat, lon)| (lon, lat))
    }

    fn signed_area2(&self) -> f64 {
        let pts: Vec<Pt> = self.points().collect();
        let n = pts.len();
        (0..n)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % n]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum()
    }

    /// Even-odd ray casting toward +lon; points on an edge count as inside.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let p = (lon, lat);
        let pts: Vec<Pt> = self.points().collect();
        let n = pts.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            if on_segment(a, b, p) {
                return true;
            }
            if (a.1 > p.1) != (b.1 > p.1) {
                let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
                if p.0 < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect(Rect),
    Polygon(Polygon),
}

impl Shape {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        match self {
            Shape::Rect(r) => r.contains(lat, lon),
            Shape::Polygon(p) => p.contains(lat, lon),
        }
    }

    /// Vertex list as stored in the edit log.
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        match self {
            Shape::Rect(r) => r.corners().to_vec(),
            Shape::Polygon(p) => p.vertices().to_vec(),
        }
    }
}
