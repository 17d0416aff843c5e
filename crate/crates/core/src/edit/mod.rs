//! Rectangle-plus-threshold and polygon editing over scored soundings.
//!
//! Removal is a soft flag kept in an [`EditLog`]; the corpus is never
//! modified. Thresholds apply to [`ScoredSounding::bad_confidence`].

mod engine;
mod geometry;
mod log;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::corpus::SoundingKey;
use crate::par;
use crate::scores::ScoredSounding;

pub use engine::{ApplyRequest, Applied, EditEngine, LogEntry, Preview, Snapshot};
pub use geometry::{Polygon, Rect, Shape};
pub use log::{ActionKind, ApplyOutcome, EditAction, EditLog};

#[derive(Debug, Error)]
pub enum EditError {
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error("rectangle crosses the antimeridian; longitude wraparound is not supported")]
    Wraparound,
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("rectangles need a threshold in [-1, 1] and polygons take none")]
    InvalidThreshold,
    #[error("unknown action {0}")]
    UnknownAction(u64),
    #[error("action {0} is already undone")]
    AlreadyUndone(u64),
    #[error("action {0} already exists with different content")]
    IdConflict(u64),
    #[error("action id {id} is not above the last id {last}")]
    NonMonotonicId { id: u64, last: u64 },
    #[error("stale preview, re-preview required: {0}")]
    Stale(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("edit log line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Soundings inside `rect` whose BAD confidence is at least `threshold`.
pub fn preview_rect(points: &[ScoredSounding], rect: &Rect, threshold: f64) -> BTreeSet<SoundingKey> {
    par::filter_map(points, |p| {
        (rect.contains(p.lat, p.lon) && p.bad_confidence() >= threshold).then(|| p.key.clone())
    })
    .into_iter()
    .collect()
}

/// Soundings inside `poly`, boundary included.
pub fn preview_polygon(points: &[ScoredSounding], poly: &Polygon) -> BTreeSet<SoundingKey> {
    par::filter_map(points, |p| poly.contains(p.lat, p.lon).then(|| p.key.clone()))
        .into_iter()
        .collect()
}

/// Dispatches on the shape. Rectangles need a non-NaN threshold (values
/// outside `[-1, 1]` are allowed and select everything or nothing);
/// polygons must not carry one.
pub fn preview_shape(
    points: &[ScoredSounding],
    shape: &Shape,
    threshold: Option<f64>,
) -> Result<BTreeSet<SoundingKey>, EditError> {
    match (shape, threshold) {
        (Shape::Rect(r), Some(t)) if !t.is_nan() => Ok(preview_rect(points, r, t)),
        (Shape::Polygon(p), None) => Ok(preview_polygon(points, p)),
        _ => Err(EditError::InvalidThreshold),
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::{point, random_points};
    use super::*;
    use proptest::prelude::*;

    fn oracle(points: &[ScoredSounding], r: &Rect, t: f64) -> BTreeSet<SoundingKey> {
        let mut out = BTreeSet::new();
        for p in points {
            let inside = r.lat_min <= p.lat && p.lat <= r.lat_max && r.lon_min <= p.lon && p.lon <= r.lon_max;
            if inside && p.score.normalized_margin >= t {
                out.insert(p.key.clone());
            }
        }
        out
    }

    #[test]
    fn threshold_bounds() {
        let points = random_points(500, 1);
        let all = Rect::new(-90.0, 90.0, -180.0, 180.0).unwrap();
        assert!(preview_rect(&points, &all, 1.1).is_empty());
        assert_eq!(preview_rect(&points, &all, -1.0).len(), points.len());
    }

    #[test]
    fn triangle_fixture() {
        let points = vec![
            point("a", 0, 0.2, 0.2, 0.0),
            point("a", 1, 2.0, 2.0, 0.0),
            point("a", 2, -1.0, 0.5, 0.0),
        ];
        let tri = Polygon::new(vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]).unwrap();
        let got = preview_polygon(&points, &tri);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), [SoundingKey::new("a", 0)]);
    }

    #[test]
    fn matches_linear_scan() {
        let points = random_points(1000, 2);
        let r = Rect::new(0.2, 0.7, 0.1, 0.55).unwrap();
        for t in [-1.0, -0.3, 0.0, 0.42, 1.0] {
            assert_eq!(preview_rect(&points, &r, t), oracle(&points, &r, t));
        }
    }

    #[test]
    fn shape_threshold_pairing() {
        let points = random_points(10, 3);
        let r = Shape::Rect(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap());
        assert!(preview_shape(&points, &r, None).is_err());
        assert!(preview_shape(&points, &r, Some(f64::NAN)).is_err());
        let p = Shape::Polygon(Polygon::new(vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]).unwrap());
        assert!(preview_shape(&points, &p, Some(0.5)).is_err());
        assert!(preview_shape(&points, &p, None).is_ok());
    }

    fn rect_strategy() -> impl Strategy<Value = Rect> {
        (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b, c, d)| {
            Rect::new(a.min(b), a.max(b), c.min(d), c.max(d)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn threshold_monotone(r in rect_strategy(), t1 in -1.2..1.2f64, t2 in -1.2..1.2f64, seed in 0..50u64) {
            let points = random_points(300, seed);
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            prop_assert!(preview_rect(&points, &r, hi).is_subset(&preview_rect(&points, &r, lo)));
        }

        #[test]
        fn rect_nesting(r in rect_strategy(), grow in (0.0..0.3f64, 0.0..0.3f64, 0.0..0.3f64, 0.0..0.3f64), t in -1.0..1.0f64) {
            let points = random_points(300, 9);
            let outer = Rect::new(r.lat_min - grow.0, r.lat_max + grow.1, r.lon_min - grow.2, r.lon_max + grow.3).unwrap();
            prop_assert!(r.within(&outer));
            prop_assert!(preview_rect(&points, &r, t).is_subset(&preview_rect(&points, &outer, t)));
        }

        #[test]
        fn preview_is_pure(r in rect_strategy(), t in -1.0..1.0f64) {
            let points = random_points(200, 4);
            prop_assert_eq!(preview_rect(&points, &r, t), preview_rect(&points, &r, t));
            prop_assert_eq!(preview_rect(&points, &r, t), oracle(&points, &r, t));
        }
    }
}
