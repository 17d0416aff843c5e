//! Append-only edit log.
//!
//! One LF-terminated record per line:
//!
//! ```text
//! id|kind|vertices|threshold|timestamp|removed_count|removed_ranges
//! ```
//!
//! - `kind` is `ASSISTED_RECT`, `MANUAL_POLYGON` or `UNDO`.
//! - `vertices` is `lat,lon;lat,lon;...`. A rectangle is stored as its four
//!   corners, counter-clockwise from the south-west.
//! - `threshold` is empty for polygons.
//! - `timestamp` is integer seconds since the Unix epoch.
//! - `removed_ranges` is `cruise_id:first-last;...` with inclusive seq
//!   ranges sorted by `(cruise_id, first)`.
//! - An `UNDO` record names the undone action in `id` and leaves the shape,
//!   threshold and ranges empty with a count of 0.
//!
//! Durability: a record is written and `fsync`ed before `apply`/`undo`
//! return. A trailing line without LF was never acknowledged and is dropped
//! when the log is reopened.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::geometry::{Polygon, Rect, Shape};
use super::EditError;
use crate::corpus::{validate_id, SoundingKey};
use crate::fmt::{f64_str, push_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    AssistedRect,
    ManualPolygon,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::AssistedRect => "ASSISTED_RECT",
            ActionKind::ManualPolygon => "MANUAL_POLYGON",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditAction {
    pub id: u64,
    pub shape: Shape,
    /// Minimal BAD confidence in `[-1, 1]`; only for rectangle actions.
    pub threshold: Option<f64>,
    pub removed: BTreeSet<SoundingKey>,
    pub timestamp: u64,
}

impl EditAction {
    pub fn kind(&self) -> ActionKind {
        match self.shape {
            Shape::Rect(_) => ActionKind::AssistedRect,
            Shape::Polygon(_) => ActionKind::ManualPolygon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyOutcome {
    Applied,
    /// An identical action with this id is already in the log.
    AlreadyApplied,
}

#[derive(Debug)]
struct LogFile {
    path: PathBuf,
    file: File,
}

/// Applied actions, undo marks and the derived removed-set.
#[derive(Debug, Default)]
pub struct EditLog {
    actions: Vec<EditAction>,
    index: BTreeMap<u64, usize>,
    undone: BTreeMap<u64, u64>,
    removed: BTreeSet<SoundingKey>,
    file: Option<LogFile>,
}

impl EditLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a log file and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EditError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let complete = match text.rfind('\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if complete < text.len() {
            log::warn!(
                "{}: dropping {} bytes of an unacknowledged trailing record",
                path.display(),
                text.len() - complete
            );
            file.set_len(complete as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        let mut log = Self::in_memory();
        for (i, line) in text[..complete].lines().enumerate() {
            match parse_record(line).map_err(|message| EditError::Malformed {
                line: i + 1,
                message,
            })? {
                Record::Apply(action) => {
                    log.apply_in_memory(action)?;
                }
                Record::Undo { id, timestamp } => log.undo_in_memory(id, timestamp)?,
            }
        }
        log.file = Some(LogFile {
            path: path.to_path_buf(),
            file,
        });
        Ok(log)
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|f| f.path.as_path())
    }

    pub fn actions(&self) -> &[EditAction] {
        &self.actions
    }

    pub fn get(&self, id: u64) -> Option<&EditAction> {
        self.index.get(&id).map(|&i| &self.actions[i])
    }

    pub fn undone_at(&self, id: u64) -> Option<u64> {
        self.undone.get(&id).copied()
    }

    pub fn is_undone(&self, id: u64) -> bool {
        self.undone.contains_key(&id)
    }

    pub fn last_id(&self) -> Option<u64> {
        self.actions.last().map(|a| a.id)
    }

    pub fn next_id(&self) -> u64 {
        self.last_id().map_or(1, |id| id + 1)
    }

    /// Union of the removals of every action that is not undone.
    pub fn removed(&self) -> &BTreeSet<SoundingKey> {
        &self.removed
    }

    /// Appends an action, persisting it first when file-backed.
    pub fn apply(&mut self, action: EditAction) -> Result<ApplyOutcome, EditError> {
        if let Some(existing) = self.get(action.id) {
            return if *existing == action {
                Ok(ApplyOutcome::AlreadyApplied)
            } else {
                Err(EditError::IdConflict(action.id))
            };
        }
        self.check_new_id(action.id)?;
        check_threshold(&action)?;
        self.persist(&format_apply(&action))?;
        self.apply_in_memory(action)
    }

    pub fn undo(&mut self, id: u64, timestamp: u64) -> Result<(), EditError> {
        self.check_undo(id)?;
        self.persist(&format_undo(id, timestamp))?;
        self.undo_in_memory(id, timestamp)
    }

    fn check_new_id(&self, id: u64) -> Result<(), EditError> {
        match self.last_id() {
            Some(last) if id <= last => Err(EditError::NonMonotonicId { id, last }),
            _ => Ok(()),
        }
    }

    fn check_undo(&self, id: u64) -> Result<(), EditError> {
        if self.get(id).is_none() {
            return Err(EditError::UnknownAction(id));
        }
        if self.is_undone(id) {
            return Err(EditError::AlreadyUndone(id));
        }
        Ok(())
    }

    fn persist(&mut self, record: &str) -> Result<(), EditError> {
        if let Some(f) = &mut self.file {
            f.file.write_all(record.as_bytes())?;
            f.file.sync_data()?;
        }
        Ok(())
    }

    fn apply_in_memory(&mut self, action: EditAction) -> Result<ApplyOutcome, EditError> {
        self.check_new_id(action.id)?;
        self.removed.extend(action.removed.iter().cloned());
        self.index.insert(action.id, self.actions.len());
        self.actions.push(action);
        Ok(ApplyOutcome::Applied)
    }

    fn undo_in_memory(&mut self, id: u64, timestamp: u64) -> Result<(), EditError> {
        self.check_undo(id)?;
        self.undone.insert(id, timestamp);
        self.removed = self
            .actions
            .iter()
            .filter(|a| !self.undone.contains_key(&a.id))
            .flat_map(|a| a.removed.iter().cloned())
            .collect();
        Ok(())
    }
}

fn check_threshold(action: &EditAction) -> Result<(), EditError> {
    match (&action.shape, action.threshold) {
        (Shape::Rect(_), Some(t)) if (-1.0..=1.0).contains(&t) => Ok(()),
        (Shape::Polygon(_), None) => Ok(()),
        _ => Err(EditError::InvalidThreshold),
    }
}

/// Collapses sorted keys into `cruise_id:first-last` ranges.
fn format_ranges(keys: &BTreeSet<SoundingKey>) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut iter = keys.iter().peekable();
    while let Some(first) = iter.next() {
        let mut last = first.seq;
        while let Some(next) = iter.peek() {
            if next.cruise_id == first.cruise_id && next.seq == last + 1 {
                last = next.seq;
                iter.next();
            } else {
                break;
            }
        }
        parts.push(format!("{}:{}-{}", first.cruise_id, first.seq, last));
    }
    parts.join(";")
}

fn format_apply(a: &EditAction) -> String {
    let mut vertices = String::new();
    for (i, (lat, lon)) in a.shape.vertices().into_iter().enumerate() {
        if i > 0 {
            vertices.push(';');
        }
        push_f64(&mut vertices, lat);
        vertices.push(',');
        push_f64(&mut vertices, lon);
    }
    format!(
        "{}|{}|{}|{}|{}|{}|{}\n",
        a.id,
        a.kind().as_str(),
        vertices,
        a.threshold.map(f64_str).unwrap_or_default(),
        a.timestamp,
        a.removed.len(),
        format_ranges(&a.removed)
    )
}

fn format_undo(id: u64, timestamp: u64) -> String {
    format!("{id}|UNDO|||{timestamp}|0|\n")
}

enum Record {
    Apply(EditAction),
    Undo { id: u64, timestamp: u64 },
}

fn parse_record(line: &str) -> Result<Record, String> {
    let f: Vec<&str> = line.split('|').collect();
    if f.len() != 7 {
        return Err(format!("expected 7 fields, found {}", f.len()));
    }
    let id: u64 = f[0].parse().map_err(|_| format!("bad id {:?}", f[0]))?;
    let timestamp: u64 = f[4].parse().map_err(|_| format!("bad timestamp {:?}", f[4]))?;
    let count: usize = f[5].parse().map_err(|_| format!("bad count {:?}", f[5]))?;
    if f[1] == "UNDO" {
        if !(f[2].is_empty() && f[3].is_empty() && count == 0 && f[6].is_empty()) {
            return Err("UNDO record carries a payload".into());
        }
        return Ok(Record::Undo { id, timestamp });
    }
    let vertices = f[2]
        .split(';')
        .map(|pair| {
            let (lat, lon) = pair.split_once(',').ok_or("vertex must be lat,lon")?;
            let lat: f64 = lat.parse().map_err(|_| format!("bad latitude {lat:?}"))?;
            let lon: f64 = lon.parse().map_err(|_| format!("bad longitude {lon:?}"))?;
            Ok((lat, lon))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let (shape, threshold) = match f[1] {
        "ASSISTED_RECT" => {
            let [(lat_min, lon_min), _, (lat_max, lon_max), _] = vertices[..] else {
                return Err("rectangle needs 4 corners".into());
            };
            let rect = Rect::new(lat_min, lat_max, lon_min, lon_max).map_err(|e| e.to_string())?;
            if rect.corners()[..] != vertices[..] {
                return Err("rectangle corners are inconsistent".into());
            }
            let t: f64 = f[3].parse().map_err(|_| format!("bad threshold {:?}", f[3]))?;
            (Shape::Rect(rect), Some(t))
        }
        "MANUAL_POLYGON" => {
            if !f[3].is_empty() {
                return Err("polygon record has a threshold".into());
            }
            (
                Shape::Polygon(Polygon::new(vertices).map_err(|e| e.to_string())?),
                None,
            )
        }
        other => return Err(format!("unknown kind {other:?}")),
    };
    let mut removed = BTreeSet::new();
    if !f[6].is_empty() {
        for range in f[6].split(';') {
            let (cruise, span) = range.split_once(':').ok_or("range must be cruise:first-last")?;
            validate_id(cruise)?;
            let (first, last) = span.split_once('-').ok_or("range must be first-last")?;
            let first: u64 = first.parse().map_err(|_| format!("bad seq {first:?}"))?;
            let last: u64 = last.parse().map_err(|_| format!("bad seq {last:?}"))?;
            if last < first {
                return Err(format!("empty range {range:?}"));
            }
            let id: Arc<str> = cruise.into();
            removed.extend((first..=last).map(|s| SoundingKey::new(id.clone(), s)));
        }
    }
    if removed.len() != count {
        return Err(format!("removed count {count} but ranges hold {}", removed.len()));
    }
    Ok(Record::Apply(EditAction {
        id,
        shape,
        threshold,
        removed,
        timestamp,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(cruise: &str, seqs: &[u64]) -> BTreeSet<SoundingKey> {
        seqs.iter().map(|&s| SoundingKey::new(cruise, s)).collect()
    }

    fn rect_action(id: u64, removed: BTreeSet<SoundingKey>) -> EditAction {
        EditAction {
            id,
            shape: Shape::Rect(Rect::new(-1.5, 2.0, 10.0, 10.25).unwrap()),
            threshold: Some(0.3),
            removed,
            timestamp: 1_700_000_000 + id,
        }
    }

    #[test]
    fn record_format() {
        let mut removed = keys("c1", &[3, 4, 5, 9]);
        removed.extend(keys("c0", &[0]));
        let line = format_apply(&rect_action(7, removed));
        assert_eq!(
            line,
            "7|ASSISTED_RECT|-1.5,10;-1.5,10.25;2,10.25;2,10|0.3|1700000007|5|c0:0-0;c1:3-5;c1:9-9\n"
        );
        assert_eq!(format_undo(7, 5), "7|UNDO|||5|0|\n");
        match parse_record(line.trim_end()).unwrap() {
            Record::Apply(a) => assert_eq!(a.removed.len(), 5),
            Record::Undo { .. } => panic!(),
        }
    }

    #[test]
    fn polygon_record() {
        let action = EditAction {
            id: 1,
            shape: Shape::Polygon(Polygon::new(vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.5)]).unwrap()),
            threshold: None,
            removed: BTreeSet::new(),
            timestamp: 0,
        };
        let line = format_apply(&action);
        assert_eq!(line, "1|MANUAL_POLYGON|0,0;0,1;1,0.5||0|0|\n");
        match parse_record(line.trim_end()).unwrap() {
            Record::Apply(a) => assert_eq!(a, action),
            Record::Undo { .. } => panic!(),
        }
    }

    #[test]
    fn idempotent_and_monotonic_ids() {
        let mut log = EditLog::in_memory();
        let a = rect_action(1, keys("c", &[1]));
        assert_eq!(log.apply(a.clone()).unwrap(), ApplyOutcome::Applied);
        assert_eq!(log.apply(a).unwrap(), ApplyOutcome::AlreadyApplied);
        assert!(matches!(
            log.apply(rect_action(1, keys("c", &[2]))),
            Err(EditError::IdConflict(1))
        ));
        log.apply(rect_action(5, keys("c", &[2]))).unwrap();
        assert!(matches!(
            log.apply(rect_action(3, keys("c", &[3]))),
            Err(EditError::NonMonotonicId { id: 3, last: 5 })
        ));
        assert_eq!(log.next_id(), 6);
    }

    #[test]
    fn undo_errors() {
        let mut log = EditLog::in_memory();
        log.apply(rect_action(1, keys("c", &[1]))).unwrap();
        assert!(matches!(log.undo(2, 0), Err(EditError::UnknownAction(2))));
        log.undo(1, 0).unwrap();
        assert!(matches!(log.undo(1, 0), Err(EditError::AlreadyUndone(1))));
        assert!(log.removed().is_empty());
    }

    #[test]
    fn threshold_must_match_kind() {
        let mut log = EditLog::in_memory();
        let mut a = rect_action(1, BTreeSet::new());
        a.threshold = None;
        assert!(matches!(log.apply(a.clone()), Err(EditError::InvalidThreshold)));
        a.threshold = Some(1.1);
        assert!(matches!(log.apply(a), Err(EditError::InvalidThreshold)));
    }

    #[test]
    fn reopen_replays_and_drops_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edits.log");
        {
            let mut log = EditLog::open(&path).unwrap();
            log.apply(rect_action(1, keys("c", &[1, 2]))).unwrap();
            log.apply(rect_action(2, keys("d", &[7]))).unwrap();
            log.undo(1, 99).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"3|ASSISTED_RE").unwrap();
        drop(f);

        let mut log = EditLog::open(&path).unwrap();
        assert_eq!(log.actions().len(), 2);
        assert!(log.is_undone(1));
        assert_eq!(log.removed(), &keys("d", &[7]));
        log.apply(rect_action(3, keys("e", &[0]))).unwrap();
        drop(log);
        let log = EditLog::open(&path).unwrap();
        assert_eq!(log.actions().len(), 3);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn corrupt_records_rejected() {
        for bad in [
            "x|UNDO|||0|0|",
            "1|UNDO|0,0||0|0|",
            "1|ASSISTED_RECT|0,0;0,1;1,1;1,0|0.5|0|2|c:0-0",
            "1|ASSISTED_RECT|0,0;0,1;1,1|0.5|0|0|",
            "1|ASSISTED_RECT|0,0;0,1;1,1;1,0.5|0.5|0|0|",
            "1|MANUAL_POLYGON|0,0;0,1;1,1|0.5|0|0|",
            "1|OTHER|0,0;0,1;1,1||0|0|",
            "1|MANUAL_POLYGON|0,0;0,1;1,1||0|1|c:3-2",
        ] {
            assert!(parse_record(bad).is_err(), "{bad}");
        }
    }
}
