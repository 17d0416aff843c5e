//! Concurrent front end over an [`EditLog`].
//!
//! Previews take a read lock and may run in parallel. Apply and undo take
//! the write lock, so they are totally ordered and readers see either the
//! state before or after a mutation. Action ids are assigned under the
//! write lock, which makes that order the id order.

use std::collections::BTreeSet;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use super::log::{ApplyOutcome, EditAction, EditLog};
use super::{preview_shape, EditError, Shape};
use crate::corpus::SoundingKey;
use crate::scores::ScoredSounding;

#[derive(Debug)]
struct State {
    score_version: String,
    points: Arc<Vec<ScoredSounding>>,
    log: EditLog,
}

#[derive(Debug)]
pub struct EditEngine {
    state: RwLock<State>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preview {
    pub ids: BTreeSet<SoundingKey>,
    /// How many of `ids` are already removed by earlier actions.
    pub already_removed: usize,
    pub score_version: String,
}

/// Apply parameters. The `expected_*` fields guard against scores or
/// selections that changed since the caller previewed.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplyRequest {
    pub shape: Shape,
    pub threshold: Option<f64>,
    pub expected_version: Option<String>,
    pub expected_count: Option<usize>,
    pub expected_ids: Option<BTreeSet<SoundingKey>>,
    /// Client-chosen id for retries; assigned by the engine when absent.
    pub id: Option<u64>,
    pub timestamp: Option<u64>,
}

impl ApplyRequest {
    pub fn new(shape: Shape, threshold: Option<f64>) -> Self {
        Self {
            shape,
            threshold,
            expected_version: None,
            expected_count: None,
            expected_ids: None,
            id: None,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub action: EditAction,
    pub outcome: ApplyOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub action: EditAction,
    /// Timestamp of the undo, when undone.
    pub undone_at: Option<u64>,
}

/// Consistent read of scores and removals taken under one lock.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub score_version: String,
    pub points: Arc<Vec<ScoredSounding>>,
    pub removed: BTreeSet<SoundingKey>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl EditEngine {
    pub fn new(score_version: impl Into<String>, points: Vec<ScoredSounding>, log: EditLog) -> Self {
        Self {
            state: RwLock::new(State {
                score_version: score_version.into(),
                points: Arc::new(points),
                log,
            }),
        }
    }

    fn read(&self) -> RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn score_version(&self) -> String {
        self.read().score_version.clone()
    }

    pub fn snapshot(&self) -> Snapshot {
        let s = self.read();
        Snapshot {
            score_version: s.score_version.clone(),
            points: s.points.clone(),
            removed: s.log.removed().clone(),
        }
    }

    pub fn removed(&self) -> BTreeSet<SoundingKey> {
        self.read().log.removed().clone()
    }

    pub fn log_entries(&self) -> Vec<LogEntry> {
        let s = self.read();
        s.log
            .actions()
            .iter()
            .map(|a| LogEntry {
                action: a.clone(),
                undone_at: s.log.undone_at(a.id),
            })
            .collect()
    }

    pub fn preview(&self, shape: &Shape, threshold: Option<f64>) -> Result<Preview, EditError> {
        let s = self.read();
        let ids = preview_shape(&s.points, shape, threshold)?;
        let removed = s.log.removed();
        Ok(Preview {
            already_removed: ids.iter().filter(|k| removed.contains(*k)).count(),
            ids,
            score_version: s.score_version.clone(),
        })
    }

    /// Recomputes the selection under the write lock and appends it.
    ///
    /// Retrying with the id of an existing action that selects the same
    /// shape, threshold and soundings returns that action unchanged.
    pub fn apply(&self, req: ApplyRequest) -> Result<Applied, EditError> {
        let mut s = self.write();
        if let Some(v) = &req.expected_version {
            if *v != s.score_version {
                return Err(EditError::Stale(format!(
                    "scores are at version {}, preview used {v}",
                    s.score_version
                )));
            }
        }
        let removed = preview_shape(&s.points, &req.shape, req.threshold)?;
        if let Some(n) = req.expected_count {
            if n != removed.len() {
                return Err(EditError::Stale(format!(
                    "selection now holds {} soundings, preview had {n}",
                    removed.len()
                )));
            }
        }
        if let Some(ids) = &req.expected_ids {
            if *ids != removed {
                return Err(EditError::Stale("selection differs from the preview".into()));
            }
        }
        if let Some(existing) = req.id.and_then(|id| s.log.get(id)) {
            return if existing.shape == req.shape
                && existing.threshold == req.threshold
                && existing.removed == removed
            {
                Ok(Applied {
                    action: existing.clone(),
                    outcome: ApplyOutcome::AlreadyApplied,
                })
            } else {
                Err(EditError::IdConflict(existing.id))
            };
        }
        let action = EditAction {
            id: req.id.unwrap_or_else(|| s.log.next_id()),
            shape: req.shape,
            threshold: req.threshold,
            removed,
            timestamp: req.timestamp.unwrap_or_else(now),
        };
        let outcome = s.log.apply(action.clone())?;
        Ok(Applied { action, outcome })
    }

    pub fn undo(&self, id: u64, timestamp: Option<u64>) -> Result<(), EditError> {
        self.write().log.undo(id, timestamp.unwrap_or_else(now))
    }

    /// Swaps in scores from a new model. Earlier actions keep the removals
    /// they recorded; pending previews become stale.
    pub fn replace_scores(&self, score_version: impl Into<String>, points: Vec<ScoredSounding>) {
        let mut s = self.write();
        s.score_version = score_version.into();
        s.points = Arc::new(points);
    }
}
