//! Sounding data model, the CSV interchange format and the synthetic generator.

mod format;
mod generate;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{load_corpus, read_corpus, save_corpus, write_corpus, HEADER_PREFIX};
pub use generate::{generate_corpus, GenSpec};

/// Number of feature channels produced by the generator.
pub const FEATURE_COUNT: usize = 6;

/// Feature channel indices of generated corpora.
pub mod channel {
    pub const DEPTH_RESIDUAL: usize = 0;
    pub const DEPTH_GRADIENT: usize = 1;
    pub const MEDIAN_DEVIATION: usize = 2;
    pub const TIME_OF_DAY: usize = 3;
    pub const LAT: usize = 4;
    pub const LON: usize = 5;

    /// Channels that locate a sounding along its track rather than describe it.
    pub const PROXIES: [usize; 3] = [TIME_OF_DAY, LAT, LON];
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate seq {seq} in cruise {cruise_id}")]
    DuplicateSeq {
        line: usize,
        cruise_id: String,
        seq: u64,
    },
    #[error("cruise {cruise_id}: seq gap, expected {expected} but found {found} (line {line})")]
    SeqGap {
        line: usize,
        cruise_id: String,
        expected: u64,
        found: u64,
    },
    #[error("line {line}: time goes backwards in cruise {cruise_id}")]
    TimeRegression { line: usize, cruise_id: String },
    #[error("line {line}: expected {expected} features, found {found}")]
    FeatureCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid corpus: {0}")]
    Invalid(String),
    #[error("invalid generator spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    pub fn is_bad(self) -> bool {
        self == Label::Bad
    }

    /// Target value with BAD as the positive class.
    pub fn target(self) -> f64 {
        match self {
            Label::Good => 0.0,
            Label::Bad => 1.0,
        }
    }

    pub fn code(self) -> char {
        match self {
            Label::Good => 'G',
            Label::Bad => 'B',
        }
    }

    pub fn from_code(s: &str) -> Option<Label> {
        match s {
            "G" => Some(Label::Good),
            "B" => Some(Label::Bad),
            _ => None,
        }
    }
}

/// One echo-sounder measurement. The owning cruise id lives on [`Cruise`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sounding {
    pub seq: u64,
    /// Seconds since the Unix epoch.
    pub time: f64,
    pub lat: f64,
    pub lon: f64,
    /// Meters, positive downward.
    pub depth: f64,
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cruise {
    pub cruise_id: String,
    pub region_id: String,
    pub soundings: Vec<Sounding>,
}

impl Cruise {
    pub fn len(&self) -> usize {
        self.soundings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soundings.is_empty()
    }
}

/// Stable identity of a sounding across files, splits and edit logs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SoundingKey {
    pub cruise_id: Arc<str>,
    pub seq: u64,
}

impl SoundingKey {
    pub fn new(cruise_id: impl Into<Arc<str>>, seq: u64) -> Self {
        Self {
            cruise_id: cruise_id.into(),
            seq,
        }
    }
}

impl fmt::Display for SoundingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cruise_id, self.seq)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub region_id: String,
    pub cruise_ids: BTreeSet<String>,
    pub bad_count: usize,
    pub total_count: usize,
    pub bad_fraction: f64,
}

/// Identifiers end up inside CSV rows, split files and edit-log records, so
/// they must avoid every delimiter used by those formats.
pub fn validate_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err("identifier is empty".into());
    }
    if let Some(c) = id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')))
    {
        return Err(format!("identifier {id:?} contains forbidden character {c:?}"));
    }
    Ok(())
}

/// A validated set of cruises sharing one feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    feature_count: usize,
    cruises: Vec<Cruise>,
}

impl Corpus {
    /// Builds a corpus, checking every sounding and cruise invariant.
    pub fn new(feature_count: usize, cruises: Vec<Cruise>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for cruise in &cruises {
            validate_id(&cruise.cruise_id).map_err(CorpusError::Invalid)?;
            validate_id(&cruise.region_id).map_err(CorpusError::Invalid)?;
            if !seen.insert(cruise.cruise_id.as_str()) {
                return Err(CorpusError::Invalid(format!(
                    "cruise {} appears twice",
                    cruise.cruise_id
                )));
            }
            if cruise.soundings.is_empty() {
                return Err(CorpusError::Invalid(format!(
                    "cruise {} is empty",
                    cruise.cruise_id
                )));
            }
            let mut prev_time = f64::NEG_INFINITY;
            for (i, s) in cruise.soundings.iter().enumerate() {
                let ctx = |msg: &str| {
                    CorpusError::Invalid(format!("cruise {} seq {}: {msg}", cruise.cruise_id, s.seq))
                };
                if s.seq != i as u64 {
                    return Err(ctx(&format!("expected seq {i}")));
                }
                if s.features.len() != feature_count {
                    return Err(ctx(&format!(
                        "{} features, corpus declares {feature_count}",
                        s.features.len()
                    )));
                }
                check_sounding_values(s).map_err(|m| ctx(&m))?;
                if s.time < prev_time {
                    return Err(ctx("time goes backwards"));
                }
                prev_time = s.time;
            }
        }
        Ok(Self {
            feature_count,
            cruises,
        })
    }

    pub fn empty(feature_count: usize) -> Self {
        Self {
            feature_count,
            cruises: Vec::new(),
        }
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn cruises(&self) -> &[Cruise] {
        &self.cruises
    }

    pub fn into_cruises(self) -> Vec<Cruise> {
        self.cruises
    }

    /// Total number of soundings.
    pub fn len(&self) -> usize {
        self.cruises.iter().map(Cruise::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cruises.is_empty()
    }

    /// Iterates `(key, sounding)` in canonical corpus order.
    pub fn iter(&self) -> impl Iterator<Item = (SoundingKey, &Sounding)> + '_ {
        self.cruises.iter().flat_map(|c| {
            let id: Arc<str> = Arc::from(c.cruise_id.as_str());
            c.soundings
                .iter()
                .map(move |s| (SoundingKey::new(id.clone(), s.seq), s))
        })
    }

    /// Sorted distinct region ids.
    pub fn region_ids(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.cruises.iter().map(|c| c.region_id.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// The sub-corpus of one region, preserving cruise order.
    pub fn region(&self, region_id: &str) -> Corpus {
        Corpus {
            feature_count: self.feature_count,
            cruises: self
                .cruises
                .iter()
                .filter(|c| c.region_id == region_id)
                .cloned()
                .collect(),
        }
    }

    /// Returns a copy with the given feature channels set to zero.
    pub fn with_zeroed_channels(&self, channels: &[usize]) -> Corpus {
        let mut out = self.clone();
        for cruise in &mut out.cruises {
            for s in &mut cruise.soundings {
                for &c in channels {
                    if let Some(v) = s.features.get_mut(c) {
                        *v = 0.0;
                    }
                }
            }
        }
        out
    }
}

fn check_sounding_values(s: &Sounding) -> Result<(), String> {
    if !s.time.is_finite() || !s.depth.is_finite() {
        return Err("non-finite time or depth".into());
    }
    if !(-90.0..=90.0).contains(&s.lat) {
        return Err(format!("latitude {} outside [-90, 90]", s.lat));
    }
    if !(-180.0..180.0).contains(&s.lon) {
        return Err(format!("longitude {} outside [-180, 180)", s.lon));
    }
    if s.features.iter().any(|f| !f.is_finite()) {
        return Err("non-finite feature value".into());
    }
    Ok(())
}

/// Per-region counts and BAD fractions, ordered by region id.
pub fn region_stats(corpus: &Corpus) -> Vec<Region> {
    let mut regions: BTreeMap<&str, Region> = BTreeMap::new();
    for cruise in corpus.cruises() {
        let region = regions
            .entry(cruise.region_id.as_str())
            .or_insert_with(|| Region {
                region_id: cruise.region_id.clone(),
                cruise_ids: BTreeSet::new(),
                bad_count: 0,
                total_count: 0,
                bad_fraction: 0.0,
            });
        region.cruise_ids.insert(cruise.cruise_id.clone());
        region.total_count += cruise.len();
        region.bad_count += cruise.soundings.iter().filter(|s| s.label.is_bad()).count();
    }
    regions
        .into_values()
        .map(|mut r| {
            r.bad_fraction = if r.total_count == 0 {
                0.0
            } else {
                r.bad_count as f64 / r.total_count as f64
            };
            r
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn sounding(seq: u64, label: Label) -> Sounding {
        Sounding {
            seq,
            time: 1_500_000_000.0 + seq as f64 * 10.0,
            lat: 10.0 + (seq % 10_000) as f64 * 0.001,
            lon: -20.5 - (seq % 10_000) as f64 * 0.001,
            depth: 4000.25 + seq as f64,
            features: vec![0.5 * seq as f64, -1.25, 3.0, 0.1, 10.0, -20.5],
            label,
        }
    }

    pub fn cruise(id: &str, region: &str, labels: &[Label]) -> Cruise {
        Cruise {
            cruise_id: id.into(),
            region_id: region.into(),
            soundings: labels
                .iter()
                .enumerate()
                .map(|(i, &l)| sounding(i as u64, l))
                .collect(),
        }
    }
}
