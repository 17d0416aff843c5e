//! Train/test partitioning of sequential sounding data.
//!
//! A split first cuts the corpus into units and then assigns each unit to
//! TRAIN or TEST with an independent Bernoulli(`test_fraction`) draw. Units
//! are single soundings, whole cruises, or consecutive chunks of a cruise;
//! a chunk never crosses a cruise boundary and a short final remainder is its
//! own unit.
//!
//! The draw for unit `i` (in canonical corpus order) is read from a fixed
//! position of a seeded ChaCha stream, so results are independent of how the
//! work is scheduled.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{validate_id, Corpus, SoundingKey};
use crate::par;

/// Chunk length of the original large-scale experiments.
pub const DEFAULT_CHUNK_LENGTH: usize = 100_000;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("invalid split spec: {0}")]
    InvalidSpec(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("split file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("split does not match corpus: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    PerExample,
    PerCruise,
    Chunk { length: usize },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::PerExample => f.write_str("per_example"),
            Strategy::PerCruise => f.write_str("per_cruise"),
            Strategy::Chunk { length } => write!(f, "chunk({length})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub strategy: Strategy,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(strategy: Strategy, test_fraction: f64, seed: u64) -> Self {
        Self {
            strategy,
            test_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(SplitError::InvalidSpec(format!(
                "test_fraction {} must lie in (0, 1)",
                self.test_fraction
            )));
        }
        if let Strategy::Chunk { length: 0 } = self.strategy {
            return Err(SplitError::InvalidSpec("chunk length must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Train,
    Test,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Train => "train",
            Side::Test => "test",
        }
    }
}

/// A contiguous range of one cruise, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitUnit {
    pub cruise_index: usize,
    pub cruise_id: String,
    pub seq_start: u64,
    pub seq_end: u64,
    pub side: Side,
}

impl SplitUnit {
    pub fn len(&self) -> usize {
        (self.seq_end - self.seq_start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Unit assignments in canonical corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    units: Vec<SplitUnit>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStats {
    pub train_soundings: usize,
    pub test_soundings: usize,
    pub train_units: usize,
    pub test_units: usize,
    pub realized_test_fraction: f64,
    /// One side is empty.
    pub degenerate: bool,
}

impl SplitResult {
    pub fn units(&self) -> &[SplitUnit] {
        &self.units
    }

    /// Per-cruise, per-sounding side assignment, indexed like the corpus.
    pub fn sides(&self, corpus: &Corpus) -> Vec<Vec<Side>> {
        let mut sides: Vec<Vec<Side>> = corpus
            .cruises()
            .iter()
            .map(|c| vec![Side::Train; c.len()])
            .collect();
        for u in &self.units {
            for s in &mut sides[u.cruise_index][u.seq_start as usize..=u.seq_end as usize] {
                *s = u.side;
            }
        }
        sides
    }

    /// Keys assigned to `side`, in canonical order.
    pub fn keys(&self, side: Side) -> impl Iterator<Item = SoundingKey> + '_ {
        self.units.iter().filter(move |u| u.side == side).flat_map(|u| {
            let id: std::sync::Arc<str> = u.cruise_id.as_str().into();
            (u.seq_start..=u.seq_end).map(move |seq| SoundingKey::new(id.clone(), seq))
        })
    }

    pub fn stats(&self) -> SplitStats {
        split_stats(self)
    }

    /// Checks that this split covers `corpus` exactly, unit by unit.
    pub fn check_against(&self, corpus: &Corpus) -> Result<(), SplitError> {
        let cruises = corpus.cruises();
        let mut next = vec![0u64; cruises.len()];
        for u in &self.units {
            let cruise = cruises.get(u.cruise_index).ok_or_else(|| {
                SplitError::Mismatch(format!("unknown cruise index {}", u.cruise_index))
            })?;
            if cruise.cruise_id != u.cruise_id {
                return Err(SplitError::Mismatch(format!(
                    "unit names cruise {} at position of {}",
                    u.cruise_id, cruise.cruise_id
                )));
            }
            if u.seq_start != next[u.cruise_index] || u.seq_end < u.seq_start {
                return Err(SplitError::Mismatch(format!(
                    "cruise {}: unit {}..={} does not continue at {}",
                    u.cruise_id, u.seq_start, u.seq_end, next[u.cruise_index]
                )));
            }
            next[u.cruise_index] = u.seq_end + 1;
        }
        for (c, &n) in cruises.iter().zip(&next) {
            if n != c.len() as u64 {
                return Err(SplitError::Mismatch(format!(
                    "cruise {} covered up to {n} of {}",
                    c.cruise_id,
                    c.len()
                )));
            }
        }
        Ok(())
    }

    /// Writes `cruise_id,seq_start,seq_end,side` per unit.
    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "cruise_id,seq_start,seq_end,side")?;
        for u in &self.units {
            writeln!(
                out,
                "{},{},{},{}",
                u.cruise_id,
                u.seq_start,
                u.seq_end,
                u.side.as_str()
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SplitError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Reads a split file and binds it to `corpus`.
    pub fn read<R: BufRead>(reader: R, corpus: &Corpus) -> Result<SplitResult, SplitError> {
        let index: std::collections::HashMap<&str, usize> = corpus
            .cruises()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.cruise_id.as_str(), i))
            .collect();
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h == "cruise_id,seq_start,seq_end,side" => {}
            Some(Err(e)) => return Err(e.into()),
            _ => {
                return Err(SplitError::Malformed {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        }
        let mut units = Vec::new();
        for (i, text) in lines.enumerate() {
            let line = i + 2;
            let text = text?;
            let bad = |message: String| SplitError::Malformed { line, message };
            let f: Vec<&str> = text.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", f.len())));
            }
            validate_id(f[0]).map_err(bad)?;
            let cruise_index = *index
                .get(f[0])
                .ok_or_else(|| bad(format!("unknown cruise {}", f[0])))?;
            let seq_start = f[1].parse().map_err(|_| bad(format!("bad seq {:?}", f[1])))?;
            let seq_end = f[2].parse().map_err(|_| bad(format!("bad seq {:?}", f[2])))?;
            let side = match f[3] {
                "train" => Side::Train,
                "test" => Side::Test,
                other => return Err(bad(format!("bad side {other:?}"))),
            };
            units.push(SplitUnit {
                cruise_index,
                cruise_id: f[0].to_owned(),
                seq_start,
                seq_end,
                side,
            });
        }
        units.sort_by_key(|u| (u.cruise_index, u.seq_start));
        let result = SplitResult { units };
        result.check_against(corpus)?;
        Ok(result)
    }

    pub fn load(path: impl AsRef<Path>, corpus: &Corpus) -> Result<SplitResult, SplitError> {
        Self::read(BufReader::new(File::open(path)?), corpus)
    }
}

/// Uniform draw for unit `index`, read from word position `2 * index` of the
/// seeded stream.
fn unit_draw(base: &ChaCha8Rng, index: usize) -> f64 {
    let mut rng = base.clone();
    rng.set_word_pos(2 * index as u128);
    rng.random()
}

pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(SplitError::EmptyCorpus);
    }
    let mut bounds: Vec<(usize, u64, u64)> = Vec::new();
    for (ci, cruise) in corpus.cruises().iter().enumerate() {
        let n = cruise.len() as u64;
        let step = match spec.strategy {
            Strategy::PerExample => 1,
            Strategy::PerCruise => n,
            Strategy::Chunk { length } => length as u64,
        };
        let mut start = 0;
        while start < n {
            let end = (start + step).min(n) - 1;
            bounds.push((ci, start, end));
            start = end + 1;
        }
    }
    let base = ChaCha8Rng::seed_from_u64(spec.seed);
    let sides = par::map_range(bounds.len(), |i| {
        if unit_draw(&base, i) < spec.test_fraction {
            Side::Test
        } else {
            Side::Train
        }
    });
    let cruises = corpus.cruises();
    let units = bounds
        .into_iter()
        .zip(sides)
        .map(|((ci, seq_start, seq_end), side)| SplitUnit {
            cruise_index: ci,
            cruise_id: cruises[ci].cruise_id.clone(),
            seq_start,
            seq_end,
            side,
        })
        .collect();
    Ok(SplitResult { units })
}

pub fn split_stats(result: &SplitResult) -> SplitStats {
    let mut stats = SplitStats {
        train_soundings: 0,
        test_soundings: 0,
        train_units: 0,
        test_units: 0,
        realized_test_fraction: 0.0,
        degenerate: false,
    };
    for u in &result.units {
        match u.side {
            Side::Train => {
                stats.train_units += 1;
                stats.train_soundings += u.len();
            }
            Side::Test => {
                stats.test_units += 1;
                stats.test_soundings += u.len();
            }
        }
    }
    let total = stats.train_soundings + stats.test_soundings;
    if total > 0 {
        stats.realized_test_fraction = stats.test_soundings as f64 / total as f64;
    }
    stats.degenerate = stats.train_units == 0 || stats.test_units == 0;
    if stats.degenerate {
        log::warn!(
            "degenerate split: {} train units, {} test units",
            stats.train_units,
            stats.test_units
        );
    }
    stats
}
