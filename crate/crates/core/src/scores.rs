//! Per-sounding scores and the scores file
//! (`cruise_id,seq,raw,prob_bad,normalized_margin`).

use std::io::{BufRead, Write};

use crate::corpus::{validate_id, Corpus, Label, SoundingKey};
use crate::fmt::f64_str;
use crate::gbdt::{GbdtError, Model, Score};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSounding {
    pub key: SoundingKey,
    pub lat: f64,
    pub lon: f64,
    pub label: Label,
    pub score: Score,
}

impl ScoredSounding {
    /// Confidence toward BAD used by editing thresholds.
    pub fn bad_confidence(&self) -> f64 {
        self.score.normalized_margin
    }
}

/// Scores every sounding, in canonical corpus order.
pub fn score_corpus(model: &Model, corpus: &Corpus) -> Result<Vec<ScoredSounding>, GbdtError> {
    if corpus.feature_count() != model.num_features() {
        return Err(GbdtError::FeatureMismatch {
            expected: model.num_features(),
            found: corpus.feature_count(),
        });
    }
    let cruises = corpus.cruises();
    let per_cruise = par::map(cruises, |cruise| {
        let id: std::sync::Arc<str> = cruise.cruise_id.as_str().into();
        cruise
            .soundings
            .iter()
            .map(|s| ScoredSounding {
                key: SoundingKey::new(id.clone(), s.seq),
                lat: s.lat,
                lon: s.lon,
                label: s.label,
                score: model.score(&s.features).expect("width checked above"),
            })
            .collect::<Vec<_>>()
    });
    Ok(per_cruise.into_iter().flatten().collect())
}

pub const SCORES_HEADER: &str = "cruise_id,seq,raw,prob_bad,normalized_margin";

pub fn write_scores<W: Write>(scored: &[ScoredSounding], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{SCORES_HEADER}")?;
    for s in scored {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.key.cruise_id,
            s.key.seq,
            f64_str(s.score.raw),
            f64_str(s.score.prob_bad),
            f64_str(s.score.normalized_margin)
        )?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ScoresFileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("scores file line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub fn read_scores<R: BufRead>(reader: R) -> Result<Vec<(SoundingKey, Score)>, ScoresFileError> {
    let mut lines = reader.lines();
    let bad = |line: usize, message: String| ScoresFileError::Malformed { line, message };
    match lines.next() {
        Some(h) if h.as_deref().ok() == Some(SCORES_HEADER) => {}
        Some(Err(e)) => return Err(e.into()),
        _ => return Err(bad(1, format!("header must be {SCORES_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, text) in lines.enumerate() {
        let line = i + 2;
        let text = text?;
        let f: Vec<&str> = text.split(',').collect();
        if f.len() != 5 {
            return Err(bad(line, "expected 5 fields".into()));
        }
        validate_id(f[0]).map_err(|m| bad(line, m))?;
        let seq = f[1].parse().map_err(|_| bad(line, format!("bad seq {:?}", f[1])))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line, format!("bad number {s:?}")));
        out.push((
            SoundingKey::new(f[0], seq),
            Score {
                raw: num(f[2])?,
                prob_bad: num(f[3])?,
                normalized_margin: num(f[4])?,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::cruise;
    use crate::corpus::Label::{Bad as B, Good as G};

    #[test]
    fn score_file_round_trip() {
        let corpus = Corpus::new(6, vec![cruise("a", "r", &[G, B, G])]).unwrap();
        let model = Model::new(Vec::new(), 0.1, -1.0, vec![vec![]; 6]).unwrap();
        let scored = score_corpus(&model, &corpus).unwrap();
        assert_eq!(scored.len(), 3);
        let mut buf = Vec::new();
        write_scores(&scored, &mut buf).unwrap();
        let back = read_scores(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[1].0, SoundingKey::new("a", 1));
        assert_eq!(back[1].1, scored[1].score);
    }

    #[test]
    fn width_mismatch() {
        let corpus = Corpus::new(6, vec![cruise("a", "r", &[G])]).unwrap();
        let model = Model::new(Vec::new(), 0.1, 0.0, vec![vec![]; 2]).unwrap();
        assert!(score_corpus(&model, &corpus).is_err());
    }
}
