//! The sounding CSV format.
//!
//! ```text
//! cruise_id,region_id,seq,time,lat,lon,depth,f0,...,f{F-1},label
//! ```
//!
//! One row per sounding, rows sorted by `(cruise_id, seq)`, floats in
//! shortest round-trip decimal, label `G` or `B`, LF line endings. An empty
//! corpus is a header-only file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{validate_id, Corpus, CorpusError, Cruise, Label, Sounding};
use crate::fmt::push_f64;

pub const HEADER_PREFIX: &str = "cruise_id,region_id,seq,time,lat,lon,depth";

fn header(feature_count: usize) -> String {
    let mut h = String::from(HEADER_PREFIX);
    for i in 0..feature_count {
        h.push_str(&format!(",f{i}"));
    }
    h.push_str(",label");
    h
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    write_corpus(corpus, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes the corpus with cruises ordered by id regardless of in-memory order.
pub fn write_corpus<W: Write>(corpus: &Corpus, out: &mut W) -> Result<(), CorpusError> {
    writeln!(out, "{}", header(corpus.feature_count()))?;
    let mut cruises: Vec<&Cruise> = corpus.cruises().iter().collect();
    cruises.sort_by(|a, b| a.cruise_id.cmp(&b.cruise_id));
    let mut line = String::with_capacity(256);
    for cruise in cruises {
        for s in &cruise.soundings {
            line.clear();
            line.push_str(&cruise.cruise_id);
            line.push(',');
            line.push_str(&cruise.region_id);
            line.push(',');
            line.push_str(&s.seq.to_string());
            for v in [s.time, s.lat, s.lon, s.depth].into_iter().chain(s.features.iter().copied()) {
                line.push(',');
                push_f64(&mut line, v);
            }
            line.push(',');
            line.push(s.label.code());
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
    }
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    read_corpus(BufReader::new(file))
}

struct Row {
    line: usize,
    region_id: String,
    sounding: Sounding,
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut lines = reader.lines();
    let head = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(CorpusError::Malformed {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let feature_count = parse_header(&head)?;
    let width = 8 + feature_count;

    let mut groups: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for (idx, text) in lines.enumerate() {
        let line = idx + 2;
        let text = text?;
        let malformed = |message: String| CorpusError::Malformed { line, message };
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != width {
            if fields.len() > 8 {
                return Err(CorpusError::FeatureCount {
                    line,
                    expected: feature_count,
                    found: fields.len() - 8,
                });
            }
            return Err(malformed(format!(
                "expected {width} fields, found {}",
                fields.len()
            )));
        }
        validate_id(fields[0]).map_err(malformed)?;
        validate_id(fields[1]).map_err(malformed)?;
        let seq: u64 = fields[2]
            .parse()
            .map_err(|_| malformed(format!("bad seq {:?}", fields[2])))?;
        let num = |i: usize| -> Result<f64, CorpusError> {
            let v: f64 = fields[i].parse().map_err(|_| CorpusError::Malformed {
                line,
                message: format!("bad number {:?}", fields[i]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CorpusError::Malformed {
                    line,
                    message: format!("non-finite number {:?}", fields[i]),
                })
            }
        };
        let (time, lat, lon, depth) = (num(3)?, num(4)?, num(5)?, num(6)?);
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..180.0).contains(&lon) {
            return Err(malformed(format!("position ({lat}, {lon}) out of range")));
        }
        let features = (7..7 + feature_count).map(num).collect::<Result<Vec<_>, _>>()?;
        let label = Label::from_code(fields[width - 1])
            .ok_or_else(|| malformed(format!("bad label {:?}", fields[width - 1])))?;
        groups.entry(fields[0].to_owned()).or_default().push(Row {
            line,
            region_id: fields[1].to_owned(),
            sounding: Sounding {
                seq,
                time,
                lat,
                lon,
                depth,
                features,
                label,
            },
        });
    }

    let mut cruises = Vec::with_capacity(groups.len());
    for (cruise_id, mut rows) in groups {
        rows.sort_by_key(|r| (r.sounding.seq, r.line));
        let region_id = rows[0].region_id.clone();
        let mut soundings = Vec::with_capacity(rows.len());
        for (expected, row) in rows.into_iter().enumerate() {
            let expected = expected as u64;
            if row.region_id != region_id {
                return Err(CorpusError::Malformed {
                    line: row.line,
                    message: format!(
                        "cruise {cruise_id} switches region from {region_id} to {}",
                        row.region_id
                    ),
                });
            }
            if row.sounding.seq < expected {
                return Err(CorpusError::DuplicateSeq {
                    line: row.line,
                    cruise_id,
                    seq: row.sounding.seq,
                });
            }
            if row.sounding.seq > expected {
                return Err(CorpusError::SeqGap {
                    line: row.line,
                    cruise_id,
                    expected,
                    found: row.sounding.seq,
                });
            }
            if let Some(prev) = soundings.last() {
                let prev: &Sounding = prev;
                if row.sounding.time < prev.time {
                    return Err(CorpusError::TimeRegression {
                        line: row.line,
                        cruise_id,
                    });
                }
            }
            soundings.push(row.sounding);
        }
        cruises.push(Cruise {
            cruise_id,
            region_id,
            soundings,
        });
    }
    Corpus::new(feature_count, cruises)
}

fn parse_header(head: &str) -> Result<usize, CorpusError> {
    let bad = |message: String| CorpusError::Malformed { line: 1, message };
    let rest = head
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| bad(format!("header must start with {HEADER_PREFIX:?}")))?;
    let rest = rest
        .strip_suffix(",label")
        .ok_or_else(|| bad("header must end with \"label\"".into()))?;
    let names: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.strip_prefix(',')
            .ok_or_else(|| bad("malformed feature columns".into()))?
            .split(',')
            .collect()
    };
    for (i, name) in names.iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(bad(format!("feature column {i} is named {name:?}")));
        }
    }
    Ok(names.len())
}
