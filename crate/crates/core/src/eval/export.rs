//! Comma-separated exports for external plotting. Missing cells are `NA`.

use std::io::{BufRead, Write};

use super::{AurocMatrix, EvalError, ImprovementTable, RocCurve, SequentialityEntry};
use crate::fmt::f64_str;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), f64_str)
}

/// `model,<region>...` header, then one row per model.
pub fn write_matrix<W: Write>(matrix: &AurocMatrix, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "model,{}", matrix.col_ids.join(","))?;
    for (id, row) in matrix.row_ids.iter().zip(&matrix.values) {
        let cells: Vec<String> = row.iter().map(|&v| cell(v)).collect();
        writeln!(out, "{id},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(reader: R) -> Result<AurocMatrix, EvalError> {
    let mut lines = reader.lines();
    let bad = |line: usize, message: String| EvalError::Malformed { line, message };
    let head = lines.next().ok_or_else(|| bad(1, "empty file".into()))??;
    let mut cols = head.split(',');
    if cols.next() != Some("model") {
        return Err(bad(1, "header must start with \"model\"".into()));
    }
    let col_ids: Vec<String> = cols.map(str::to_owned).collect();
    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for (i, text) in lines.enumerate() {
        let line = i + 2;
        let text = text?;
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != col_ids.len() + 1 {
            return Err(bad(line, format!("expected {} fields", col_ids.len() + 1)));
        }
        row_ids.push(fields[0].to_owned());
        let row = fields[1..]
            .iter()
            .map(|f| match *f {
                "NA" => Ok(None),
                s => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| (0.0..=1.0).contains(v))
                    .map(Some)
                    .ok_or_else(|| bad(line, format!("bad AUROC {s:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        values.push(row);
    }
    Ok(AurocMatrix {
        row_ids,
        col_ids,
        values,
    })
}

pub fn write_improvement<W: Write>(table: &ImprovementTable, out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "region_id,auroc_same,auroc_all,improvement_percent,absolute_difference"
    )?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.region_id,
            f64_str(r.auroc_same),
            f64_str(r.auroc_all),
            f64_str(r.improvement_percent),
            f64_str(r.absolute_difference)
        )?;
    }
    Ok(())
}

/// `fpr,tpr,threshold` per curve point; the first threshold is `inf`.
pub fn write_roc<W: Write>(curve: &RocCurve, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "fpr,tpr,threshold")?;
    for (&(fpr, tpr), &t) in curve.points.iter().zip(&curve.thresholds) {
        writeln!(out, "{},{},{}", f64_str(fpr), f64_str(tpr), f64_str(t))?;
    }
    Ok(())
}

pub fn write_sequentiality_report<W: Write>(
    entries: &[SequentialityEntry],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(
        out,
        "strategy,test_fraction,seed,train_soundings,test_soundings,auroc"
    )?;
    for e in entries {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.spec.strategy,
            f64_str(e.spec.test_fraction),
            e.spec.seed,
            e.train_soundings,
            e.test_soundings,
            f64_str(e.roc.auroc)
        )?;
    }
    Ok(())
}
