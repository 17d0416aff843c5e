//! ROC/AUROC, cross-region transfer and split-strategy comparisons.

mod export;
mod roc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Corpus, Label};
use crate::gbdt::{train, GbdtError, Model, TrainConfig, TrainSet};
use crate::par;
use crate::splitter::{split, Side, SplitError, SplitSpec};

pub use export::{
    read_matrix, write_improvement, write_matrix, write_roc, write_sequentiality_report,
};
pub use roc::{roc, RocCurve};

/// Row label of the model trained on every region.
pub const ALL_ROW: &str = "ALL";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ROC needs both classes, got {positives} BAD and {negatives} GOOD")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score is NaN")]
    NanScore,
    #[error("corpus has no regions")]
    NoRegions,
    #[error("split failed: {0}")]
    Split(#[from] SplitError),
    #[error("training failed: {0}")]
    Train(#[from] GbdtError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("matrix file line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// `(prob_bad, label)` for every sounding on `side`, in corpus order.
pub fn score_side(model: &Model, corpus: &Corpus, sides: &[Vec<Side>], side: Side) -> Vec<(f64, Label)> {
    score_set(model, &TrainSet::from_corpus_side(corpus, sides, side))
}

pub fn score_set(model: &Model, set: &TrainSet) -> Vec<(f64, Label)> {
    par::map_range(set.len(), |i| {
        let score = model.score(set.row(i)).expect("train set width matches the model");
        (score.prob_bad, set.labels()[i])
    })
}

/// Train-on-row, test-on-column AUROC. Rows are regions followed by
/// [`ALL_ROW`]; a cell is `None` when its model could not be trained or its
/// test split is single-class.
#[derive(Debug, Clone, PartialEq)]
pub struct AurocMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl AurocMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.row_ids.iter().position(|x| x == row)?;
        let c = self.col_ids.iter().position(|x| x == col)?;
        self.values[r][c]
    }

    /// Row index holding the best AUROC of column `c`, if any cell is present.
    /// Ties resolve to the first row.
    pub fn column_argmax(&self, c: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (r, row) in self.values.iter().enumerate() {
            if let Some(v) = row[c] {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((r, v));
                }
            }
        }
        best.map(|(r, _)| r)
    }
}

/// Derives an independent seed for job `index` of a seeded experiment.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Builds the cross-region AUROC matrix.
///
/// Each region is split on its own with `split_spec`, re-seeded per region
/// with [`derive_seed`]. The ALL model trains on the union of every region's
/// train side.
pub fn cross_region_matrix(
    corpus: &Corpus,
    split_spec: &SplitSpec,
    config: &TrainConfig,
) -> Result<AurocMatrix, EvalError> {
    let region_ids = corpus.region_ids();
    if region_ids.is_empty() {
        return Err(EvalError::NoRegions);
    }
    let mut train_sets = Vec::with_capacity(region_ids.len() + 1);
    let mut test_sets = Vec::with_capacity(region_ids.len());
    let mut all_train = TrainSet::new(corpus.feature_count());
    for (i, region) in region_ids.iter().enumerate() {
        let sub = corpus.region(region);
        let spec = SplitSpec {
            seed: derive_seed(split_spec.seed, i as u64),
            ..*split_spec
        };
        let sides = split(&sub, &spec)?.sides(&sub);
        let train_set = TrainSet::from_corpus_side(&sub, &sides, Side::Train);
        for (row, label) in train_set.rows() {
            all_train.push(row, label)?;
        }
        train_sets.push(train_set);
        test_sets.push(TrainSet::from_corpus_side(&sub, &sides, Side::Test));
    }
    train_sets.push(all_train);

    let models = par::map(&train_sets, |set| match train(set, config) {
        Ok(m) => Ok(Some(m)),
        Err(GbdtError::EmptyTrainSet) => Ok(None),
        Err(e) => Err(e),
    });
    let models = models.into_iter().collect::<Result<Vec<_>, _>>()?;
    for (row, model) in region_ids.iter().chain([&ALL_ROW.to_owned()]).zip(&models) {
        if model.is_none() {
            log::warn!("region {row}: empty train split, row left missing");
        }
    }

    let cols = test_sets.len();
    let cells = par::map_range(models.len() * cols, |job| {
        let (r, c) = (job / cols, job % cols);
        let model = models[r].as_ref()?;
        roc(&score_set(model, &test_sets[c])).ok().map(|curve| curve.auroc)
    });
    let values = cells.chunks(cols).map(<[Option<f64>]>::to_vec).collect();
    let mut row_ids = region_ids.clone();
    row_ids.push(ALL_ROW.to_owned());
    Ok(AurocMatrix {
        row_ids,
        col_ids: region_ids,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub region_id: String,
    pub auroc_same: f64,
    pub auroc_all: f64,
    /// `100 * (same - all) / all`.
    pub improvement_percent: f64,
    /// `same - all`, in AUROC units.
    pub absolute_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImprovementTable {
    pub rows: Vec<ImprovementRow>,
    /// Regions skipped because a diagonal or ALL cell is missing.
    pub omitted: Vec<String>,
}

/// Same-region model versus the ALL model, per test region.
pub fn improvement_table(matrix: &AurocMatrix) -> ImprovementTable {
    let mut table = ImprovementTable::default();
    for col in &matrix.col_ids {
        match (matrix.get(col, col), matrix.get(ALL_ROW, col)) {
            (Some(same), Some(all)) if all > 0.0 => table.rows.push(ImprovementRow {
                region_id: col.clone(),
                auroc_same: same,
                auroc_all: all,
                improvement_percent: 100.0 * (same - all) / all,
                absolute_difference: same - all,
            }),
            _ => {
                log::warn!("region {col}: missing diagonal or ALL cell, omitted from improvement table");
                table.omitted.push(col.clone());
            }
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialityEntry {
    pub spec: SplitSpec,
    pub train_soundings: usize,
    pub test_soundings: usize,
    pub roc: RocCurve,
}

/// Trains on each strategy's train side and evaluates ROC on its test side.
pub fn sequentiality_report(
    corpus: &Corpus,
    config: &TrainConfig,
    strategies: &[SplitSpec],
) -> Result<Vec<SequentialityEntry>, EvalError> {
    strategies
        .iter()
        .map(|spec| {
            let sides = split(corpus, spec)?.sides(corpus);
            let train_set = TrainSet::from_corpus_side(corpus, &sides, Side::Train);
            let test_set = TrainSet::from_corpus_side(corpus, &sides, Side::Test);
            let model = train(&train_set, config)?;
            let curve = roc(&score_set(&model, &test_set))?;
            log::info!("{}: test AUROC {:.4}", spec.strategy, curve.auroc);
            Ok(SequentialityEntry {
                spec: *spec,
                train_soundings: train_set.len(),
                test_soundings: test_set.len(),
                roc: curve,
            })
        })
        .collect()
}
