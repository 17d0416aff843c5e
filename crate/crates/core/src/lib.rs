//! Computer-assisted editing toolkit for ship-track bathymetry soundings.
//!
//! The crate is organised around the editing pipeline:
//!
//! - [`corpus`]: the sounding data model, the CSV interchange format and a
//!   seeded synthetic generator with sequential label runs and
//!   region-specific corruption.
//! - [`splitter`]: train/test partitioning per example, per cruise, or per
//!   fixed-length chunk of a cruise.
//! - [`gbdt`]: histogram gradient-boosted trees with logistic loss and a
//!   normalized-margin confidence score.
//! - [`eval`]: ROC/AUROC, the cross-region AUROC matrix, the same-region
//!   improvement table and the split-strategy comparison.
//! - [`edit`]: rectangle-plus-threshold and polygon editing with an
//!   append-only, replayable edit log.
//!
//! Data-parallel loops run on rayon when the `parallel` feature (default) is
//! enabled and fall back to plain iterators otherwise. Every reduction has a
//! fixed order, so results are identical with and without the feature and for
//! any thread count.

pub mod corpus;
pub mod edit;
pub mod eval;
pub mod gbdt;
pub mod scores;
pub mod splitter;

mod fmt;
mod par;

pub use corpus::{Corpus, Cruise, GenSpec, Label, Region, Sounding, SoundingKey};
pub use gbdt::{Model, Score, TrainConfig};
pub use splitter::{Side, SplitResult, SplitSpec, Strategy};
