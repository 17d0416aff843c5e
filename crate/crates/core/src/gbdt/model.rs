use super::loss::logistic;
use super::tree::{Node, Tree};
use super::GbdtError;

/// A trained forest. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    trees: Vec<Tree>,
    learning_rate: f64,
    base_score: f64,
    bin_edges: Vec<Vec<f64>>,
    norm_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub raw: f64,
    /// Probability of BAD, strictly inside (0, 1).
    pub prob_bad: f64,
    /// Confidence toward BAD in `[-1, 1]`.
    pub normalized_margin: f64,
}

impl Model {
    /// Assembles a model, checking that every split refers to a known feature
    /// and that its threshold is the corresponding bin edge.
    pub fn new(
        trees: Vec<Tree>,
        learning_rate: f64,
        base_score: f64,
        bin_edges: Vec<Vec<f64>>,
    ) -> Result<Self, GbdtError> {
        if !(learning_rate > 0.0 && learning_rate <= 1.0) || !base_score.is_finite() {
            return Err(GbdtError::InvalidTree(
                "learning rate must lie in (0, 1] and base score must be finite".into(),
            ));
        }
        for (t, tree) in trees.iter().enumerate() {
            for node in tree.nodes() {
                if let Node::Split {
                    feature,
                    bin,
                    threshold,
                    ..
                } = node
                {
                    let edge = bin_edges.get(*feature).and_then(|e| e.get(*bin));
                    if edge != Some(threshold) {
                        return Err(GbdtError::InvalidTree(format!(
                            "tree {t}: split on feature {feature} bin {bin} does not match bin edges"
                        )));
                    }
                }
            }
        }
        let norm_constant = trees
            .iter()
            .map(|t| (learning_rate * t.max_abs_leaf()).abs())
            .sum();
        Ok(Self {
            trees,
            learning_rate,
            base_score,
            bin_edges,
            norm_constant,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn bin_edges(&self) -> &[Vec<f64>] {
        &self.bin_edges
    }

    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    pub fn num_features(&self) -> usize {
        self.bin_edges.len()
    }

    /// `base_score + sum of shrunk tree outputs`, summed in tree order.
    pub fn raw(&self, features: &[f64]) -> Result<f64, GbdtError> {
        self.check_width(features)?;
        Ok(self
            .trees
            .iter()
            .fold(self.base_score, |acc, t| acc + self.learning_rate * t.predict(features)))
    }

    pub fn score(&self, features: &[f64]) -> Result<Score, GbdtError> {
        let raw = self.raw(features)?;
        let prob_bad = logistic(raw).clamp(f64::EPSILON, 1.0 - f64::EPSILON);
        let normalized_margin = if self.norm_constant > 0.0 {
            ((raw - self.base_score) / self.norm_constant).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        Ok(Score {
            raw,
            prob_bad,
            normalized_margin,
        })
    }

    fn check_width(&self, features: &[f64]) -> Result<(), GbdtError> {
        if features.len() != self.num_features() {
            return Err(GbdtError::FeatureMismatch {
                expected: self.num_features(),
                found: features.len(),
            });
        }
        Ok(())
    }
}
