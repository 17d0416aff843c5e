//! Leaf-wise histogram tree growth.
//!
//! Histograms are accumulated per feature over fixed-size row blocks and
//! reduced in block order, so the floating-point sums do not depend on the
//! number of threads. The larger child of every split takes its histogram by
//! subtraction from the parent.
//!
//! Leaf values are the Newton steps `-G / (H + lambda)`. When a round's full
//! step would raise the mean training loss, its leaf values are halved until
//! it does not, so the training loss never increases from round to round.

use super::bins::{bin_matrix, build_bins};
use super::loss::{grad_hess, logistic, mean_logistic_loss};
use super::model::Model;
use super::tree::{Node, Tree};
use super::{GbdtError, TrainConfig};
use crate::corpus::{Corpus, Label};
use crate::par;
use crate::splitter::Side;

const ROW_BLOCK: usize = 8192;
const MAX_BASE_SCORE: f64 = 15.0;
const PROB_FLOOR: f64 = 1e-15;
/// A full Newton leaf step can overshoot when a leaf holds saturated rows.
/// Such a round is retried with the leaf values halved, at most this often.
const MAX_HALVINGS: i32 = 40;

/// Row-major feature matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSet {
    num_features: usize,
    values: Vec<f64>,
    labels: Vec<Label>,
}

impl TrainSet {
    pub fn new(num_features: usize) -> Self {
        Self {
            num_features,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, features: &[f64], label: Label) -> Result<(), GbdtError> {
        if features.len() != self.num_features {
            return Err(GbdtError::FeatureMismatch {
                expected: self.num_features,
                found: features.len(),
            });
        }
        self.values.extend_from_slice(features);
        self.labels.push(label);
        Ok(())
    }

    pub fn from_rows<I>(num_features: usize, rows: I) -> Result<Self, GbdtError>
    where
        I: IntoIterator<Item = (Vec<f64>, Label)>,
    {
        let mut set = Self::new(num_features);
        for (features, label) in rows {
            set.push(&features, label)?;
        }
        Ok(set)
    }

    /// Every sounding of the corpus.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut set = Self::new(corpus.feature_count());
        for (_, s) in corpus.iter() {
            set.values.extend_from_slice(&s.features);
            set.labels.push(s.label);
        }
        set
    }

    /// Soundings assigned to `side` by a split.
    pub fn from_corpus_side(corpus: &Corpus, sides: &[Vec<Side>], side: Side) -> Self {
        let mut set = Self::new(corpus.feature_count());
        for (cruise, cruise_sides) in corpus.cruises().iter().zip(sides) {
            for (s, _) in cruise
                .soundings
                .iter()
                .zip(cruise_sides)
                .filter(|(_, &sd)| sd == side)
            {
                set.values.extend_from_slice(&s.features);
                set.labels.push(s.label);
            }
        }
        set
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], Label)> + '_ {
        (0..self.len()).map(move |i| (self.row(i), self.labels[i]))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BinStat {
    g: f64,
    h: f64,
    n: u32,
}

type Histogram = Vec<Vec<BinStat>>;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    bin: usize,
}

#[derive(Debug)]
struct LeafState {
    start: usize,
    end: usize,
    g: f64,
    h: f64,
    hist: Histogram,
    best: Option<Candidate>,
    node: usize,
    order: usize,
}

struct Grower<'a> {
    bins: &'a [Vec<u8>],
    edges: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a TrainConfig,
}

fn score_term(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

impl Grower<'_> {
    fn histogram(&self, rows: &[u32]) -> Histogram {
        let features = self.bins.len();
        let blocks = rows.len().div_ceil(ROW_BLOCK).max(1);
        let partials = par::map_range(features * blocks, |job| {
            let (f, b) = (job / blocks, job % blocks);
            let column = &self.bins[f];
            let mut hist = vec![BinStat::default(); self.edges[f].len() + 1];
            let lo = (b * ROW_BLOCK).min(rows.len());
            let hi = ((b + 1) * ROW_BLOCK).min(rows.len());
            for &r in &rows[lo..hi] {
                let r = r as usize;
                let cell = &mut hist[column[r] as usize];
                cell.g += self.grad[r];
                cell.h += self.hess[r];
                cell.n += 1;
            }
            hist
        });
        let mut partials = partials.into_iter();
        (0..features)
            .map(|_| {
                let mut acc = partials.next().expect("one partial per block");
                for part in partials.by_ref().take(blocks - 1) {
                    for (a, p) in acc.iter_mut().zip(part) {
                        a.g += p.g;
                        a.h += p.h;
                        a.n += p.n;
                    }
                }
                acc
            })
            .collect()
    }

    fn best_split(&self, hist: &Histogram, g: f64, h: f64, n: usize) -> Option<Candidate> {
        let lambda = self.config.lambda_l2;
        let min_leaf = self.config.min_samples_leaf;
        let parent = score_term(g, h, lambda);
        let mut best: Option<Candidate> = None;
        for (feature, bins) in hist.iter().enumerate() {
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            for (bin, stat) in bins.iter().enumerate().take(bins.len().saturating_sub(1)) {
                gl += stat.g;
                hl += stat.h;
                nl += stat.n as usize;
                let nr = n - nl;
                if nl < min_leaf {
                    continue;
                }
                if nr < min_leaf {
                    break;
                }
                let gain = score_term(gl, hl, lambda) + score_term(g - gl, h - hl, lambda) - parent;
                if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate { gain, feature, bin });
                }
            }
        }
        best
    }

    fn leaf_sums(&self, rows: &[u32]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        })
    }

    /// Grows one tree over `indices` (reordered in place). Returns the tree
    /// and each leaf's row range with its unshrunk value, or `None` when the
    /// root admits no split.
    #[allow(clippy::type_complexity)]
    fn grow(&self, indices: &mut [u32]) -> Option<(Tree, Vec<(usize, usize, f64)>)> {
        let n = indices.len();
        let (g, h) = self.leaf_sums(indices);
        let hist = self.histogram(indices);
        let best = self.best_split(&hist, g, h, n);
        best?;

        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut leaves = vec![LeafState {
            start: 0,
            end: n,
            g,
            h,
            hist,
            best,
            node: 0,
            order: 0,
        }];
        let mut next_order = 1;
        let mut scratch: Vec<u32> = Vec::with_capacity(n);

        while leaves.len() < self.config.max_leaves {
            let Some(pick) = leaves
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.map(|b| (i, b.gain, l.order)))
                .reduce(|a, b| {
                    if b.1 > a.1 || (b.1 == a.1 && b.2 < a.2) {
                        b
                    } else {
                        a
                    }
                })
                .map(|(i, _, _)| i)
            else {
                break;
            };
            let parent = leaves.swap_remove(pick);
            let cand = parent.best.expect("picked leaf has a split");

            let column = &self.bins[cand.feature];
            let rows = &mut indices[parent.start..parent.end];
            scratch.clear();
            scratch.extend(rows.iter().copied().filter(|&r| column[r as usize] as usize <= cand.bin));
            let n_left = scratch.len();
            scratch.extend(rows.iter().copied().filter(|&r| column[r as usize] as usize > cand.bin));
            rows.copy_from_slice(&scratch);
            let mid = parent.start + n_left;

            let (left_rows, right_rows) = indices[parent.start..parent.end].split_at(n_left);
            let (gl, hl) = self.leaf_sums(left_rows);
            let (gr, hr) = self.leaf_sums(right_rows);
            let left_is_small = left_rows.len() <= right_rows.len();
            let small = self.histogram(if left_is_small { left_rows } else { right_rows });
            let large = subtract(&parent.hist, &small);
            let (hist_l, hist_r) = if left_is_small { (small, large) } else { (large, small) };

            let left_node = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[parent.node] = Node::Split {
                feature: cand.feature,
                bin: cand.bin,
                threshold: self.edges[cand.feature][cand.bin],
                left: left_node,
                right: left_node + 1,
            };
            let (best_l, best_r) = (
                self.best_split(&hist_l, gl, hl, left_rows.len()),
                self.best_split(&hist_r, gr, hr, right_rows.len()),
            );
            leaves.push(LeafState {
                start: parent.start,
                end: mid,
                g: gl,
                h: hl,
                hist: hist_l,
                best: best_l,
                node: left_node,
                order: next_order,
            });
            leaves.push(LeafState {
                start: mid,
                end: parent.end,
                g: gr,
                h: hr,
                hist: hist_r,
                best: best_r,
                node: left_node + 1,
                order: next_order + 1,
            });
            next_order += 2;
        }

        leaves.sort_by_key(|l| l.order);
        let lambda = self.config.lambda_l2;
        let mut ranges = Vec::with_capacity(leaves.len());
        for leaf in &leaves {
            let d = leaf.h + lambda;
            let value = if d > 0.0 { -leaf.g / d } else { 0.0 };
            nodes[leaf.node] = Node::Leaf { value };
            ranges.push((leaf.start, leaf.end, value));
        }
        let tree = Tree::new(nodes).expect("grown trees are well formed");
        Some((tree, ranges))
    }
}

fn subtract(parent: &Histogram, child: &Histogram) -> Histogram {
    parent
        .iter()
        .zip(child)
        .map(|(p, c)| {
            p.iter()
                .zip(c)
                .map(|(p, c)| {
                    let n = p.n - c.n;
                    if n == 0 {
                        BinStat::default()
                    } else {
                        BinStat {
                            g: p.g - c.g,
                            h: p.h - c.h,
                            n,
                        }
                    }
                })
                .collect()
        })
        .collect()
}

fn base_score(labels: &[Label]) -> f64 {
    let bad = labels.iter().filter(|l| l.is_bad()).count();
    let p = bad as f64 / labels.len() as f64;
    if bad == 0 {
        -MAX_BASE_SCORE
    } else if bad == labels.len() {
        MAX_BASE_SCORE
    } else {
        (p / (1.0 - p)).ln().clamp(-MAX_BASE_SCORE, MAX_BASE_SCORE)
    }
}

pub fn train(set: &TrainSet, config: &TrainConfig) -> Result<Model, GbdtError> {
    train_with_history(set, config).map(|(model, _)| model)
}

/// Trains and also returns the mean training logistic loss before the first
/// tree and after every tree.
pub fn train_with_history(
    set: &TrainSet,
    config: &TrainConfig,
) -> Result<(Model, Vec<f64>), GbdtError> {
    config.validate()?;
    if set.is_empty() {
        return Err(GbdtError::EmptyTrainSet);
    }
    let labels = set.labels();
    let base = base_score(labels);
    let edges = build_bins(set, config.num_bins);
    let n = set.len();
    let mut raw = vec![base; n];
    let mut history = vec![mean_logistic_loss(&raw, labels)];
    let mut trees = Vec::new();

    let single_class = labels.iter().all(|&l| l == labels[0]);
    if !single_class {
        let bins = bin_matrix(set, &edges);
        let mut indices: Vec<u32> = (0..n as u32).collect();
        for _ in 0..config.num_rounds {
            let gh = par::map_range(n, |i| {
                let p = logistic(raw[i]).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                grad_hess(p, labels[i])
            });
            let (grad, hess): (Vec<f64>, Vec<f64>) = gh.into_iter().unzip();
            let grower = Grower {
                bins: &bins,
                edges: &edges,
                grad: &grad,
                hess: &hess,
                config,
            };
            let Some((tree, ranges)) = grower.grow(&mut indices) else {
                break;
            };
            let previous = *history.last().expect("history starts with the prior loss");
            let mut accepted = None;
            for halvings in 0..=MAX_HALVINGS {
                let factor = 0.5f64.powi(halvings);
                let mut candidate = raw.clone();
                for &(start, end, value) in &ranges {
                    let step = config.learning_rate * (value * factor);
                    for &r in &indices[start..end] {
                        candidate[r as usize] += step;
                    }
                }
                let loss = mean_logistic_loss(&candidate, labels);
                if loss <= previous {
                    if halvings > 0 {
                        log::debug!("round {}: leaf step halved {halvings} times", trees.len());
                    }
                    accepted = Some((factor, candidate, loss));
                    break;
                }
            }
            let Some((factor, candidate, loss)) = accepted else {
                log::debug!("round {}: no step lowers the training loss, stopping", trees.len());
                break;
            };
            raw = candidate;
            trees.push(if factor == 1.0 { tree } else { tree.scaled(factor) });
            history.push(loss);
        }
    }
    Ok((Model::new(trees, config.learning_rate, base, edges)?, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::roc;

    fn set(rows: &[(&[f64], Label)]) -> TrainSet {
        TrainSet::from_rows(rows[0].0.len(), rows.iter().map(|(f, l)| (f.to_vec(), *l))).unwrap()
    }

    fn training_auroc(model: &Model, set: &TrainSet) -> f64 {
        let scores: Vec<(f64, Label)> = set
            .rows()
            .map(|(f, l)| (model.score(f).unwrap().raw, l))
            .collect();
        roc(&scores).unwrap().auroc
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            num_rounds: 1,
            max_leaves: 2,
            min_samples_leaf: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_single_stump() {
        use Label::*;
        let s = set(&[(&[0.0], Good), (&[1.0], Good), (&[2.0], Bad), (&[3.0], Bad)]);
        let model = train(&s, &small_config()).unwrap();
        assert_eq!(model.trees().len(), 1);
        assert_eq!(training_auroc(&model, &s), 1.0);
    }

    #[test]
    fn all_good_is_prior_only() {
        let s = set(&[(&[0.0], Label::Good), (&[1.0], Label::Good), (&[2.0], Label::Good)]);
        let model = train(&s, &TrainConfig::default()).unwrap();
        assert!(model.trees().is_empty());
        assert_eq!(model.base_score(), -15.0);
        let raws: Vec<f64> = s.rows().map(|(f, _)| model.score(f).unwrap().raw).collect();
        assert!(raws.iter().all(|&r| r == raws[0]));
    }

    #[test]
    fn xor_with_four_leaves() {
        use Label::*;
        let s = set(&[
            (&[0.0, 0.0], Good),
            (&[0.0, 1.0], Bad),
            (&[1.0, 0.0], Bad),
            (&[1.0, 1.0], Good),
            (&[0.0, 0.0], Good),
            (&[0.0, 1.0], Bad),
            (&[1.0, 0.0], Bad),
            (&[1.0, 1.0], Good),
        ]);
        // A 4-leaf tree can isolate all four cells, but the first split of
        // XOR has zero gain, so a slight imbalance is needed to start it.
        let mut s2 = s.clone();
        s2.push(&[0.0, 0.0], Good).unwrap();
        let config = TrainConfig {
            num_rounds: 5,
            max_leaves: 4,
            min_samples_leaf: 1,
            ..TrainConfig::default()
        };
        let model = train(&s2, &config).unwrap();
        assert_eq!(training_auroc(&model, &s2), 1.0);
        assert!(model.trees()[0].num_leaves() <= 4);
    }

    #[test]
    fn empty_set_and_bad_config() {
        assert!(matches!(
            train(&TrainSet::new(2), &TrainConfig::default()),
            Err(GbdtError::EmptyTrainSet)
        ));
        let s = set(&[(&[0.0], Label::Good)]);
        let config = TrainConfig {
            num_bins: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&s, &config), Err(GbdtError::InvalidConfig(_))));
    }

    #[test]
    fn min_samples_leaf_blocks_split() {
        use Label::*;
        let s = set(&[(&[0.0], Good), (&[1.0], Bad)]);
        let config = TrainConfig {
            min_samples_leaf: 2,
            ..small_config()
        };
        let (model, history) = train_with_history(&s, &config).unwrap();
        assert!(model.trees().is_empty());
        assert_eq!(history.len(), 1);
    }

    #[test]
    fn overshooting_step_is_halved() {
        // Prior near 0.005; the x = 1 leaf is half BAD, so its Newton step
        // at the prior is about +100 while the loss minimum is near +5.
        let mut s = TrainSet::new(1);
        for _ in 0..990 {
            s.push(&[0.0], Label::Good).unwrap();
        }
        for i in 0..10 {
            s.push(&[1.0], if i % 2 == 0 { Label::Bad } else { Label::Good }).unwrap();
        }
        let config = TrainConfig {
            learning_rate: 1.0,
            lambda_l2: 0.0,
            ..small_config()
        };
        let (model, history) = train_with_history(&s, &config).unwrap();
        assert_eq!(model.trees().len(), 1);
        assert!(history[1] <= history[0]);
        let newton = {
            let p = 10.0 / 1000.0 * 0.5;
            -(10.0 * p - 5.0) / (10.0 * p * (1.0 - p))
        };
        let leaf = model.trees()[0].predict(&[1.0]);
        assert!(leaf > 0.0 && leaf < newton / 2.0, "leaf {leaf}, newton {newton}");
    }

    proptest::proptest! {
        #[test]
        fn training_loss_never_increases(
            rows in proptest::collection::vec((0..6u8, 0..6u8, proptest::bool::ANY), 2..120),
            lr in 0.01..=1.0f64,
            lambda in 0.0..3.0f64,
        ) {
            let s = TrainSet::from_rows(
                2,
                rows.iter().map(|&(a, b, bad)| (vec![a as f64, b as f64], if bad { Label::Bad } else { Label::Good })),
            )
            .unwrap();
            let config = TrainConfig {
                num_rounds: 15,
                learning_rate: lr,
                lambda_l2: lambda,
                max_leaves: 6,
                min_samples_leaf: 1,
                ..TrainConfig::default()
            };
            let (_, history) = train_with_history(&s, &config).unwrap();
            for w in history.windows(2) {
                proptest::prop_assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn push_checks_width() {
        let mut s = TrainSet::new(2);
        assert!(s.push(&[1.0], Label::Good).is_err());
    }
}
