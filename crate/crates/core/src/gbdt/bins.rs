//! Quantile binning.
//!
//! Each feature gets a strictly increasing list of edges. A value `x` falls
//! in bin `#{e in edges : e < x}`, so `bin(x) <= b` exactly when
//! `x <= edges[b]`; trees trained on bins route raw values with the same
//! comparison.

use super::train::TrainSet;
use crate::par;

pub fn bin_index(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e < x)
}

/// Edge between two adjacent distinct values, kept strictly below `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) * 0.5;
    if m >= lo && m < hi {
        m
    } else {
        lo
    }
}

/// Quantile edges for one feature, producing at most `num_bins` non-empty
/// bins. Consumes and sorts `values`.
pub fn feature_edges(mut values: Vec<f64>, num_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in values.iter().copied() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= 1 {
        return Vec::new();
    }
    if distinct.len() <= num_bins {
        return distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
    }

    let n = values.len();
    let mut edges = Vec::with_capacity(num_bins - 1);
    let mut remaining_bins = num_bins;
    let mut bin_start = 0usize;
    let mut cum = 0usize;
    for i in 0..distinct.len() - 1 {
        cum += distinct[i].1;
        let target = (n - bin_start) as f64 / remaining_bins as f64;
        if remaining_bins > 1 && (cum - bin_start) as f64 >= target {
            edges.push(midpoint(distinct[i].0, distinct[i + 1].0));
            remaining_bins -= 1;
            bin_start = cum;
        }
    }
    edges
}

/// Per-feature bin edges over a training set.
pub fn build_bins(set: &TrainSet, num_bins: usize) -> Vec<Vec<f64>> {
    par::map_range(set.num_features(), |f| {
        feature_edges((0..set.len()).map(|i| set.row(i)[f]).collect(), num_bins)
    })
}

/// Column-major bin indices.
pub(crate) fn bin_matrix(set: &TrainSet, edges: &[Vec<f64>]) -> Vec<Vec<u8>> {
    par::map_range(set.num_features(), |f| {
        (0..set.len())
            .map(|i| bin_index(&edges[f], set.row(i)[f]) as u8)
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(values: &[f64], edges: &[f64]) -> Vec<usize> {
        let mut c = vec![0; edges.len() + 1];
        for &v in values {
            c[bin_index(edges, v)] += 1;
        }
        c
    }

    #[test]
    fn constant_feature_single_bin() {
        assert!(feature_edges(vec![3.0; 50], 255).is_empty());
    }

    #[test]
    fn equal_mass_quantiles() {
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        let edges = feature_edges(values.clone(), 4);
        // Sorted-rank oracle: bin k holds ranks [250k, 250(k+1)).
        assert_eq!(counts(&values, &edges), [250, 250, 250, 250]);
        for (k, e) in edges.iter().enumerate() {
            let upper = values[250 * (k + 1) - 1];
            let next = values[250 * (k + 1)];
            assert!(upper <= *e && *e < next);
        }
    }

    #[test]
    fn few_distinct_values_each_get_a_bin() {
        let edges = feature_edges(vec![0.0, 1.0, 1.0, 0.0, 5.0], 255);
        assert_eq!(edges, [0.5, 3.0]);
        assert_eq!(bin_index(&edges, 0.5), 0);
        assert_eq!(bin_index(&edges, 0.50001), 1);
    }

    #[test]
    fn adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let edges = feature_edges(vec![a, b], 4);
        assert_eq!(edges.len(), 1);
        assert_eq!(bin_index(&edges, a), 0);
        assert_eq!(bin_index(&edges, b), 1);
    }

    proptest! {
        #[test]
        fn bins_nonempty_and_bounded(
            values in prop::collection::vec(-1e3f64..1e3, 1..400),
            num_bins in 2usize..40,
        ) {
            let edges = feature_edges(values.clone(), num_bins);
            prop_assert!(edges.len() < num_bins);
            prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(counts(&values, &edges).iter().all(|&c| c > 0));
        }
    }
}
