//! Seeded synthetic corpora.
//!
//! Each cruise follows a smooth random-walk track over a shared synthetic
//! seafloor. Labels come from a two-state Markov chain, so BAD soundings
//! arrive in long runs. BAD depths are corrupted by a region-specific
//! distribution (`noise_scale`, `bad_bias`), which makes models trained on
//! one region transfer poorly to another.
//!
//! Every cruise draws from its own ChaCha stream selected by
//! `(region index, cruise index)`, so output does not depend on scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Cruise, Label, Sounding, FEATURE_COUNT};
use crate::par;

/// Standard deviation of GOOD depth errors, meters.
pub const GOOD_NOISE_M: f64 = 5.0;
/// Nominal time between soundings, seconds.
pub const SAMPLE_INTERVAL_S: f64 = 10.0;
/// Along-track step per sounding, degrees.
pub const TRACK_STEP_DEG: f64 = 0.0005;
/// Half-width of the rolling median window (window = 21).
pub const MEDIAN_HALF_WINDOW: usize = 10;

const EPOCH_START: f64 = 1_450_000_000.0;
const REGION_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub region_count: usize,
    pub cruises_per_region: usize,
    pub cruise_length: usize,
    pub bad_fraction_per_region: Vec<f64>,
    pub mean_bad_run_length: f64,
    pub noise_scale_per_region: Vec<f64>,
    /// Mean of BAD depth errors in units of `noise_scale * GOOD_NOISE_M`.
    /// Defaults to alternating `+1, -1, +1, ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bad_bias_per_region: Option<Vec<f64>>,
    pub seed: u64,
}

impl GenSpec {
    /// A single-region spec with default corruption.
    pub fn single_region(
        cruises: usize,
        cruise_length: usize,
        bad_fraction: f64,
        mean_bad_run_length: f64,
        seed: u64,
    ) -> Self {
        Self {
            region_count: 1,
            cruises_per_region: cruises,
            cruise_length,
            bad_fraction_per_region: vec![bad_fraction],
            mean_bad_run_length,
            noise_scale_per_region: vec![1.0],
            bad_bias_per_region: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let err = |m: String| Err(CorpusError::Spec(m));
        if self.region_count == 0 || self.cruises_per_region == 0 || self.cruise_length == 0 {
            return err("region_count, cruises_per_region and cruise_length must be >= 1".into());
        }
        let n = self.region_count;
        if self.bad_fraction_per_region.len() != n || self.noise_scale_per_region.len() != n {
            return err(format!("per-region lists must have length {n}"));
        }
        if self.bad_bias_per_region.as_ref().is_some_and(|b| b.len() != n) {
            return err(format!("bad_bias_per_region must have length {n}"));
        }
        if let Some(f) = self
            .bad_fraction_per_region
            .iter()
            .find(|f| !(0.0..=1.0).contains(*f))
        {
            return err(format!("bad fraction {f} outside [0, 1]"));
        }
        if let Some(s) = self
            .noise_scale_per_region
            .iter()
            .find(|s| !(s.is_finite() && **s > 0.0))
        {
            return err(format!("noise scale {s} must be positive"));
        }
        if self
            .bad_bias_per_region
            .iter()
            .flatten()
            .any(|b| !b.is_finite())
        {
            return err("bad bias must be finite".into());
        }
        if !(self.mean_bad_run_length.is_finite() && self.mean_bad_run_length >= 1.0) {
            return err(format!(
                "mean_bad_run_length {} must be >= 1",
                self.mean_bad_run_length
            ));
        }
        Ok(())
    }

    pub fn bad_bias(&self, region: usize) -> f64 {
        match &self.bad_bias_per_region {
            Some(b) => b[region],
            None if region.is_multiple_of(2) => 1.0,
            None => -1.0,
        }
    }

    /// Markov transition probabilities `(P(G -> B), P(B -> G))`.
    pub fn transition_probabilities(&self, region: usize) -> (f64, f64) {
        let pi = self.bad_fraction_per_region[region];
        if pi >= 1.0 {
            return (1.0, 0.0);
        }
        let leave_bad = 1.0 / self.mean_bad_run_length;
        ((pi / (1.0 - pi) * leave_bad).min(1.0), leave_bad)
    }
}

pub fn region_id(region: usize) -> String {
    format!("R{region:02}")
}

pub fn cruise_id(region: usize, cruise: usize) -> String {
    format!("r{region:02}-c{cruise:04}")
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Smooth synthetic seafloor shared by all regions of a corpus.
#[derive(Debug, Clone, Copy)]
struct Seafloor {
    phases: [f64; 3],
}

impl Seafloor {
    fn new(seed: u64) -> Self {
        let mut rng = stream_rng(seed, REGION_STREAM - 1);
        let mut phase = || rng.random::<f64>() * std::f64::consts::TAU;
        Self {
            phases: [phase(), phase(), phase()],
        }
    }

    fn depth(&self, lat: f64, lon: f64) -> f64 {
        let [a, b, c] = self.phases;
        4000.0
            + 1500.0 * (0.3 * lat + a).sin() * (0.25 * lon + b).cos()
            + 300.0 * (1.7 * lat + 1.3 * lon + c).sin()
    }
}

/// Per-region `(bad, total)` sounding counts.
pub type RegionTally = BTreeMap<String, (usize, usize)>;

pub fn generate_corpus(spec: &GenSpec) -> Result<Corpus, CorpusError> {
    generate_with_tally(spec).map(|(corpus, _)| corpus)
}

/// Generates a corpus together with the generator's own per-region
/// `(bad, total)` counts, tallied while labels are drawn.
pub fn generate_with_tally(
    spec: &GenSpec,
) -> Result<(Corpus, RegionTally), CorpusError> {
    spec.validate()?;
    let floor = Seafloor::new(spec.seed);
    let jobs = spec.region_count * spec.cruises_per_region;
    let generated = par::map_range(jobs, |job| {
        let region = job / spec.cruises_per_region;
        let cruise = job % spec.cruises_per_region;
        generate_cruise(spec, &floor, region, cruise)
    });

    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut cruises = Vec::with_capacity(jobs);
    for (cruise, bad) in generated {
        let entry = tally.entry(cruise.region_id.clone()).or_default();
        entry.0 += bad;
        entry.1 += cruise.len();
        cruises.push(cruise);
    }
    cruises.sort_by(|a, b| a.cruise_id.cmp(&b.cruise_id));
    Ok((Corpus::new(FEATURE_COUNT, cruises)?, tally))
}

fn generate_cruise(spec: &GenSpec, floor: &Seafloor, region: usize, index: usize) -> (Cruise, usize) {
    let n = spec.cruise_length;
    let mut rng = stream_rng(spec.seed, ((region as u64) << 32) | index as u64);
    let (enter_bad, leave_bad) = spec.transition_probabilities(region);
    let pi = spec.bad_fraction_per_region[region];
    let bad_sigma = GOOD_NOISE_M * spec.noise_scale_per_region[region];
    let bad_mean = bad_sigma * spec.bad_bias(region);

    let mut lat = rng.random_range(-20.0..20.0);
    let mut lon = rng.random_range(-40.0..40.0);
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut time = EPOCH_START + rng.random_range(0.0..3.15e7);
    let mut bad = rng.random::<f64>() < pi;

    let mut track = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut depths = Vec::with_capacity(n);
    let mut floors = Vec::with_capacity(n);
    let mut bad_count = 0;
    for i in 0..n {
        if i > 0 {
            let flip: f64 = rng.random();
            bad = if bad { flip >= leave_bad } else { flip < enter_bad };
            heading += 0.05 * rng.sample::<f64, _>(StandardNormal);
            lat += TRACK_STEP_DEG * heading.cos();
            lon += TRACK_STEP_DEG * heading.sin();
            if lat.abs() > 80.0 {
                lat = lat.signum() * 160.0 - lat;
                heading = std::f64::consts::PI - heading;
            }
            if lon >= 180.0 {
                lon -= 360.0;
            } else if lon < -180.0 {
                lon += 360.0;
            }
            time += SAMPLE_INTERVAL_S + rng.random_range(0.0..0.5);
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        let error = if bad {
            bad_count += 1;
            bad_mean + bad_sigma * z
        } else {
            GOOD_NOISE_M * z
        };
        let seafloor = floor.depth(lat, lon);
        track.push((time, lat, lon));
        floors.push(seafloor);
        depths.push(seafloor + error);
        labels.push(if bad { Label::Bad } else { Label::Good });
    }

    let soundings = (0..n)
        .map(|i| {
            let (time, lat, lon) = track[i];
            let gradient = if n == 1 {
                0.0
            } else if i == 0 {
                depths[1] - depths[0]
            } else if i == n - 1 {
                depths[n - 1] - depths[n - 2]
            } else {
                (depths[i + 1] - depths[i - 1]) / 2.0
            };
            let lo = i.saturating_sub(MEDIAN_HALF_WINDOW);
            let hi = (i + MEDIAN_HALF_WINDOW).min(n - 1);
            let deviation = (depths[i] - median(&depths[lo..=hi])).abs();
            let time_of_day = time.rem_euclid(86_400.0) / 3600.0;
            Sounding {
                seq: i as u64,
                time,
                lat,
                lon,
                depth: depths[i],
                features: vec![depths[i] - floors[i], gradient, deviation, time_of_day, lat, lon],
                label: labels[i],
            }
        })
        .collect();
    (
        Cruise {
            cruise_id: cruise_id(region, index),
            region_id: region_id(region),
            soundings,
        },
        bad_count,
    )
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::region_stats;

    /// Lengths of BAD runs that start and end strictly inside a cruise.
    fn interior_bad_runs(corpus: &Corpus) -> Vec<usize> {
        let mut runs = Vec::new();
        for cruise in corpus.cruises() {
            let labels: Vec<bool> = cruise.soundings.iter().map(|s| s.label.is_bad()).collect();
            let mut i = 0;
            while i < labels.len() {
                let j = (i..labels.len()).find(|&j| labels[j] != labels[i]).unwrap_or(labels.len());
                if labels[i] && i > 0 && j < labels.len() {
                    runs.push(j - i);
                }
                i = j;
            }
        }
        runs
    }

    #[test]
    fn realized_bad_fraction_concentrates() {
        let spec = GenSpec::single_region(10, 10_000, 0.13, 10.0, 11);
        let corpus = generate_corpus(&spec).unwrap();
        let frac = region_stats(&corpus)[0].bad_fraction;
        assert!((0.11..=0.15).contains(&frac), "bad fraction {frac}");
    }

    #[test]
    fn mean_bad_run_length_matches() {
        let spec = GenSpec::single_region(20, 20_000, 0.1, 50.0, 5);
        let runs = interior_bad_runs(&generate_corpus(&spec).unwrap());
        assert!(runs.len() >= 200, "only {} runs", runs.len());
        let mean = runs.iter().sum::<usize>() as f64 / runs.len() as f64;
        assert!((40.0..=60.0).contains(&mean), "mean run {mean}");
    }

    #[test]
    fn same_spec_same_corpus() {
        let mut spec = GenSpec::single_region(3, 500, 0.05, 20.0, 99);
        spec.region_count = 2;
        spec.bad_fraction_per_region = vec![0.05, 0.1];
        spec.noise_scale_per_region = vec![1.0, 3.0];
        assert_eq!(generate_corpus(&spec).unwrap(), generate_corpus(&spec).unwrap());
        spec.seed += 1;
        let other = generate_corpus(&spec).unwrap();
        spec.seed -= 1;
        assert_ne!(generate_corpus(&spec).unwrap(), other);
    }

    #[test]
    fn stats_match_generator_tally() {
        let spec = GenSpec {
            region_count: 3,
            cruises_per_region: 4,
            cruise_length: 700,
            bad_fraction_per_region: vec![0.0001, 0.05, 0.1312],
            mean_bad_run_length: 15.0,
            noise_scale_per_region: vec![1.0, 2.0, 0.5],
            bad_bias_per_region: Some(vec![1.0, -1.0, 0.0]),
            seed: 3,
        };
        let (corpus, tally) = generate_with_tally(&spec).unwrap();
        let stats = region_stats(&corpus);
        assert_eq!(stats.len(), 3);
        let mut total_bad = 0;
        for r in &stats {
            let (bad, total) = tally[&r.region_id];
            assert_eq!((r.bad_count, r.total_count), (bad, total));
            assert!((r.bad_fraction - bad as f64 / total as f64).abs() < 1e-12);
            total_bad += bad;
        }
        let corpus_bad = corpus.iter().filter(|(_, s)| s.label.is_bad()).count();
        assert_eq!(total_bad, corpus_bad);
    }

    #[test]
    fn generated_cruises_satisfy_invariants() {
        let spec = GenSpec::single_region(2, 300, 0.2, 5.0, 1);
        let corpus = generate_corpus(&spec).unwrap();
        assert_eq!(corpus.cruises().len(), 2);
        for c in corpus.cruises() {
            assert_eq!(c.len(), 300);
            assert!(c.soundings.windows(2).all(|w| w[0].time <= w[1].time));
            for s in &c.soundings {
                assert_eq!(s.features.len(), FEATURE_COUNT);
                assert!((0.0..24.0).contains(&s.features[3]));
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let good = GenSpec::single_region(1, 10, 0.1, 5.0, 0);
        let mut s = good.clone();
        s.bad_fraction_per_region = vec![1.5];
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.noise_scale_per_region = vec![0.0];
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.region_count = 2;
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.mean_bad_run_length = 0.5;
        assert!(s.validate().is_err());
        let mut s = good;
        s.cruise_length = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn extreme_fractions() {
        let corpus = generate_corpus(&GenSpec::single_region(1, 200, 0.0, 5.0, 0)).unwrap();
        assert!(corpus.iter().all(|(_, s)| !s.label.is_bad()));
        let corpus = generate_corpus(&GenSpec::single_region(1, 200, 1.0, 5.0, 0)).unwrap();
        assert!(corpus.iter().all(|(_, s)| s.label.is_bad()));
    }

    #[test]
    fn single_sounding_cruise() {
        let corpus = generate_corpus(&GenSpec::single_region(1, 1, 0.5, 1.0, 0)).unwrap();
        let s = &corpus.cruises()[0].soundings[0];
        assert_eq!(s.features[1], 0.0);
        assert_eq!(s.features[2], 0.0);
    }
}
