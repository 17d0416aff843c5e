//! Subcommand implementations. Each reads its inputs, writes one output
//! file and logs the full configuration it ran with.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use bathyedit::corpus::{channel, generate_corpus, load_corpus, save_corpus, Corpus, GenSpec};
use bathyedit::eval::{
    cross_region_matrix, improvement_table, read_matrix, roc, sequentiality_report,
    write_improvement, write_matrix, write_roc, write_sequentiality_report,
};
use bathyedit::gbdt::{load_model, save_model, train, TrainSet};
use bathyedit::scores::{read_scores, score_corpus, write_scores};
use bathyedit::splitter::{split, split_stats};
use bathyedit::{Label, Side, SoundingKey, SplitResult, SplitSpec, Strategy, TrainConfig};

use crate::args::{SideArg, SplitArgs, TrainArgs};
use crate::error::CliError;

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

/// Writes `path` through a buffered writer, flushing before returning.
pub(crate) fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out)
        .and_then(|()| out.flush())
        .map_err(|e| CliError::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Corpus, CliError> {
    let corpus = load_corpus(path).map_err(|e| CliError::at(path, e))?;
    log::info!(
        "loaded {}: {} cruises, {} soundings",
        path.display(),
        corpus.cruises().len(),
        corpus.len()
    );
    Ok(corpus)
}

pub(crate) fn train_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => read_json(path)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.num_rounds {
        config.num_rounds = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.max_leaves {
        config.max_leaves = v;
    }
    if let Some(v) = args.min_samples_leaf {
        config.min_samples_leaf = v;
    }
    config.validate()?;
    log::info!("train config: {}", json(&config));
    Ok(config)
}

fn split_spec(args: &SplitArgs) -> Result<SplitSpec, CliError> {
    let spec = args.spec();
    spec.validate()?;
    log::info!("split spec: {} (seed {})", json(&spec), spec.seed);
    Ok(spec)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("configs serialize")
}

pub fn generate(spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let spec: GenSpec = read_json(spec_path)?;
    spec.validate()?;
    log::info!("generator spec: {} (seed {})", json(&spec), spec.seed);
    let corpus = generate_corpus(&spec)?;
    save_corpus(&corpus, out).map_err(|e| CliError::at(out, e))?;
    log::info!("{} soundings in {} cruises", corpus.len(), corpus.cruises().len());
    Ok(())
}

pub fn split_cmd(corpus_path: &Path, args: &SplitArgs, out: &Path) -> Result<(), CliError> {
    let spec = split_spec(args)?;
    let corpus = load(corpus_path)?;
    let result = split(&corpus, &spec)?;
    let stats = split_stats(&result);
    log::info!(
        "{} train / {} test soundings, realized test fraction {:.4}",
        stats.train_soundings,
        stats.test_soundings,
        stats.realized_test_fraction
    );
    result.save(out).map_err(|e| CliError::at(out, e))
}

fn load_split(path: &Path, corpus: &Corpus) -> Result<SplitResult, CliError> {
    SplitResult::load(path, corpus).map_err(|e| CliError::at(path, e))
}

pub fn train_cmd(corpus_path: &Path, split_path: &Path, args: &TrainArgs, out: &Path) -> Result<(), CliError> {
    let config = train_config(args)?;
    let corpus = load(corpus_path)?;
    let sides = load_split(split_path, &corpus)?.sides(&corpus);
    let set = TrainSet::from_corpus_side(&corpus, &sides, Side::Train);
    log::info!("training on {} soundings", set.len());
    let model = train(&set, &config)?;
    log::info!("{} trees, norm constant {}", model.trees().len(), model.norm_constant());
    save_model(&model, out).map_err(|e| CliError::at(out, e))
}

pub fn score(model_path: &Path, corpus_path: &Path, out: &Path) -> Result<(), CliError> {
    let model = load_model(model_path).map_err(|e| CliError::at(model_path, e))?;
    let corpus = load(corpus_path)?;
    let scored = score_corpus(&model, &corpus)?;
    write_file(out, |w| write_scores(&scored, w))
}

pub fn roc_cmd(
    scores_path: &Path,
    corpus_path: &Path,
    split_path: Option<&Path>,
    side: SideArg,
    out: &Path,
) -> Result<(), CliError> {
    let corpus = load(corpus_path)?;
    let scores = read_scores(open(scores_path)?).map_err(|e| CliError::at(scores_path, e))?;
    let labels: std::collections::HashMap<SoundingKey, Label> =
        corpus.iter().map(|(k, s)| (k, s.label)).collect();
    let keep: Option<std::collections::HashSet<SoundingKey>> = match split_path {
        Some(p) => Some(load_split(p, &corpus)?.keys(side.into()).collect()),
        None => None,
    };
    let mut pairs = Vec::with_capacity(scores.len());
    for (key, score) in scores {
        let label = *labels.get(&key).ok_or_else(|| {
            CliError::Malformed(format!("{}: {key} is not in the corpus", scores_path.display()))
        })?;
        if keep.as_ref().is_none_or(|k| k.contains(&key)) {
            pairs.push((score.prob_bad, label));
        }
    }
    let curve = roc(&pairs)?;
    log::info!(
        "AUROC {} over {} BAD and {} GOOD soundings",
        curve.auroc,
        curve.positives,
        curve.negatives
    );
    println!("auroc={}", curve.auroc);
    write_file(out, |w| write_roc(&curve, w))
}

pub fn matrix(corpus_path: &Path, split: &SplitArgs, train: &TrainArgs, out: &Path) -> Result<(), CliError> {
    let spec = split_spec(split)?;
    let config = train_config(train)?;
    let corpus = load(corpus_path)?;
    let m = cross_region_matrix(&corpus, &spec, &config)?;
    write_file(out, |w| write_matrix(&m, w))
}

pub fn improvement(matrix_path: &Path, out: &Path) -> Result<(), CliError> {
    let m = read_matrix(open(matrix_path)?).map_err(|e| CliError::at(matrix_path, e))?;
    let table = improvement_table(&m);
    for r in &table.rows {
        log::info!("{}: {:+.2}% ({:+.4})", r.region_id, r.improvement_percent, r.absolute_difference);
    }
    write_file(out, |w| write_improvement(&table, w))
}

#[allow(clippy::too_many_arguments)]
pub fn seq_report(
    corpus_path: &Path,
    chunk_length: usize,
    test_fraction: f64,
    seed: u64,
    ablate_proxies: bool,
    train: &TrainArgs,
    out: &Path,
) -> Result<(), CliError> {
    let config = train_config(train)?;
    let strategies = [
        Strategy::PerExample,
        Strategy::Chunk { length: chunk_length },
        Strategy::PerCruise,
    ]
    .map(|s| SplitSpec::new(s, test_fraction, seed));
    for s in &strategies {
        s.validate()?;
    }
    log::info!(
        "strategies: {} (seed {seed}, ablate_proxies {ablate_proxies})",
        json(&strategies)
    );
    let mut corpus = load(corpus_path)?;
    if ablate_proxies {
        corpus = corpus.with_zeroed_channels(&channel::PROXIES);
    }
    let report = sequentiality_report(&corpus, &config, &strategies)?;
    write_file(out, |w| write_sequentiality_report(&report, w))
}
