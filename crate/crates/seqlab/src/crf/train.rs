//! Training entry points: corpus encoding, maximum-likelihood fitting,
//! randomized hyperparameter search, and k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, EntityType};
use crate::features::FeatureAlphabet;

use super::objective::Objective;
use super::optimizer::{minimize, IterationRecord, OptimizerConfig};
use super::{CrfError, CrfModel, EncodedSentence, Featurizer, LabelAlphabet, Layout};

/// Hyperparameters and stopping rules for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// L1 (lasso) coefficient; `0` disables the orthant-wise machinery.
    pub c1: f64,
    /// L2 (ridge) coefficient.
    pub c2: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective decrease of an accepted step falls
    /// below this.
    pub tolerance: f64,
    /// L-BFGS memory: number of retained correction pairs.
    pub memory: usize,
    /// Features occurring fewer times than this are dropped from the
    /// alphabet.
    pub min_frequency: u32,
    /// Seed for everything stochastic downstream (fold assignment; search
    /// uses its own space seed).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c1: 0.0,
            c2: 1.0,
            max_iterations: 100,
            tolerance: 1e-7,
            memory: 6,
            min_frequency: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CrfError> {
        if !(self.c1 >= 0.0 && self.c1.is_finite()) {
            return Err(CrfError::InvalidConfig(format!(
                "c1 must be a non-negative finite number, got {}",
                self.c1
            )));
        }
        if !(self.c2 >= 0.0 && self.c2.is_finite()) {
            return Err(CrfError::InvalidConfig(format!(
                "c2 must be a non-negative finite number, got {}",
                self.c2
            )));
        }
        if self.max_iterations == 0 {
            return Err(CrfError::InvalidConfig(
                "max_iterations must be at least 1".to_string(),
            ));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(CrfError::InvalidConfig(format!(
                "tolerance must be a non-negative finite number, got {}",
                self.tolerance
            )));
        }
        if self.memory == 0 {
            return Err(CrfError::InvalidConfig(
                "lbfgs memory must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// A corpus encoded for training: sentences with gold label ids plus the
/// alphabets they are encoded against.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    pub sentences: Vec<EncodedSentence>,
    pub features: FeatureAlphabet,
    pub labels: LabelAlphabet,
    pub fingerprint: u64,
}

/// Builds alphabets from `corpus` (features in first-occurrence order with
/// the frequency cutoff, labels in canonical order) and encodes every
/// sentence with its gold labels.
pub fn encode_corpus(
    corpus: &Corpus,
    featurizer: &Featurizer,
    min_frequency: u32,
) -> Result<EncodedDataset, CrfError> {
    if corpus.is_empty() {
        return Err(CrfError::EmptyDataset);
    }
    let feature_sets: Vec<_> = corpus
        .sentences()
        .iter()
        .map(|s| featurizer.feature_strings(s))
        .collect();
    let features = FeatureAlphabet::build(&feature_sets, min_frequency)?;
    let labels = LabelAlphabet::from_observed(corpus);
    let sentences = corpus
        .sentences()
        .iter()
        .map(|s| featurizer.encode(s, &features, Some(&labels)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EncodedDataset {
        sentences,
        features,
        labels,
        fingerprint: featurizer.fingerprint(),
    })
}

/// A trained model plus its per-iteration training log.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: CrfModel,
    pub log: Vec<IterationRecord>,
}

/// Fits CRF weights on an encoded dataset: L-BFGS on `NLL + (c2/2)‖w‖²`,
/// switching to the orthant-wise variant when `c1 > 0`.
pub fn fit(dataset: &EncodedDataset, config: &TrainConfig) -> Result<TrainOutput, CrfError> {
    config.validate()?;
    if dataset.sentences.is_empty() {
        return Err(CrfError::EmptyDataset);
    }
    for sentence in &dataset.sentences {
        if sentence.labels().is_none() {
            return Err(CrfError::MissingLabels);
        }
        if sentence.fingerprint() != dataset.fingerprint {
            return Err(CrfError::FingerprintMismatch {
                model: dataset.fingerprint,
                input: sentence.fingerprint(),
            });
        }
    }
    let layout = Layout {
        num_features: dataset.features.len(),
        num_labels: dataset.labels.len(),
    };
    let objective = Objective::new(&dataset.sentences, layout, config.c2);
    let optimizer_config = OptimizerConfig {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
        memory: config.memory,
        l1: config.c1,
    };
    let (weights, log) = minimize(
        |x| objective.value_and_grad(x),
        objective.dim(),
        &optimizer_config,
    )?;
    let model = CrfModel::from_parts(
        dataset.labels.clone(),
        dataset.features.clone(),
        weights,
        dataset.fingerprint,
    )?;
    Ok(TrainOutput { model, log })
}

/// Encodes and fits in one step.
pub fn train(
    corpus: &Corpus,
    featurizer: &Featurizer,
    config: &TrainConfig,
) -> Result<TrainOutput, CrfError> {
    let dataset = encode_corpus(corpus, featurizer, config.min_frequency)?;
    fit(&dataset, config)
}

/// One training-log line per accepted step: `iter<TAB>objective<TAB>grad_norm`.
pub fn render_training_log(log: &[IterationRecord]) -> String {
    let mut out = String::new();
    for record in log {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            record.iteration, record.objective, record.grad_norm
        ));
    }
    out
}

/// Log-uniform sampling ranges for the regularizer search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub c1_range: (f64, f64),
    pub c2_range: (f64, f64),
    pub candidates: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            c1_range: (1e-3, 10.0),
            c2_range: (1e-3, 10.0),
            candidates: 100,
            seed: 0,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), CrfError> {
        for (name, (lo, hi)) in [("c1", self.c1_range), ("c2", self.c2_range)] {
            if !(lo > 0.0 && hi.is_finite() && lo < hi) {
                return Err(CrfError::InvalidConfig(format!(
                    "{name} range must satisfy 0 < lower < upper < inf, got ({lo}, {hi})"
                )));
            }
        }
        if self.candidates == 0 {
            return Err(CrfError::InvalidConfig(
                "search needs at least one candidate".to_string(),
            ));
        }
        Ok(())
    }
}

/// One search trial: the sampled coefficients and either a dev score or the
/// training error that failed the trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub c1: f64,
    pub c2: f64,
    pub dev_f1: Option<f64>,
    pub error: Option<String>,
}

/// The winning configuration and model, plus the full trial log in sampling
/// order.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub config: TrainConfig,
    pub model: CrfModel,
    pub dev_f1: f64,
    pub trial_index: usize,
    pub trials: Vec<Trial>,
}

fn macro_dev_f1(
    model: &CrfModel,
    featurizer: &Featurizer,
    dev: &Corpus,
) -> Result<f64, CrfError> {
    let pred = model.tag_corpus(featurizer, dev, false)?;
    let report = crate::eval::token_report(dev, &pred)
        .expect("predictions are shape-aligned with the dev corpus");
    Ok(report.macro_token_weighted)
}

/// Samples `(c1, c2)` pairs log-uniformly from the space, trains each
/// candidate on `train_set` (with `base`'s other settings), scores
/// support-weighted macro entity-type token F1 on `dev_set`, and returns
/// the best candidate. Failed trials are recorded and skipped; ties keep
/// the earliest trial.
pub fn random_search(
    train_set: &Corpus,
    dev_set: &Corpus,
    featurizer: &Featurizer,
    space: &SearchSpace,
    base: &TrainConfig,
) -> Result<SearchOutcome, CrfError> {
    space.validate()?;
    base.validate()?;
    if dev_set.is_empty() {
        return Err(CrfError::InvalidConfig("dev set is empty".to_string()));
    }

    // All candidates are drawn up front so the trial sequence depends only
    // on the space seed.
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    let draws: Vec<(f64, f64)> = (0..space.candidates)
        .map(|_| {
            let c1 = rng
                .gen_range(space.c1_range.0.ln()..space.c1_range.1.ln())
                .exp();
            let c2 = rng
                .gen_range(space.c2_range.0.ln()..space.c2_range.1.ln())
                .exp();
            (c1, c2)
        })
        .collect();

    // The encoding does not depend on (c1, c2); share it across trials.
    let dataset = encode_corpus(train_set, featurizer, base.min_frequency)?;

    let mut trials = Vec::with_capacity(space.candidates);
    let mut best: Option<(usize, f64, CrfModel, TrainConfig)> = None;
    for (index, (c1, c2)) in draws.into_iter().enumerate() {
        let config = TrainConfig { c1, c2, ..*base };
        match fit(&dataset, &config).and_then(|out| {
            macro_dev_f1(&out.model, featurizer, dev_set).map(|f1| (out.model, f1))
        }) {
            Ok((model, f1)) => {
                trials.push(Trial {
                    index,
                    c1,
                    c2,
                    dev_f1: Some(f1),
                    error: None,
                });
                if best.as_ref().is_none_or(|(_, b, _, _)| f1 > *b) {
                    best = Some((index, f1, model, config));
                }
            }
            Err(e) => trials.push(Trial {
                index,
                c1,
                c2,
                dev_f1: None,
                error: Some(e.to_string()),
            }),
        }
    }

    let Some((trial_index, dev_f1, model, config)) = best else {
        return Err(CrfError::SearchFailed(space.candidates));
    };
    Ok(SearchOutcome {
        config,
        model,
        dev_f1,
        trial_index,
        trials,
    })
}

/// Machine-readable search log: one `trial` line per candidate in sampling
/// order, then the `best` line.
pub fn render_search_log(outcome: &SearchOutcome) -> String {
    let mut out = String::new();
    for trial in &outcome.trials {
        match (&trial.dev_f1, &trial.error) {
            (Some(f1), _) => out.push_str(&format!(
                "trial\t{}\t{}\t{}\t{}\n",
                trial.index, trial.c1, trial.c2, f1
            )),
            (None, Some(e)) => out.push_str(&format!(
                "trial\t{}\t{}\t{}\tfailed: {}\n",
                trial.index, trial.c1, trial.c2, e
            )),
            (None, None) => unreachable!("trial has neither score nor error"),
        }
    }
    out.push_str(&format!(
        "best\t{}\t{}\t{}\t{}\n",
        outcome.trial_index, outcome.config.c1, outcome.config.c2, outcome.dev_f1
    ));
    out
}

/// The entity types reported by cross-validation; the miscellaneous type is
/// excluded from this summary like from the macro aggregates.
const CV_TYPES: [EntityType; 3] = [EntityType::Per, EntityType::Org, EntityType::Loc];

/// Per-entity-type cross-validation summary: one fold score per fold,
/// support-weighted token F1.
#[derive(Debug, Clone)]
pub struct CvTypeRow {
    pub entity_type: EntityType,
    pub fold_f1: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<CvTypeRow>,
    pub fold_sizes: Vec<usize>,
}

impl CvReport {
    /// Aligned table plus machine-readable `cv` / `cv_fold` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Cross-validation: k = {}, seed = {}, fold sizes {:?}\n",
            self.k, self.seed, self.fold_sizes
        ));
        out.push_str("Type    Mean F1   Std dev\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{:<7} {:>7.4}   {:>7.4}\n",
                row.entity_type.to_string(),
                row.mean,
                row.std_dev
            ));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "cv\t{}\t{}\t{}\n",
                row.entity_type, row.mean, row.std_dev
            ));
            for (fold, f1) in row.fold_f1.iter().enumerate() {
                out.push_str(&format!("cv_fold\t{}\t{fold}\t{f1}\n", row.entity_type));
            }
        }
        out
    }
}

/// k-fold cross-validation: sentences are shuffled by `config.seed`, cut
/// into k near-equal contiguous folds, and each fold is scored with a model
/// trained on the other k−1. Reports support-weighted token F1 mean and
/// sample standard deviation per entity type.
pub fn cross_validate(
    corpus: &Corpus,
    k: usize,
    featurizer: &Featurizer,
    config: &TrainConfig,
) -> Result<CvReport, CrfError> {
    config.validate()?;
    let n = corpus.len();
    if k < 2 {
        return Err(CrfError::InvalidConfig(format!(
            "cross-validation needs k >= 2, got {k}"
        )));
    }
    if k > n {
        return Err(CrfError::InvalidConfig(format!(
            "cross-validation needs at least k sentences, got k = {k} for {n}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);

    // Fold sizes differ by at most one; the first n mod k folds are larger.
    let base = n / k;
    let extra = n % k;
    let mut bounds = Vec::with_capacity(k + 1);
    let mut cursor = 0;
    bounds.push(0);
    for fold in 0..k {
        cursor += base + usize::from(fold < extra);
        bounds.push(cursor);
    }

    let mut fold_sizes = Vec::with_capacity(k);
    let mut per_type: Vec<Vec<f64>> = vec![Vec::with_capacity(k); CV_TYPES.len()];
    for fold in 0..k {
        let (start, end) = (bounds[fold], bounds[fold + 1]);
        fold_sizes.push(end - start);
        let held_out: Vec<_> = order[start..end]
            .iter()
            .map(|&i| corpus.sentences()[i].clone())
            .collect();
        let rest: Vec<_> = order[..start]
            .iter()
            .chain(&order[end..])
            .map(|&i| corpus.sentences()[i].clone())
            .collect();
        let train_corpus = Corpus::new(rest, format!("{}/cv-train{fold}", corpus.source_id()));
        let test_corpus = Corpus::new(
            held_out,
            format!("{}/cv-test{fold}", corpus.source_id()),
        );

        let out = train(&train_corpus, featurizer, config)?;
        let pred = out.model.tag_corpus(featurizer, &test_corpus, false)?;
        let report = crate::eval::token_report(&test_corpus, &pred)
            .expect("predictions are shape-aligned with the held-out fold");
        for (slot, entity_type) in per_type.iter_mut().zip(CV_TYPES) {
            let f1 = report
                .per_type_token_weighted
                .iter()
                .find(|row| row.entity_type == entity_type)
                .map_or(0.0, |row| row.f1);
            slot.push(f1);
        }
    }

    let rows = CV_TYPES
        .into_iter()
        .zip(per_type)
        .map(|(entity_type, fold_f1)| {
            let mean = fold_f1.iter().sum::<f64>() / k as f64;
            let variance =
                fold_f1.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (k - 1) as f64;
            CvTypeRow {
                entity_type,
                fold_f1,
                mean,
                std_dev: variance.sqrt(),
            }
        })
        .collect();
    Ok(CvReport {
        k,
        seed: config.seed,
        rows,
        fold_sizes,
    })
}
