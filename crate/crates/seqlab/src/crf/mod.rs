//! Linear-chain conditional random field: potentials, exact inference,
//! maximum-likelihood training with elastic-net regularization, randomized
//! hyperparameter search, cross-validation, and model serialization.
//!
//! The model scores a label sequence `y` for a sentence `x` as
//! `P(y|x) = (1/Z) ∏_t β_t(y_t, y_{t−1}, x_t)` where each potential is the
//! exponential of a state score (active features × label) plus a transition
//! score (previous label × label). The first position uses a dedicated
//! begin row instead of a synthetic start label, so the label count stays
//! equal to the tag-set size. All inference runs in log space.

pub mod inference;
pub mod io;
pub mod objective;
pub mod optimizer;
pub mod train;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::corpus::{BioLabel, Corpus, TaggedSentence};
use crate::features::{
    extract_sentence_features, ClusterMap, FeatureAlphabet, FeatureError, FeatureSet,
};

pub use inference::{
    log_partition, log_potentials, logsumexp, marginals, sequence_probability, viterbi,
    viterbi_constrained, Marginals,
};
pub use io::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use objective::nll_and_gradient;
pub use optimizer::IterationRecord;
pub use train::{
    cross_validate, encode_corpus, fit, random_search, render_search_log,
    render_training_log, train, CvReport, CvTypeRow, EncodedDataset, SearchOutcome,
    SearchSpace, TrainConfig, TrainOutput, Trial,
};

#[derive(Debug, Error)]
pub enum CrfError {
    #[error(
        "feature configuration mismatch: model fingerprint {model:#018x}, \
         input fingerprint {input:#018x}"
    )]
    FingerprintMismatch { model: u64, input: u64 },
    #[error("label id {id} out of range for {count} labels")]
    LabelOutOfRange { id: u32, count: usize },
    #[error("feature id {id} out of range for {count} features")]
    FeatureOutOfRange { id: u32, count: usize },
    #[error("label sequence has {labels} entries for {tokens} tokens")]
    LabelLengthMismatch { labels: usize, tokens: usize },
    #[error("label `{0}` is not in the model's label alphabet")]
    UnknownLabel(String),
    #[error("encoded sentence carries no gold labels")]
    MissingLabels,
    #[error("empty sentence cannot be encoded")]
    EmptySentence,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("numeric failure: {0}")]
    NonFinite(String),
    #[error("all {0} search trials failed")]
    SearchFailed(usize),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("model i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model format: {0}")]
    Format(String),
}

/// Bidirectional map between BIO labels and dense ids `0..L`, in canonical
/// label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlphabet {
    labels: Vec<BioLabel>,
}

impl LabelAlphabet {
    /// Alphabet over exactly the labels observed in `corpus`, canonically
    /// ordered.
    pub fn from_observed(corpus: &Corpus) -> Self {
        let set: BTreeSet<BioLabel> = corpus
            .sentences()
            .iter()
            .flat_map(|s| s.labels().iter().copied())
            .collect();
        LabelAlphabet {
            labels: set.into_iter().collect(),
        }
    }

    /// The full nine-label universe.
    pub fn full() -> Self {
        LabelAlphabet {
            labels: BioLabel::universe().collect(),
        }
    }

    /// Alphabet with an explicit id order, e.g. from a model file. Rejects
    /// duplicates and empty lists.
    pub fn from_labels(labels: Vec<BioLabel>) -> Result<Self, CrfError> {
        if labels.is_empty() {
            return Err(CrfError::InvalidConfig(
                "label alphabet must not be empty".to_string(),
            ));
        }
        let unique: BTreeSet<BioLabel> = labels.iter().copied().collect();
        if unique.len() != labels.len() {
            return Err(CrfError::InvalidConfig(
                "label alphabet contains duplicates".to_string(),
            ));
        }
        Ok(LabelAlphabet { labels })
    }

    pub fn id(&self, label: BioLabel) -> Option<u32> {
        self.labels.iter().position(|&l| l == label).map(|p| p as u32)
    }

    pub fn label(&self, id: u32) -> BioLabel {
        self.labels[id as usize]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[BioLabel] {
        &self.labels
    }
}

/// A sentence reduced to per-position active feature ids, plus gold label
/// ids when it came from annotated data. Stamped with the fingerprint of the
/// feature configuration that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    features: Vec<Vec<u32>>,
    labels: Option<Vec<u32>>,
    fingerprint: u64,
}

impl EncodedSentence {
    /// Validates bounds: at least one position, feature ids below
    /// `num_features`, label ids (when present) one per position and below
    /// `num_labels`.
    pub fn new(
        features: Vec<Vec<u32>>,
        labels: Option<Vec<u32>>,
        num_features: usize,
        num_labels: usize,
        fingerprint: u64,
    ) -> Result<Self, CrfError> {
        if features.is_empty() {
            return Err(CrfError::EmptySentence);
        }
        for &id in features.iter().flatten() {
            if id as usize >= num_features {
                return Err(CrfError::FeatureOutOfRange {
                    id,
                    count: num_features,
                });
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != features.len() {
                return Err(CrfError::LabelLengthMismatch {
                    labels: labels.len(),
                    tokens: features.len(),
                });
            }
            for &id in labels {
                if id as usize >= num_labels {
                    return Err(CrfError::LabelOutOfRange {
                        id,
                        count: num_labels,
                    });
                }
            }
        }
        Ok(EncodedSentence {
            features,
            labels,
            fingerprint,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn features(&self) -> &[Vec<u32>] {
        &self.features
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Turns surface sentences into feature strings and encoded sentences. Owns
/// the word-cluster map; its fingerprint identifies the full feature
/// configuration (template version + clusters).
#[derive(Debug, Clone)]
pub struct Featurizer {
    clusters: ClusterMap,
    fingerprint: u64,
}

impl Featurizer {
    pub fn new(clusters: ClusterMap) -> Self {
        let fingerprint = clusters.fingerprint();
        Featurizer {
            clusters,
            fingerprint,
        }
    }

    /// Featurizer with no cluster map: every word gets the fallback cluster.
    pub fn without_clusters() -> Self {
        Featurizer::new(ClusterMap::empty())
    }

    pub fn clusters(&self) -> &ClusterMap {
        &self.clusters
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Raw template expansion, one feature-string set per position.
    pub fn feature_strings(&self, sentence: &TaggedSentence) -> Vec<FeatureSet> {
        extract_sentence_features(sentence, &self.clusters)
    }

    /// Encodes a sentence against a feature alphabet. Features absent from
    /// the alphabet are dropped (out-of-vocabulary at tag time). When
    /// `labels` is given, the sentence's gold labels are encoded too and
    /// must all be present in that alphabet.
    pub fn encode(
        &self,
        sentence: &TaggedSentence,
        features: &FeatureAlphabet,
        labels: Option<&LabelAlphabet>,
    ) -> Result<EncodedSentence, CrfError> {
        let ids: Vec<Vec<u32>> = self
            .feature_strings(sentence)
            .iter()
            .map(|set| set.iter().filter_map(|f| features.id(f)).collect())
            .collect();
        let label_ids = match labels {
            Some(alphabet) => Some(
                sentence
                    .labels()
                    .iter()
                    .map(|&l| {
                        alphabet
                            .id(l)
                            .ok_or_else(|| CrfError::UnknownLabel(l.to_string()))
                    })
                    .collect::<Result<Vec<u32>, CrfError>>()?,
            ),
            None => None,
        };
        EncodedSentence::new(
            ids,
            label_ids,
            features.len(),
            labels.map_or(usize::MAX, LabelAlphabet::len),
            self.fingerprint,
        )
    }
}

/// Index layout of the flat weight vector: `F×L` state block, then `L×L`
/// transition block, then the length-`L` begin row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub num_features: usize,
    pub num_labels: usize,
}

impl Layout {
    pub fn dim(self) -> usize {
        self.num_features * self.num_labels
            + self.num_labels * self.num_labels
            + self.num_labels
    }

    pub fn state(self, feature: u32, label: usize) -> usize {
        feature as usize * self.num_labels + label
    }

    pub fn trans(self, from: usize, to: usize) -> usize {
        self.num_features * self.num_labels + from * self.num_labels + to
    }

    pub fn begin(self, to: usize) -> usize {
        self.num_features * self.num_labels + self.num_labels * self.num_labels + to
    }
}

/// A borrowed weight vector plus its layout; the unit inference works on.
#[derive(Clone, Copy)]
pub(crate) struct Params<'w> {
    pub w: &'w [f64],
    pub layout: Layout,
}

impl<'w> Params<'w> {
    pub fn num_labels(&self) -> usize {
        self.layout.num_labels
    }

    pub fn state(&self, feature: u32, label: usize) -> f64 {
        self.w[self.layout.state(feature, label)]
    }

    pub fn trans(&self, from: usize, to: usize) -> f64 {
        self.w[self.layout.trans(from, to)]
    }

    pub fn begin(&self, to: usize) -> f64 {
        self.w[self.layout.begin(to)]
    }
}

/// A trained linear-chain CRF. Immutable; safe to share across threads for
/// concurrent tagging.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    labels: LabelAlphabet,
    features: FeatureAlphabet,
    weights: Vec<f64>,
    fingerprint: u64,
}

impl CrfModel {
    /// Assembles a model, checking that the weight vector has the layout
    /// dimension and contains only finite values.
    pub fn from_parts(
        labels: LabelAlphabet,
        features: FeatureAlphabet,
        weights: Vec<f64>,
        fingerprint: u64,
    ) -> Result<Self, CrfError> {
        if labels.is_empty() {
            return Err(CrfError::InvalidConfig(
                "label alphabet must not be empty".to_string(),
            ));
        }
        if features.is_empty() {
            return Err(CrfError::InvalidConfig(
                "feature alphabet must not be empty".to_string(),
            ));
        }
        let layout = Layout {
            num_features: features.len(),
            num_labels: labels.len(),
        };
        if weights.len() != layout.dim() {
            return Err(CrfError::InvalidConfig(format!(
                "weight vector has {} entries, layout requires {}",
                weights.len(),
                layout.dim()
            )));
        }
        if let Some(pos) = weights.iter().position(|w| !w.is_finite()) {
            return Err(CrfError::NonFinite(format!(
                "weight {pos} is {}",
                weights[pos]
            )));
        }
        Ok(CrfModel {
            labels,
            features,
            weights,
            fingerprint,
        })
    }

    /// An all-zero-weight model over the given alphabets.
    pub fn zeroed(labels: LabelAlphabet, features: FeatureAlphabet, fingerprint: u64) -> Self {
        let layout = Layout {
            num_features: features.len(),
            num_labels: labels.len(),
        };
        CrfModel {
            labels,
            features,
            weights: vec![0.0; layout.dim()],
            fingerprint,
        }
    }

    pub fn labels(&self) -> &LabelAlphabet {
        &self.labels
    }

    pub fn features(&self) -> &FeatureAlphabet {
        &self.features
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout {
            num_features: self.features.len(),
            num_labels: self.labels.len(),
        }
    }

    pub(crate) fn params(&self) -> Params<'_> {
        Params {
            w: &self.weights,
            layout: self.layout(),
        }
    }

    pub fn state_weight(&self, feature: u32, label: u32) -> f64 {
        self.params().state(feature, label as usize)
    }

    pub fn transition_weight(&self, from: u32, to: u32) -> f64 {
        self.params().trans(from as usize, to as usize)
    }

    pub fn begin_weight(&self, to: u32) -> f64 {
        self.params().begin(to as usize)
    }

    pub(crate) fn check_fingerprint(&self, sentence: &EncodedSentence) -> Result<(), CrfError> {
        if sentence.fingerprint() != self.fingerprint {
            return Err(CrfError::FingerprintMismatch {
                model: self.fingerprint,
                input: sentence.fingerprint(),
            });
        }
        Ok(())
    }

    /// Viterbi-decodes an already-encoded sentence into BIO labels.
    pub fn tag_encoded(
        &self,
        sentence: &EncodedSentence,
        constrained: bool,
    ) -> Result<Vec<BioLabel>, CrfError> {
        let ids = if constrained {
            inference::viterbi_constrained(self, sentence)?
        } else {
            inference::viterbi(self, sentence)?
        };
        Ok(ids.into_iter().map(|id| self.labels.label(id)).collect())
    }

    /// Featurizes and decodes one sentence. The featurizer must carry the
    /// same feature configuration the model was trained with.
    pub fn tag_sentence(
        &self,
        featurizer: &Featurizer,
        sentence: &TaggedSentence,
        constrained: bool,
    ) -> Result<Vec<BioLabel>, CrfError> {
        if featurizer.fingerprint() != self.fingerprint {
            return Err(CrfError::FingerprintMismatch {
                model: self.fingerprint,
                input: featurizer.fingerprint(),
            });
        }
        let encoded = featurizer.encode(sentence, &self.features, None)?;
        self.tag_encoded(&encoded, constrained)
    }

    /// Tags every sentence of a corpus, ignoring its existing labels.
    pub fn tag_corpus(
        &self,
        featurizer: &Featurizer,
        corpus: &Corpus,
        constrained: bool,
    ) -> Result<Vec<Vec<BioLabel>>, CrfError> {
        corpus
            .sentences()
            .iter()
            .map(|s| self.tag_sentence(featurizer, s, constrained))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn sentence(words: &[&str], labels: &[&str]) -> TaggedSentence {
        let tokens = words.iter().map(|w| Token::new(*w).unwrap()).collect();
        let labels = labels.iter().map(|l| l.parse().unwrap()).collect();
        TaggedSentence::new(tokens, labels).unwrap()
    }

    #[test]
    fn label_alphabet_observed_is_canonical() {
        let corpus = Corpus::new(
            vec![sentence(&["a", "b", "c"], &["O", "B-LOC", "B-PER"])],
            "t",
        );
        let alphabet = LabelAlphabet::from_observed(&corpus);
        let names: Vec<String> =
            alphabet.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(names, ["B-PER", "B-LOC", "O"]);
        assert_eq!(alphabet.id("B-LOC".parse().unwrap()), Some(1));
        assert_eq!(alphabet.id("I-LOC".parse().unwrap()), None);
    }

    #[test]
    fn label_alphabet_rejects_duplicates() {
        let labels = vec!["O".parse().unwrap(), "O".parse().unwrap()];
        assert!(LabelAlphabet::from_labels(labels).is_err());
    }

    #[test]
    fn encoded_sentence_validates_bounds() {
        assert!(matches!(
            EncodedSentence::new(vec![vec![3]], None, 3, 2, 0),
            Err(CrfError::FeatureOutOfRange { id: 3, count: 3 })
        ));
        assert!(matches!(
            EncodedSentence::new(vec![vec![0]], Some(vec![2]), 3, 2, 0),
            Err(CrfError::LabelOutOfRange { id: 2, count: 2 })
        ));
        assert!(matches!(
            EncodedSentence::new(vec![vec![0]], Some(vec![0, 1]), 3, 2, 0),
            Err(CrfError::LabelLengthMismatch { labels: 2, tokens: 1 })
        ));
        assert!(matches!(
            EncodedSentence::new(vec![], None, 3, 2, 0),
            Err(CrfError::EmptySentence)
        ));
    }

    #[test]
    fn layout_blocks_are_disjoint_and_cover() {
        let layout = Layout {
            num_features: 3,
            num_labels: 2,
        };
        let mut seen = vec![false; layout.dim()];
        for f in 0..3u32 {
            for j in 0..2 {
                seen[layout.state(f, j)] = true;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                seen[layout.trans(i, j)] = true;
            }
        }
        for j in 0..2 {
            seen[layout.begin(j)] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(layout.dim(), 3 * 2 + 2 * 2 + 2);
    }

    #[test]
    fn model_rejects_bad_weights() {
        let labels = LabelAlphabet::full();
        let features = FeatureAlphabet::from_features(vec!["f".to_string()]);
        assert!(CrfModel::from_parts(labels.clone(), features.clone(), vec![0.0], 0).is_err());
        let dim = Layout {
            num_features: 1,
            num_labels: 9,
        }
        .dim();
        let mut weights = vec![0.0; dim];
        weights[0] = f64::NAN;
        assert!(matches!(
            CrfModel::from_parts(labels, features, weights, 0),
            Err(CrfError::NonFinite(_))
        ));
    }

    #[test]
    fn featurizer_encode_maps_labels_and_drops_oov() {
        let s = sentence(&["Juan"], &["B-PER"]);
        let featurizer = Featurizer::without_clusters();
        // Alphabet with only two of the emitted features.
        let features = FeatureAlphabet::from_features(vec![
            "w0=juan".to_string(),
            "BOS".to_string(),
        ]);
        let labels = LabelAlphabet::from_labels(vec![
            "B-PER".parse().unwrap(),
            "O".parse().unwrap(),
        ])
        .unwrap();
        let encoded = featurizer.encode(&s, &features, Some(&labels)).unwrap();
        assert_eq!(encoded.features(), &[vec![0, 1]]);
        assert_eq!(encoded.labels(), Some(&[0u32][..]));
        assert_eq!(encoded.fingerprint(), featurizer.fingerprint());

        let bad_labels = LabelAlphabet::from_labels(vec!["O".parse().unwrap()]).unwrap();
        assert!(matches!(
            featurizer.encode(&s, &features, Some(&bad_labels)),
            Err(CrfError::UnknownLabel(l)) if l == "B-PER"
        ));
    }

    #[test]
    fn fingerprint_mismatch_is_rejected_at_tag_time() {
        let features = FeatureAlphabet::from_features(vec!["w0=a".to_string()]);
        let labels = LabelAlphabet::from_labels(vec!["O".parse().unwrap()]).unwrap();
        let model = CrfModel::zeroed(labels, features, 1234);
        let s = sentence(&["a"], &["O"]);
        let featurizer = Featurizer::without_clusters();
        assert_ne!(featurizer.fingerprint(), 1234);
        assert!(matches!(
            model.tag_sentence(&featurizer, &s, false),
            Err(CrfError::FingerprintMismatch { .. })
        ));
    }
}
