//! BIO-annotated corpus handling: CoNLL-style parsing, validation and repair,
//! deterministic splitting, label statistics, and raw-text tokenization.
//!
//! The on-disk carrier is the two-column tab-separated CoNLL format: one
//! `token<TAB>label` pair per line, sentences separated by blank lines.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors produced while reading, validating, or splitting corpora.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: expected two tab-separated columns")]
    MalformedLine { line: usize },
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("empty corpus: no sentences found")]
    EmptyCorpus,
    #[error("empty sentence: input contains no tokens")]
    EmptySentence,
    #[error("invalid token `{surface}`: {reason}")]
    InvalidToken { surface: String, reason: &'static str },
    #[error("sentence has {tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("{} orphan I- label(s); first at sentence {}, token {} ({})",
            .0.len(), .0[0].sentence, .0[0].token, .0[0].label)]
    BioViolations(Vec<BioViolation>),
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("unknown entity type `{0}`")]
    UnknownEntityType(String),
}

/// The four entity types of the tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityType {
    Per,
    Org,
    Loc,
    Other,
}

impl EntityType {
    pub const ALL: [EntityType; 4] = [
        EntityType::Per,
        EntityType::Org,
        EntityType::Loc,
        EntityType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Per => "PER",
            EntityType::Org => "ORG",
            EntityType::Loc => "LOC",
            EntityType::Other => "OTHER",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PER" => Ok(EntityType::Per),
            "ORG" => Ok(EntityType::Org),
            "LOC" => Ok(EntityType::Loc),
            "OTHER" => Ok(EntityType::Other),
            other => Err(CorpusError::UnknownEntityType(other.to_string())),
        }
    }
}

/// A BIO label: `B-X` begins an entity of type `X`, `I-X` continues it,
/// `O` marks a token outside any entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioLabel {
    B(EntityType),
    I(EntityType),
    O,
}

impl BioLabel {
    /// Entity type, or `None` for `O`.
    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            BioLabel::B(t) | BioLabel::I(t) => Some(t),
            BioLabel::O => None,
        }
    }

    pub fn is_inside(self) -> bool {
        matches!(self, BioLabel::I(_))
    }

    /// All nine labels in canonical table order: B/I pairs per entity type,
    /// `O` last.
    pub fn universe() -> impl Iterator<Item = BioLabel> {
        EntityType::ALL
            .into_iter()
            .flat_map(|t| [BioLabel::B(t), BioLabel::I(t)])
            .chain(std::iter::once(BioLabel::O))
    }

    fn sort_key(self) -> u8 {
        match self {
            BioLabel::B(t) => t as u8 * 2,
            BioLabel::I(t) => t as u8 * 2 + 1,
            BioLabel::O => 8,
        }
    }
}

impl Ord for BioLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for BioLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioLabel::B(t) => write!(f, "B-{t}"),
            BioLabel::I(t) => write!(f, "I-{t}"),
            BioLabel::O => f.write_str("O"),
        }
    }
}

impl FromStr for BioLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(BioLabel::O);
        }
        let mk = |prefix: fn(EntityType) -> BioLabel, rest: &str| {
            rest.parse::<EntityType>()
                .map(prefix)
                .map_err(|_| CorpusError::UnknownEntityType(s.to_string()))
        };
        match s.split_once('-') {
            Some(("B", rest)) => mk(BioLabel::B, rest),
            Some(("I", rest)) => mk(BioLabel::I, rest),
            _ => Err(CorpusError::UnknownEntityType(s.to_string())),
        }
    }
}

/// A single surface token. Non-empty and free of whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self, CorpusError> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(CorpusError::InvalidToken {
                surface,
                reason: "empty surface",
            });
        }
        if surface.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidToken {
                surface,
                reason: "contains whitespace",
            });
        }
        Ok(Token(surface))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One sentence: tokens paired position-wise with BIO labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    tokens: Vec<Token>,
    labels: Vec<BioLabel>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<Token>, labels: Vec<BioLabel>) -> Result<Self, CorpusError> {
        if tokens.len() != labels.len() {
            return Err(CorpusError::LengthMismatch {
                tokens: tokens.len(),
                labels: labels.len(),
            });
        }
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        Ok(TaggedSentence { tokens, labels })
    }

    /// Wraps unannotated tokens with all-`O` labels, e.g. for tagging input.
    pub fn from_unlabeled(tokens: Vec<Token>) -> Result<Self, CorpusError> {
        let labels = vec![BioLabel::O; tokens.len()];
        TaggedSentence::new(tokens, labels)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // |tokens| >= 1 by construction
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn labels(&self) -> &[BioLabel] {
        &self.labels
    }

    pub fn surface(&self, index: usize) -> &str {
        self.tokens[index].as_str()
    }

    /// Replaces the labels, e.g. with model predictions.
    pub fn with_labels(&self, labels: Vec<BioLabel>) -> Result<Self, CorpusError> {
        TaggedSentence::new(self.tokens.clone(), labels)
    }
}

/// An ordered collection of tagged sentences from one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<TaggedSentence>,
    source_id: String,
}

impl Corpus {
    pub fn new(sentences: Vec<TaggedSentence>, source_id: impl Into<String>) -> Self {
        Corpus {
            sentences,
            source_id: source_id.into(),
        }
    }

    pub fn sentences(&self) -> &[TaggedSentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(TaggedSentence::len).sum()
    }
}

/// A sentence of raw `(token, label-string)` pairs, as read before any label
/// validation. Used for foreign tag sets that need mapping first.
#[derive(Debug, Clone)]
pub struct RawCorpus {
    pub sentences: Vec<Vec<(Token, String)>>,
    pub source_id: String,
}

/// One token row as read from disk: surface form, raw label string, and the
/// 1-based line number it came from.
type IndexedRow = (Token, String, usize);

fn read_rows(reader: impl BufRead) -> Result<Vec<Vec<IndexedRow>>, CorpusError> {
    let mut sentences = Vec::new();
    let mut current: Vec<IndexedRow> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|_| CorpusError::MalformedLine { line: line_no })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let mut cols = line.split('\t');
        let (surface, label) = match (cols.next(), cols.next(), cols.next()) {
            (Some(s), Some(l), None) => (s, l),
            _ => return Err(CorpusError::MalformedLine { line: line_no }),
        };
        let token =
            Token::new(surface).map_err(|_| CorpusError::MalformedLine { line: line_no })?;
        current.push((token, label.to_string(), line_no));
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    if sentences.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(sentences)
}

/// Parses a two-column CoNLL stream into a corpus.
///
/// Each non-blank line must be `token<TAB>label`; a blank line ends the
/// current sentence. Label strings must belong to the BIO tag set over
/// PER/ORG/LOC/OTHER.
pub fn parse_conll(reader: impl BufRead, source_id: &str) -> Result<Corpus, CorpusError> {
    parse_conll_indexed(reader, source_id).map(|(corpus, _)| corpus)
}

/// Like [`parse_conll`], but also returns the 1-based input line number of
/// every token, indexed `[sentence][token]`.
pub fn parse_conll_indexed(
    reader: impl BufRead,
    source_id: &str,
) -> Result<(Corpus, Vec<Vec<usize>>), CorpusError> {
    let rows = read_rows(reader)?;
    let mut sentences = Vec::with_capacity(rows.len());
    let mut lines = Vec::with_capacity(rows.len());
    for sentence in rows {
        let mut tokens = Vec::with_capacity(sentence.len());
        let mut labels = Vec::with_capacity(sentence.len());
        let mut line_nos = Vec::with_capacity(sentence.len());
        for (token, label, line_no) in sentence {
            let label = label
                .parse::<BioLabel>()
                .map_err(|_| CorpusError::UnknownLabel {
                    line: line_no,
                    label,
                })?;
            tokens.push(token);
            labels.push(label);
            line_nos.push(line_no);
        }
        sentences.push(TaggedSentence::new(tokens, labels)?);
        lines.push(line_nos);
    }
    Ok((Corpus::new(sentences, source_id), lines))
}

/// Parses a CoNLL stream without interpreting the label column, for corpora
/// whose tag names need mapping before they fit the local tag set.
pub fn parse_conll_raw(reader: impl BufRead, source_id: &str) -> Result<RawCorpus, CorpusError> {
    let rows = read_rows(reader)?;
    Ok(RawCorpus {
        sentences: rows
            .into_iter()
            .map(|s| s.into_iter().map(|(t, l, _)| (t, l)).collect())
            .collect(),
        source_id: source_id.to_string(),
    })
}

/// Parses tagging input: one token per line, with an optional label column
/// that is ignored. Blank lines separate sentences.
pub fn parse_conll_tokens(reader: impl BufRead) -> Result<Vec<Vec<Token>>, CorpusError> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|_| CorpusError::MalformedLine { line: line_no })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let surface = line.split('\t').next().unwrap();
        let token =
            Token::new(surface).map_err(|_| CorpusError::MalformedLine { line: line_no })?;
        current.push(token);
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    if sentences.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(sentences)
}

/// Writes a corpus in the same two-column format accepted by [`parse_conll`],
/// one blank line after each sentence.
pub fn write_conll(corpus: &Corpus, writer: &mut impl Write) -> std::io::Result<()> {
    for sentence in corpus.sentences() {
        for (token, label) in sentence.tokens().iter().zip(sentence.labels()) {
            writeln!(writer, "{token}\t{label}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn to_conll_string(corpus: &Corpus) -> String {
    let mut out = Vec::new();
    write_conll(corpus, &mut out).expect("in-memory write");
    String::from_utf8(out).expect("corpus text is UTF-8")
}

/// One orphan `I-` occurrence: an `I-X` whose predecessor is neither `B-X`
/// nor `I-X` of the same type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BioViolation {
    pub sentence: usize,
    pub token: usize,
    pub label: BioLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// Fail on any orphan `I-` label.
    Strict,
    /// Rewrite each orphan `I-X` to `B-X` and report the repairs.
    Repair,
}

/// Outcome of [`validate_bio`]: the (possibly repaired) corpus plus the list
/// of repairs made. Empty in strict mode.
#[derive(Debug, Clone)]
pub struct Validated {
    pub corpus: Corpus,
    pub repairs: Vec<BioViolation>,
}

/// Checks the BIO chain constraint. In strict mode, any orphan `I-` label is
/// an error; in repair mode each orphan `I-X` becomes `B-X`.
///
/// The predecessor check runs against the repaired sequence, so a run like
/// `B-ORG I-LOC I-LOC` repairs to `B-ORG B-LOC I-LOC`. Repair is idempotent.
pub fn validate_bio(corpus: &Corpus, mode: ValidationMode) -> Result<Validated, CorpusError> {
    let mut violations = Vec::new();
    let mut sentences = Vec::with_capacity(corpus.len());
    for (si, sentence) in corpus.sentences().iter().enumerate() {
        let mut labels = sentence.labels().to_vec();
        for ti in 0..labels.len() {
            let BioLabel::I(etype) = labels[ti] else {
                continue;
            };
            let prev_ok = ti > 0
                && matches!(labels[ti - 1],
                    BioLabel::B(p) | BioLabel::I(p) if p == etype);
            if !prev_ok {
                violations.push(BioViolation {
                    sentence: si,
                    token: ti,
                    label: labels[ti],
                });
                labels[ti] = BioLabel::B(etype);
            }
        }
        sentences.push(sentence.with_labels(labels)?);
    }
    match mode {
        ValidationMode::Strict if !violations.is_empty() => {
            Err(CorpusError::BioViolations(violations))
        }
        ValidationMode::Strict => Ok(Validated {
            corpus: corpus.clone(),
            repairs: Vec::new(),
        }),
        ValidationMode::Repair => Ok(Validated {
            corpus: Corpus::new(sentences, corpus.source_id()),
            repairs: violations,
        }),
    }
}

/// Train/dev/test fractions. Must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self, CorpusError> {
        let r = SplitRatios { train, dev, test };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        for (name, v) in [("train", self.train), ("dev", self.dev), ("test", self.test)] {
            // `is_nan` check keeps NaN ratios rejected alongside non-positive ones.
            if v.is_nan() || v <= 0.0 {
                return Err(CorpusError::InvalidRatios(format!(
                    "{name} ratio must be positive, got {v}"
                )));
            }
        }
        let sum = self.train + self.dev + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatios(format!(
                "ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Splits a corpus into train/dev/test at sentence granularity.
///
/// The sentence order is shuffled deterministically by `seed`; dev and test
/// sizes are `floor(n * ratio)` and the remainder goes to train. The three
/// outputs partition the input exactly.
pub fn split(
    corpus: &Corpus,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(Corpus, Corpus, Corpus), CorpusError> {
    ratios.validate()?;
    let n = corpus.len();
    let n_dev = (n as f64 * ratios.dev).floor() as usize;
    let n_test = (n as f64 * ratios.test).floor() as usize;
    let n_train = n - n_dev - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let pick = |range: std::ops::Range<usize>, suffix: &str| {
        let sentences = order[range]
            .iter()
            .map(|&i| corpus.sentences()[i].clone())
            .collect();
        Corpus::new(sentences, format!("{}/{suffix}", corpus.source_id()))
    };
    Ok((
        pick(0..n_train, "train"),
        pick(n_train..n_train + n_dev, "dev"),
        pick(n_train + n_dev..n, "test"),
    ))
}

/// Counts every BIO label occurrence. Iteration order is canonical
/// (B/I pairs per entity type, then `O`).
pub fn stats(corpus: &Corpus) -> BTreeMap<BioLabel, u64> {
    let mut counts = BTreeMap::new();
    for sentence in corpus.sentences() {
        for &label in sentence.labels() {
            *counts.entry(label).or_insert(0) += 1;
        }
    }
    counts
}

/// Renders label counts as an aligned table followed by machine-readable
/// `label<TAB>count` lines.
pub fn render_stats(counts: &BTreeMap<BioLabel, u64>) -> String {
    let mut out = String::new();
    let total: u64 = counts.values().sum();
    out.push_str("Label      Count\n");
    for (label, count) in counts {
        out.push_str(&format!("{:<9} {:>6}\n", label.to_string(), count));
    }
    out.push_str(&format!("{:<9} {:>6}\n\n", "total", total));
    for (label, count) in counts {
        out.push_str(&format!("{label}\t{count}\n"));
    }
    out
}

fn is_detachable_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}'
                | '\u{2026}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00A1}'
        )
}

/// Splits raw text on whitespace and detaches leading/trailing punctuation
/// into separate single-character tokens. Intended for tagging input only.
pub fn tokenize_raw(text: &str) -> Result<Vec<Token>, CorpusError> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_detachable_punct(chars[start]) {
            start += 1;
        }
        while end > start && is_detachable_punct(chars[end - 1]) {
            end -= 1;
        }
        for &c in &chars[..start] {
            tokens.push(Token::new(c.to_string())?);
        }
        if start < end {
            tokens.push(Token::new(chars[start..end].iter().collect::<String>())?);
        }
        for &c in &chars[end..] {
            tokens.push(Token::new(c.to_string())?);
        }
    }
    if tokens.is_empty() {
        return Err(CorpusError::EmptySentence);
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> BioLabel {
        s.parse().unwrap()
    }

    fn sentence(pairs: &[(&str, &str)]) -> TaggedSentence {
        let tokens = pairs.iter().map(|(t, _)| Token::new(*t).unwrap()).collect();
        let labels = pairs.iter().map(|(_, l)| label(l)).collect();
        TaggedSentence::new(tokens, labels).unwrap()
    }

    #[test]
    fn parse_minimal() {
        let corpus = parse_conll("Juan\tB-PER\n.\tO\n".as_bytes(), "t").unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(
            corpus.sentences()[0].labels(),
            &[label("B-PER"), label("O")]
        );
    }

    #[test]
    fn parse_empty_is_error() {
        assert!(matches!(
            parse_conll("".as_bytes(), "t"),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn doubled_blank_lines_do_not_create_empty_sentences() {
        // Three sentences; the separator between the second and third doubled.
        let text = "A\tO\n\nB\tO\nC\tO\n\n\nD\tO\n";
        let corpus = parse_conll(text.as_bytes(), "t").unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.sentences()[1].len(), 2);
        assert_eq!(corpus.sentences()[2].len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_conll("A\tO\nB\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 2 }));
        let err = parse_conll("A\tO\tX\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 1 }));
    }

    #[test]
    fn unknown_label_reports_line_number() {
        let err = parse_conll("A\tO\nB\tB-MISC\n".as_bytes(), "t").unwrap_err();
        match err {
            CorpusError::UnknownLabel { line, label } => {
                assert_eq!(line, 2);
                assert_eq!(label, "B-MISC");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn indexed_parse_tracks_lines() {
        let (_, lines) = parse_conll_indexed("A\tO\n\nB\tO\nC\tO\n".as_bytes(), "t").unwrap();
        assert_eq!(lines, vec![vec![1], vec![3, 4]]);
    }

    #[test]
    fn label_round_trip() {
        for l in BioLabel::universe() {
            assert_eq!(l.to_string().parse::<BioLabel>().unwrap(), l);
        }
        assert!("B-per".parse::<BioLabel>().is_err());
        assert!("X-PER".parse::<BioLabel>().is_err());
    }

    #[test]
    fn canonical_label_order() {
        let labels: Vec<String> = BioLabel::universe().map(|l| l.to_string()).collect();
        assert_eq!(
            labels,
            [
                "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC", "I-LOC", "B-OTHER", "I-OTHER",
                "O"
            ]
        );
        let mut shuffled = vec![label("O"), label("I-LOC"), label("B-PER")];
        shuffled.sort();
        assert_eq!(shuffled, [label("B-PER"), label("I-LOC"), label("O")]);
    }

    #[test]
    fn repair_orphan_i() {
        let corpus = Corpus::new(vec![sentence(&[("a", "I-PER"), ("b", "O")])], "t");
        let out = validate_bio(&corpus, ValidationMode::Repair).unwrap();
        assert_eq!(
            out.corpus.sentences()[0].labels(),
            &[label("B-PER"), label("O")]
        );
        assert_eq!(out.repairs.len(), 1);
        assert_eq!(out.repairs[0].token, 0);
    }

    #[test]
    fn strict_passes_valid_corpus() {
        let corpus = Corpus::new(vec![sentence(&[("a", "B-LOC"), ("b", "I-LOC")])], "t");
        let out = validate_bio(&corpus, ValidationMode::Strict).unwrap();
        assert_eq!(out.corpus, corpus);
        assert!(out.repairs.is_empty());
    }

    #[test]
    fn repair_type_switch() {
        // Enumerated by hand from the repair rule: I-LOC after B-ORG is an
        // orphan and becomes B-LOC; the following I-LOC is then anchored.
        let corpus = Corpus::new(
            vec![sentence(&[("a", "B-ORG"), ("b", "I-LOC"), ("c", "I-LOC")])],
            "t",
        );
        let out = validate_bio(&corpus, ValidationMode::Repair).unwrap();
        assert_eq!(
            out.corpus.sentences()[0].labels(),
            &[label("B-ORG"), label("B-LOC"), label("I-LOC")]
        );
        assert_eq!(out.repairs.len(), 1);
    }

    #[test]
    fn repair_is_idempotent_and_leaves_no_orphans() {
        let corpus = Corpus::new(
            vec![
                sentence(&[("a", "I-PER"), ("b", "I-ORG"), ("c", "I-ORG")]),
                sentence(&[("d", "O"), ("e", "I-LOC")]),
            ],
            "t",
        );
        let once = validate_bio(&corpus, ValidationMode::Repair).unwrap();
        let twice = validate_bio(&once.corpus, ValidationMode::Repair).unwrap();
        assert_eq!(once.corpus, twice.corpus);
        assert!(twice.repairs.is_empty());
        assert!(validate_bio(&once.corpus, ValidationMode::Strict).is_ok());
    }

    #[test]
    fn strict_reports_violation() {
        let corpus = Corpus::new(vec![sentence(&[("a", "O"), ("b", "I-ORG")])], "t");
        match validate_bio(&corpus, ValidationMode::Strict) {
            Err(CorpusError::BioViolations(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!((v[0].sentence, v[0].token), (0, 1));
                assert_eq!(v[0].label, label("I-ORG"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn toy_corpus(n: usize) -> Corpus {
        let sentences = (0..n)
            .map(|i| sentence(&[(format!("w{i}").leak() as &str, "O")]))
            .collect();
        Corpus::new(sentences, "toy")
    }

    #[test]
    fn split_sizes_are_floor_allocated() {
        let corpus = toy_corpus(10);
        let ratios = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
        let (train, dev, test) = split(&corpus, ratios, 7).unwrap();
        assert_eq!((train.len(), dev.len(), test.len()), (8, 1, 1));
    }

    #[test]
    fn split_allocates_large_corpus_exactly() {
        // Floor allocation over 4,258 sentences at 80/10/10.
        let corpus = toy_corpus(4258);
        let ratios = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
        let (train, dev, test) = split(&corpus, ratios, 0).unwrap();
        assert_eq!((train.len(), dev.len(), test.len()), (3408, 425, 425));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let corpus = toy_corpus(23);
        let ratios = SplitRatios::new(0.6, 0.2, 0.2).unwrap();
        let a = split(&corpus, ratios, 42).unwrap();
        let b = split(&corpus, ratios, 42).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);

        let mut seen: Vec<&TaggedSentence> = a
            .0
            .sentences()
            .iter()
            .chain(a.1.sentences())
            .chain(a.2.sentences())
            .collect();
        let mut original: Vec<&TaggedSentence> = corpus.sentences().iter().collect();
        let key = |s: &&TaggedSentence| s.tokens()[0].as_str().to_string();
        seen.sort_by_key(key);
        original.sort_by_key(key);
        assert_eq!(seen, original);
    }

    #[test]
    fn split_rejects_bad_ratios() {
        assert!(SplitRatios::new(0.8, 0.2, 0.0).is_err());
        assert!(SplitRatios::new(0.8, 0.1, 0.2).is_err());
        assert!(SplitRatios::new(1.0, -0.1, 0.1).is_err());
    }

    #[test]
    fn stats_counts_labels() {
        let corpus = Corpus::new(
            vec![sentence(&[("a", "B-PER"), ("b", "I-PER"), ("c", "O")])],
            "t",
        );
        let counts = stats(&corpus);
        assert_eq!(counts[&label("B-PER")], 1);
        assert_eq!(counts[&label("I-PER")], 1);
        assert_eq!(counts[&label("O")], 1);
        let total: u64 = counts.values().sum();
        assert_eq!(total as usize, corpus.token_count());
    }

    #[test]
    fn tokenize_detaches_punctuation() {
        let toks: Vec<String> = tokenize_raw("Miadto si Juan.")
            .unwrap()
            .into_iter()
            .map(|t| t.as_str().to_string())
            .collect();
        assert_eq!(toks, ["Miadto", "si", "Juan", "."]);

        let toks: Vec<String> = tokenize_raw("(Cebu City)")
            .unwrap()
            .into_iter()
            .map(|t| t.as_str().to_string())
            .collect();
        assert_eq!(toks, ["(", "Cebu", "City", ")"]);
    }

    #[test]
    fn tokenize_keeps_internal_punctuation() {
        let toks: Vec<String> = tokenize_raw("1,000 Cebu-City")
            .unwrap()
            .into_iter()
            .map(|t| t.as_str().to_string())
            .collect();
        assert_eq!(toks, ["1,000", "Cebu-City"]);
    }

    #[test]
    fn tokenize_rejects_whitespace_only() {
        assert!(matches!(
            tokenize_raw("  \t "),
            Err(CorpusError::EmptySentence)
        ));
    }
}
