//! Scoring predicted label sequences against gold: per-tag token-level
//! precision/recall/F1/support, strict entity-span scores, per-entity-type
//! aggregation, misclassification dumps, and crosslingual evaluation.
//!
//! Conventions, pinned for testability: a precision or recall whose
//! denominator is zero is reported as `0` and flagged undefined; per-type
//! token rows aggregate the `B-` and `I-` rows either weighted by gold
//! support or as their plain mean; macro aggregates average PER, ORG, and
//! LOC and always exclude the miscellaneous type.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use crate::corpus::{BioLabel, Corpus, CorpusError, EntityType, RawCorpus};
use crate::crf::{CrfError, CrfModel, Featurizer};
use crate::features::ClusterMap;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unmappable foreign tag `{tag}`")]
    UnmappableTag { tag: String },
    #[error("line {line}: bad tag-mapping entry: {reason}")]
    MappingFormat { line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] CrfError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// A maximal entity run: type plus inclusive token index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub entity_type: EntityType,
    pub start: usize,
    pub end: usize,
}

/// One per-BIO-tag score row.
#[derive(Debug, Clone, PartialEq)]
pub struct TagRow {
    pub label: BioLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences of the tag.
    pub support: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

/// One per-entity-type score row (token- or span-level).
#[derive(Debug, Clone, PartialEq)]
pub struct TypeRow {
    pub entity_type: EntityType,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold tokens (token-level rows) or gold spans (span-level rows).
    pub support: u64,
    /// Set when the row's gold support is zero, i.e. the scores are the
    /// zero-denominator convention rather than measurements.
    pub undefined: bool,
}

/// One token-level disagreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorRecord {
    pub sentence: usize,
    pub token: usize,
    pub gold: BioLabel,
    pub predicted: BioLabel,
}

/// The full evaluation report: token and span granularity side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `evaluation` or `crosslingual evaluation`.
    pub mode: String,
    pub total_tokens: u64,
    pub token_accuracy: f64,
    /// Canonical tag order: the eight `B-`/`I-` rows, then `O`.
    pub per_tag: Vec<TagRow>,
    /// `B-` and `I-` rows combined per type, weighted by gold support.
    pub per_type_token_weighted: Vec<TypeRow>,
    /// Plain mean of the `B-` and `I-` rows per type.
    pub per_type_token_unweighted: Vec<TypeRow>,
    /// Strict span matching: a predicted span counts iff an identical
    /// (type, start, end) gold span exists in the same sentence.
    pub per_type_span: Vec<TypeRow>,
    /// Mean F1 over PER, ORG, LOC of the corresponding per-type rows.
    pub macro_token_weighted: f64,
    pub macro_token_unweighted: f64,
    pub macro_span: f64,
    pub errors: Vec<ErrorRecord>,
    /// Orphan `I-` labels encountered during span extraction (gold and
    /// predicted sides combined), each treated as `B-`.
    pub orphan_fixes: u64,
}

/// Extracts maximal `B-X (I-X)*` runs as spans. Orphan `I-X` labels (no
/// matching predecessor) are treated as `B-X`, mirroring corpus repair, and
/// counted in the second return value.
pub fn extract_spans(labels: &[BioLabel]) -> (Vec<Span>, u64) {
    let mut spans = Vec::new();
    let mut orphans = 0u64;
    if labels.is_empty() {
        return (spans, orphans);
    }
    let mut open: Option<(EntityType, usize)> = None;
    let close = |open: &mut Option<(EntityType, usize)>, end: usize, spans: &mut Vec<Span>| {
        if let Some((entity_type, start)) = open.take() {
            spans.push(Span {
                entity_type,
                start,
                end,
            });
        }
    };
    for (t, &label) in labels.iter().enumerate() {
        match label {
            BioLabel::B(x) => {
                close(&mut open, t.wrapping_sub(1), &mut spans);
                open = Some((x, t));
            }
            BioLabel::I(x) => match open {
                Some((ty, _)) if ty == x => {}
                _ => {
                    orphans += 1;
                    close(&mut open, t.wrapping_sub(1), &mut spans);
                    open = Some((x, t));
                }
            },
            BioLabel::O => close(&mut open, t.wrapping_sub(1), &mut spans),
        }
    }
    let last = labels.len() - 1;
    close(&mut open, last, &mut spans);
    (spans, orphans)
}

fn check_shapes(gold: &Corpus, pred: &[Vec<BioLabel>]) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::ShapeMismatch(format!(
            "gold has {} sentences, predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (sentence, labels)) in gold.sentences().iter().zip(pred).enumerate() {
        if sentence.len() != labels.len() {
            return Err(EvalError::ShapeMismatch(format!(
                "sentence {i}: gold has {} tokens, prediction has {} labels",
                sentence.len(),
                labels.len()
            )));
        }
    }
    Ok(())
}

/// Precision/recall/F1 from confusion counts, with the zero-denominator
/// convention: undefined values become 0 and are flagged.
fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64, bool, bool) {
    let p_undefined = tp + fp == 0;
    let r_undefined = tp + fn_ == 0;
    let precision = if p_undefined {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if r_undefined {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1, p_undefined, r_undefined)
}

pub(crate) fn evaluate(
    gold: &Corpus,
    pred: &[Vec<BioLabel>],
    mode: &str,
) -> Result<EvalReport, EvalError> {
    check_shapes(gold, pred)?;

    #[derive(Default, Clone, Copy)]
    struct Counts {
        tp: u64,
        fp: u64,
        fn_: u64,
    }
    let mut token_counts: BTreeMap<BioLabel, Counts> =
        BioLabel::universe().map(|l| (l, Counts::default())).collect();
    let mut errors = Vec::new();
    let mut correct = 0u64;
    let mut total = 0u64;

    let mut span_counts: BTreeMap<EntityType, (u64, u64, u64)> = EntityType::ALL
        .into_iter()
        .map(|t| (t, (0u64, 0u64, 0u64))) // (tp, gold, pred)
        .collect();
    let mut orphan_fixes = 0u64;

    for (si, (sentence, pred_labels)) in gold.sentences().iter().zip(pred).enumerate() {
        for (ti, (&g, &p)) in sentence.labels().iter().zip(pred_labels).enumerate() {
            total += 1;
            if g == p {
                correct += 1;
                token_counts.get_mut(&g).expect("universe").tp += 1;
            } else {
                token_counts.get_mut(&g).expect("universe").fn_ += 1;
                token_counts.get_mut(&p).expect("universe").fp += 1;
                errors.push(ErrorRecord {
                    sentence: si,
                    token: ti,
                    gold: g,
                    predicted: p,
                });
            }
        }

        let (gold_spans, gold_orphans) = extract_spans(sentence.labels());
        let (pred_spans, pred_orphans) = extract_spans(pred_labels);
        orphan_fixes += gold_orphans + pred_orphans;
        for span in &gold_spans {
            span_counts.get_mut(&span.entity_type).expect("all types").1 += 1;
        }
        for span in &pred_spans {
            let entry = span_counts.get_mut(&span.entity_type).expect("all types");
            entry.2 += 1;
            if gold_spans.contains(span) {
                entry.0 += 1;
            }
        }
    }

    let per_tag: Vec<TagRow> = token_counts
        .iter()
        .map(|(&label, c)| {
            let (precision, recall, f1, p_undefined, r_undefined) = prf(c.tp, c.fp, c.fn_);
            TagRow {
                label,
                precision,
                recall,
                f1,
                support: c.tp + c.fn_,
                precision_undefined: p_undefined,
                recall_undefined: r_undefined,
            }
        })
        .collect();

    let tag_row = |label: BioLabel| {
        per_tag
            .iter()
            .find(|row| row.label == label)
            .expect("universe covers all tags")
    };
    let mut per_type_token_weighted = Vec::new();
    let mut per_type_token_unweighted = Vec::new();
    for entity_type in EntityType::ALL {
        let b = tag_row(BioLabel::B(entity_type));
        let i = tag_row(BioLabel::I(entity_type));
        let support = b.support + i.support;
        let weighted = if support > 0 {
            let w = |fb: f64, fi: f64| {
                (b.support as f64 * fb + i.support as f64 * fi) / support as f64
            };
            TypeRow {
                entity_type,
                precision: w(b.precision, i.precision),
                recall: w(b.recall, i.recall),
                f1: w(b.f1, i.f1),
                support,
                undefined: false,
            }
        } else {
            TypeRow {
                entity_type,
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                support: 0,
                undefined: true,
            }
        };
        per_type_token_weighted.push(weighted);
        per_type_token_unweighted.push(TypeRow {
            entity_type,
            precision: (b.precision + i.precision) / 2.0,
            recall: (b.recall + i.recall) / 2.0,
            f1: (b.f1 + i.f1) / 2.0,
            support,
            undefined: support == 0,
        });
    }

    let per_type_span: Vec<TypeRow> = EntityType::ALL
        .into_iter()
        .map(|entity_type| {
            let (tp, gold_count, pred_count) = span_counts[&entity_type];
            let (precision, recall, f1, p_undefined, r_undefined) =
                prf(tp, pred_count - tp, gold_count - tp);
            TypeRow {
                entity_type,
                precision,
                recall,
                f1,
                support: gold_count,
                undefined: p_undefined && r_undefined,
            }
        })
        .collect();

    let macro_over = |rows: &[TypeRow]| {
        let picked: Vec<f64> = rows
            .iter()
            .filter(|r| r.entity_type != EntityType::Other)
            .map(|r| r.f1)
            .collect();
        picked.iter().sum::<f64>() / picked.len() as f64
    };

    Ok(EvalReport {
        mode: mode.to_string(),
        total_tokens: total,
        token_accuracy: if total > 0 {
            correct as f64 / total as f64
        } else {
            0.0
        },
        macro_token_weighted: macro_over(&per_type_token_weighted),
        macro_token_unweighted: macro_over(&per_type_token_unweighted),
        macro_span: macro_over(&per_type_span),
        per_tag,
        per_type_token_weighted,
        per_type_token_unweighted,
        per_type_span,
        errors,
        orphan_fixes,
    })
}

/// Scores predictions against gold. The returned report carries both token-
/// and span-level sections; this entry point exists for the token tables.
pub fn token_report(gold: &Corpus, pred: &[Vec<BioLabel>]) -> Result<EvalReport, EvalError> {
    evaluate(gold, pred, "evaluation")
}

/// Scores predictions against gold; entry point for the strict span-level
/// sections of the same full report.
pub fn span_report(gold: &Corpus, pred: &[Vec<BioLabel>]) -> Result<EvalReport, EvalError> {
    evaluate(gold, pred, "evaluation")
}

/// Tags a foreign-language corpus with the model's own template and cluster
/// configuration, then emits a standard report labeled crosslingual. The
/// supplied clusters must match the model's feature fingerprint.
pub fn crosslingual_eval(
    model: &CrfModel,
    foreign: &Corpus,
    clusters: &ClusterMap,
) -> Result<EvalReport, EvalError> {
    let featurizer = Featurizer::new(clusters.clone());
    let pred = model.tag_corpus(&featurizer, foreign, false)?;
    evaluate(foreign, &pred, "crosslingual evaluation")
}

/// Maps foreign entity-type names (the part after `B-`/`I-`) onto the local
/// tag set. Types that already parse locally pass through unchanged, so the
/// empty mapping is the identity.
#[derive(Debug, Clone, Default)]
pub struct TagMapping {
    map: HashMap<String, EntityType>,
}

impl TagMapping {
    pub fn identity() -> Self {
        TagMapping::default()
    }

    pub fn insert(&mut self, foreign: impl Into<String>, entity_type: EntityType) {
        self.map.insert(foreign.into(), entity_type);
    }

    /// Reads `FOREIGN_TYPE<TAB>LOCAL_TYPE` lines; the local side must be
    /// one of PER/ORG/LOC/OTHER.
    pub fn load(reader: impl BufRead) -> Result<Self, EvalError> {
        let mut mapping = TagMapping::identity();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| EvalError::MappingFormat {
                line: line_no,
                reason: e.to_string(),
            })?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (foreign, local) =
                line.split_once('\t').ok_or(EvalError::MappingFormat {
                    line: line_no,
                    reason: "expected `FOREIGN<TAB>LOCAL`".to_string(),
                })?;
            let entity_type =
                local.parse::<EntityType>().map_err(|_| EvalError::MappingFormat {
                    line: line_no,
                    reason: format!("`{local}` is not a local entity type"),
                })?;
            mapping.insert(foreign, entity_type);
        }
        Ok(mapping)
    }

    /// Maps one raw label string. `O` passes through; `B-X`/`I-X` keep their
    /// prefix while `X` is translated. Anything else is unmappable.
    pub fn map_label(&self, raw: &str) -> Result<BioLabel, EvalError> {
        if raw == "O" {
            return Ok(BioLabel::O);
        }
        let unmappable = || EvalError::UnmappableTag {
            tag: raw.to_string(),
        };
        let (prefix, rest) = raw.split_once('-').ok_or_else(unmappable)?;
        let entity_type = self
            .map
            .get(rest)
            .copied()
            .or_else(|| rest.parse::<EntityType>().ok())
            .ok_or_else(unmappable)?;
        match prefix {
            "B" => Ok(BioLabel::B(entity_type)),
            "I" => Ok(BioLabel::I(entity_type)),
            _ => Err(unmappable()),
        }
    }

    /// Applies the mapping to every label of a raw corpus.
    pub fn map_corpus(&self, raw: &RawCorpus) -> Result<Corpus, EvalError> {
        let mut sentences = Vec::with_capacity(raw.sentences.len());
        for sentence in &raw.sentences {
            let tokens = sentence.iter().map(|(t, _)| t.clone()).collect();
            let labels = sentence
                .iter()
                .map(|(_, l)| self.map_label(l))
                .collect::<Result<Vec<BioLabel>, EvalError>>()?;
            sentences.push(crate::corpus::TaggedSentence::new(tokens, labels)?);
        }
        Ok(Corpus::new(sentences, raw.source_id.clone()))
    }
}

/// One line per token-level disagreement: sentence and token index, the
/// surface, gold and predicted tags, and a ±2-token context window with the
/// errant token bracketed.
pub fn error_dump(gold: &Corpus, pred: &[Vec<BioLabel>]) -> Result<String, EvalError> {
    check_shapes(gold, pred)?;
    let mut out = String::new();
    for (si, (sentence, pred_labels)) in gold.sentences().iter().zip(pred).enumerate() {
        for (ti, (&g, &p)) in sentence.labels().iter().zip(pred_labels).enumerate() {
            if g == p {
                continue;
            }
            let lo = ti.saturating_sub(2);
            let hi = (ti + 3).min(sentence.len());
            let context: Vec<String> = (lo..hi)
                .map(|t| {
                    if t == ti {
                        format!("[{}]", sentence.surface(t))
                    } else {
                        sentence.surface(t).to_string()
                    }
                })
                .collect();
            writeln!(
                out,
                "{si}\t{ti}\t{}\t{g}\t{p}\t{}",
                sentence.surface(ti),
                context.join(" ")
            )
            .expect("string write");
        }
    }
    Ok(out)
}

impl EvalReport {
    /// Aligned human-readable tables followed by machine-readable
    /// tab-separated lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut undefined_cells: Vec<String> = Vec::new();

        let _ = writeln!(out, "Report: {}", self.mode);
        let _ = writeln!(
            out,
            "Tokens: {}   Accuracy: {:.4}   Errors: {}",
            self.total_tokens,
            self.token_accuracy,
            self.errors.len()
        );
        if self.orphan_fixes > 0 {
            let _ = writeln!(
                out,
                "Orphan I- labels treated as B- during span extraction: {}",
                self.orphan_fixes
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Tag         Precision   Recall       F1  Support");
        for row in &self.per_tag {
            let _ = writeln!(
                out,
                "{:<10} {:>10.4} {:>8.4} {:>8.4} {:>8}",
                row.label.to_string(),
                row.precision,
                row.recall,
                row.f1,
                row.support
            );
            if row.precision_undefined {
                undefined_cells.push(format!("{} precision", row.label));
            }
            if row.recall_undefined {
                undefined_cells.push(format!("{} recall", row.label));
            }
        }

        for (title, rows) in [
            ("Entity type (token, support-weighted)", &self.per_type_token_weighted),
            ("Entity type (token, unweighted)", &self.per_type_token_unweighted),
            ("Entity type (strict span)", &self.per_type_span),
        ] {
            let _ = writeln!(out);
            let _ = writeln!(out, "{title}");
            let _ = writeln!(out, "Type        Precision   Recall       F1  Support");
            for row in rows {
                let _ = writeln!(
                    out,
                    "{:<10} {:>10.4} {:>8.4} {:>8.4} {:>8}",
                    row.entity_type.to_string(),
                    row.precision,
                    row.recall,
                    row.f1,
                    row.support
                );
                if row.undefined {
                    undefined_cells.push(format!("{} ({title})", row.entity_type));
                }
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Macro F1 over PER/ORG/LOC   token weighted {:.4}   token unweighted {:.4}   span {:.4}",
            self.macro_token_weighted, self.macro_token_unweighted, self.macro_span
        );
        if !undefined_cells.is_empty() {
            let _ = writeln!(
                out,
                "Note: zero-denominator values reported as 0: {}",
                undefined_cells.join(", ")
            );
        }

        let _ = writeln!(out);
        let _ = writeln!(out, "mode\t{}", self.mode);
        let _ = writeln!(out, "tokens\t{}", self.total_tokens);
        let _ = writeln!(out, "accuracy\t{}", self.token_accuracy);
        for row in &self.per_tag {
            let _ = writeln!(
                out,
                "tag\t{}\t{}\t{}\t{}\t{}",
                row.label, row.precision, row.recall, row.f1, row.support
            );
        }
        for (key, rows) in [
            ("type_token_weighted", &self.per_type_token_weighted),
            ("type_token_unweighted", &self.per_type_token_unweighted),
            ("type_span", &self.per_type_span),
        ] {
            for row in rows {
                let _ = writeln!(
                    out,
                    "{key}\t{}\t{}\t{}\t{}\t{}",
                    row.entity_type, row.precision, row.recall, row.f1, row.support
                );
            }
        }
        let _ = writeln!(out, "macro_token_weighted\t{}", self.macro_token_weighted);
        let _ = writeln!(out, "macro_token_unweighted\t{}", self.macro_token_unweighted);
        let _ = writeln!(out, "macro_span\t{}", self.macro_span);
        let _ = writeln!(out, "orphan_fixes\t{}", self.orphan_fixes);
        let _ = writeln!(out, "errors\t{}", self.errors.len());
        for e in &self.errors {
            let _ = writeln!(
                out,
                "error\t{}\t{}\t{}\t{}",
                e.sentence, e.token, e.gold, e.predicted
            );
        }
        out
    }
}
