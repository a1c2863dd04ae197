//! Inter-annotator agreement over two parallel BIO label sequences:
//! observed agreement, chance agreement, and Cohen's kappa.
//!
//! The agreement unit is the per-token full BIO label, so `B-PER` versus
//! `I-PER` counts as a disagreement. Chance agreement uses the marginal
//! label distributions of the two annotators over the categories observed
//! in either annotation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{BioLabel, Corpus};

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("annotation length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty annotation pair")]
    Empty,
    #[error("sentence count mismatch: {a} vs {b}")]
    SentenceCountMismatch { a: usize, b: usize },
    #[error("sentence {sentence}: token surface mismatch at position {token} (`{a}` vs `{b}`)")]
    SurfaceMismatch {
        sentence: usize,
        token: usize,
        a: String,
        b: String,
    },
    #[error(
        "kappa undefined: chance agreement is 1 (observed {observed:.6}, chance {chance:.6})"
    )]
    UndefinedKappa { observed: f64, chance: f64 },
}

/// Token-aligned label sequences from two annotators.
#[derive(Debug, Clone)]
pub struct AnnotationPair {
    labels_a: Vec<BioLabel>,
    labels_b: Vec<BioLabel>,
}

impl AnnotationPair {
    pub fn new(labels_a: Vec<BioLabel>, labels_b: Vec<BioLabel>) -> Result<Self, AgreementError> {
        if labels_a.len() != labels_b.len() {
            return Err(AgreementError::LengthMismatch {
                a: labels_a.len(),
                b: labels_b.len(),
            });
        }
        if labels_a.is_empty() {
            return Err(AgreementError::Empty);
        }
        Ok(AnnotationPair { labels_a, labels_b })
    }

    /// Builds a pair from two annotated versions of the same text, verifying
    /// that sentence boundaries and token surfaces align position-wise.
    pub fn from_corpora(a: &Corpus, b: &Corpus) -> Result<Self, AgreementError> {
        if a.len() != b.len() {
            return Err(AgreementError::SentenceCountMismatch {
                a: a.len(),
                b: b.len(),
            });
        }
        let mut labels_a = Vec::with_capacity(a.token_count());
        let mut labels_b = Vec::with_capacity(b.token_count());
        for (si, (sa, sb)) in a.sentences().iter().zip(b.sentences()).enumerate() {
            if sa.len() != sb.len() {
                return Err(AgreementError::LengthMismatch {
                    a: sa.len(),
                    b: sb.len(),
                });
            }
            for ti in 0..sa.len() {
                if sa.surface(ti) != sb.surface(ti) {
                    return Err(AgreementError::SurfaceMismatch {
                        sentence: si,
                        token: ti,
                        a: sa.surface(ti).to_string(),
                        b: sb.surface(ti).to_string(),
                    });
                }
            }
            labels_a.extend_from_slice(sa.labels());
            labels_b.extend_from_slice(sb.labels());
        }
        AnnotationPair::new(labels_a, labels_b)
    }

    pub fn len(&self) -> usize {
        self.labels_a.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn labels_a(&self) -> &[BioLabel] {
        &self.labels_a
    }

    pub fn labels_b(&self) -> &[BioLabel] {
        &self.labels_b
    }
}

/// Category-by-category agreement counts. Rows index annotator A, columns
/// annotator B; categories are listed in canonical label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub categories: Vec<BioLabel>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    fn from_pair(pair: &AnnotationPair) -> Self {
        let categories: Vec<BioLabel> = pair
            .labels_a
            .iter()
            .chain(&pair.labels_b)
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index = |l: BioLabel| categories.binary_search(&l).expect("observed category");
        let mut counts = vec![vec![0u64; categories.len()]; categories.len()];
        for (&a, &b) in pair.labels_a.iter().zip(&pair.labels_b) {
            counts[index(a)][index(b)] += 1;
        }
        ConfusionMatrix { categories, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Per-category counts for annotator A (row sums).
    pub fn marginals_a(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    /// Per-category counts for annotator B (column sums).
    pub fn marginals_b(&self) -> Vec<u64> {
        (0..self.categories.len())
            .map(|c| self.counts.iter().map(|row| row[c]).sum())
            .collect()
    }

    fn diagonal(&self) -> u64 {
        (0..self.categories.len()).map(|i| self.counts[i][i]).sum()
    }
}

/// Observed agreement, chance agreement, Cohen's kappa, and the confusion
/// matrix they were computed from.
#[derive(Debug, Clone)]
pub struct AgreementReport {
    pub observed: f64,
    pub chance: f64,
    pub kappa: f64,
    pub confusion: ConfusionMatrix,
}

/// Fraction of positions where both annotators chose the same label.
pub fn observed_agreement(pair: &AnnotationPair) -> f64 {
    let agree = pair
        .labels_a
        .iter()
        .zip(&pair.labels_b)
        .filter(|(a, b)| a == b)
        .count();
    agree as f64 / pair.len() as f64
}

/// Agreement expected by chance from the two annotators' marginal label
/// distributions: `sum_c p_a(c) * p_b(c)`.
pub fn chance_agreement(pair: &AnnotationPair) -> f64 {
    let confusion = ConfusionMatrix::from_pair(pair);
    chance_from_confusion(&confusion)
}

fn chance_from_confusion(confusion: &ConfusionMatrix) -> f64 {
    let n = confusion.total() as f64;
    confusion
        .marginals_a()
        .iter()
        .zip(confusion.marginals_b())
        .map(|(&a, b)| (a as f64 / n) * (b as f64 / n))
        .sum()
}

/// Cohen's kappa: `(p_o - p_e) / (1 - p_e)`.
///
/// Errors with [`AgreementError::UndefinedKappa`] when the chance agreement
/// is 1; the error carries the observed and chance values.
pub fn cohens_kappa(pair: &AnnotationPair) -> Result<AgreementReport, AgreementError> {
    report_from_confusion(ConfusionMatrix::from_pair(pair))
}

/// Recomputes the full report from agreement counts alone.
pub fn report_from_confusion(
    confusion: ConfusionMatrix,
) -> Result<AgreementReport, AgreementError> {
    let observed = confusion.diagonal() as f64 / confusion.total() as f64;
    let chance = chance_from_confusion(&confusion);
    if chance >= 1.0 {
        return Err(AgreementError::UndefinedKappa { observed, chance });
    }
    Ok(AgreementReport {
        observed,
        chance,
        kappa: (observed - chance) / (1.0 - chance),
        confusion,
    })
}

impl AgreementReport {
    /// Aligned text table plus machine-readable `key<TAB>value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = self
            .confusion
            .categories
            .iter()
            .map(|c| c.to_string())
            .collect();
        let width = names.iter().map(String::len).max().unwrap_or(1).max(7);
        let _ = write!(out, "{:width$} ", "A \\ B");
        for name in &names {
            let _ = write!(out, " {name:>width$}");
        }
        out.push('\n');
        for (i, name) in names.iter().enumerate() {
            let _ = write!(out, "{name:width$} ");
            for count in &self.confusion.counts[i] {
                let _ = write!(out, " {count:>width$}");
            }
            out.push('\n');
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Observed agreement   {:.4}", self.observed);
        let _ = writeln!(out, "Agreement by chance  {:.4}", self.chance);
        let _ = writeln!(out, "Cohen's kappa        {:.4}", self.kappa);
        let _ = writeln!(out);
        let _ = writeln!(out, "observed\t{:.6}", self.observed);
        let _ = writeln!(out, "chance\t{:.6}", self.chance);
        let _ = writeln!(out, "kappa\t{:.6}", self.kappa);
        out
    }
}
