//! Exact inference on the linear chain: log-partition, marginals, path
//! probabilities, and Viterbi decoding, all in log space.

use crate::corpus::BioLabel;

use super::{CrfError, CrfModel, EncodedSentence, LabelAlphabet, Params};

/// Numerically stable `log Σ exp(x_i)`. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max; // empty, all -inf, or a +inf entry dominates
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Per-position state scores: `scores[t][j] = Σ_{f active at t} w_state[f, j]`.
pub(crate) fn state_scores(params: Params<'_>, sentence: &EncodedSentence) -> Vec<Vec<f64>> {
    let l = params.num_labels();
    sentence
        .features()
        .iter()
        .map(|active| {
            (0..l)
                .map(|j| active.iter().map(|&f| params.state(f, j)).sum())
                .collect()
        })
        .collect()
}

/// Forward lattice: `alpha[t][j] = log Σ_{y_0..y_t, y_t=j} ∏ β`.
pub(crate) fn forward(params: Params<'_>, state: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let l = params.num_labels();
    let mut alpha = Vec::with_capacity(state.len());
    alpha.push(
        (0..l)
            .map(|j| state[0][j] + params.begin(j))
            .collect::<Vec<f64>>(),
    );
    for t in 1..state.len() {
        let prev = &alpha[t - 1];
        let mut row = Vec::with_capacity(l);
        let mut terms = vec![0.0; l];
        for (j, &state_score) in state[t].iter().enumerate() {
            for (i, term) in terms.iter_mut().enumerate() {
                *term = prev[i] + params.trans(i, j);
            }
            row.push(state_score + logsumexp(&terms));
        }
        alpha.push(row);
    }
    alpha
}

/// Backward lattice: `beta[t][i] = log Σ_{y_{t+1}..y_T | y_t=i} ∏ β`,
/// excluding position `t`'s own state score.
pub(crate) fn backward(params: Params<'_>, state: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let l = params.num_labels();
    let t_len = state.len();
    let mut beta = vec![vec![0.0; l]; t_len];
    for t in (0..t_len - 1).rev() {
        let mut terms = vec![0.0; l];
        for i in 0..l {
            for (j, term) in terms.iter_mut().enumerate() {
                *term = params.trans(i, j) + state[t + 1][j] + beta[t + 1][j];
            }
            beta[t][i] = logsumexp(&terms);
        }
    }
    beta
}

/// The `[T × L × L]` tensor of log potentials: entry `(t, j, i)` scores label
/// `j` at position `t` following label `i`. At `t = 0` the dedicated begin
/// row replaces the transition term, so the entry is constant over `i`.
pub fn log_potentials(
    model: &CrfModel,
    sentence: &EncodedSentence,
) -> Result<Vec<Vec<Vec<f64>>>, CrfError> {
    model.check_fingerprint(sentence)?;
    let params = model.params();
    let l = params.num_labels();
    let state = state_scores(params, sentence);
    Ok((0..sentence.len())
        .map(|t| {
            (0..l)
                .map(|j| {
                    (0..l)
                        .map(|i| {
                            if t == 0 {
                                state[0][j] + params.begin(j)
                            } else {
                                state[t][j] + params.trans(i, j)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// `log Z`: the log-sum over all `L^T` label sequences of their path scores.
pub fn log_partition(model: &CrfModel, sentence: &EncodedSentence) -> Result<f64, CrfError> {
    model.check_fingerprint(sentence)?;
    let params = model.params();
    let state = state_scores(params, sentence);
    let alpha = forward(params, &state);
    let logz = logsumexp(alpha.last().expect("T >= 1"));
    if !logz.is_finite() {
        return Err(CrfError::NonFinite(format!("log partition is {logz}")));
    }
    Ok(logz)
}

pub(crate) fn path_score(
    params: Params<'_>,
    state: &[Vec<f64>],
    labels: &[u32],
) -> f64 {
    let mut score = params.begin(labels[0] as usize) + state[0][labels[0] as usize];
    for t in 1..labels.len() {
        score += params.trans(labels[t - 1] as usize, labels[t] as usize)
            + state[t][labels[t] as usize];
    }
    score
}

/// `P(y|x) = exp(path score − log Z)`. Always in `(0, 1]` mathematically;
/// extremely unlikely paths may underflow to `0.0`.
pub fn sequence_probability(
    model: &CrfModel,
    sentence: &EncodedSentence,
    labels: &[u32],
) -> Result<f64, CrfError> {
    model.check_fingerprint(sentence)?;
    if labels.len() != sentence.len() {
        return Err(CrfError::LabelLengthMismatch {
            labels: labels.len(),
            tokens: sentence.len(),
        });
    }
    let l = model.num_labels();
    if let Some(&id) = labels.iter().find(|&&id| id as usize >= l) {
        return Err(CrfError::LabelOutOfRange { id, count: l });
    }
    let params = model.params();
    let state = state_scores(params, sentence);
    let alpha = forward(params, &state);
    let logz = logsumexp(alpha.last().expect("T >= 1"));
    Ok((path_score(params, &state, labels) - logz).exp())
}

/// Node and edge marginals from forward-backward.
///
/// `node[t][j] = P(y_t = j | x)`. `edge[t][i][j] = P(y_t = i, y_{t+1} = j | x)`
/// couples positions `t` and `t + 1`, so `edge.len() == T − 1` and
/// `Σ_j edge[t][i][j] = node[t][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub node: Vec<Vec<f64>>,
    pub edge: Vec<Vec<Vec<f64>>>,
}

pub fn marginals(model: &CrfModel, sentence: &EncodedSentence) -> Result<Marginals, CrfError> {
    model.check_fingerprint(sentence)?;
    let params = model.params();
    let l = params.num_labels();
    let state = state_scores(params, sentence);
    let alpha = forward(params, &state);
    let beta = backward(params, &state);
    let logz = logsumexp(alpha.last().expect("T >= 1"));
    if !logz.is_finite() {
        return Err(CrfError::NonFinite(format!("log partition is {logz}")));
    }
    let t_len = sentence.len();
    let node: Vec<Vec<f64>> = (0..t_len)
        .map(|t| {
            (0..l)
                .map(|j| (alpha[t][j] + beta[t][j] - logz).exp())
                .collect()
        })
        .collect();
    let edge: Vec<Vec<Vec<f64>>> = (0..t_len - 1)
        .map(|t| {
            (0..l)
                .map(|i| {
                    (0..l)
                        .map(|j| {
                            (alpha[t][i]
                                + params.trans(i, j)
                                + state[t + 1][j]
                                + beta[t + 1][j]
                                - logz)
                                .exp()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(Marginals { node, edge })
}

/// Hard BIO constraints for decoding: `I-X` may only follow `B-X` or `I-X`
/// and may not start a sentence. `true` means allowed.
pub(crate) struct TransitionMask {
    begin: Vec<bool>,
    trans: Vec<Vec<bool>>,
}

impl TransitionMask {
    pub(crate) fn bio(labels: &LabelAlphabet) -> Self {
        let l = labels.len();
        let allowed_after = |from: BioLabel, to: BioLabel| match to {
            BioLabel::I(t) => {
                matches!(from, BioLabel::B(p) | BioLabel::I(p) if p == t)
            }
            _ => true,
        };
        TransitionMask {
            begin: (0..l)
                .map(|j| !labels.label(j as u32).is_inside())
                .collect(),
            trans: (0..l)
                .map(|i| {
                    (0..l)
                        .map(|j| {
                            allowed_after(labels.label(i as u32), labels.label(j as u32))
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

fn viterbi_ids(
    params: Params<'_>,
    sentence: &EncodedSentence,
    mask: Option<&TransitionMask>,
) -> Result<Vec<u32>, CrfError> {
    let l = params.num_labels();
    let t_len = sentence.len();
    let state = state_scores(params, sentence);

    let mut score = vec![vec![f64::NEG_INFINITY; l]; t_len];
    let mut back = vec![vec![0u32; l]; t_len];
    for j in 0..l {
        let blocked = mask.is_some_and(|m| !m.begin[j]);
        if !blocked {
            score[0][j] = state[0][j] + params.begin(j);
        }
    }
    for t in 1..t_len {
        for j in 0..l {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0u32;
            for (i, &prev_score) in score[t - 1].iter().enumerate() {
                if mask.is_some_and(|m| !m.trans[i][j]) {
                    continue;
                }
                // Strict comparison keeps the lowest predecessor id on ties.
                let candidate = prev_score + params.trans(i, j);
                if candidate > best {
                    best = candidate;
                    best_i = i as u32;
                }
            }
            score[t][j] = best + state[t][j];
            back[t][j] = best_i;
        }
    }

    let mut best_j = 0u32;
    let mut best = f64::NEG_INFINITY;
    for (j, &s) in score[t_len - 1].iter().enumerate() {
        if s > best {
            best = s;
            best_j = j as u32;
        }
    }
    if !best.is_finite() {
        return Err(CrfError::NonFinite(format!("best path score is {best}")));
    }
    let mut path = vec![0u32; t_len];
    path[t_len - 1] = best_j;
    for t in (1..t_len).rev() {
        path[t - 1] = back[t][path[t] as usize];
    }
    Ok(path)
}

/// The highest-scoring label sequence. Ties break toward the lower label id
/// at every position, making the result fully deterministic.
pub fn viterbi(model: &CrfModel, sentence: &EncodedSentence) -> Result<Vec<u32>, CrfError> {
    model.check_fingerprint(sentence)?;
    viterbi_ids(model.params(), sentence, None)
}

/// Viterbi with impossible BIO transitions masked at `-inf`: `I-X` only
/// after `B-X`/`I-X`, never sentence-initial.
pub fn viterbi_constrained(
    model: &CrfModel,
    sentence: &EncodedSentence,
) -> Result<Vec<u32>, CrfError> {
    model.check_fingerprint(sentence)?;
    let mask = TransitionMask::bio(model.labels());
    viterbi_ids(model.params(), sentence, Some(&mask))
}
