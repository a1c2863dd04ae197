//! The training objective: regularized negative log-likelihood of a batch
//! and its exact gradient from forward-backward marginals.

use rayon::prelude::*;

use super::inference::{backward, forward, logsumexp, path_score, state_scores};
use super::{CrfError, CrfModel, EncodedSentence, Layout, Params};

/// Sentences per parallel work unit. Fixed so the floating-point summation
/// order — chunk-internal sums followed by an ordered chunk reduction — is
/// identical regardless of thread count.
const CHUNK_SENTENCES: usize = 256;

/// NLL and gradient contribution of one labeled sentence, accumulated into
/// `grad`. Returns `log Z − gold path score`.
fn sentence_nll_grad(
    params: Params<'_>,
    sentence: &EncodedSentence,
    grad: &mut [f64],
) -> Result<f64, CrfError> {
    let labels = sentence.labels().ok_or(CrfError::MissingLabels)?;
    let l = params.num_labels();
    let layout = params.layout;
    let t_len = sentence.len();

    let state = state_scores(params, sentence);
    let alpha = forward(params, &state);
    let beta = backward(params, &state);
    let logz = logsumexp(alpha.last().expect("T >= 1"));
    let gold = path_score(params, &state, labels);

    // Expected minus empirical state-feature counts.
    for (t, active) in sentence.features().iter().enumerate() {
        for j in 0..l {
            let p = (alpha[t][j] + beta[t][j] - logz).exp();
            for &f in active {
                grad[layout.state(f, j)] += p;
            }
        }
        let y = labels[t] as usize;
        for &f in active {
            grad[layout.state(f, y)] -= 1.0;
        }
    }

    // Begin row.
    for j in 0..l {
        grad[layout.begin(j)] += (alpha[0][j] + beta[0][j] - logz).exp();
    }
    grad[layout.begin(labels[0] as usize)] -= 1.0;

    // Transitions.
    for t in 1..t_len {
        for i in 0..l {
            for j in 0..l {
                let p = (alpha[t - 1][i]
                    + params.trans(i, j)
                    + state[t][j]
                    + beta[t][j]
                    - logz)
                    .exp();
                grad[layout.trans(i, j)] += p;
            }
        }
        grad[layout.trans(labels[t - 1] as usize, labels[t] as usize)] -= 1.0;
    }

    Ok(logz - gold)
}

/// The smooth objective over a dataset: `Σ NLL + (c2/2)·‖w‖²`, evaluated at
/// an arbitrary weight vector. L1 is not included here; the optimizer owns
/// it.
pub(crate) struct Objective<'a> {
    data: &'a [EncodedSentence],
    layout: Layout,
    c2: f64,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a [EncodedSentence], layout: Layout, c2: f64) -> Self {
        Objective { data, layout, c2 }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Loss and gradient at `x`. Sentences are processed in fixed-size
    /// chunks in parallel; the chunk results are folded in order, so the
    /// value is bit-identical for any thread count.
    pub fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), CrfError> {
        assert_eq!(x.len(), self.layout.dim(), "weight vector length");
        let params = Params {
            w: x,
            layout: self.layout,
        };
        let chunk_results: Vec<Result<(f64, Vec<f64>), CrfError>> = self
            .data
            .par_chunks(CHUNK_SENTENCES)
            .map(|chunk| {
                let mut grad = vec![0.0; self.layout.dim()];
                let mut loss = 0.0;
                for sentence in chunk {
                    loss += sentence_nll_grad(params, sentence, &mut grad)?;
                }
                Ok((loss, grad))
            })
            .collect();

        let mut loss = 0.0;
        let mut grad = vec![0.0; self.layout.dim()];
        for result in chunk_results {
            let (chunk_loss, chunk_grad) = result?;
            loss += chunk_loss;
            for (g, c) in grad.iter_mut().zip(&chunk_grad) {
                *g += c;
            }
        }

        if self.c2 > 0.0 {
            let norm_sq: f64 = x.iter().map(|w| w * w).sum();
            loss += 0.5 * self.c2 * norm_sq;
            for (g, w) in grad.iter_mut().zip(x) {
                *g += self.c2 * w;
            }
        }

        if !loss.is_finite() {
            return Err(CrfError::NonFinite(format!("objective is {loss}")));
        }
        Ok((loss, grad))
    }
}

/// Regularized batch NLL at the model's own weights:
/// `Σ_sentences (log Z − gold score) + (c2/2)·‖w‖²`, with gradient
/// `(expected − empirical counts) + c2·w`. Every sentence must carry gold
/// labels.
pub fn nll_and_gradient(
    model: &CrfModel,
    batch: &[EncodedSentence],
    c2: f64,
) -> Result<(f64, Vec<f64>), CrfError> {
    if batch.is_empty() {
        return Err(CrfError::EmptyDataset);
    }
    for sentence in batch {
        model.check_fingerprint(sentence)?;
    }
    let objective = Objective::new(batch, model.layout(), c2);
    objective.value_and_grad(model.weights())
}
