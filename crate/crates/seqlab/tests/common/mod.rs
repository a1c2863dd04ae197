//! Shared helpers for integration tests: a brute-force enumeration oracle
//! for tiny chain models, random model generators, and a small hand-labeled
//! training corpus.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqlab::corpus::{parse_conll, BioLabel, Corpus};
use seqlab::crf::{CrfModel, EncodedSentence, LabelAlphabet};
use seqlab::features::FeatureAlphabet;

/// Scores one label path against the `[T][j][i]` potential tensor: the `t=0`
/// factor ignores the previous-label axis, later factors chain on it.
pub fn oracle_path_score(potentials: &[Vec<Vec<f64>>], path: &[usize]) -> f64 {
    let mut score = potentials[0][path[0]][0];
    for t in 1..path.len() {
        score += potentials[t][path[t]][path[t - 1]];
    }
    score
}

/// All `L^T` label paths in ascending code order, where position 0 is the
/// least-significant digit of the code.
pub fn oracle_all_paths(t: usize, l: usize) -> Vec<Vec<usize>> {
    let total = l.pow(t as u32);
    (0..total)
        .map(|mut code| {
            (0..t)
                .map(|_| {
                    let digit = code % l;
                    code /= l;
                    digit
                })
                .collect()
        })
        .collect()
}

/// `log Z` by explicit summation over every path.
pub fn oracle_log_partition(potentials: &[Vec<Vec<f64>>]) -> f64 {
    let t = potentials.len();
    let l = potentials[0].len();
    let scores: Vec<f64> = oracle_all_paths(t, l)
        .iter()
        .map(|p| oracle_path_score(potentials, p))
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// The maximizing path by exhaustive scan. Ties keep the first strict
/// maximum in code order, which matches the decoder's lowest-id tie-break.
pub fn oracle_best_path(potentials: &[Vec<Vec<f64>>]) -> (f64, Vec<usize>) {
    let t = potentials.len();
    let l = potentials[0].len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for path in oracle_all_paths(t, l) {
        let score = oracle_path_score(potentials, &path);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, path));
        }
    }
    best.expect("at least one path")
}

/// Node and edge marginals by explicit summation over every path.
pub fn oracle_marginals(potentials: &[Vec<Vec<f64>>]) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let t = potentials.len();
    let l = potentials[0].len();
    let logz = oracle_log_partition(potentials);
    let mut node = vec![vec![0.0; l]; t];
    let mut edge = vec![vec![vec![0.0; l]; l]; t.saturating_sub(1)];
    for path in oracle_all_paths(t, l) {
        let p = (oracle_path_score(potentials, &path) - logz).exp();
        for (pos, &label) in path.iter().enumerate() {
            node[pos][label] += p;
        }
        for pos in 0..t - 1 {
            edge[pos][path[pos]][path[pos + 1]] += p;
        }
    }
    (node, edge)
}

/// A model over the first `num_labels` canonical BIO labels and synthetic
/// feature names, with weights drawn uniformly from ±2.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    num_features: usize,
    num_labels: usize,
    fingerprint: u64,
) -> CrfModel {
    let labels = LabelAlphabet::from_labels(
        BioLabel::universe().take(num_labels).collect(),
    )
    .expect("canonical labels are distinct");
    let features =
        FeatureAlphabet::from_features((0..num_features).map(|i| format!("f{i}")).collect());
    let dim = num_features * num_labels + num_labels * num_labels + num_labels;
    let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    CrfModel::from_parts(labels, features, weights, fingerprint).expect("valid parts")
}

/// A random encoded sentence of length `len` with 1–3 active features per
/// position, optionally carrying random gold labels.
pub fn random_sentence(
    rng: &mut ChaCha8Rng,
    len: usize,
    num_features: usize,
    num_labels: usize,
    labeled: bool,
    fingerprint: u64,
) -> EncodedSentence {
    let features: Vec<Vec<u32>> = (0..len)
        .map(|_| {
            let count = rng.gen_range(1..=3usize);
            let mut ids: Vec<u32> =
                (0..count).map(|_| rng.gen_range(0..num_features as u32)).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    let labels = labeled.then(|| {
        (0..len)
            .map(|_| rng.gen_range(0..num_labels as u32))
            .collect()
    });
    EncodedSentence::new(features, labels, num_features, num_labels, fingerprint)
        .expect("bounds hold by construction")
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small fully hand-labeled corpus with PER/ORG/LOC entities.
pub fn toy_corpus() -> Corpus {
    let text = "\
Si\tO
Juan\tB-PER
Osme\u{f1}a\tI-PER
miadto\tO
sa\tO
Sugbo\tB-LOC
.\tO

Ang\tO
Sangguniang\tB-ORG
Panlungsod\tI-ORG
nagpagawas\tO
og\tO
resolusyon\tO
.\tO

Nagpuyo\tO
si\tO
Maria\tB-PER
Labella\tI-PER
sa\tO
Lungsod\tB-LOC
sa\tI-LOC
Naga\tI-LOC
.\tO

Ang\tO
Kapulisan\tB-ORG
sa\tI-ORG
Lalawigan\tI-ORG
midakop\tO
sa\tO
suspetsado\tO
.\tO

Miabot\tO
ang\tO
delegasyon\tO
gikan\tO
sa\tO
Manila\tB-LOC
kagahapon\tO
.\tO

Si\tO
Pedro\tB-PER
Durano\tI-PER
ang\tO
bag-ong\tO
kapitan\tO
sa\tO
barangay\tO
.\tO

Gisirad-an\tO
ang\tO
Unibersidad\tB-ORG
sa\tI-ORG
San\tI-ORG
Carlos\tI-ORG
tungod\tO
sa\tO
bagyo\tO
.\tO

Ang\tO
Sapa\tB-LOC
sa\tI-LOC
Butuanon\tI-LOC
miawas\tO
human\tO
sa\tO
ulan\tO
.\tO

Mipauli\tO
si\tO
Ana\tB-PER
gikan\tO
sa\tO
Davao\tB-LOC
.\tO

Ang\tO
mga\tO
sakop\tO
sa\tO
Kiwanis\tB-ORG
Club\tI-ORG
nanghatag\tO
og\tO
tabang\tO
.\tO

Nagtigom\tO
ang\tO
mga\tO
opisyal\tO
sa\tO
Kapitolyo\tB-LOC
.\tO

Si\tO
Gobernador\tO
Garcia\tB-PER
mibisita\tO
sa\tO
Bohol\tB-LOC
.\tO
";
    parse_conll(text.as_bytes(), "toy").expect("toy corpus parses")
}
