//! Feature extraction for sequence labeling.
//!
//! The template turns each token-in-context into string features: case and
//! digit flags, prefix/suffix character bigrams and trigrams, sentence
//! boundary markers, a two-word context window, the lowercased surface, and
//! a word-cluster id obtained by k-means over an external embedding table.

use std::collections::HashMap;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::TaggedSentence;

/// Bumped whenever the emitted feature strings change shape; part of the
/// model fingerprint.
pub const TEMPLATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("token index {index} out of range for sentence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no feature reaches the frequency cutoff {min_frequency}")]
    EmptyAlphabet { min_frequency: u32 },
    #[error("line {line}: {reason}")]
    ClusterFormat { line: usize, reason: String },
    #[error("cluster count must satisfy 2 <= k <= vocabulary size ({vocab}), got {k}")]
    BadClusterCount { k: usize, vocab: usize },
    #[error("line {line}: embedding entry is malformed: {reason}")]
    EmbeddingFormat { line: usize, reason: String },
    #[error("embedding for `{word}` contains a non-finite value")]
    NonFiniteEmbedding { word: String },
    #[error("embedding table is empty")]
    EmptyTable,
}

/// The feature strings emitted for one token. Order is fixed by the template
/// and there are no duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet(Vec<String>);

impl FeatureSet {
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn contains(&self, feature: &str) -> bool {
        self.0.iter().any(|f| f == feature)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn char_ngram(chars: &[char], n: usize, suffix: bool) -> String {
    if chars.len() <= n {
        return chars.iter().collect();
    }
    if suffix {
        chars[chars.len() - n..].iter().collect()
    } else {
        chars[..n].iter().collect()
    }
}

/// Expands the feature template for the token at `index`.
pub fn extract_token_features(
    sentence: &TaggedSentence,
    index: usize,
    clusters: &ClusterMap,
) -> Result<FeatureSet, FeatureError> {
    let len = sentence.len();
    if index >= len {
        return Err(FeatureError::IndexOutOfRange { index, len });
    }
    let surface = sentence.surface(index);
    let lower = surface.to_lowercase();
    let chars: Vec<char> = surface.chars().collect();
    let lower_chars: Vec<char> = lower.chars().collect();

    let mut feats = Vec::with_capacity(16);
    feats.push(format!("w0={lower}"));

    // Case and digit flags, emitted only when set.
    if chars[0].is_uppercase() {
        feats.push("w0.istitle=1".to_string());
    }
    let cased: Vec<char> = chars.iter().copied().filter(|c| c.is_alphabetic()).collect();
    if !cased.is_empty() && cased.iter().all(|c| c.is_uppercase()) {
        feats.push("w0.isupper=1".to_string());
    }
    if chars.iter().all(char::is_ascii_digit) {
        feats.push("w0.isdigit=1".to_string());
    }

    // Prefix and suffix character n-grams of the lowercased surface; words
    // shorter than n contribute the whole word.
    feats.push(format!("w0.pre2={}", char_ngram(&lower_chars, 2, false)));
    feats.push(format!("w0.suf2={}", char_ngram(&lower_chars, 2, true)));
    feats.push(format!("w0.pre3={}", char_ngram(&lower_chars, 3, false)));
    feats.push(format!("w0.suf3={}", char_ngram(&lower_chars, 3, true)));

    if index == 0 {
        feats.push("BOS".to_string());
    }
    if index == len - 1 {
        feats.push("EOS".to_string());
    }

    // Two words of context on each side, lowercased, where they exist.
    for offset in [-2i64, -1, 1, 2] {
        let pos = index as i64 + offset;
        if pos >= 0 && (pos as usize) < len {
            let sign = if offset < 0 { "-" } else { "+" };
            feats.push(format!(
                "w{sign}{}={}",
                offset.abs(),
                sentence.surface(pos as usize).to_lowercase()
            ));
        }
    }

    feats.push(format!("cluster={}", clusters.lookup(&lower)));
    Ok(FeatureSet(feats))
}

/// Applies [`extract_token_features`] at every position.
pub fn extract_sentence_features(
    sentence: &TaggedSentence,
    clusters: &ClusterMap,
) -> Vec<FeatureSet> {
    (0..sentence.len())
        .map(|i| extract_token_features(sentence, i, clusters).expect("index in range"))
        .collect()
}

/// Bidirectional map between feature strings and dense contiguous ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureAlphabet {
    forward: HashMap<String, u32>,
    reverse: Vec<String>,
}

impl FeatureAlphabet {
    /// Assigns ids to features occurring at least `min_frequency` times
    /// across all corpora, in first-occurrence order.
    pub fn build(
        corpora: &[Vec<FeatureSet>],
        min_frequency: u32,
    ) -> Result<Self, FeatureError> {
        let min_frequency = min_frequency.max(1);
        let mut counts: HashMap<&str, (u32, usize)> = HashMap::new();
        let mut order = 0usize;
        for sentence in corpora.iter().flatten() {
            for feature in sentence.iter() {
                let entry = counts.entry(feature).or_insert((0, order));
                if entry.0 == 0 {
                    entry.1 = order;
                    order += 1;
                }
                entry.0 += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(_, (count, _))| *count >= min_frequency)
            .map(|(feature, (_, first))| (feature, first))
            .collect();
        if kept.is_empty() {
            return Err(FeatureError::EmptyAlphabet { min_frequency });
        }
        kept.sort_by_key(|&(_, first)| first);
        Ok(Self::from_features(
            kept.into_iter().map(|(f, _)| f.to_string()).collect(),
        ))
    }

    /// Rebuilds an alphabet from an explicit id-ordered feature list, e.g.
    /// when loading a model.
    pub fn from_features(reverse: Vec<String>) -> Self {
        let forward = reverse
            .iter()
            .enumerate()
            .map(|(id, f)| (f.clone(), id as u32))
            .collect();
        FeatureAlphabet { forward, reverse }
    }

    pub fn id(&self, feature: &str) -> Option<u32> {
        self.forward.get(feature).copied()
    }

    pub fn feature(&self, id: u32) -> &str {
        &self.reverse[id as usize]
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    pub fn features(&self) -> &[String] {
        &self.reverse
    }
}

/// Total map from words to cluster ids in `0..k`; unknown words map to the
/// dedicated fallback id `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMap {
    map: HashMap<String, u32>,
    k: u32,
    order: Vec<String>,
}

/// Result of loading a cluster file: the map plus any duplicate-word lines
/// that were overwritten (last write wins).
#[derive(Debug, Clone)]
pub struct ClusterLoad {
    pub map: ClusterMap,
    pub duplicates: Vec<(String, usize)>,
}

impl ClusterMap {
    /// A map with no entries and no clusters: every word falls back to id 0.
    pub fn empty() -> Self {
        ClusterMap {
            map: HashMap::new(),
            k: 0,
            order: Vec::new(),
        }
    }

    pub fn from_entries(
        entries: Vec<(String, u32)>,
        k: u32,
    ) -> Result<Self, FeatureError> {
        let mut map = HashMap::with_capacity(entries.len());
        let mut order = Vec::with_capacity(entries.len());
        for (word, id) in entries {
            if id >= k {
                return Err(FeatureError::ClusterFormat {
                    line: 0,
                    reason: format!("cluster id {id} for `{word}` exceeds k={k}"),
                });
            }
            if map.insert(word.clone(), id).is_none() {
                order.push(word);
            }
        }
        Ok(ClusterMap { map, k, order })
    }

    /// Cluster id for `word`, or the fallback id `k` for unknown words.
    pub fn lookup(&self, word: &str) -> u32 {
        self.map.get(word).copied().unwrap_or(self.k)
    }

    pub fn cluster_count(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Entries in insertion order; the deterministic serialization order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u32)> {
        self.order.iter().map(move |w| (w.as_str(), self.map[w]))
    }

    /// Stable content hash over (template version, k, sorted entries).
    pub fn fingerprint(&self) -> u64 {
        let mut sorted: Vec<(&str, u32)> = self.entries().collect();
        sorted.sort();
        let mut hash = Fnv1a::new();
        hash.write_u32(TEMPLATE_VERSION);
        hash.write_u32(self.k);
        for (word, id) in sorted {
            hash.write_bytes(word.as_bytes());
            hash.write_u32(id);
        }
        hash.finish()
    }
}

// FNV-1a, pinned here so fingerprints are stable across builds.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
        // Length terminator so ("ab","c") and ("a","bc") differ.
        self.0 ^= 0xff;
        self.0 = self.0.wrapping_mul(0x100000001b3);
    }

    fn write_u32(&mut self, v: u32) {
        self.write_bytes(&v.to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Reads `word<TAB>cluster_id` lines. The cluster count is inferred as the
/// maximum id plus one; duplicate words are last-write-wins and reported.
pub fn load_clusters(reader: impl BufRead) -> Result<ClusterLoad, FeatureError> {
    let mut entries: Vec<(String, u32)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut duplicates = Vec::new();
    let mut max_id = 0u32;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| FeatureError::ClusterFormat {
            line: line_no,
            reason: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (word, id_str) = line.split_once('\t').ok_or(FeatureError::ClusterFormat {
            line: line_no,
            reason: "expected `word<TAB>cluster_id`".to_string(),
        })?;
        let id: u32 = id_str.parse().map_err(|_| FeatureError::ClusterFormat {
            line: line_no,
            reason: format!("cluster id `{id_str}` is not a non-negative integer"),
        })?;
        max_id = max_id.max(id);
        match seen.get(word) {
            Some(&pos) => {
                duplicates.push((word.to_string(), line_no));
                entries[pos].1 = id;
            }
            None => {
                seen.insert(word.to_string(), entries.len());
                entries.push((word.to_string(), id));
            }
        }
    }
    if entries.is_empty() {
        return Err(FeatureError::ClusterFormat {
            line: 0,
            reason: "cluster file contains no entries".to_string(),
        });
    }
    let map = ClusterMap::from_entries(entries, max_id + 1)?;
    Ok(ClusterLoad { map, duplicates })
}

/// Word vectors of uniform dimensionality, in file order.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self, FeatureError> {
        let mut words = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len());
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut dim = None;
        for (word, vector) in entries {
            let d = *dim.get_or_insert(vector.len());
            if vector.len() != d || vector.is_empty() {
                return Err(FeatureError::EmbeddingFormat {
                    line: 0,
                    reason: format!(
                        "`{word}` has dimension {} but expected {d}",
                        vector.len()
                    ),
                });
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(FeatureError::NonFiniteEmbedding { word });
            }
            match index.get(&word) {
                Some(&pos) => vectors[pos] = vector,
                None => {
                    index.insert(word.clone(), words.len());
                    words.push(word);
                    vectors.push(vector);
                }
            }
        }
        let dim = dim.ok_or(FeatureError::EmptyTable)?;
        Ok(EmbeddingTable { words, vectors, dim })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Reads `word v1 v2 ... vd` lines (space separated). A first line of
/// exactly two integer fields is treated as a `count dim` header and
/// skipped.
pub fn load_embeddings(reader: impl BufRead) -> Result<EmbeddingTable, FeatureError> {
    let mut entries = Vec::new();
    let mut first_data_line = true;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| FeatureError::EmbeddingFormat {
            line: line_no,
            reason: e.to_string(),
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if first_data_line
            && fields.len() == 2
            && fields.iter().all(|f| f.parse::<u64>().is_ok())
        {
            first_data_line = false;
            continue; // "count dim" header
        }
        first_data_line = false;
        if fields.len() < 2 {
            return Err(FeatureError::EmbeddingFormat {
                line: line_no,
                reason: "expected a word followed by at least one value".to_string(),
            });
        }
        let word = fields[0].to_string();
        let vector = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| FeatureError::EmbeddingFormat {
                    line: line_no,
                    reason: format!("`{f}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteEmbedding { word });
        }
        entries.push((word, vector));
    }
    EmbeddingTable::new(entries)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means over the embedding vectors with k-means++ initialization.
///
/// Runs Lloyd iterations until no assignment changes or `max_iters` is
/// reached; ties in assignment break toward the lower centroid index, so a
/// fixed seed gives an identical map on every run.
pub fn cluster_embeddings(
    table: &EmbeddingTable,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterMap, FeatureError> {
    let n = table.len();
    if k < 2 || k > n {
        return Err(FeatureError::BadClusterCount { k, vocab: n });
    }
    let vectors = table.vectors();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    centroids.push(vectors[first].clone());
    chosen[first] = true;
    let mut dist: Vec<f64> = vectors
        .iter()
        .map(|v| squared_distance(v, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    r -= d;
                    if r <= 0.0 {
                        pick = i;
                        break;
                    }
                }
            }
            pick
        } else {
            // All remaining points coincide with a centroid; take the first
            // unchosen index.
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[next] = true;
        centroids.push(vectors[next].clone());
        for (i, v) in vectors.iter().enumerate() {
            let d = squared_distance(v, centroids.last().unwrap());
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }

    let assign = |centroids: &[Vec<f64>]| -> Vec<u32> {
        vectors
            .iter()
            .map(|v| {
                let mut best = 0u32;
                let mut best_d = f64::INFINITY;
                for (c, centroid) in centroids.iter().enumerate() {
                    let d = squared_distance(v, centroid);
                    if d < best_d {
                        best_d = d;
                        best = c as u32;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignments = assign(&centroids);
    for _ in 0..max_iters {
        // Recompute centroids as cluster means.
        let dim = table.dim();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assignments) {
            counts[a as usize] += 1;
            for (s, x) in sums[a as usize].iter_mut().zip(v) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in &mut sums[c] {
                    *s /= counts[c] as f64;
                }
                centroids[c] = std::mem::take(&mut sums[c]);
            } else {
                // Empty cluster: reseat on the point farthest from its
                // current centroid.
                let far = (0..n)
                    .max_by(|&i, &j| {
                        let di = squared_distance(
                            &vectors[i],
                            &centroids[assignments[i] as usize],
                        );
                        let dj = squared_distance(
                            &vectors[j],
                            &centroids[assignments[j] as usize],
                        );
                        di.partial_cmp(&dj).unwrap().then(j.cmp(&i))
                    })
                    .expect("non-empty table");
                centroids[c] = vectors[far].clone();
            }
        }
        let next = assign(&centroids);
        if next == assignments {
            break;
        }
        assignments = next;
    }

    let entries = table
        .words()
        .iter()
        .zip(&assignments)
        .map(|(w, &a)| (w.clone(), a))
        .collect();
    ClusterMap::from_entries(entries, k as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn sentence(words: &[&str]) -> TaggedSentence {
        let tokens = words.iter().map(|w| Token::new(*w).unwrap()).collect();
        TaggedSentence::from_unlabeled(tokens).unwrap()
    }

    #[test]
    fn single_token_sentence_is_both_bos_and_eos() {
        let feats =
            extract_token_features(&sentence(&["Si"]), 0, &ClusterMap::empty()).unwrap();
        assert!(feats.contains("BOS"));
        assert!(feats.contains("EOS"));
        assert!(feats.contains("w0=si"));
        assert!(feats.contains("w0.istitle=1"));
        assert!(feats.contains("cluster=0"));
    }

    #[test]
    fn digit_flag() {
        let feats =
            extract_token_features(&sentence(&["2023"]), 0, &ClusterMap::empty()).unwrap();
        assert!(feats.contains("w0.isdigit=1"));
        assert!(!feats.contains("w0.istitle=1"));
    }

    #[test]
    fn uppercase_flag() {
        let feats =
            extract_token_features(&sentence(&["USC"]), 0, &ClusterMap::empty()).unwrap();
        assert!(feats.contains("w0.isupper=1"));
        assert!(feats.contains("w0.istitle=1"));
    }

    #[test]
    fn window_features_hand_expanded() {
        // Template expansion for index 2 of ["Miadto", "si", "Juan"], done by
        // hand: left context exists, right does not, and the position is EOS.
        let s = sentence(&["Miadto", "si", "Juan"]);
        let feats = extract_token_features(&s, 2, &ClusterMap::empty()).unwrap();
        assert!(feats.contains("w-1=si"));
        assert!(feats.contains("w-2=miadto"));
        assert!(feats.contains("EOS"));
        assert!(!feats.contains("BOS"));
        assert!(!feats.iter().any(|f| f.starts_with("w+1=")));
        assert!(feats.contains("w0=juan"));
        assert!(feats.contains("w0.pre2=ju"));
        assert!(feats.contains("w0.suf2=an"));
        assert!(feats.contains("w0.pre3=jua"));
        assert!(feats.contains("w0.suf3=uan"));
    }

    #[test]
    fn short_words_use_whole_word_as_ngram() {
        let feats =
            extract_token_features(&sentence(&["si"]), 0, &ClusterMap::empty()).unwrap();
        assert!(feats.contains("w0.pre3=si"));
        assert!(feats.contains("w0.suf3=si"));
    }

    #[test]
    fn extraction_is_total_and_window_correct() {
        let s = sentence(&["a", "Bb", "ccc", "42", "."]);
        let all = extract_sentence_features(&s, &ClusterMap::empty());
        assert_eq!(all.len(), s.len());
        for (i, feats) in all.iter().enumerate() {
            assert!(!feats.is_empty());
            assert_eq!(feats.contains("BOS"), i == 0);
            assert_eq!(feats.contains("EOS"), i == s.len() - 1);
            for j in [1usize, 2] {
                assert_eq!(
                    feats.iter().any(|f| f.starts_with(&format!("w-{j}="))),
                    i >= j
                );
                assert_eq!(
                    feats.iter().any(|f| f.starts_with(&format!("w+{j}="))),
                    i + j < s.len()
                );
            }
        }
        // No duplicate feature strings in any set.
        for feats in &all {
            let mut seen: Vec<&str> = feats.iter().collect();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), feats.len());
        }
    }

    #[test]
    fn identical_sentences_yield_identical_features() {
        let s = sentence(&["Miadto", "si", "Juan"]);
        let a = extract_sentence_features(&s, &ClusterMap::empty());
        let b = extract_sentence_features(&s, &ClusterMap::empty());
        assert_eq!(a, b);
    }

    fn feature_sets(sets: &[&[&str]]) -> Vec<FeatureSet> {
        sets.iter()
            .map(|fs| FeatureSet(fs.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn alphabet_cutoff_can_empty() {
        let corpora = vec![feature_sets(&[&["a", "b"], &["c"]])];
        assert!(matches!(
            FeatureAlphabet::build(&corpora, 2),
            Err(FeatureError::EmptyAlphabet { min_frequency: 2 })
        ));
    }

    #[test]
    fn alphabet_keeps_all_at_min_frequency_one() {
        let corpora = vec![feature_sets(&[&["a", "b"], &["b", "c"]])];
        let alphabet = FeatureAlphabet::build(&corpora, 1).unwrap();
        assert_eq!(alphabet.len(), 3);
        // First-occurrence order.
        assert_eq!(alphabet.id("a"), Some(0));
        assert_eq!(alphabet.id("b"), Some(1));
        assert_eq!(alphabet.id("c"), Some(2));
    }

    #[test]
    fn alphabet_frequency_cutoff_matches_hand_count() {
        // Hand count over the corpus below: b x3, a x2, c x1, d x1.
        let corpora = vec![
            feature_sets(&[&["a", "b"], &["b", "c"]]),
            feature_sets(&[&["b", "a", "d"]]),
        ];
        let alphabet = FeatureAlphabet::build(&corpora, 2).unwrap();
        assert_eq!(alphabet.len(), 2);
        assert_eq!(alphabet.id("a"), Some(0));
        assert_eq!(alphabet.id("b"), Some(1));
        assert_eq!(alphabet.id("c"), None);
    }

    #[test]
    fn alphabet_build_is_stable() {
        let corpora = vec![feature_sets(&[&["x", "y", "z"], &["y", "x"]])];
        let a = FeatureAlphabet::build(&corpora, 1).unwrap();
        let b = FeatureAlphabet::build(&corpora, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cluster_load_basics() {
        let load = load_clusters("juan\t3\nmaria\t0\n".as_bytes()).unwrap();
        assert_eq!(load.map.cluster_count(), 4);
        assert_eq!(load.map.lookup("juan"), 3);
        assert_eq!(load.map.lookup("unseen"), 4);
        assert!(load.duplicates.is_empty());
    }

    #[test]
    fn cluster_duplicates_last_write_wins() {
        let load = load_clusters("juan\t3\njuan\t1\n".as_bytes()).unwrap();
        assert_eq!(load.map.lookup("juan"), 1);
        assert_eq!(load.duplicates, vec![("juan".to_string(), 2)]);
    }

    #[test]
    fn cluster_bad_id_is_error() {
        let err = load_clusters("juan\tx\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FeatureError::ClusterFormat { line: 1, .. }));
    }

    #[test]
    fn embeddings_header_detection() {
        let with_header = load_embeddings("2 3\na 1 2 3\nb 4 5 6\n".as_bytes()).unwrap();
        assert_eq!(with_header.len(), 2);
        assert_eq!(with_header.dim(), 3);
        let without = load_embeddings("a 1 2 3\nb 4 5 6\n".as_bytes()).unwrap();
        assert_eq!(without.len(), 2);
    }

    #[test]
    fn embeddings_dimension_mismatch() {
        assert!(load_embeddings("a 1 2\nb 3\n".as_bytes()).is_err());
        assert!(load_embeddings("a 1 nan\n".as_bytes()).is_err());
    }

    fn two_cloud_table() -> EmbeddingTable {
        // Two well-separated clouds around (0,0) and (10,10).
        let entries = vec![
            ("a0".to_string(), vec![0.1, 0.0]),
            ("a1".to_string(), vec![-0.1, 0.2]),
            ("a2".to_string(), vec![0.0, -0.2]),
            ("b0".to_string(), vec![10.1, 9.9]),
            ("b1".to_string(), vec![9.8, 10.2]),
            ("b2".to_string(), vec![10.0, 10.0]),
        ];
        EmbeddingTable::new(entries).unwrap()
    }

    #[test]
    fn kmeans_separates_clouds() {
        let table = two_cloud_table();
        let map = cluster_embeddings(&table, 2, 13, 100).unwrap();
        let a = map.lookup("a0");
        let b = map.lookup("b0");
        assert_ne!(a, b);
        for w in ["a1", "a2"] {
            assert_eq!(map.lookup(w), a);
        }
        for w in ["b1", "b2"] {
            assert_eq!(map.lookup(w), b);
        }
    }

    #[test]
    fn kmeans_degenerate_k_equals_vocab() {
        let table = two_cloud_table();
        let map = cluster_embeddings(&table, 6, 5, 100).unwrap();
        let mut ids: Vec<u32> = table.words().iter().map(|w| map.lookup(w)).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn kmeans_is_deterministic() {
        let table = two_cloud_table();
        let a = cluster_embeddings(&table, 3, 99, 50).unwrap();
        let b = cluster_embeddings(&table, 3, 99, 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_rejects_bad_k() {
        let table = two_cloud_table();
        assert!(matches!(
            cluster_embeddings(&table, 1, 0, 10),
            Err(FeatureError::BadClusterCount { .. })
        ));
        assert!(matches!(
            cluster_embeddings(&table, 7, 0, 10),
            Err(FeatureError::BadClusterCount { .. })
        ));
    }

    #[test]
    fn cluster_fingerprint_tracks_content() {
        let a = load_clusters("x\t0\ny\t1\n".as_bytes()).unwrap().map;
        let b = load_clusters("y\t1\nx\t0\n".as_bytes()).unwrap().map;
        let c = load_clusters("x\t0\ny\t0\n".as_bytes()).unwrap().map;
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_ne!(a.fingerprint(), ClusterMap::empty().fingerprint());
    }
}
