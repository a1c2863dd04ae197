//! Model serialization: a versioned little-endian binary format.
//!
//! Layout, in order:
//!
//! | field        | encoding                                        |
//! |--------------|-------------------------------------------------|
//! | magic        | 9 bytes `SEQLABCRF`                             |
//! | version      | u32                                             |
//! | fingerprint  | u64 (feature configuration)                     |
//! | label count  | u32, then that many length-prefixed strings     |
//! | feature count| u32, then that many length-prefixed strings     |
//! | weight count | u64, then that many f64s                        |
//!
//! Strings are u32 length + UTF-8 bytes. The weight count must equal
//! `F·L + L·L + L` for the declared alphabets. Serialization is canonical:
//! loading a file and saving it again is byte-identical.

use std::io::{Read, Write};
use std::str::FromStr;

use crate::corpus::BioLabel;
use crate::features::FeatureAlphabet;

use super::{CrfError, CrfModel, LabelAlphabet};

pub const MAGIC: &[u8; 9] = b"SEQLABCRF";
pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on any length-prefixed string, to keep corrupt files from
/// forcing huge allocations.
const MAX_STRING_LEN: u32 = 1 << 24;

fn write_string(writer: &mut impl Write, s: &str) -> std::io::Result<()> {
    writer.write_all(&(s.len() as u32).to_le_bytes())?;
    writer.write_all(s.as_bytes())
}

pub fn save_model(model: &CrfModel, writer: &mut impl Write) -> Result<(), CrfError> {
    writer.write_all(MAGIC)?;
    writer.write_all(&FORMAT_VERSION.to_le_bytes())?;
    writer.write_all(&model.fingerprint().to_le_bytes())?;

    writer.write_all(&(model.num_labels() as u32).to_le_bytes())?;
    for &label in model.labels().labels() {
        write_string(writer, &label.to_string())?;
    }
    writer.write_all(&(model.num_features() as u32).to_le_bytes())?;
    for feature in model.features().features() {
        write_string(writer, feature)?;
    }
    writer.write_all(&(model.weights().len() as u64).to_le_bytes())?;
    for &w in model.weights() {
        writer.write_all(&w.to_le_bytes())?;
    }
    Ok(())
}

fn fill(reader: &mut impl Read, buf: &mut [u8]) -> Result<(), CrfError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CrfError::Format("truncated model file".to_string())
        } else {
            CrfError::Io(e)
        }
    })
}

fn read_u32(reader: &mut impl Read) -> Result<u32, CrfError> {
    let mut buf = [0u8; 4];
    fill(reader, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(reader: &mut impl Read) -> Result<u64, CrfError> {
    let mut buf = [0u8; 8];
    fill(reader, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(reader: &mut impl Read) -> Result<f64, CrfError> {
    let mut buf = [0u8; 8];
    fill(reader, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_string(reader: &mut impl Read) -> Result<String, CrfError> {
    let len = read_u32(reader)?;
    if len > MAX_STRING_LEN {
        return Err(CrfError::Format(format!(
            "string length {len} exceeds the {MAX_STRING_LEN} limit"
        )));
    }
    let mut buf = vec![0u8; len as usize];
    fill(reader, &mut buf)?;
    String::from_utf8(buf)
        .map_err(|_| CrfError::Format("string is not valid UTF-8".to_string()))
}

pub fn load_model(reader: &mut impl Read) -> Result<CrfModel, CrfError> {
    let mut magic = [0u8; 9];
    fill(reader, &mut magic)?;
    if &magic != MAGIC {
        return Err(CrfError::Format(
            "bad magic: not a model file".to_string(),
        ));
    }
    let version = read_u32(reader)?;
    if version != FORMAT_VERSION {
        return Err(CrfError::Format(format!(
            "unsupported format version {version} (supported: {FORMAT_VERSION})"
        )));
    }
    let fingerprint = read_u64(reader)?;

    let label_count = read_u32(reader)?;
    let mut labels = Vec::new();
    for _ in 0..label_count {
        let name = read_string(reader)?;
        let label = BioLabel::from_str(&name)
            .map_err(|_| CrfError::Format(format!("unknown label `{name}`")))?;
        labels.push(label);
    }
    let labels = LabelAlphabet::from_labels(labels)
        .map_err(|e| CrfError::Format(e.to_string()))?;

    let feature_count = read_u32(reader)?;
    let mut features = Vec::new();
    for _ in 0..feature_count {
        features.push(read_string(reader)?);
    }
    let features = FeatureAlphabet::from_features(features);

    let l = labels.len();
    let f = features.len();
    let expected = (f * l + l * l + l) as u64;
    let weight_count = read_u64(reader)?;
    if weight_count != expected {
        return Err(CrfError::Format(format!(
            "weight count {weight_count} does not match the declared alphabets \
             (expected {expected})"
        )));
    }
    let mut weights = Vec::with_capacity(expected as usize);
    for _ in 0..weight_count {
        weights.push(read_f64(reader)?);
    }
    CrfModel::from_parts(labels, features, weights, fingerprint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{train, Featurizer, TrainConfig};
    use crate::corpus::{Corpus, TaggedSentence, Token};

    fn trained_model() -> CrfModel {
        let sentences = vec![
            TaggedSentence::new(
                vec![
                    Token::new("Si").unwrap(),
                    Token::new("Juan").unwrap(),
                ],
                vec!["O".parse().unwrap(), "B-PER".parse().unwrap()],
            )
            .unwrap(),
            TaggedSentence::new(
                vec![
                    Token::new("sa").unwrap(),
                    Token::new("Sugbo").unwrap(),
                ],
                vec!["O".parse().unwrap(), "B-LOC".parse().unwrap()],
            )
            .unwrap(),
        ];
        let corpus = Corpus::new(sentences, "t");
        let config = TrainConfig {
            max_iterations: 20,
            ..TrainConfig::default()
        };
        train(&corpus, &Featurizer::without_clusters(), &config)
            .unwrap()
            .model
    }

    fn to_bytes(model: &CrfModel) -> Vec<u8> {
        let mut buf = Vec::new();
        save_model(model, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_preserves_everything() {
        let model = trained_model();
        let bytes = to_bytes(&model);
        let loaded = load_model(&mut bytes.as_slice()).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded.fingerprint(), model.fingerprint());
    }

    #[test]
    fn resave_is_byte_identical() {
        let model = trained_model();
        let bytes = to_bytes(&model);
        let loaded = load_model(&mut bytes.as_slice()).unwrap();
        assert_eq!(to_bytes(&loaded), bytes);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = to_bytes(&trained_model());
        bytes[0] = b'X';
        assert!(matches!(
            load_model(&mut bytes.as_slice()),
            Err(CrfError::Format(m)) if m.contains("magic")
        ));
    }

    #[test]
    fn mutated_version_is_rejected() {
        let mut bytes = to_bytes(&trained_model());
        bytes[9] = 99; // first byte of the little-endian version field
        assert!(matches!(
            load_model(&mut bytes.as_slice()),
            Err(CrfError::Format(m)) if m.contains("version")
        ));
    }

    #[test]
    fn truncated_stream_is_rejected() {
        let bytes = to_bytes(&trained_model());
        for cut in [5, 15, 30, bytes.len() - 3] {
            assert!(matches!(
                load_model(&mut bytes[..cut].as_ref()),
                Err(CrfError::Format(m)) if m.contains("truncated")
            ));
        }
    }

    #[test]
    fn corrupted_label_is_rejected() {
        let mut bytes = to_bytes(&trained_model());
        // Offset 25 is the length of the first label string; 29 its first
        // byte (after magic 9 + version 4 + fingerprint 8 + count 4).
        bytes[29] = b'Z';
        assert!(matches!(
            load_model(&mut bytes.as_slice()),
            Err(CrfError::Format(m)) if m.contains("label")
        ));
    }

    #[test]
    fn round_trip_predictions_are_identical() {
        let model = trained_model();
        let bytes = to_bytes(&model);
        let loaded = load_model(&mut bytes.as_slice()).unwrap();
        let featurizer = Featurizer::without_clusters();
        let sentence = TaggedSentence::from_unlabeled(vec![
            Token::new("Si").unwrap(),
            Token::new("Sugbo").unwrap(),
        ])
        .unwrap();
        assert_eq!(
            model.tag_sentence(&featurizer, &sentence, false).unwrap(),
            loaded.tag_sentence(&featurizer, &sentence, false).unwrap()
        );
    }
}
