//! Portable model files and the end-to-end line recognizer.
//!
//! # File layout (format version 1)
//!
//! ```text
//! magic            4 bytes  "BOCR"
//! format_version   u32 LE
//! input_size       u32 LE
//! hidden_size      u32 LE
//! num_classes      u32 LE
//! alphabet_len     u32 LE   byte length of the canonical manifest
//! alphabet         UTF-8    embedded manifest (self-describing models)
//! parameters       f32 LE   row-major, in field order: the forward bank
//!                           (w_ix, w_ih, w_fx, w_fh, w_cx, w_ch, w_ox,
//!                           w_oh, b_i, b_f, b_c, b_o), the backward bank
//!                           in the same order, then w_fy, w_by, b_y
//! crc32            u32 LE   CRC-32 (IEEE) of all preceding bytes
//! ```
//!
//! Training keeps 64-bit weights; the file stores nearest binary32, which
//! halves the size without flipping decodes on inputs with a sane margin.
//! Loading a saved file and saving again reproduces the bytes exactly.

use std::path::Path;

use crate::blstm::{blstm_forward, BlstmModel};
use crate::codec::{decode_labels, load_alphabet, CountCheck, LabelAlphabet};
use crate::ctc::beam_decode;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::lstm::LstmParams;
use crate::numeric::Matrix;
use crate::preproc::{extract_features, normalize_line};

const MAGIC: &[u8; 4] = b"BOCR";
/// Highest format version this build reads and the version it writes.
pub const FORMAT_VERSION: u32 = 1;

fn crc32(bytes: &[u8]) -> u32 {
    // Reflected CRC-32, polynomial 0xEDB88320 (IEEE 802.3).
    let mut table = [0u32; 256];
    for (i, slot) in table.iter_mut().enumerate() {
        let mut c = i as u32;
        for _ in 0..8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
        }
        *slot = c;
    }
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc = table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    crc ^ 0xFFFF_FFFF
}

/// Serialize to the file layout above.
pub fn model_to_bytes(model: &BlstmModel, alphabet: &LabelAlphabet) -> Result<Vec<u8>> {
    if model.num_classes() != alphabet.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} classes, alphabet defines {}",
            model.num_classes(),
            alphabet.num_classes()
        )));
    }
    let manifest = alphabet.to_manifest_string();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.input_size() as u32).to_le_bytes());
    out.extend_from_slice(&(model.hidden_size() as u32).to_le_bytes());
    out.extend_from_slice(&(model.num_classes() as u32).to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for field in model.fields() {
        for &v in field {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let checksum = crc32(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::ModelCorrupted(
                "file ends before its payload does".into(),
            )),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32_block(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.take(4 * count)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

/// Deserialize and verify a model file image.
pub fn model_from_bytes(bytes: &[u8]) -> Result<(BlstmModel, LabelAlphabet)> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::ModelFormat(
            "missing BOCR magic; not a model file".into(),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version == 0 || version > FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < 12 {
        return Err(Error::ModelCorrupted("file shorter than its header".into()));
    }
    let body_len = bytes.len() - 4;
    let stored_crc = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    let computed = crc32(&bytes[..body_len]);
    if stored_crc != computed {
        return Err(Error::ModelCorrupted(format!(
            "checksum mismatch: stored {stored_crc:08x}, computed {computed:08x}"
        )));
    }

    let mut r = Reader {
        bytes: &bytes[..body_len],
        pos: 8,
    };
    let input_size = r.u32()? as usize;
    let hidden_size = r.u32()? as usize;
    let num_classes = r.u32()? as usize;
    if input_size == 0 || hidden_size == 0 || num_classes < 2 {
        return Err(Error::ModelCorrupted(format!(
            "implausible dimensions {input_size}/{hidden_size}/{num_classes}"
        )));
    }
    let manifest_len = r.u32()? as usize;
    let manifest_bytes = r.take(manifest_len)?;
    let manifest = std::str::from_utf8(manifest_bytes)
        .map_err(|_| Error::ModelCorrupted("embedded alphabet is not UTF-8".into()))?;
    let alphabet = load_alphabet(manifest, CountCheck::Relaxed)?;
    if alphabet.num_classes() != num_classes {
        return Err(Error::ModelCorrupted(format!(
            "header says {num_classes} classes but the embedded alphabet has {}",
            alphabet.num_classes()
        )));
    }

    let mut bank = |input: usize, hidden: usize| -> Result<LstmParams> {
        let mut p = LstmParams::zeros(input, hidden);
        for field in p.fields_mut() {
            let values = r.f32_block(field.len())?;
            field.copy_from_slice(&values);
        }
        Ok(p)
    };
    let fwd = bank(input_size, hidden_size)?;
    let bwd = bank(input_size, hidden_size)?;
    let mut w_fy = Matrix::zeros(num_classes, hidden_size);
    w_fy.data_mut()
        .copy_from_slice(&r.f32_block(num_classes * hidden_size)?);
    let mut w_by = Matrix::zeros(num_classes, hidden_size);
    w_by.data_mut()
        .copy_from_slice(&r.f32_block(num_classes * hidden_size)?);
    let b_y = r.f32_block(num_classes)?;

    if r.pos != body_len {
        return Err(Error::ModelCorrupted(format!(
            "{} trailing bytes after the parameter block",
            body_len - r.pos
        )));
    }

    Ok((
        BlstmModel {
            fwd,
            bwd,
            w_fy,
            w_by,
            b_y,
        },
        alphabet,
    ))
}

/// Write a model file; 64-bit weights round to nearest binary32.
pub fn save_model(model: &BlstmModel, alphabet: &LabelAlphabet, path: &Path) -> Result<()> {
    let bytes = model_to_bytes(model, alphabet)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Read and verify a model file; returns the model with its embedded
/// alphabet.
pub fn load_model(path: &Path) -> Result<(BlstmModel, LabelAlphabet)> {
    let bytes = std::fs::read(path)?;
    model_from_bytes(&bytes)
}

/// Recognize one line image: normalize to height 48, extract column
/// features, run the BLSTM, beam-decode and map labels back to text.
pub fn recognize_line(
    model: &BlstmModel,
    alphabet: &LabelAlphabet,
    line: &GrayImage,
    beam_width: usize,
) -> Result<String> {
    if model.input_size() != crate::preproc::NORMALIZED_HEIGHT {
        return Err(Error::InvalidInput(format!(
            "model expects {}-value frames; the feature extractor produces {}",
            model.input_size(),
            crate::preproc::NORMALIZED_HEIGHT
        )));
    }
    let normalized = normalize_line(line);
    let features = extract_features(&normalized)?;
    if features.is_empty() {
        return Err(Error::InvalidInput("line is empty after normalization".into()));
    }
    let (logits, _) = blstm_forward(model, &features)?;
    let labels = beam_decode(&logits, alphabet.blank_index(), beam_width)?;
    decode_labels(alphabet, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blstm::blstm_init;
    use crate::codec::{encode_text, load_alphabet, CountCheck};
    use crate::ctc::{collapse, ctc_brute_force, LabelSeq};
    use crate::synth::{build_glyph_atlas, render_line, Degrade};

    fn tiny_alphabet() -> LabelAlphabet {
        load_alphabet("a\nb\n", CountCheck::Relaxed).unwrap()
    }

    fn sample_model() -> (BlstmModel, LabelAlphabet) {
        let alphabet = tiny_alphabet();
        (blstm_init(48, 3, alphabet.num_classes(), 77).unwrap(), alphabet)
    }

    #[test]
    fn round_trip_is_exact_at_f32() {
        let (model, alphabet) = sample_model();
        let bytes = model_to_bytes(&model, &alphabet).unwrap();
        let (loaded, loaded_alphabet) = model_from_bytes(&bytes).unwrap();
        assert_eq!(loaded_alphabet, alphabet);
        for (a, b) in model.fields().iter().zip(loaded.fields()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*y, (*x as f32) as f64, "value rounds to nearest binary32");
            }
        }
    }

    #[test]
    fn second_save_is_byte_identical() {
        let (model, alphabet) = sample_model();
        let first = model_to_bytes(&model, &alphabet).unwrap();
        let (loaded, loaded_alphabet) = model_from_bytes(&first).unwrap();
        let second = model_to_bytes(&loaded, &loaded_alphabet).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn file_round_trip() {
        let (model, alphabet) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bocr");
        save_model(&model, &alphabet, &path).unwrap();
        let (loaded, _) = load_model(&path).unwrap();
        assert_eq!(loaded.hidden_size(), 3);
        assert_eq!(loaded.num_classes(), 3);
    }

    #[test]
    fn truncated_file_never_yields_a_model() {
        let (model, alphabet) = sample_model();
        let bytes = model_to_bytes(&model, &alphabet).unwrap();
        for cut in [bytes.len() - 1, bytes.len() - 5, 40, 9] {
            match model_from_bytes(&bytes[..cut]) {
                Err(Error::ModelCorrupted(_)) => {}
                other => panic!("cut at {cut}: expected corruption error, got {other:?}"),
            }
        }
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let (model, alphabet) = sample_model();
        let mut bytes = model_to_bytes(&model, &alphabet).unwrap();
        bytes[0] = b'X';
        match model_from_bytes(&bytes) {
            Err(Error::ModelFormat(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn future_version_is_a_version_error() {
        let (model, alphabet) = sample_model();
        let mut bytes = model_to_bytes(&model, &alphabet).unwrap();
        bytes[4..8].copy_from_slice(&999u32.to_le_bytes());
        match model_from_bytes(&bytes) {
            Err(Error::ModelVersion { found, supported }) => {
                assert_eq!(found, 999);
                assert_eq!(supported, FORMAT_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn flipped_byte_is_detected() {
        let (model, alphabet) = sample_model();
        let mut bytes = model_to_bytes(&model, &alphabet).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        match model_from_bytes(&bytes) {
            Err(Error::ModelCorrupted(_)) => {}
            other => panic!("expected corruption error, got {other:?}"),
        }
    }

    #[test]
    fn class_count_mismatch_rejected_on_save() {
        let (model, _) = sample_model();
        let other = load_alphabet("a\nb\nc\n", CountCheck::Relaxed).unwrap();
        assert!(model_to_bytes(&model, &other).is_err());
    }

    #[test]
    fn crc_reference_value() {
        // Standard check vector for CRC-32/IEEE.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn zero_model_recognition_matches_brute_force() {
        // A zero-parameter model yields uniform logits; the recognized
        // text must equal the exhaustive argmax over sequence
        // probabilities on a tiny frame count.
        let alphabet = tiny_alphabet();
        let mut model = blstm_init(48, 2, alphabet.num_classes(), 1).unwrap();
        for field in model.fields_mut() {
            for v in field.iter_mut() {
                *v = 0.0;
            }
        }
        let line = GrayImage::filled(3, 48, 255).unwrap(); // T = 3
        let text = recognize_line(&model, &alphabet, &line, 1 << 20).unwrap();

        let classes = alphabet.num_classes();
        let blank = alphabet.blank_index();
        let uniform = vec![vec![1.0 / classes as f64; classes]; 3];
        let mut best: Option<(LabelSeq, f64)> = None;
        let mut seen = std::collections::BTreeSet::new();
        for mut code in 0..classes.pow(3) {
            let mut path = Vec::new();
            for _ in 0..3 {
                path.push(code % classes);
                code /= classes;
            }
            seen.insert(collapse(&path, blank));
        }
        for seq in seen {
            let p = ctc_brute_force(&uniform, &seq, blank).unwrap();
            let better = match &best {
                None => true,
                Some((bs, bp)) => {
                    p > *bp
                        || (p == *bp
                            && (seq.len() < bs.len() || (seq.len() == bs.len() && seq < *bs)))
                }
            };
            if better {
                best = Some((seq, p));
            }
        }
        let expect = decode_labels(&alphabet, &best.unwrap().0).unwrap();
        assert_eq!(text, expect);
    }

    #[test]
    fn degenerate_line_dimensions_are_rejected() {
        assert!(GrayImage::new(0, 48, vec![]).is_err());
        assert!(GrayImage::new(5, 0, vec![]).is_err());
    }

    #[test]
    fn recognition_survives_serialization_on_trained_fixture() {
        // Overfit a tiny model on one synthetic line, then require the
        // decode to be identical before and after the f32 round trip.
        let alphabet = load_alphabet("U+0020\na\nb\nc\n", CountCheck::Relaxed).unwrap();
        let atlas = build_glyph_atlas(&alphabet, 5).unwrap();
        let record = render_line(&atlas, "ab c", Degrade::none(), 9).unwrap();
        let cfg = crate::trainer::TrainConfig {
            learning_rate: 5e-3,
            max_epochs: 200,
            hidden_size: 6,
            seed: 4,
            loss_delta_stop: 0.0,
            val_delta_stop: 0.0,
            ..Default::default()
        };
        let outcome = crate::trainer::train(
            std::slice::from_ref(&record),
            std::slice::from_ref(&record),
            &alphabet,
            &cfg,
        )
        .unwrap();
        let text = recognize_line(&outcome.model, &alphabet, &record.image, 10).unwrap();
        assert_eq!(text, "ab c", "overfit model reproduces its training line");

        let bytes = model_to_bytes(&outcome.model, &alphabet).unwrap();
        let (loaded, loaded_alphabet) = model_from_bytes(&bytes).unwrap();
        let text_after = recognize_line(&loaded, &loaded_alphabet, &record.image, 10).unwrap();
        assert_eq!(text, text_after);

        let _ = encode_text(&alphabet, &text).unwrap();
    }
}
