//! Bidirectional mapping between UTF-8 text and CTC class indices.
//!
//! Labels are scalar codepoints, not grapheme clusters. A conjunct such as
//! "ক্ত" is three labels — consonant, halant, consonant — so the few
//! hundred visual compound shapes of an alpha-syllabary script collapse
//! onto a small class table, and decoding back to UTF-8 needs no shaping
//! logic. Codepoint order is preserved exactly; no Unicode normalization
//! is applied in either direction.
//!
//! # Manifest format
//!
//! UTF-8 text, one class per line in index order. An entry is either the
//! literal character or a `U+XXXX` hex escape (required for whitespace
//! symbols such as the space class). `#` starts a comment, whole-line or
//! trailing. The CTC blank is implicit as the final index and has no
//! manifest entry. Two special header comments, `# name: ...` and
//! `# version: N`, set the table's identity.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::ctc::LabelSeq;
use crate::error::{Error, Result};

/// Class count of the standard table (excluding the blank).
pub const STANDARD_SYMBOL_COUNT: usize = 165;

/// The shipped default manifest: Bengali plus English, 165 symbols.
pub const DEFAULT_ALPHABET_MANIFEST: &str = include_str!("../assets/bengali_english.alphabet");

/// Whether [`load_alphabet`] must insist on the standard 165-symbol count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountCheck {
    /// Exactly [`STANDARD_SYMBOL_COUNT`] symbols required.
    Standard,
    /// Any nonzero symbol count accepted (synthetic desk-scale tables).
    Relaxed,
}

/// Ordered class table mapping codepoints to indices, blank last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlphabet {
    symbols: Vec<char>,
    index_of: HashMap<char, usize>,
    name: String,
    version: u32,
}

impl LabelAlphabet {
    /// Number of text symbols (excluding the blank).
    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    /// Total class count including the blank.
    pub fn num_classes(&self) -> usize {
        self.symbols.len() + 1
    }

    /// The blank's class index: one past the last symbol.
    pub fn blank_index(&self) -> usize {
        self.symbols.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index_of.get(&c).copied()
    }

    /// Canonical manifest text: header comments plus one `U+XXXX` escape
    /// per symbol. `load_alphabet` of this text reproduces the table, and
    /// re-serializing is byte-stable.
    pub fn to_manifest_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# name: {}", self.name);
        let _ = writeln!(out, "# version: {}", self.version);
        for &c in &self.symbols {
            let _ = writeln!(out, "U+{:04X}", c as u32);
        }
        out
    }
}

fn parse_entry(token: &str, line_no: usize) -> Result<char> {
    if let Some(hex) = token.strip_prefix("U+") {
        let code = u32::from_str_radix(hex, 16).map_err(|_| {
            Error::Manifest(format!("line {line_no}: bad hex escape `{token}`"))
        })?;
        return char::from_u32(code).ok_or_else(|| {
            Error::Manifest(format!("line {line_no}: U+{code:04X} is not a scalar value"))
        });
    }
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(Error::Manifest(format!(
            "line {line_no}: entry `{token}` must be one character or a U+XXXX escape"
        ))),
    }
}

/// Parse an alphabet manifest.
pub fn load_alphabet(manifest: &str, count_check: CountCheck) -> Result<LabelAlphabet> {
    let mut symbols = Vec::new();
    let mut index_of = HashMap::new();
    let mut name = String::from("unnamed");
    let mut version = 1u32;

    for (line_no, raw) in manifest.lines().enumerate() {
        if let Some(rest) = raw.trim().strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("name:") {
                name = v.trim().to_string();
            } else if let Some(v) = rest.strip_prefix("version:") {
                version = v.trim().parse().map_err(|_| {
                    Error::Manifest(format!("line {line_no}: bad version `{v}`"))
                })?;
            }
            continue;
        }
        let body = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let token = body.trim();
        if token.is_empty() {
            continue;
        }
        let c = parse_entry(token, line_no)?;
        if index_of.contains_key(&c) {
            return Err(Error::Manifest(format!(
                "line {line_no}: duplicate symbol U+{:04X}",
                c as u32
            )));
        }
        index_of.insert(c, symbols.len());
        symbols.push(c);
    }

    if symbols.is_empty() {
        return Err(Error::Manifest("no symbols in manifest".into()));
    }
    if count_check == CountCheck::Standard && symbols.len() != STANDARD_SYMBOL_COUNT {
        return Err(Error::Manifest(format!(
            "manifest has {} symbols, the standard table has {STANDARD_SYMBOL_COUNT} \
             (load with the relaxed count check for synthetic tables)",
            symbols.len()
        )));
    }

    Ok(LabelAlphabet {
        symbols,
        index_of,
        name,
        version,
    })
}

/// The shipped Bengali+English table.
pub fn default_alphabet() -> LabelAlphabet {
    load_alphabet(DEFAULT_ALPHABET_MANIFEST, CountCheck::Standard)
        .expect("embedded default manifest is well-formed")
}

/// One class index per scalar codepoint, in original order.
pub fn encode_text(alphabet: &LabelAlphabet, text: &str) -> Result<LabelSeq> {
    let mut labels = Vec::new();
    for (offset, c) in text.chars().enumerate() {
        match alphabet.index_of(c) {
            Some(idx) => labels.push(idx),
            None => {
                return Err(Error::UnsupportedSymbol {
                    codepoint: c as u32,
                    offset,
                })
            }
        }
    }
    Ok(LabelSeq(labels))
}

/// Exact inverse of [`encode_text`]. Blank or out-of-range indices are
/// rejected.
pub fn decode_labels(alphabet: &LabelAlphabet, labels: &LabelSeq) -> Result<String> {
    let mut out = String::with_capacity(labels.len());
    for &idx in labels.as_slice() {
        if idx >= alphabet.symbol_count() {
            return Err(Error::InvalidInput(format!(
                "label index {idx} is blank or out of range for {} symbols",
                alphabet.symbol_count()
            )));
        }
        out.push(alphabet.symbols[idx]);
    }
    Ok(out)
}
