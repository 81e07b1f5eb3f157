//! Greedy and prefix beam-search decoders for CTC outputs.

use std::collections::BTreeMap;

use super::{collapse, LabelSeq};
use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, log_softmax, Vector};

/// Beam width used by the CLI when none is given.
pub const DEFAULT_BEAM_WIDTH: usize = 10;

/// Best-path decoding: per-frame argmax (ties toward the lowest class
/// index), then collapse. Cheap diagnostic baseline, not the search the
/// recognizer uses.
pub fn greedy_decode(logits: &[Vector], blank: usize) -> LabelSeq {
    let path: Vec<usize> = logits
        .iter()
        .map(|frame| {
            let mut best = 0;
            for (k, &v) in frame.iter().enumerate() {
                if v > frame[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    collapse(&path, blank)
}

/// Ranking used for pruning and final selection: higher probability first,
/// then shorter prefix, then lexicographically smaller labels.
fn beam_order(a: (&[usize], f64), b: (&[usize], f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1)
        .then_with(|| a.0.len().cmp(&b.0.len()))
        .then_with(|| a.0.cmp(b.0))
}

/// Prefix beam search over collapsed label prefixes.
///
/// Each prefix carries separate blank-ending and non-blank-ending log
/// probability mass; paths that collapse to the same prefix are merged.
/// Returns surviving prefixes with their total log probability, best
/// first under the deterministic tie rules.
pub fn beam_decode_candidates(
    logits: &[Vector],
    blank: usize,
    beam_width: usize,
) -> Result<Vec<(LabelSeq, f64)>> {
    if beam_width == 0 {
        return Err(Error::InvalidInput("beam width must be at least 1".into()));
    }
    let neg_inf = f64::NEG_INFINITY;
    // (prefix, log p ending in blank, log p ending in the last label)
    let mut beams: Vec<(Vec<usize>, f64, f64)> = vec![(Vec::new(), 0.0, neg_inf)];

    for (t, frame) in logits.iter().enumerate() {
        let num_classes = frame.len();
        if blank >= num_classes {
            return Err(Error::InvalidInput(format!(
                "blank index {blank} out of range for {num_classes} classes at frame {t}"
            )));
        }
        let lp = log_softmax(frame);
        let mut next: BTreeMap<Vec<usize>, (f64, f64)> = BTreeMap::new();
        for (prefix, p_blank, p_label) in &beams {
            let total = log_add_exp(*p_blank, *p_label);

            // Stay on this prefix via a blank frame.
            let slot = next
                .entry(prefix.clone())
                .or_insert((neg_inf, neg_inf));
            slot.0 = log_add_exp(slot.0, total + lp[blank]);

            for (c, &lp_c) in lp.iter().enumerate() {
                if c == blank {
                    continue;
                }
                if prefix.last() == Some(&c) {
                    // Repeating the tail label without an intervening blank
                    // merges into the same prefix ...
                    let slot = next
                        .entry(prefix.clone())
                        .or_insert((neg_inf, neg_inf));
                    slot.1 = log_add_exp(slot.1, p_label + lp_c);
                    // ... while emitting it after a blank starts a new copy.
                    let mut extended = prefix.clone();
                    extended.push(c);
                    let slot = next.entry(extended).or_insert((neg_inf, neg_inf));
                    slot.1 = log_add_exp(slot.1, p_blank + lp_c);
                } else {
                    let mut extended = prefix.clone();
                    extended.push(c);
                    let slot = next.entry(extended).or_insert((neg_inf, neg_inf));
                    slot.1 = log_add_exp(slot.1, total + lp_c);
                }
            }
        }

        // (prefix, p_blank, p_label, total) — total precomputed for the sort.
        let mut scored: Vec<(Vec<usize>, f64, f64, f64)> = next
            .into_iter()
            .map(|(prefix, (pb, pl))| (prefix, pb, pl, log_add_exp(pb, pl)))
            .collect();
        scored.sort_by(|a, b| beam_order((&a.0, a.3), (&b.0, b.3)));
        scored.truncate(beam_width);
        beams = scored.into_iter().map(|(p, pb, pl, _)| (p, pb, pl)).collect();
    }

    let mut finals: Vec<(Vec<usize>, f64)> = beams
        .into_iter()
        .map(|(prefix, pb, pl)| (prefix, log_add_exp(pb, pl)))
        .collect();
    finals.sort_by(|a, b| beam_order((&a.0, a.1), (&b.0, b.1)));
    Ok(finals
        .into_iter()
        .map(|(prefix, logp)| (LabelSeq(prefix), logp))
        .collect())
}

/// Highest-probability collapsed sequence under prefix beam search.
pub fn beam_decode(logits: &[Vector], blank: usize, beam_width: usize) -> Result<LabelSeq> {
    let candidates = beam_decode_candidates(logits, blank, beam_width)?;
    Ok(candidates
        .into_iter()
        .next()
        .map(|(seq, _)| seq)
        .unwrap_or_default())
}
