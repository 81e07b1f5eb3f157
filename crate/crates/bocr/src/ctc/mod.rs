//! Connectionist Temporal Classification output layer.
//!
//! The loss of a (logit sequence, target) pair is the negative log of the
//! summed probability of every frame-level path that collapses to the
//! target. The forward-backward recursion runs over the blank-extended
//! target in log space; line-width sequences make linear-space probability
//! products underflow. An exhaustive path enumerator
//! ([`ctc_brute_force`]) serves as the independent oracle in tests and
//! acceptance checks.

mod decode;

pub use decode::{beam_decode, beam_decode_candidates, greedy_decode, DEFAULT_BEAM_WIDTH};

use crate::blstm::LogitSequence;
use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, log_softmax, softmax, Vector};

/// A sequence of class indices excluding the blank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LabelSeq(pub Vec<usize>);

impl LabelSeq {
    pub fn new(labels: Vec<usize>) -> Self {
        LabelSeq(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for LabelSeq {
    fn from(labels: Vec<usize>) -> Self {
        LabelSeq(labels)
    }
}

/// Loss and per-frame logit gradient for one (input, target) pair.
#[derive(Debug, Clone)]
pub struct CtcResult {
    /// Negative log probability of the target, in natural-log units.
    pub loss: f64,
    /// `∂loss/∂logits`, same shape as the input logits.
    pub grad_logits: LogitSequence,
}

/// The standard CTC collapse: merge adjacent repeats, then delete blanks.
pub fn collapse(path: &[usize], blank: usize) -> LabelSeq {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for &label in path {
        if prev != Some(label) && label != blank {
            out.push(label);
        }
        prev = Some(label);
    }
    LabelSeq(out)
}

/// Fewest frames that can carry `target`: its length plus one separator
/// blank per adjacent equal pair.
pub fn min_frames(target: &LabelSeq) -> usize {
    let repeats = target
        .as_slice()
        .windows(2)
        .filter(|w| w[0] == w[1])
        .count();
    target.len() + repeats
}

/// Blank-extended target: blanks interleaved and appended, length `2L+1`.
fn extend_target(target: &LabelSeq, blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * target.len() + 1);
    ext.push(blank);
    for &label in target.as_slice() {
        ext.push(label);
        ext.push(blank);
    }
    ext
}

fn validate_target(target: &LabelSeq, num_classes: usize, blank: usize) -> Result<()> {
    for &label in target.as_slice() {
        if label >= num_classes || label == blank {
            return Err(Error::InvalidInput(format!(
                "ctc target label {label} out of range for {num_classes} classes (blank {blank})"
            )));
        }
    }
    Ok(())
}

/// CTC loss and analytic gradient with respect to the logits.
///
/// Errors with [`Error::InfeasibleTarget`] when the frame count cannot
/// carry the target; that case is distinguished from any numeric failure.
pub fn ctc_loss(logits: &[Vector], target: &LabelSeq, blank: usize) -> Result<CtcResult> {
    let t_len = logits.len();
    let needed = min_frames(target);
    if t_len < needed {
        return Err(Error::InfeasibleTarget {
            frames: t_len,
            min_frames: needed,
        });
    }
    if t_len == 0 {
        // Only the empty target is feasible here; its probability is 1.
        return Ok(CtcResult {
            loss: 0.0,
            grad_logits: Vec::new(),
        });
    }
    let num_classes = logits[0].len();
    if blank >= num_classes {
        return Err(Error::InvalidInput(format!(
            "blank index {blank} out of range for {num_classes} classes"
        )));
    }
    validate_target(target, num_classes, blank)?;
    for (t, frame) in logits.iter().enumerate() {
        if frame.len() != num_classes {
            return Err(Error::DimensionMismatch(format!(
                "ctc_loss: frame {t} has {} classes, frame 0 has {num_classes}",
                frame.len()
            )));
        }
    }

    let lp: Vec<Vector> = logits.iter().map(|f| log_softmax(f)).collect();
    let ext = extend_target(target, blank);
    let s_len = ext.len();
    let neg_inf = f64::NEG_INFINITY;

    // Skip transition s-2 → s is legal when ext[s] is a label different
    // from ext[s-2].
    let can_skip = |s: usize| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];

    // Forward: alpha[t][s] includes the emission at frame t.
    let mut alpha = vec![vec![neg_inf; s_len]; t_len];
    alpha[0][0] = lp[0][ext[0]];
    if s_len > 1 {
        alpha[0][1] = lp[0][ext[1]];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha[t - 1][s];
            if s >= 1 {
                acc = log_add_exp(acc, alpha[t - 1][s - 1]);
            }
            if can_skip(s) {
                acc = log_add_exp(acc, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = if acc == neg_inf {
                neg_inf
            } else {
                acc + lp[t][ext[s]]
            };
        }
    }

    let mut log_p = alpha[t_len - 1][s_len - 1];
    if s_len > 1 {
        log_p = log_add_exp(log_p, alpha[t_len - 1][s_len - 2]);
    }
    if log_p == neg_inf {
        // Cannot happen once the length precondition holds, but guard the
        // gradient math anyway.
        return Err(Error::InfeasibleTarget {
            frames: t_len,
            min_frames: needed,
        });
    }

    // Backward: beta[t][s] excludes the emission at frame t.
    let mut beta = vec![vec![neg_inf; s_len]; t_len];
    beta[t_len - 1][s_len - 1] = 0.0;
    if s_len > 1 {
        beta[t_len - 1][s_len - 2] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut acc = beta[t + 1][s] + lp[t + 1][ext[s]];
            if s + 1 < s_len {
                acc = log_add_exp(acc, beta[t + 1][s + 1] + lp[t + 1][ext[s + 1]]);
            }
            if s + 2 < s_len && can_skip(s + 2) {
                acc = log_add_exp(acc, beta[t + 1][s + 2] + lp[t + 1][ext[s + 2]]);
            }
            beta[t][s] = acc;
        }
    }

    // grad wrt logits: softmax minus the path posterior per class.
    let mut grad = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut post = vec![neg_inf; num_classes];
        for s in 0..s_len {
            let ab = alpha[t][s] + beta[t][s];
            if ab != neg_inf {
                post[ext[s]] = log_add_exp(post[ext[s]], ab);
            }
        }
        let y = softmax(&logits[t]);
        let g: Vector = (0..num_classes)
            .map(|k| y[k] - (post[k] - log_p).exp())
            .collect();
        grad.push(g);
    }

    Ok(CtcResult {
        loss: -log_p,
        grad_logits: grad,
    })
}

/// Exhaustive path-sum probability of `target` under per-frame
/// distributions `probs`. Independent oracle for [`ctc_loss`]; guarded to
/// tiny sizes because it enumerates all `num_classes^T` paths.
pub fn ctc_brute_force(probs: &[Vector], target: &LabelSeq, blank: usize) -> Result<f64> {
    let t_len = probs.len();
    if t_len > 8 {
        return Err(Error::InvalidInput(format!(
            "ctc_brute_force: {t_len} frames exceeds the enumeration guard of 8"
        )));
    }
    if t_len == 0 {
        return Ok(if target.is_empty() { 1.0 } else { 0.0 });
    }
    let num_classes = probs[0].len();
    if num_classes > 4 {
        return Err(Error::InvalidInput(format!(
            "ctc_brute_force: {num_classes} classes exceeds the enumeration guard of 4"
        )));
    }

    let mut total = 0.0;
    let mut path = vec![0usize; t_len];
    loop {
        if collapse(&path, blank) == *target {
            let p: f64 = path.iter().enumerate().map(|(t, &c)| probs[t][c]).product();
            total += p;
        }
        // Advance the base-num_classes counter.
        let mut pos = 0;
        loop {
            if pos == t_len {
                return Ok(total);
            }
            path[pos] += 1;
            if path[pos] < num_classes {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}
