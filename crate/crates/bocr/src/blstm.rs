//! Bidirectional hidden layer: two LSTM sub-layers combined into per-frame
//! class logits.
//!
//! The forward sub-layer reads the sequence left to right; the backward
//! sub-layer is the same cell run over the reversed sequence with its
//! outputs re-reversed. Per frame the logits are
//! `y_t = W_fy·→h_t + W_by·←h_t + b_y`.

use crate::error::{Error, Result};
use crate::lstm::{lstm_backward, lstm_forward, LstmGrads, LstmParams, LstmTape};
use crate::numeric::{xavier_init, Matrix, Vector};
use crate::rng::Rng;

/// Per-frame class scores, one `num_classes`-length vector per input frame.
pub type LogitSequence = Vec<Vector>;

/// All learnable parameters of the recognizer.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmModel {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    /// Forward-hidden-to-output weights, `num_classes × hidden_size`.
    pub w_fy: Matrix,
    /// Backward-hidden-to-output weights, `num_classes × hidden_size`.
    pub w_by: Matrix,
    pub b_y: Vector,
}

impl BlstmModel {
    pub fn hidden_size(&self) -> usize {
        self.fwd.hidden_size()
    }

    pub fn input_size(&self) -> usize {
        self.fwd.input_size()
    }

    /// Class count including the CTC blank.
    pub fn num_classes(&self) -> usize {
        self.b_y.len()
    }

    /// Every parameter buffer in serialization order: forward bank fields,
    /// backward bank fields, `w_fy`, `w_by`, `b_y`.
    pub fn fields(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(27);
        out.extend(self.fwd.fields());
        out.extend(self.bwd.fields());
        out.push(self.w_fy.data());
        out.push(self.w_by.data());
        out.push(&self.b_y);
        out
    }

    pub fn fields_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(27);
        out.extend(self.fwd.fields_mut());
        out.extend(self.bwd.fields_mut());
        out.push(self.w_fy.data_mut());
        out.push(self.w_by.data_mut());
        out.push(&mut self.b_y);
        out
    }
}

/// Gradients (or any accumulator) shaped exactly like a [`BlstmModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmGrads {
    pub fwd: LstmGrads,
    pub bwd: LstmGrads,
    pub w_fy: Matrix,
    pub w_by: Matrix,
    pub b_y: Vector,
}

impl BlstmGrads {
    pub fn zeros_like(model: &BlstmModel) -> Self {
        BlstmGrads {
            fwd: LstmGrads::zeros_like(&model.fwd),
            bwd: LstmGrads::zeros_like(&model.bwd),
            w_fy: Matrix::zeros(model.w_fy.rows(), model.w_fy.cols()),
            w_by: Matrix::zeros(model.w_by.rows(), model.w_by.cols()),
            b_y: vec![0.0; model.b_y.len()],
        }
    }

    /// Same order as [`BlstmModel::fields`].
    pub fn fields(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(27);
        out.extend(self.fwd.fields());
        out.extend(self.bwd.fields());
        out.push(self.w_fy.data());
        out.push(self.w_by.data());
        out.push(&self.b_y);
        out
    }

    pub fn fields_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(27);
        out.extend(self.fwd.fields_mut());
        out.extend(self.bwd.fields_mut());
        out.push(self.w_fy.data_mut());
        out.push(self.w_by.data_mut());
        out.push(&mut self.b_y);
        out
    }

    /// Euclidean norm over every buffer; used for global-norm clipping.
    pub fn global_norm(&self) -> f64 {
        self.fields()
            .iter()
            .map(|f| f.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for field in self.fields_mut() {
            for v in field.iter_mut() {
                *v *= factor;
            }
        }
    }
}

/// Intermediate activations kept for the backward pass. The backward
/// sub-layer tape is recorded on the reversed timeline.
#[derive(Debug, Clone)]
pub struct BlstmTape {
    pub fwd: LstmTape,
    pub bwd_rev: LstmTape,
}

/// Build a model with every weight matrix Xavier-initialized using
/// per-matrix fans and all biases zero. Deterministic in `seed`.
pub fn blstm_init(
    input_size: usize,
    hidden_size: usize,
    num_classes: usize,
    seed: u64,
) -> Result<BlstmModel> {
    if input_size == 0 || hidden_size == 0 || num_classes == 0 {
        return Err(Error::InvalidInput(
            "blstm_init: sizes must be at least 1".into(),
        ));
    }
    // One sub-seed per matrix, drawn from a master stream in fixed order.
    let mut master = Rng::new(seed);
    let mut next_seed = || master.next_u64();

    let mut bank = |input: usize, hidden: usize| -> Result<LstmParams> {
        let mut p = LstmParams::zeros(input, hidden);
        p.w_ix = xavier_init(input, hidden, next_seed())?;
        p.w_ih = xavier_init(hidden, hidden, next_seed())?;
        p.w_fx = xavier_init(input, hidden, next_seed())?;
        p.w_fh = xavier_init(hidden, hidden, next_seed())?;
        p.w_cx = xavier_init(input, hidden, next_seed())?;
        p.w_ch = xavier_init(hidden, hidden, next_seed())?;
        p.w_ox = xavier_init(input, hidden, next_seed())?;
        p.w_oh = xavier_init(hidden, hidden, next_seed())?;
        Ok(p)
    };

    let fwd = bank(input_size, hidden_size)?;
    let bwd = bank(input_size, hidden_size)?;
    let w_fy = xavier_init(hidden_size, num_classes, next_seed())?;
    let w_by = xavier_init(hidden_size, num_classes, next_seed())?;

    Ok(BlstmModel {
        fwd,
        bwd,
        w_fy,
        w_by,
        b_y: vec![0.0; num_classes],
    })
}

/// Run both directions over a feature sequence and combine them into
/// per-frame logits.
pub fn blstm_forward(model: &BlstmModel, x: &[Vector]) -> Result<(LogitSequence, BlstmTape)> {
    for (t, frame) in x.iter().enumerate() {
        if frame.len() != model.input_size() {
            return Err(Error::DimensionMismatch(format!(
                "blstm_forward: frame {t} has {} values, model expects {}",
                frame.len(),
                model.input_size()
            )));
        }
    }
    let t_len = x.len();
    let (h_fwd, tape_fwd) = lstm_forward(&model.fwd, x, None)?;

    let mut reversed: Vec<Vector> = x.to_vec();
    reversed.reverse();
    let (h_bwd_rev, tape_bwd) = lstm_forward(&model.bwd, &reversed, None)?;

    let mut logits = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut y = model.b_y.clone();
        model.w_fy.matvec_acc(&h_fwd[t], &mut y);
        // ←h_t is the reversed-pass output at mirrored index.
        model.w_by.matvec_acc(&h_bwd_rev[t_len - 1 - t], &mut y);
        logits.push(y);
    }

    Ok((
        logits,
        BlstmTape {
            fwd: tape_fwd,
            bwd_rev: tape_bwd,
        },
    ))
}

/// Backpropagate per-frame logit gradients into gradients for every model
/// parameter.
pub fn blstm_backward(
    model: &BlstmModel,
    tape: &BlstmTape,
    grad_logits: &[Vector],
) -> Result<BlstmGrads> {
    let t_len = tape.fwd.len();
    if grad_logits.len() != t_len {
        return Err(Error::DimensionMismatch(format!(
            "blstm_backward: {} gradient frames for a tape of {t_len}",
            grad_logits.len()
        )));
    }
    let hidden = model.hidden_size();
    let classes = model.num_classes();
    let mut grads = BlstmGrads::zeros_like(model);

    let mut grad_h_fwd = vec![vec![0.0; hidden]; t_len];
    let mut grad_h_bwd_rev = vec![vec![0.0; hidden]; t_len];
    for t in 0..t_len {
        let gy = &grad_logits[t];
        if gy.len() != classes {
            return Err(Error::DimensionMismatch(format!(
                "blstm_backward: gradient frame {t} has {} values, expected {classes}",
                gy.len()
            )));
        }
        let h_f = &tape.fwd.steps[t].h;
        let h_b = &tape.bwd_rev.steps[t_len - 1 - t].h;
        grads.w_fy.add_outer(gy, h_f);
        grads.w_by.add_outer(gy, h_b);
        for (acc, g) in grads.b_y.iter_mut().zip(gy) {
            *acc += g;
        }
        model.w_fy.matvec_t_acc(gy, &mut grad_h_fwd[t]);
        model
            .w_by
            .matvec_t_acc(gy, &mut grad_h_bwd_rev[t_len - 1 - t]);
    }

    let (fwd_grads, _) = lstm_backward(&model.fwd, &tape.fwd, &grad_h_fwd)?;
    let (bwd_grads, _) = lstm_backward(&model.bwd, &tape.bwd_rev, &grad_h_bwd_rev)?;
    grads.fwd = fwd_grads;
    grads.bwd = bwd_grads;
    Ok(grads)
}
