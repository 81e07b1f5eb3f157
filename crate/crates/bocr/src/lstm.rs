//! Single LSTM unit bank without peephole connections.
//!
//! One step computes, with `⊙` the elementwise product:
//!
//! ```text
//! i_t = σ(W_ix·x_t + W_ih·h_{t-1} + b_i)
//! f_t = σ(W_fx·x_t + W_fh·h_{t-1} + b_f)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ tanh(W_cx·x_t + W_ch·h_{t-1} + b_c)
//! o_t = σ(W_ox·x_t + W_oh·h_{t-1} + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! The forward pass records every gate activation in an [`LstmTape`] so
//! [`lstm_backward`] can run backpropagation through time without
//! recomputation.

use crate::error::{Error, Result};
use crate::numeric::{sigmoid, Matrix, Vector};

/// Weight bank of one directional LSTM sub-layer.
///
/// `W_*x` matrices are `hidden × input`, `W_*h` are `hidden × hidden`,
/// biases have length `hidden`. Sizes are derived from the shapes, so the
/// bank cannot carry inconsistent metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_ix: Matrix,
    pub w_ih: Matrix,
    pub w_fx: Matrix,
    pub w_fh: Matrix,
    pub w_cx: Matrix,
    pub w_ch: Matrix,
    pub w_ox: Matrix,
    pub w_oh: Matrix,
    pub b_i: Vector,
    pub b_f: Vector,
    pub b_c: Vector,
    pub b_o: Vector,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmParams {
            w_ix: Matrix::zeros(hidden_size, input_size),
            w_ih: Matrix::zeros(hidden_size, hidden_size),
            w_fx: Matrix::zeros(hidden_size, input_size),
            w_fh: Matrix::zeros(hidden_size, hidden_size),
            w_cx: Matrix::zeros(hidden_size, input_size),
            w_ch: Matrix::zeros(hidden_size, hidden_size),
            w_ox: Matrix::zeros(hidden_size, input_size),
            w_oh: Matrix::zeros(hidden_size, hidden_size),
            b_i: vec![0.0; hidden_size],
            b_f: vec![0.0; hidden_size],
            b_c: vec![0.0; hidden_size],
            b_o: vec![0.0; hidden_size],
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.b_i.len()
    }

    pub fn input_size(&self) -> usize {
        self.w_ix.cols()
    }

    /// All parameter buffers in the bank's canonical field order
    /// (`w_ix, w_ih, w_fx, w_fh, w_cx, w_ch, w_ox, w_oh, b_i, b_f, b_c, b_o`).
    /// Serialization, momentum updates and gradient checks all iterate in
    /// this order.
    pub fn fields(&self) -> [&[f64]; 12] {
        [
            self.w_ix.data(),
            self.w_ih.data(),
            self.w_fx.data(),
            self.w_fh.data(),
            self.w_cx.data(),
            self.w_ch.data(),
            self.w_ox.data(),
            self.w_oh.data(),
            &self.b_i,
            &self.b_f,
            &self.b_c,
            &self.b_o,
        ]
    }

    pub fn fields_mut(&mut self) -> [&mut [f64]; 12] {
        [
            self.w_ix.data_mut(),
            self.w_ih.data_mut(),
            self.w_fx.data_mut(),
            self.w_fh.data_mut(),
            self.w_cx.data_mut(),
            self.w_ch.data_mut(),
            self.w_ox.data_mut(),
            self.w_oh.data_mut(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }
}

/// Recurrent state carried between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    /// Memory cell `c_t`.
    pub c: Vector,
    /// Unit output `h_t`, bounded in (-1, 1).
    pub h: Vector,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState {
            c: vec![0.0; hidden_size],
            h: vec![0.0; hidden_size],
        }
    }
}

/// Cached activations for one frame, in frame order inside [`LstmTape`].
#[derive(Debug, Clone)]
pub struct LstmTapeStep {
    pub x: Vector,
    pub i: Vector,
    pub f: Vector,
    pub o: Vector,
    /// Candidate `tanh(W_cx·x + W_ch·h_prev + b_c)`.
    pub g: Vector,
    pub c: Vector,
    pub h: Vector,
    /// `tanh(c_t)`, kept so backward need not recompute it.
    pub tc: Vector,
}

/// Backpropagation cache for a whole sequence.
#[derive(Debug, Clone)]
pub struct LstmTape {
    pub steps: Vec<LstmTapeStep>,
    pub c0: Vector,
    pub h0: Vector,
}

impl LstmTape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Gradients with respect to every field of [`LstmParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub w_ix: Matrix,
    pub w_ih: Matrix,
    pub w_fx: Matrix,
    pub w_fh: Matrix,
    pub w_cx: Matrix,
    pub w_ch: Matrix,
    pub w_ox: Matrix,
    pub w_oh: Matrix,
    pub b_i: Vector,
    pub b_f: Vector,
    pub b_c: Vector,
    pub b_o: Vector,
}

impl LstmGrads {
    pub fn zeros_like(params: &LstmParams) -> Self {
        let (h, x) = (params.hidden_size(), params.input_size());
        LstmGrads {
            w_ix: Matrix::zeros(h, x),
            w_ih: Matrix::zeros(h, h),
            w_fx: Matrix::zeros(h, x),
            w_fh: Matrix::zeros(h, h),
            w_cx: Matrix::zeros(h, x),
            w_ch: Matrix::zeros(h, h),
            w_ox: Matrix::zeros(h, x),
            w_oh: Matrix::zeros(h, h),
            b_i: vec![0.0; h],
            b_f: vec![0.0; h],
            b_c: vec![0.0; h],
            b_o: vec![0.0; h],
        }
    }

    /// Same canonical order as [`LstmParams::fields`].
    pub fn fields(&self) -> [&[f64]; 12] {
        [
            self.w_ix.data(),
            self.w_ih.data(),
            self.w_fx.data(),
            self.w_fh.data(),
            self.w_cx.data(),
            self.w_ch.data(),
            self.w_ox.data(),
            self.w_oh.data(),
            &self.b_i,
            &self.b_f,
            &self.b_c,
            &self.b_o,
        ]
    }

    pub fn fields_mut(&mut self) -> [&mut [f64]; 12] {
        [
            self.w_ix.data_mut(),
            self.w_ih.data_mut(),
            self.w_fx.data_mut(),
            self.w_fh.data_mut(),
            self.w_cx.data_mut(),
            self.w_ch.data_mut(),
            self.w_ox.data_mut(),
            self.w_oh.data_mut(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }
}

fn gate_preact(wx: &Matrix, wh: &Matrix, b: &[f64], x: &[f64], h_prev: &[f64]) -> Vector {
    let mut a = b.to_vec();
    wx.matvec_acc(x, &mut a);
    wh.matvec_acc(h_prev, &mut a);
    a
}

/// One frame through the five gate equations.
pub fn lstm_step(
    params: &LstmParams,
    x_t: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, LstmTapeStep)> {
    let hidden = params.hidden_size();
    if x_t.len() != params.input_size() {
        return Err(Error::DimensionMismatch(format!(
            "lstm_step: frame has {} values, bank expects {}",
            x_t.len(),
            params.input_size()
        )));
    }
    if prev.c.len() != hidden || prev.h.len() != hidden {
        return Err(Error::DimensionMismatch(format!(
            "lstm_step: state has {}/{} values, bank expects {}",
            prev.c.len(),
            prev.h.len(),
            hidden
        )));
    }

    let mut i = gate_preact(&params.w_ix, &params.w_ih, &params.b_i, x_t, &prev.h);
    let mut f = gate_preact(&params.w_fx, &params.w_fh, &params.b_f, x_t, &prev.h);
    let mut g = gate_preact(&params.w_cx, &params.w_ch, &params.b_c, x_t, &prev.h);
    let mut o = gate_preact(&params.w_ox, &params.w_oh, &params.b_o, x_t, &prev.h);

    let mut c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    let mut tc = vec![0.0; hidden];
    for k in 0..hidden {
        i[k] = sigmoid(i[k]);
        f[k] = sigmoid(f[k]);
        g[k] = g[k].tanh();
        o[k] = sigmoid(o[k]);
        c[k] = f[k] * prev.c[k] + i[k] * g[k];
        tc[k] = c[k].tanh();
        h[k] = o[k] * tc[k];
    }

    let state = LstmState { c: c.clone(), h: h.clone() };
    let step = LstmTapeStep {
        x: x_t.to_vec(),
        i,
        f,
        o,
        g,
        c,
        h,
        tc,
    };
    Ok((state, step))
}

/// Run the bank over a whole sequence. An empty input yields an empty
/// output and tape. `initial` defaults to the zero state.
pub fn lstm_forward(
    params: &LstmParams,
    inputs: &[Vector],
    initial: Option<&LstmState>,
) -> Result<(Vec<Vector>, LstmTape)> {
    let hidden = params.hidden_size();
    let mut state = match initial {
        Some(s) => s.clone(),
        None => LstmState::zeros(hidden),
    };
    let c0 = state.c.clone();
    let h0 = state.h.clone();

    let mut outputs = Vec::with_capacity(inputs.len());
    let mut steps = Vec::with_capacity(inputs.len());
    for x_t in inputs {
        let (next, step) = lstm_step(params, x_t, &state)?;
        outputs.push(next.h.clone());
        steps.push(step);
        state = next;
    }

    Ok((outputs, LstmTape { steps, c0, h0 }))
}

/// Backpropagation through time.
///
/// `grad_h[t]` is the loss gradient with respect to the unit output at
/// frame `t`. Returns the parameter gradients and the gradient with
/// respect to every input frame.
pub fn lstm_backward(
    params: &LstmParams,
    tape: &LstmTape,
    grad_h: &[Vector],
) -> Result<(LstmGrads, Vec<Vector>)> {
    if grad_h.len() != tape.len() {
        return Err(Error::DimensionMismatch(format!(
            "lstm_backward: {} upstream gradients for a tape of {} frames",
            grad_h.len(),
            tape.len()
        )));
    }
    let hidden = params.hidden_size();
    let input = params.input_size();
    let mut grads = LstmGrads::zeros_like(params);
    let mut grad_x = vec![vec![0.0; input]; tape.len()];

    let mut dh_carry = vec![0.0; hidden];
    let mut dc_carry = vec![0.0; hidden];
    // Scratch buffers reused across frames.
    let mut da_i = vec![0.0; hidden];
    let mut da_f = vec![0.0; hidden];
    let mut da_g = vec![0.0; hidden];
    let mut da_o = vec![0.0; hidden];

    for t in (0..tape.len()).rev() {
        let step = &tape.steps[t];
        if grad_h[t].len() != hidden {
            return Err(Error::DimensionMismatch(format!(
                "lstm_backward: gradient frame {t} has length {}, expected {hidden}",
                grad_h[t].len()
            )));
        }
        let (c_prev, h_prev): (&[f64], &[f64]) = if t == 0 {
            (&tape.c0, &tape.h0)
        } else {
            (&tape.steps[t - 1].c, &tape.steps[t - 1].h)
        };

        for k in 0..hidden {
            let dh = grad_h[t][k] + dh_carry[k];
            let do_ = dh * step.tc[k];
            let dc = dc_carry[k] + dh * step.o[k] * (1.0 - step.tc[k] * step.tc[k]);
            let di = dc * step.g[k];
            let df = dc * c_prev[k];
            let dg = dc * step.i[k];
            da_i[k] = di * step.i[k] * (1.0 - step.i[k]);
            da_f[k] = df * step.f[k] * (1.0 - step.f[k]);
            da_g[k] = dg * (1.0 - step.g[k] * step.g[k]);
            da_o[k] = do_ * step.o[k] * (1.0 - step.o[k]);
            dc_carry[k] = dc * step.f[k];
        }

        grads.w_ix.add_outer(&da_i, &step.x);
        grads.w_fx.add_outer(&da_f, &step.x);
        grads.w_cx.add_outer(&da_g, &step.x);
        grads.w_ox.add_outer(&da_o, &step.x);
        grads.w_ih.add_outer(&da_i, h_prev);
        grads.w_fh.add_outer(&da_f, h_prev);
        grads.w_ch.add_outer(&da_g, h_prev);
        grads.w_oh.add_outer(&da_o, h_prev);
        for k in 0..hidden {
            grads.b_i[k] += da_i[k];
            grads.b_f[k] += da_f[k];
            grads.b_c[k] += da_g[k];
            grads.b_o[k] += da_o[k];
        }

        let gx = &mut grad_x[t];
        params.w_ix.matvec_t_acc(&da_i, gx);
        params.w_fx.matvec_t_acc(&da_f, gx);
        params.w_cx.matvec_t_acc(&da_g, gx);
        params.w_ox.matvec_t_acc(&da_o, gx);

        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        params.w_ih.matvec_t_acc(&da_i, &mut dh_carry);
        params.w_fh.matvec_t_acc(&da_f, &mut dh_carry);
        params.w_ch.matvec_t_acc(&da_g, &mut dh_carry);
        params.w_oh.matvec_t_acc(&da_o, &mut dh_carry);
    }

    Ok((grads, grad_x))
}
