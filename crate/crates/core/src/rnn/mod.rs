//! Stacked Elman RNN: forward pass, full-sequence BPTT, losses and optimizers.
//!
//! Everything is batched: a sequence is `T` matrices of shape `batch × input`,
//! and hidden states are `batch × hidden`. A single unbatched sequence is a
//! batch of one.

mod loss;
mod optim;
mod params;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis, Zip};

pub use loss::{cross_entropy, log_sum_exp, mse, softmax, Criterion};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState, StepStats};
pub use params::{Nonlinearity, OutputActivation, RecurrentLayer, RnnParams, RnnShape, TensorId};

use crate::error::{Error, Result};

/// How each layer's hidden state is set before the first input.
#[derive(Clone, Copy, Debug)]
pub enum InitialState<'a> {
    Zeros,
    /// One `batch × hidden_k` matrix per layer.
    States(&'a [Array2<f64>]),
    /// `batch × init_dim` context passed through the model's init encoder into
    /// layer 0; deeper layers start at zero.
    Encoded(&'a Array2<f64>),
}

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `hidden[k][t]` for `t = 0..=T`; index 0 is the initial state.
    pub hidden: Vec<Vec<Array2<f64>>>,
    inputs: Vec<Array2<f64>>,
    context: Option<Array2<f64>>,
    /// Decoder output before the output activation, `batch × out`.
    pub logits: Array2<f64>,
    /// Decoder output after the output activation.
    pub output: Array2<f64>,
}

impl ForwardTrace {
    pub fn final_hidden(&self) -> &Array2<f64> {
        self.hidden.last().and_then(|l| l.last()).expect("at least one layer")
    }

    pub fn seq_len(&self) -> usize {
        self.inputs.len()
    }
}

/// Gradients of a scalar loss with respect to every parameter, plus the
/// initial hidden states.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: RnnParams,
    pub initial_states: Vec<Array2<f64>>,
}

fn add_bias(a: &mut Array2<f64>, b: &Array1<f64>) {
    for mut row in a.axis_iter_mut(Axis(0)) {
        row += b;
    }
}

pub fn forward(params: &RnnParams, inputs: &[Array2<f64>], init: InitialState<'_>) -> Result<ForwardTrace> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("sequence length must be >= 1".into()));
    }
    let batch = inputs[0].nrows();
    let in_dim = params.layers[0].input_dim();
    for x in inputs {
        if x.dim() != (batch, in_dim) {
            return Err(Error::shape(&[batch, in_dim], &[x.nrows(), x.ncols()]));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rnn input".into()));
        }
    }

    let mut context = None;
    let mut initial: Vec<Array2<f64>> = match init {
        InitialState::Zeros => params
            .layers
            .iter()
            .map(|l| Array2::zeros((batch, l.hidden_dim())))
            .collect(),
        InitialState::States(states) => {
            if states.len() != params.layers.len() {
                return Err(Error::shape(&[params.layers.len()], &[states.len()]));
            }
            for (s, l) in states.iter().zip(&params.layers) {
                if s.dim() != (batch, l.hidden_dim()) {
                    return Err(Error::shape(&[batch, l.hidden_dim()], &[s.nrows(), s.ncols()]));
                }
            }
            states.to_vec()
        }
        InitialState::Encoded(ctx) => {
            let enc = params.init_encoder.as_ref().ok_or_else(|| {
                Error::InvalidArgument("model has no init encoder for an encoded initial state".into())
            })?;
            if ctx.dim() != (batch, enc.ncols()) {
                return Err(Error::shape(&[batch, enc.ncols()], &[ctx.nrows(), ctx.ncols()]));
            }
            context = Some(ctx.clone());
            let mut states: Vec<Array2<f64>> = params
                .layers
                .iter()
                .map(|l| Array2::zeros((batch, l.hidden_dim())))
                .collect();
            states[0] = ctx.dot(&enc.t());
            states
        }
    };

    let s = params.nonlinearity;
    let mut hidden: Vec<Vec<Array2<f64>>> = Vec::with_capacity(params.layers.len());
    for (k, layer) in params.layers.iter().enumerate() {
        let h0 = std::mem::take(&mut initial[k]);
        let mut states = Vec::with_capacity(inputs.len() + 1);
        states.push(h0);
        for t in 0..inputs.len() {
            let x = if k == 0 { &inputs[t] } else { &hidden[k - 1][t + 1] };
            let mut a = Array2::zeros((batch, layer.hidden_dim()));
            general_mat_mul(1.0, &states[t], &layer.w_hh.t(), 0.0, &mut a);
            general_mat_mul(1.0, x, &layer.w_ih.t(), 1.0, &mut a);
            if let Some(b) = &layer.bias {
                add_bias(&mut a, b);
            }
            a.mapv_inplace(|v| s.apply(v));
            states.push(a);
        }
        hidden.push(states);
    }

    let last = hidden.last().and_then(|l| l.last()).expect("non-empty");
    let mut logits = last.dot(&params.decoder.t());
    if let Some(b) = &params.decoder_bias {
        add_bias(&mut logits, b);
    }
    let output = match params.output_activation {
        OutputActivation::Identity => logits.clone(),
        OutputActivation::Softmax => {
            let mut out = logits.clone();
            for mut row in out.axis_iter_mut(Axis(0)) {
                let p = softmax(row.as_slice().expect("standard layout"))?;
                row.assign(&Array1::from(p));
            }
            out
        }
    };

    Ok(ForwardTrace {
        hidden,
        inputs: inputs.to_vec(),
        context,
        logits,
        output,
    })
}

/// Backpropagation through time. `logits_grad` is `∂loss/∂logits`, the
/// gradient at the decoder output before the output activation.
pub fn backward(params: &RnnParams, trace: &ForwardTrace, logits_grad: &Array2<f64>) -> Result<Gradients> {
    if logits_grad.dim() != trace.logits.dim() {
        let (a, b) = trace.logits.dim();
        return Err(Error::shape(&[a, b], &[logits_grad.nrows(), logits_grad.ncols()]));
    }
    if trace.hidden.len() != params.layers.len() {
        return Err(Error::InvalidArgument("forward trace does not match the model".into()));
    }
    let s = params.nonlinearity;
    let seq = trace.inputs.len();
    let mut grads = params.zeros_like();

    let top = trace.final_hidden();
    grads.decoder = logits_grad.t().dot(top);
    if let Some(db) = grads.decoder_bias.as_mut() {
        *db = logits_grad.sum_axis(Axis(0));
    }

    // above[t] holds ∂loss/∂H_t of the current layer arriving from the layer
    // above (or from the decoder at the last step).
    let mut above: Vec<Option<Array2<f64>>> = vec![None; seq + 1];
    above[seq] = Some(logits_grad.dot(&params.decoder));
    let mut initial_states = vec![Array2::zeros((0, 0)); params.layers.len()];

    for k in (0..params.layers.len()).rev() {
        let layer = &params.layers[k];
        let states = &trace.hidden[k];
        let (batch, hid) = states[0].dim();
        let g = &mut grads.layers[k];
        let mut below: Vec<Option<Array2<f64>>> = vec![None; seq + 1];
        let mut dh_rec = Array2::<f64>::zeros((batch, hid));
        let mut da = Array2::<f64>::zeros((batch, hid));
        for t in (1..=seq).rev() {
            if let Some(extra) = above[t].take() {
                dh_rec += &extra;
            }
            Zip::from(&mut da)
                .and(&dh_rec)
                .and(&states[t])
                .for_each(|d, &gh, &h| *d = gh * s.slope_from_output(h));
            let x = if k == 0 {
                &trace.inputs[t - 1]
            } else {
                &trace.hidden[k - 1][t]
            };
            general_mat_mul(1.0, &da.t(), &states[t - 1], 1.0, &mut g.w_hh);
            general_mat_mul(1.0, &da.t(), x, 1.0, &mut g.w_ih);
            if let Some(b) = g.bias.as_mut() {
                *b += &da.sum_axis(Axis(0));
            }
            if k > 0 {
                below[t] = Some(da.dot(&layer.w_ih));
            }
            general_mat_mul(1.0, &da, &layer.w_hh, 0.0, &mut dh_rec);
        }
        initial_states[k] = dh_rec;
        above = below;
    }

    if let (Some(ctx), Some(enc)) = (&trace.context, grads.init_encoder.as_mut()) {
        *enc = initial_states[0].t().dot(ctx);
    }

    Ok(Gradients {
        params: grads,
        initial_states,
    })
}
