use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Relu,
    Tanh,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Nonlinearity::Relu => a.max(0.0),
            Nonlinearity::Tanh => a.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `h = s(a)`.
    /// ReLU uses the subgradient 0 at 0.
    #[inline]
    pub fn slope_from_output(self, h: f64) -> f64 {
        match self {
            Nonlinearity::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Nonlinearity::Tanh => 1.0 - h * h,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Softmax,
    Identity,
}

/// Identifies one trainable tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorId {
    InputWeights(usize),
    HiddenWeights(usize),
    Bias(usize),
    Decoder,
    DecoderBias,
    InitEncoder,
}

impl fmt::Display for TensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorId::InputWeights(k) => write!(f, "layer{k}.w_ih"),
            TensorId::HiddenWeights(k) => write!(f, "layer{k}.w_hh"),
            TensorId::Bias(k) => write!(f, "layer{k}.bias"),
            TensorId::Decoder => f.write_str("decoder.weight"),
            TensorId::DecoderBias => f.write_str("decoder.bias"),
            TensorId::InitEncoder => f.write_str("init_encoder.weight"),
        }
    }
}

impl FromStr for TensorId {
    type Err = Error;

    /// Parses the names produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown tensor name {s:?}"));
        match s {
            "decoder.weight" => return Ok(TensorId::Decoder),
            "decoder.bias" => return Ok(TensorId::DecoderBias),
            "init_encoder.weight" => return Ok(TensorId::InitEncoder),
            _ => {}
        }
        let rest = s.strip_prefix("layer").ok_or_else(bad)?;
        let (k, kind) = rest.split_once('.').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        match kind {
            "w_ih" => Ok(TensorId::InputWeights(k)),
            "w_hh" => Ok(TensorId::HiddenWeights(k)),
            "bias" => Ok(TensorId::Bias(k)),
            _ => Err(bad()),
        }
    }
}

/// One Elman layer: `H_t = s(W_hh H_{t-1} + W_ih x_t + B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentLayer {
    /// hidden × input
    pub w_ih: Array2<f64>,
    /// hidden × hidden
    pub w_hh: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

impl RecurrentLayer {
    pub fn hidden_dim(&self) -> usize {
        self.w_hh.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.ncols()
    }
}

/// Sizes and bias flags of a model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RnnShape {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub bias: bool,
    pub decoder_bias: bool,
    /// Width of the context vector linearly encoded into the first layer's
    /// initial hidden state, if any.
    #[serde(default)]
    pub init_dim: Option<usize>,
}

/// All trainable tensors of a stacked Elman RNN with a linear decoder.
///
/// The same type doubles as the gradient container and as optimizer moment
/// storage.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams {
    pub layers: Vec<RecurrentLayer>,
    /// output × hidden of the last layer
    pub decoder: Array2<f64>,
    pub decoder_bias: Option<Array1<f64>>,
    /// hidden₀ × init_dim
    pub init_encoder: Option<Array2<f64>>,
    pub nonlinearity: Nonlinearity,
    pub output_activation: OutputActivation,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.random_range(-bound..=bound))
}

impl RnnParams {
    /// Every matrix and bias drawn uniformly from `±1/√fan_in`.
    pub fn init(
        shape: &RnnShape,
        nonlinearity: Nonlinearity,
        output_activation: OutputActivation,
        seed: u64,
    ) -> Result<Self> {
        validate_shape(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(shape.hidden_dims.len());
        let mut input = shape.input_dim;
        for &hidden in &shape.hidden_dims {
            let b_ih = 1.0 / (input as f64).sqrt();
            let b_hh = 1.0 / (hidden as f64).sqrt();
            let w_ih = uniform_matrix(&mut rng, hidden, input, b_ih);
            let w_hh = uniform_matrix(&mut rng, hidden, hidden, b_hh);
            let bias = shape.bias.then(|| uniform_vector(&mut rng, hidden, b_hh));
            layers.push(RecurrentLayer { w_ih, w_hh, bias });
            input = hidden;
        }
        let last = *shape.hidden_dims.last().expect("validated non-empty");
        let b_dec = 1.0 / (last as f64).sqrt();
        let decoder = uniform_matrix(&mut rng, shape.output_dim, last, b_dec);
        let decoder_bias = shape
            .decoder_bias
            .then(|| uniform_vector(&mut rng, shape.output_dim, b_dec));
        let init_encoder = shape.init_dim.map(|d| {
            let b = 1.0 / (d as f64).sqrt();
            uniform_matrix(&mut rng, shape.hidden_dims[0], d, b)
        });
        Ok(RnnParams {
            layers,
            decoder,
            decoder_bias,
            init_encoder,
            nonlinearity,
            output_activation,
        })
    }

    pub fn shape(&self) -> RnnShape {
        RnnShape {
            input_dim: self.layers[0].input_dim(),
            hidden_dims: self.layers.iter().map(|l| l.hidden_dim()).collect(),
            output_dim: self.decoder.nrows(),
            bias: self.layers[0].bias.is_some(),
            decoder_bias: self.decoder_bias.is_some(),
            init_dim: self.init_encoder.as_ref().map(|e| e.ncols()),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_tensor_mut(|_, mut t| t.fill(0.0));
        z
    }

    pub fn tensor_ids(&self) -> Vec<TensorId> {
        let mut ids = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            ids.push(TensorId::InputWeights(k));
            ids.push(TensorId::HiddenWeights(k));
            if l.bias.is_some() {
                ids.push(TensorId::Bias(k));
            }
        }
        ids.push(TensorId::Decoder);
        if self.decoder_bias.is_some() {
            ids.push(TensorId::DecoderBias);
        }
        if self.init_encoder.is_some() {
            ids.push(TensorId::InitEncoder);
        }
        ids
    }

    pub fn tensor(&self, id: TensorId) -> Option<ArrayViewD<'_, f64>> {
        Some(match id {
            TensorId::InputWeights(k) => self.layers.get(k)?.w_ih.view().into_dyn(),
            TensorId::HiddenWeights(k) => self.layers.get(k)?.w_hh.view().into_dyn(),
            TensorId::Bias(k) => self.layers.get(k)?.bias.as_ref()?.view().into_dyn(),
            TensorId::Decoder => self.decoder.view().into_dyn(),
            TensorId::DecoderBias => self.decoder_bias.as_ref()?.view().into_dyn(),
            TensorId::InitEncoder => self.init_encoder.as_ref()?.view().into_dyn(),
        })
    }

    pub fn tensor_mut(&mut self, id: TensorId) -> Option<ArrayViewMutD<'_, f64>> {
        Some(match id {
            TensorId::InputWeights(k) => self.layers.get_mut(k)?.w_ih.view_mut().into_dyn(),
            TensorId::HiddenWeights(k) => self.layers.get_mut(k)?.w_hh.view_mut().into_dyn(),
            TensorId::Bias(k) => self.layers.get_mut(k)?.bias.as_mut()?.view_mut().into_dyn(),
            TensorId::Decoder => self.decoder.view_mut().into_dyn(),
            TensorId::DecoderBias => self.decoder_bias.as_mut()?.view_mut().into_dyn(),
            TensorId::InitEncoder => self.init_encoder.as_mut()?.view_mut().into_dyn(),
        })
    }

    /// 2-D tensor by id (weights, decoder, encoder).
    pub fn matrix(&self, id: TensorId) -> Option<&Array2<f64>> {
        match id {
            TensorId::InputWeights(k) => self.layers.get(k).map(|l| &l.w_ih),
            TensorId::HiddenWeights(k) => self.layers.get(k).map(|l| &l.w_hh),
            TensorId::Decoder => Some(&self.decoder),
            TensorId::InitEncoder => self.init_encoder.as_ref(),
            TensorId::Bias(_) | TensorId::DecoderBias => None,
        }
    }

    pub fn matrix_mut(&mut self, id: TensorId) -> Option<&mut Array2<f64>> {
        match id {
            TensorId::InputWeights(k) => self.layers.get_mut(k).map(|l| &mut l.w_ih),
            TensorId::HiddenWeights(k) => self.layers.get_mut(k).map(|l| &mut l.w_hh),
            TensorId::Decoder => Some(&mut self.decoder),
            TensorId::InitEncoder => self.init_encoder.as_mut(),
            TensorId::Bias(_) | TensorId::DecoderBias => None,
        }
    }

    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(TensorId, ArrayViewMutD<'_, f64>)) {
        for id in self.tensor_ids() {
            let t = self.tensor_mut(id).expect("listed id exists");
            f(id, t);
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.tensor_ids()
            .into_iter()
            .map(|id| self.tensor(id).expect("listed id exists").len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensor_ids()
            .into_iter()
            .all(|id| self.tensor(id).expect("listed id exists").iter().all(|v| v.is_finite()))
    }

    /// Scales every tensor in place.
    pub fn scale(&mut self, factor: f64) {
        self.for_each_tensor_mut(|_, mut t| t.mapv_inplace(|v| v * factor));
    }

    /// Euclidean norm over all tensors.
    pub fn global_norm(&self) -> f64 {
        self.tensor_ids()
            .into_iter()
            .map(|id| {
                self.tensor(id)
                    .expect("listed id exists")
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn check_matches(&self, other: &RnnParams) -> Result<()> {
        let a = self.tensor_ids();
        let b = other.tensor_ids();
        if a != b {
            return Err(Error::InvalidArgument(format!("tensor lists differ: {a:?} vs {b:?}")));
        }
        for id in a {
            let x = self.tensor(id).expect("listed");
            let y = other.tensor(id).expect("listed");
            if x.shape() != y.shape() {
                return Err(Error::shape(x.shape(), y.shape()));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_shape(shape: &RnnShape) -> Result<()> {
    if shape.input_dim == 0 || shape.output_dim == 0 {
        return Err(Error::InvalidArgument("input and output dims must be >= 1".into()));
    }
    if shape.hidden_dims.is_empty() || shape.hidden_dims.contains(&0) {
        return Err(Error::InvalidArgument(
            "need at least one layer, each with hidden dim >= 1".into(),
        ));
    }
    if shape.init_dim == Some(0) {
        return Err(Error::InvalidArgument("init_dim must be >= 1".into()));
    }
    Ok(())
}
