use ndarray::{Array1, Array2};

use crate::error::{NashError, Result};
use crate::nn::params::{TensorMut, TensorRef};
use crate::nn::{DenseLayer, ParamSet, Rng};

/// Layer widths and optional heads. Depth 0 encoder means the vocabulary
/// maps straight to code logits; depth 0 decoder is the linear softmax
/// decoder over `z'ᵀE + b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub vocab_size: usize,
    pub bits: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    /// `Some(c)` adds the supervised classifier head over `c` classes.
    pub num_classes: Option<usize>,
    /// Adds the linear map from code logits to per-bit log-variance.
    pub noise_head: bool,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.bits == 0 || self.bits > super::code::MAX_BITS {
            return Err(NashError::Config(format!(
                "invalid architecture: vocab_size={} bits={}",
                self.vocab_size, self.bits
            )));
        }
        let widths = self
            .encoder_hidden
            .iter()
            .chain(&self.decoder_hidden)
            .chain(&self.classifier_hidden);
        if widths.into_iter().any(|&w| w == 0) {
            return Err(NashError::Config("hidden layer widths must be >= 1".into()));
        }
        if self.num_classes == Some(0) {
            return Err(NashError::Config(
                "classifier needs at least one class".into(),
            ));
        }
        Ok(())
    }

    /// Width of the representation that multiplies the embedding matrix.
    pub fn embedding_rows(&self) -> usize {
        self.decoder_hidden.last().copied().unwrap_or(self.bits)
    }
}

/// All trainable arrays of the model. Gradients are stored in a value of
/// the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NashParams {
    pub arch: Architecture,
    /// Hidden layers of the inference network (ReLU); the first reads the
    /// sparse document row.
    pub encoder: Vec<DenseLayer>,
    /// Final encoder layer producing the `l` code logits.
    pub logits: DenseLayer,
    /// `bits → bits` map from code logits to `log σ²`.
    pub noise_head: Option<DenseLayer>,
    /// Hidden decoder layers (ReLU) applied to `z'` before the softmax.
    pub decoder: Vec<DenseLayer>,
    /// Word embeddings, one column per vocabulary term.
    pub embedding: Array2<f64>,
    pub word_bias: Array1<f64>,
    /// Classifier hidden layers (ReLU) followed by the output layer.
    pub classifier: Vec<DenseLayer>,
}

impl NashParams {
    pub fn zeros(arch: &Architecture) -> Self {
        let (enc_dims, dec_dims, cls_dims) = layer_dims(arch);
        NashParams {
            arch: arch.clone(),
            encoder: enc_dims[..enc_dims.len() - 1]
                .iter()
                .map(|&(i, o)| DenseLayer::zeros(i, o))
                .collect(),
            logits: {
                let &(i, o) = enc_dims.last().unwrap();
                DenseLayer::zeros(i, o)
            },
            noise_head: arch
                .noise_head
                .then(|| DenseLayer::zeros(arch.bits, arch.bits)),
            decoder: dec_dims
                .iter()
                .map(|&(i, o)| DenseLayer::zeros(i, o))
                .collect(),
            embedding: Array2::zeros((arch.embedding_rows(), arch.vocab_size)),
            word_bias: Array1::zeros(arch.vocab_size),
            classifier: cls_dims
                .iter()
                .map(|&(i, o)| DenseLayer::zeros(i, o))
                .collect(),
        }
    }

    /// Uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases. The noise
    /// head bias starts at `initial_log_var` so the first noise draws have
    /// a chosen scale.
    pub fn init(arch: &Architecture, rng: &mut Rng, initial_log_var: f64) -> Result<Self> {
        arch.validate()?;
        let mut p = NashParams::zeros(arch);
        for layer in p
            .encoder
            .iter_mut()
            .chain(std::iter::once(&mut p.logits))
            .chain(p.noise_head.iter_mut())
            .chain(p.decoder.iter_mut())
            .chain(p.classifier.iter_mut())
        {
            *layer = DenseLayer::glorot(layer.input_dim(), layer.output_dim(), rng);
        }
        if let Some(head) = p.noise_head.as_mut() {
            head.bias.fill(initial_log_var);
        }
        let (rows, cols) = p.embedding.dim();
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        p.embedding =
            Array2::from_shape_simple_fn((rows, cols), || rng.uniform_range(-limit, limit));
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        NashParams::zeros(&self.arch)
    }

    pub fn bits(&self) -> usize {
        self.arch.bits
    }

    pub fn vocab_size(&self) -> usize {
        self.arch.vocab_size
    }

    pub fn is_supervised(&self) -> bool {
        !self.classifier.is_empty()
    }
}

type Dims = Vec<(usize, usize)>;

fn layer_dims(arch: &Architecture) -> (Dims, Dims, Dims) {
    let chain = |start: usize, hidden: &[usize], end: Option<usize>| -> Dims {
        let mut dims = Vec::new();
        let mut prev = start;
        for &w in hidden {
            dims.push((prev, w));
            prev = w;
        }
        if let Some(e) = end {
            dims.push((prev, e));
        }
        dims
    };
    let enc = chain(arch.vocab_size, &arch.encoder_hidden, Some(arch.bits));
    let dec = chain(arch.bits, &arch.decoder_hidden, None);
    let cls = match arch.num_classes {
        Some(c) => chain(arch.bits, &arch.classifier_hidden, Some(c)),
        None => Vec::new(),
    };
    (enc, dec, cls)
}

impl ParamSet for NashParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (i, l) in self.encoder.iter().enumerate() {
            l.push_tensors(&format!("encoder.{i}"), &mut out);
        }
        self.logits.push_tensors("logits", &mut out);
        if let Some(h) = &self.noise_head {
            h.push_tensors("noise_head", &mut out);
        }
        for (i, l) in self.decoder.iter().enumerate() {
            l.push_tensors(&format!("decoder.{i}"), &mut out);
        }
        out.push(TensorRef {
            name: "embedding".into(),
            shape: self.embedding.shape().to_vec(),
            data: self.embedding.as_slice().expect("standard layout"),
        });
        out.push(TensorRef {
            name: "word_bias".into(),
            shape: self.word_bias.shape().to_vec(),
            data: self.word_bias.as_slice().expect("standard layout"),
        });
        for (i, l) in self.classifier.iter().enumerate() {
            l.push_tensors(&format!("classifier.{i}"), &mut out);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for (i, l) in self.encoder.iter_mut().enumerate() {
            l.push_tensors_mut(&format!("encoder.{i}"), &mut out);
        }
        self.logits.push_tensors_mut("logits", &mut out);
        if let Some(h) = &mut self.noise_head {
            h.push_tensors_mut("noise_head", &mut out);
        }
        for (i, l) in self.decoder.iter_mut().enumerate() {
            l.push_tensors_mut(&format!("decoder.{i}"), &mut out);
        }
        let eshape = self.embedding.shape().to_vec();
        out.push(TensorMut {
            name: "embedding".into(),
            shape: eshape,
            data: self.embedding.as_slice_mut().expect("standard layout"),
        });
        let bshape = self.word_bias.shape().to_vec();
        out.push(TensorMut {
            name: "word_bias".into(),
            shape: bshape,
            data: self.word_bias.as_slice_mut().expect("standard layout"),
        });
        for (i, l) in self.classifier.iter_mut().enumerate() {
            l.push_tensors_mut(&format!("classifier.{i}"), &mut out);
        }
        out
    }
}
