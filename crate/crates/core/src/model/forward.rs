//! Batched forward pass, loss terms and the backward pass with the
//! straight-through estimator.
//!
//! All randomness enters through [`Draws`]; given the same draws the forward
//! and backward passes are deterministic, which is what the gradient checks
//! rely on.

use ndarray::{Array2, ArrayView2, Axis, Zip};

use super::params::NashParams;
use crate::corpus::DocumentVector;
use crate::error::{NashError, Result};
use crate::nn::activation::{relu_backward, relu_forward, sigmoid_backward, sigmoid_forward};
use crate::nn::dropout::{check_rate, dropout_mask};
use crate::nn::{ParamSet, Rng, SparseRow};

pub const SIGMA_MIN: f64 = 1e-4;
pub const SIGMA_MAX: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binarization {
    /// Hard threshold at 0.5.
    Deterministic,
    /// Threshold at a fresh uniform draw per bit.
    Stochastic,
    /// No binarization: the probabilities themselves are the code. Makes the
    /// whole network differentiable; used to check gradients end to end.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    None,
    /// `z' = z + sigma * eps` with a constant sigma.
    Fixed {
        sigma: f64,
    },
    /// `log sigma^2` predicted from the code logits by the noise head.
    DataDependent,
}

/// Everything the loss needs besides parameters and data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub binarization: Binarization,
    pub noise: NoiseMode,
    /// Bernoulli prior probability per bit.
    pub prior: f64,
    /// Weight of the classifier cross-entropy.
    pub alpha: f64,
    /// Drop probability on the last encoder hidden layer.
    pub dropout_rate: f64,
    pub recon_weight: f64,
    pub kl_weight: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            binarization: Binarization::Stochastic,
            noise: NoiseMode::DataDependent,
            prior: 0.5,
            alpha: 0.0,
            dropout_rate: 0.2,
            recon_weight: 1.0,
            kl_weight: 1.0,
        }
    }
}

impl Objective {
    pub fn validate(&self, params: &NashParams) -> Result<()> {
        check_prior(self.prior)?;
        check_rate(self.dropout_rate)?;
        match self.noise {
            NoiseMode::Fixed { sigma } if !sigma.is_finite() || sigma < 0.0 => {
                return Err(NashError::Config(format!(
                    "fixed noise sigma must be >= 0, got {sigma}"
                )));
            }
            NoiseMode::DataDependent if params.noise_head.is_none() => {
                return Err(NashError::Config(
                    "data-dependent noise requires a noise head".into(),
                ));
            }
            _ => {}
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(NashError::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_prior(prior: f64) -> Result<()> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(NashError::Config(format!(
            "prior must lie strictly inside (0, 1), got {prior}"
        )));
    }
    Ok(())
}

/// Random inputs of one forward pass, one row per document.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    /// Uniform thresholds for stochastic binarization.
    pub mu: Array2<f64>,
    /// Standard normal noise for the decoder input.
    pub eps: Array2<f64>,
    /// Inverted-dropout scale factors for the last encoder hidden layer.
    pub dropout: Option<Array2<f64>>,
}

impl Draws {
    /// Samples draws for `rngs.len()` documents, each from its own stream in
    /// a fixed order (dropout mask, thresholds, noise).
    pub fn sample(
        params: &NashParams,
        objective: &Objective,
        rngs: &mut [Rng],
        training: bool,
    ) -> Draws {
        let b = rngs.len();
        let l = params.bits();
        let hidden = params.arch.encoder_hidden.last().copied();
        let use_dropout = training && objective.dropout_rate > 0.0 && hidden.is_some();
        let mut mu = Array2::zeros((b, l));
        let mut eps = Array2::zeros((b, l));
        let mut dropout = use_dropout.then(|| Array2::zeros((b, hidden.unwrap())));
        for (i, rng) in rngs.iter_mut().enumerate() {
            if let Some(mask) = dropout.as_mut() {
                mask.row_mut(i)
                    .assign(&dropout_mask(hidden.unwrap(), objective.dropout_rate, rng));
            }
            for v in mu.row_mut(i).iter_mut() {
                *v = rng.uniform();
            }
            for v in eps.row_mut(i).iter_mut() {
                *v = rng.normal();
            }
        }
        Draws { mu, eps, dropout }
    }

    /// Draws for inference: no dropout, thresholds at 0.5, zero noise.
    pub fn inference(batch: usize, bits: usize) -> Draws {
        Draws {
            mu: Array2::from_elem((batch, bits), 0.5),
            eps: Array2::zeros((batch, bits)),
            dropout: None,
        }
    }
}

/// Intermediate values of the encoder.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    /// ReLU outputs of each hidden layer (before dropout).
    pub hidden: Vec<Array2<f64>>,
    /// Input to the logit layer: last hidden output after dropout.
    pub dropped: Option<Array2<f64>>,
    pub logits: Array2<f64>,
    /// Bit probabilities `sigmoid(logits)`.
    pub probs: Array2<f64>,
}

/// Everything the backward pass needs, plus per-document loss terms.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub encoder: EncoderTrace,
    pub mu: Array2<f64>,
    pub dropout: Option<Array2<f64>>,
    /// Code fed to the decoder before noise and to the classifier.
    pub z: Array2<f64>,
    pub eps: Array2<f64>,
    pub log_var: Option<Array2<f64>>,
    pub sigma: Array2<f64>,
    pub z_noisy: Array2<f64>,
    pub decoder_hidden: Vec<Array2<f64>>,
    pub word_log_probs: Array2<f64>,
    pub classifier_hidden: Vec<Array2<f64>>,
    pub class_log_probs: Option<Array2<f64>>,
    pub recon: Vec<f64>,
    pub kl: Vec<f64>,
    pub dis: Vec<f64>,
}

/// Summed loss terms over a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub recon: f64,
    pub kl: f64,
    pub dis: f64,
    pub total: f64,
    pub docs: usize,
}

impl LossReport {
    pub fn merge(&mut self, other: &LossReport) {
        self.recon += other.recon;
        self.kl += other.kl;
        self.dis += other.dis;
        self.total += other.total;
        self.docs += other.docs;
    }
}

fn sparse_rows<'a>(docs: &'a [&'a DocumentVector]) -> Vec<SparseRow<'a>> {
    docs.iter().map(|d| d.entries.as_slice()).collect()
}

/// Runs the inference network. `dropout` holds per-row scale factors for the
/// last hidden layer.
pub fn encode(
    params: &NashParams,
    docs: &[&DocumentVector],
    dropout: Option<&Array2<f64>>,
) -> Result<EncoderTrace> {
    let rows = sparse_rows(docs);
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(params.encoder.len());
    for (k, layer) in params.encoder.iter().enumerate() {
        let pre = if k == 0 {
            layer.forward_sparse(&rows)?
        } else {
            layer.forward(hidden[k - 1].view())?
        };
        hidden.push(relu_forward(pre.view()));
    }
    let (dropped, logits) = match hidden.last() {
        Some(last) => {
            let dropped = match dropout {
                Some(mask) => last * mask,
                None => last.clone(),
            };
            let logits = params.logits.forward(dropped.view())?;
            (Some(dropped), logits)
        }
        None => (None, params.logits.forward_sparse(&rows)?),
    };
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(NashError::NonFinite("encoder logits".into()));
    }
    let probs = sigmoid_forward(logits.view());
    Ok(EncoderTrace {
        hidden,
        dropped,
        logits,
        probs,
    })
}

fn kl_bit(h: f64, prior: f64) -> f64 {
    h * (h / prior).ln() + (1.0 - h) * ((1.0 - h) / (1.0 - prior)).ln()
}

fn kl_bit_grad(h: f64, prior: f64) -> f64 {
    (h / prior).ln() - ((1.0 - h) / (1.0 - prior)).ln()
}

fn row_log_softmax(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&u| (u - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|u| u - lse);
    }
    m
}

/// Applies the decoder hidden layers to `input`, collecting activations.
pub(crate) fn decoder_hidden(
    params: &NashParams,
    input: ArrayView2<'_, f64>,
) -> Result<Vec<Array2<f64>>> {
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(params.decoder.len());
    for (k, layer) in params.decoder.iter().enumerate() {
        let pre = if k == 0 {
            layer.forward(input)?
        } else {
            layer.forward(acts[k - 1].view())?
        };
        acts.push(relu_forward(pre.view()));
    }
    Ok(acts)
}

/// Full forward pass with the given draws.
pub fn forward(
    params: &NashParams,
    docs: &[&DocumentVector],
    draws: &Draws,
    objective: &Objective,
) -> Result<ForwardTrace> {
    let b = docs.len();
    let l = params.bits();
    if draws.mu.dim() != (b, l) || draws.eps.dim() != (b, l) {
        return Err(NashError::shape(
            "forward draws",
            format!("{b}x{l}"),
            format!("{:?}", draws.mu.dim()),
        ));
    }
    let enc = encode(params, docs, draws.dropout.as_ref())?;
    let h = &enc.probs;

    let z = match objective.binarization {
        Binarization::Deterministic => h.mapv(|p| if p > 0.5 { 1.0 } else { 0.0 }),
        Binarization::Stochastic => {
            Zip::from(h)
                .and(&draws.mu)
                .map_collect(|&p, &m| if p > m { 1.0 } else { 0.0 })
        }
        Binarization::Identity => h.clone(),
    };

    let (log_var, sigma) = match objective.noise {
        NoiseMode::None => (None, Array2::zeros((b, l))),
        NoiseMode::Fixed { sigma } => (None, Array2::from_elem((b, l), sigma)),
        NoiseMode::DataDependent => {
            let head = params.noise_head.as_ref().ok_or_else(|| {
                NashError::Config("data-dependent noise requires a noise head".into())
            })?;
            let lv = head.forward(enc.logits.view())?;
            let sigma = lv.mapv(|v| (0.5 * v).exp().clamp(SIGMA_MIN, SIGMA_MAX));
            if sigma.iter().any(|s| !s.is_finite()) {
                return Err(NashError::NonFinite("noise sigma".into()));
            }
            (Some(lv), sigma)
        }
    };
    let z_noisy = match objective.noise {
        NoiseMode::None => z.clone(),
        _ => &z + &(&sigma * &draws.eps),
    };

    let dec_hidden = decoder_hidden(params, z_noisy.view())?;
    let dec_out = dec_hidden.last().unwrap_or(&z_noisy);
    let mut word_logits = dec_out.dot(&params.embedding);
    word_logits += &params.word_bias;
    let word_log_probs = row_log_softmax(word_logits);

    let recon: Vec<f64> = docs
        .iter()
        .zip(word_log_probs.rows())
        .map(|(d, lp)| {
            -d.raw_counts
                .iter()
                .map(|&(w, c)| c * lp[w as usize])
                .sum::<f64>()
        })
        .collect();
    let kl: Vec<f64> = h
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|&p| kl_bit(p, objective.prior)).sum())
        .collect();

    let (classifier_hidden, class_log_probs, dis) = if params.is_supervised() {
        let (hidden, logp) = classifier_forward(params, z.view())?;
        let classes = logp.ncols();
        let mut dis = vec![0.0; b];
        for (i, d) in docs.iter().enumerate() {
            if let Some(y) = d.label {
                if y as usize >= classes {
                    return Err(NashError::Contract(format!(
                        "label {y} of document {} outside classifier range {classes}",
                        d.doc_id
                    )));
                }
                dis[i] = -logp[[i, y as usize]];
            }
        }
        (hidden, Some(logp), dis)
    } else {
        (Vec::new(), None, vec![0.0; b])
    };

    for (name, terms) in [
        ("reconstruction loss", &recon),
        ("KL term", &kl),
        ("discriminative loss", &dis),
    ] {
        if terms.iter().any(|v| !v.is_finite()) {
            return Err(NashError::NonFinite(name.into()));
        }
    }

    Ok(ForwardTrace {
        encoder: enc,
        mu: draws.mu.clone(),
        dropout: draws.dropout.clone(),
        z,
        eps: draws.eps.clone(),
        log_var,
        sigma,
        z_noisy,
        decoder_hidden: dec_hidden,
        word_log_probs,
        classifier_hidden,
        class_log_probs,
        recon,
        kl,
        dis,
    })
}

/// Classifier hidden activations and class log-probabilities for codes `z`.
pub(crate) fn classifier_forward(
    params: &NashParams,
    z: ArrayView2<'_, f64>,
) -> Result<(Vec<Array2<f64>>, Array2<f64>)> {
    let n = params.classifier.len();
    if n == 0 {
        return Err(NashError::Contract("model has no classifier head".into()));
    }
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(n - 1);
    for (k, layer) in params.classifier[..n - 1].iter().enumerate() {
        let pre = if k == 0 {
            layer.forward(z)?
        } else {
            layer.forward(hidden[k - 1].view())?
        };
        hidden.push(relu_forward(pre.view()));
    }
    let last_in = hidden.last().map(|a| a.view()).unwrap_or(z);
    let logits = params.classifier[n - 1].forward(last_in)?;
    Ok((hidden, row_log_softmax(logits)))
}

impl ForwardTrace {
    pub fn report(&self, objective: &Objective) -> LossReport {
        let recon: f64 = self.recon.iter().sum();
        let kl: f64 = self.kl.iter().sum();
        let dis: f64 = self.dis.iter().sum();
        LossReport {
            recon,
            kl,
            dis,
            total: objective.recon_weight * recon
                + objective.kl_weight * kl
                + objective.alpha * dis,
            docs: self.recon.len(),
        }
    }
}

/// Gradient of the summed batch loss with respect to the code `z` fed to
/// the decoder/classifier, plus the parameter gradients of everything
/// downstream of `z`. Accumulates into `grads`.
pub(crate) struct CodeGradient {
    /// dL/dz (decoder path through the noise plus classifier path).
    pub dz: Array2<f64>,
    /// dL/d(logits) contributed by the noise head.
    pub dlogits_noise: Array2<f64>,
}

pub(crate) fn backward_to_code(
    params: &NashParams,
    docs: &[&DocumentVector],
    trace: &ForwardTrace,
    objective: &Objective,
    grads: &mut NashParams,
) -> Result<CodeGradient> {
    let (b, l) = trace.z.dim();

    // Softmax decoder: d(recon)/d(word logits) = N p - counts.
    let mut du = trace.word_log_probs.mapv(f64::exp);
    for (i, d) in docs.iter().enumerate() {
        let total = d.total_count();
        let mut row = du.row_mut(i);
        row.mapv_inplace(|p| p * total);
        for &(w, c) in &d.raw_counts {
            row[w as usize] -= c;
        }
    }
    if objective.recon_weight != 1.0 {
        du.mapv_inplace(|v| v * objective.recon_weight);
    }
    let dec_out = trace.decoder_hidden.last().unwrap_or(&trace.z_noisy);
    ndarray::linalg::general_mat_mul(1.0, &dec_out.t(), &du, 1.0, &mut grads.embedding);
    grads.word_bias += &du.sum_axis(Axis(0));
    let mut d = du.dot(&params.embedding.t());
    for k in (0..params.decoder.len()).rev() {
        let g = relu_backward(trace.decoder_hidden[k].view(), d.view());
        let input = if k == 0 {
            trace.z_noisy.view()
        } else {
            trace.decoder_hidden[k - 1].view()
        };
        d = params.decoder[k].backward(input, g.view(), &mut grads.decoder[k])?;
    }
    let dz_noisy = d;

    let mut dlogits_noise = Array2::zeros((b, l));
    if let (NoiseMode::DataDependent, Some(lv)) = (objective.noise, trace.log_var.as_ref()) {
        let head = params.noise_head.as_ref().expect("noise head");
        let grad_head = grads.noise_head.as_mut().expect("noise head gradient");
        let mut dlv = Array2::zeros((b, l));
        Zip::from(&mut dlv)
            .and(&dz_noisy)
            .and(&trace.eps)
            .and(&trace.sigma)
            .and(lv)
            .for_each(|out, &g, &e, &s, &v| {
                let raw = (0.5 * v).exp();
                *out = if raw > SIGMA_MIN && raw < SIGMA_MAX {
                    g * e * s * 0.5
                } else {
                    0.0
                };
            });
        dlogits_noise = head.backward(trace.encoder.logits.view(), dlv.view(), grad_head)?;
    }

    let mut dz = dz_noisy;
    if let Some(logp) = &trace.class_log_probs {
        let mut dy = logp.mapv(f64::exp);
        for (i, doc) in docs.iter().enumerate() {
            match doc.label {
                Some(y) => dy[[i, y as usize]] -= 1.0,
                None => dy.row_mut(i).fill(0.0),
            }
        }
        dy.mapv_inplace(|v| v * objective.alpha);
        let n = params.classifier.len();
        let mut g = dy;
        for k in (0..n).rev() {
            let input = if k == 0 {
                trace.z.view()
            } else {
                trace.classifier_hidden[k - 1].view()
            };
            let d_in = params.classifier[k].backward(input, g.view(), &mut grads.classifier[k])?;
            g = if k == 0 {
                d_in
            } else {
                relu_backward(trace.classifier_hidden[k - 1].view(), d_in.view())
            };
        }
        dz += &g;
    }
    Ok(CodeGradient { dz, dlogits_noise })
}

/// Straight-through step: the gradient reaching `z` is handed to the bit
/// probabilities unchanged, the KL gradient is added, and the sum is pulled
/// back through the sigmoid. Returns dL/d(encoder logits) excluding the
/// noise-head contribution.
pub(crate) fn straight_through(
    dz: &Array2<f64>,
    probs: &Array2<f64>,
    objective: &Objective,
) -> Array2<f64> {
    let mut dh = dz.clone();
    if objective.kl_weight != 0.0 {
        Zip::from(&mut dh).and(probs).for_each(|g, &p| {
            *g += objective.kl_weight * kl_bit_grad(p, objective.prior);
        });
    }
    sigmoid_backward(probs.view(), dh.view())
}

/// Backpropagates dL/d(logits) through the encoder, accumulating into
/// `grads`.
pub(crate) fn encoder_backward(
    params: &NashParams,
    docs: &[&DocumentVector],
    enc: &EncoderTrace,
    dropout: Option<&Array2<f64>>,
    dlogits: &Array2<f64>,
    grads: &mut NashParams,
) -> Result<()> {
    let rows = sparse_rows(docs);
    let n = params.encoder.len();
    if n == 0 {
        params
            .logits
            .backward_sparse(&rows, dlogits.view(), &mut grads.logits);
        return Ok(());
    }
    let dropped = enc.dropped.as_ref().expect("dropped activations");
    let mut d = params
        .logits
        .backward(dropped.view(), dlogits.view(), &mut grads.logits)?;
    if let Some(mask) = dropout {
        d *= mask;
    }
    for k in (0..n).rev() {
        let g = relu_backward(enc.hidden[k].view(), d.view());
        if k == 0 {
            params.encoder[0].backward_sparse(&rows, g.view(), &mut grads.encoder[0]);
        } else {
            d = params.encoder[k].backward(
                enc.hidden[k - 1].view(),
                g.view(),
                &mut grads.encoder[k],
            )?;
        }
    }
    Ok(())
}

/// Accumulates the gradient of the summed batch loss into `grads`.
pub fn backward(
    params: &NashParams,
    docs: &[&DocumentVector],
    trace: &ForwardTrace,
    objective: &Objective,
    grads: &mut NashParams,
) -> Result<()> {
    let code = backward_to_code(params, docs, trace, objective, grads)?;
    let mut dlogits = straight_through(&code.dz, &trace.encoder.probs, objective);
    dlogits += &code.dlogits_noise;
    encoder_backward(
        params,
        docs,
        &trace.encoder,
        trace.dropout.as_ref(),
        &dlogits,
        grads,
    )
}

/// Loss and gradients (summed over the batch) for one Monte-Carlo sample.
pub fn loss_and_grads(
    params: &NashParams,
    docs: &[&DocumentVector],
    draws: &Draws,
    objective: &Objective,
) -> Result<(LossReport, NashParams)> {
    let trace = forward(params, docs, draws, objective)?;
    let mut grads = params.zeros_like();
    backward(params, docs, &trace, objective, &mut grads)?;
    if let Some(name) = grads.first_non_finite() {
        return Err(NashError::NonFinite(format!("gradient of {name}")));
    }
    Ok((trace.report(objective), grads))
}

/// Summed loss for fixed draws; the function finite differences probe.
pub fn batch_loss(
    params: &NashParams,
    docs: &[&DocumentVector],
    draws: &Draws,
    objective: &Objective,
) -> Result<f64> {
    Ok(forward(params, docs, draws, objective)?
        .report(objective)
        .total)
}

/// Deterministic bit probabilities (no dropout) for a batch.
pub fn encode_probs_batch(params: &NashParams, docs: &[&DocumentVector]) -> Result<Array2<f64>> {
    Ok(encode(params, docs, None)?.probs)
}

pub(crate) fn row_to_vec(row: ndarray::ArrayView1<'_, f64>) -> Vec<f64> {
    row.iter().copied().collect()
}
