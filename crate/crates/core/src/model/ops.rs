//! Single-document model operations.

use ndarray::{Array1, Array2};

use super::code::{binarize_deterministic, HashCode};
use super::forward::{
    self, check_prior, classifier_forward, EncoderTrace, NoiseMode, SIGMA_MAX, SIGMA_MIN,
};
use super::params::NashParams;
use crate::corpus::DocumentVector;
use crate::error::{NashError, Result};
use crate::nn::activation::log_sum_exp;
use crate::nn::dropout::{check_rate, dropout_mask};
use crate::nn::Rng;

/// Bit probabilities `h = sigmoid(g(x))` for one document. In training mode
/// dropout with `dropout_rate` is applied to the last hidden layer.
pub fn encode_probs(
    params: &NashParams,
    doc: &DocumentVector,
    rng: &mut Rng,
    training: bool,
    dropout_rate: f64,
) -> Result<(Vec<f64>, EncoderTrace)> {
    if !doc.entries.iter().any(|&(_, w)| w > 0.0) {
        return Err(NashError::Contract(format!(
            "document {} has no nonzero feature",
            doc.doc_id
        )));
    }
    check_rate(dropout_rate)?;
    let mask = match params.arch.encoder_hidden.last() {
        Some(&width) if training && dropout_rate > 0.0 => {
            let m = dropout_mask(width, dropout_rate, rng);
            Some(m.insert_axis(ndarray::Axis(0)))
        }
        _ => None,
    };
    let trace = forward::encode(params, &[doc], mask.as_ref())?;
    let h = forward::row_to_vec(trace.probs.row(0));
    Ok((h, trace))
}

/// Deterministic code of one document (inference mode).
pub fn encode_code(params: &NashParams, doc: &DocumentVector) -> Result<HashCode> {
    let trace = forward::encode(params, &[doc], None)?;
    binarize_deterministic(trace.probs.row(0).as_slice().expect("contiguous row"))
}

/// Closed-form `KL(Bernoulli(h) || Bernoulli(prior))`, summed over bits.
pub fn kl_bernoulli(h: &[f64], prior: &[f64]) -> Result<f64> {
    if h.len() != prior.len() {
        return Err(NashError::shape("kl_bernoulli", h.len(), prior.len()));
    }
    let mut total = 0.0;
    for (&p, &g) in h.iter().zip(prior) {
        check_prior(g)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(NashError::Contract(format!(
                "probability {p} outside (0, 1)"
            )));
        }
        total += p * (p / g).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - g)).ln();
    }
    Ok(total)
}

/// Perturbs a binary code for the decoder: `z' = z + sigma * eps`.
/// `logits` are the encoder logits of the same document (used by the
/// data-dependent head). Returns `z'` and the per-bit sigma.
pub fn inject_noise(
    z: &HashCode,
    params: &NashParams,
    logits: &[f64],
    rng: &mut Rng,
    mode: NoiseMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = z.len();
    let zf = z.to_f64();
    let sigma: Vec<f64> = match mode {
        NoiseMode::None => return Ok((zf, vec![0.0; l])),
        NoiseMode::Fixed { sigma } => vec![sigma; l],
        NoiseMode::DataDependent => {
            let head = params.noise_head.as_ref().ok_or_else(|| {
                NashError::Config("data-dependent noise requires a noise head".into())
            })?;
            if logits.len() != l {
                return Err(NashError::shape("inject_noise logits", l, logits.len()));
            }
            let input = Array2::from_shape_vec((1, l), logits.to_vec()).expect("shape");
            let lv = head.forward(input.view())?;
            lv.iter()
                .map(|&v| (0.5 * v).exp().clamp(SIGMA_MIN, SIGMA_MAX))
                .collect()
        }
    };
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(NashError::NonFinite("noise sigma".into()));
    }
    let noisy = zf
        .iter()
        .zip(&sigma)
        .map(|(&zi, &s)| zi + s * rng.normal())
        .collect();
    Ok((noisy, sigma))
}

/// Word logits `u = dec(z')ᵀE + b` for one (possibly noisy) code.
fn word_logits(params: &NashParams, z: &[f64]) -> Result<Array1<f64>> {
    if z.len() != params.bits() {
        return Err(NashError::shape("decoder input", params.bits(), z.len()));
    }
    let input = Array2::from_shape_vec((1, z.len()), z.to_vec()).expect("shape");
    let hidden = forward::decoder_hidden(params, input.view())?;
    let out = hidden.last().unwrap_or(&input);
    let mut u = out.row(0).dot(&params.embedding);
    u += &params.word_bias;
    Ok(u)
}

/// `log q(x | z') = Σ_w count(w) · log softmax(u)_w`.
pub fn decode_logprob(params: &NashParams, z_noisy: &[f64], doc: &DocumentVector) -> Result<f64> {
    let u = word_logits(params, z_noisy)?;
    let u = u.as_slice().expect("contiguous");
    let lse = log_sum_exp(u);
    Ok(doc
        .raw_counts
        .iter()
        .map(|&(w, c)| c * (u[w as usize] - lse))
        .sum())
}

/// `log p(y | z)` under the classifier head.
pub fn classify_logprob(params: &NashParams, z: &HashCode, label: u32) -> Result<f64> {
    if !params.is_supervised() {
        return Err(NashError::Contract(
            "classify_logprob on an unsupervised model".into(),
        ));
    }
    if z.len() != params.bits() {
        return Err(NashError::shape("classifier input", params.bits(), z.len()));
    }
    let input = Array2::from_shape_vec((1, z.len()), z.to_f64()).expect("shape");
    let (_, logp) = classifier_forward(params, input.view())?;
    logp.get((0, label as usize)).copied().ok_or_else(|| {
        NashError::Contract(format!(
            "label {label} outside classifier range {}",
            logp.ncols()
        ))
    })
}

/// Rate (bits) and distortion diagnostics for one document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDistortion {
    /// `-Σ log2 q(z_i | x)` at the code actually used.
    pub rate: f64,
    pub distortion: f64,
}

/// `rate = -Σ_i log2(h_i^{z_i} (1-h_i)^{1-z_i})` for the given code and
/// `distortion = ||x̃ - Eᵀz||²` with `x̃` the normalized feature row (the
/// decoder hidden layers, if any, are applied to `z` first).
pub fn rate_distortion_report(
    h: &[f64],
    z: &HashCode,
    params: &NashParams,
    doc: &DocumentVector,
) -> Result<RateDistortion> {
    if h.len() != z.len() {
        return Err(NashError::shape("rate_distortion_report", h.len(), z.len()));
    }
    let rate = h
        .iter()
        .enumerate()
        .map(|(i, &p)| -(if z.get(i) { p } else { 1.0 - p }).log2())
        .sum();
    let zf = z.to_f64();
    let input = Array2::from_shape_vec((1, zf.len()), zf).expect("shape");
    let hidden = forward::decoder_hidden(params, input.view())?;
    let out = hidden.last().unwrap_or(&input);
    let mut recon = out.row(0).dot(&params.embedding);
    let norm = doc.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
    for &(t, w) in &doc.entries {
        recon[t as usize] -= if norm > 0.0 { w / norm } else { 0.0 };
    }
    let distortion = recon.iter().map(|v| v * v).sum();
    Ok(RateDistortion { rate, distortion })
}

/// Rate at the most likely code (`z_i = [h_i > 0.5]`). Never exceeds the
/// code length.
pub fn map_rate(h: &[f64]) -> f64 {
    h.iter().map(|&p| -p.max(1.0 - p).log2()).sum()
}
