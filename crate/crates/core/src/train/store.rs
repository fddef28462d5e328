//! Model and training-state checkpoints.

use crate::error::{NashError, Result};
use crate::model::{Architecture, NashParams};
use crate::nn::params::copy_params;
use crate::nn::{Checkpoint, TensorList};
use crate::train::config::TrainConfig;

pub const KIND_MODEL: &str = "model";
pub const KIND_STATE: &str = "train-state";

fn widths(w: &[usize]) -> String {
    w.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_widths(s: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| {
            w.parse()
                .map_err(|_| NashError::Mismatch(format!("bad layer width `{w}`")))
        })
        .collect()
}

pub(crate) fn arch_meta(arch: &Architecture) -> Vec<(String, String)> {
    vec![
        ("arch.vocab_size".into(), arch.vocab_size.to_string()),
        ("arch.bits".into(), arch.bits.to_string()),
        ("arch.encoder_hidden".into(), widths(&arch.encoder_hidden)),
        ("arch.decoder_hidden".into(), widths(&arch.decoder_hidden)),
        (
            "arch.classifier_hidden".into(),
            widths(&arch.classifier_hidden),
        ),
        (
            "arch.num_classes".into(),
            arch.num_classes
                .map_or_else(|| "none".into(), |c| c.to_string()),
        ),
        ("arch.noise_head".into(), arch.noise_head.to_string()),
    ]
}

fn required<'a>(ckpt: &'a Checkpoint, key: &str) -> Result<&'a str> {
    ckpt.meta_value(key)
        .ok_or_else(|| NashError::Mismatch(format!("checkpoint lacks `{key}`")))
}

fn parse_meta<T: std::str::FromStr>(ckpt: &Checkpoint, key: &str) -> Result<T> {
    let v = required(ckpt, key)?;
    v.parse()
        .map_err(|_| NashError::Mismatch(format!("checkpoint field `{key}` has bad value `{v}`")))
}

pub(crate) fn arch_from_meta(ckpt: &Checkpoint) -> Result<Architecture> {
    let classes = required(ckpt, "arch.num_classes")?;
    let arch = Architecture {
        vocab_size: parse_meta(ckpt, "arch.vocab_size")?,
        bits: parse_meta(ckpt, "arch.bits")?,
        encoder_hidden: parse_widths(required(ckpt, "arch.encoder_hidden")?)?,
        decoder_hidden: parse_widths(required(ckpt, "arch.decoder_hidden")?)?,
        classifier_hidden: parse_widths(required(ckpt, "arch.classifier_hidden")?)?,
        num_classes: if classes == "none" {
            None
        } else {
            Some(parse_meta(ckpt, "arch.num_classes")?)
        },
        noise_head: parse_meta(ckpt, "arch.noise_head")?,
    };
    arch.validate()
        .map_err(|e| NashError::Mismatch(e.to_string()))?;
    Ok(arch)
}

/// Parameters under an optional name prefix.
pub(crate) fn params_from_arrays(
    arch: &Architecture,
    arrays: &TensorList,
    prefix: &str,
) -> Result<NashParams> {
    let mut p = NashParams::zeros(arch);
    if prefix.is_empty() {
        copy_params(&mut p, arrays)?;
    } else {
        let mut sub = TensorList::new();
        for t in &arrays.entries {
            if let Some(name) = t.name.strip_prefix(prefix) {
                sub.push(name, t.shape.clone(), t.data.clone());
            }
        }
        copy_params(&mut p, &sub)?;
    }
    Ok(p)
}

/// A trained model with the configuration that produced it.
pub fn model_checkpoint(params: &NashParams, config: &TrainConfig) -> Checkpoint {
    let mut meta = vec![
        ("kind".to_string(), KIND_MODEL.to_string()),
        ("config".to_string(), config.format()),
    ];
    meta.extend(arch_meta(&params.arch));
    Checkpoint {
        meta,
        arrays: TensorList::from_params(params),
    }
}

/// Model parameters and configuration from a model or training-state
/// checkpoint (the latter yields its best parameters).
pub fn load_model(ckpt: &Checkpoint) -> Result<(NashParams, TrainConfig)> {
    let config = TrainConfig::parse(required(ckpt, "config")?, "checkpoint config")
        .map_err(|e| NashError::Mismatch(format!("checkpoint config: {e}")))?;
    let arch = arch_from_meta(ckpt)?;
    if arch.bits != config.bits {
        return Err(NashError::Mismatch(format!(
            "checkpoint code length {} disagrees with its config ({})",
            arch.bits, config.bits
        )));
    }
    let prefix = match required(ckpt, "kind")? {
        KIND_MODEL => "",
        KIND_STATE => "best.",
        other => {
            return Err(NashError::Mismatch(format!(
                "unknown checkpoint kind `{other}`"
            )))
        }
    };
    Ok((params_from_arrays(&arch, &ckpt.arrays, prefix)?, config))
}
