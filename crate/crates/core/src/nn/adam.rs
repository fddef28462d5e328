use super::params::{OwnedTensor, ParamSet, TensorList};
use crate::error::{NashError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: ParamSet + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let sizes: Vec<usize> = params.tensors().iter().map(|t| t.data.len()).collect();
        AdamState {
            config,
            step: 0,
            first_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One bias-corrected Adam update with learning rate `lr` (the schedule
    /// lives with the caller). Nothing is modified if any gradient is
    /// non-finite.
    pub fn step<P: ParamSet + ?Sized>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<()> {
        let grads = grads.tensors();
        if grads.len() != self.first_moment.len() {
            return Err(NashError::shape(
                "adam_step",
                self.first_moment.len(),
                grads.len(),
            ));
        }
        for (g, m) in grads.iter().zip(&self.first_moment) {
            if g.data.len() != m.len() {
                return Err(NashError::shape("adam_step", m.len(), g.data.len()));
            }
            if g.data.iter().any(|v| !v.is_finite()) {
                return Err(NashError::NonFinite(format!("gradient of {}", g.name)));
            }
        }

        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(&grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.data[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }

    /// Moments as named arrays (`adam.m.<name>`, `adam.v.<name>`).
    pub fn to_tensors<P: ParamSet + ?Sized>(&self, params: &P) -> TensorList {
        let mut out = TensorList::new();
        for ((t, m), v) in params
            .tensors()
            .iter()
            .zip(&self.first_moment)
            .zip(&self.second_moment)
        {
            out.push(format!("adam.m.{}", t.name), t.shape.clone(), m.clone());
            out.push(format!("adam.v.{}", t.name), t.shape.clone(), v.clone());
        }
        out
    }

    pub fn from_tensors<P: ParamSet + ?Sized>(
        config: AdamConfig,
        step: u64,
        params: &P,
        arrays: &[OwnedTensor],
    ) -> Result<Self> {
        let mut state = AdamState::new(config, params);
        state.step = step;
        for (i, t) in params.tensors().iter().enumerate() {
            for (prefix, dst) in [
                ("adam.m.", &mut state.first_moment[i]),
                ("adam.v.", &mut state.second_moment[i]),
            ] {
                let name = format!("{prefix}{}", t.name);
                let src = arrays
                    .iter()
                    .find(|a| a.name == name)
                    .ok_or_else(|| NashError::Mismatch(format!("missing array `{name}`")))?;
                if src.data.len() != dst.len() {
                    return Err(NashError::Mismatch(format!(
                        "array `{name}` has wrong size"
                    )));
                }
                dst.copy_from_slice(&src.data);
            }
        }
        Ok(state)
    }
}
