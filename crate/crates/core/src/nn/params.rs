use crate::error::{NashError, Result};

/// Borrowed view of one named parameter array.
#[derive(Debug)]
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

#[derive(Debug)]
pub struct TensorMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

/// A collection of named, contiguous f64 arrays. Gradients use the same type
/// as the parameters they belong to, so both sides enumerate identically.
pub trait ParamSet {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.data.fill(value);
        }
    }

    /// `self += other`, element by element in declaration order.
    fn add_assign(&mut self, other: &Self) {
        let src = other.tensors();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            debug_assert_eq!(dst.shape, src.shape);
            for (d, s) in dst.data.iter_mut().zip(src.data) {
                *d += s;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t.data.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name)
    }

    fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(name) => Err(NashError::NonFinite(name)),
            None => Ok(()),
        }
    }
}

/// Owned list of named arrays; the generic [`ParamSet`] for toy problems and
/// checkpoint payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorList {
    pub entries: Vec<OwnedTensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwnedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorList {
    pub fn new() -> Self {
        TensorList {
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.push(OwnedTensor {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn with(mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        self.push(name, shape, data);
        self
    }

    pub fn get(&self, name: &str) -> Option<&OwnedTensor> {
        self.entries.iter().find(|t| t.name == name)
    }

    pub fn zeros_like(&self) -> Self {
        TensorList {
            entries: self
                .entries
                .iter()
                .map(|t| OwnedTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![0.0; t.data.len()],
                })
                .collect(),
        }
    }

    pub fn from_params<P: ParamSet + ?Sized>(params: &P) -> Self {
        let mut out = TensorList::new();
        for t in params.tensors() {
            out.push(t.name, t.shape, t.data.to_vec());
        }
        out
    }
}

impl Default for TensorList {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamSet for TensorList {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        self.entries
            .iter()
            .map(|t| TensorRef {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data: &t.data,
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        self.entries
            .iter_mut()
            .map(|t| TensorMut {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data: &mut t.data,
            })
            .collect()
    }
}

/// Copies every array of `src` into the same-named array of `dst`.
pub fn copy_params<P: ParamSet + ?Sized, Q: ParamSet + ?Sized>(dst: &mut P, src: &Q) -> Result<()> {
    let src = src.tensors();
    for d in dst.tensors_mut() {
        let s = src
            .iter()
            .find(|s| s.name == d.name)
            .ok_or_else(|| NashError::Mismatch(format!("missing array `{}`", d.name)))?;
        if s.shape != d.shape {
            return Err(NashError::Mismatch(format!(
                "array `{}` has shape {:?}, expected {:?}",
                d.name, s.shape, d.shape
            )));
        }
        d.data.copy_from_slice(s.data);
    }
    Ok(())
}
