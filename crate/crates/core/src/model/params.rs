//! Named parameter storage.
//!
//! Parameters live outside any autodiff graph; each forward pass binds
//! them as fresh leaves in construction order, so optimizer state and
//! checkpoints can address parameters by stable index or name.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Elem;

/// One trainable array.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub data: Vec<Elem>,
    pub shape: Vec<usize>,
}

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Append-only parameter arena with deterministic ordering.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, data: Vec<Elem>, shape: Vec<usize>) -> ParamId {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        self.params.push(Param { name: name.into(), data, shape });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar count across all parameters.
    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn set_by_name(&mut self, name: &str, data: Vec<Elem>) -> Result<()> {
        let param = self
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Contract(format!("no parameter named {name:?}")))?;
        if data.len() != param.data.len() {
            return Err(Error::Contract(format!(
                "parameter {name:?} expects {} values, got {}",
                param.data.len(),
                data.len()
            )));
        }
        param.data = data;
        Ok(())
    }
}

/// Xavier/Glorot uniform init over [-a, a] with a = sqrt(6/(fan_in+fan_out)).
pub fn xavier_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Elem> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols)
        .map(|_| rng.gen_range(-a..a) as Elem)
        .collect()
}
