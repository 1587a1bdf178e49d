use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::tensor::{Element, Tensor, TensorError};

/// Ordered, named parameter tensors of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T: Element = f32> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Element> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }
}

impl<T: Element> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> usize {
        self.names.push(name.into());
        self.tensors.push(value);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.tensors[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Registers every parameter as a leaf on `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape<T>) -> Vec<Var<'t, T>> {
        self.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
    }

    pub fn cast<U: Element>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    /// Replaces values by name; shapes and the name set must match exactly.
    pub fn load_from(&mut self, named: &[(String, Tensor<T>)]) -> Result<(), TensorError> {
        if named.len() != self.tensors.len() {
            return Err(TensorError::Contract(format!(
                "expected {} parameter tensors, found {}",
                self.tensors.len(),
                named.len()
            )));
        }
        for (name, value) in named {
            let i = self.index_of(name).ok_or_else(|| {
                TensorError::Contract(format!("unknown parameter `{name}`"))
            })?;
            if self.tensors[i].shape() != value.shape() {
                return Err(crate::tensor::shape_err(
                    "load parameter",
                    self.tensors[i].shape(),
                    value.shape(),
                ));
            }
            self.tensors[i] = value.clone();
        }
        Ok(())
    }

    /// `self ← decay·self + (1−decay)·other`, elementwise.
    pub fn ema_update(&mut self, other: &ParamStore<T>, decay: f64) {
        let d = T::lit(decay);
        let one_minus = T::lit(1.0 - decay);
        for (mine, theirs) in self.tensors.iter_mut().zip(&other.tensors) {
            for (a, &b) in mine.data_mut().iter_mut().zip(theirs.data()) {
                *a = d * *a + one_minus * b;
            }
        }
    }
}

/// Fully connected layer with runtime weight scaling (equalized learning rate).
#[derive(Debug, Clone)]
pub(crate) struct EqDense {
    pub weight: usize,
    pub bias: usize,
    pub weight_mul: f64,
    pub bias_mul: f64,
}

impl EqDense {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Element, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        gain: f64,
        lr_mul: f64,
        bias_init: f64,
        rng: &mut R,
    ) -> Self {
        let init_std = 1.0 / lr_mul;
        let w = Tensor::<T>::randn(&[fan_in, fan_out], rng).map(|v| v * T::lit(init_std));
        let weight = store.add(format!("{name}.weight"), w);
        let bias = store.add(
            format!("{name}.bias"),
            Tensor::full(&[fan_out], T::lit(bias_init / lr_mul)),
        );
        EqDense {
            weight,
            bias,
            weight_mul: gain / (fan_in as f64).sqrt() * lr_mul,
            bias_mul: lr_mul,
        }
    }

    pub fn forward<'t, T: Element>(
        &self,
        p: &[Var<'t, T>],
        x: Var<'t, T>,
    ) -> Result<Var<'t, T>, TensorError> {
        x.dense(p[self.weight].scale(self.weight_mul), p[self.bias].scale(self.bias_mul))
    }
}

/// Convolution with runtime weight scaling.
#[derive(Debug, Clone)]
pub(crate) struct EqConv {
    pub weight: usize,
    pub bias: usize,
    pub weight_mul: f64,
}

impl EqConv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Element, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        ks: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::<T>::randn(&[out_ch, in_ch, ks, ks], rng),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_ch]));
        EqConv {
            weight,
            bias,
            weight_mul: gain / ((in_ch * ks * ks) as f64).sqrt(),
        }
    }

    pub fn forward<'t, T: Element>(
        &self,
        p: &[Var<'t, T>],
        x: Var<'t, T>,
    ) -> Result<Var<'t, T>, TensorError> {
        x.conv2d_bias(p[self.weight].scale(self.weight_mul), p[self.bias])
    }
}
