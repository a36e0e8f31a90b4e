use crate::error::{Error, Result};

use super::tensor::{Scalar, Tensor, TensorSpec};

/// Named weights and biases of one network, in creation order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Default for ParameterSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParameterSet<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Shape(format!("duplicate parameter `{name}`")));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensor(&self, index: usize) -> &Tensor<T> {
        &self.entries[index].1
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Tensor<T> {
        &mut self.entries[index].1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn specs(&self) -> Vec<(String, TensorSpec)> {
        self.entries
            .iter()
            .map(|(n, t)| {
                (
                    n.clone(),
                    TensorSpec {
                        shape: t.shape().to_vec(),
                    },
                )
            })
            .collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.all_finite())
    }

    pub fn check_same_layout(&self, other: &Self) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::Shape(format!(
                "parameter sets differ in size: {} vs {}",
                self.entries.len(),
                other.entries.len()
            )));
        }
        for ((na, ta), (nb, tb)) in self.entries.iter().zip(&other.entries) {
            if na != nb || ta.shape() != tb.shape() {
                return Err(Error::Shape(format!(
                    "`{na}` {:?} does not match `{nb}` {:?}",
                    ta.shape(),
                    tb.shape()
                )));
            }
        }
        Ok(())
    }

    /// `self += scale · other`, element-wise.
    pub fn add_scaled(&mut self, other: &Self, scale: T) -> Result<()> {
        self.check_same_layout(other)?;
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x = *x + scale * y;
            }
        }
        Ok(())
    }

    /// Exponential moving average toward `online`: `self = decay·self + (1−decay)·online`.
    pub fn ema_toward(&mut self, online: &Self, decay: T) -> Result<()> {
        self.check_same_layout(online)?;
        let keep = T::one() - decay;
        for ((_, t), (_, o)) in self.entries.iter_mut().zip(&online.entries) {
            for (x, &y) in t.data_mut().iter_mut().zip(o.data()) {
                *x = decay * *x + keep * y;
            }
        }
        Ok(())
    }

    /// Copy with every name prefixed by `prefix`.
    pub fn prefixed(&self, prefix: &str) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (format!("{prefix}{n}"), t.clone()))
                .collect(),
        }
    }

    /// Entries whose name starts with `prefix`, with the prefix removed.
    pub fn strip_prefix(&self, prefix: &str) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter_map(|(n, t)| n.strip_prefix(prefix).map(|s| (s.to_string(), t.clone())))
                .collect(),
        }
    }

    pub fn extend(&mut self, other: Self) -> Result<()> {
        for (n, t) in other.entries {
            self.insert(n, t)?;
        }
        Ok(())
    }
}
