//! Ordered name->tensor registry of trainable parameters. The optimizer,
//! gradient checker, and checkpoint code all address parameters through it.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::numcore::Tensor;

#[derive(Default)]
pub struct ParamRegistry {
    entries: Vec<(String, Tensor)>,
}

impl ParamRegistry {
    pub fn new() -> ParamRegistry {
        ParamRegistry::default()
    }

    /// Register a trainable tensor under a unique name. Rejects duplicate
    /// names, duplicate storage, and tensors without gradient storage.
    pub fn register(&mut self, name: impl Into<String>, tensor: &Tensor) -> Result<()> {
        let name = name.into();
        if !tensor.requires_grad() {
            return Err(Error::Contract(format!(
                "parameter '{name}' does not carry gradient storage"
            )));
        }
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::Contract(format!(
                "parameter '{name}' registered twice"
            )));
        }
        if self
            .entries
            .iter()
            .any(|(_, t)| t.same_storage(tensor))
        {
            return Err(Error::Contract(format!(
                "tensor behind '{name}' is already registered under another name"
            )));
        }
        self.entries.push((name, tensor.clone()));
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, Tensor)> {
        self.entries.iter()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    /// Number of registered tensors.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar parameter count.
    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grads(&self) {
        for (_, t) in &self.entries {
            t.zero_grad();
        }
    }

    /// Copy of every parameter's data, in registry order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|(_, t)| t.to_vec()).collect()
    }

    /// Write a snapshot back into the parameters.
    pub fn restore(&self, snapshot: &[Vec<f64>]) -> Result<()> {
        if snapshot.len() != self.entries.len() {
            return Err(Error::Contract(format!(
                "snapshot holds {} tensors, registry has {}",
                snapshot.len(),
                self.entries.len()
            )));
        }
        for ((_, t), data) in self.entries.iter().zip(snapshot) {
            t.set_data(data.clone())?;
        }
        Ok(())
    }

    /// Every registered name, for diagnostics.
    pub fn names(&self) -> HashSet<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }
}
