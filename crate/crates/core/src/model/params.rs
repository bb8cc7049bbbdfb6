use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
}

/// Ordered named tensors. Gradients and optimizer moments share the layout of
/// the parameters they belong to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<Param>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, value: Matrix) {
        self.entries.push(Param {
            name: name.into(),
            value,
        });
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Param] {
        &mut self.entries
    }

    /// Number of tensors.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    /// Total scalar count.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|p| p.value.as_slice().len()).sum()
    }

    /// Same names, new tensors (in order).
    pub(crate) fn with_values(&self, values: Vec<Matrix>) -> ParamSet {
        debug_assert_eq!(values.len(), self.entries.len());
        ParamSet {
            entries: self
                .entries
                .iter()
                .zip(values)
                .map(|(p, value)| Param {
                    name: p.name.clone(),
                    value,
                })
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> ParamSet {
        self.with_values(
            self.entries
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect(),
        )
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.value.shape() == b.value.shape())
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &ParamSet) -> Result<()> {
        if !self.same_layout(other) {
            return Err(contract!("parameter layouts differ"));
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.value.axpy(scale, &b.value)?;
        }
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for p in &self.entries {
            out.extend_from_slice(p.value.as_slice());
        }
        out
    }

    /// Overwrites every scalar from a flat slice in [`ParamSet::flatten`] order.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(contract!(
                "flat parameter length {} does not equal {}",
                flat.len(),
                self.num_scalars()
            ));
        }
        let mut offset = 0;
        for p in &mut self.entries {
            let dst = p.value.as_mut_slice();
            dst.copy_from_slice(&flat[offset..offset + dst.len()]);
            offset += dst.len();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|p| p.value.is_finite())
    }
}
