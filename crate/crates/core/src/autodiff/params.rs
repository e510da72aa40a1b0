use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub group: usize,
    pub value: Tensor<T>,
}

/// Named set of trainable leaves that is frozen or unfrozen as a unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub params: Vec<ParamId>,
    pub frozen: bool,
}

/// Owner of every trainable weight. Each parameter belongs to exactly one group.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    groups: Vec<ParamGroup>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new(), groups: Vec::new() }
    }

    pub fn add_group(&mut self, name: &str) -> usize {
        if let Some(i) = self.groups.iter().position(|g| g.name == name) {
            return i;
        }
        self.groups.push(ParamGroup { name: name.to_string(), params: Vec::new(), frozen: false });
        self.groups.len() - 1
    }

    pub fn add(&mut self, group: &str, name: &str, value: Tensor<T>) -> ParamId {
        let g = self.add_group(group);
        let id = ParamId(self.params.len());
        self.params.push(Param { name: name.to_string(), group: g, value });
        self.groups[g].params.push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    #[inline]
    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.groups[self.params[id.0].group].frozen
    }

    pub fn group_name(&self, id: ParamId) -> &str {
        &self.groups[self.params[id.0].group].name
    }

    pub fn set_frozen(&mut self, group: &str, frozen: bool) -> Result<()> {
        let g = self
            .groups
            .iter_mut()
            .find(|g| g.name == group)
            .ok_or_else(|| Error::Contract(format!("no parameter group named `{group}`")))?;
        g.frozen = frozen;
        Ok(())
    }

    pub fn unfreeze_all(&mut self) {
        self.groups.iter_mut().for_each(|g| g.frozen = false);
    }

    /// Flattened copy of one group's weights, in parameter order.
    pub fn group_snapshot(&self, group: &str) -> Vec<T> {
        self.group(group)
            .map(|g| g.params.iter().flat_map(|&id| self.value(id).data().iter().copied()).collect())
            .unwrap_or_default()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.all_finite())
    }
}

/// Gradient accumulator aligned with a [`ParamStore`]. Zeroed explicitly by the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    grads: Vec<Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn for_store(store: &ParamStore<T>) -> Self {
        Self {
            grads: store.params.iter().map(|p| Tensor::zeros(p.value.rows(), p.value.cols())).collect(),
        }
    }

    pub fn zero(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(T::zero()));
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.grads[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.grads[id.0]
    }

    pub fn scale(&mut self, s: T) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor<T>)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }

    /// Elementwise `self += other`; both must come from the same store.
    pub fn add_from(&mut self, other: &Self) {
        for (g, o) in self.grads.iter_mut().zip(&other.grads) {
            g.add_assign(o);
        }
    }
}
