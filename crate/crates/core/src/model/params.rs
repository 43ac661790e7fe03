use std::collections::HashMap;

use ndarray::Array2;

use super::scalar::Scalar;

pub type ParamId = usize;

/// Named 2-D tensors in registration order. Gradients use the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<F> {
    names: Vec<String>,
    tensors: Vec<Array2<F>>,
    index: HashMap<String, ParamId>,
}

impl<F: Scalar> Params<F> {
    pub fn new() -> Self {
        Params {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub(crate) fn add(&mut self, name: String, t: Array2<F>) -> ParamId {
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = self.tensors.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(t.as_standard_layout().into_owned());
        id
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Array2<F> {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<F> {
        &mut self.tensors[id]
    }

    pub fn by_name(&self, name: &str) -> Option<&Array2<F>> {
        self.id(name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<F>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Array2<F>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Array2<F>] {
        &mut self.tensors
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect(),
            index: self.index.clone(),
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.iter())
            .map(|&x| x.as_f64() * x.as_f64())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&mut self, s: F) {
        for t in &mut self.tensors {
            t.mapv_inplace(|x| x * s);
        }
    }

    pub fn cast<G: Scalar>(&self) -> Params<G> {
        Params {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| t.mapv(|x| G::of(x.as_f64())))
                .collect(),
            index: self.index.clone(),
        }
    }
}

impl<F: Scalar> Default for Params<F> {
    fn default() -> Self {
        Self::new()
    }
}
