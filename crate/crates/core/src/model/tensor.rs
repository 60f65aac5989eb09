use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape("matrix", &[rows, cols], &[data.len()]));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::shape(format!("matrix row {i}"), &[cols], &[row.len()]));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Keeps the first `cols` columns.
    pub fn take_cols(&self, cols: usize) -> Matrix {
        let cols = cols.min(self.cols);
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[..cols]);
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            if m.cols != cols {
                return Err(Error::shape("vstack", &[cols], &[m.cols]));
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Matrix { rows, cols, data })
    }
}

/// One named parameter tensor, flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl LayerTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || expected != values.len() {
            return Err(Error::shape(
                format!("layer {name}"),
                &shape,
                &[values.len()],
            ));
        }
        Ok(LayerTensor {
            name,
            shape,
            values,
        })
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        LayerTensor {
            name: name.into(),
            shape,
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_compatible(&self, other: &LayerTensor) -> Result<()> {
        if self.name != other.name {
            return Err(Error::LayerMismatch(format!(
                "layer {} paired with {}",
                self.name, other.name
            )));
        }
        if self.shape != other.shape {
            return Err(Error::shape(
                format!("layer {}", self.name),
                &self.shape,
                &other.shape,
            ));
        }
        Ok(())
    }
}

/// Ordered layers of a model, each flagged as common (federated) or
/// personalized (kept local to the client that owns it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    layers: Vec<LayerTensor>,
    common: Vec<bool>,
}

impl ModelParams {
    pub fn new(layers: Vec<LayerTensor>, common: Vec<bool>) -> Result<Self> {
        if layers.len() != common.len() {
            return Err(Error::shape("common mask", &[layers.len()], &[common.len()]));
        }
        let mut seen = HashSet::new();
        for layer in &layers {
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::LayerMismatch(format!(
                    "duplicate layer name {}",
                    layer.name
                )));
            }
        }
        Ok(ModelParams { layers, common })
    }

    /// All layers marked common.
    pub fn all_common(layers: Vec<LayerTensor>) -> Result<Self> {
        let common = vec![true; layers.len()];
        Self::new(layers, common)
    }

    pub fn layers(&self) -> &[LayerTensor] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerTensor] {
        &mut self.layers
    }

    pub fn common_mask(&self) -> &[bool] {
        &self.common
    }

    pub fn is_common(&self, index: usize) -> bool {
        self.common[index]
    }

    pub fn layer(&self, name: &str) -> Option<&LayerTensor> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn set_common(&mut self, name: &str, common: bool) -> Result<()> {
        let idx = self
            .layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::LayerMismatch(format!("no layer named {name}")))?;
        self.common[idx] = common;
        Ok(())
    }

    pub fn common_layers(&self) -> impl Iterator<Item = &LayerTensor> {
        self.layers
            .iter()
            .zip(&self.common)
            .filter_map(|(l, &c)| c.then_some(l))
    }

    pub fn common_count(&self) -> usize {
        self.common.iter().filter(|&&c| c).count()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LayerTensor::len).sum()
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| LayerTensor::zeros(l.name.clone(), l.shape.clone()))
                .collect(),
            common: self.common.clone(),
        }
    }

    /// Identical layer names, shapes and masks.
    pub fn check_same_structure(&self, other: &ModelParams) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::LayerMismatch(format!(
                "{} layers vs {}",
                self.layers.len(),
                other.layers.len()
            )));
        }
        for (a, b) in self.layers.iter().zip(&other.layers) {
            a.check_compatible(b)?;
        }
        if self.common != other.common {
            return Err(Error::LayerMismatch("common-layer masks differ".into()));
        }
        Ok(())
    }

    /// The common layers of both models pair up one-to-one by name and shape.
    pub fn check_common_structure(&self, other: &ModelParams) -> Result<()> {
        let (n_a, n_b) = (self.common_count(), other.common_count());
        if n_a != n_b {
            return Err(Error::LayerMismatch(format!(
                "{n_a} common layers vs {n_b}"
            )));
        }
        for (a, b) in self.common_layers().zip(other.common_layers()) {
            a.check_compatible(b)?;
        }
        Ok(())
    }

    /// Overwrites this model's common layers with `source`'s common layers.
    /// Personalized layers are left untouched.
    pub fn copy_common_from(&mut self, source: &ModelParams) -> Result<()> {
        self.check_common_structure(source)?;
        let targets = self
            .layers
            .iter_mut()
            .zip(&self.common)
            .filter_map(|(l, &c)| c.then_some(l));
        for (dst, src) in targets.zip(source.common_layers()) {
            dst.values.copy_from_slice(&src.values);
        }
        Ok(())
    }

    /// A model containing only the common layers.
    pub fn common_only(&self) -> ModelParams {
        let layers: Vec<_> = self.common_layers().cloned().collect();
        let common = vec![true; layers.len()];
        ModelParams { layers, common }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.values.iter().all(|v| v.is_finite()))
    }
}
