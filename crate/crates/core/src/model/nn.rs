//! Forward and backward passes for the dense networks described by
//! [`ModelSpec`].

use serde::{Deserialize, Serialize};

use super::spec::{Activation, Head, ModelSpec};
use super::tensor::{Matrix, ModelParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    L1,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::L1 => "l1",
        }
    }
}

/// Supervision for a batch: class indices or a regression target matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Classes { labels: Vec<usize>, classes: usize },
    Values(Matrix),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Values(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Classes { labels, classes } => Targets::Classes {
                labels: rows.iter().map(|&r| labels[r]).collect(),
                classes: *classes,
            },
            Targets::Values(m) => Targets::Values(m.select_rows(rows)),
        }
    }
}

fn check_params(spec: &ModelSpec, params: &ModelParams) -> Result<()> {
    let dims = spec.block_dims();
    let layers = params.layers();
    if layers.len() != dims.len() * 2 {
        return Err(Error::LayerMismatch(format!(
            "spec expects {} layers, params have {}",
            dims.len() * 2,
            layers.len()
        )));
    }
    for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = &layers[2 * i];
        let b = &layers[2 * i + 1];
        if w.shape != [fan_in, fan_out] {
            return Err(Error::shape(&w.name, &[fan_in, fan_out], &w.shape));
        }
        if b.shape != [fan_out] {
            return Err(Error::shape(&b.name, &[fan_out], &b.shape));
        }
    }
    Ok(())
}

/// `input · W + b` for one dense block.
fn affine(input: &Matrix, weight: &[f64], bias: &[f64], fan_out: usize) -> Matrix {
    let fan_in = input.cols();
    let mut out = Matrix::zeros(input.rows(), fan_out);
    let out_data = out.data_mut();
    for i in 0..input.rows() {
        let row = &mut out_data[i * fan_out..(i + 1) * fan_out];
        row.copy_from_slice(bias);
        for (k, &x) in input.row(i).iter().enumerate().take(fan_in) {
            if x == 0.0 {
                continue;
            }
            let w_row = &weight[k * fan_out..(k + 1) * fan_out];
            for (o, &w) in row.iter_mut().zip(w_row) {
                *o += x * w;
            }
        }
    }
    out
}

struct Trace {
    /// Inputs to every block (`inputs[0]` is the batch).
    inputs: Vec<Matrix>,
    /// Pre-activations of every hidden block.
    pre: Vec<Matrix>,
    output: Matrix,
}

fn run(spec: &ModelSpec, params: &ModelParams, batch: &Matrix, keep: bool) -> Result<Trace> {
    check_params(spec, params)?;
    if batch.cols() != spec.input {
        return Err(Error::shape("batch", &[spec.input], &[batch.cols()]));
    }
    let dims = spec.block_dims();
    let layers = params.layers();
    let mut inputs = Vec::new();
    let mut pre = Vec::new();
    let mut current = batch.clone();
    for (i, &(_, fan_out)) in dims.iter().enumerate() {
        let z = affine(&current, &layers[2 * i].values, &layers[2 * i + 1].values, fan_out);
        if i + 1 == dims.len() {
            if keep {
                inputs.push(current);
            }
            return Ok(Trace {
                inputs,
                pre,
                output: z,
            });
        }
        let act = spec.activations[i];
        let mut a = z.clone();
        a.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        if keep {
            inputs.push(current);
            pre.push(z);
        }
        current = a;
    }
    unreachable!("spec has at least one block")
}

/// Raw network outputs: unnormalized class scores or regression predictions.
pub fn forward(spec: &ModelSpec, params: &ModelParams, batch: &Matrix) -> Result<Matrix> {
    Ok(run(spec, params, batch, false)?.output)
}

/// Mean loss over the batch together with gradients for every layer.
///
/// Cross-entropy is softmax cross-entropy averaged over samples; L1 is the
/// absolute error averaged over every output element.
pub fn backward_and_loss(
    spec: &ModelSpec,
    params: &ModelParams,
    batch: &Matrix,
    targets: &Targets,
    loss: LossKind,
) -> Result<(f64, ModelParams)> {
    if targets.len() != batch.rows() {
        return Err(Error::shape("targets", &[batch.rows()], &[targets.len()]));
    }
    if batch.rows() == 0 {
        return Err(Error::Empty("batch"));
    }
    let trace = run(spec, params, batch, true)?;
    let (value, mut delta) = output_loss(spec.head, &trace.output, targets, loss)?;

    let dims = spec.block_dims();
    let layers = params.layers();
    let mut grads = params.zeros_like();
    for i in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[i];
        let input = &trace.inputs[i];
        {
            let g = grads.layers_mut();
            let gw = &mut g[2 * i].values;
            for r in 0..input.rows() {
                let d_row = delta.row(r);
                for (k, &x) in input.row(r).iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let gw_row = &mut gw[k * fan_out..(k + 1) * fan_out];
                    for (g, &d) in gw_row.iter_mut().zip(d_row) {
                        *g += x * d;
                    }
                }
            }
            let gb = &mut g[2 * i + 1].values;
            for r in 0..delta.rows() {
                for (g, &d) in gb.iter_mut().zip(delta.row(r)) {
                    *g += d;
                }
            }
        }
        if i == 0 {
            break;
        }
        // Propagate through W then the previous block's activation.
        let w = &layers[2 * i].values;
        let z_prev = &trace.pre[i - 1];
        let act: Activation = spec.activations[i - 1];
        let mut next = Matrix::zeros(delta.rows(), fan_in);
        for r in 0..delta.rows() {
            let d_row = delta.row(r);
            let z_row = z_prev.row(r);
            let out = &mut next.data_mut()[r * fan_in..(r + 1) * fan_in];
            for k in 0..fan_in {
                let w_row = &w[k * fan_out..(k + 1) * fan_out];
                let s: f64 = w_row.iter().zip(d_row).map(|(w, d)| w * d).sum();
                out[k] = s * act.derivative(z_row[k]);
            }
        }
        delta = next;
    }
    Ok((value, grads))
}

/// Loss value and its gradient with respect to the network output.
fn output_loss(head: Head, output: &Matrix, targets: &Targets, loss: LossKind) -> Result<(f64, Matrix)> {
    let n = output.rows();
    let c = output.cols();
    match (loss, head, targets) {
        (LossKind::CrossEntropy, Head::Classification { classes }, Targets::Classes { labels, .. }) => {
            let mut grad = Matrix::zeros(n, c);
            let mut total = 0.0;
            let inv_n = 1.0 / n as f64;
            for (r, &label) in labels.iter().enumerate() {
                if label >= classes {
                    return Err(Error::InvalidDataset(format!(
                        "label {label} outside {classes} classes"
                    )));
                }
                let row = output.row(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum_exp: f64 = row.iter().map(|z| (z - max).exp()).sum();
                let lse = max + sum_exp.ln();
                total += lse - row[label];
                let g = &mut grad.data_mut()[r * c..(r + 1) * c];
                for (j, gj) in g.iter_mut().enumerate() {
                    let p = (row[j] - lse).exp();
                    *gj = (p - if j == label { 1.0 } else { 0.0 }) * inv_n;
                }
            }
            Ok((total * inv_n, grad))
        }
        (LossKind::L1, Head::Regression { .. }, Targets::Values(t)) => {
            if t.cols() != c {
                return Err(Error::shape("regression targets", &[c], &[t.cols()]));
            }
            let count = (n * c) as f64;
            let mut grad = Matrix::zeros(n, c);
            let mut total = 0.0;
            for ((g, &y), &p) in grad.data_mut().iter_mut().zip(t.data()).zip(output.data()) {
                let diff = p - y;
                total += diff.abs();
                *g = if diff > 0.0 {
                    1.0 / count
                } else if diff < 0.0 {
                    -1.0 / count
                } else {
                    0.0
                };
            }
            Ok((total / count, grad))
        }
        (loss, head, _) => Err(Error::IncompatibleLoss {
            loss: loss.name(),
            head: head.kind_name(),
        }),
    }
}
