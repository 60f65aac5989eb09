use serde::{Deserialize, Serialize};

use super::tensor::ModelParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn build(self) -> Optimizer {
        match self {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam { beta1, beta2, eps } => Optimizer::Adam {
                hyper: AdamHyper { beta1, beta2, eps },
                state: AdamState::default(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per layer. An empty state
/// is lazily sized on the first step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

/// Optimizer with whatever state it carries between steps.
#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { hyper: AdamHyper, state: AdamState },
}

impl Optimizer {
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) -> Result<()> {
        match self {
            Optimizer::Sgd => sgd_update(params, grads, lr),
            Optimizer::Adam { hyper, state } => adam_update(state, params, grads, lr, *hyper),
        }
    }
}

fn check_grads(params: &ModelParams, grads: &ModelParams) -> Result<()> {
    if params.layers().len() != grads.layers().len() {
        return Err(Error::LayerMismatch(format!(
            "{} parameter layers vs {} gradient layers",
            params.layers().len(),
            grads.layers().len()
        )));
    }
    for (p, g) in params.layers().iter().zip(grads.layers()) {
        p.check_compatible(g)?;
    }
    Ok(())
}

pub fn sgd_update(params: &mut ModelParams, grads: &ModelParams, lr: f64) -> Result<()> {
    check_grads(params, grads)?;
    for (p, g) in params.layers_mut().iter_mut().zip(grads.layers()) {
        for (w, d) in p.values.iter_mut().zip(&g.values) {
            *w -= lr * d;
        }
    }
    Ok(())
}

/// `W - lr * grad`, elementwise.
pub fn sgd_step(params: &ModelParams, grads: &ModelParams, lr: f64) -> Result<ModelParams> {
    let mut out = params.clone();
    sgd_update(&mut out, grads, lr)?;
    Ok(out)
}

pub fn adam_update(
    state: &mut AdamState,
    params: &mut ModelParams,
    grads: &ModelParams,
    lr: f64,
    hyper: AdamHyper,
) -> Result<()> {
    check_grads(params, grads)?;
    if state.first.is_empty() {
        state.first = params.layers().iter().map(|l| vec![0.0; l.len()]).collect();
        state.second = state.first.clone();
        state.step = 0;
    } else if state.first.len() != params.layers().len()
        || state
            .first
            .iter()
            .zip(params.layers())
            .any(|(m, l)| m.len() != l.len())
    {
        return Err(Error::LayerMismatch("adam state does not match parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - hyper.beta1.powi(t);
    let bias2 = 1.0 - hyper.beta2.powi(t);
    for (((p, g), m), v) in params
        .layers_mut()
        .iter_mut()
        .zip(grads.layers())
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        for (((w, &d), m), v) in p.values.iter_mut().zip(&g.values).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * d;
            *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * d * d;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *w -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}

/// Functional Adam step with bias-corrected moments.
pub fn adam_step(
    state: &AdamState,
    params: &ModelParams,
    grads: &ModelParams,
    lr: f64,
    hyper: AdamHyper,
) -> Result<(ModelParams, AdamState)> {
    let mut state = state.clone();
    let mut out = params.clone();
    adam_update(&mut state, &mut out, grads, lr, hyper)?;
    Ok((out, state))
}
