mod common;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reptreefl::model::{
    backward_and_loss, forward, init_params, Activation, Head, LossKind, Matrix, ModelParams,
    ModelSpec, Targets,
};

const STEP: f64 = 1e-5;
const MARGIN: f64 = 1e-4;

fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
        Activation::Linear => z,
    }
}

/// Plain triple-loop forward pass; returns outputs and every hidden
/// pre-activation.
fn oracle_forward(spec: &ModelSpec, p: &ModelParams, x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pre = Vec::new();
    let mut out = Vec::new();
    let blocks = spec.hidden.len() + 1;
    for row in x {
        let mut h = row.clone();
        for b in 0..blocks {
            let w = p.layer(&format!("dense{b}.weight")).unwrap();
            let bias = p.layer(&format!("dense{b}.bias")).unwrap();
            let (fan_in, fan_out) = (w.shape[0], w.shape[1]);
            let mut z = vec![0.0; fan_out];
            for o in 0..fan_out {
                let mut s = bias.values[o];
                for i in 0..fan_in {
                    s += h[i] * w.values[i * fan_out + o];
                }
                z[o] = s;
            }
            if b + 1 < blocks {
                pre.extend(z.iter().copied());
                h = z.iter().map(|&v| act(spec.activations[b], v)).collect();
            } else {
                h = z;
            }
        }
        out.push(h);
    }
    (out, pre)
}

fn oracle_loss(out: &[Vec<f64>], targets: &Targets, loss: LossKind) -> f64 {
    match (loss, targets) {
        (LossKind::CrossEntropy, Targets::Classes { labels, .. }) => {
            let mut total = 0.0;
            for (o, &y) in out.iter().zip(labels) {
                let m = o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + o.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                total += lse - o[y];
            }
            total / out.len() as f64
        }
        (LossKind::L1, Targets::Values(t)) => {
            let mut total = 0.0;
            for (i, o) in out.iter().enumerate() {
                for (j, v) in o.iter().enumerate() {
                    total += (v - t.get(i, j)).abs();
                }
            }
            total / (out.len() * out[0].len()) as f64
        }
        _ => unreachable!(),
    }
}

struct Instance {
    spec: ModelSpec,
    params: ModelParams,
    x: Vec<Vec<f64>>,
    targets: Targets,
    loss: LossKind,
}

fn draw(rng: &mut ChaCha8Rng, loss: LossKind) -> Instance {
    loop {
        let input = rng.random_range(2..=5);
        let depth = rng.random_range(1..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=5)).collect();
        let outputs = rng.random_range(2..=4);
        let head = match loss {
            LossKind::CrossEntropy => Head::Classification { classes: outputs },
            LossKind::L1 => Head::Regression { outputs },
        };
        let activation = [Activation::Relu, Activation::Tanh][rng.random_range(0..2)];
        let spec = ModelSpec::new(input, hidden, head).with_activation(activation);
        let mut params = init_params(&spec, rng.random()).unwrap();
        for layer in params.layers_mut() {
            for v in layer.values.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        assert!(params.num_params() <= 100);
        let n = rng.random_range(1..=6);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..input).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let targets = match loss {
            LossKind::CrossEntropy => Targets::Classes {
                labels: (0..n).map(|_| rng.random_range(0..outputs)).collect(),
                classes: outputs,
            },
            LossKind::L1 => {
                let data = (0..n * outputs).map(|_| rng.random_range(-2.0..2.0)).collect();
                Targets::Values(Matrix::new(n, outputs, data).unwrap())
            }
        };
        // Keep clear of the kinks of ReLU and |.| so the finite difference
        // does not straddle one.
        let (out, pre) = oracle_forward(&spec, &params, &x);
        let relu_kink = activation == Activation::Relu && pre.iter().any(|z| z.abs() < MARGIN);
        let l1_kink = match &targets {
            Targets::Values(t) => out
                .iter()
                .enumerate()
                .any(|(i, o)| o.iter().enumerate().any(|(j, v)| (v - t.get(i, j)).abs() < MARGIN)),
            _ => false,
        };
        if !relu_kink && !l1_kink {
            return Instance { spec, params, x, targets, loss };
        }
    }
}

fn check(loss: LossKind, seed: u64) {
    let mut rng = common::rng(seed);
    for instance in 0..20 {
        let Instance { spec, params, x, targets, loss } = draw(&mut rng, loss);
        let batch = Matrix::from_rows(&x).unwrap();
        let (value, grads) = backward_and_loss(&spec, &params, &batch, &targets, loss).unwrap();
        let (out, _) = oracle_forward(&spec, &params, &x);
        assert!((value - oracle_loss(&out, &targets, loss)).abs() <= 1e-12);

        for (li, layer) in params.layers().iter().enumerate() {
            for e in 0..layer.values.len() {
                let mut plus = params.clone();
                plus.layers_mut()[li].values[e] += STEP;
                let mut minus = params.clone();
                minus.layers_mut()[li].values[e] -= STEP;
                let lp = oracle_loss(&oracle_forward(&spec, &plus, &x).0, &targets, loss);
                let lm = oracle_loss(&oracle_forward(&spec, &minus, &x).0, &targets, loss);
                let numeric = (lp - lm) / (2.0 * STEP);
                let analytic = grads.layers()[li].values[e];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel <= 1e-4,
                    "instance {instance} {} [{e}]: analytic {analytic} numeric {numeric} rel {rel}",
                    layer.name
                );
            }
        }
    }
}

#[test]
fn cross_entropy_gradients_match_finite_differences() {
    check(LossKind::CrossEntropy, 1);
}

#[test]
fn l1_gradients_match_finite_differences() {
    check(LossKind::L1, 2);
}

#[test]
fn forward_matches_triple_loop() {
    let mut rng = common::rng(3);
    for _ in 0..50 {
        let loss = [LossKind::CrossEntropy, LossKind::L1][rng.random_range(0..2)];
        let Instance { spec, params, x, .. } = draw(&mut rng, loss);
        let got = forward(&spec, &params, &Matrix::from_rows(&x).unwrap()).unwrap();
        let (expected, _) = oracle_forward(&spec, &params, &x);
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((got.get(i, j) - v).abs() <= 1e-12);
            }
        }
    }
}
