#![allow(dead_code)]

use cauchy_bench::losses::{loss_grad, LossSpec, Residual};
use cauchy_bench::nn::{backward, forward, init_params, NetworkConfig, Parameters};
use cauchy_bench::seed;
use rand::Rng;

// Closed forms written out here so the finite-difference oracle does not go
// through the library's loss path.
pub fn loss_value(spec: &LossSpec<f64>, y: f64, y_hat: f64) -> f64 {
    let r = y - y_hat;
    match spec.kind {
        cauchy_bench::LossKind::Mse => r * r,
        cauchy_bench::LossKind::Clf => spec.c * spec.c / 2.0 * (r / spec.c).powi(2).ln_1p(),
    }
}

/// Straight-line evaluation of the network from raw weight arrays.
#[allow(clippy::needless_range_loop)]
pub fn reference_forward(p: &Parameters<f64>, x: &[f64]) -> (f64, f64) {
    let mut act = x.to_vec();
    let mut min_hidden = f64::INFINITY;
    let last = p.layers.len() - 1;
    for (l, layer) in p.layers.iter().enumerate() {
        let mut next = vec![0.0; layer.fan_out];
        for o in 0..layer.fan_out {
            let mut z = layer.bias[o];
            for i in 0..layer.fan_in {
                z += layer.weights[o * layer.fan_in + i] * act[i];
            }
            if l == last {
                next[o] = z;
            } else {
                min_hidden = min_hidden.min(z.abs());
                next[o] = if z > 0.0 { z } else { 0.0 };
            }
        }
        act = next;
    }
    (act[0], min_hidden)
}

pub fn random_case(cfg: &NetworkConfig, seed: u64) -> (Parameters<f64>, Vec<f64>, f64) {
    let mut p: Parameters<f64> = init_params(cfg, seed).unwrap();
    let mut rng = seed::rng(seed ^ 0x9e37_79b9);
    for b in p.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
        *b = rng.random_range(-0.5..0.5);
    }
    let x: Vec<f64> = (0..cfg.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = rng.random_range(-3.0..3.0);
    (p, x, y)
}

/// Checks backprop against central differences on 20 random nets away from
/// ReLU kinks; panics with the offending entry otherwise.
pub fn fd_check(cfg: &NetworkConfig, spec: &LossSpec<f64>) -> usize {
    const H: f64 = 1e-6;
    const REL: f64 = 1e-5;
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 20 {
        seed += 1;
        let (p, x, y) = random_case(cfg, seed + 1000 * cfg.input_dim as u64);
        let (y_hat, cache) = forward(&p, &x).unwrap();
        let (_, margin) = reference_forward(&p, &x);
        // away from ReLU kinks
        if margin < 1e-3 {
            continue;
        }
        let g = backward(&p, &cache, loss_grad(Residual::new(y, y_hat), spec).unwrap()).unwrap();
        let analytic: Vec<f64> = g.values().copied().collect();
        for (k, &a) in analytic.iter().enumerate() {
            let eval = |delta: f64| {
                let mut q = p.clone();
                *q.values_mut().nth(k).unwrap() += delta;
                loss_value(spec, y, reference_forward(&q, &x).0)
            };
            let fd = (eval(H) - eval(-H)) / (2.0 * H);
            let err = (fd - a).abs();
            // cancellation error of the central difference
            let roundoff = 16.0 * f64::EPSILON * loss_value(spec, y, y_hat).abs().max(1.0) / H;
            assert!(
                err <= REL * a.abs().max(fd.abs()) + roundoff,
                "{} {:?} seed {seed} param {k}: backprop {a} vs fd {fd}",
                spec.label(),
                cfg.hidden_layers
            );
        }
        checked += 1;
    }
    checked
}
