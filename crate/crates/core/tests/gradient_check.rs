mod common;

use common::*;
use rram_lstm::network::{NetworkLayout, WeightIndex};
use rram_lstm::training::{bptt_gradients, forward_digital, weight_indices};
use rram_lstm::Exec;

const STEP: f64 = 1e-6;

fn sequence(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    use rand::Rng;
    let mut r = rng(seed);
    let series: Vec<f64> = (0..=n).map(|_| r.random_range(0.0..1.0)).collect();
    (series[..n].to_vec(), series[1..].to_vec())
}

/// Central differences on every weight. The loss oracle is independent of
/// the library forward pass and runs in 128-bit floating point.
fn finite_differences(
    w: &rram_lstm::network::WeightView,
    layout: &NetworkLayout,
    inputs: &[f64],
    targets: &[f64],
    idx: &[WeightIndex],
) -> Vec<f64> {
    Exec::default().map_range(idx.len(), |k| {
        let lp = reference_mse_shifted(w, layout.n_hidden, inputs, targets, idx[k], STEP);
        let lm = reference_mse_shifted(w, layout.n_hidden, inputs, targets, idx[k], -STEP);
        ((lp - lm) / (2.0 * STEP)).to_f64()
    })
}

fn max_relative(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d == 0.0 {
                0.0
            } else {
                d / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}

#[test]
fn reference_forward_matches_library() {
    let layout = NetworkLayout::default();
    let w = random_weights(&mut rng(1), &layout, 0.5);
    let (x, _) = sequence(2, 30);
    let a = forward_digital(&w, &layout, &x);
    let b = reference_lstm(&w, layout.n_hidden, &x);
    assert!(max_rel_err(&a, &b) <= 1e-12);
}

#[test]
fn bptt_matches_central_differences() {
    let layout = NetworkLayout::default();
    let idx = weight_indices(&layout);
    assert_eq!(idx.len(), 1036);
    let seed = 3;
    let w = random_weights(&mut rng(seed), &layout, 0.5);
    let (x, y) = sequence(seed + 10, 10);
    let g = bptt_gradients(&w, &layout, &x, &y).unwrap();
    let analytic: Vec<f64> = idx.iter().map(|&i| g.get(i)).collect();
    let numeric = finite_differences(&w, &layout, &x, &y, &idx);
    let err = max_relative(&analytic, &numeric);
    assert!(err <= 1e-4, "max relative error {err:e}");
}
