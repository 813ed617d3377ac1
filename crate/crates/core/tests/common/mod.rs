//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rram_lstm::crossbar::CrossbarArray;
use rram_lstm::device::{DeviceParams, NoiseFlags};
use rram_lstm::network::{NetworkLayout, WeightView};
use rram_lstm::rng::Streams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `I_j = sum_i V_i G_ij` by explicit loops over a dense copy.
pub fn dense_rows_to_cols(g: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let cols = g[0].len();
    let mut out = vec![0.0; cols];
    for (i, row) in g.iter().enumerate() {
        for j in 0..cols {
            out[j] += v[i] * row[j];
        }
    }
    out
}

/// `I_i = sum_j G_ij V_j`.
pub fn dense_cols_to_rows(g: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    g.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn dense_copy(xb: &CrossbarArray) -> Vec<Vec<f64>> {
    (0..xb.n_rows())
        .map(|r| (0..xb.n_cols()).map(|c| xb.g(r, c)).collect())
        .collect()
}

/// `max |a - b| / max |b|`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}

pub fn random_voltages(rng: &mut impl Rng, n: usize, limit: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

pub fn noise_free_array(seed: u64, rows: usize, cols: usize) -> CrossbarArray {
    CrossbarArray::init_random(rows, cols, DeviceParams::default(), NoiseFlags::OFF, &mut Streams::from_seed(seed)).unwrap()
}

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Textbook LSTM forward pass with gate blocks in `[a, i, o, f]` column order.
/// Input vector per step is `[h_prev..., x, 1]`.
pub fn reference_lstm(w: &WeightView, n: usize, inputs: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut ys = Vec::new();
    for &x in inputs {
        let mut u = h.clone();
        u.push(x);
        u.push(1.0);
        let pre = |col: usize| -> f64 { u.iter().enumerate().map(|(r, ur)| ur * w.lstm[[r, col]]).sum() };
        let mut h_next = vec![0.0; n];
        for k in 0..n {
            let a = pre(k).tanh();
            let i = sig(pre(n + k));
            let o = sig(pre(2 * n + k));
            let f = sig(pre(3 * n + k));
            c[k] = a * i + f * c[k];
            h_next[k] = o * c[k].tanh();
        }
        h = h_next;
        ys.push(h.iter().enumerate().map(|(k, hk)| hk * w.dense[k]).sum::<f64>() + w.dense[n]);
    }
    ys
}

pub fn reference_mse(w: &WeightView, n: usize, inputs: &[f64], targets: &[f64]) -> f64 {
    let y = reference_lstm(w, n, inputs);
    y.iter().zip(targets).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

pub fn random_weights(rng: &mut impl Rng, layout: &NetworkLayout, scale: f64) -> WeightView {
    let mut w = WeightView::zeros(layout);
    w.lstm.mapv_inplace(|_| rng.random_range(-scale..=scale));
    w.dense.mapv_inplace(|_| rng.random_range(-scale..=scale));
    w
}

/// Working precision of the high-precision oracle, in bits.
pub const ORACLE_BITS: u32 = 128;

/// Reference loss with one weight shifted by `shift`, evaluated in
/// 128-bit floating point so finite differences are not limited by f64
/// rounding. Returns the loss at full precision.
pub fn reference_mse_shifted(
    w: &WeightView,
    n: usize,
    inputs: &[f64],
    targets: &[f64],
    at: rram_lstm::network::WeightIndex,
    shift: f64,
) -> rug::Float {
    use rram_lstm::network::WeightIndex;
    use rug::Float;
    let f = |x: f64| Float::with_val(ORACLE_BITS, x);
    let lstm: Vec<Vec<Float>> = (0..w.lstm.nrows())
        .map(|r| {
            (0..w.lstm.ncols())
                .map(|col| {
                    let mut v = f(w.lstm[[r, col]]);
                    if at == WeightIndex::Lstm(r, col) {
                        v += shift;
                    }
                    v
                })
                .collect()
        })
        .collect();
    let dense: Vec<Float> = (0..w.dense.len())
        .map(|k| {
            let mut v = f(w.dense[k]);
            if at == WeightIndex::Dense(k) {
                v += shift;
            }
            v
        })
        .collect();
    let sig = |z: Float| -> Float {
        let e = (-z).exp();
        Float::with_val(ORACLE_BITS, 1.0 / (e + 1.0))
    };
    let mut h = vec![f(0.0); n];
    let mut c = vec![f(0.0); n];
    let mut loss = f(0.0);
    for (&x, &t) in inputs.iter().zip(targets) {
        let mut u = h.clone();
        u.push(f(x));
        u.push(f(1.0));
        let pre = |col: usize| -> Float {
            let mut acc = f(0.0);
            for (r, ur) in u.iter().enumerate() {
                acc += ur * &lstm[r][col];
            }
            acc
        };
        let mut h_next = Vec::with_capacity(n);
        for (k, ck) in c.iter_mut().enumerate() {
            let a = pre(k).tanh();
            let i = sig(pre(n + k));
            let o = sig(pre(2 * n + k));
            let fg = sig(pre(3 * n + k));
            *ck = Float::with_val(ORACLE_BITS, &a * &i) + Float::with_val(ORACLE_BITS, &fg * &*ck);
            h_next.push(o * ck.clone().tanh());
        }
        h = h_next;
        let mut y = dense[n].clone();
        for (k, hk) in h.iter().enumerate() {
            y += hk * &dense[k];
        }
        let e = y - t;
        loss += &e * &e;
    }
    loss / inputs.len() as f64
}
