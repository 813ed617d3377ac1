mod common;

use common::*;
use rram_lstm::data::{make_supervised, TimeSeriesDataset, bundled_dataset};
use rram_lstm::network::{self, LstmState, NetworkLayout};
use rram_lstm::training::forward_digital;

#[test]
fn single_step_matches_reference() {
    let layout = NetworkLayout::default();
    let mut r = rng(5);
    for seed in 0..10 {
        let xb = noise_free_array(seed, layout.array_rows, layout.array_cols);
        let w = network::weight_view(&xb, &layout);
        let x = 0.3 + 0.05 * seed as f64;
        let next = network::lstm_step(&xb, &layout, x, &LstmState::zeros(15), &mut r).unwrap();
        let y = network::dense_forward(&xb, &layout, &next, &mut r).unwrap();
        let expect = reference_lstm(&w, 15, &[x])[0];
        assert!((y - expect).abs() <= 1e-9, "seed {seed}: {y} vs {expect}");
    }
}

#[test]
fn noise_free_sequence_matches_digital_replica() {
    let layout = NetworkLayout::default();
    let ds = TimeSeriesDataset::load(&bundled_dataset()).unwrap();
    let (train, _) = make_supervised(&ds);
    let inputs = &ds.normalized[..96];
    assert_eq!(train.inputs[..], ds.normalized[..95]);
    let mut r = rng(6);
    for seed in 0..5 {
        let xb = noise_free_array(seed, layout.array_rows, layout.array_cols);
        let w = network::weight_view(&xb, &layout);
        let analog = network::forward_sequence(&xb, &layout, inputs, &mut r).unwrap();
        let digital = forward_digital(&w, &layout, inputs);
        let worst = analog.iter().zip(&digital).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-8, "seed {seed}: {worst:e}");
    }
}
