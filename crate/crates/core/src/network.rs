//! LSTM layer plus one-output dense layer, with every weight stored as a
//! differential conductance pair on a shared crossbar.
//!
//! Logical LSTM input is `u = [h(t-1), x(t), 1]` (17 entries). Pair `i`
//! occupies rows `2i` (G+) and `2i + 1` (G-) of its block; the input is
//! applied as `+u_i * v_read` and `-u_i * v_read`, so the column current is
//! `v_read * sum_i u_i (G+ - G-)` and decodes to `u^T W` after dividing by
//! `v_read * g2w_ratio`. Gate pre-activations occupy four 15-column groups.
//! Activations are evaluated digitally.

use ndarray::{Array1, Array2};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::crossbar::{CrossbarArray, PartitionMap};
use crate::error::{Error, Result};

pub const N_HIDDEN: usize = 15;
pub const N_INPUT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// Candidate activation, tanh.
    Activation,
    Input,
    Output,
    Forget,
}

/// Row interleave rule for differential pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScheme {
    /// Pair `i` at rows `2i` (G+) and `2i + 1` (G-).
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub n_hidden: usize,
    pub n_input: usize,
    pub gate_order: [Gate; 4],
    pub pair_scheme: PairScheme,
    /// Read voltage (V).
    pub v_read: f64,
    /// Siemens per unit weight.
    pub g2w_ratio: f64,
    pub array_rows: usize,
    pub array_cols: usize,
    pub partition: PartitionMap,
}

impl Default for NetworkLayout {
    fn default() -> Self {
        NetworkLayout {
            n_hidden: N_HIDDEN,
            n_input: N_INPUT,
            gate_order: [Gate::Activation, Gate::Input, Gate::Output, Gate::Forget],
            pair_scheme: PairScheme::Interleaved,
            v_read: 0.1,
            g2w_ratio: 1e-4,
            array_rows: 64,
            array_cols: 64,
            partition: PartitionMap::default(),
        }
    }
}

impl NetworkLayout {
    /// `[h, x, 1]`
    pub fn lstm_inputs(&self) -> usize {
        self.n_hidden + self.n_input + 1
    }

    pub fn lstm_outputs(&self) -> usize {
        4 * self.n_hidden
    }

    /// `[h, 1]`
    pub fn dense_inputs(&self) -> usize {
        self.n_hidden + 1
    }

    pub fn n_weights(&self) -> usize {
        self.lstm_inputs() * self.lstm_outputs() + self.dense_inputs()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_hidden != N_HIDDEN || self.n_input != N_INPUT {
            out.push(format!(
                "layout supports {N_HIDDEN} hidden units and {N_INPUT} input, got {} / {}",
                self.n_hidden, self.n_input
            ));
        }
        let mut seen = self.gate_order.to_vec();
        seen.sort_by_key(|g| *g as u8);
        seen.dedup();
        if seen.len() != 4 {
            out.push("layout.gate_order must name each gate exactly once".into());
        }
        if !(self.v_read > 0.0 && self.v_read.is_finite()) {
            out.push(format!("layout.v_read must be > 0, got {}", self.v_read));
        }
        if !(self.g2w_ratio > 0.0 && self.g2w_ratio.is_finite()) {
            out.push(format!("training.g2w_ratio must be > 0, got {}", self.g2w_ratio));
        }
        if let Err(e) = self.partition.validate(self.array_rows, self.array_cols) {
            out.push(format!("layout.partition: {e}"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Logical column range of `gate` within the LSTM block.
    pub fn gate_columns(&self, gate: Gate) -> std::ops::Range<usize> {
        let k = self
            .gate_order
            .iter()
            .position(|g| *g == gate)
            .expect("gate_order covers every gate");
        k * self.n_hidden..(k + 1) * self.n_hidden
    }

    /// Physical `(row+, row-, col)` of LSTM weight `(input, output)`.
    pub fn lstm_cell(&self, input: usize, output: usize) -> (usize, usize, usize) {
        let b = self.partition.lstm_block;
        (b.row + 2 * input, b.row + 2 * input + 1, b.col + output)
    }

    /// Physical `(row+, row-, col)` of dense weight `input`.
    pub fn dense_cell(&self, input: usize) -> (usize, usize, usize) {
        let b = self.partition.dense_block;
        (b.row + 2 * input, b.row + 2 * input + 1, b.col)
    }

    /// Every logical weight's cell triple, LSTM weights row-major first.
    pub fn weight_cells(&self) -> impl Iterator<Item = (WeightIndex, (usize, usize, usize))> + '_ {
        let lstm = (0..self.lstm_inputs()).flat_map(move |i| {
            (0..self.lstm_outputs()).map(move |j| (WeightIndex::Lstm(i, j), self.lstm_cell(i, j)))
        });
        let dense = (0..self.dense_inputs()).map(move |k| (WeightIndex::Dense(k), self.dense_cell(k)));
        lstm.chain(dense)
    }

    fn current_to_preactivation(&self, current: f64) -> f64 {
        current / (self.v_read * self.g2w_ratio)
    }
}

/// Address of one logical weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightIndex {
    Lstm(usize, usize),
    Dense(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(n_hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; n_hidden],
            c: vec![0.0; n_hidden],
        }
    }
}

/// Logical weights decoded from conductance pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightView {
    /// `lstm_inputs x lstm_outputs`
    pub lstm: Array2<f64>,
    /// `dense_inputs`
    pub dense: Array1<f64>,
}

impl WeightView {
    pub fn zeros(layout: &NetworkLayout) -> Self {
        WeightView {
            lstm: Array2::zeros((layout.lstm_inputs(), layout.lstm_outputs())),
            dense: Array1::zeros(layout.dense_inputs()),
        }
    }

    pub fn get(&self, idx: WeightIndex) -> f64 {
        match idx {
            WeightIndex::Lstm(i, j) => self.lstm[[i, j]],
            WeightIndex::Dense(k) => self.dense[k],
        }
    }

    pub fn get_mut(&mut self, idx: WeightIndex) -> &mut f64 {
        match idx {
            WeightIndex::Lstm(i, j) => &mut self.lstm[[i, j]],
            WeightIndex::Dense(k) => &mut self.dense[k],
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Physical row voltages for one LSTM step: `+u_i v_read` on the G+ row and
/// `-u_i v_read` on the G- row of pair `i`; every other row is zero.
pub fn encode_lstm_input(x: f64, state: &LstmState, layout: &NetworkLayout) -> Vec<f64> {
    let mut u = Vec::with_capacity(layout.lstm_inputs());
    u.extend_from_slice(&state.h);
    u.push(x);
    u.push(1.0);
    let mut v = vec![0.0; layout.array_rows];
    for (i, ui) in u.iter().enumerate() {
        let (rp, rm, _) = layout.lstm_cell(i, 0);
        v[rp] = ui * layout.v_read;
        v[rm] = -ui * layout.v_read;
    }
    v
}

/// Physical row voltages for the dense read, `[h, 1]` as differential pairs.
pub fn encode_dense_input(state: &LstmState, layout: &NetworkLayout) -> Vec<f64> {
    let mut v = vec![0.0; layout.array_rows];
    let bias = std::iter::once(1.0);
    for (k, uk) in state.h.iter().copied().chain(bias).enumerate() {
        let (rp, rm, _) = layout.dense_cell(k);
        v[rp] = uk * layout.v_read;
        v[rm] = -uk * layout.v_read;
    }
    v
}

/// Decoded LSTM pre-activations `z_j = I_j / (v_read * g2w_ratio)`.
pub fn lstm_preactivations<R: RngCore + ?Sized>(
    xb: &CrossbarArray,
    layout: &NetworkLayout,
    x: f64,
    state: &LstmState,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let block = layout.partition.lstm_block;
    let v = encode_lstm_input(x, state, layout);
    let currents = xb.sense_cols(&v[block.row..block.row + block.rows], &block, rng)?;
    Ok(currents
        .into_iter()
        .map(|i| layout.current_to_preactivation(i))
        .collect())
}

/// Gate outputs of one step, in logical unit order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub a: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub f: Vec<f64>,
}

pub fn gates_from_preactivations(z: &[f64], layout: &NetworkLayout) -> Gates {
    let group = |g: Gate| &z[layout.gate_columns(g)];
    Gates {
        a: group(Gate::Activation).iter().map(|v| v.tanh()).collect(),
        i: group(Gate::Input).iter().copied().map(sigmoid).collect(),
        o: group(Gate::Output).iter().copied().map(sigmoid).collect(),
        f: group(Gate::Forget).iter().copied().map(sigmoid).collect(),
    }
}

/// `c' = i*a + f*c`, `h' = o*tanh(c')`.
pub fn cell_update(gates: &Gates, state: &LstmState) -> LstmState {
    let n = state.c.len();
    let mut c = vec![0.0; n];
    let mut h = vec![0.0; n];
    for k in 0..n {
        c[k] = gates.i[k] * gates.a[k] + gates.f[k] * state.c[k];
        h[k] = gates.o[k] * c[k].tanh();
    }
    LstmState { h, c }
}

/// One analog LSTM step: crossbar VMM, digital activations.
pub fn lstm_step<R: RngCore + ?Sized>(
    xb: &CrossbarArray,
    layout: &NetworkLayout,
    x: f64,
    state: &LstmState,
    rng: &mut R,
) -> Result<LstmState> {
    let z = lstm_preactivations(xb, layout, x, state, rng)?;
    let gates = gates_from_preactivations(&z, layout);
    Ok(cell_update(&gates, state))
}

/// Dense output for hidden state `state.h`, in normalized units.
pub fn dense_forward<R: RngCore + ?Sized>(
    xb: &CrossbarArray,
    layout: &NetworkLayout,
    state: &LstmState,
    rng: &mut R,
) -> Result<f64> {
    let block = layout.partition.dense_block;
    let v = encode_dense_input(state, layout);
    let current = xb.sense_cols(&v[block.row..block.row + block.rows], &block, rng)?;
    Ok(layout.current_to_preactivation(current[0]))
}

/// Runs the network over `inputs` from a zero state; one prediction per input.
pub fn forward_sequence<R: RngCore + ?Sized>(
    xb: &CrossbarArray,
    layout: &NetworkLayout,
    inputs: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Err(Error::domain("forward_sequence needs at least one input"));
    }
    let mut state = LstmState::zeros(layout.n_hidden);
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        state = lstm_step(xb, layout, x, &state, rng)?;
        out.push(dense_forward(xb, layout, &state, rng)?);
    }
    Ok(out)
}

/// Noise-free decode of every pair: `W = (G+ - G-) / g2w_ratio`.
pub fn weight_view(xb: &CrossbarArray, layout: &NetworkLayout) -> WeightView {
    let mut w = WeightView::zeros(layout);
    for (idx, (rp, rm, col)) in layout.weight_cells() {
        *w.get_mut(idx) = (xb.g(rp, col) - xb.g(rm, col)) / layout.g2w_ratio;
    }
    w
}
