//! In-situ training: digital BPTT gradients, SGD-with-momentum desired
//! updates, and sign-only (Manhattan) pulse programming of the crossbar,
//! plus a full-precision digital baseline with the same architecture.

use serde::{Deserialize, Serialize};

use crate::crossbar::CrossbarArray;
use crate::data::{self, SupervisedPairs};
use crate::device::{self, DeviceParams, NoiseFlags, PulseSpec};
use crate::error::{Error, Result};
use crate::network::{
    self, cell_update, gates_from_preactivations, Gate, LstmState, NetworkLayout,
    WeightIndex, WeightView,
};
use crate::rng::Streams;

/// How often desired updates are turned into pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// One update per epoch from the full-sequence gradient.
    #[default]
    PerEpoch,
    /// One update per time step from that step's squared error.
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Learning rate.
    pub alpha: f64,
    /// Momentum.
    pub eta: f64,
    /// Siemens per unit weight.
    pub g2w_ratio: f64,
    /// Potentiation amplitude (V).
    pub v_set: f64,
    /// Depression amplitude (V).
    pub v_reset: f64,
    /// Pulse duration (s).
    pub t_p: f64,
    pub epochs: usize,
    pub flags: NoiseFlags,
    pub seed: u64,
    pub granularity: Granularity,
    /// A device whose normalized headroom `(g_max - g) / (g_max - g_min)`
    /// falls below this value counts as saturated; its partner is reset
    /// instead of potentiating it further.
    pub saturation_headroom: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            alpha: 0.01,
            eta: 0.9,
            g2w_ratio: 1e-4,
            v_set: 0.8,
            v_reset: -0.8,
            t_p: 100e-9,
            epochs: 200,
            flags: NoiseFlags::OFF,
            seed: 0,
            granularity: Granularity::PerEpoch,
            saturation_headroom: 0.1,
        }
    }
}

impl TrainingConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            out.push(format!("training.alpha must be > 0, got {}", self.alpha));
        }
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            out.push(format!("training.eta must be in [0, 1), got {}", self.eta));
        }
        if self.epochs < 1 {
            out.push("training.epochs must be >= 1".into());
        }
        if !(self.v_set > 0.0) {
            out.push(format!("training.v_set must be > 0, got {}", self.v_set));
        }
        if !(self.v_reset < 0.0) {
            out.push(format!("training.v_reset must be < 0, got {}", self.v_reset));
        }
        if !(self.t_p > 0.0 && self.t_p.is_finite()) {
            out.push(format!("training.t_p must be > 0, got {}", self.t_p));
        }
        if !(self.g2w_ratio > 0.0 && self.g2w_ratio.is_finite()) {
            out.push(format!("training.g2w_ratio must be > 0, got {}", self.g2w_ratio));
        }
        if !(0.0..1.0).contains(&self.saturation_headroom) {
            out.push(format!(
                "training.saturation_headroom must be in [0, 1), got {}",
                self.saturation_headroom
            ));
        }
        out
    }

    pub fn set_pulse(&self) -> PulseSpec {
        PulseSpec {
            amplitude: self.v_set,
            duration: self.t_p,
        }
    }

    pub fn reset_pulse(&self) -> PulseSpec {
        PulseSpec {
            amplitude: self.v_reset,
            duration: self.t_p,
        }
    }
}

/// Gradient of the current update and the momentum carrier `dW(t-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTensors {
    pub grad: WeightView,
    pub momentum: WeightView,
}

impl GradientTensors {
    pub fn zeros(layout: &NetworkLayout) -> Self {
        GradientTensors {
            grad: WeightView::zeros(layout),
            momentum: WeightView::zeros(layout),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Loss of the forward pass run at the start of the epoch.
    pub train_mse: f64,
    pub energy_j: f64,
    pub pulses_set: u64,
    pub pulses_reset: u64,
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    data::mse(pred, target)
}

/// Activations cached by the digital forward pass.
#[derive(Debug, Clone)]
struct StepCache {
    u: Vec<f64>,
    a: Vec<f64>,
    i: Vec<f64>,
    o: Vec<f64>,
    f: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    y: f64,
}

fn forward_cached(w: &WeightView, layout: &NetworkLayout, inputs: &[f64]) -> Vec<StepCache> {
    let n = layout.n_hidden;
    let mut state = LstmState::zeros(n);
    let mut out = Vec::with_capacity(inputs.len());
    let mut z = vec![0.0; layout.lstm_outputs()];
    for &x in inputs {
        let mut u = Vec::with_capacity(layout.lstm_inputs());
        u.extend_from_slice(&state.h);
        u.push(x);
        u.push(1.0);
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = u.iter().enumerate().map(|(i, ui)| ui * w.lstm[[i, j]]).sum();
        }
        let gates = gates_from_preactivations(&z, layout);
        let next = cell_update(&gates, &state);
        let y = next.h.iter().enumerate().map(|(k, h)| h * w.dense[k]).sum::<f64>() + w.dense[n];
        out.push(StepCache {
            u,
            tanh_c: next.c.iter().map(|c| c.tanh()).collect(),
            c_prev: std::mem::take(&mut state.c),
            a: gates.a,
            i: gates.i,
            o: gates.o,
            f: gates.f,
            h: next.h.clone(),
            y,
        });
        state = next;
    }
    out
}

/// Noise-free digital forward pass over `inputs` from a zero state.
pub fn forward_digital(w: &WeightView, layout: &NetworkLayout, inputs: &[f64]) -> Vec<f64> {
    forward_cached(w, layout, inputs).iter().map(|s| s.y).collect()
}

/// Full backpropagation through time of `mean((y - target)^2)`.
pub fn bptt_gradients(
    w: &WeightView,
    layout: &NetworkLayout,
    inputs: &[f64],
    targets: &[f64],
) -> Result<WeightView> {
    check_sequence(inputs, targets)?;
    let weight = 1.0 / inputs.len() as f64;
    let weights = vec![weight; inputs.len()];
    Ok(bptt_weighted(w, layout, inputs, targets, &weights))
}

fn check_sequence(inputs: &[f64], targets: &[f64]) -> Result<()> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::domain(format!(
            "inputs and targets must be equally long and nonempty, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Gradient of `sum_t step_weight[t] * (y_t - target_t)^2`.
fn bptt_weighted(
    w: &WeightView,
    layout: &NetworkLayout,
    inputs: &[f64],
    targets: &[f64],
    step_weight: &[f64],
) -> WeightView {
    let n = layout.n_hidden;
    let cache = forward_cached(w, layout, inputs);
    let mut grad = WeightView::zeros(layout);
    let cols = |g: Gate| layout.gate_columns(g);
    let (ca, ci, co, cf) = (
        cols(Gate::Activation),
        cols(Gate::Input),
        cols(Gate::Output),
        cols(Gate::Forget),
    );

    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let mut dz = vec![0.0; layout.lstm_outputs()];
    for t in (0..cache.len()).rev() {
        let s = &cache[t];
        let dy = 2.0 * step_weight[t] * (s.y - targets[t]);
        for k in 0..n {
            grad.dense[k] += dy * s.h[k];
        }
        grad.dense[n] += dy;

        for k in 0..n {
            let dh = dy * w.dense[k] + dh_next[k];
            let dc = dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
            let d_o = dh * s.tanh_c[k];
            let d_a = dc * s.i[k];
            let d_i = dc * s.a[k];
            let d_f = dc * s.c_prev[k];
            dc_next[k] = dc * s.f[k];
            dz[ca.start + k] = d_a * (1.0 - s.a[k] * s.a[k]);
            dz[ci.start + k] = d_i * s.i[k] * (1.0 - s.i[k]);
            dz[co.start + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            dz[cf.start + k] = d_f * s.f[k] * (1.0 - s.f[k]);
        }
        for (i, ui) in s.u.iter().enumerate() {
            if *ui != 0.0 {
                for (j, dzj) in dz.iter().enumerate() {
                    grad.lstm[[i, j]] += ui * dzj;
                }
            }
        }
        for (k, dh) in dh_next.iter_mut().enumerate() {
            *dh = dz.iter().enumerate().map(|(j, dzj)| w.lstm[[k, j]] * dzj).sum();
        }
    }
    grad
}

/// `dW(t) = alpha * GRAD + eta * dW(t-1)`; the carrier is replaced by `dW(t)`.
pub fn momentum_update<'a>(state: &'a mut GradientTensors, cfg: &TrainingConfig) -> &'a WeightView {
    let GradientTensors { grad, momentum } = state;
    momentum
        .lstm
        .zip_mut_with(&grad.lstm, |m, g| *m = cfg.alpha * g + cfg.eta * *m);
    momentum
        .dense
        .zip_mut_with(&grad.dense, |m, g| *m = cfg.alpha * g + cfg.eta * *m);
    &state.momentum
}

/// Which device of a differential pair receives a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairDevice {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseCommand {
    pub device: PairDevice,
    pub pulse: PulseSpec,
}

/// Sign-only pulse choice for a desired weight change: positive potentiates
/// G+, negative potentiates G-, zero issues nothing.
pub fn select_pulse(delta_w: f64, cfg: &TrainingConfig) -> Option<PulseCommand> {
    let device = if delta_w > 0.0 {
        PairDevice::Plus
    } else if delta_w < 0.0 {
        PairDevice::Minus
    } else {
        return None;
    };
    Some(PulseCommand {
        device,
        pulse: cfg.set_pulse(),
    })
}

/// Redirects a set pulse aimed at a saturated device to a reset pulse on its
/// partner, which moves the weight the same way.
pub fn resolve_saturation(
    cmd: PulseCommand,
    g_plus: f64,
    g_minus: f64,
    params: &DeviceParams,
    cfg: &TrainingConfig,
) -> PulseCommand {
    let target = match cmd.device {
        PairDevice::Plus => g_plus,
        PairDevice::Minus => g_minus,
    };
    let headroom = (params.g_max - target) / params.range();
    if headroom < cfg.saturation_headroom {
        PulseCommand {
            device: match cmd.device {
                PairDevice::Plus => PairDevice::Minus,
                PairDevice::Minus => PairDevice::Plus,
            },
            pulse: cfg.reset_pulse(),
        }
    } else {
        cmd
    }
}

/// Issues one pulse per weight whose desired change is nonzero. The desired
/// change is `-dW(t)`, the descent direction.
pub fn apply_manhattan_update<R: rand::Rng + ?Sized>(
    xb: &mut CrossbarArray,
    layout: &NetworkLayout,
    cfg: &TrainingConfig,
    delta: &WeightView,
    rng: &mut R,
) -> Result<()> {
    let params = xb.params;
    for (idx, (rp, rm, col)) in layout.weight_cells() {
        let Some(cmd) = select_pulse(-delta.get(idx), cfg) else {
            continue;
        };
        let cmd = resolve_saturation(cmd, xb.g(rp, col), xb.g(rm, col), &params, cfg);
        let row = match cmd.device {
            PairDevice::Plus => rp,
            PairDevice::Minus => rm,
        };
        xb.program_pulse(row, col, &cmd.pulse, rng)?;
    }
    Ok(())
}

/// One training epoch on the crossbar. The recorded loss comes from the
/// analog forward pass; gradients come from the noise-free weight view.
pub fn train_epoch(
    xb: &mut CrossbarArray,
    layout: &NetworkLayout,
    cfg: &TrainingConfig,
    data: &SupervisedPairs,
    grad_state: &mut GradientTensors,
    streams: &mut Streams,
    epoch: usize,
) -> Result<EpochRecord> {
    check_sequence(&data.inputs, &data.targets)?;
    let pred = network::forward_sequence(xb, layout, &data.inputs, &mut streams.read)?;
    let train_mse = mse_loss(&pred, &data.targets)?;

    match cfg.granularity {
        Granularity::PerEpoch => {
            let w = network::weight_view(xb, layout);
            grad_state.grad = bptt_gradients(&w, layout, &data.inputs, &data.targets)?;
            let delta = momentum_update(grad_state, cfg).clone();
            apply_manhattan_update(xb, layout, cfg, &delta, &mut streams.c2c)?;
        }
        Granularity::PerSample => {
            for t in 0..data.len() {
                let w = network::weight_view(xb, layout);
                grad_state.grad = per_sample_gradient(&w, layout, data, t);
                let delta = momentum_update(grad_state, cfg).clone();
                apply_manhattan_update(xb, layout, cfg, &delta, &mut streams.c2c)?;
            }
        }
    }

    let e = xb.ledger.close_epoch();
    Ok(EpochRecord {
        epoch,
        train_mse,
        energy_j: e.energy,
        pulses_set: e.pulses_set,
        pulses_reset: e.pulses_reset,
    })
}

fn per_sample_gradient(w: &WeightView, layout: &NetworkLayout, data: &SupervisedPairs, t: usize) -> WeightView {
    let mut step_weight = vec![0.0; t + 1];
    step_weight[t] = 1.0;
    bptt_weighted(w, layout, &data.inputs[..=t], &data.targets[..=t], &step_weight)
}

/// Initial logical weights for a seed: the decoded view of a freshly
/// initialized array, so the digital baseline starts where the crossbar
/// variants start.
pub fn initial_weights(seed: u64, layout: &NetworkLayout, params: &DeviceParams) -> Result<WeightView> {
    let xb = CrossbarArray::init_random(
        layout.array_rows,
        layout.array_cols,
        *params,
        NoiseFlags::OFF,
        &mut Streams::from_seed(seed),
    )?;
    Ok(network::weight_view(&xb, layout))
}

/// Loss curve and final weights of a float-precision run.
#[derive(Debug, Clone)]
pub struct DigitalRun {
    pub history: Vec<EpochRecord>,
    pub weights: WeightView,
}

/// Continuous SGD-with-momentum (`W <- W - dW(t)`) on the same architecture.
pub fn train_digital_baseline(
    cfg: &TrainingConfig,
    layout: &NetworkLayout,
    initial: WeightView,
    data: &SupervisedPairs,
) -> Result<DigitalRun> {
    check_sequence(&data.inputs, &data.targets)?;
    let mut w = initial;
    let mut state = GradientTensors::zeros(layout);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let pred = forward_digital(&w, layout, &data.inputs);
        let train_mse = mse_loss(&pred, &data.targets)?;
        match cfg.granularity {
            Granularity::PerEpoch => {
                state.grad = bptt_gradients(&w, layout, &data.inputs, &data.targets)?;
                descend(&mut w, momentum_update(&mut state, cfg));
            }
            Granularity::PerSample => {
                for t in 0..data.len() {
                    state.grad = per_sample_gradient(&w, layout, data, t);
                    descend(&mut w, momentum_update(&mut state, cfg));
                }
            }
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            energy_j: 0.0,
            pulses_set: 0,
            pulses_reset: 0,
        });
    }
    Ok(DigitalRun { history, weights: w })
}

fn descend(w: &mut WeightView, delta: &WeightView) {
    w.lstm -= &delta.lstm;
    w.dense -= &delta.dense;
}

/// Expected noise-free weight change of a resolved command, used for
/// diagnostics and tests.
pub fn expected_weight_change(
    cmd: &PulseCommand,
    g_plus: f64,
    g_minus: f64,
    params: &DeviceParams,
    g2w_ratio: f64,
) -> Result<f64> {
    let g = match cmd.device {
        PairDevice::Plus => g_plus,
        PairDevice::Minus => g_minus,
    };
    let dg = device::expected_update(params, g, &cmd.pulse)?;
    let sign = match cmd.device {
        PairDevice::Plus => 1.0,
        PairDevice::Minus => -1.0,
    };
    Ok(sign * dg / g2w_ratio)
}

/// All logical weight indices in update order.
pub fn weight_indices(layout: &NetworkLayout) -> Vec<WeightIndex> {
    layout.weight_cells().map(|(i, _)| i).collect()
}
