//! Phenomenological model of one passive-crossbar RRAM cell.
//!
//! The static read is `g * (1 + nu)` with optional Gaussian read noise. The
//! dynamic response to a fixed programming pulse is a saturating power-law
//! window
//!
//! ```text
//! set:   D_m = +a_set   * ((g_max - g) / (g_max - g_min))^gamma
//! reset: D_m = -a_reset * ((g - g_min) / (g_max - g_min))^gamma
//! ```
//!
//! scaled by a frozen per-device factor (device-to-device spread) and
//! perturbed by zero-mean noise proportional to `|D_m|` (cycle-to-cycle
//! spread). Every constant lives in [`DeviceParams`] so the window can be
//! recalibrated against measured switching data.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to match a pulse amplitude to the calibrated
/// set/reset voltages.
const AMPLITUDE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Lower conductance bound (S).
    pub g_min: f64,
    /// Upper conductance bound (S).
    pub g_max: f64,
    /// Largest set step, reached at `g = g_min` (S).
    pub a_set: f64,
    /// Largest reset step, reached at `g = g_max` (S).
    pub a_reset: f64,
    /// Window nonlinearity exponent.
    pub gamma: f64,
    /// Relative std of the frozen per-device step factor.
    pub sigma_d2d: f64,
    /// Relative std of per-pulse step noise.
    pub sigma_c2c: f64,
    /// Relative std of read noise.
    pub sigma_read: f64,
    /// Set amplitude the window is calibrated for (V, positive).
    pub v_set: f64,
    /// Reset amplitude the window is calibrated for (V, negative).
    pub v_reset: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            g_min: 100e-6,
            g_max: 300e-6,
            a_set: 4e-6,
            a_reset: 4e-6,
            gamma: 2.0,
            sigma_d2d: 0.2,
            sigma_c2c: 0.1,
            sigma_read: 0.01,
            v_set: 0.8,
            v_reset: -0.8,
        }
    }
}

impl DeviceParams {
    /// Returns one message per violated invariant.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = [
            ("device.g_min", self.g_min),
            ("device.g_max", self.g_max),
            ("device.a_set", self.a_set),
            ("device.a_reset", self.a_reset),
            ("device.gamma", self.gamma),
            ("device.sigma_d2d", self.sigma_d2d),
            ("device.sigma_c2c", self.sigma_c2c),
            ("device.sigma_read", self.sigma_read),
            ("device.v_set", self.v_set),
            ("device.v_reset", self.v_reset),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                out.push(format!("{name} must be finite, got {v}"));
            }
        }
        if !(self.g_min > 0.0 && self.g_min < self.g_max) {
            out.push(format!(
                "device.g_min/g_max must satisfy 0 < g_min < g_max, got {} / {}",
                self.g_min, self.g_max
            ));
        }
        if !(self.a_set > 0.0) {
            out.push(format!("device.a_set must be > 0, got {}", self.a_set));
        }
        if !(self.a_reset > 0.0) {
            out.push(format!("device.a_reset must be > 0, got {}", self.a_reset));
        }
        if !(self.gamma >= 0.0) {
            out.push(format!("device.gamma must be >= 0, got {}", self.gamma));
        }
        for (name, s) in [
            ("device.sigma_d2d", self.sigma_d2d),
            ("device.sigma_c2c", self.sigma_c2c),
            ("device.sigma_read", self.sigma_read),
        ] {
            if !(s >= 0.0) {
                out.push(format!("{name} must be >= 0, got {s}"));
            }
        }
        if !(self.v_set > 0.0) {
            out.push(format!("device.v_set must be > 0, got {}", self.v_set));
        }
        if !(self.v_reset < 0.0) {
            out.push(format!("device.v_reset must be < 0, got {}", self.v_reset));
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

    pub fn range(&self) -> f64 {
        self.g_max - self.g_min
    }

    pub fn contains(&self, g: f64) -> bool {
        g >= self.g_min && g <= self.g_max
    }

    fn check_conductance(&self, g: f64) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "conductance {g:e} S outside [{:e}, {:e}] S",
                self.g_min, self.g_max
            )))
        }
    }

    /// Classifies a pulse as set or reset, rejecting amplitudes the window is
    /// not calibrated for.
    pub fn polarity(&self, pulse: &PulseSpec) -> Result<Polarity> {
        let close = |a: f64, b: f64| (a - b).abs() <= AMPLITUDE_RTOL * b.abs();
        if close(pulse.amplitude, self.v_set) {
            Ok(Polarity::Set)
        } else if close(pulse.amplitude, self.v_reset) {
            Ok(Polarity::Reset)
        } else {
            Err(Error::domain(format!(
                "pulse amplitude {} V is neither v_set ({} V) nor v_reset ({} V)",
                pulse.amplitude, self.v_set, self.v_reset
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Potentiation.
    Set,
    /// Depression.
    Reset,
}

/// A single fixed-amplitude programming pulse. Positive amplitude sets,
/// negative amplitude resets; "no pulse" is `Option::None`, never a zero
/// amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Signed amplitude (V).
    pub amplitude: f64,
    /// Duration (s).
    pub duration: f64,
}

impl PulseSpec {
    pub fn new(amplitude: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::domain(format!(
                "pulse duration must be > 0, got {duration}"
            )));
        }
        if amplitude == 0.0 || !amplitude.is_finite() {
            return Err(Error::domain(format!(
                "pulse amplitude must be nonzero and finite, got {amplitude}"
            )));
        }
        Ok(PulseSpec {
            amplitude,
            duration,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFlags {
    pub d2d_enabled: bool,
    pub c2c_enabled: bool,
    pub read_noise_enabled: bool,
}

impl NoiseFlags {
    pub const OFF: NoiseFlags = NoiseFlags {
        d2d_enabled: false,
        c2c_enabled: false,
        read_noise_enabled: false,
    };

    pub const ALL: NoiseFlags = NoiseFlags {
        d2d_enabled: true,
        c2c_enabled: true,
        read_noise_enabled: true,
    };

    pub fn any(&self) -> bool {
        self.d2d_enabled || self.c2c_enabled || self.read_noise_enabled
    }
}

/// One cell: stored conductance and its frozen step factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState {
    /// Conductance (S).
    pub g: f64,
    /// Per-device multiplicative step factor, > 0.
    pub k_dev: f64,
}

impl DeviceState {
    /// A device without device-to-device spread (`k_dev = 1`).
    pub fn nominal(params: &DeviceParams, g0: f64) -> Result<Self> {
        params.check_conductance(g0)?;
        Ok(DeviceState { g: g0, k_dev: 1.0 })
    }
}

/// Creates a device at `g0` with its step factor drawn from
/// `Normal(1, sigma_d2d)`, redrawn until positive.
pub fn sample_device<R: Rng + ?Sized>(
    params: &DeviceParams,
    g0: f64,
    rng: &mut R,
) -> Result<DeviceState> {
    params.check_conductance(g0)?;
    let k_dev = sample_step_factor(params.sigma_d2d, rng);
    Ok(DeviceState { g: g0, k_dev })
}

fn sample_step_factor<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let dist = Normal::new(1.0, sigma).expect("sigma_d2d validated finite and >= 0");
    loop {
        let k = dist.sample(rng);
        if k > 0.0 {
            return k;
        }
    }
}

/// Noise-free expected conductance change `D_m` for one pulse at `g0`.
pub fn expected_update(params: &DeviceParams, g0: f64, pulse: &PulseSpec) -> Result<f64> {
    params.check_conductance(g0)?;
    let polarity = params.polarity(pulse)?;
    Ok(window_step(params, g0, polarity))
}

pub(crate) fn window_step(params: &DeviceParams, g0: f64, polarity: Polarity) -> f64 {
    let range = params.range();
    match polarity {
        Polarity::Set => {
            let headroom = ((params.g_max - g0) / range).clamp(0.0, 1.0);
            params.a_set * headroom.powf(params.gamma)
        }
        Polarity::Reset => {
            let headroom = ((g0 - params.g_min) / range).clamp(0.0, 1.0);
            -params.a_reset * headroom.powf(params.gamma)
        }
    }
}

/// Applies one pulse. Returns the updated state and the realized
/// (post-clamp) conductance change.
pub fn apply_pulse<R: Rng + ?Sized>(
    state: DeviceState,
    params: &DeviceParams,
    pulse: &PulseSpec,
    flags: NoiseFlags,
    rng: &mut R,
) -> Result<(DeviceState, f64)> {
    let d_m = expected_update(params, state.g, pulse)?;
    let k = if flags.d2d_enabled { state.k_dev } else { 1.0 };
    let mut delta = k * d_m;
    if flags.c2c_enabled {
        let z: f64 = StandardNormal.sample(rng);
        delta += params.sigma_c2c * d_m.abs() * z;
    }
    let g = (state.g + delta).clamp(params.g_min, params.g_max);
    Ok((DeviceState { g, ..state }, g - state.g))
}

/// Static read of the stored conductance, optionally with multiplicative
/// Gaussian read noise. Always strictly positive.
pub fn read_conductance<R: Rng + ?Sized>(
    state: &DeviceState,
    params: &DeviceParams,
    flags: NoiseFlags,
    rng: &mut R,
) -> f64 {
    if !flags.read_noise_enabled {
        return state.g;
    }
    noisy_read(state.g, params.sigma_read, rng)
}

#[inline]
pub(crate) fn noisy_read<R: Rng + ?Sized>(g: f64, sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (g * (1.0 + sigma * z)).max(f64::MIN_POSITIVE)
}
