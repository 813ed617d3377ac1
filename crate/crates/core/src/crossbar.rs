//! Passive RRAM crossbar: analog VMM in both directions, pulse programming
//! with an energy ledger, the LSTM/dense partition map and area arithmetic.

use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::device::{self, DeviceParams, DeviceState, NoiseFlags, Polarity, PulseSpec};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::output::sig9;
use crate::rng::{self, Streams};

/// Largest read voltage magnitude accepted by the VMM routines (V).
pub const DEFAULT_READ_LIMIT: f64 = 0.2;

/// Blocks smaller than this are always sensed sequentially; thread hand-off
/// costs more than the multiply-accumulate work below it.
pub const PARALLEL_MIN_CELLS: usize = 1 << 14;

/// A rectangle of cells, in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn new(row: usize, col: usize, rows: usize, cols: usize) -> Self {
        Block {
            row,
            col,
            rows,
            cols,
        }
    }

    pub fn fits(&self, n_rows: usize, n_cols: usize) -> bool {
        self.rows > 0
            && self.cols > 0
            && self.row + self.rows <= n_rows
            && self.col + self.cols <= n_cols
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

/// Placement of the LSTM (34x60) and dense (32x1) weight blocks on one array.
/// The blocks share rows and are time-multiplexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionMap {
    pub lstm_block: Block,
    pub dense_block: Block,
}

impl PartitionMap {
    pub const LSTM_ROWS: usize = 34;
    pub const LSTM_COLS: usize = 60;
    pub const DENSE_ROWS: usize = 32;
    pub const DENSE_COLS: usize = 1;

    pub fn new(lstm_at: (usize, usize), dense_at: (usize, usize)) -> Self {
        PartitionMap {
            lstm_block: Block::new(lstm_at.0, lstm_at.1, Self::LSTM_ROWS, Self::LSTM_COLS),
            dense_block: Block::new(dense_at.0, dense_at.1, Self::DENSE_ROWS, Self::DENSE_COLS),
        }
    }

    pub fn validate(&self, n_rows: usize, n_cols: usize) -> Result<()> {
        for (name, b) in [("lstm", self.lstm_block), ("dense", self.dense_block)] {
            if !b.fits(n_rows, n_cols) {
                return Err(Error::domain(format!(
                    "{name} block {b:?} does not fit a {n_rows}x{n_cols} array"
                )));
            }
        }
        let cols_overlap = self.lstm_block.col < self.dense_block.col + self.dense_block.cols
            && self.dense_block.col < self.lstm_block.col + self.lstm_block.cols;
        if cols_overlap {
            return Err(Error::domain(
                "lstm and dense blocks share columns; they can only share rows",
            ));
        }
        Ok(())
    }
}

impl Default for PartitionMap {
    /// LSTM block at rows 0-33, cols 0-59; dense block at rows 0-31, col 60.
    fn default() -> Self {
        PartitionMap::new((0, 0), (0, 60))
    }
}

/// Programming-energy bookkeeping, per epoch and cumulative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub pulse_count_set: u64,
    pub pulse_count_reset: u64,
    pub energy_per_epoch: Vec<f64>,
    pub cumulative_energy: f64,
    open_energy: f64,
    open_set: u64,
    open_reset: u64,
}

/// Totals for one closed epoch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpochEnergy {
    pub energy: f64,
    pub pulses_set: u64,
    pub pulses_reset: u64,
}

impl EnergyLedger {
    fn record(&mut self, polarity: Polarity, energy: f64) {
        self.open_energy += energy;
        match polarity {
            Polarity::Set => {
                self.pulse_count_set += 1;
                self.open_set += 1;
            }
            Polarity::Reset => {
                self.pulse_count_reset += 1;
                self.open_reset += 1;
            }
        }
    }

    /// Energy of pulses issued since the last [`close_epoch`](Self::close_epoch).
    pub fn open_epoch_energy(&self) -> f64 {
        self.open_energy
    }

    /// Seals the running epoch and appends it to the per-epoch series.
    pub fn close_epoch(&mut self) -> EpochEnergy {
        let closed = EpochEnergy {
            energy: self.open_energy,
            pulses_set: self.open_set,
            pulses_reset: self.open_reset,
        };
        self.energy_per_epoch.push(closed.energy);
        self.cumulative_energy += closed.energy;
        self.open_energy = 0.0;
        self.open_set = 0;
        self.open_reset = 0;
        closed
    }

    pub fn total_pulses(&self) -> u64 {
        self.pulse_count_set + self.pulse_count_reset
    }

    /// Writes `epoch,energy_J,cumulative_J`, one row per closed epoch,
    /// epochs numbered from 1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "energy_J", "cumulative_J"])?;
        let mut cumulative = 0.0;
        for (i, e) in self.energy_per_epoch.iter().enumerate() {
            cumulative += e;
            w.write_record([(i + 1).to_string(), sig9(*e), sig9(cumulative)])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Programming energy of one pulse applied to a cell storing `g_before`.
#[inline]
pub fn pulse_energy(pulse: &PulseSpec, g_before: f64) -> f64 {
    pulse.amplitude * pulse.amplitude * g_before * pulse.duration
}

#[derive(Debug, Clone)]
pub struct CrossbarArray {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<DeviceState>,
    pub params: DeviceParams,
    pub flags: NoiseFlags,
    pub ledger: EnergyLedger,
    read_limit: f64,
    exec: Exec,
}

impl CrossbarArray {
    /// Uniform random conductances in `[g_min, g_max]` drawn from the init
    /// stream; step factors drawn from the d2d stream when that flag is set.
    pub fn init_random(
        n_rows: usize,
        n_cols: usize,
        params: DeviceParams,
        flags: NoiseFlags,
        streams: &mut Streams,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::domain(format!(
                "crossbar dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        params.validate()?;
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for _ in 0..n_rows * n_cols {
            let g0 = streams.init.random_range(params.g_min..=params.g_max);
            let cell = if flags.d2d_enabled {
                device::sample_device(&params, g0, &mut streams.d2d)?
            } else {
                DeviceState::nominal(&params, g0)?
            };
            cells.push(cell);
        }
        Ok(Self::from_cells(n_rows, n_cols, cells, params, flags))
    }

    /// Every cell at conductance `g` with unit step factor.
    pub fn uniform(
        n_rows: usize,
        n_cols: usize,
        g: f64,
        params: DeviceParams,
        flags: NoiseFlags,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::domain("crossbar dimensions must be positive"));
        }
        let cell = DeviceState::nominal(&params, g)?;
        Ok(Self::from_cells(
            n_rows,
            n_cols,
            vec![cell; n_rows * n_cols],
            params,
            flags,
        ))
    }

    fn from_cells(
        n_rows: usize,
        n_cols: usize,
        cells: Vec<DeviceState>,
        params: DeviceParams,
        flags: NoiseFlags,
    ) -> Self {
        CrossbarArray {
            n_rows,
            n_cols,
            cells,
            params,
            flags,
            ledger: EnergyLedger::default(),
            read_limit: DEFAULT_READ_LIMIT,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_read_limit(mut self, limit: f64) -> Self {
        self.read_limit = limit;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn full_block(&self) -> Block {
        Block::new(0, 0, self.n_rows, self.n_cols)
    }

    fn index(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.n_rows || col >= self.n_cols {
            return Err(Error::domain(format!(
                "cell ({row}, {col}) outside {}x{} array",
                self.n_rows, self.n_cols
            )));
        }
        Ok(row * self.n_cols + col)
    }

    pub fn cell(&self, row: usize, col: usize) -> Result<&DeviceState> {
        let i = self.index(row, col)?;
        Ok(&self.cells[i])
    }

    /// Stored (noise-free) conductance.
    #[inline]
    pub fn g(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.n_cols + col].g
    }

    /// Overwrites a cell's conductance, e.g. to set up a known array state.
    pub fn set_conductance(&mut self, row: usize, col: usize, g: f64) -> Result<()> {
        let i = self.index(row, col)?;
        if !self.params.contains(g) {
            return Err(Error::domain(format!("conductance {g:e} S out of bounds")));
        }
        self.cells[i].g = g;
        Ok(())
    }

    pub fn set_step_factor(&mut self, row: usize, col: usize, k_dev: f64) -> Result<()> {
        let i = self.index(row, col)?;
        if !(k_dev > 0.0) {
            return Err(Error::domain("step factor must be positive"));
        }
        self.cells[i].k_dev = k_dev;
        Ok(())
    }

    /// Row-major snapshot of stored conductances.
    pub fn conductances(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.g).collect()
    }

    fn check_voltages(&self, v: &[f64], expected: usize) -> Result<()> {
        if v.len() != expected {
            return Err(Error::domain(format!(
                "input has {} entries, expected {expected}",
                v.len()
            )));
        }
        if let Some((i, x)) = v
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.abs() <= self.read_limit))
        {
            return Err(Error::domain(format!(
                "read voltage {x} V at line {i} exceeds the {} V read limit",
                self.read_limit
            )));
        }
        Ok(())
    }

    fn block_exec(&self, block: &Block) -> Exec {
        if block.cells() >= PARALLEL_MIN_CELLS {
            self.exec
        } else {
            Exec::Sequential
        }
    }

    /// Column currents of the whole array for row voltages `v_in`.
    pub fn vmm_rows_to_cols<R: RngCore + ?Sized>(&self, v_in: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.sense_cols(v_in, &self.full_block(), rng)
    }

    /// Row currents of the whole array for column voltages `v_in`.
    pub fn vmm_cols_to_rows<R: RngCore + ?Sized>(&self, v_in: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.sense_rows(v_in, &self.full_block(), rng)
    }

    /// Drives the rows of `block` with `v_rows` (all other rows grounded) and
    /// senses each column of `block` at virtual ground.
    ///
    /// With read noise on, one seed is drawn from `rng` and column `c` reads
    /// through child stream `c`, so the result does not depend on the order
    /// in which columns are evaluated.
    pub fn sense_cols<R: RngCore + ?Sized>(
        &self,
        v_rows: &[f64],
        block: &Block,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_block(block)?;
        self.check_voltages(v_rows, block.rows)?;
        let noise = self.read_noise_seed(rng);
        let sigma = self.params.sigma_read;
        let mut out = vec![0.0; block.cols];
        self.block_exec(block).fill(&mut out, |j| {
            let col = block.col + j;
            let mut acc = 0.0;
            match noise {
                None => {
                    for (i, v) in v_rows.iter().enumerate() {
                        acc += v * self.g(block.row + i, col);
                    }
                }
                Some(base) => {
                    let mut r = rng::child(base, col as u64);
                    for (i, v) in v_rows.iter().enumerate() {
                        acc += v * device::noisy_read(self.g(block.row + i, col), sigma, &mut r);
                    }
                }
            }
            acc
        });
        Ok(out)
    }

    /// Transposed read: drives the columns of `block` and senses its rows.
    pub fn sense_rows<R: RngCore + ?Sized>(
        &self,
        v_cols: &[f64],
        block: &Block,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_block(block)?;
        self.check_voltages(v_cols, block.cols)?;
        let noise = self.read_noise_seed(rng);
        let sigma = self.params.sigma_read;
        let mut out = vec![0.0; block.rows];
        self.block_exec(block).fill(&mut out, |i| {
            let row = block.row + i;
            let mut acc = 0.0;
            match noise {
                None => {
                    for (j, v) in v_cols.iter().enumerate() {
                        acc += v * self.g(row, block.col + j);
                    }
                }
                Some(base) => {
                    let mut r = rng::child(base, row as u64);
                    for (j, v) in v_cols.iter().enumerate() {
                        acc += v * device::noisy_read(self.g(row, block.col + j), sigma, &mut r);
                    }
                }
            }
            acc
        });
        Ok(out)
    }

    fn check_block(&self, block: &Block) -> Result<()> {
        if block.fits(self.n_rows, self.n_cols) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "block {block:?} outside {}x{} array",
                self.n_rows, self.n_cols
            )))
        }
    }

    fn read_noise_seed<R: RngCore + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        self.flags.read_noise_enabled.then(|| rng.next_u64())
    }

    /// Applies one pulse to a cell and books its energy
    /// `amplitude^2 * g_before * duration`. Returns the realized change.
    pub fn program_pulse<R: Rng + ?Sized>(
        &mut self,
        row: usize,
        col: usize,
        pulse: &PulseSpec,
        rng: &mut R,
    ) -> Result<f64> {
        let i = self.index(row, col)?;
        let polarity = self.params.polarity(pulse)?;
        let before = self.cells[i];
        let (after, delta) = device::apply_pulse(before, &self.params, pulse, self.flags, rng)?;
        self.cells[i] = after;
        self.ledger.record(polarity, pulse_energy(pulse, before.g));
        Ok(delta)
    }

    /// Writes the stored conductances, one CSV line per crossbar row, in
    /// siemens with 9 significant digits.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for row in self.cells.chunks(self.n_cols) {
            let line: Vec<String> = row.iter().map(|c| sig9(c.g)).collect();
            writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Passive vs active (1T-1R) footprint of an `n_rows x n_cols` array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub n_rows: usize,
    pub n_cols: usize,
    /// µm²
    pub passive_area: f64,
    /// µm²
    pub active_area: f64,
    /// active / passive
    pub ratio: f64,
}

/// Passive cell footprint, 0.6 µm x 0.6 µm.
pub const PASSIVE_CELL_AREA_UM2: f64 = 0.36;
/// 1T-1R cell footprint, 59 µm x 40 µm.
pub const ACTIVE_CELL_AREA_UM2: f64 = 2360.0;

pub fn area_report(
    n_rows: usize,
    n_cols: usize,
    passive_cell_area: f64,
    active_cell_area: f64,
) -> Result<AreaReport> {
    if n_rows == 0 || n_cols == 0 || !(passive_cell_area > 0.0) || !(active_cell_area > 0.0) {
        return Err(Error::domain(
            "area report needs positive dimensions and cell areas",
        ));
    }
    let cells = (n_rows * n_cols) as f64;
    let passive_area = cells * passive_cell_area;
    let active_area = cells * active_cell_area;
    Ok(AreaReport {
        n_rows,
        n_cols,
        passive_area,
        active_area,
        ratio: active_area / passive_area,
    })
}
