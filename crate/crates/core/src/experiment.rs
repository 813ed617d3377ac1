//! End-to-end runs of the digital, ideal-crossbar and noisy-crossbar
//! variants, their report artifacts, and the passive vs 1T-1R comparison.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Variant};
use crate::crossbar::{self, AreaReport, CrossbarArray};
use crate::data::{self, SupervisedPairs, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::network::{self, NetworkLayout};
use crate::output::{create_dir, sig9, write_csv};
use crate::rng::Streams;
use crate::training::{self, EpochRecord, GradientTensors};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    pub normalized: f64,
    pub passengers: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub total_j: f64,
    pub per_epoch_csv: String,
    pub pulses_set: u64,
    pub pulses_reset: u64,
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub epochs: usize,
    pub loss_curve: Vec<f64>,
    /// Training MSE after the last update.
    pub final_train_mse: f64,
    pub train_rmse: Rmse,
    pub test_rmse: Rmse,
    pub energy: Option<EnergySummary>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: Variant,
    pub seed: u64,
    pub replicas: usize,
    /// Flat config echo; re-running from it reproduces this report.
    pub config: BTreeMap<String, String>,
    pub layout: NetworkLayout,
    pub runs: Vec<RunSummary>,
    /// Normalized test RMSE across replicas.
    pub test_rmse_spread: Spread,
    pub area: AreaReport,
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn median_test_rmse(&self) -> f64 {
        self.test_rmse_spread.median
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn spread(values: &[f64]) -> Spread {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    Spread {
        median: quantile(&v, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
    }
}

/// Runs the configured variant for every replica seed and writes all
/// artifacts under `cfg.output_dir`. Replicas run on separate threads when
/// `exec` is parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_with(cfg, Exec::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Exec) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let r = cfg.resolved();
    let ds = TimeSeriesDataset::load(&r.data_path)?;
    let out = r.output_dir.clone();
    create_dir(&out)?;

    let replica_dirs: Vec<PathBuf> = if r.replicas == 1 {
        vec![out.clone()]
    } else {
        (0..r.replicas)
            .map(|k| out.join(format!("replica_{k:03}")))
            .collect()
    };
    let results = exec.map_range(r.replicas, |k| {
        let seed = r.seed.wrapping_add(k as u64);
        run_single(&r, &ds, seed, &replica_dirs[k])
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let test: Vec<f64> = runs.iter().map(|s| s.test_rmse.normalized).collect();
    let area = crossbar::area_report(
        r.area_rows,
        r.area_cols,
        crossbar::PASSIVE_CELL_AREA_UM2,
        crossbar::ACTIVE_CELL_AREA_UM2,
    )?;

    let config_path = out.join("config.txt");
    std::fs::write(&config_path, cfg.to_text()).map_err(|e| Error::io(&config_path, e))?;
    let report_path = out.join("report.json");
    let mut files: Vec<String> = runs.iter().flat_map(|s| s.files.iter().cloned()).collect();
    files.push(config_path.display().to_string());
    files.push(report_path.display().to_string());

    let report = RunReport {
        variant: r.variant,
        seed: r.seed,
        replicas: r.replicas,
        config: cfg.to_entries(),
        layout: r.layout,
        test_rmse_spread: spread(&test),
        runs,
        area,
        files,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&report_path, json).map_err(|e| Error::io(&report_path, e))?;
    Ok(report)
}

/// Trained model of either kind, ready for inference.
enum Trained {
    Digital(network::WeightView),
    Crossbar(Box<(CrossbarArray, Streams)>),
}

fn run_single(cfg: &ExperimentConfig, ds: &TimeSeriesDataset, seed: u64, dir: &Path) -> Result<RunSummary> {
    create_dir(dir)?;
    let (train, _) = data::make_supervised(ds);
    let mut tcfg = cfg.training;
    tcfg.seed = seed;
    let layout = &cfg.layout;
    let tag = cfg.variant.as_str();
    let mut files = Vec::new();

    let (history, trained) = match cfg.variant {
        Variant::Digital => {
            let w0 = training::initial_weights(seed, layout, &cfg.device)?;
            let run = training::train_digital_baseline(&tcfg, layout, w0, &train)?;
            (run.history, Trained::Digital(run.weights))
        }
        Variant::CrossbarIdeal | Variant::CrossbarNoisy => {
            let mut streams = Streams::from_seed(seed);
            let mut xb = CrossbarArray::init_random(
                layout.array_rows,
                layout.array_cols,
                cfg.device,
                tcfg.flags,
                &mut streams,
            )?
            .with_read_limit(cfg.read_limit)
            .with_exec(Exec::Sequential);
            let history = train_crossbar(&mut xb, cfg, &tcfg, &train, &mut streams, dir, &mut files)?;

            let energy_path = dir.join(format!("energy_{tag}.csv"));
            xb.ledger.write_csv(&energy_path)?;
            files.push(energy_path.display().to_string());
            (history, Trained::Crossbar(Box::new((xb, streams))))
        }
    };

    let loss_path = dir.join(format!("loss_{tag}.csv"));
    write_csv(
        &loss_path,
        &["epoch", "train_mse"],
        history.iter().map(|r| [r.epoch.to_string(), sig9(r.train_mse)]),
    )?;
    files.push(loss_path.display().to_string());

    // Warm-started inference over the whole series: the test segment
    // continues from the state reached at the end of the training segment.
    let inputs = &ds.normalized[..ds.normalized.len() - 1];
    let (pred, energy) = match trained {
        Trained::Digital(w) => (training::forward_digital(&w, layout, inputs), None),
        Trained::Crossbar(boxed) => {
            let (xb, mut streams) = *boxed;
            let pred = network::forward_sequence(&xb, layout, inputs, &mut streams.read)?;
            let l = &xb.ledger;
            let energy = EnergySummary {
                total_j: l.cumulative_energy,
                per_epoch_csv: dir.join(format!("energy_{tag}.csv")).display().to_string(),
                pulses_set: l.pulse_count_set,
                pulses_reset: l.pulse_count_reset,
            };
            (pred, Some(energy))
        }
    };

    let split = ds.split_index;
    let n_train = split - 1;
    let actual = &ds.normalized[1..];
    let rmse_of = |p: &[f64], a: &[f64]| -> Result<Rmse> {
        let normalized = data::rmse(p, a)?;
        Ok(Rmse {
            normalized,
            passengers: normalized * (ds.norm_max - ds.norm_min),
        })
    };
    let train_rmse = rmse_of(&pred[..n_train], &actual[..n_train])?;
    let test_rmse = rmse_of(&pred[n_train..], &actual[n_train..])?;

    let pred_path = dir.join(format!("predictions_{tag}.csv"));
    write_csv(
        &pred_path,
        &["index", "actual_count", "predicted_count", "split"],
        pred.iter().enumerate().map(|(k, y)| {
            let index = k + 1;
            [
                index.to_string(),
                sig9(ds.raw[index]),
                sig9(ds.denormalize(*y)),
                if index < split { "train" } else { "test" }.to_string(),
            ]
        }),
    )?;
    files.push(pred_path.display().to_string());

    Ok(RunSummary {
        seed,
        epochs: tcfg.epochs,
        loss_curve: history.iter().map(|r| r.train_mse).collect(),
        final_train_mse: train_rmse.normalized * train_rmse.normalized,
        train_rmse,
        test_rmse,
        energy,
        files,
    })
}

fn train_crossbar(
    xb: &mut CrossbarArray,
    cfg: &ExperimentConfig,
    tcfg: &training::TrainingConfig,
    train: &SupervisedPairs,
    streams: &mut Streams,
    dir: &Path,
    files: &mut Vec<String>,
) -> Result<Vec<EpochRecord>> {
    let layout = &cfg.layout;
    let tag = cfg.variant.as_str();
    let snapshot = |xb: &CrossbarArray, epoch: usize, files: &mut Vec<String>| -> Result<()> {
        if cfg.snapshot_epochs.contains(&epoch) {
            let path = dir.join(format!("conductance_{tag}_epoch_{epoch:04}.csv"));
            xb.write_snapshot(&path)?;
            files.push(path.display().to_string());
        }
        Ok(())
    };
    snapshot(xb, 0, files)?;
    let mut grads = GradientTensors::zeros(layout);
    let mut history = Vec::with_capacity(tcfg.epochs);
    for epoch in 1..=tcfg.epochs {
        let rec = training::train_epoch(xb, layout, tcfg, train, &mut grads, streams, epoch)?;
        log::debug!("{tag} seed {} epoch {epoch}: mse {:.6}", tcfg.seed, rec.train_mse);
        history.push(rec);
        snapshot(xb, epoch, files)?;
    }
    Ok(history)
}

/// Reference values for the active 1T-1R implementation and the passive
/// measurements it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    /// Average 1T-1R conductance (S).
    pub active_g_avg: f64,
    /// 1T-1R set amplitude (V).
    pub active_v_set: f64,
    /// 1T-1R reset amplitude magnitude (V).
    pub active_v_reset: f64,
    /// 1T-1R training energy to convergence (J) and its epoch count.
    pub active_energy_converged: (f64, usize),
    /// 1T-1R training energy at 200 epochs (J).
    pub active_energy_200: (f64, usize),
    /// Passive-array training energy, variation-free and with non-idealities (J).
    pub passive_energy_ideal: (f64, usize),
    pub passive_energy_noisy: (f64, usize),
    /// Quoted energy improvement factor.
    pub energy_factor: f64,
    pub passive_cell_area: f64,
    pub active_cell_area: f64,
    pub area_rows: usize,
    pub area_cols: usize,
}

impl Default for ReferenceConstants {
    fn default() -> Self {
        ReferenceConstants {
            active_g_avg: 500e-6,
            active_v_set: 2.5,
            active_v_reset: 1.7,
            active_energy_converged: (145e-6, 800),
            active_energy_200: (35e-6, 200),
            passive_energy_ideal: (2.8e-6, 200),
            passive_energy_noisy: (3.0e-6, 200),
            energy_factor: 51.7,
            passive_cell_area: crossbar::PASSIVE_CELL_AREA_UM2,
            active_cell_area: crossbar::ACTIVE_CELL_AREA_UM2,
            area_rows: 40,
            area_cols: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `energy`, `area` or `ratio`.
    pub category: String,
    /// `measured`, `analytic` or `reference`.
    pub source: String,
    pub label: String,
    pub epochs: Option<usize>,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub reference: ReferenceConstants,
    pub rows: Vec<ComparisonRow>,
}

fn row(category: &str, source: &str, label: impl Into<String>, epochs: Option<usize>, value: f64, unit: &str) -> ComparisonRow {
    ComparisonRow {
        category: category.into(),
        source: source.into(),
        label: label.into(),
        epochs,
        value,
        unit: unit.into(),
    }
}

/// Builds the energy/area comparison. Measured rows come from crossbar runs
/// in `reports`; the analytic 1T-1R rows charge the same pulse counts at the
/// 1T-1R amplitudes and average conductance with this run's pulse width.
pub fn comparison_report(reports: &[RunReport], reference: &ReferenceConstants) -> Result<ComparisonTable> {
    let mut rows = Vec::new();
    for rep in reports {
        let t_p: f64 = rep
            .config
            .get("training.t_p")
            .and_then(|v| v.parse().ok())
            .unwrap_or(100e-9);
        for run in &rep.runs {
            let Some(e) = &run.energy else { continue };
            let label = format!("passive {} seed {}", rep.variant.as_str(), run.seed);
            rows.push(row("energy", "measured", &label, Some(run.epochs), e.total_j, "J"));
            let active = e.pulses_set as f64 * reference.active_v_set.powi(2) * reference.active_g_avg * t_p
                + e.pulses_reset as f64 * reference.active_v_reset.powi(2) * reference.active_g_avg * t_p;
            rows.push(row(
                "energy",
                "analytic",
                format!("1T-1R model on pulse counts of {label}"),
                Some(run.epochs),
                active,
                "J",
            ));
            if e.total_j > 0.0 {
                rows.push(row(
                    "ratio",
                    "measured",
                    format!("1T-1R reference ({} epochs) / {label}", reference.active_energy_converged.1),
                    None,
                    reference.active_energy_converged.0 / e.total_j,
                    "",
                ));
            }
        }
    }

    let r = reference;
    rows.push(row("energy", "reference", "passive variation/noise-free", Some(r.passive_energy_ideal.1), r.passive_energy_ideal.0, "J"));
    rows.push(row("energy", "reference", "passive with non-idealities", Some(r.passive_energy_noisy.1), r.passive_energy_noisy.0, "J"));
    rows.push(row("energy", "reference", "1T-1R converged", Some(r.active_energy_converged.1), r.active_energy_converged.0, "J"));
    rows.push(row("energy", "reference", "1T-1R", Some(r.active_energy_200.1), r.active_energy_200.0, "J"));
    rows.push(row("ratio", "reference", "energy factor 1T-1R / passive (quoted)", None, r.energy_factor, ""));
    rows.push(row(
        "ratio",
        "reference",
        "1T-1R converged / passive variation/noise-free",
        None,
        r.active_energy_converged.0 / r.passive_energy_ideal.0,
        "",
    ));

    let area = crossbar::area_report(r.area_rows, r.area_cols, r.passive_cell_area, r.active_cell_area)?;
    let dims = format!("{}x{}", r.area_rows, r.area_cols);
    rows.push(row("area", "reference", format!("passive {dims}"), None, area.passive_area, "um2"));
    rows.push(row("area", "reference", format!("1T-1R {dims}"), None, area.active_area, "um2"));
    rows.push(row("ratio", "reference", format!("area 1T-1R / passive {dims}"), None, area.ratio, ""));

    Ok(ComparisonTable {
        reference: *reference,
        rows,
    })
}

impl ComparisonTable {
    /// Writes `comparison.csv` and `comparison.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        create_dir(dir)?;
        let csv_path = dir.join("comparison.csv");
        write_csv(
            &csv_path,
            &["category", "source", "label", "epochs", "value", "unit"],
            self.rows.iter().map(|r| {
                [
                    r.category.clone(),
                    r.source.clone(),
                    r.label.clone(),
                    r.epochs.map(|e| e.to_string()).unwrap_or_default(),
                    sig9(r.value),
                    r.unit.clone(),
                ]
            }),
        )?;
        let json_path = dir.join("comparison.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(self)?)
            .map_err(|e| Error::io(&json_path, e))?;
        Ok(vec![csv_path, json_path])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let s = spread(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(s.median, 3.0);
        assert_eq!((s.q1, s.q3, s.iqr), (2.0, 4.0, 2.0));
        let one = spread(&[0.7]);
        assert_eq!((one.median, one.iqr), (0.7, 0.0));
    }

    #[test]
    fn reference_only_table() {
        let t = comparison_report(&[], &ReferenceConstants::default()).unwrap();
        assert!(t.rows.iter().all(|r| r.source == "reference"));
        let area = t.rows.iter().find(|r| r.label.starts_with("passive 40x64")).unwrap();
        assert!((area.value - 921.6).abs() < 1e-9);
        let ratio = t.rows.iter().find(|r| r.label.starts_with("area 1T-1R")).unwrap();
        assert!((ratio.value / 6.5e3 - 1.0).abs() < 0.01);
        assert!(t.rows.iter().any(|r| r.value == 145e-6 && r.epochs == Some(800)));
    }
}
