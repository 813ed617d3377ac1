//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use rand::Rng;
use rram_lstm::config::{ExperimentConfig, Variant};
use rram_lstm::crossbar::{self, CrossbarArray};
use rram_lstm::data::{self, TimeSeriesDataset};
use rram_lstm::device::{DeviceParams, NoiseFlags, PulseSpec};
use rram_lstm::experiment::{comparison_report, run_experiment, ReferenceConstants, RunReport};
use rram_lstm::network::NetworkLayout;
use rram_lstm::rng::Streams;
use rram_lstm::training::{bptt_gradients, select_pulse, weight_indices, TrainingConfig};
use rram_lstm::Exec;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn vmm_oracle() -> Outcome {
    let t = Instant::now();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let xb = noise_free_array(1000 + seed, 34, 60);
        let g = dense_copy(&xb);
        let v = random_voltages(&mut r, 34, 0.2);
        worst = worst.max(max_rel_err(&xb.vmm_rows_to_cols(&v, &mut r).unwrap(), &dense_rows_to_cols(&g, &v)));
        let v = random_voltages(&mut r, 60, 0.2);
        worst = worst.max(max_rel_err(&xb.vmm_cols_to_rows(&v, &mut r).unwrap(), &dense_cols_to_rows(&g, &v)));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 1.0,
        format!("max relative error {worst:.2e} (<= 1e-12), {secs:.3} s (< 1 s)"),
    )
}

fn gradient_check() -> Outcome {
    let t = Instant::now();
    let layout = NetworkLayout::default();
    let idx = weight_indices(&layout);
    let mut r = rng(2);
    let w = random_weights(&mut r, &layout, 0.5);
    let series: Vec<f64> = (0..=10).map(|_| r.random_range(0.0..1.0)).collect();
    let (x, y) = (&series[..10], &series[1..]);
    let g = bptt_gradients(&w, &layout, x, y).unwrap();
    const STEP: f64 = 1e-6;
    let numeric = Exec::default().map_range(idx.len(), |k| {
        let lp = reference_mse_shifted(&w, layout.n_hidden, x, y, idx[k], STEP);
        let lm = reference_mse_shifted(&w, layout.n_hidden, x, y, idx[k], -STEP);
        ((lp - lm) / (2.0 * STEP)).to_f64()
    });
    let worst = idx
        .iter()
        .zip(&numeric)
        .map(|(&i, &n)| {
            let a = g.get(i);
            if a == n {
                0.0
            } else {
                (a - n).abs() / a.abs().max(n.abs())
            }
        })
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-4 && secs < 30.0 && idx.len() == 1036,
        format!("{} weights, max relative error {worst:.2e} (<= 1e-4), {secs:.1} s (< 30 s)", idx.len()),
    )
}

/// Runs shared by several criteria.
struct Runs {
    digital: RunReport,
    ideal: RunReport,
    noisy: RunReport,
    secs: BTreeMap<&'static str, f64>,
}

fn experiment(variant: Variant, replicas: usize, dir: &Path) -> (RunReport, f64) {
    let cfg = ExperimentConfig {
        variant,
        seed: 0,
        replicas,
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    };
    let t = Instant::now();
    let rep = run_experiment(&cfg).unwrap();
    (rep, t.elapsed().as_secs_f64())
}

fn run_all(root: &Path) -> Runs {
    let mut secs = BTreeMap::new();
    let (digital, s) = experiment(Variant::Digital, 1, &root.join("digital"));
    secs.insert("digital", s);
    let (ideal, s) = experiment(Variant::CrossbarIdeal, 5, &root.join("ideal"));
    secs.insert("ideal", s);
    let (noisy, s) = experiment(Variant::CrossbarNoisy, 5, &root.join("noisy"));
    secs.insert("noisy", s);
    Runs {
        digital,
        ideal,
        noisy,
        secs,
    }
}

fn digital_convergence(runs: &Runs) -> Outcome {
    let run = &runs.digital.runs[0];
    let first = run.loss_curve[0];
    let last = run.final_train_mse;
    let secs = runs.secs["digital"];
    outcome(
        run.epochs == 200 && last <= 0.2 * first && secs < 60.0,
        format!(
            "initial MSE {first:.4e}, MSE after 200 epochs {last:.4e}, ratio {:.4} (<= 0.2), {secs:.1} s (< 60 s)",
            last / first
        ),
    )
}

/// Epochs (1-based) in 150..=200 that set a new running minimum below
/// `0.95 * median(loss[150..=200])`.
fn late_minima(curve: &[f64]) -> (Vec<usize>, f64, f64) {
    let window = &curve[149..200];
    let med = median(window);
    let mut best = curve[..149].iter().copied().fold(f64::INFINITY, f64::min);
    let mut hits = Vec::new();
    for (k, &l) in window.iter().enumerate() {
        if l < best {
            best = l;
            if l < 0.95 * med {
                hits.push(150 + k);
            }
        }
    }
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    (hits, med, lo)
}

fn manhattan_convergence(runs: &Runs) -> Outcome {
    let ideal = &runs.ideal.runs[0];
    let digital = &runs.digital.runs[0];
    assert_eq!(ideal.seed, digital.seed);
    let (hits, med, lo) = late_minima(&ideal.loss_curve);
    let plateau = hits.is_empty();
    let ratio = ideal.test_rmse.normalized / digital.test_rmse.normalized;
    let quality = ratio <= 1.5;
    outcome(
        plateau && quality,
        format!(
            "plateau {}: window median {med:.4e}, window min {lo:.4e} ({:.3} x median), new minima below 0.95 x median at epochs {hits:?}; \
             test RMSE ideal {:.4} vs digital {:.4}, ratio {ratio:.3} (<= 1.5) {}",
            if plateau { "ok" } else { "not reached" },
            lo / med,
            ideal.test_rmse.normalized,
            digital.test_rmse.normalized,
            if quality { "ok" } else { "exceeded" },
        ),
    )
}

fn noise_robustness(runs: &Runs) -> Outcome {
    let noisy: Vec<f64> = runs.noisy.runs.iter().map(|r| r.test_rmse.normalized).collect();
    let ideal: Vec<f64> = runs.ideal.runs.iter().map(|r| r.test_rmse.normalized).collect();
    let (mn, mi) = (median(&noisy), median(&ideal));
    let secs = runs.secs["noisy"] + runs.secs["ideal"];
    outcome(
        noisy.len() == 5 && mn <= 2.0 * mi && secs < 300.0,
        format!(
            "median test RMSE over 5 seeds: noisy {mn:.4}, noise-free {mi:.4}, ratio {:.3} (<= 2), {secs:.1} s (< 300 s)",
            mn / mi
        ),
    )
}

fn pulse_energy_exact() -> Outcome {
    let set = PulseSpec::new(0.8, 100e-9).unwrap();
    let reset = PulseSpec::new(-0.8, 100e-9).unwrap();
    let e_set = crossbar::pulse_energy(&set, 100e-6);
    let e_reset = crossbar::pulse_energy(&reset, 300e-6);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b;
    let none = select_pulse(0.0, &TrainingConfig::default()).is_none();

    // Ledger totals against an independent running sum of per-pulse energies.
    let p = DeviceParams::default();
    let mut streams = Streams::from_seed(6);
    let mut xb = CrossbarArray::init_random(64, 64, p, NoiseFlags::ALL, &mut streams).unwrap();
    let mut pick = rng(60);
    let mut oracle_total = 0.0;
    let mut epochs_ok = true;
    for _ in 0..5 {
        let mut epoch = 0.0;
        for _ in 0..1000 {
            let (r, c) = (pick.random_range(0..64), pick.random_range(0..64));
            let pulse = if pick.random_bool(0.5) { &set } else { &reset };
            epoch += pulse.amplitude * pulse.amplitude * xb.g(r, c) * pulse.duration;
            xb.program_pulse(r, c, pulse, &mut streams.c2c).unwrap();
        }
        epochs_ok &= xb.ledger.close_epoch().energy == epoch;
        oracle_total += epoch;
    }
    let total_ok = xb.ledger.cumulative_energy == oracle_total && xb.ledger.total_pulses() == 5000;
    outcome(
        close(e_set, 6.4e-12) && close(e_reset, 19.2e-12) && none && epochs_ok && total_ok,
        format!(
            "set@100uS {e_set:.4e} J, reset@300uS {e_reset:.4e} J, zero update issues no pulse: {none}, \
             ledger epoch sums exact: {epochs_ok}, cumulative exact: {total_ok}"
        ),
    )
}

fn energy_magnitude(runs: &Runs, table_dir: &Path) -> Outcome {
    let ideal = runs.ideal.runs[0].energy.as_ref().map(|e| e.total_j);
    let noisy = runs.noisy.runs[0].energy.as_ref().map(|e| e.total_j);
    let (Some(ei), Some(en)) = (ideal, noisy) else {
        return outcome(false, "crossbar energy missing from report");
    };
    let band = |e: f64| (0.3e-6..=30e-6).contains(&e);
    let table = comparison_report(
        &[runs.digital.clone(), runs.ideal.clone(), runs.noisy.clone()],
        &ReferenceConstants::default(),
    )
    .unwrap();
    table.write(table_dir).unwrap();
    let has = |value: f64, epochs: Option<usize>| {
        table
            .rows
            .iter()
            .any(|r| r.source == "reference" && r.value == value && r.epochs == epochs)
    };
    let reference_rows = has(145e-6, Some(800)) && has(51.7, None);
    let measured = table.rows.iter().filter(|r| r.source == "measured" && r.category == "energy").count();
    outcome(
        band(ei) && band(en) && reference_rows && measured == 10,
        format!(
            "200-epoch energy noise-free {:.3} uJ, noisy {:.3} uJ (band 0.3..30 uJ); measured rows {measured}; \
             reference rows 145 uJ/800 epochs and factor 51.7 present: {reference_rows}",
            ei * 1e6,
            en * 1e6
        ),
    )
}

fn area_exact() -> Outcome {
    let a = crossbar::area_report(40, 64, 0.36, 2360.0).unwrap();
    let ok = (a.passive_area - 921.6).abs() <= 1e-9
        && (a.active_area - 6.0416e6).abs() <= 1e-6
        && (a.ratio / 6.5e3 - 1.0).abs() <= 0.01;
    outcome(
        ok,
        format!(
            "passive {:.4} um2, active {:.6} mm2, ratio {:.1} (within 1% of 6.5e3)",
            a.passive_area,
            a.active_area * 1e-6,
            a.ratio
        ),
    )
}

fn dataset_integrity() -> Outcome {
    let ds = TimeSeriesDataset::load(&data::bundled_dataset()).unwrap();
    let (train, test) = data::make_supervised(&ds);
    let train_inside = train.target_index.iter().all(|&i| i < 96);
    let ok = ds.raw.len() == 144 && train.len() == 95 && test.len() == 48 && train_inside;
    outcome(
        ok,
        format!(
            "{} observations, {} train pairs (targets within first 96: {train_inside}), {} test targets",
            ds.raw.len(),
            train.len(),
            test.len()
        ),
    )
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(root: &Path) -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (variant, replicas, name) in [
        (Variant::Digital, 1, "digital"),
        (Variant::CrossbarIdeal, 5, "ideal"),
        (Variant::CrossbarNoisy, 5, "noisy"),
    ] {
        experiment(variant, replicas, &root.join(format!("{name}_again")));
        let a = csv_files(&root.join(name));
        let b = csv_files(&root.join(format!("{name}_again")));
        let same = !a.is_empty() && a == b;
        ok &= same;
        details.push(format!("{name}: {} CSVs {}", a.len(), if same { "identical" } else { "DIFFER" }));
    }
    outcome(ok, details.join(", "))
}

fn bounds_fuzz() -> Outcome {
    let p = DeviceParams::default();
    let mut streams = Streams::from_seed(11);
    let mut xb = CrossbarArray::init_random(64, 64, p, NoiseFlags::ALL, &mut streams).unwrap();
    let set = PulseSpec::new(0.8, 100e-9).unwrap();
    let reset = PulseSpec::new(-0.8, 100e-9).unwrap();
    let mut pick = rng(110);
    let mut escapes = 0u64;
    for _ in 0..1_000_000 {
        let (r, c) = (pick.random_range(0..64), pick.random_range(0..64));
        let pulse = if pick.random_bool(0.5) { &set } else { &reset };
        xb.program_pulse(r, c, pulse, &mut streams.c2c).unwrap();
        if !p.contains(xb.g(r, c)) {
            escapes += 1;
        }
    }
    let gs = xb.conductances();
    let lo = gs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        escapes == 0,
        format!("10^6 pulses, {escapes} out-of-range states, final range [{:.3}, {:.3}] uS", lo * 1e6, hi * 1e6),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let started = Instant::now();

    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 VMM oracle equivalence", vmm_oracle()),
        ("2 gradient check", gradient_check()),
    ];
    let runs = run_all(root);
    results.push(("3 digital baseline convergence", digital_convergence(&runs)));
    results.push(("4 Manhattan convergence", manhattan_convergence(&runs)));
    results.push(("5 noise robustness", noise_robustness(&runs)));
    results.push(("6 per-pulse energy", pulse_energy_exact()));
    results.push(("7 training-energy magnitude", energy_magnitude(&runs, &root.join("comparison"))));
    results.push(("8 area", area_exact()));
    results.push(("9 dataset integrity", dataset_integrity()));
    results.push(("10 determinism", determinism(root)));
    results.push(("11 conductance-bounds fuzz", bounds_fuzz()));

    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s)",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
