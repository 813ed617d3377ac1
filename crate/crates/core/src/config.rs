//! Experiment configuration: a flat `key = value` text format with dotted
//! section prefixes (`training.alpha = 0.01`). `#` starts a comment. Values
//! are in SI units; conductances in siemens.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{self, Normalization};
use crate::device::{DeviceParams, NoiseFlags};
use crate::error::{Error, Result};
use crate::network::NetworkLayout;
use crate::training::{Granularity, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Digital,
    CrossbarIdeal,
    CrossbarNoisy,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Digital => "digital",
            Variant::CrossbarIdeal => "crossbar_ideal",
            Variant::CrossbarNoisy => "crossbar_noisy",
        }
    }

    pub fn is_crossbar(self) -> bool {
        self != Variant::Digital
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "digital" => Ok(Variant::Digital),
            "crossbar_ideal" => Ok(Variant::CrossbarIdeal),
            "crossbar_noisy" => Ok(Variant::CrossbarNoisy),
            other => Err(format!(
                "unknown variant {other:?} (expected digital, crossbar_ideal or crossbar_noisy)"
            )),
        }
    }
}

/// Individual noise-source overrides; `None` keeps the variant's default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlagOverrides {
    pub d2d: Option<bool>,
    pub c2c: Option<bool>,
    pub read_noise: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub device: DeviceParams,
    pub training: TrainingConfig,
    pub layout: NetworkLayout,
    pub data_path: PathBuf,
    pub output_dir: PathBuf,
    pub replicas: usize,
    pub seed: u64,
    pub normalization: Normalization,
    pub overrides: FlagOverrides,
    /// Epochs after which the conductance map is exported; 0 is the initial map.
    pub snapshot_epochs: Vec<usize>,
    /// Array dimensions used for the area comparison.
    pub area_rows: usize,
    pub area_cols: usize,
    /// Largest read voltage magnitude (V).
    pub read_limit: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variant: Variant::CrossbarIdeal,
            device: DeviceParams::default(),
            training: TrainingConfig::default(),
            layout: NetworkLayout::default(),
            data_path: data::bundled_dataset(),
            output_dir: PathBuf::from("out"),
            replicas: 1,
            seed: 0,
            normalization: Normalization::MinMax,
            overrides: FlagOverrides::default(),
            snapshot_epochs: vec![0, 10, 50, 100, 200],
            area_rows: 40,
            area_cols: 64,
            read_limit: crate::crossbar::DEFAULT_READ_LIMIT,
        }
    }
}

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("cannot parse {value:?}: {e}"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {value:?}")),
    }
}

impl ExperimentConfig {
    /// Parses a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line, reporting all bad lines at once.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut errors = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", n + 1));
                continue;
            };
            if let Err(e) = self.set(key.trim(), value.trim()) {
                errors.push(format!("line {}: {e}", n + 1));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Sets one field by its dotted key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value;
        let r = match key {
            "variant" => parse::<Variant>(v).map(|x| self.variant = x),
            "seed" => parse(v).map(|x| self.seed = x),
            "replicas" => parse(v).map(|x| self.replicas = x),
            "data_path" => {
                self.data_path = PathBuf::from(v);
                Ok(())
            }
            "output_dir" => {
                self.output_dir = PathBuf::from(v);
                Ok(())
            }

            "device.g_min" => parse(v).map(|x| self.device.g_min = x),
            "device.g_max" => parse(v).map(|x| self.device.g_max = x),
            "device.a_set" => parse(v).map(|x| self.device.a_set = x),
            "device.a_reset" => parse(v).map(|x| self.device.a_reset = x),
            "device.gamma" => parse(v).map(|x| self.device.gamma = x),
            "device.sigma_d2d" => parse(v).map(|x| self.device.sigma_d2d = x),
            "device.sigma_c2c" => parse(v).map(|x| self.device.sigma_c2c = x),
            "device.sigma_read" => parse(v).map(|x| self.device.sigma_read = x),
            "device.d2d" => parse_bool(v).map(|x| self.overrides.d2d = Some(x)),
            "device.c2c" => parse_bool(v).map(|x| self.overrides.c2c = Some(x)),
            "device.read_noise" => parse_bool(v).map(|x| self.overrides.read_noise = Some(x)),

            "training.alpha" => parse(v).map(|x| self.training.alpha = x),
            "training.eta" => parse(v).map(|x| self.training.eta = x),
            "training.g2w_ratio" => parse(v).map(|x| self.training.g2w_ratio = x),
            "training.v_set" => parse(v).map(|x| self.training.v_set = x),
            "training.v_reset" => parse(v).map(|x| self.training.v_reset = x),
            "training.t_p" => parse(v).map(|x| self.training.t_p = x),
            "training.epochs" => parse(v).map(|x| self.training.epochs = x),
            "training.saturation_headroom" => parse(v).map(|x| self.training.saturation_headroom = x),
            "training.granularity" => match v {
                "per_epoch" => Ok(Granularity::PerEpoch),
                "per_sample" => Ok(Granularity::PerSample),
                _ => Err(format!("expected per_epoch or per_sample, got {v:?}")),
            }
            .map(|g| self.training.granularity = g),

            "layout.v_read" => parse(v).map(|x| self.layout.v_read = x),
            "layout.read_limit" => parse(v).map(|x| self.read_limit = x),

            "data.normalization" => match v {
                "min_max" => Ok(Normalization::MinMax),
                _ => Err(format!("unsupported normalization {v:?} (expected min_max)")),
            }
            .map(|n| self.normalization = n),

            "report.snapshot_epochs" => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(parse::<usize>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(|x| self.snapshot_epochs = x),
            "report.area_rows" => parse(v).map(|x| self.area_rows = x),
            "report.area_cols" => parse(v).map(|x| self.area_cols = x),
            _ => Err(format!("unknown key {key:?}")),
        };
        r.map_err(|e| format!("{key}: {e}"))
    }

    /// Noise flags in effect for the configured variant.
    pub fn effective_flags(&self) -> NoiseFlags {
        match self.variant {
            Variant::Digital | Variant::CrossbarIdeal => NoiseFlags::OFF,
            Variant::CrossbarNoisy => NoiseFlags {
                d2d_enabled: self.overrides.d2d.unwrap_or(true),
                c2c_enabled: self.overrides.c2c.unwrap_or(true),
                read_noise_enabled: self.overrides.read_noise.unwrap_or(true),
            },
        }
    }

    /// Copies shared settings into the sub-configs (flags, seed, ratio,
    /// programming amplitudes) so each module sees one consistent value.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.training.flags = self.effective_flags();
        c.training.seed = self.seed;
        c.layout.g2w_ratio = self.training.g2w_ratio;
        c.device.v_set = self.training.v_set;
        c.device.v_reset = self.training.v_reset;
        c
    }

    /// Returns every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let r = self.resolved();
        let mut out = r.device.violations();
        out.extend(r.training.violations());
        out.extend(r.layout.violations());
        if self.replicas < 1 {
            out.push("replicas must be >= 1".into());
        }
        if self.variant != Variant::CrossbarNoisy {
            let o = self.overrides;
            for (name, flag) in [("device.d2d", o.d2d), ("device.c2c", o.c2c), ("device.read_noise", o.read_noise)] {
                if flag == Some(true) {
                    out.push(format!(
                        "{name} cannot be enabled for variant {}",
                        self.variant.as_str()
                    ));
                }
            }
        }
        if !(self.read_limit > 0.0) {
            out.push(format!("layout.read_limit must be > 0, got {}", self.read_limit));
        } else if self.layout.v_read > self.read_limit {
            out.push(format!(
                "layout.v_read ({} V) exceeds layout.read_limit ({} V)",
                self.layout.v_read, self.read_limit
            ));
        }
        if self.area_rows == 0 || self.area_cols == 0 {
            out.push("report.area_rows and report.area_cols must be > 0".into());
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

    /// Every setting as `key -> value`, in the file syntax.
    pub fn to_entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("variant", self.variant.as_str().into());
        put("seed", self.seed.to_string());
        put("replicas", self.replicas.to_string());
        put("data_path", self.data_path.display().to_string());
        put("output_dir", self.output_dir.display().to_string());
        let d = &self.device;
        put("device.g_min", d.g_min.to_string());
        put("device.g_max", d.g_max.to_string());
        put("device.a_set", d.a_set.to_string());
        put("device.a_reset", d.a_reset.to_string());
        put("device.gamma", d.gamma.to_string());
        put("device.sigma_d2d", d.sigma_d2d.to_string());
        put("device.sigma_c2c", d.sigma_c2c.to_string());
        put("device.sigma_read", d.sigma_read.to_string());
        let o = self.overrides;
        for (k, v) in [("device.d2d", o.d2d), ("device.c2c", o.c2c), ("device.read_noise", o.read_noise)] {
            if let Some(b) = v {
                put(k, b.to_string());
            }
        }
        let t = &self.training;
        put("training.alpha", t.alpha.to_string());
        put("training.eta", t.eta.to_string());
        put("training.g2w_ratio", t.g2w_ratio.to_string());
        put("training.v_set", t.v_set.to_string());
        put("training.v_reset", t.v_reset.to_string());
        put("training.t_p", t.t_p.to_string());
        put("training.epochs", t.epochs.to_string());
        put("training.saturation_headroom", t.saturation_headroom.to_string());
        put(
            "training.granularity",
            match t.granularity {
                Granularity::PerEpoch => "per_epoch",
                Granularity::PerSample => "per_sample",
            }
            .into(),
        );
        put("layout.v_read", self.layout.v_read.to_string());
        put("layout.read_limit", self.read_limit.to_string());
        put("data.normalization", "min_max".into());
        put(
            "report.snapshot_epochs",
            self.snapshot_epochs
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("report.area_rows", self.area_rows.to_string());
        put("report.area_cols", self.area_cols.to_string());
        m
    }

    /// The config in file syntax; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn parses_sections_and_comments() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "# experiment\nvariant = crossbar_noisy\ntraining.alpha = 0.02  # faster\n\
             device.read_noise = off\nreport.snapshot_epochs = 0, 5\nseed=9\n",
        )
        .unwrap();
        assert_eq!(cfg.variant, Variant::CrossbarNoisy);
        assert_eq!(cfg.training.alpha, 0.02);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.snapshot_epochs, vec![0, 5]);
        let f = cfg.effective_flags();
        assert!(f.d2d_enabled && f.c2c_enabled && !f.read_noise_enabled);
    }

    #[test]
    fn reports_every_bad_line() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg
            .apply_text("training.alpha = x\nnonsense\nfoo.bar = 1\n")
            .unwrap_err();
        match err {
            Error::Config(v) => assert_eq!(v.len(), 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn validation_lists_every_field() {
        let mut cfg = ExperimentConfig {
            replicas: 0,
            ..ExperimentConfig::default()
        };
        cfg.training.alpha = -1.0;
        cfg.training.eta = 1.0;
        cfg.device.g_min = 400e-6;
        match cfg.validate() {
            Err(Error::Config(v)) => {
                assert!(v.len() >= 4, "{v:?}");
                for key in ["training.alpha", "training.eta", "replicas", "device.g_min"] {
                    assert!(v.iter().any(|m| m.contains(key)), "{key} missing in {v:?}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ideal_forces_flags_off() {
        let mut cfg = ExperimentConfig {
            variant: Variant::CrossbarIdeal,
            ..ExperimentConfig::default()
        };
        assert_eq!(cfg.effective_flags(), NoiseFlags::OFF);
        cfg.overrides.c2c = Some(true);
        assert!(cfg.validate().is_err());
        cfg.variant = Variant::CrossbarNoisy;
        assert_eq!(cfg.effective_flags(), NoiseFlags::ALL);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("variant = digital\ntraining.t_p = 1.5e-7\ndevice.sigma_c2c = 0.123456789\nseed = 77\n")
            .unwrap();
        let mut back = ExperimentConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }
}
