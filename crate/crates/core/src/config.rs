//! Scenario configuration and its on-disk TOML schema.
//!
//! Internally every power is in linear milliwatts. The file format speaks
//! natural units (GHz, m, dBm) and is converted once at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::geometry::{Point3, UserLayout};
use crate::wmmse::AlgoParams;
use crate::{Error, Result};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Validated scenario in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub consts: PhysicalConstants,
    /// `N`
    pub num_waveguides: usize,
    /// `M`
    pub pas_per_waveguide: usize,
    /// `K`
    pub num_secondary: usize,
    /// `P`
    pub num_primary: usize,
    /// `D_x` (m)
    pub area_x: f64,
    /// `D_y` (m)
    pub area_y: f64,
    /// `d_h` (m)
    pub waveguide_height: f64,
    /// `L` (m)
    pub waveguide_length: f64,
    /// `δ = λ_c / 2` (m)
    pub min_pa_spacing: f64,
    /// `P_b` (mW)
    pub power_budget: f64,
    /// `σ²` (mW)
    pub noise_power: f64,
    /// `γ_p` (mW), one per primary user.
    pub it_thresholds: Vec<f64>,
}

impl ScenarioConfig {
    /// Default simulation setup: 4 waveguides with 4 PAs each over a
    /// 15 m × 30 m area at 28 GHz, two primary and two secondary users.
    pub fn paper_default() -> Self {
        ScenarioFile::default()
            .to_config()
            .expect("default scenario is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_x", self.area_x),
            ("area_y", self.area_y),
            ("waveguide_height", self.waveguide_height),
            ("waveguide_length", self.waveguide_length),
            ("min_pa_spacing", self.min_pa_spacing),
            ("power_budget", self.power_budget),
            ("noise_power", self.noise_power),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.num_waveguides == 0 || self.pas_per_waveguide == 0 || self.num_secondary == 0 {
            return Err(Error::Config(
                "num_waveguides, pas_per_waveguide and num_secondary must be at least 1".into(),
            ));
        }
        if self.it_thresholds.len() != self.num_primary {
            return Err(Error::Config(format!(
                "expected {} interference thresholds, got {}",
                self.num_primary,
                self.it_thresholds.len()
            )));
        }
        if let Some(g) = self.it_thresholds.iter().find(|g| !(**g > 0.0)) {
            return Err(Error::Config(format!("interference thresholds must be positive, got {g}")));
        }
        let half = self.consts.half_wavelength();
        if ((self.min_pa_spacing - half) / half).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "min_pa_spacing {} differs from half a wavelength {}",
                self.min_pa_spacing, half
            )));
        }
        if self.pas_per_waveguide as f64 * self.min_pa_spacing > self.waveguide_length {
            return Err(Error::Config(format!(
                "{} antennas spaced {} m apart do not fit on a {} m waveguide",
                self.pas_per_waveguide, self.min_pa_spacing, self.waveguide_length
            )));
        }
        Ok(())
    }

    /// `y_n = (2n - 1) D_y / (2N)` for `n = 1..N`.
    pub fn feed_y(&self) -> Vec<f64> {
        let n = self.num_waveguides as f64;
        (0..self.num_waveguides)
            .map(|i| (2.0 * i as f64 + 1.0) * self.area_y / (2.0 * n))
            .collect()
    }

    pub fn set_power_budget_dbm(&mut self, dbm: f64) {
        self.power_budget = dbm_to_mw(dbm);
    }

    pub fn set_it_threshold_dbm(&mut self, dbm: f64) {
        let mw = dbm_to_mw(dbm);
        self.it_thresholds.iter_mut().for_each(|g| *g = mw);
    }
}

/// TOML scenario file. Every field has a default, so an empty file describes
/// the default scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub carrier_frequency_ghz: f64,
    pub effective_refractive_index: f64,
    pub num_waveguides: usize,
    pub pas_per_waveguide: usize,
    pub num_secondary: usize,
    pub num_primary: usize,
    pub area_x_m: f64,
    pub area_y_m: f64,
    pub waveguide_height_m: f64,
    pub waveguide_length_m: f64,
    pub power_budget_dbm: f64,
    pub noise_power_dbm: f64,
    /// Common threshold applied to every primary user.
    pub it_threshold_dbm: f64,
    /// Per-user thresholds; overrides `it_threshold_dbm` when present.
    pub it_thresholds_dbm: Option<Vec<f64>>,
    /// Seed of the random user drop.
    pub seed: u64,
    /// Fixed `[x, y]` user positions; both lists replace the random drop.
    pub primary_positions: Option<Vec<[f64; 2]>>,
    pub secondary_positions: Option<Vec<[f64; 2]>>,
    pub solver: AlgoParams,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            carrier_frequency_ghz: 28.0,
            effective_refractive_index: 1.4,
            num_waveguides: 4,
            pas_per_waveguide: 4,
            num_secondary: 2,
            num_primary: 2,
            area_x_m: 15.0,
            area_y_m: 30.0,
            waveguide_height_m: 3.0,
            waveguide_length_m: 15.0,
            power_budget_dbm: 20.0,
            noise_power_dbm: -90.0,
            it_threshold_dbm: -90.0,
            it_thresholds_dbm: None,
            seed: 1,
            primary_positions: None,
            secondary_positions: None,
            solver: AlgoParams::default(),
        }
    }
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text` after applying `key=value` overrides. Keys are dotted
    /// paths into the document (`power_budget_dbm`, `solver.grid_points`);
    /// values use TOML syntax.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let table = parse_with_overrides(text, overrides, "scenario")?;
        let file: ScenarioFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("scenario: {e}")))?;
        file.solver.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario file serializes")
    }

    pub fn to_config(&self) -> Result<ScenarioConfig> {
        let consts =
            PhysicalConstants::new(self.carrier_frequency_ghz * 1e9, self.effective_refractive_index)?;
        let it_thresholds = match &self.it_thresholds_dbm {
            Some(v) => v.iter().copied().map(dbm_to_mw).collect(),
            None => vec![dbm_to_mw(self.it_threshold_dbm); self.num_primary],
        };
        let cfg = ScenarioConfig {
            consts,
            num_waveguides: self.num_waveguides,
            pas_per_waveguide: self.pas_per_waveguide,
            num_secondary: self.num_secondary,
            num_primary: self.num_primary,
            area_x: self.area_x_m,
            area_y: self.area_y_m,
            waveguide_height: self.waveguide_height_m,
            waveguide_length: self.waveguide_length_m,
            min_pa_spacing: consts.half_wavelength(),
            power_budget: dbm_to_mw(self.power_budget_dbm),
            noise_power: dbm_to_mw(self.noise_power_dbm),
            it_thresholds,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// User layout from the fixed positions, or `None` when the file asks for
    /// a random drop.
    pub fn fixed_layout(&self, cfg: &ScenarioConfig) -> Result<Option<UserLayout>> {
        match (&self.primary_positions, &self.secondary_positions) {
            (None, None) => Ok(None),
            (Some(p), Some(s)) => {
                let to_points = |v: &Vec<[f64; 2]>| v.iter().map(|&[x, y]| Point3::new(x, y, 0.0)).collect();
                UserLayout::new(cfg, to_points(p), to_points(s)).map(Some)
            }
            _ => Err(Error::Config(
                "primary_positions and secondary_positions must be given together".into(),
            )),
        }
    }
}

/// Parses a TOML document and applies dotted `key=value` overrides to it.
/// `what` names the document in error messages.
pub(crate) fn parse_with_overrides(text: &str, overrides: &[String], what: &str) -> Result<toml::Table> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    Ok(table)
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override `{ov}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| {
        Error::Parse(format!("override `{ov}` has an empty key"))
    })?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("override `{ov}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
