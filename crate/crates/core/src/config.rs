//! Scenario and sweep configuration files.
//!
//! TOML is the committed format; JSON with the same schema is accepted too,
//! so the config echoed in a run summary can be fed straight back in.
//! Unknown keys are rejected at every level.
//!
//! ```toml
//! exchange = "boson"
//!
//! [grid]
//! half_width = 204.8
//! points = 8192
//!
//! [packet]
//! center = -30.0
//! wavenumber = 8.0
//! width = 1.0
//!
//! [partner]
//! separation = 20.0
//! wavenumber_offset = 0.0
//!
//! [barrier]
//! width = 0.5
//! target = 0.5        # or `height = ...` for a fixed barrier
//!
//! [sweep]             # sweeps only
//! parameter = "separation_d"
//! values = [0.0, 1.0, 2.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, WavepacketSpec};
use crate::propagator::{BarrierPotential, CalibrationTarget, MeasurementCriterion, SimulationSettings};
use crate::twoparticle::Exchange;

/// Longest sweep accepted from a file.
pub const MAX_SWEEP_VALUES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

/// Packet B relative to packet A: shifted by `separation`, boosted by
/// `wavenumber_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartnerConfig {
    pub separation: f64,
    pub wavenumber_offset: f64,
}

/// Either a fixed barrier (`height`) or a calibration request (`target`,
/// `tolerance`); never both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub width: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementConfig {
    pub barrier_amplitude: f64,
    pub lobe_separation: f64,
    pub min_lobe_mass: f64,
    /// Largest edge amplitude a valid row may have seen.
    pub edge_amplitude: f64,
    /// Largest norm drift a valid row may have.
    pub norm_drift: f64,
    /// Tolerance for the FD/MB/BE anchors when labelling a row.
    pub label_tolerance: f64,
    /// Extra measurements after the first, spaced by `stability_interval`.
    pub stability_checks: usize,
    pub stability_interval: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        let c = MeasurementCriterion::default();
        Self {
            barrier_amplitude: c.barrier_amplitude,
            lobe_separation: c.lobe_separation,
            min_lobe_mass: c.min_lobe_mass,
            edge_amplitude: 1e-8,
            norm_drift: 1e-10,
            label_tolerance: 0.01,
            stability_checks: 2,
            stability_interval: 1.0,
        }
    }
}

impl MeasurementConfig {
    pub fn criterion(&self) -> MeasurementCriterion {
        MeasurementCriterion {
            barrier_amplitude: self.barrier_amplitude,
            lobe_separation: self.lobe_separation,
            min_lobe_mass: self.min_lobe_mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Initial separation of packet B from packet A.
    SeparationD,
    /// Wavenumber offset of packet B.
    WavenumberDk,
    /// `k0·d`: packet A's wavenumber is set to `value / d` at fixed `d`.
    PhaseK0d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// On-disk layout shared by scenario and sweep files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub exchange: Exchange,
    pub grid: GridConfig,
    pub packet: WavepacketSpec,
    #[serde(default)]
    pub partner: PartnerConfig,
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub evolution: SimulationSettings,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// A validated single scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub exchange: Exchange,
    pub grid: GridConfig,
    pub packet: WavepacketSpec,
    pub partner: PartnerConfig,
    pub barrier: BarrierConfig,
    pub evolution: SimulationSettings,
    pub measurement: MeasurementConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub base: ScenarioConfig,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// How the barrier is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BarrierSetting {
    Fixed(BarrierPotential),
    Calibrate(CalibrationTarget),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.half_width, self.grid.points)
    }

    pub fn packet_a(&self) -> WavepacketSpec {
        self.packet
    }

    pub fn packet_b(&self) -> WavepacketSpec {
        WavepacketSpec {
            center: self.packet.center + self.partner.separation,
            wavenumber: self.packet.wavenumber + self.partner.wavenumber_offset,
            width: self.packet.width,
        }
    }

    pub fn barrier_setting(&self) -> Result<BarrierSetting> {
        let b = &self.barrier;
        match (b.height, b.target, b.tolerance) {
            (Some(h), None, None) => Ok(BarrierSetting::Fixed(BarrierPotential::new(h, b.width, b.center)?)),
            (Some(_), _, _) => Err(Error::config(
                "barrier: `height` fixes the barrier; drop `target`/`tolerance` or `height`",
            )),
            (None, target, tolerance) => {
                BarrierPotential::new(0.0, b.width, b.center)?;
                let mut goal = CalibrationTarget::new(b.width, b.center);
                if let Some(t) = target {
                    if !(t > 0.0 && t < 1.0) {
                        return Err(Error::config(format!("calibration target must lie in (0, 1), got {t}")));
                    }
                    goal.target = t;
                }
                if let Some(tol) = tolerance {
                    positive("calibration tolerance", tol)?;
                    goal.tolerance = tol;
                }
                Ok(BarrierSetting::Calibrate(goal))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.packet_a().validate(&grid)?;
        let p = &self.partner;
        if !(p.separation.is_finite() && p.separation >= 0.0) {
            return Err(Error::config(format!(
                "partner separation must be finite and >= 0, got {}",
                p.separation
            )));
        }
        if !p.wavenumber_offset.is_finite() {
            return Err(Error::config("partner wavenumber offset must be finite"));
        }
        self.packet_b()
            .validate(&grid)
            .map_err(|e| Error::config(format!("partner packet: {e}")))?;
        match self.barrier_setting()? {
            BarrierSetting::Fixed(b) => b.validate(&grid)?,
            BarrierSetting::Calibrate(goal) => BarrierPotential::new(0.0, goal.width, goal.center)?.validate(&grid)?,
        }
        self.evolution.validate(&grid)?;
        let m = &self.measurement;
        m.criterion().validate()?;
        positive("measurement edge_amplitude", m.edge_amplitude)?;
        positive("measurement norm_drift", m.norm_drift)?;
        positive("measurement label_tolerance", m.label_tolerance)?;
        if m.stability_checks > 0 {
            positive("measurement stability_interval", m.stability_interval)?;
            let steps = m.stability_interval / self.evolution.dt;
            if steps > 1e8 {
                return Err(Error::config("stability_interval spans too many steps"));
            }
        }
        if m.stability_checks > 16 {
            return Err(Error::config("at most 16 stability checks"));
        }
        Ok(())
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match parameter {
            SweepParameter::SeparationD => out.partner.separation = value,
            SweepParameter::WavenumberDk => out.partner.wavenumber_offset = value,
            SweepParameter::PhaseK0d => {
                let d = self.partner.separation;
                if !(d > 0.0) {
                    return Err(Error::config("phase_k0d sweeps need a positive partner separation"));
                }
                out.packet.wavenumber = value / d;
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// The scalar this scenario reports in the `param` column.
    pub fn parameter_value(&self, parameter: SweepParameter) -> f64 {
        match parameter {
            SweepParameter::SeparationD => self.partner.separation,
            SweepParameter::WavenumberDk => self.partner.wavenumber_offset,
            SweepParameter::PhaseK0d => self.packet.wavenumber * self.partner.separation,
        }
    }
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    fn base(&self) -> ScenarioConfig {
        ScenarioConfig {
            exchange: self.exchange,
            grid: self.grid,
            packet: self.packet,
            partner: self.partner,
            barrier: self.barrier,
            evolution: self.evolution,
            measurement: self.measurement,
        }
    }

    /// The scenario described by the file; any sweep section is ignored.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let s = self.base();
        s.validate()?;
        Ok(s)
    }

    pub fn sweep(&self) -> Result<SweepConfig> {
        let section = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::config("missing [sweep] section"))?;
        if section.values.is_empty() {
            return Err(Error::config("sweep values must be nonempty"));
        }
        if section.values.len() > MAX_SWEEP_VALUES {
            return Err(Error::config(format!("more than {MAX_SWEEP_VALUES} sweep values")));
        }
        let base = self.base();
        for &v in &section.values {
            base.with_parameter(section.parameter, v)
                .map_err(|e| Error::config(format!("sweep value {v}: {e}")))?;
        }
        Ok(SweepConfig {
            base,
            parameter: section.parameter,
            values: section.values.clone(),
        })
    }
}

impl From<&ScenarioConfig> for ConfigFile {
    fn from(s: &ScenarioConfig) -> Self {
        ConfigFile {
            exchange: s.exchange,
            grid: s.grid,
            packet: s.packet,
            partner: s.partner,
            barrier: s.barrier,
            evolution: s.evolution,
            measurement: s.measurement,
            sweep: None,
        }
    }
}

impl From<&SweepConfig> for ConfigFile {
    fn from(s: &SweepConfig) -> Self {
        ConfigFile {
            sweep: Some(SweepSection {
                parameter: s.parameter,
                values: s.values.clone(),
            }),
            ..ConfigFile::from(&s.base)
        }
    }
}

/// Parses and validates a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    ConfigFile::from_toml(text)?.scenario()
}

/// Parses and validates a sweep from TOML text.
pub fn parse_sweep(text: &str) -> Result<SweepConfig> {
    ConfigFile::from_toml(text)?.sweep()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BASE: &str = r#"
exchange = "boson"

[grid]
half_width = 102.4
points = 4096

[packet]
center = -30.0
wavenumber = 8.0
width = 1.0

[partner]
separation = 20.0

[barrier]
width = 0.5
"#;

    #[test]
    fn parses_minimal_scenario_with_defaults() {
        let s = parse_scenario(BASE).unwrap();
        assert_eq!(s.exchange, Exchange::Boson);
        assert_eq!(s.partner.wavenumber_offset, 0.0);
        assert_eq!(s.evolution, SimulationSettings::default());
        assert_eq!(s.packet_b().center, -10.0);
        match s.barrier_setting().unwrap() {
            BarrierSetting::Calibrate(goal) => {
                assert_eq!(goal.target, 0.5);
                assert_eq!(goal.tolerance, 0.005);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for extra in [
            "typo = 1\n",
            "[grid]\nhalf_width = 1.0\npoints = 8\nextra = 2\n",
        ] {
            let text = format!("{extra}{BASE}");
            assert!(parse_scenario(&text).is_err(), "{extra}");
        }
        let text = BASE.replace("[barrier]\nwidth = 0.5", "[barrier]\nwidth = 0.5\nhieght = 3.0");
        assert!(matches!(parse_scenario(&text), Err(Error::Parse(_))));
        let text = format!("{BASE}\n[evolution]\ndt = 0.001\nsteps = 4\n");
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn barrier_modes() {
        let fixed = BASE.replace("width = 0.5", "width = 0.5\nheight = 20.0");
        let s = parse_scenario(&fixed).unwrap();
        assert!(matches!(s.barrier_setting().unwrap(), BarrierSetting::Fixed(b) if b.height == 20.0));
        let both = BASE.replace("width = 0.5", "width = 0.5\nheight = 20.0\ntarget = 0.5");
        assert!(parse_scenario(&both).is_err());
        let bad_target = BASE.replace("width = 0.5", "width = 0.5\ntarget = 1.5");
        assert!(parse_scenario(&bad_target).is_err());
        let coarse = BASE.replace("width = 0.5", "width = 0.2");
        assert!(parse_scenario(&coarse).is_err());
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        for (from, to) in [
            ("separation = 20.0", "separation = -1.0"),
            ("separation = 20.0", "separation = 200.0"),
            ("points = 4096", "points = 4000"),
            ("wavenumber = 8.0", "wavenumber = 70.0"),
            ("width = 1.0", "width = nan"),
        ] {
            let text = BASE.replace(from, to);
            assert!(matches!(parse_scenario(&text), Err(Error::Config(_))), "{to}");
        }
    }

    #[test]
    fn sweeps() {
        let text = format!("{BASE}\n[sweep]\nparameter = \"separation_d\"\nvalues = [0.0, 5.0, 10.0]\n");
        let sweep = parse_sweep(&text).unwrap();
        assert_eq!(sweep.values.len(), 3);
        let row = sweep.base.with_parameter(sweep.parameter, 5.0).unwrap();
        assert_eq!(row.partner.separation, 5.0);
        assert!(parse_scenario(&text).is_ok());

        let empty = format!("{BASE}\n[sweep]\nparameter = \"separation_d\"\nvalues = []\n");
        assert!(parse_sweep(&empty).is_err());
        let out_of_box = format!("{BASE}\n[sweep]\nparameter = \"separation_d\"\nvalues = [0.0, 500.0]\n");
        assert!(parse_sweep(&out_of_box).is_err());
        assert!(parse_sweep(BASE).is_err());

        let phase = format!("{BASE}\n[sweep]\nparameter = \"phase_k0d\"\nvalues = [160.0]\n");
        let sweep = parse_sweep(&phase).unwrap();
        let row = sweep.base.with_parameter(sweep.parameter, 120.0).unwrap();
        assert_eq!(row.packet.wavenumber, 6.0);
        assert_eq!(row.parameter_value(SweepParameter::PhaseK0d), 120.0);
    }

    #[test]
    fn json_round_trip() {
        let text = format!("{BASE}\n[sweep]\nparameter = \"wavenumber_dk\"\nvalues = [0.0, -16.0]\n");
        let file = ConfigFile::from_toml(&text).unwrap();
        let json = serde_json::to_string(&file).unwrap();
        assert_eq!(ConfigFile::from_json(&json).unwrap(), file);
        let echoed = ConfigFile::from(&file.sweep().unwrap());
        assert_eq!(echoed, file);
    }

    proptest! {
        #[test]
        fn parser_never_panics(text in "\\PC{0,200}") {
            let _ = parse_scenario(&text);
            let _ = parse_sweep(&text);
        }

        #[test]
        fn mutated_configs_never_panic(pos in 0usize..400, byte in any::<u8>()) {
            let mut bytes = BASE.as_bytes().to_vec();
            let i = pos % bytes.len();
            bytes[i] = byte;
            if let Ok(text) = String::from_utf8(bytes) {
                let _ = parse_scenario(&text);
            }
        }
    }
}
