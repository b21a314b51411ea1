//! Experiment configuration, read from TOML. Every field except `seed`
//! has a default; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{
    defaults, ComplexValue, LineSection, MixedLine, NetworkModel, SectionKind,
    SequenceImpedancePerKm, SourceModel,
};
use crate::regress::{RegressorSpec, Variant};
use crate::relaysim::{K0Setting, RelaySettings, DEFAULT_MIN_CURRENT};
use crate::rxplot::CanvasSpec;
use crate::texture::{FeatureConfig, UNIT_OFFSETS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_cv_k")]
    pub cv_k: usize,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub relay: RelayConfig,
    #[serde(default)]
    pub faults: FaultConfig,
    #[serde(default)]
    pub image: ImageConfig,
    #[serde(default)]
    pub features: FeatureSettings,
    #[serde(default)]
    pub scenarios: ScenarioConfig,
    #[serde(default)]
    pub models: ModelConfig,
}

fn default_cv_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub kind: SectionKind,
    pub length_km: f64,
    /// Per-km sequence impedances as [R, X] in ohms; kind defaults if absent.
    #[serde(default)]
    pub z1: Option<[f64; 2]>,
    #[serde(default)]
    pub z0: Option<[f64; 2]>,
    #[serde(default)]
    pub shunt_c_nf_per_km: Option<f64>,
}

impl SectionConfig {
    fn build(&self) -> LineSection {
        let base = match self.kind {
            SectionKind::Overhead => LineSection::overhead(self.length_km),
            SectionKind::Cable => LineSection::cable(self.length_km),
        };
        let c = |v: [f64; 2]| ComplexValue::new(v[0], v[1]);
        LineSection {
            z: SequenceImpedancePerKm {
                z1: self.z1.map_or(base.z.z1, c),
                z0: self.z0.map_or(base.z.z0, c),
            },
            shunt_c_nf_per_km: self.shunt_c_nf_per_km.unwrap_or(base.shunt_c_nf_per_km),
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub nominal_voltage_kv: f64,
    pub frequency_hz: f64,
    pub source_z1: [f64; 2],
    pub source_z0: [f64; 2],
    /// Remote EMF angle relative to the local source, degrees.
    pub remote_angle_deg: f64,
    pub remote_source: bool,
    pub load_mw: f64,
    pub load_power_factor: f64,
    pub sections: Vec<SectionConfig>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let sec = |kind, length_km| SectionConfig {
            kind,
            length_km,
            z1: None,
            z0: None,
            shunt_c_nf_per_km: None,
        };
        Self {
            nominal_voltage_kv: defaults::NOMINAL_KV,
            frequency_hz: defaults::FREQUENCY_HZ,
            source_z1: [defaults::SOURCE_Z1.re, defaults::SOURCE_Z1.im],
            source_z0: [defaults::SOURCE_Z0.re, defaults::SOURCE_Z0.im],
            remote_angle_deg: -defaults::REMOTE_LAG_DEG,
            remote_source: true,
            load_mw: defaults::LOAD_MW,
            load_power_factor: 1.0,
            sections: vec![
                sec(SectionKind::Overhead, 200.0),
                sec(SectionKind::Cable, 10.0),
                sec(SectionKind::Overhead, 50.0),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelayConfig {
    pub sampling_rate_hz: f64,
    pub cycles_pre: usize,
    pub cycles_post: usize,
    pub k0: K0Setting,
    pub min_current_a: f64,
    /// Mho reach as a fraction of the whole-line positive-sequence impedance.
    pub zone_reach_fraction: f64,
}

impl Default for RelayConfig {
    fn default() -> Self {
        let d = RelaySettings::default();
        Self {
            sampling_rate_hz: d.sampling_rate,
            cycles_pre: d.cycles_pre,
            cycles_post: d.cycles_post,
            k0: d.k0,
            min_current_a: DEFAULT_MIN_CURRENT,
            zone_reach_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultConfig {
    pub resistance_ohm: f64,
    pub inception_angle_deg: f64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self {
            resistance_ohm: 0.1,
            inception_angle_deg: 0.0,
        }
    }
}

/// R-X window in ohms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub r_min: f64,
    pub r_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageConfig {
    pub width: usize,
    pub height: usize,
    /// Gray levels of the written images (and of the GLCM).
    pub levels: u16,
    /// `None` frames the window around the whole line impedance.
    pub overhead_window: Option<Window>,
    pub cable_window: Option<Window>,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            levels: 8,
            overhead_window: Some(Window {
                r_min: -20.0,
                r_max: 680.0,
                x_min: -20.0,
                x_max: 200.0,
            }),
            cable_window: Some(Window {
                r_min: 7.65,
                r_max: 11.15,
                x_min: 81.3,
                x_max: 84.8,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSettings {
    pub offsets: Vec<[i32; 2]>,
    pub symmetric: bool,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            offsets: UNIT_OFFSETS.iter().map(|&(a, b)| [a, b]).collect(),
            symmetric: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start_km: f64,
    pub step_km: f64,
    pub count: usize,
}

impl Grid {
    /// Grid points rounded to 1 µm so decimal steps come out exact.
    pub fn points(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| round_km(self.start_km + i as f64 * self.step_km))
            .collect()
    }
}

pub(crate) fn round_km(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionExperiment {
    /// Index into `network.sections`.
    pub section_index: usize,
    /// Training grid, km from the start of the section.
    pub grid: Grid,
    /// Test locations, km from the start of the section.
    pub test_km: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub overhead: SectionExperiment,
    pub cable: SectionExperiment,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            overhead: SectionExperiment {
                section_index: 0,
                grid: Grid {
                    start_km: 5.0,
                    step_km: 5.0,
                    count: 40,
                },
                test_km: (0..8).map(|i| 20.0 + 25.0 * i as f64).collect(),
            },
            cable: SectionExperiment {
                section_index: 1,
                grid: Grid {
                    start_km: 0.2,
                    step_km: 0.2,
                    count: 50,
                },
                test_km: (0..10).map(|i| round_km(0.8 + i as f64)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Variant names in results-table order; all 19 by default.
    pub variants: Vec<String>,
    /// Per-variant hyperparameter overrides keyed by variant name.
    pub hyperparameters: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.iter().map(|v| v.name().to_string()).collect(),
            hyperparameters: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults plus the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            output_dir: None,
            cv_k: default_cv_k(),
            network: NetworkConfig::default(),
            relay: RelayConfig::default(),
            faults: FaultConfig::default(),
            image: ImageConfig::default(),
            features: FeatureSettings::default(),
            scenarios: ScenarioConfig::default(),
            models: ModelConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.cv_k < 2 {
            return Err(Error::Config(format!(
                "cv_k must be at least 2, got {}",
                self.cv_k
            )));
        }
        self.network()?.validate()?;
        self.relay_settings().k0.resolve(&self.network()?, 1e-3)?;
        if !(self.relay.zone_reach_fraction > 0.0) {
            return Err(Error::Config("zone_reach_fraction must be positive".into()));
        }
        if !(2..=crate::texture::MAX_GLCM_LEVELS).contains(&self.image.levels) {
            return Err(Error::Config(format!(
                "image levels must be in 2..=64, got {}",
                self.image.levels
            )));
        }
        for kind in [SectionKind::Overhead, SectionKind::Cable] {
            self.canvas(kind)?.validate()?;
        }
        self.feature_config();
        self.specs()?;
        Ok(())
    }

    pub fn network(&self) -> Result<NetworkModel> {
        let n = &self.network;
        if n.sections.is_empty() {
            return Err(Error::Config("network needs at least one section".into()));
        }
        let line = MixedLine {
            sections: n.sections.iter().map(SectionConfig::build).collect(),
            nominal_voltage_kv: n.nominal_voltage_kv,
            frequency_hz: n.frequency_hz,
        };
        let src = |angle: f64| SourceModel {
            z1: ComplexValue::new(n.source_z1[0], n.source_z1[1]),
            z0: ComplexValue::new(n.source_z0[0], n.source_z0[1]),
            ..SourceModel::nominal(n.nominal_voltage_kv, angle)
        };
        Ok(NetworkModel {
            line,
            source_local: src(0.0),
            source_remote: n.remote_source.then(|| src(n.remote_angle_deg)),
            load_mw: n.load_mw,
            load_power_factor: n.load_power_factor,
        })
    }

    pub fn relay_settings(&self) -> RelaySettings {
        RelaySettings {
            sampling_rate: self.relay.sampling_rate_hz,
            cycles_pre: self.relay.cycles_pre,
            cycles_post: self.relay.cycles_post,
            k0: self.relay.k0,
            min_current: self.relay.min_current_a,
        }
    }

    pub fn canvas(&self, kind: SectionKind) -> Result<CanvasSpec> {
        let img = &self.image;
        let window = match kind {
            SectionKind::Overhead => img.overhead_window,
            SectionKind::Cable => img.cable_window,
        };
        Ok(match window {
            Some(w) => CanvasSpec {
                width: img.width,
                height: img.height,
                r_min: w.r_min,
                r_max: w.r_max,
                x_min: w.x_min,
                x_max: w.x_max,
            },
            None => CanvasSpec::around_line(
                img.width,
                img.height,
                self.network()?.line.total_z1().norm(),
            ),
        })
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            levels: self.image.levels,
            offsets: self.features.offsets.iter().map(|o| (o[0], o[1])).collect(),
            symmetric: self.features.symmetric,
        }
    }

    pub fn specs(&self) -> Result<Vec<RegressorSpec>> {
        if self.models.variants.is_empty() {
            return Err(Error::Config("models.variants is empty".into()));
        }
        let mut specs = Vec::new();
        for name in &self.models.variants {
            let v = Variant::from_name(name)
                .ok_or_else(|| Error::Config(format!("unknown model variant {name:?}")))?;
            if specs.iter().any(|s: &RegressorSpec| s.variant == v) {
                return Err(Error::Config(format!(
                    "model variant {name:?} listed twice"
                )));
            }
            let mut spec = RegressorSpec::new(v);
            if let Some(h) = self.models.hyperparameters.get(name) {
                spec.hyperparameters = h.clone();
            }
            spec.validate()?;
            specs.push(spec);
        }
        for name in self.models.hyperparameters.keys() {
            if !self.models.variants.contains(name) {
                return Err(Error::Config(format!(
                    "hyperparameters given for unlisted variant {name:?}"
                )));
            }
        }
        specs.sort_by_key(|s| s.variant.table_index());
        Ok(specs)
    }

    pub fn experiment(&self, kind: SectionKind) -> &SectionExperiment {
        match kind {
            SectionKind::Overhead => &self.scenarios.overhead,
            SectionKind::Cable => &self.scenarios.cable,
        }
    }
}
