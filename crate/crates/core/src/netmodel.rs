//! Two-source mixed transmission line and its sequence-impedance algebra.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex phasor or impedance. Units depend on context (Ω, Ω/km, V, A, pu).
pub type ComplexValue = Complex64;

/// Positive- and zero-sequence series impedance per km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceImpedancePerKm {
    pub z1: ComplexValue,
    pub z0: ComplexValue,
}

impl SequenceImpedancePerKm {
    pub fn new(z1: ComplexValue, z0: ComplexValue) -> Result<Self> {
        let z = Self { z1, z0 };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("z1", self.z1), ("z0", self.z0)] {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Config(format!("{name} is not finite")));
            }
            if v.re < 0.0 || v.im <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} = {v} must have re >= 0 and im > 0"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionKind {
    Overhead,
    Cable,
}

impl SectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Overhead => "overhead",
            SectionKind::Cable => "cable",
        }
    }
}

impl std::fmt::Display for SectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSection {
    pub kind: SectionKind,
    pub length_km: f64,
    pub z: SequenceImpedancePerKm,
    /// Shunt capacitance (nF/km). Only checked by [`MixedLine::validate`];
    /// the phasor fault loop ignores it.
    pub shunt_c_nf_per_km: f64,
}

/// Ordered chain of sections, relay end first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedLine {
    pub sections: Vec<LineSection>,
    pub nominal_voltage_kv: f64,
    pub frequency_hz: f64,
}

/// Cable series reactance must sit in this band relative to overhead.
pub const CABLE_REACTANCE_RATIO: (f64, f64) = (0.50, 0.70);
/// Cable shunt capacitance must sit in this band relative to overhead.
pub const CABLE_CAPACITANCE_RATIO: (f64, f64) = (30.0, 40.0);

impl MixedLine {
    pub fn total_length(&self) -> f64 {
        self.sections.iter().map(|s| s.length_km).sum()
    }

    /// Distance from the relay to the start of section `index`.
    pub fn section_offset(&self, index: usize) -> f64 {
        self.sections[..index].iter().map(|s| s.length_km).sum()
    }

    /// Index of the section containing `d`; junction points belong to the
    /// section that ends there.
    pub fn section_at(&self, d: f64) -> Option<usize> {
        let mut start = 0.0;
        for (i, s) in self.sections.iter().enumerate() {
            let end = start + s.length_km;
            if d >= start && d <= end {
                return Some(i);
            }
            start = end;
        }
        None
    }

    pub fn validate(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::Config("line has no sections".into()));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(Error::Config("frequency must be positive".into()));
        }
        if !(self.nominal_voltage_kv > 0.0) {
            return Err(Error::Config("nominal voltage must be positive".into()));
        }
        for (i, s) in self.sections.iter().enumerate() {
            if !(s.length_km > 0.0) || !s.length_km.is_finite() {
                return Err(Error::Config(format!(
                    "section {i} length must be positive"
                )));
            }
            s.z.validate()
                .map_err(|e| Error::Config(format!("section {i}: {e}")))?;
        }
        let overhead: Vec<&LineSection> = self
            .sections
            .iter()
            .filter(|s| s.kind == SectionKind::Overhead)
            .collect();
        for cable in self
            .sections
            .iter()
            .filter(|s| s.kind == SectionKind::Cable)
        {
            for oh in &overhead {
                let ratio = cable.z.z1.im / oh.z.z1.im;
                let (lo, hi) = CABLE_REACTANCE_RATIO;
                if !(lo - 1e-12..=hi + 1e-12).contains(&ratio) {
                    return Err(Error::Config(format!(
                        "cable/overhead series reactance ratio {ratio:.3} outside [{lo}, {hi}]"
                    )));
                }
                let cap = cable.shunt_c_nf_per_km / oh.shunt_c_nf_per_km;
                let (lo, hi) = CABLE_CAPACITANCE_RATIO;
                if !(lo..=hi).contains(&cap) {
                    return Err(Error::Config(format!(
                        "cable/overhead shunt capacitance ratio {cap:.2} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Positive- and zero-sequence series impedance from the relay to `d` km.
    pub fn cumulative_sequence_impedance(&self, d: f64) -> Result<(ComplexValue, ComplexValue)> {
        let total = self.total_length();
        if !(0.0..=total).contains(&d) {
            return Err(Error::Domain(format!(
                "distance {d} km outside line [0, {total}]"
            )));
        }
        let mut z1 = ComplexValue::new(0.0, 0.0);
        let mut z0 = ComplexValue::new(0.0, 0.0);
        let mut remaining = d;
        for s in &self.sections {
            if remaining <= 0.0 {
                break;
            }
            let len = remaining.min(s.length_km);
            z1 += s.z.z1 * len;
            z0 += s.z.z0 * len;
            remaining -= len;
        }
        Ok((z1, z0))
    }

    /// Positive-sequence impedance of the whole line.
    pub fn total_z1(&self) -> ComplexValue {
        self.sections.iter().map(|s| s.z.z1 * s.length_km).sum()
    }

    pub fn total_z0(&self) -> ComplexValue {
        self.sections.iter().map(|s| s.z.z0 * s.length_km).sum()
    }
}

/// Thevenin equivalent of a generator plus step-up transformer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Phase-to-neutral EMF, volts.
    pub emf: ComplexValue,
    pub z1: ComplexValue,
    pub z0: ComplexValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub line: MixedLine,
    pub source_local: SourceModel,
    /// `None` leaves the remote bus without a source (radial feed).
    pub source_remote: Option<SourceModel>,
    /// Load lumped at the remote bus.
    pub load_mw: f64,
    pub load_power_factor: f64,
}

/// Default per-km impedances (Ω/km) and shunt capacitances (nF/km).
pub mod defaults {
    use super::ComplexValue;

    pub const OVERHEAD_Z1: ComplexValue = ComplexValue::new(0.045, 0.42);
    pub const OVERHEAD_Z0: ComplexValue = ComplexValue::new(0.30, 1.26);
    pub const CABLE_Z1: ComplexValue = ComplexValue::new(0.040, 0.21);
    pub const CABLE_Z0: ComplexValue = ComplexValue::new(0.15, 0.10);
    pub const OVERHEAD_SHUNT_NF: f64 = 9.0;
    pub const CABLE_SHUNT_NF: f64 = 315.0;

    pub const SOURCE_Z1: ComplexValue = ComplexValue::new(0.0, 5.0);
    pub const SOURCE_Z0: ComplexValue = ComplexValue::new(0.0, 7.0);
    pub const REMOTE_LAG_DEG: f64 = 10.0;

    pub const NOMINAL_KV: f64 = 154.0;
    pub const FREQUENCY_HZ: f64 = 50.0;
    pub const LOAD_MW: f64 = 20.0;
}

impl LineSection {
    pub fn overhead(length_km: f64) -> Self {
        Self {
            kind: SectionKind::Overhead,
            length_km,
            z: SequenceImpedancePerKm {
                z1: defaults::OVERHEAD_Z1,
                z0: defaults::OVERHEAD_Z0,
            },
            shunt_c_nf_per_km: defaults::OVERHEAD_SHUNT_NF,
        }
    }

    pub fn cable(length_km: f64) -> Self {
        Self {
            kind: SectionKind::Cable,
            length_km,
            z: SequenceImpedancePerKm {
                z1: defaults::CABLE_Z1,
                z0: defaults::CABLE_Z0,
            },
            shunt_c_nf_per_km: defaults::CABLE_SHUNT_NF,
        }
    }
}

impl SourceModel {
    /// Source with nominal phase EMF at the given angle and default impedances.
    pub fn nominal(kv_ll: f64, angle_deg: f64) -> Self {
        let mag = kv_ll * 1e3 / 3f64.sqrt();
        Self {
            emf: ComplexValue::from_polar(mag, angle_deg.to_radians()),
            z1: defaults::SOURCE_Z1,
            z0: defaults::SOURCE_Z0,
        }
    }
}

/// The 154 kV, 50 Hz line: 200 km overhead, 10 km cable, 50 km overhead,
/// fed from both ends with a 20 MW load.
pub fn build_standard_line() -> NetworkModel {
    let line = MixedLine {
        sections: vec![
            LineSection::overhead(200.0),
            LineSection::cable(10.0),
            LineSection::overhead(50.0),
        ],
        nominal_voltage_kv: defaults::NOMINAL_KV,
        frequency_hz: defaults::FREQUENCY_HZ,
    };
    NetworkModel {
        line,
        source_local: SourceModel::nominal(defaults::NOMINAL_KV, 0.0),
        source_remote: Some(SourceModel::nominal(
            defaults::NOMINAL_KV,
            -defaults::REMOTE_LAG_DEG,
        )),
        load_mw: defaults::LOAD_MW,
        load_power_factor: 1.0,
    }
}

impl NetworkModel {
    pub fn validate(&self) -> Result<()> {
        self.line.validate()?;
        if !(self.load_mw >= 0.0) || !self.load_mw.is_finite() {
            return Err(Error::Config("load_mw must be finite and >= 0".into()));
        }
        if !(self.load_power_factor > 0.0 && self.load_power_factor <= 1.0) {
            return Err(Error::Config("load power factor must be in (0, 1]".into()));
        }
        let sources = std::iter::once(&self.source_local).chain(self.source_remote.as_ref());
        for s in sources {
            if !(s.emf.norm() > 0.0) {
                return Err(Error::Config("source EMF must be nonzero".into()));
            }
        }
        Ok(())
    }

    /// Nominal phase-to-neutral voltage in volts.
    pub fn nominal_phase_voltage(&self) -> f64 {
        self.line.nominal_voltage_kv * 1e3 / 3f64.sqrt()
    }
}

/// Zero-sequence compensation factor (z0 − z1) / (3·z1).
pub fn k0_factor(z: &SequenceImpedancePerKm) -> Result<ComplexValue> {
    k0_from(z.z1, z.z0)
}

pub(crate) fn k0_from(z1: ComplexValue, z0: ComplexValue) -> Result<ComplexValue> {
    if z1.norm() == 0.0 {
        return Err(Error::SingularImpedance("k0 needs z1 != 0".into()));
    }
    Ok((z0 - z1) / (z1 * 3.0))
}

/// Per-phase load impedance at nominal voltage. `None` for a zero load
/// (open circuit).
pub fn load_impedance(net: &NetworkModel) -> Option<ComplexValue> {
    load_impedance_at(
        net.line.nominal_voltage_kv,
        net.load_mw,
        net.load_power_factor,
    )
}

/// Z = V_LL² / S with S = P / pf, lagging (inductive) angle arccos(pf).
pub fn load_impedance_at(kv_ll: f64, mw: f64, power_factor: f64) -> Option<ComplexValue> {
    if mw <= 0.0 {
        return None;
    }
    let v = kv_ll * 1e3;
    let s = mw * 1e6 / power_factor;
    Some(ComplexValue::from_polar(v * v / s, power_factor.acos()))
}
