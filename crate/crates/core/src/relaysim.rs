//! Single-line-to-ground fault solution, relay waveform synthesis, full-cycle
//! DFT phasor estimation and the apparent-impedance trajectory.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{k0_from, load_impedance, ComplexValue, NetworkModel};

const ZERO: ComplexValue = ComplexValue::new(0.0, 0.0);

/// Rotation operator a = 1∠120°.
fn rot_a() -> ComplexValue {
    ComplexValue::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Phase (a, b, c) quantities from sequence (0, 1, 2) quantities.
pub fn phases_from_sequences(seq: [ComplexValue; 3]) -> [ComplexValue; 3] {
    let a = rot_a();
    let a2 = a * a;
    let [s0, s1, s2] = seq;
    [s0 + s1 + s2, s0 + a2 * s1 + a * s2, s0 + a * s1 + a2 * s2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultType {
    /// Phase A to ground.
    AG,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    /// km from the relay.
    pub location: f64,
    pub fault_resistance: f64,
    /// Angle of the A-phase voltage wave at the fault instant, degrees.
    pub inception_angle: f64,
    pub fault_type: FaultType,
}

impl FaultScenario {
    pub fn ag(location: f64, fault_resistance: f64, inception_angle: f64) -> Self {
        Self {
            location,
            fault_resistance,
            inception_angle,
            fault_type: FaultType::AG,
        }
    }

    pub fn validate(&self, net: &NetworkModel) -> Result<()> {
        let total = net.line.total_length();
        if !(self.location > 0.0 && self.location < total) {
            return Err(Error::Domain(format!(
                "fault location {} km must lie strictly inside (0, {total})",
                self.location
            )));
        }
        if !(self.fault_resistance >= 0.0) || !self.fault_resistance.is_finite() {
            return Err(Error::Domain(
                "fault resistance must be finite and >= 0".into(),
            ));
        }
        if !self.inception_angle.is_finite() {
            return Err(Error::Domain("inception angle must be finite".into()));
        }
        Ok(())
    }
}

/// Steady-state phasors at the relay (local bus) for one network condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSolution {
    pub relay_va: ComplexValue,
    pub relay_ia: ComplexValue,
    pub relay_3i0: ComplexValue,
    /// Positive-sequence fault current (equal to I2 and I0 at the fault).
    pub fault_i1: ComplexValue,
    /// Phase voltages a, b, c at the relay.
    pub phase_v: [ComplexValue; 3],
    /// Phase currents a, b, c flowing from the relay into the line.
    pub phase_i: [ComplexValue; 3],
    /// Z1th + Z2th + Z0th + 3·Rf seen from the fault; zero for the
    /// pre-fault state.
    pub loop_impedance: ComplexValue,
}

impl FaultSolution {
    fn from_sequences(
        v012: [ComplexValue; 3],
        i012: [ComplexValue; 3],
        fault_i1: ComplexValue,
        loop_impedance: ComplexValue,
    ) -> Self {
        let phase_v = phases_from_sequences(v012);
        let phase_i = phases_from_sequences(i012);
        Self {
            relay_va: phase_v[0],
            relay_ia: phase_i[0],
            relay_3i0: i012[0] * 3.0,
            fault_i1,
            phase_v,
            phase_i,
            loop_impedance,
        }
    }

    /// Va / (Ia + k0·3I0) of this steady state.
    pub fn apparent_impedance(&self, k0: ComplexValue) -> ComplexValue {
        self.relay_va / (self.relay_ia + k0 * self.relay_3i0)
    }
}

/// Parallel combination where `None` is an open circuit.
fn parallel(a: Option<ComplexValue>, b: Option<ComplexValue>) -> Option<ComplexValue> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if a == ZERO || b == ZERO {
                Some(ZERO)
            } else {
                Some(a * b / (a + b))
            }
        }
    }
}

/// Admittance of a series impedance terminated in `end`; open end gives 0.
fn branch_admittance(series: ComplexValue, end: Option<ComplexValue>) -> Result<ComplexValue> {
    match end {
        None => Ok(ZERO),
        Some(z) => {
            let total = series + z;
            if total == ZERO {
                return Err(Error::SingularNetwork("zero-impedance branch".into()));
            }
            Ok(total.inv())
        }
    }
}

struct PrefaultState {
    relay_current: ComplexValue,
    relay_voltage: ComplexValue,
}

fn prefault_state(net: &NetworkModel) -> Result<PrefaultState> {
    let zs = net.source_local.z1;
    let zline = net.line.total_z1();
    let es = net.source_local.emf;
    if zs + zline == ZERO {
        return Err(Error::SingularNetwork(
            "zero impedance between buses".into(),
        ));
    }
    let ya = (zs + zline).inv();
    let zload = load_impedance(net);
    let remote = net.source_remote;

    // Remote bus voltage by nodal analysis; an ideal remote source pins it.
    let v_remote = match remote {
        Some(r) if r.z1 == ZERO => r.emf,
        _ => {
            let (yr, ir) = match remote {
                Some(r) => (r.z1.inv(), r.emf / r.z1),
                None => (ZERO, ZERO),
            };
            let yl = match zload {
                Some(z) if z == ZERO => {
                    return Err(Error::SingularNetwork("zero load impedance".into()))
                }
                Some(z) => z.inv(),
                None => ZERO,
            };
            (es * ya + ir) / (ya + yr + yl)
        }
    };
    let i = (es - v_remote) * ya;
    Ok(PrefaultState {
        relay_current: i,
        relay_voltage: es - zs * i,
    })
}

/// Balanced pre-fault steady state at the relay.
pub fn solve_prefault(net: &NetworkModel) -> Result<FaultSolution> {
    let st = prefault_state(net)?;
    Ok(FaultSolution::from_sequences(
        [ZERO, st.relay_voltage, ZERO],
        [ZERO, st.relay_current, ZERO],
        ZERO,
        ZERO,
    ))
}

/// Post-fault steady state for an A-g fault: the three sequence networks in
/// series with 3·Rf, with relay-side currents from current division.
pub fn solve_slg_fault(net: &NetworkModel, sc: &FaultScenario) -> Result<FaultSolution> {
    sc.validate(net)?;
    let d = sc.location;
    let (z1d, z0d) = net.line.cumulative_sequence_impedance(d)?;
    let z1rest = net.line.total_z1() - z1d;
    let z0rest = net.line.total_z0() - z0d;

    let pre = prefault_state(net)?;
    let v_fault_pre = pre.relay_voltage - z1d * pre.relay_current;

    let src = net.source_local;
    let end1 = parallel(net.source_remote.map(|r| r.z1), load_impedance(net));
    // Load is ungrounded: absent from the zero-sequence network.
    let end0 = net.source_remote.map(|r| r.z0);

    let y_left = |z: ComplexValue| -> Result<ComplexValue> {
        if z == ZERO {
            return Err(Error::SingularNetwork(
                "zero impedance from source to fault".into(),
            ));
        }
        Ok(z.inv())
    };
    // Negative-sequence impedances equal positive-sequence ones.
    let yl1 = y_left(src.z1 + z1d)?;
    let yl0 = y_left(src.z0 + z0d)?;
    let yr1 = branch_admittance(z1rest, end1)?;
    let yr0 = branch_admittance(z0rest, end0)?;

    let zth1 = (yl1 + yr1).inv();
    let zth0 = (yl0 + yr0).inv();
    let loop_z = zth1 * 2.0 + zth0 + 3.0 * sc.fault_resistance;
    if loop_z.norm() == 0.0 || !loop_z.re.is_finite() || !loop_z.im.is_finite() {
        return Err(Error::SingularNetwork(format!(
            "fault loop impedance {loop_z} at {d} km"
        )));
    }
    let i_f = v_fault_pre / loop_z;

    let share1 = yl1 / (yl1 + yr1);
    let share0 = yl0 / (yl0 + yr0);
    let i1 = pre.relay_current + i_f * share1;
    let i2 = i_f * share1;
    let i0 = i_f * share0;
    let v1 = src.emf - src.z1 * i1;
    let v2 = -src.z1 * i2;
    let v0 = -src.z0 * i0;
    Ok(FaultSolution::from_sequences(
        [v0, v1, v2],
        [i0, i1, i2],
        i_f,
        loop_z,
    ))
}

/// DC-offset time constant L/R = X/(ω·R) of an impedance, seconds.
/// Infinite for a purely reactive loop.
pub fn loop_time_constant(z: ComplexValue, frequency_hz: f64) -> f64 {
    if z.re <= 0.0 {
        return f64::INFINITY;
    }
    z.im.abs() / (2.0 * PI * frequency_hz * z.re)
}

/// Sampled relay-terminal waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayRecord {
    pub sampling_rate: f64,
    pub frequency_hz: f64,
    /// Phase voltages a, b, c (V).
    pub voltages: [Vec<f64>; 3],
    /// Phase currents a, b, c (A).
    pub currents: [Vec<f64>; 3],
    /// First fault sample; equals the record length when no fault is applied.
    pub fault_index: usize,
    /// Initial DC offset of each current channel at inception.
    pub dc_offsets: [f64; 3],
    /// Time constant of the offset decay, seconds.
    pub tau: f64,
}

impl RelayRecord {
    pub fn len(&self) -> usize {
        self.voltages[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples_per_cycle(&self) -> usize {
        (self.sampling_rate / self.frequency_hz).round() as usize
    }
}

/// Instantaneous value of an RMS phasor at time `t`.
fn instantaneous(phasor: ComplexValue, omega: f64, t: f64) -> f64 {
    2f64.sqrt() * phasor.norm() * (omega * t + phasor.arg()).cos()
}

pub(crate) fn samples_per_cycle(sampling_rate: f64, frequency_hz: f64) -> Result<usize> {
    let ratio = sampling_rate / (2.0 * frequency_hz);
    if !ratio.is_finite() || ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "sampling rate {sampling_rate} Hz is not an integer multiple of 2·{frequency_hz} Hz"
        )));
    }
    let n = (sampling_rate / frequency_hz).round() as usize;
    if n < 16 {
        return Err(Error::Config(format!(
            "sampling rate gives {n} samples/cycle; at least 16 required"
        )));
    }
    Ok(n)
}

/// Synthesizes `n_cycles_pre` cycles of pre-fault sinusoids, then switches to
/// the fault phasors at the first sample where the A-phase voltage angle
/// reaches `sc.inception_angle`, keeping `n_cycles_post` cycles of fault data.
/// Currents carry a decaying DC offset that makes them continuous at inception.
pub fn synthesize_record(
    net: &NetworkModel,
    sc: &FaultScenario,
    prefault: &FaultSolution,
    fault: &FaultSolution,
    sampling_rate: f64,
    n_cycles_pre: usize,
    n_cycles_post: usize,
) -> Result<RelayRecord> {
    let f = net.line.frequency_hz;
    let n = samples_per_cycle(sampling_rate, f)?;
    let omega = 2.0 * PI * f;
    let dt = 1.0 / sampling_rate;
    let step = 2.0 * PI / n as f64;

    let base = n_cycles_pre * n;
    let fault_index = if n_cycles_post == 0 {
        base
    } else {
        let alpha = sc.inception_angle.to_radians();
        let phi = prefault.phase_v[0].arg();
        (base..base + n)
            .find(|&k| {
                let theta = (omega * k as f64 * dt + phi - alpha).rem_euclid(2.0 * PI);
                theta < step - 1e-12 || theta > 2.0 * PI - 1e-12
            })
            .unwrap_or(base)
    };
    let len = fault_index + n_cycles_post * n;
    let t_f = fault_index as f64 * dt;

    let tau = loop_time_constant(fault.loop_impedance, f);
    let mut dc_offsets = [0.0; 3];
    if n_cycles_post > 0 {
        for (p, dc) in dc_offsets.iter_mut().enumerate() {
            *dc = instantaneous(prefault.phase_i[p], omega, t_f)
                - instantaneous(fault.phase_i[p], omega, t_f);
        }
    }

    let mut voltages: [Vec<f64>; 3] = Default::default();
    let mut currents: [Vec<f64>; 3] = Default::default();
    for p in 0..3 {
        voltages[p].reserve(len);
        currents[p].reserve(len);
        for k in 0..len {
            let t = k as f64 * dt;
            if k < fault_index {
                voltages[p].push(instantaneous(prefault.phase_v[p], omega, t));
                currents[p].push(instantaneous(prefault.phase_i[p], omega, t));
            } else {
                let decay = if tau.is_infinite() {
                    1.0
                } else {
                    (-(t - t_f) / tau).exp()
                };
                voltages[p].push(instantaneous(fault.phase_v[p], omega, t));
                currents[p].push(instantaneous(fault.phase_i[p], omega, t) + dc_offsets[p] * decay);
            }
        }
    }
    Ok(RelayRecord {
        sampling_rate,
        frequency_hz: f,
        voltages,
        currents,
        fault_index,
        dc_offsets,
        tau,
    })
}

/// Sliding full-cycle DFT phasors for every channel of a record.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorSeries {
    pub voltages: [Vec<ComplexValue>; 3],
    pub currents: [Vec<ComplexValue>; 3],
    /// Residual current 3I0 = ia + ib + ic.
    pub residual: Vec<ComplexValue>,
    pub window_start: Vec<usize>,
}

/// Full-cycle DFT at the fundamental over every window of one channel.
/// RMS magnitude, angle referenced to the window start.
pub fn full_cycle_dft(samples: &[f64], samples_per_cycle: usize) -> Result<Vec<ComplexValue>> {
    let n = samples_per_cycle;
    if n == 0 || samples.len() < n {
        return Err(Error::Domain(format!(
            "record of {} samples is shorter than one cycle ({n})",
            samples.len()
        )));
    }
    let twiddle: Vec<ComplexValue> = (0..n)
        .map(|k| ComplexValue::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect();
    let scale = 2f64.sqrt() / n as f64;
    Ok(samples
        .windows(n)
        .map(|w| {
            w.iter()
                .zip(&twiddle)
                .map(|(&x, &tw)| tw * x)
                .sum::<ComplexValue>()
                * scale
        })
        .collect())
}

pub fn estimate_phasors(rec: &RelayRecord) -> Result<PhasorSeries> {
    let n = rec.samples_per_cycle();
    let dft = |ch: &Vec<f64>| full_cycle_dft(ch, n);
    let residual_samples: Vec<f64> = (0..rec.len())
        .map(|k| rec.currents.iter().map(|c| c[k]).sum())
        .collect();
    let voltages = [
        dft(&rec.voltages[0])?,
        dft(&rec.voltages[1])?,
        dft(&rec.voltages[2])?,
    ];
    let currents = [
        dft(&rec.currents[0])?,
        dft(&rec.currents[1])?,
        dft(&rec.currents[2])?,
    ];
    let residual = full_cycle_dft(&residual_samples, n)?;
    let window_start = (0..residual.len()).collect();
    Ok(PhasorSeries {
        voltages,
        currents,
        residual,
        window_start,
    })
}

/// Apparent impedance locus as plotted on the relay's R-X diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceTrajectory {
    /// (R, X) in ohms.
    pub points: Vec<(f64, f64)>,
    pub window_start_indices: Vec<usize>,
}

impl ImpedanceTrajectory {
    /// Final point; the converged reading once the window sits in
    /// steady fault data.
    pub fn last(&self) -> Option<ComplexValue> {
        self.points.last().map(|&(r, x)| ComplexValue::new(r, x))
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub const DEFAULT_MIN_CURRENT: f64 = 1e-3;

/// Va / (Ia + k0·3I0) per window, skipping windows whose denominator is
/// below [`DEFAULT_MIN_CURRENT`].
pub fn impedance_trajectory(rec: &RelayRecord, k0: ComplexValue) -> Result<ImpedanceTrajectory> {
    impedance_trajectory_with(rec, k0, DEFAULT_MIN_CURRENT)
}

pub fn impedance_trajectory_with(
    rec: &RelayRecord,
    k0: ComplexValue,
    min_current: f64,
) -> Result<ImpedanceTrajectory> {
    let ph = estimate_phasors(rec)?;
    let mut points = Vec::with_capacity(ph.residual.len());
    let mut window_start_indices = Vec::with_capacity(ph.residual.len());
    for (w, &start) in ph.window_start.iter().enumerate() {
        let denom = ph.currents[0][w] + k0 * ph.residual[w];
        if denom.norm() < min_current {
            continue;
        }
        let z = ph.voltages[0][w] / denom;
        if z.re.is_finite() && z.im.is_finite() {
            points.push((z.re, z.im));
            window_start_indices.push(start);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    Ok(ImpedanceTrajectory {
        points,
        window_start_indices,
    })
}

/// Which zero-sequence compensation the relay applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum K0Setting {
    /// k0 of the first (relay-end) section for every fault.
    FirstSection,
    /// k0 matching the cumulative path to the fault.
    MatchedPath,
    /// Explicit k0 value [re, im].
    Fixed([f64; 2]),
}

impl K0Setting {
    pub fn resolve(&self, net: &NetworkModel, location: f64) -> Result<ComplexValue> {
        match *self {
            K0Setting::FirstSection => {
                let s = net
                    .line
                    .sections
                    .first()
                    .ok_or_else(|| Error::Config("line has no sections".into()))?;
                k0_from(s.z.z1, s.z.z0)
            }
            K0Setting::MatchedPath => {
                let (z1, z0) = net.line.cumulative_sequence_impedance(location)?;
                k0_from(z1, z0)
            }
            K0Setting::Fixed([re, im]) => Ok(ComplexValue::new(re, im)),
        }
    }
}

/// Acquisition settings for one simulated relay record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaySettings {
    pub sampling_rate: f64,
    pub cycles_pre: usize,
    pub cycles_post: usize,
    pub k0: K0Setting,
    pub min_current: f64,
}

impl Default for RelaySettings {
    fn default() -> Self {
        Self {
            sampling_rate: 4000.0,
            cycles_pre: 2,
            cycles_post: 6,
            k0: K0Setting::FirstSection,
            min_current: DEFAULT_MIN_CURRENT,
        }
    }
}

/// Fault solve, waveform synthesis and trajectory in one call.
pub fn simulate_trajectory(
    net: &NetworkModel,
    sc: &FaultScenario,
    settings: &RelaySettings,
) -> Result<ImpedanceTrajectory> {
    let pre = solve_prefault(net)?;
    let post = solve_slg_fault(net, sc)?;
    let rec = synthesize_record(
        net,
        sc,
        &pre,
        &post,
        settings.sampling_rate,
        settings.cycles_pre,
        settings.cycles_post,
    )?;
    let k0 = settings.k0.resolve(net, sc.location)?;
    impedance_trajectory_with(&rec, k0, settings.min_current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{
        build_standard_line, LineSection, MixedLine, SequenceImpedancePerKm, SourceModel,
    };

    fn c(re: f64, im: f64) -> ComplexValue {
        ComplexValue::new(re, im)
    }

    fn rel(a: ComplexValue, b: ComplexValue) -> f64 {
        (a - b).norm() / b.norm()
    }

    /// Infinite local bus, remote source open, no load: a single-ended feed.
    fn radial(net: &NetworkModel) -> NetworkModel {
        let mut r = net.clone();
        r.source_local.z1 = ZERO;
        r.source_local.z0 = ZERO;
        r.source_remote = None;
        r.load_mw = 0.0;
        r
    }

    fn unit_network() -> NetworkModel {
        // Every sequence loop is j1 Ω at the 1 km fault point.
        let z = SequenceImpedancePerKm {
            z1: c(0.0, 1.0),
            z0: c(0.0, 1.0),
        };
        let line = MixedLine {
            sections: vec![LineSection {
                z,
                ..LineSection::overhead(2.0)
            }],
            nominal_voltage_kv: 3f64.sqrt() * 1e-3,
            frequency_hz: 50.0,
        };
        NetworkModel {
            line,
            source_local: SourceModel {
                emf: c(1.0, 0.0),
                z1: ZERO,
                z0: ZERO,
            },
            source_remote: None,
            load_mw: 0.0,
            load_power_factor: 1.0,
        }
    }

    #[test]
    fn series_sequence_connection_by_hand() {
        let net = unit_network();
        let sol = solve_slg_fault(&net, &FaultScenario::ag(1.0, 0.0, 0.0)).unwrap();
        assert!((sol.fault_i1 - c(0.0, -1.0 / 3.0)).norm() < 1e-12);
        assert!((sol.fault_i1.norm() - 0.3333).abs() < 1e-4);
        assert!((sol.relay_ia - c(0.0, -1.0)).norm() < 1e-12);
        assert!((sol.relay_3i0 - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn large_fault_resistance_leaves_load_current() {
        let net = build_standard_line();
        let pre = solve_prefault(&net).unwrap();
        let sol = solve_slg_fault(&net, &FaultScenario::ag(100.0, 1e6, 0.0)).unwrap();
        assert!(rel(sol.relay_ia, pre.relay_ia) < 1e-3);
    }

    #[test]
    fn bolted_fault_voltage_below_nominal() {
        let net = build_standard_line();
        for d in [5.0, 100.0, 205.0, 255.0] {
            let sol = solve_slg_fault(&net, &FaultScenario::ag(d, 0.0, 0.0)).unwrap();
            assert!(sol.relay_va.norm() < net.nominal_phase_voltage());
        }
    }

    #[test]
    fn radial_compensated_loop_reads_z1() {
        let net = radial(&build_standard_line());
        for d in [50.0, 100.0, 150.0, 205.0] {
            let sol = solve_slg_fault(&net, &FaultScenario::ag(d, 0.0, 0.0)).unwrap();
            let k0 = K0Setting::MatchedPath.resolve(&net, d).unwrap();
            let (z1, _) = net.line.cumulative_sequence_impedance(d).unwrap();
            assert!(rel(sol.apparent_impedance(k0), z1) < 1e-9, "d = {d}");
        }
    }

    #[test]
    fn fault_location_outside_line_is_rejected() {
        let net = build_standard_line();
        for d in [0.0, 260.0, -3.0] {
            assert!(matches!(
                solve_slg_fault(&net, &FaultScenario::ag(d, 0.0, 0.0)),
                Err(Error::Domain(_))
            ));
        }
    }

    #[test]
    fn zero_loop_is_singular() {
        let mut net = unit_network();
        net.line.sections[0].z = SequenceImpedancePerKm { z1: ZERO, z0: ZERO };
        let err = solve_slg_fault(&net, &FaultScenario::ag(1.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularNetwork(_)), "{err}");
    }

    #[test]
    fn time_constant_of_unit_loop() {
        let tau = loop_time_constant(c(1.0, 1.0), 50.0);
        assert!((tau - 3.1831e-3).abs() < 1e-6);
        assert!(loop_time_constant(c(0.0, 1.0), 50.0).is_infinite());
    }

    #[test]
    fn sampling_rate_validation() {
        let net = build_standard_line();
        let sc = FaultScenario::ag(50.0, 0.1, 0.0);
        let pre = solve_prefault(&net).unwrap();
        let post = solve_slg_fault(&net, &sc).unwrap();
        for fs in [750.0, 4010.0, 0.0] {
            assert!(matches!(
                synthesize_record(&net, &sc, &pre, &post, fs, 2, 6),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn prefault_only_record_matches_phasors() {
        let net = build_standard_line();
        let sc = FaultScenario::ag(50.0, 0.1, 30.0);
        let pre = solve_prefault(&net).unwrap();
        let post = solve_slg_fault(&net, &sc).unwrap();
        let rec = synthesize_record(&net, &sc, &pre, &post, 4000.0, 3, 0).unwrap();
        assert_eq!(rec.fault_index, rec.len());
        let omega = 2.0 * PI * 50.0;
        for p in 0..3 {
            let amp = 2f64.sqrt() * pre.phase_v[p].norm();
            for (k, &v) in rec.voltages[p].iter().enumerate() {
                let t = k as f64 / 4000.0;
                let expect = amp * (omega * t + pre.phase_v[p].arg()).cos();
                assert!((v - expect).abs() <= 1e-9 * amp);
            }
        }
    }

    #[test]
    fn inception_at_fault_current_zero_carries_prefault_offset() {
        let net = build_standard_line();
        let pre = solve_prefault(&net).unwrap();
        let probe = FaultScenario::ag(80.0, 0.1, 0.0);
        let post = solve_slg_fault(&net, &probe).unwrap();
        // A-phase fault current crosses zero where its angle is 90°; express
        // that instant as a voltage angle.
        let angle = 90.0 - (post.phase_i[0].arg() - pre.phase_v[0].arg()).to_degrees();
        let sc = FaultScenario::ag(80.0, 0.1, angle);
        let fs = 4000.0;
        let rec = synthesize_record(&net, &sc, &pre, &post, fs, 2, 6).unwrap();
        let omega = 2.0 * PI * 50.0;
        let t_f = rec.fault_index as f64 / fs;
        let i_pre =
            2f64.sqrt() * pre.phase_i[0].norm() * (omega * t_f + pre.phase_i[0].arg()).cos();
        let i_ss =
            2f64.sqrt() * post.phase_i[0].norm() * (omega * t_f + post.phase_i[0].arg()).cos();
        // sampling quantizes the instant to within one sample of the crossing
        assert!(i_ss.abs() < 2f64.sqrt() * post.phase_i[0].norm() * (2.0 * PI / 80.0).sin() + 1e-9);
        assert!((rec.dc_offsets[0] - (i_pre - i_ss)).abs() < 1e-9 * post.phase_i[0].norm());
        // continuity across inception
        let k = rec.fault_index;
        let before = rec.currents[0][k - 1];
        let after = rec.currents[0][k];
        let step = 2f64.sqrt() * pre.phase_i[0].norm() * (2.0 * PI / 80.0) * 2.0;
        assert!((after - before).abs() < step.max(1.0));
    }

    #[test]
    fn dft_tone_dc_and_mix() {
        let n = 80;
        let amp = 1234.5;
        let tone: Vec<f64> = (0..400)
            .map(|k| amp * (2.0 * PI * k as f64 / n as f64 + 0.3).cos())
            .collect();
        for p in full_cycle_dft(&tone, n).unwrap() {
            assert!((p.norm() - amp / 2f64.sqrt()).abs() <= 1e-9 * amp);
        }
        let dc = vec![7.5; 200];
        for p in full_cycle_dft(&dc, n).unwrap() {
            assert!(p.norm() < 1e-12);
        }
        let mixed: Vec<f64> = tone.iter().map(|v| v + 321.0).collect();
        for p in full_cycle_dft(&mixed, n).unwrap() {
            assert!((p.norm() - amp / 2f64.sqrt()).abs() <= 1e-9 * amp);
        }
        let out = full_cycle_dft(&tone, n).unwrap();
        assert_eq!(out.len(), tone.len() - n + 1);
        assert!(matches!(
            full_cycle_dft(&tone[..79], n),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn prefault_windows_read_load_point() {
        let net = build_standard_line();
        let sc = FaultScenario::ag(120.0, 0.1, 0.0);
        let pre = solve_prefault(&net).unwrap();
        let post = solve_slg_fault(&net, &sc).unwrap();
        let rec = synthesize_record(&net, &sc, &pre, &post, 4000.0, 2, 6).unwrap();
        let k0 = K0Setting::FirstSection.resolve(&net, sc.location).unwrap();
        let traj = impedance_trajectory(&rec, k0).unwrap();
        let expected = pre.relay_va / pre.relay_ia;
        let n = rec.samples_per_cycle();
        for (&(r, x), &start) in traj.points.iter().zip(&traj.window_start_indices) {
            if start + n <= rec.fault_index {
                assert!(rel(c(r, x), expected) < 5e-3);
            }
        }

        // With a lossless short path the relay sees the load itself.
        let mut direct = net.clone();
        direct.source_local.z1 = ZERO;
        direct.source_remote = None;
        direct.line.sections.truncate(1);
        direct.line.sections[0].z.z1 = c(0.0, 1e-9);
        let pre = solve_prefault(&direct).unwrap();
        let zl = load_impedance(&direct).unwrap();
        assert!(rel(pre.relay_va / pre.relay_ia, zl) < 5e-3);
    }

    #[test]
    fn balanced_uncompensated_is_plain_ratio() {
        let net = build_standard_line();
        let sc = FaultScenario::ag(120.0, 0.1, 0.0);
        let pre = solve_prefault(&net).unwrap();
        let rec = synthesize_record(&net, &sc, &pre, &pre, 4000.0, 2, 0).unwrap();
        let ph = estimate_phasors(&rec).unwrap();
        let traj = impedance_trajectory(&rec, ZERO).unwrap();
        for (w, &(r, x)) in traj.points.iter().enumerate() {
            let direct = ph.voltages[0][w] / ph.currents[0][w];
            assert_eq!(c(r, x), direct);
        }
    }

    #[test]
    fn radial_trajectory_converges_to_z1() {
        let net = radial(&build_standard_line());
        let settings = RelaySettings {
            k0: K0Setting::MatchedPath,
            ..Default::default()
        };
        for d in [50.0, 100.0, 150.0] {
            let traj =
                simulate_trajectory(&net, &FaultScenario::ag(d, 0.0, 0.0), &settings).unwrap();
            let (z1, _) = net.line.cumulative_sequence_impedance(d).unwrap();
            assert!(rel(traj.last().unwrap(), z1) < 0.01, "d = {d}");
        }
    }

    #[test]
    fn empty_trajectory_when_no_current() {
        let mut net = build_standard_line();
        net.source_remote = None;
        net.load_mw = 0.0;
        let sc = FaultScenario::ag(50.0, 0.1, 0.0);
        let pre = solve_prefault(&net).unwrap();
        let rec = synthesize_record(&net, &sc, &pre, &pre, 4000.0, 2, 0).unwrap();
        assert!(matches!(
            impedance_trajectory(&rec, ZERO),
            Err(Error::EmptyTrajectory)
        ));
    }

    #[test]
    fn reactance_increases_along_each_section() {
        let net = build_standard_line();
        let settings = RelaySettings {
            k0: K0Setting::MatchedPath,
            ..Default::default()
        };
        let reach = |d: f64| {
            simulate_trajectory(&net, &FaultScenario::ag(d, 0.0, 0.0), &settings)
                .unwrap()
                .last()
                .unwrap()
                .im
        };
        let grids: [Vec<f64>; 2] = [
            (1..40).map(|i| 5.0 * i as f64).collect(),
            (1..50).map(|i| 200.0 + 0.2 * i as f64).collect(),
        ];
        for grid in grids {
            let xs: Vec<f64> = grid.iter().map(|&d| reach(d)).collect();
            assert!(xs.windows(2).all(|w| w[1] > w[0]));
        }
    }

    /// Post-fault cycles needed for the DC offset to fall below 1% before
    /// the last window starts.
    fn cycles_for_decay(net: &NetworkModel, sc: &FaultScenario) -> usize {
        let sol = solve_slg_fault(net, sc).unwrap();
        let tau = loop_time_constant(sol.loop_impedance, 50.0);
        let periods = (100f64.ln() * tau / 0.02).ceil() as usize;
        periods + 2
    }

    #[test]
    fn inception_angle_does_not_move_final_point() {
        let net = build_standard_line();
        for d in [40.0, 190.0, 204.0] {
            let settings = RelaySettings {
                cycles_post: cycles_for_decay(&net, &FaultScenario::ag(d, 0.1, 0.0)),
                ..Default::default()
            };
            let finals: Vec<ComplexValue> = [0.0, 45.0, 90.0]
                .iter()
                .map(|&a| {
                    simulate_trajectory(&net, &FaultScenario::ag(d, 0.1, a), &settings)
                        .unwrap()
                        .last()
                        .unwrap()
                })
                .collect();
            for z in &finals[1..] {
                assert!(rel(*z, finals[0]) <= 1e-3, "d = {d}: {z} vs {}", finals[0]);
            }
        }
    }
}
