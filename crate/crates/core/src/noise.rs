//! Device calibration data, gate-noise channels and readout confusion.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{Gate, GateKind, KrausChannel};

/// Synthetic calibration bundled with the crate. Magnitudes are representative
/// of 2020-era superconducting devices; they are not measured data.
pub const SYNTHETIC_CALIBRATION: &str = include_str!("../data/synthetic_calibration.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub t1_us: f64,
    pub t2_us: f64,
    /// P(read 1 | prepared 0)
    pub p01: f64,
    /// P(read 0 | prepared 1)
    pub p10: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCalibration {
    pub kind: String,
    pub arity: usize,
    pub p_dep: f64,
    pub duration_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceCalibration {
    pub backend: String,
    pub date: String,
    pub qubits: Vec<QubitCalibration>,
    pub gates: Vec<GateCalibration>,
}

// Raw file layout; every field optional so schema errors can name the culprit.
#[derive(Deserialize)]
struct RawCalibration {
    backend: Option<String>,
    date: Option<String>,
    #[serde(default)]
    qubits: Vec<RawQubit>,
    #[serde(default)]
    gates: Vec<RawGate>,
}

#[derive(Deserialize)]
struct RawQubit {
    t1_us: Option<f64>,
    t2_us: Option<f64>,
    p01: Option<f64>,
    p10: Option<f64>,
}

#[derive(Deserialize)]
struct RawGate {
    kind: Option<String>,
    arity: Option<usize>,
    p_dep: Option<f64>,
    duration_ns: Option<f64>,
}

fn require<T>(value: Option<T>, what: impl FnOnce() -> String) -> Result<T> {
    value.ok_or_else(|| Error::Schema(format!("missing {}", what())))
}

impl DeviceCalibration {
    /// Parses and validates the TOML calibration format.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawCalibration =
            toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
        let backend = require(raw.backend, || "`backend`".into())?;
        let date = require(raw.date, || "`date`".into())?;
        let qubits = raw
            .qubits
            .into_iter()
            .enumerate()
            .map(|(i, q)| {
                Ok(QubitCalibration {
                    t1_us: require(q.t1_us, || format!("`t1_us` for qubit {i}"))?,
                    t2_us: require(q.t2_us, || format!("`t2_us` for qubit {i}"))?,
                    p01: require(q.p01, || format!("`p01` for qubit {i}"))?,
                    p10: require(q.p10, || format!("`p10` for qubit {i}"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let gates = raw
            .gates
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                let kind = require(g.kind, || format!("`kind` for gate entry {i}"))?;
                Ok(GateCalibration {
                    arity: require(g.arity, || format!("`arity` for gate `{kind}`"))?,
                    p_dep: require(g.p_dep, || format!("`p_dep` for gate `{kind}`"))?,
                    duration_ns: require(g.duration_ns, || format!("`duration_ns` for gate `{kind}`"))?,
                    kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cal = Self {
            backend,
            date,
            qubits,
            gates,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The bundled synthetic calibration.
    pub fn synthetic() -> Self {
        Self::from_toml(SYNTHETIC_CALIBRATION).expect("bundled calibration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field: String, reason: String| Err(Error::Validation { field, reason });
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if self.qubits.is_empty() {
            return invalid("qubits".into(), "no qubit entries".into());
        }
        for (i, q) in self.qubits.iter().enumerate() {
            if !(q.t1_us > 0.0) || !q.t1_us.is_finite() {
                return invalid(format!("qubits[{i}].t1_us"), format!("{} must be > 0", q.t1_us));
            }
            if !(q.t2_us > 0.0) || q.t2_us > 2.0 * q.t1_us {
                return invalid(
                    format!("qubits[{i}].t2_us"),
                    format!("{} must satisfy 0 < T2 <= 2*T1 = {}", q.t2_us, 2.0 * q.t1_us),
                );
            }
            for (name, p) in [("p01", q.p01), ("p10", q.p10)] {
                if !prob_ok(p) {
                    return invalid(format!("qubits[{i}].{name}"), format!("{p} outside [0,1]"));
                }
            }
        }
        for g in &self.gates {
            let Some(kind) = GateKind::from_name(&g.kind) else {
                return invalid(format!("gates.{}", g.kind), "unknown gate kind".into());
            };
            if g.arity != kind.arity() {
                return invalid(
                    format!("gates.{}.arity", g.kind),
                    format!("{} but `{}` acts on {} qubit(s)", g.arity, g.kind, kind.arity()),
                );
            }
            if !prob_ok(g.p_dep) {
                return invalid(format!("gates.{}.p_dep", g.kind), format!("{} outside [0,1]", g.p_dep));
            }
            if !(g.duration_ns >= 0.0) {
                return invalid(
                    format!("gates.{}.duration_ns", g.kind),
                    format!("{} must be >= 0", g.duration_ns),
                );
            }
        }
        Ok(())
    }

    pub fn gate(&self, kind: GateKind) -> Option<&GateCalibration> {
        self.gates
            .iter()
            .find(|g| GateKind::from_name(&g.kind) == Some(kind))
    }

    fn qubit(&self, index: usize) -> Result<&QubitCalibration> {
        self.qubits.get(index).ok_or_else(|| Error::Validation {
            field: format!("qubits[{index}]"),
            reason: format!("calibration covers only {} qubits", self.qubits.len()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorClass {
    None,
    #[serde(rename = "gates")]
    GatesOnly,
    #[serde(rename = "readout")]
    ReadoutOnly,
    All,
}

impl ErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::None => "none",
            ErrorClass::GatesOnly => "gates",
            ErrorClass::ReadoutOnly => "readout",
            ErrorClass::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(ErrorClass::None),
            "gates" => Some(ErrorClass::GatesOnly),
            "readout" => Some(ErrorClass::ReadoutOnly),
            "all" => Some(ErrorClass::All),
            _ => None,
        }
    }
}

/// Which error classes to simulate and the calibration backing them.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    error_class: ErrorClass,
    calibration: Option<Arc<DeviceCalibration>>,
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            error_class: ErrorClass::None,
            calibration: None,
        }
    }

    pub fn new(error_class: ErrorClass, calibration: Option<DeviceCalibration>) -> Result<Self> {
        if error_class != ErrorClass::None && calibration.is_none() {
            return Err(Error::InvalidArgument(format!(
                "noise class `{}` needs a calibration",
                error_class.name()
            )));
        }
        Ok(Self {
            error_class,
            calibration: calibration.map(Arc::new),
        })
    }

    pub fn error_class(&self) -> ErrorClass {
        self.error_class
    }

    pub fn calibration(&self) -> Option<&DeviceCalibration> {
        self.calibration.as_deref()
    }

    pub fn gate_noise(&self) -> Option<&DeviceCalibration> {
        match self.error_class {
            ErrorClass::GatesOnly | ErrorClass::All => self.calibration(),
            _ => None,
        }
    }

    pub fn readout_noise(&self) -> Option<&DeviceCalibration> {
        match self.error_class {
            ErrorClass::ReadoutOnly | ErrorClass::All => self.calibration(),
            _ => None,
        }
    }

    /// Gate channels, or an empty list when gate errors are disabled.
    pub fn channels_for(&self, gate: &Gate) -> Result<Vec<KrausChannel>> {
        match self.gate_noise() {
            Some(cal) => gate_channel(cal, gate),
            None => Ok(Vec::new()),
        }
    }

    /// Readout confusion for `q` qubits; identity when readout errors are off.
    pub fn confusion(&self, q: usize) -> Result<ConfusionMatrix> {
        match self.readout_noise() {
            Some(cal) => readout_confusion(cal, q),
            None => Ok(ConfusionMatrix::identity(q)),
        }
    }
}

/// Noise channels for `gate`, in application order: depolarizing on the
/// gate's qubits, then amplitude damping and phase damping on each qubit.
///
/// Trivial stages (zero probability) are omitted, so a noiseless gate yields
/// an empty list.
pub fn gate_channel(cal: &DeviceCalibration, gate: &Gate) -> Result<Vec<KrausChannel>> {
    let kind = gate.kind();
    let entry = cal
        .gate(kind)
        .ok_or_else(|| Error::UnknownGate(kind.name().to_string()))?;
    let qubits = gate.qubits();
    let mut stages = Vec::new();
    if entry.p_dep > 0.0 {
        stages.push(KrausChannel::depolarizing(qubits.clone(), entry.p_dep)?);
    }
    let t_us = entry.duration_ns * 1e-3;
    if t_us > 0.0 {
        for &q in &qubits {
            let qc = cal.qubit(q)?;
            let (gamma, lambda) = relaxation_parameters(qc.t1_us, qc.t2_us, t_us);
            if gamma > 0.0 {
                stages.push(KrausChannel::amplitude_damping(q, gamma)?);
            }
            if lambda > 0.0 {
                stages.push(KrausChannel::phase_damping(q, lambda)?);
            }
        }
    }
    Ok(stages)
}

/// Amplitude- and phase-damping parameters for an idle period of `t_us`.
///
/// Amplitude damping alone shrinks coherences by `exp(-t/2T1)`; the phase
/// damping contributes `exp(-t/Tφ)` with `1/Tφ = 1/T2 - 1/(2T1)`, giving the
/// total `exp(-t/T2)`.
pub fn relaxation_parameters(t1_us: f64, t2_us: f64, t_us: f64) -> (f64, f64) {
    let gamma = 1.0 - (-t_us / t1_us).exp();
    let dephasing_rate = (1.0 / t2_us - 0.5 / t1_us).max(0.0);
    let lambda = 1.0 - (-2.0 * t_us * dephasing_rate).exp();
    (gamma, lambda)
}

/// Column-stochastic `P(read i | true j)` matrix over `2^q` outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    dim: usize,
    /// Row-major, `data[i * dim + j] = P(read i | true j)`.
    data: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn identity(q: usize) -> Self {
        let dim = 1usize << q;
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    /// Builds from row-major data, checking column sums within `1e-10`.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        if data.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidProbabilities("negative confusion entry".into()));
        }
        for j in 0..dim {
            let s: f64 = (0..dim).map(|i| data[i * dim + j]).sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidProbabilities(format!("column {j} sums to {s}")));
            }
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, read: usize, truth: usize) -> f64 {
        self.data[read * self.dim + truth]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|i| {
            (0..self.dim).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 })
        })
    }

    /// Distribution of read outcomes given the true distribution `p`.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: p.len(),
            });
        }
        Ok((0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * p[j]).sum())
            .collect())
    }
}

/// Tensor product of per-qubit `[[1-p01, p10], [p01, 1-p10]]` matrices.
pub fn readout_confusion(cal: &DeviceCalibration, q: usize) -> Result<ConfusionMatrix> {
    let dim = 1usize << q;
    let per_qubit = (0..q).map(|k| cal.qubit(k)).collect::<Result<Vec<_>>>()?;
    let mut data = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            data[i * dim + j] = per_qubit
                .iter()
                .enumerate()
                .map(|(k, qc)| match ((i >> k) & 1, (j >> k) & 1) {
                    (0, 0) => 1.0 - qc.p01,
                    (1, 0) => qc.p01,
                    (0, 1) => qc.p10,
                    _ => 1.0 - qc.p10,
                })
                .product();
        }
    }
    ConfusionMatrix::from_rows(dim, data)
}
