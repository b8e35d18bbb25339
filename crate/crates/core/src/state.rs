//! Statevector and density-matrix simulation.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::MAX_QUBITS;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Pure,
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Repr {
    Pure(Vec<Complex64>),
    /// Row-major `dim × dim` density matrix.
    Mixed(Vec<Complex64>),
}

/// A `q`-qubit state, either a pure statevector or a density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    num_qubits: usize,
    repr: Repr,
}

/// Gate set used by the ansatz circuits and readout preparation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    X { qubit: usize },
    Cnot { control: usize, target: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Ry,
    Rz,
    X,
    Cnot,
}

impl GateKind {
    /// Name used in calibration files.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::X => "x",
            GateKind::Cnot => "cx",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ry" => Some(GateKind::Ry),
            "rz" => Some(GateKind::Rz),
            "x" => Some(GateKind::X),
            "cx" | "cnot" => Some(GateKind::Cnot),
            _ => None,
        }
    }
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Ry { .. } => GateKind::Ry,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::X { .. } => GateKind::X,
            Gate::Cnot { .. } => GateKind::Cnot,
        }
    }

    /// Qubits acted on; for CNOT the control comes first.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } | Gate::X { qubit } => vec![qubit],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    /// Local unitary in the basis where bit `k` belongs to `self.qubits()[k]`.
    pub fn matrix(&self) -> Vec<Complex64> {
        match *self {
            Gate::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                vec![c.into(), (-s).into(), s.into(), c.into()]
            }
            Gate::Rz { angle, .. } => {
                let h = angle / 2.0;
                vec![Complex64::from_polar(1.0, -h), ZERO, ZERO, Complex64::from_polar(1.0, h)]
            }
            Gate::X { .. } => vec![ZERO, ONE, ONE, ZERO],
            Gate::Cnot { .. } => {
                // control is local bit 0, target local bit 1
                let mut m = vec![ZERO; 16];
                for (row, col) in [(0, 0), (3, 1), (2, 2), (1, 3)] {
                    m[row * 4 + col] = ONE;
                }
                m
            }
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let qubits = self.qubits();
        if let Some(&q) = qubits.iter().find(|&&q| q >= num_qubits) {
            return Err(Error::QubitOutOfRange {
                index: q,
                num_qubits,
            });
        }
        if let Gate::Cnot { control, target } = *self {
            if control == target {
                return Err(Error::InvalidArgument(format!(
                    "CNOT control and target are both qubit {control}"
                )));
            }
        }
        Ok(())
    }
}

/// A set of Kraus operators acting on a few qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    qubits: Vec<usize>,
    /// Each operator is a row-major `2^k × 2^k` local matrix.
    ops: Vec<Vec<Complex64>>,
}

impl KrausChannel {
    /// Validates completeness `Σ K†K = I` within `1e-10`.
    pub fn new(qubits: Vec<usize>, ops: Vec<Vec<Complex64>>) -> Result<Self> {
        let k = qubits.len();
        if k == 0 || k > 2 {
            return Err(Error::InvalidArgument(format!(
                "Kraus channels act on 1 or 2 qubits, got {k}"
            )));
        }
        let d = 1 << k;
        if ops.is_empty() || ops.iter().any(|op| op.len() != d * d) {
            return Err(Error::InvalidArgument(format!(
                "Kraus operators must be non-empty {d}x{d} matrices"
            )));
        }
        let mut deviation = 0.0_f64;
        for r in 0..d {
            for c in 0..d {
                let s: Complex64 = ops
                    .iter()
                    .map(|op| (0..d).map(|l| op[l * d + r].conj() * op[l * d + c]).sum::<Complex64>())
                    .sum();
                let target = if r == c { ONE } else { ZERO };
                deviation = deviation.max((s - target).norm());
            }
        }
        if deviation > 1e-10 {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self { qubits, ops })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn ops(&self) -> &[Vec<Complex64>] {
        &self.ops
    }

    /// Depolarizing channel `ρ → (1-p)ρ + p·I/d` on one or two qubits.
    pub fn depolarizing(qubits: Vec<usize>, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("depolarizing p={p} outside [0,1]")));
        }
        let k = qubits.len();
        let paulis = single_qubit_paulis();
        let n_ops = 1usize << (2 * k);
        let weight_id = (1.0 - p + p / n_ops as f64).sqrt();
        let weight = (p / n_ops as f64).sqrt();
        let mut ops = Vec::with_capacity(n_ops);
        for idx in 0..n_ops {
            let w = if idx == 0 { weight_id } else { weight };
            if w == 0.0 {
                continue;
            }
            let m = if k == 1 {
                paulis[idx].to_vec()
            } else {
                kron2(&paulis[idx >> 2], &paulis[idx & 3])
            };
            ops.push(m.into_iter().map(|x| x * w).collect());
        }
        Self::new(qubits, ops)
    }

    /// Amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(qubit: usize, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma={gamma} outside [0,1]")));
        }
        let k0 = vec![ONE, ZERO, ZERO, Complex64::from((1.0 - gamma).sqrt())];
        let k1 = vec![ZERO, Complex64::from(gamma.sqrt()), ZERO, ZERO];
        Self::new(vec![qubit], vec![k0, k1])
    }

    /// Phase damping; off-diagonal elements scale by `sqrt(1 - lambda)`.
    pub fn phase_damping(qubit: usize, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("lambda={lambda} outside [0,1]")));
        }
        let k0 = vec![ONE, ZERO, ZERO, Complex64::from((1.0 - lambda).sqrt())];
        let k1 = vec![ZERO, ZERO, ZERO, Complex64::from(lambda.sqrt())];
        Self::new(vec![qubit], vec![k0, k1])
    }
}

fn single_qubit_paulis() -> [[Complex64; 4]; 4] {
    let i = Complex64::new(0.0, 1.0);
    [
        [ONE, ZERO, ZERO, ONE],
        [ZERO, ONE, ONE, ZERO],
        [ZERO, -i, i, ZERO],
        [ONE, ZERO, ZERO, -ONE],
    ]
}

/// `high ⊗ low` where `low` acts on local bit 0.
fn kron2(high: &[Complex64; 4], low: &[Complex64; 4]) -> Vec<Complex64> {
    let mut m = vec![ZERO; 16];
    for r in 0..4 {
        for c in 0..4 {
            m[r * 4 + c] = high[(r >> 1) * 2 + (c >> 1)] * low[(r & 1) * 2 + (c & 1)];
        }
    }
    m
}

/// Applies a local operator to the vector embedded in `data` at
/// `offset + index * stride` for every basis index of an `n`-qubit register.
fn apply_local(
    data: &mut [Complex64],
    n: usize,
    offset: usize,
    stride: usize,
    op: &[Complex64],
    qubits: &[usize],
) {
    let k = qubits.len();
    let d = 1usize << k;
    let mask: usize = qubits.iter().fold(0, |m, &q| m | (1 << q));
    let mut idx = [0usize; 4];
    let mut buf = [ZERO; 4];
    for base in 0..(1usize << n) {
        if base & mask != 0 {
            continue;
        }
        for (local, slot) in idx.iter_mut().enumerate().take(d) {
            let mut i = base;
            for (bit, &q) in qubits.iter().enumerate() {
                if (local >> bit) & 1 == 1 {
                    i |= 1 << q;
                }
            }
            *slot = offset + i * stride;
        }
        for (r, out) in buf.iter_mut().enumerate().take(d) {
            *out = (0..d).map(|c| op[r * d + c] * data[idx[c]]).sum();
        }
        for r in 0..d {
            data[idx[r]] = buf[r];
        }
    }
}

impl QuantumState {
    /// `|0…0⟩` or `|0…0⟩⟨0…0|`.
    pub fn init_zero(num_qubits: usize, mode: Mode) -> Result<Self> {
        check_qubits(num_qubits)?;
        let dim = 1usize << num_qubits;
        let repr = match mode {
            Mode::Pure => {
                let mut v = vec![ZERO; dim];
                v[0] = ONE;
                Repr::Pure(v)
            }
            Mode::Mixed => {
                let mut m = vec![ZERO; dim * dim];
                m[0] = ONE;
                Repr::Mixed(m)
            }
        };
        Ok(Self { num_qubits, repr })
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let dim = 1usize << num_qubits;
        let mut m = vec![ZERO; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = Complex64::from(1.0 / dim as f64);
        }
        Ok(Self {
            num_qubits,
            repr: Repr::Mixed(m),
        })
    }

    /// Pure state from amplitudes; the norm must be 1 within `1e-10`.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = register_size(amplitudes.len())?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state norm² is {norm}, expected 1")));
        }
        Ok(Self {
            num_qubits,
            repr: Repr::Pure(amplitudes),
        })
    }

    /// Density matrix from a row-major `dim × dim` buffer.
    pub fn from_density(density: Vec<Complex64>) -> Result<Self> {
        let dim = (density.len() as f64).sqrt().round() as usize;
        if dim * dim != density.len() {
            return Err(Error::InvalidArgument("density buffer is not square".into()));
        }
        let num_qubits = register_size(dim)?;
        let trace: Complex64 = (0..dim).map(|i| density[i * dim + i]).sum();
        if (trace - ONE).norm() > 1e-10 {
            return Err(Error::InvalidArgument(format!("density trace is {trace}")));
        }
        for i in 0..dim {
            for j in 0..i {
                if (density[i * dim + j] - density[j * dim + i].conj()).norm() > 1e-10 {
                    return Err(Error::InvalidArgument("density matrix is not Hermitian".into()));
                }
            }
        }
        Ok(Self {
            num_qubits,
            repr: Repr::Mixed(density),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn mode(&self) -> Mode {
        match self.repr {
            Repr::Pure(_) => Mode::Pure,
            Repr::Mixed(_) => Mode::Mixed,
        }
    }

    pub(crate) fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    /// Row-major density matrix, if mixed.
    pub fn density(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Mixed(m) => Some(m),
            Repr::Pure(_) => None,
        }
    }

    /// `|ψ⟩⟨ψ|` for pure states; mixed states are returned unchanged.
    pub fn to_mixed(&self) -> Self {
        match &self.repr {
            Repr::Mixed(_) => self.clone(),
            Repr::Pure(v) => {
                let dim = v.len();
                let mut m = vec![ZERO; dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        m[i * dim + j] = v[i] * v[j].conj();
                    }
                }
                Self {
                    num_qubits: self.num_qubits,
                    repr: Repr::Mixed(m),
                }
            }
        }
    }

    /// Norm² for pure states, trace for mixed states.
    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.iter().map(|a| a.norm_sqr()).sum(),
            Repr::Mixed(m) => {
                let dim = self.dim();
                (0..dim).map(|i| m[i * dim + i].re).sum()
            }
        }
    }

    /// Applies `U` (or `UρU†`).
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        let op = gate.matrix();
        let qubits = gate.qubits();
        self.conjugate_by(&op, &qubits);
        Ok(())
    }

    pub fn apply_gates<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// `ρ → Σ K ρ K†`; only valid for density matrices.
    pub fn apply_channel(&mut self, channel: &KrausChannel) -> Result<()> {
        if let Some(&q) = channel.qubits.iter().find(|&&q| q >= self.num_qubits) {
            return Err(Error::QubitOutOfRange {
                index: q,
                num_qubits: self.num_qubits,
            });
        }
        let Repr::Mixed(rho) = &self.repr else {
            return Err(Error::RequiresMixed);
        };
        if let [single] = channel.ops.as_slice() {
            let single = single.clone();
            self.conjugate_by(&single, &channel.qubits);
            return Ok(());
        }
        let n = self.num_qubits;
        let dim = self.dim();
        let mut out = vec![ZERO; rho.len()];
        let mut scratch = rho.clone();
        for op in &channel.ops {
            scratch.copy_from_slice(rho);
            conjugate_density(&mut scratch, n, dim, op, &channel.qubits);
            for (o, s) in out.iter_mut().zip(&scratch) {
                *o += s;
            }
        }
        self.repr = Repr::Mixed(out);
        Ok(())
    }

    fn conjugate_by(&mut self, op: &[Complex64], qubits: &[usize]) {
        let n = self.num_qubits;
        let dim = self.dim();
        match &mut self.repr {
            Repr::Pure(v) => apply_local(v, n, 0, 1, op, qubits),
            Repr::Mixed(m) => conjugate_density(m, n, dim, op, qubits),
        }
    }

    /// Outcome probabilities in the computational basis, index 0 = `|0…0⟩`.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p: Vec<f64> = match &self.repr {
            Repr::Pure(v) => v.iter().map(|a| a.norm_sqr()).collect(),
            Repr::Mixed(m) => {
                let dim = self.dim();
                (0..dim).map(|i| m[i * dim + i].re).collect()
            }
        };
        for x in &mut p {
            *x = x.clamp(0.0, 1.0);
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 && total > 0.0 {
            for x in &mut p {
                *x /= total;
            }
        }
        p
    }
}

/// `ρ → K ρ K†` in place.
fn conjugate_density(rho: &mut [Complex64], n: usize, dim: usize, op: &[Complex64], qubits: &[usize]) {
    // K acting on the row index of every column.
    for col in 0..dim {
        apply_local(rho, n, col, dim, op, qubits);
    }
    // (ρK†)_{ij} = Σ_l ρ_{il} conj(K_{jl}): conj(K) on every row.
    let conj: Vec<Complex64> = op.iter().map(|x| x.conj()).collect();
    for row in 0..dim {
        apply_local(rho, n, row * dim, 1, &conj, qubits);
    }
}

fn check_qubits(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 {
        return Err(Error::InvalidArgument("need at least one qubit".into()));
    }
    if num_qubits > MAX_QUBITS {
        return Err(Error::ResourceLimit {
            qubits: num_qubits,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

fn register_size(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("dimension {dim} is not 2^q with q ≥ 1")));
    }
    let q = dim.trailing_zeros() as usize;
    check_qubits(q)?;
    Ok(q)
}

/// `(|0⟩ + |1⟩)/√2` on a single qubit.
pub fn plus_state() -> QuantumState {
    QuantumState {
        num_qubits: 1,
        repr: Repr::Pure(vec![Complex64::from(FRAC_1_SQRT_2); 2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn assert_probs(state: &QuantumState, expected: &[f64], tol: f64) {
        let p = state.probabilities();
        assert_eq!(p.len(), expected.len());
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() <= tol, "{p:?} vs {expected:?}");
        }
    }

    #[test]
    fn zero_states() {
        let s = QuantumState::init_zero(2, Mode::Pure).unwrap();
        assert_eq!(s.amplitudes().unwrap()[0], ONE);
        assert!(s.amplitudes().unwrap()[1..].iter().all(|a| *a == ZERO));
        let m = QuantumState::init_zero(4, Mode::Mixed).unwrap();
        assert_eq!(m.density().unwrap()[0], ONE);
        assert!((m.trace() - 1.0).abs() < 1e-15);
        assert_probs(&QuantumState::init_zero(1, Mode::Pure).unwrap(), &[1.0, 0.0], 0.0);
        assert!(QuantumState::init_zero(0, Mode::Pure).is_err());
        assert!(matches!(
            QuantumState::init_zero(11, Mode::Pure),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn ry_rotations() {
        let mut s = QuantumState::init_zero(1, Mode::Pure).unwrap();
        s.apply_gate(&Gate::Ry { qubit: 0, angle: PI }).unwrap();
        let a = s.amplitudes().unwrap();
        assert!(a[0].norm() < 1e-15 && (a[1] - ONE).norm() < 1e-15);

        let mut s = QuantumState::init_zero(1, Mode::Pure).unwrap();
        s.apply_gate(&Gate::Ry { qubit: 0, angle: FRAC_PI_2 }).unwrap();
        for a in s.amplitudes().unwrap() {
            assert!((a - Complex64::from(FRAC_1_SQRT_2)).norm() < 1e-15);
        }
    }

    #[test]
    fn bell_state() {
        let mut s = QuantumState::init_zero(2, Mode::Pure).unwrap();
        s.apply_gate(&Gate::Ry { qubit: 0, angle: FRAC_PI_2 }).unwrap();
        s.apply_gate(&Gate::Cnot { control: 0, target: 1 }).unwrap();
        assert_probs(&s, &[0.5, 0.0, 0.0, 0.5], 1e-15);
        let a = s.amplitudes().unwrap();
        assert!((a[3] - Complex64::from(FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn gate_validation() {
        let mut s = QuantumState::init_zero(2, Mode::Pure).unwrap();
        assert!(matches!(
            s.apply_gate(&Gate::X { qubit: 2 }),
            Err(Error::QubitOutOfRange { index: 2, .. })
        ));
        assert!(s.apply_gate(&Gate::Cnot { control: 1, target: 1 }).is_err());
    }

    #[test]
    fn full_depolarization() {
        let mut s = QuantumState::init_zero(1, Mode::Mixed).unwrap();
        s.apply_gate(&Gate::Ry { qubit: 0, angle: 0.7 }).unwrap();
        s.apply_channel(&KrausChannel::depolarizing(vec![0], 1.0).unwrap()).unwrap();
        let m = s.density().unwrap();
        assert!((m[0] - 0.5).norm() < 1e-12 && (m[3] - 0.5).norm() < 1e-12);
        assert!(m[1].norm() < 1e-12 && m[2].norm() < 1e-12);
    }

    #[test]
    fn maximally_mixed_is_fixed_point() {
        let mut s = QuantumState::maximally_mixed(2).unwrap();
        let before = s.clone();
        for p in [0.0, 0.3, 1.0] {
            s.apply_channel(&KrausChannel::depolarizing(vec![1], p).unwrap()).unwrap();
            s.apply_channel(&KrausChannel::depolarizing(vec![0, 1], p).unwrap()).unwrap();
        }
        for (a, b) in s.density().unwrap().iter().zip(before.density().unwrap()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn complete_amplitude_damping() {
        let mut s = QuantumState::init_zero(1, Mode::Mixed).unwrap();
        s.apply_gate(&Gate::X { qubit: 0 }).unwrap();
        s.apply_channel(&KrausChannel::amplitude_damping(0, 1.0).unwrap()).unwrap();
        assert_probs(&s, &[1.0, 0.0], 1e-15);
    }

    #[test]
    fn channel_requires_mixed_and_completeness() {
        let mut s = QuantumState::init_zero(1, Mode::Pure).unwrap();
        let ch = KrausChannel::depolarizing(vec![0], 0.1).unwrap();
        assert!(matches!(s.apply_channel(&ch), Err(Error::RequiresMixed)));
        let bad = KrausChannel::new(vec![0], vec![vec![ONE, ZERO, ZERO, Complex64::from(0.5)]]);
        assert!(matches!(bad, Err(Error::NotTracePreserving { .. })));
    }

    #[test]
    fn probabilities_examples() {
        let mixed = QuantumState::maximally_mixed(2).unwrap();
        assert_probs(&mixed, &[0.25; 4], 1e-15);
        let zero = QuantumState::init_zero(4, Mode::Pure).unwrap();
        let mut e0 = vec![0.0; 16];
        e0[0] = 1.0;
        assert_probs(&zero, &e0, 0.0);
    }

    #[test]
    fn cnot_squared_and_ry_inverse() {
        let mut s = QuantumState::init_zero(3, Mode::Pure).unwrap();
        for (q, a) in [(0, 0.3), (1, 1.1), (2, -0.4)] {
            s.apply_gate(&Gate::Ry { qubit: q, angle: a }).unwrap();
        }
        let before = s.probabilities();
        let c = Gate::Cnot { control: 2, target: 0 };
        s.apply_gates(&[c, c, Gate::Ry { qubit: 1, angle: 0.9 }, Gate::Ry { qubit: 1, angle: -0.9 }])
            .unwrap();
        for (a, b) in s.probabilities().iter().zip(&before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn plus_state_is_normalized() {
        assert!((plus_state().trace() - 1.0).abs() < 1e-15);
    }
}
