//! Pauli strings, weighted Pauli sums and the built-in H₂ Hamiltonians.
//!
//! Qubit 0 is the least significant bit of a computational basis index.
//! Textual labels are written with qubit `q-1` leftmost, so `"ZI"` on two
//! qubits is Z acting on qubit 1.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{QuantumState, Repr};

/// Largest register handled by dense routines.
pub const MAX_QUBITS: usize = 10;

/// Single-qubit Pauli operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; `ops[k]` acts on qubit `k`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    ops: Vec<Pauli>,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        Self { ops }
    }

    pub fn identity(num_qubits: usize) -> Self {
        Self {
            ops: vec![Pauli::I; num_qubits],
        }
    }

    /// Builds a string from `(qubit, op)` pairs; unspecified qubits are I.
    pub fn from_sparse(num_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::identity(num_qubits);
        for &(q, p) in ops {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
            s.ops[q] = p;
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.ops.len()
    }

    pub fn op(&self, qubit: usize) -> Pauli {
        self.ops[qubit]
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|&p| p == Pauli::I)
    }

    /// Bit mask of qubits carrying a non-identity operator.
    pub fn support_mask(&self) -> usize {
        self.mask_where(|p| p != Pauli::I)
    }

    /// Bit mask of qubits whose operator flips the basis state (X or Y).
    pub fn flip_mask(&self) -> usize {
        self.mask_where(|p| matches!(p, Pauli::X | Pauli::Y))
    }

    fn mask_where(&self, pred: impl Fn(Pauli) -> bool) -> usize {
        self.ops
            .iter()
            .enumerate()
            .filter(|(_, &p)| pred(p))
            .fold(0, |m, (q, _)| m | (1 << q))
    }

    /// Returns `(j, phase)` with `P|i⟩ = phase·|j⟩`.
    pub fn apply_to_basis(&self, index: usize) -> (usize, Complex64) {
        let mut phase = Complex64::new(1.0, 0.0);
        let mut out = index;
        for (q, &p) in self.ops.iter().enumerate() {
            let bit = (index >> q) & 1;
            match p {
                Pauli::I => {}
                Pauli::X => out ^= 1 << q,
                Pauli::Y => {
                    out ^= 1 << q;
                    // Y|0> = i|1>, Y|1> = -i|0>
                    phase *= if bit == 0 {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                }
                Pauli::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        (out, phase)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.ops.iter().rev() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses a label written with qubit `q-1` leftmost.
    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .chars()
            .rev()
            .map(|c| {
                Pauli::from_char(c).ok_or_else(|| Error::UnsupportedLabel {
                    label: c,
                    term: s.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if ops.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli label".into()));
        }
        Ok(Self { ops })
    }
}

/// Real-weighted sum of Pauli strings over a fixed register.
///
/// Terms are kept in canonical (sorted) order with duplicate strings merged,
/// so two sums built from permutations of the same term list compare equal.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    num_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn new(num_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument("Pauli sum needs at least one qubit".into()));
        }
        if let Some((_, s)) = terms.iter().find(|(_, s)| s.num_qubits() != num_qubits) {
            return Err(Error::DimensionMismatch {
                expected: num_qubits,
                actual: s.num_qubits(),
            });
        }
        if let Some((c, s)) = terms.iter().find(|(c, _)| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coefficient {c} on term {s}"
            )));
        }
        let mut terms = terms;
        // Sorting on the coefficient bits as well makes the merged sums
        // independent of the input order.
        terms.sort_by(|(ca, sa), (cb, sb)| sa.cmp(sb).then(ca.total_cmp(cb)));
        let mut merged: Vec<(f64, PauliString)> = Vec::with_capacity(terms.len());
        for (c, s) in terms {
            match merged.last_mut() {
                Some((acc, last)) if *last == s => *acc += c,
                _ => merged.push((c, s)),
            }
        }
        Ok(Self {
            num_qubits,
            terms: merged,
        })
    }

    /// Parses labelled terms such as `[(0.18038, "XX"), ...]`.
    pub fn from_labels(terms: &[(f64, &str)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|&(c, l)| Ok((c, l.parse::<PauliString>()?)))
            .collect::<Result<Vec<_>>>()?;
        let n = parsed
            .first()
            .map(|(_, s)| s.num_qubits())
            .ok_or_else(|| Error::InvalidArgument("no terms".into()))?;
        Self::new(n, parsed)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `string`, zero if absent.
    pub fn coefficient(&self, string: &PauliString) -> f64 {
        self.terms
            .iter()
            .find(|(_, s)| s == string)
            .map_or(0.0, |(c, _)| *c)
    }

    pub fn coefficient_of(&self, label: &str) -> Result<f64> {
        Ok(self.coefficient(&label.parse()?))
    }

    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(_, s)| s.is_identity())
            .map(|(c, _)| c)
            .sum()
    }

    /// Parses the line format `<coefficient> <label>`; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                line: lineno + 1,
                reason,
            };
            let mut fields = line.split_whitespace();
            let (Some(coef), Some(label), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(parse_err(format!("expected `<coefficient> <label>`, got `{line}`")));
            };
            let c: f64 = coef
                .parse()
                .map_err(|_| parse_err(format!("bad coefficient `{coef}`")))?;
            let s: PauliString = label.parse::<PauliString>().map_err(|e: Error| parse_err(e.to_string()))?;
            terms.push((c, s));
        }
        let n = terms.first().map(|(_, s)| s.num_qubits()).ok_or(Error::Parse {
            line: 0,
            reason: "no terms".into(),
        })?;
        Self::new(n, terms)
    }

    pub fn to_text(&self) -> String {
        self.terms
            .iter()
            .map(|(c, s)| format!("{c} {s}\n"))
            .collect()
    }

    /// Dense `2^q × 2^q` matrix of the operator.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        check_dense_limit(self.num_qubits)?;
        let dim = 1usize << self.num_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (c, s) in &self.terms {
            for i in 0..dim {
                let (j, phase) = s.apply_to_basis(i);
                m[(j, i)] += phase * *c;
            }
        }
        Ok(m)
    }

    /// Expectation value `Tr(ρH)` or `⟨ψ|H|ψ⟩`.
    pub fn expectation(&self, state: &QuantumState) -> Result<f64> {
        let dim = 1usize << self.num_qubits;
        if state.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: state.dim(),
            });
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (c, s) in &self.terms {
            let mut acc = Complex64::new(0.0, 0.0);
            match state.repr() {
                Repr::Pure(amplitudes) => {
                    for (i, a) in amplitudes.iter().enumerate() {
                        let (j, phase) = s.apply_to_basis(i);
                        acc += amplitudes[j].conj() * phase * a;
                    }
                }
                Repr::Mixed(density) => {
                    // Tr(ρP) = Σ_i ρ[i][j] P[j][i] with P|i> = phase|j>
                    for i in 0..dim {
                        let (j, phase) = s.apply_to_basis(i);
                        acc += density[i * dim + j] * phase;
                    }
                }
            }
            total += acc * *c;
        }
        Ok(total.re)
    }
}

fn check_dense_limit(num_qubits: usize) -> Result<()> {
    if num_qubits > MAX_QUBITS {
        Err(Error::ResourceLimit {
            qubits: num_qubits,
            limit: MAX_QUBITS,
        })
    } else {
        Ok(())
    }
}

const H2_4Q: [f64; 9] = [
    -0.80718, 0.17374, -0.23047, 0.12149, 0.16940, -0.04509, 0.04509, 0.16658, 0.17511,
];
const H2_2Q: [f64; 4] = [-1.05016, 0.40421, 0.01135, 0.18038];

/// H₂ (STO-3G, 0.725 Å, Bravyi-Kitaev) Hamiltonian on 4 qubits or its
/// 2-qubit tapered form, with coefficients as published.
pub fn builtin_hamiltonian(qubits: usize) -> Result<PauliSum> {
    match qubits {
        4 => {
            let c = H2_4Q;
            PauliSum::from_labels(&[
                (c[0], "IIII"),
                (c[1], "IIIZ"),
                (c[2], "IIZZ"),
                (c[1], "IZII"),
                (c[2], "ZZZI"),
                (c[3], "IIZI"),
                (c[4], "IZIZ"),
                (c[5], "IXZX"),
                (c[6], "ZXIX"),
                (c[6], "IXIX"),
                (c[5], "ZXZX"),
                (c[7], "ZZZZ"),
                (c[7], "IZZZ"),
                (c[8], "ZZIZ"),
                (c[3], "ZIZI"),
            ])
        }
        2 => {
            let c = H2_2Q;
            PauliSum::from_labels(&[
                (c[0], "II"),
                (c[1], "IZ"),
                (c[1], "ZI"),
                (c[2], "ZZ"),
                (c[3], "XX"),
            ])
        }
        n => Err(Error::InvalidArgument(format!(
            "no built-in Hamiltonian for {n} qubits (expected 2 or 4)"
        ))),
    }
}

/// Sorted eigenvalues of a Hamiltonian together with its eigenvectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub ground_energy: f64,
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<Complex64>>,
}

impl Spectrum {
    pub fn ground_state(&self) -> &[Complex64] {
        &self.eigenvectors[0]
    }
}

/// Dense Hermitian eigendecomposition of `h`.
pub fn diagonalize(h: &PauliSum) -> Result<Spectrum> {
    let m = h.to_matrix()?;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Ok(Spectrum {
        ground_energy: eigenvalues[0],
        eigenvalues,
        eigenvectors,
    })
}

/// Removes Z-symmetry qubits by substituting their eigenvalues.
///
/// `symmetries` lists qubit positions whose Z commutes with `h`; `sector`
/// holds the chosen ±1 eigenvalue for each. Remaining qubits are relabelled
/// contiguously in their original order.
pub fn taper(h: &PauliSum, symmetries: &[usize], sector: &[i8]) -> Result<PauliSum> {
    if symmetries.len() != sector.len() {
        return Err(Error::InvalidArgument(format!(
            "{} symmetries but {} sector values",
            symmetries.len(),
            sector.len()
        )));
    }
    if let Some(s) = sector.iter().find(|&&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument(format!("sector value {s} is not ±1")));
    }
    for (i, &q) in symmetries.iter().enumerate() {
        if q >= h.num_qubits() {
            return Err(Error::QubitOutOfRange {
                index: q,
                num_qubits: h.num_qubits(),
            });
        }
        if symmetries[..i].contains(&q) {
            return Err(Error::InvalidArgument(format!("symmetry Z{q} listed twice")));
        }
    }
    if symmetries.len() >= h.num_qubits() {
        return Err(Error::InvalidArgument("cannot taper every qubit".into()));
    }

    let kept: Vec<usize> = (0..h.num_qubits())
        .filter(|q| !symmetries.contains(q))
        .collect();
    let mut terms = Vec::with_capacity(h.len());
    for (c, s) in h.terms() {
        let mut coef = *c;
        for (&q, &sign) in symmetries.iter().zip(sector) {
            match s.op(q) {
                Pauli::I => {}
                Pauli::Z => coef *= f64::from(sign),
                _ => {
                    return Err(Error::SymmetryViolation {
                        term: s.to_string(),
                        qubit: q,
                    })
                }
            }
        }
        let ops = kept.iter().map(|&q| s.op(q)).collect();
        terms.push((coef, PauliString::new(ops)));
    }
    PauliSum::new(kept.len(), terms)
}

/// Readout basis for one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// Terms that can be estimated from one circuit execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementGroup {
    /// `basis[k]` is the readout basis of qubit `k`.
    pub basis: Vec<Basis>,
    /// Indices into [`PauliSum::terms`].
    pub member_terms: Vec<usize>,
}

impl MeasurementGroup {
    /// Label with qubit `q-1` leftmost, e.g. `"ZXZX"`.
    pub fn label(&self) -> String {
        self.basis
            .iter()
            .rev()
            .map(|b| match b {
                Basis::Z => 'Z',
                Basis::X => 'X',
            })
            .collect()
    }

    pub fn x_mask(&self) -> usize {
        self.basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == Basis::X)
            .fold(0, |m, (q, _)| m | (1 << q))
    }

    /// True when `term` can be read from this group's basis.
    pub fn admits(&self, term: &PauliString) -> bool {
        term.num_qubits() == self.basis.len()
            && term.ops().iter().zip(&self.basis).all(|(&p, &b)| {
                matches!((p, b), (Pauli::I, _) | (Pauli::Z, Basis::Z) | (Pauli::X, Basis::X))
            })
    }
}

/// Partitions the non-identity terms by the post-rotations they require.
///
/// Z-only terms share a single all-Z group, which always comes first when
/// present. Terms containing X are placed first-fit into groups whose per-qubit
/// basis does not conflict; qubits left unconstrained read out in Z.
pub fn group_by_basis(h: &PauliSum) -> Result<Vec<MeasurementGroup>> {
    let n = h.num_qubits();
    let mut z_group = MeasurementGroup {
        basis: vec![Basis::Z; n],
        member_terms: Vec::new(),
    };
    // Per-qubit requirement while groups are being filled: None = free.
    let mut x_groups: Vec<(Vec<Option<Basis>>, Vec<usize>)> = Vec::new();

    for (idx, (_, s)) in h.terms().iter().enumerate() {
        if let Some(&p) = s.ops().iter().find(|&&p| p == Pauli::Y) {
            return Err(Error::UnsupportedLabel {
                label: p.as_char(),
                term: s.to_string(),
            });
        }
        if s.is_identity() {
            continue;
        }
        if s.flip_mask() == 0 {
            z_group.member_terms.push(idx);
            continue;
        }
        let need: Vec<Option<Basis>> = s
            .ops()
            .iter()
            .map(|p| match p {
                Pauli::I => None,
                Pauli::X => Some(Basis::X),
                _ => Some(Basis::Z),
            })
            .collect();
        let slot = x_groups.iter_mut().find(|(basis, _)| {
            basis
                .iter()
                .zip(&need)
                .all(|(b, r)| b.is_none() || r.is_none() || b == r)
        });
        match slot {
            Some((basis, members)) => {
                for (b, r) in basis.iter_mut().zip(&need) {
                    if b.is_none() {
                        *b = *r;
                    }
                }
                members.push(idx);
            }
            None => x_groups.push((need, vec![idx])),
        }
    }

    let mut groups = Vec::with_capacity(1 + x_groups.len());
    if !z_group.member_terms.is_empty() {
        groups.push(z_group);
    }
    groups.extend(x_groups.into_iter().map(|(basis, member_terms)| MeasurementGroup {
        basis: basis.into_iter().map(|b| b.unwrap_or(Basis::Z)).collect(),
        member_terms,
    }));
    Ok(groups)
}

/// Exact energy of a state, `Tr(ρH)` or `⟨ψ|H|ψ⟩`.
pub fn exact_energy(h: &PauliSum, state: &QuantumState) -> Result<f64> {
    h.expectation(state)
}
