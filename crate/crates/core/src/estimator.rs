//! Energy estimation: state preparation, post-rotation, readout and
//! assembly of Pauli expectations.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSpec;
use crate::error::{Error, Result};
use crate::mitigation::MitigationModel;
use crate::noise::{ConfusionMatrix, NoiseConfig};
use crate::pauli::{group_by_basis, Basis, MeasurementGroup, PauliString, PauliSum};
use crate::state::{Gate, GateKind, KrausChannel, Mode, QuantumState};

/// How outcome probabilities are turned into estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotPolicy {
    /// Use the exact outcome distribution (infinitely many shots).
    Exact,
    /// Draw this many shots per measurement group.
    Sampled(u64),
}

impl ShotPolicy {
    pub fn sampled(shots: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be >= 1".into()));
        }
        Ok(ShotPolicy::Sampled(shots))
    }

    pub fn shots(self) -> u64 {
        match self {
            ShotPolicy::Exact => 0,
            ShotPolicy::Sampled(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationResult {
    pub energy: f64,
    pub per_group_probabilities: Vec<(MeasurementGroup, Vec<f64>)>,
    /// Circuit executions consumed, summed over groups.
    pub shots_used: u64,
}

/// Basis-change gates for `group`.
///
/// `Ry(-π/2)` maps `|+⟩` to `|0⟩`, so the Z-parity of the rotated state equals
/// the X expectation of the original one. The `+π/2` rotation would flip the
/// sign of every X factor.
pub fn post_rotation_gates(group: &MeasurementGroup) -> Vec<Gate> {
    group
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == Basis::X)
        .map(|(qubit, _)| Gate::Ry {
            qubit,
            angle: -FRAC_PI_2,
        })
        .collect()
}

/// Noiseless post-rotation into the group's measurement basis.
pub fn post_rotate(state: &mut QuantumState, group: &MeasurementGroup) -> Result<()> {
    if group.basis.len() != state.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: state.num_qubits(),
            actual: group.basis.len(),
        });
    }
    state.apply_gates(&post_rotation_gates(group))
}

fn check_probabilities(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidProbabilities("empty vector".into()));
    }
    if let Some(p) = probs.iter().find(|&&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
        return Err(Error::InvalidProbabilities(format!("entry {p} outside [0,1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
    }
    Ok(())
}

/// Multinomial draw of `shots` outcomes from `probs`.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    check_probabilities(probs)?;
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    // Conditional binomials: outcome i given the shots left for i..n.
    let mut counts = vec![0u64; probs.len()];
    let mut left = shots;
    let mut mass_left: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i == probs.len() - 1 {
            counts[i] = left;
            break;
        }
        let frac = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 0.0 };
        let k = if frac >= 1.0 {
            left
        } else if frac <= 0.0 {
            0
        } else {
            Binomial::new(left, frac)
                .map_err(|e| Error::InvalidProbabilities(e.to_string()))?
                .sample(rng)
        };
        counts[i] = k;
        left -= k;
        mass_left -= p;
    }
    Ok(counts)
}

pub fn counts_to_frequencies(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Parity estimate `Σ_i p_i (-1)^{popcount(i & support)}` of one term.
pub fn term_expectation(probs: &[f64], term: &PauliString, group: &MeasurementGroup) -> Result<f64> {
    if !group.admits(term) {
        return Err(Error::InvalidArgument(format!(
            "term {term} cannot be read in basis {}",
            group.label()
        )));
    }
    let dim = 1usize << group.basis.len();
    if probs.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: probs.len(),
        });
    }
    Ok(parity_expectation(probs, term.support_mask()))
}

fn parity_expectation(probs: &[f64], mask: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if (i & mask).count_ones().is_multiple_of(2) { p } else { -p })
        .sum()
}

type ChannelKey = (GateKind, Vec<usize>);

/// Reusable energy estimator for one Hamiltonian, ansatz and noise setting.
#[derive(Clone, Debug)]
pub struct Estimator {
    hamiltonian: PauliSum,
    groups: Vec<MeasurementGroup>,
    /// Per group: (coefficient, support mask) of each member term.
    group_terms: Vec<Vec<(f64, usize)>>,
    identity: f64,
    spec: AnsatzSpec,
    noise: NoiseConfig,
    confusion: Option<ConfusionMatrix>,
    channels: HashMap<ChannelKey, Vec<KrausChannel>>,
    mitigation: Option<MitigationModel>,
}

impl Estimator {
    pub fn new(hamiltonian: &PauliSum, spec: AnsatzSpec, noise: NoiseConfig) -> Result<Self> {
        if spec.num_qubits != hamiltonian.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.num_qubits(),
                actual: spec.num_qubits,
            });
        }
        let groups = group_by_basis(hamiltonian)?;
        let group_terms = groups
            .iter()
            .map(|g| {
                g.member_terms
                    .iter()
                    .map(|&t| {
                        let (c, s) = &hamiltonian.terms()[t];
                        (*c, s.support_mask())
                    })
                    .collect()
            })
            .collect();

        let confusion = match noise.readout_noise() {
            Some(_) => Some(noise.confusion(spec.num_qubits)?),
            None => None,
        };
        let mut channels = HashMap::new();
        if noise.gate_noise().is_some() {
            let template = spec.build_circuit(&vec![0.0; spec.parameter_count()])?;
            let rotations = groups.iter().flat_map(post_rotation_gates);
            for gate in template.iter().copied().chain(rotations) {
                let key = (gate.kind(), gate.qubits());
                if let std::collections::hash_map::Entry::Vacant(slot) = channels.entry(key) {
                    slot.insert(noise.channels_for(&gate)?);
                }
            }
        }
        Ok(Self {
            hamiltonian: hamiltonian.clone(),
            identity: hamiltonian.identity_coefficient(),
            groups,
            group_terms,
            spec,
            noise,
            confusion,
            channels,
            mitigation: None,
        })
    }

    /// Mitigates every group's readout distribution with `model`.
    pub fn with_mitigation(mut self, model: MitigationModel) -> Result<Self> {
        let dim = 1usize << self.spec.num_qubits;
        if model.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: model.dim(),
            });
        }
        self.mitigation = Some(model);
        Ok(self)
    }

    pub fn without_mitigation(&self) -> Self {
        Self {
            mitigation: None,
            ..self.clone()
        }
    }

    pub fn groups(&self) -> &[MeasurementGroup] {
        &self.groups
    }

    pub fn hamiltonian(&self) -> &PauliSum {
        &self.hamiltonian
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    fn apply_noisy(&self, state: &mut QuantumState, gate: &Gate) -> Result<()> {
        state.apply_gate(gate)?;
        if state.mode() == Mode::Mixed {
            let key = (gate.kind(), gate.qubits());
            match self.channels.get(&key) {
                Some(stages) => {
                    for ch in stages {
                        state.apply_channel(ch)?;
                    }
                }
                None => {
                    for ch in self.noise.channels_for(gate)? {
                        state.apply_channel(&ch)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Ansatz state, a density matrix when gate errors are simulated.
    pub fn prepare_state(&self, theta: &[f64]) -> Result<QuantumState> {
        let mode = if self.noise.gate_noise().is_some() {
            Mode::Mixed
        } else {
            Mode::Pure
        };
        let mut state = QuantumState::init_zero(self.spec.num_qubits, mode)?;
        for gate in &self.spec.build_circuit(theta)? {
            self.apply_noisy(&mut state, gate)?;
        }
        Ok(state)
    }

    /// Noiseless statevector of the ansatz.
    pub fn ideal_state(&self, theta: &[f64]) -> Result<QuantumState> {
        let mut state = QuantumState::init_zero(self.spec.num_qubits, Mode::Pure)?;
        state.apply_gates(&self.spec.build_circuit(theta)?)?;
        Ok(state)
    }

    /// Readout distribution of one group before shot sampling.
    pub fn group_distribution(&self, prepared: &QuantumState, group: &MeasurementGroup) -> Result<Vec<f64>> {
        let mut state = prepared.clone();
        for gate in &post_rotation_gates(group) {
            self.apply_noisy(&mut state, gate)?;
        }
        let probs = state.probabilities();
        match &self.confusion {
            Some(c) => c.apply(&probs),
            None => Ok(probs),
        }
    }

    pub fn estimate<R: Rng + ?Sized>(&self, theta: &[f64], policy: ShotPolicy, rng: &mut R) -> Result<EstimationResult> {
        let prepared = self.prepare_state(theta)?;
        let mut energy = self.identity;
        let mut per_group = Vec::with_capacity(self.groups.len());
        let mut shots_used = 0;
        for (group, terms) in self.groups.iter().zip(&self.group_terms) {
            let exact = self.group_distribution(&prepared, group)?;
            let mut probs = match policy {
                ShotPolicy::Exact => exact,
                ShotPolicy::Sampled(shots) => {
                    shots_used += shots;
                    counts_to_frequencies(&sample_counts(&exact, shots, rng)?)
                }
            };
            if let Some(model) = &self.mitigation {
                probs = model.mitigate(&probs)?.probabilities;
            }
            energy += terms
                .iter()
                .map(|&(c, mask)| c * parity_expectation(&probs, mask))
                .sum::<f64>();
            per_group.push((group.clone(), probs));
        }
        Ok(EstimationResult {
            energy,
            per_group_probabilities: per_group,
            shots_used,
        })
    }
}

/// One-shot convenience wrapper around [`Estimator`].
pub fn estimate_energy<R: Rng + ?Sized>(
    h: &PauliSum,
    spec: AnsatzSpec,
    theta: &[f64],
    noise: &NoiseConfig,
    policy: ShotPolicy,
    rng: &mut R,
) -> Result<EstimationResult> {
    Estimator::new(h, spec, noise.clone())?.estimate(theta, policy, rng)
}
