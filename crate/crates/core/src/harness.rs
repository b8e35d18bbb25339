//! Seeded VQE trials, sweeps, persistence and summary statistics.
//!
//! Trial `i` of a sweep with master seed `s` uses seed
//! `splitmix64(s + (i + 1)·0x9E3779B97F4A7C15)`. Inside a trial, independent
//! ChaCha8 streams of that seed drive the initial parameters (stream 0), the
//! optimizer's perturbations (stream 1), shot sampling (stream 2) and the
//! mitigation calibration (stream 3).

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSpec;
use crate::error::{Error, Result};
use crate::estimator::{EstimationResult, Estimator, ShotPolicy};
use crate::mitigation::build_mitigation;
use crate::noise::NoiseConfig;
use crate::pauli::{builtin_hamiltonian, exact_energy, PauliSum};
use crate::spsa::{minimize, OptimizationTrace, SpsaConfig};

/// Reference ground energy of the H₂ Hamiltonians, Hartree.
pub const REFERENCE_ENERGY: f64 = -1.86712;
/// Half-width of the chemical-accuracy band, Hartree.
pub const CHEMICAL_ACCURACY: f64 = 0.0015;

const STREAM_INIT: u64 = 0;
const STREAM_OPTIMIZER: u64 = 1;
const STREAM_SHOTS: u64 = 2;
const STREAM_MITIGATION: u64 = 3;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, index: usize) -> u64 {
    splitmix64(master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recalc {
    #[default]
    None,
    /// Noiseless statevector energy of the final parameters.
    Exact,
    /// A fresh estimate with this many shots under the configured noise.
    Shots(u64),
}

impl FromStr for Recalc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Recalc::None),
            "exact" => Ok(Recalc::Exact),
            _ => {
                let n = s
                    .strip_prefix("shots:")
                    .and_then(|n| n.parse::<u64>().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "recalc `{s}`: expected none, exact or shots:<n>"
                        ))
                    })?;
                Ok(Recalc::Shots(n))
            }
        }
    }
}

impl fmt::Display for Recalc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recalc::None => f.write_str("none"),
            Recalc::Exact => f.write_str("exact"),
            Recalc::Shots(n) => write!(f, "shots:{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationSettings {
    pub enabled: bool,
    /// Shots per prepared basis state when measuring the calibration matrix.
    pub shots: u64,
    /// Mitigate only the final energy measurement, not the optimizer's calls.
    pub final_only: bool,
}

impl Default for MitigationSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            shots: 8192,
            final_only: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub hamiltonian: PauliSum,
    /// Short name of the Hamiltonian for reports, e.g. `builtin-2`.
    pub hamiltonian_label: String,
    pub ansatz: AnsatzSpec,
    pub shots: ShotPolicy,
    pub maxiter: usize,
    pub noise: NoiseConfig,
    pub mitigation: MitigationSettings,
    pub trials: usize,
    pub seed: u64,
    pub recalc: Recalc,
    /// Fixed SPSA gain; `None` calibrates it.
    pub spsa_a: Option<f64>,
    pub spsa_c: f64,
}

impl ExperimentConfig {
    /// Noiseless single-trial defaults for a builtin Hamiltonian.
    pub fn builtin(qubits: usize, ansatz: AnsatzSpec) -> Result<Self> {
        Ok(Self::new(builtin_hamiltonian(qubits)?, format!("builtin-{qubits}"), ansatz))
    }

    pub fn new(hamiltonian: PauliSum, label: impl Into<String>, ansatz: AnsatzSpec) -> Self {
        Self {
            hamiltonian,
            hamiltonian_label: label.into(),
            ansatz,
            shots: ShotPolicy::Sampled(1024),
            maxiter: 100,
            noise: NoiseConfig::noiseless(),
            mitigation: MitigationSettings::default(),
            trials: 1,
            seed: 0,
            recalc: Recalc::None,
            spsa_a: None,
            spsa_c: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation {
                field: "trials".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.ansatz.num_qubits != self.hamiltonian.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.hamiltonian.num_qubits(),
                actual: self.ansatz.num_qubits,
            });
        }
        if self.shots == ShotPolicy::Sampled(0) {
            return Err(Error::Validation {
                field: "shots".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.mitigation.enabled && self.mitigation.shots == 0 {
            return Err(Error::Validation {
                field: "mitigation.shots".into(),
                reason: "must be >= 1".into(),
            });
        }
        self.spsa_config(0).validate()
    }

    pub fn spsa_config(&self, seed: u64) -> SpsaConfig {
        SpsaConfig {
            a: self.spsa_a,
            c: self.spsa_c,
            ..SpsaConfig::new(self.maxiter, seed)
        }
    }

    pub fn axes(&self) -> ConfigAxes {
        ConfigAxes {
            hamiltonian: self.hamiltonian_label.clone(),
            qubits: self.ansatz.num_qubits,
            ansatz: self.ansatz.form.to_string(),
            depth: self.ansatz.depth,
            shots: match self.shots {
                ShotPolicy::Exact => "exact".into(),
                ShotPolicy::Sampled(n) => n.to_string(),
            },
            maxiter: self.maxiter,
            noise: self.noise.error_class().name().into(),
            mitigate: match (self.mitigation.enabled, self.mitigation.final_only) {
                (false, _) => "off".into(),
                (true, false) => "on".into(),
                (true, true) => "final".into(),
            },
            recalc: self.recalc.to_string(),
        }
    }
}

/// Flat description of a configuration, used as report columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigAxes {
    pub hamiltonian: String,
    pub qubits: usize,
    pub ansatz: String,
    pub depth: usize,
    pub shots: String,
    pub maxiter: usize,
    pub noise: String,
    pub mitigate: String,
    pub recalc: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupProbabilities {
    pub basis: String,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: ConfigAxes,
    pub index: usize,
    pub seed: u64,
    pub initial_parameters: Vec<f64>,
    pub final_parameters: Vec<f64>,
    /// Final energy measured with the trial's shot policy.
    pub final_energy: Option<f64>,
    /// Mean of the two objective values of each SPSA iteration.
    pub energy_trace: Vec<f64>,
    pub group_probabilities: Vec<GroupProbabilities>,
    pub recalculated_energy: Option<f64>,
    pub objective_evaluations: usize,
    /// Shots spent, including recalculation and mitigation calibration.
    pub circuit_executions: u64,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

fn group_probabilities(result: &EstimationResult) -> Vec<GroupProbabilities> {
    result
        .per_group_probabilities
        .iter()
        .map(|(g, p)| GroupProbabilities {
            basis: g.label(),
            probabilities: p.clone(),
        })
        .collect()
}

fn energy_trace(trace: &OptimizationTrace) -> Vec<f64> {
    trace
        .iterations
        .iter()
        .map(|it| 0.5 * (it.f_plus + it.f_minus))
        .collect()
}

/// Runs one seeded VQE trial. Component failures are recorded, not returned.
pub fn run_trial(config: &ExperimentConfig, index: usize) -> TrialRecord {
    let seed = trial_seed(config.seed, index);
    let mut record = TrialRecord {
        config: config.axes(),
        index,
        seed,
        initial_parameters: Vec::new(),
        final_parameters: Vec::new(),
        final_energy: None,
        energy_trace: Vec::new(),
        group_probabilities: Vec::new(),
        recalculated_energy: None,
        objective_evaluations: 0,
        circuit_executions: 0,
        error: None,
    };
    if let Err(e) = execute_trial(config, seed, &mut record) {
        record.error = Some(e.to_string());
    }
    record
}

fn execute_trial(config: &ExperimentConfig, seed: u64, record: &mut TrialRecord) -> Result<()> {
    config.validate()?;
    let plain = Estimator::new(&config.hamiltonian, config.ansatz, config.noise.clone())?;
    let mitigated = if config.mitigation.enabled {
        let q = config.ansatz.num_qubits;
        let mut rng = stream(seed, STREAM_MITIGATION);
        let model = build_mitigation(&config.noise, q, config.mitigation.shots, &mut rng)?;
        record.circuit_executions += (1u64 << q) * config.mitigation.shots;
        Some(plain.clone().with_mitigation(model)?)
    } else {
        None
    };
    let optimizing = match &mitigated {
        Some(m) if !config.mitigation.final_only => m,
        _ => &plain,
    };
    let measuring = mitigated.as_ref().unwrap_or(&plain);

    record.initial_parameters = config
        .ansatz
        .random_parameters(&mut stream(seed, STREAM_INIT));
    let spsa = config.spsa_config(stream(seed, STREAM_OPTIMIZER).random());
    let mut shots_rng = stream(seed, STREAM_SHOTS);
    let mut executions = 0u64;

    let outcome = minimize(
        |theta| {
            let r = optimizing.estimate(theta, config.shots, &mut shots_rng)?;
            executions += r.shots_used;
            Ok(r.energy)
        },
        &record.initial_parameters,
        &spsa,
    );
    let trace = match outcome {
        Ok(trace) => trace,
        Err(e) => {
            record.circuit_executions += executions;
            record.objective_evaluations = e.partial.evaluations;
            record.energy_trace = energy_trace(&e.partial);
            record.final_parameters = e.partial.final_theta;
            return Err(e.source);
        }
    };
    record.circuit_executions += executions;
    record.objective_evaluations = trace.evaluations;
    record.energy_trace = energy_trace(&trace);
    record.final_parameters = trace.final_theta;

    let last = measuring.estimate(&record.final_parameters, config.shots, &mut shots_rng)?;
    record.objective_evaluations += 1;
    record.circuit_executions += last.shots_used;
    record.final_energy = Some(last.energy);
    record.group_probabilities = group_probabilities(&last);

    record.recalculated_energy = match config.recalc {
        Recalc::None => None,
        Recalc::Exact => {
            let state = plain.ideal_state(&record.final_parameters)?;
            Some(exact_energy(&config.hamiltonian, &state)?)
        }
        Recalc::Shots(n) => {
            let r = measuring.estimate(&record.final_parameters, ShotPolicy::Sampled(n), &mut shots_rng)?;
            record.circuit_executions += r.shots_used;
            Some(r.energy)
        }
    };
    Ok(())
}

/// Runs all trials on the current rayon pool; output is in index order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    Ok((0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect())
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergySource {
    Final,
    Recalculated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub failed: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    pub n_outliers: usize,
    pub pct_in_accuracy: f64,
    /// Binomial standard error of `pct_in_accuracy`, in percentage points.
    pub pct_stderr: f64,
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(energies: &[f64], failed: usize, reference: f64, band: f64) -> Result<SummaryStats> {
    if energies.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    let n = sorted.len();
    let hits = sorted
        .iter()
        .filter(|&&e| e >= reference - band && e <= reference + band)
        .count();
    let p = hits as f64 / n as f64;
    Ok(SummaryStats {
        n,
        failed,
        median: quantile(&sorted, 0.5),
        q1,
        q3,
        lower_fence,
        upper_fence,
        n_outliers: sorted
            .iter()
            .filter(|&&e| e < lower_fence || e > upper_fence)
            .count(),
        pct_in_accuracy: 100.0 * p,
        pct_stderr: 100.0 * (p * (1.0 - p) / n as f64).sqrt(),
    })
}

/// Summary of one energy column over the successful records.
pub fn summarize_records(records: &[TrialRecord], source: EnergySource) -> Result<SummaryStats> {
    let failed = records.iter().filter(|r| r.failed()).count();
    let energies: Vec<f64> = records
        .iter()
        .filter(|r| !r.failed())
        .filter_map(|r| match source {
            EnergySource::Final => r.final_energy,
            EnergySource::Recalculated => r.recalculated_energy,
        })
        .collect();
    summarize(&energies, failed, REFERENCE_ENERGY, CHEMICAL_ACCURACY)
}
