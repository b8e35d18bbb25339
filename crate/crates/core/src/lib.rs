//! Variational quantum eigensolver simulation for small molecular
//! Hamiltonians: Pauli algebra, state simulation, device noise, shot-based
//! energy estimation, SPSA optimization, readout mitigation and trial
//! statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod mitigation;
pub mod noise;
pub mod pauli;
pub mod similarity;
pub mod spsa;
pub mod state;

pub use ansatz::{AnsatzForm, AnsatzSpec};
pub use error::{Error, Result};
pub use estimator::{estimate_energy, EstimationResult, Estimator, ShotPolicy};
pub use harness::{
    run_sweep, run_trial, summarize, summarize_records, EnergySource, ExperimentConfig, Recalc,
    SummaryStats, TrialRecord, CHEMICAL_ACCURACY, REFERENCE_ENERGY,
};
pub use mitigation::{build_mitigation, Mitigated, MitigationModel};
pub use noise::{ConfusionMatrix, DeviceCalibration, ErrorClass, NoiseConfig};
pub use pauli::{
    builtin_hamiltonian, diagonalize, exact_energy, group_by_basis, taper, Basis,
    MeasurementGroup, Pauli, PauliString, PauliSum, Spectrum,
};
pub use similarity::{
    averaged_similarity, jaccard_tanimoto, normalized_scalar, ClassifyConfig, Measure,
    OutcomeClass, ProbabilityVector, SimilarityReport,
};
pub use spsa::{minimize, OptimizationTrace, SpsaConfig};
pub use state::{Gate, GateKind, KrausChannel, Mode, QuantumState};
