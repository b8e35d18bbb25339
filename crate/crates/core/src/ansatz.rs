//! Hardware-efficient Ry / RyRz circuits with linear entanglement.
//!
//! A depth-`d` circuit is `d+1` rotation layers separated by `d` CNOT chains
//! `CNOT(0→1), CNOT(1→2), …`. Parameters are consumed layer-major, then by
//! qubit, with the Ry angle before the Rz angle of the same qubit.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::Gate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzForm {
    Ry,
    RyRz,
}

impl AnsatzForm {
    fn rotations_per_qubit(self) -> usize {
        match self {
            AnsatzForm::Ry => 1,
            AnsatzForm::RyRz => 2,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ry" => Some(AnsatzForm::Ry),
            "ryrz" => Some(AnsatzForm::RyRz),
            _ => None,
        }
    }
}

impl fmt::Display for AnsatzForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnsatzForm::Ry => "ry",
            AnsatzForm::RyRz => "ryrz",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub form: AnsatzForm,
    pub num_qubits: usize,
    pub depth: usize,
}

impl AnsatzSpec {
    pub fn new(form: AnsatzForm, num_qubits: usize, depth: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument("ansatz needs at least one qubit".into()));
        }
        if depth == 0 {
            return Err(Error::InvalidArgument("ansatz depth must be >= 1".into()));
        }
        Ok(Self {
            form,
            num_qubits,
            depth,
        })
    }

    /// `q(d+1)` for Ry, `2q(d+1)` for RyRz.
    pub fn parameter_count(&self) -> usize {
        self.form.rotations_per_qubit() * self.num_qubits * (self.depth + 1)
    }

    pub fn build_circuit(&self, theta: &[f64]) -> Result<Vec<Gate>> {
        if theta.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_count(),
                actual: theta.len(),
            });
        }
        let q = self.num_qubits;
        let mut gates = Vec::with_capacity(theta.len() + self.depth * q.saturating_sub(1));
        let mut angles = theta.iter().copied();
        for layer in 0..=self.depth {
            if layer > 0 {
                gates.extend((0..q - 1).map(|k| Gate::Cnot {
                    control: k,
                    target: k + 1,
                }));
            }
            for qubit in 0..q {
                gates.push(Gate::Ry {
                    qubit,
                    angle: angles.next().unwrap(),
                });
                if self.form == AnsatzForm::RyRz {
                    gates.push(Gate::Rz {
                        qubit,
                        angle: angles.next().unwrap(),
                    });
                }
            }
        }
        Ok(gates)
    }

    /// i.i.d. uniform angles on `[-π, π]`.
    pub fn random_parameters<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.parameter_count())
            .map(|_| rng.random_range(-PI..=PI))
            .collect()
    }
}
