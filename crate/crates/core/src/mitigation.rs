//! Readout-error mitigation with a measured calibration matrix.
//!
//! Each computational basis state is prepared with X gates, run through the
//! configured noise, and measured; the empirical distributions form the
//! columns of the calibration matrix `A`. Mitigated probabilities solve
//! `min ‖A x − p‖₂` over the probability simplex.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{counts_to_frequencies, sample_counts};
use crate::noise::{ConfusionMatrix, NoiseConfig};
use crate::state::{Gate, Mode, QuantumState};

/// Condition number above which a warning is attached to mitigated output.
pub const ILL_CONDITIONED: f64 = 1e8;
const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct MitigationModel {
    calibration_matrix: ConfusionMatrix,
    shots_per_column: u64,
    matrix: DMatrix<f64>,
    inverse: Option<DMatrix<f64>>,
    gram: DMatrix<f64>,
    lipschitz: f64,
    condition: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mitigated {
    pub probabilities: Vec<f64>,
    /// Condition number of `A` when it exceeds [`ILL_CONDITIONED`].
    pub condition_warning: Option<f64>,
}

impl MitigationModel {
    /// Wraps an already measured calibration matrix.
    pub fn from_matrix(calibration_matrix: ConfusionMatrix, shots_per_column: u64) -> Self {
        let n = calibration_matrix.dim();
        let matrix = DMatrix::from_row_slice(n, n, calibration_matrix.data());
        let svd = matrix.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let inverse = if condition.is_finite() && condition < 1e12 {
            matrix.clone().try_inverse()
        } else {
            None
        };
        let gram = matrix.transpose() * &matrix;
        Self {
            calibration_matrix,
            shots_per_column,
            inverse,
            gram,
            lipschitz: smax * smax,
            condition,
            matrix,
        }
    }

    pub fn calibration_matrix(&self) -> &ConfusionMatrix {
        &self.calibration_matrix
    }

    pub fn shots_per_column(&self) -> u64 {
        self.shots_per_column
    }

    pub fn dim(&self) -> usize {
        self.calibration_matrix.dim()
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Constrained least-squares estimate of the true distribution.
    pub fn mitigate(&self, noisy: &[f64]) -> Result<Mitigated> {
        let n = self.dim();
        if noisy.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: noisy.len(),
            });
        }
        if noisy.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidProbabilities("non-finite entry".into()));
        }
        let p = DVector::from_column_slice(noisy);
        let condition_warning = (self.condition > ILL_CONDITIONED).then_some(self.condition);

        // If the unconstrained solution is already feasible it is optimal.
        let start = match &self.inverse {
            Some(inv) => {
                let x = inv * &p;
                let sum: f64 = x.iter().sum();
                if x.iter().all(|&v| v >= 0.0) && (sum - 1.0).abs() <= 1e-9 {
                    return Ok(Mitigated {
                        probabilities: x.iter().copied().collect(),
                        condition_warning,
                    });
                }
                project_to_simplex(x.as_slice())
            }
            None => project_to_simplex(noisy),
        };
        let probabilities = self.projected_gradient(&p, start);
        Ok(Mitigated {
            probabilities,
            condition_warning,
        })
    }

    /// Accelerated projected gradient (FISTA) on `½‖Ax − p‖²`.
    fn projected_gradient(&self, p: &DVector<f64>, start: Vec<f64>) -> Vec<f64> {
        let atp = self.matrix.transpose() * p;
        let step = if self.lipschitz > 0.0 { 1.0 / self.lipschitz } else { 1.0 };
        let mut x = DVector::from_vec(start);
        let mut y = x.clone();
        let mut t = 1.0_f64;
        for _ in 0..MAX_ITERATIONS {
            let grad = &self.gram * &y - &atp;
            let candidate = &y - grad * step;
            let next = DVector::from_vec(project_to_simplex(candidate.as_slice()));
            let change = (&next - &x).amax();
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = &next + (&next - &x) * ((t - 1.0) / t_next);
            x = next;
            t = t_next;
            if change < TOLERANCE {
                break;
            }
        }
        x.iter().copied().collect()
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}`.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i as f64 + 1.0);
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter().map(|&x| (x - shift).max(0.0)).collect()
}

/// Measures the calibration matrix through the noisy pipeline.
pub fn build_mitigation<R: Rng + ?Sized>(
    noise: &NoiseConfig,
    num_qubits: usize,
    shots: u64,
    rng: &mut R,
) -> Result<MitigationModel> {
    if shots == 0 {
        return Err(Error::InvalidArgument("calibration shots must be >= 1".into()));
    }
    let dim = 1usize << num_qubits;
    let confusion = noise.confusion(num_qubits)?;
    let mode = if noise.gate_noise().is_some() {
        Mode::Mixed
    } else {
        Mode::Pure
    };
    let mut data = vec![0.0; dim * dim];
    for prepared in 0..dim {
        let mut state = QuantumState::init_zero(num_qubits, mode)?;
        for qubit in (0..num_qubits).filter(|q| prepared >> q & 1 == 1) {
            let gate = Gate::X { qubit };
            state.apply_gate(&gate)?;
            if mode == Mode::Mixed {
                for ch in noise.channels_for(&gate)? {
                    state.apply_channel(&ch)?;
                }
            }
        }
        let read = confusion.apply(&state.probabilities())?;
        let column = counts_to_frequencies(&sample_counts(&read, shots, rng)?);
        for (i, f) in column.into_iter().enumerate() {
            data[i * dim + prepared] = f;
        }
    }
    // Empirical columns sum to one up to rounding in the frequency division.
    for j in 0..dim {
        let s: f64 = (0..dim).map(|i| data[i * dim + j]).sum();
        for i in 0..dim {
            data[i * dim + j] /= s;
        }
    }
    Ok(MitigationModel::from_matrix(ConfusionMatrix::from_rows(dim, data)?, shots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{DeviceCalibration, ErrorClass, QubitCalibration};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn symmetric_readout(q: usize, p: f64) -> NoiseConfig {
        let cal = DeviceCalibration {
            backend: "t".into(),
            date: "t".into(),
            qubits: vec![
                QubitCalibration {
                    t1_us: 100.0,
                    t2_us: 100.0,
                    p01: p,
                    p10: p
                };
                q
            ],
            gates: vec![],
        };
        NoiseConfig::new(ErrorClass::ReadoutOnly, Some(cal)).unwrap()
    }

    #[test]
    fn noiseless_calibration_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = build_mitigation(&NoiseConfig::noiseless(), 2, 100, &mut rng).unwrap();
        assert!(m.calibration_matrix().is_identity());
    }

    #[test]
    fn readout_calibration_matches_analytic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = build_mitigation(&symmetric_readout(1, 0.1), 1, 100_000, &mut rng).unwrap();
        let a = m.calibration_matrix();
        for (i, j, want) in [(0, 0, 0.9), (1, 0, 0.1), (0, 1, 0.1), (1, 1, 0.9)] {
            assert!((a.get(i, j) - want).abs() < 0.01);
        }
        for j in 0..2 {
            assert!((a.get(0, j) + a.get(1, j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_model_returns_input() {
        let m = MitigationModel::from_matrix(ConfusionMatrix::identity(2), 1);
        let p = [0.1, 0.2, 0.3, 0.4];
        let out = m.mitigate(&p).unwrap();
        for (a, b) in out.probabilities.iter().zip(p) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(out.condition_warning.is_none());
    }

    #[test]
    fn recovers_exact_preimage() {
        let cal = symmetric_readout(2, 0.07);
        let a = cal.confusion(2).unwrap();
        let m = MitigationModel::from_matrix(a.clone(), 1);
        let truth = [0.05, 0.6, 0.0, 0.35];
        let out = m.mitigate(&a.apply(&truth).unwrap()).unwrap();
        for (x, t) in out.probabilities.iter().zip(truth) {
            assert!((x - t).abs() < 1e-6);
        }
    }

    #[test]
    fn infeasible_input_lands_on_simplex() {
        let a = symmetric_readout(1, 0.2).confusion(1).unwrap();
        let m = MitigationModel::from_matrix(a, 1);
        // A⁻¹p has a negative component here.
        let out = m.mitigate(&[1.0 + 1e-12, -1e-12]).unwrap().probabilities;
        assert!(out.iter().all(|&x| x >= 0.0));
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((out[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn singular_matrix_warns() {
        let a = ConfusionMatrix::from_rows(2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let m = MitigationModel::from_matrix(a, 1);
        let out = m.mitigate(&[0.5, 0.5]).unwrap();
        assert!(out.condition_warning.is_some());
        assert!((out.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_to_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        let p = project_to_simplex(&[2.0, 0.0, -1.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let q = project_to_simplex(&[0.5, 0.5, 0.5]);
        for x in q {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
