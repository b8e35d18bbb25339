//! Probability-vector similarity: Jaccard–Tanimoto index, normalized scalar
//! product, set averages and outcome classification.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A validated outcome distribution over `2^q` basis states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    entries: Vec<f64>,
    /// Measurement circuit the entries came from (0 = all-Z basis).
    pub circuit: usize,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>, circuit: usize) -> Result<Self> {
        if entries.is_empty() || !entries.len().is_power_of_two() {
            return Err(Error::InvalidProbabilities(format!(
                "length {} is not a power of two",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidProbabilities(format!("entry {bad} outside [0, 1]")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
        }
        Ok(Self { entries, circuit })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    #[serde(rename = "jt")]
    JaccardTanimoto,
    Scalar,
}

impl Measure {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "jt" => Some(Measure::JaccardTanimoto),
            "scalar" => Some(Measure::Scalar),
            _ => None,
        }
    }

    pub fn evaluate(self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Measure::JaccardTanimoto => jaccard_tanimoto(x, y),
            Measure::Scalar => normalized_scalar(x, y),
        }
    }
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// `Σ min(xᵢ, yᵢ) / Σ max(xᵢ, yᵢ)`; two all-zero vectors count as identical.
pub fn jaccard_tanimoto(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    let (lo, hi) = x
        .iter()
        .zip(y)
        .fold((0.0, 0.0), |(lo, hi), (a, b)| (lo + a.min(*b), hi + a.max(*b)));
    if hi == 0.0 {
        return Ok(1.0);
    }
    Ok(lo / hi)
}

/// Cosine of the angle between `x` and `y`.
pub fn normalized_scalar(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    if x == y && x.iter().any(|&v| v != 0.0) {
        return Ok(1.0);
    }
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::InvalidArgument("scalar product of a zero vector".into()));
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(0.0, 1.0))
}

/// Mean similarity of each vector against the whole set, itself included.
pub fn averaged_similarity(set: &[ProbabilityVector], measure: Measure) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let n = set.len() as f64;
    set.par_iter()
        .map(|v| {
            let mut total = 0.0;
            for w in set {
                total += measure.evaluate(v.entries(), w.entries())?;
            }
            Ok(total / n)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeClass {
    GroundLike,
    Excited,
    Erroneous,
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeClass::GroundLike => "ground-like",
            OutcomeClass::Excited => "excited",
            OutcomeClass::Erroneous => "erroneous",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub theta_high: f64,
    pub theta_low: f64,
    /// Closed energy band of ground-related outcomes, Hartree.
    pub ground_band: (f64, f64),
    /// Closed energy band of excited-sector outcomes, Hartree.
    pub excited_band: (f64, f64),
}

impl ClassifyConfig {
    pub fn for_ground_energy(e0: f64) -> Self {
        Self {
            theta_high: 0.5,
            theta_low: 0.2,
            ground_band: (e0 - 0.005, e0 + 0.17),
            excited_band: (-1.30, -1.10),
        }
    }

    pub fn classify(&self, energy: f64, averaged: f64) -> OutcomeClass {
        let within = |(lo, hi): (f64, f64)| (lo..=hi).contains(&energy);
        if within(self.ground_band) && averaged >= self.theta_high {
            OutcomeClass::GroundLike
        } else if within(self.excited_band) && averaged <= self.theta_low {
            OutcomeClass::Excited
        } else {
            OutcomeClass::Erroneous
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityEntry {
    pub index: usize,
    pub energy: f64,
    pub averaged_jt: f64,
    pub averaged_scalar: f64,
    pub class: OutcomeClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub circuit: usize,
    /// Measure whose averages were compared against the thresholds.
    pub measure: Measure,
    pub config: ClassifyConfig,
    pub entries: Vec<SimilarityEntry>,
    pub ground_like: usize,
    pub excited: usize,
    pub erroneous: usize,
}

impl SimilarityReport {
    /// Averages both measures over the set and classifies every trial by the
    /// averages of `measure`.
    pub fn build(
        vectors: &[ProbabilityVector],
        energies: &[f64],
        config: ClassifyConfig,
        measure: Measure,
    ) -> Result<Self> {
        if vectors.len() != energies.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                actual: energies.len(),
            });
        }
        let jt = averaged_similarity(vectors, Measure::JaccardTanimoto)?;
        let scalar = averaged_similarity(vectors, Measure::Scalar)?;
        let entries: Vec<SimilarityEntry> = (0..vectors.len())
            .map(|i| SimilarityEntry {
                index: i,
                energy: energies[i],
                averaged_jt: jt[i],
                averaged_scalar: scalar[i],
                class: config.classify(
                    energies[i],
                    match measure {
                        Measure::JaccardTanimoto => jt[i],
                        Measure::Scalar => scalar[i],
                    },
                ),
            })
            .collect();
        let count = |c| entries.iter().filter(|e| e.class == c).count();
        Ok(Self {
            circuit: vectors[0].circuit,
            measure,
            config,
            ground_like: count(OutcomeClass::GroundLike),
            excited: count(OutcomeClass::Excited),
            erroneous: count(OutcomeClass::Erroneous),
            entries,
        })
    }
}
