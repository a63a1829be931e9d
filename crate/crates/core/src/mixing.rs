//! Block mixing matrix: link propensities between the ten risk levels.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::distributions::LEVEL_COUNT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixingError {
    #[error("gamma must be positive, got {0}")]
    Gamma(f64),
}

/// A structural property of the mixing matrix that failed to hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxiomViolation {
    Asymmetric { row: usize, col: usize },
    NotNormalized { sum: f64 },
    RowNotDiagonalDominant { row: usize, col: usize },
    DiagonalNotDecreasing { index: usize },
}

impl fmt::Display for AxiomViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Asymmetric { row, col } => {
                write!(f, "entry ({row},{col}) differs from its transpose")
            }
            Self::NotNormalized { sum } => write!(f, "grand sum is {sum}, expected 1"),
            Self::RowNotDiagonalDominant { row, col } => {
                write!(
                    f,
                    "row {row}: off-diagonal column {col} exceeds the diagonal"
                )
            }
            Self::DiagonalNotDecreasing { index } => {
                write!(
                    f,
                    "diagonal does not decrease between {index} and {}",
                    index + 1
                )
            }
        }
    }
}

pub type Entries = [[f64; LEVEL_COUNT]; LEVEL_COUNT];

/// Symmetric, grand-sum-normalized block propensity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    entries: Entries,
    gamma: f64,
}

fn normal_density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// Column `x` of the raw matrix holds the Normal(x, x) density at `1..=10`.
pub(crate) fn raw_columns() -> Entries {
    let mut raw = [[0.0; LEVEL_COUNT]; LEVEL_COUNT];
    for (row, raw_row) in raw.iter_mut().enumerate() {
        for (col, cell) in raw_row.iter_mut().enumerate() {
            let loc = (col + 1) as f64;
            *cell = normal_density((row + 1) as f64, loc, loc);
        }
    }
    raw
}

fn normalize(entries: &mut Entries) {
    let total: f64 = entries.iter().flatten().sum();
    for cell in entries.iter_mut().flatten() {
        *cell /= total;
    }
}

impl MixingMatrix {
    /// Baseline matrix: Normal-density columns, upper triangle mirrored onto
    /// the lower triangle, divided by the grand sum.
    pub fn base() -> Self {
        let mut entries = raw_columns();
        for row in 0..LEVEL_COUNT {
            for col in 0..row {
                entries[row][col] = entries[col][row];
            }
        }
        normalize(&mut entries);
        Self {
            entries,
            gamma: 1.0,
        }
    }

    /// Raises every entry to `gamma` and renormalizes. This is elementwise
    /// exponentiation, not a matrix power.
    pub fn apply_gamma(&self, gamma: f64) -> Result<Self, MixingError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(MixingError::Gamma(gamma));
        }
        let mut entries = self.entries;
        for cell in entries.iter_mut().flatten() {
            *cell = cell.powf(gamma);
        }
        normalize(&mut entries);
        Ok(Self {
            entries,
            gamma: self.gamma * gamma,
        })
    }

    /// Baseline matrix re-parameterised with `gamma`.
    pub fn with_gamma(gamma: f64) -> Result<Self, MixingError> {
        Self::base().apply_gamma(gamma)
    }

    pub fn entries(&self) -> &Entries {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row][col]
    }

    /// Cumulative exponent applied to the baseline.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn check_axioms(&self) -> Result<(), AxiomViolation> {
        let e = &self.entries;
        for row in 0..LEVEL_COUNT {
            for col in 0..LEVEL_COUNT {
                if e[row][col] != e[col][row] {
                    return Err(AxiomViolation::Asymmetric { row, col });
                }
            }
        }
        let sum: f64 = e.iter().flatten().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(AxiomViolation::NotNormalized { sum });
        }
        for row in 0..LEVEL_COUNT {
            for col in 0..LEVEL_COUNT {
                if col != row && e[row][row] < e[row][col] {
                    return Err(AxiomViolation::RowNotDiagonalDominant { row, col });
                }
            }
        }
        for index in 0..LEVEL_COUNT - 1 {
            if e[index][index] <= e[index + 1][index + 1] {
                return Err(AxiomViolation::DiagonalNotDecreasing { index });
            }
        }
        Ok(())
    }

    /// Ten comma-separated rows at full round-trip precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in &self.entries {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}
