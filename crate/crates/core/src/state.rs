use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eig_herm, is_finite, ket_bra, CMatrix, C64};

/// Levels in every configuration handled by this crate.
pub const LEVELS: usize = 3;

const HERMITIAN_REL_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-9;
const POSITIVITY_TOL: f64 = 1e-9;

/// A 3×3 density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.shape() != (LEVELS, LEVELS) {
            return Err(Error::invalid(format!("density matrix must be 3×3, got {:?}", m.shape())));
        }
        if !is_finite(&m) {
            return Err(Error::invalid("density matrix has non-finite entries"));
        }
        let skew = (&m - m.adjoint()).norm();
        if skew > HERMITIAN_REL_TOL * m.norm().max(1.0) {
            return Err(Error::invalid(format!("density matrix is not Hermitian (skew {skew:.3e})")));
        }
        let rho = DensityMatrix(m);
        let trace = rho.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::invalid(format!("density matrix trace is {trace}, expected 1")));
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::invalid(format!("density matrix has negative eigenvalue {min_eig:.3e}")));
        }
        Ok(rho)
    }

    /// Wraps a matrix without validation, after symmetrizing it.
    pub(crate) fn from_raw_hermitized(m: CMatrix) -> Self {
        DensityMatrix((&m + m.adjoint()) * c(0.5))
    }

    /// `|level⟩⟨level|`, zero-based.
    pub fn pure_level(level: usize) -> Result<Self> {
        if level >= LEVELS {
            return Err(Error::invalid(format!("level index {level} out of range")));
        }
        Ok(DensityMatrix(ket_bra(LEVELS, level, level)))
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn pure_state(amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.len() != LEVELS {
            return Err(Error::invalid("pure state needs three amplitudes"));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::invalid("pure state has zero norm"));
        }
        let m = CMatrix::from_fn(LEVELS, LEVELS, |i, j| amplitudes[i] * amplitudes[j].conj() / norm);
        Self::new(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn population(&self, level: usize) -> f64 {
        self.0[(level, level)].re
    }

    pub fn populations(&self) -> [f64; LEVELS] {
        [self.population(0), self.population(1), self.population(2)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eig_herm(&self.0).map(|(v, _)| v).unwrap_or_else(|_| vec![f64::NAN; LEVELS])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `U·ρ·U†`.
    pub fn transformed(&self, unitary: &CMatrix) -> Self {
        DensityMatrix::from_raw_hermitized(unitary * &self.0 * unitary.adjoint())
    }
}

/// Serializable description of an initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    /// One-based level index, matching the level labels |1⟩, |2⟩, |3⟩.
    Level { level: usize },
    /// Explicit real-valued matrix, row-major.
    Matrix { matrix: [[f64; LEVELS]; LEVELS] },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Level { level: 1 }
    }
}

impl InitialState {
    pub fn to_density(&self) -> Result<DensityMatrix> {
        match self {
            InitialState::Level { level } => {
                if *level == 0 {
                    return Err(Error::invalid("initial level index is one-based"));
                }
                DensityMatrix::pure_level(level - 1)
            }
            InitialState::Matrix { matrix } => {
                DensityMatrix::new(CMatrix::from_fn(LEVELS, LEVELS, |i, j| c(matrix[i][j])))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_levels_are_valid() {
        for k in 0..3 {
            let rho = DensityMatrix::pure_level(k).unwrap();
            assert_eq!(rho.population(k), 1.0);
            let eigs = rho.eigenvalues();
            assert!((eigs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(DensityMatrix::pure_level(3).is_err());
    }

    #[test]
    fn rejects_bad_matrices() {
        let mut m = CMatrix::identity(3, 3);
        assert!(DensityMatrix::new(m.clone()).is_err()); // trace 3
        m = ket_bra(3, 0, 0) * c(1.5) - ket_bra(3, 1, 1) * c(0.5);
        assert!(DensityMatrix::new(m).is_err()); // negative eigenvalue
        let mut skew = ket_bra(3, 0, 0);
        skew[(0, 1)] = c(0.1);
        assert!(DensityMatrix::new(skew).is_err());
    }

    #[test]
    fn pure_superposition() {
        let s = 0.5f64.sqrt();
        let rho = DensityMatrix::pure_state(&[c(s), c(0.0), C64::new(0.0, s)]).unwrap();
        assert!((rho.matrix()[(0, 2)] - C64::new(0.0, -0.5)).norm() < 1e-15);
        assert!(rho.min_eigenvalue().abs() < 1e-12);
    }

    #[test]
    fn initial_state_spec() {
        let rho = InitialState::Level { level: 2 }.to_density().unwrap();
        assert_eq!(rho.population(1), 1.0);
        assert!(InitialState::Level { level: 0 }.to_density().is_err());
        let mixed = InitialState::Matrix { matrix: [[0.5, 0.0, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 0.25]] };
        assert_eq!(mixed.to_density().unwrap().populations(), [0.5, 0.25, 0.25]);
    }
}
