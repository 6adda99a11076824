//! Dense state vectors and operator algebra for small registers.

mod eigen;
mod pauli;

pub use eigen::{eigendecompose, pauli_exponential, EigenSystem, Level, DEGENERACY_TOLERANCE};
pub use pauli::{parse_real, Axis, HamiltonianSpec, PauliString, PauliTerm};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<Complex64>;

/// Largest register handled by the dense path.
pub const MAX_QUBITS: usize = 6;

const ZERO_NORM: f64 = 1e-300;

/// Whether an operator passed to [`StateVector::apply_matrix`] preserves the norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Unitary,
    /// The result is renormalized.
    NonUnitary,
}

/// Normalized pure state of `num_qubits` qubits.
///
/// Basis index bits run from the leftmost ket label (most significant) to the
/// rightmost, so `|10>` on two qubits has index 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails on a wrong length or zero norm.
    pub fn new(num_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                num_qubits,
                max: MAX_QUBITS,
            });
        }
        let dim = 1usize << num_qubits;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        Self::normalized(num_qubits, amplitudes)
    }

    fn normalized(num_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq.is_nan() || norm_sq < ZERO_NORM {
            return Err(Error::Annihilated { norm_sq });
        }
        let inv = norm_sq.sqrt().recip();
        for a in &mut amplitudes {
            *a *= inv;
        }
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {} out of range for {} qubits",
                index, num_qubits
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self::new(num_qubits, amplitudes)
    }

    /// Computational basis state from a ket label such as `"0110"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let index = bits.chars().try_fold(0usize, |acc, c| match c {
            '0' => Ok(acc << 1),
            '1' => Ok((acc << 1) | 1),
            _ => Err(Error::Parse(format!("bad ket label '{}'", bits))),
        })?;
        Self::basis_state(bits.len(), index)
    }

    /// Product state from per-qubit labels `0`, `1`, `+`, `-`.
    pub fn product(labels: &str) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amplitudes = vec![Complex64::new(1.0, 0.0)];
        for c in labels.chars() {
            let (a0, a1) = match c {
                '0' => (1.0, 0.0),
                '1' => (0.0, 1.0),
                '+' => (h, h),
                '-' => (h, -h),
                _ => return Err(Error::Parse(format!("bad product label '{}'", labels))),
            };
            amplitudes = amplitudes
                .iter()
                .flat_map(|&x| [x * a0, x * a1])
                .collect();
        }
        Self::new(labels.chars().count(), amplitudes)
    }

    /// Haar-random state: independent standard complex Gaussians, normalized.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                num_qubits,
                max: MAX_QUBITS,
            });
        }
        let amplitudes = (0..1usize << num_qubits)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        Self::normalized(num_qubits, amplitudes)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_dim(other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Real part of `<ψ|A|ψ>`.
    pub fn expectation(&self, op: &Matrix) -> Result<f64> {
        self.check_dim(op.nrows())?;
        let v = op * DVector::from_column_slice(&self.amplitudes);
        Ok(self
            .amplitudes
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum())
    }

    pub fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        let image = p.apply_to(self.num_qubits, &self.amplitudes)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&image)
            .map(|(a, b)| (a.conj() * b).re)
            .sum())
    }

    pub fn apply_matrix(&self, op: &Matrix, kind: OperatorKind) -> Result<StateVector> {
        if op.nrows() != op.ncols() {
            return Err(Error::DimensionMismatch {
                expected: op.nrows(),
                found: op.ncols(),
            });
        }
        self.check_dim(op.ncols())?;
        let v = op * DVector::from_column_slice(&self.amplitudes);
        let amplitudes: Vec<Complex64> = v.iter().copied().collect();
        match kind {
            OperatorKind::Unitary => Ok(StateVector {
                num_qubits: self.num_qubits,
                amplitudes,
            }),
            OperatorKind::NonUnitary => Self::normalized(self.num_qubits, amplitudes),
        }
    }

    /// Applies a Pauli string (always unitary).
    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amplitudes: p.apply_to(self.num_qubits, &self.amplitudes)?,
        })
    }

    /// Replaces the amplitudes with `amplitudes`, renormalizing.
    pub(crate) fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Result<StateVector> {
        self.check_dim(amplitudes.len())?;
        Self::normalized(self.num_qubits, amplitudes)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }
}

/// `|<a|b>|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    a.fidelity(b)
}
