use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::{HamiltonianSpec, Matrix, MAX_QUBITS};
use crate::error::{Error, Result};

/// Eigenvalues closer than this are one energy level.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Level energies this close to a multiple of [`ENERGY_GRID`] are moved onto it.
const GRID_SNAP_TOLERANCE: f64 = 1e-11;
const ENERGY_GRID: f64 = 1.0 / 1048576.0;

fn snap_to_grid(e: f64) -> f64 {
    let snapped = (e / ENERGY_GRID).round() * ENERGY_GRID;
    if (snapped - e).abs() <= GRID_SNAP_TOLERANCE * e.abs().max(1.0) {
        snapped
    } else {
        e
    }
}

/// A group of (numerically) degenerate eigenvectors sharing one energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub energy: f64,
    /// First eigenvector column of the level.
    pub start: usize,
    pub len: usize,
}

impl Level {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Spectral decomposition `H = V diag(E) V†` with ascending eigenvalues.
///
/// Eigenvalues within [`DEGENERACY_TOLERANCE`] of their neighbour are merged
/// into one [`Level`] and snapped to the level mean, so any function of the
/// energy takes one value per level regardless of how the solver chose the
/// basis inside it. Means within 1e-11 of a multiple of 2^-20 are rounded
/// onto it, which makes integer and dyadic spectra exact.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
    levels: Vec<Level>,
}

pub fn eigendecompose(h: &HamiltonianSpec) -> Result<EigenSystem> {
    if h.num_qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            num_qubits: h.num_qubits,
            max: MAX_QUBITS,
        });
    }
    EigenSystem::from_hermitian(h.to_matrix()?)
}

impl EigenSystem {
    pub fn from_hermitian(m: Matrix) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.ncols(),
            });
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let hermitian_defect = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if hermitian_defect > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "matrix is not Hermitian (defect {:e})",
                hermitian_defect
            )));
        }

        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut eigenvectors = Matrix::zeros(dim, dim);
        for (col, &k) in order.iter().enumerate() {
            eigenvectors.set_column(col, &eig.eigenvectors.column(k));
        }

        let mut levels: Vec<Level> = Vec::new();
        for (k, &e) in eigenvalues.iter().enumerate() {
            match levels.last_mut() {
                Some(level) if e - eigenvalues[k - 1] <= DEGENERACY_TOLERANCE => level.len += 1,
                _ => levels.push(Level {
                    energy: e,
                    start: k,
                    len: 1,
                }),
            }
        }
        for level in &mut levels {
            let cols = level.columns();
            level.energy = snap_to_grid(eigenvalues[cols.clone()].iter().sum::<f64>() / level.len as f64);
            eigenvalues[cols].fill(level.energy);
        }

        Ok(Self {
            eigenvalues,
            eigenvectors,
            levels,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level_energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    /// Coordinates `V† ψ` of raw amplitudes in the eigenbasis.
    pub fn to_eigenbasis(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        let v = &self.eigenvectors;
        (0..self.dim())
            .map(|k| {
                v.column(k)
                    .iter()
                    .zip(amplitudes)
                    .map(|(e, a)| e.conj() * a)
                    .sum()
            })
            .collect()
    }

    /// Raw amplitudes `V c` from eigenbasis coordinates.
    pub fn from_eigenbasis(&self, coefficients: &[Complex64]) -> Vec<Complex64> {
        let v = &self.eigenvectors;
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (k, c) in coefficients.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, e) in out.iter_mut().zip(v.column(k).iter()) {
                *o += e * c;
            }
        }
        out
    }

    /// Dense matrix of `f(H) = V diag(f(E_n)) V†`.
    pub fn function_of(&self, f: impl Fn(f64) -> Complex64) -> Matrix {
        let dim = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for level in &self.levels {
            let value = f(level.energy);
            for col in level.columns() {
                for row in 0..dim {
                    scaled[(row, col)] *= value;
                }
            }
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// Probability weight of each level for raw amplitudes.
    pub fn level_populations(&self, amplitudes: &[Complex64]) -> Vec<f64> {
        let coeffs = self.to_eigenbasis(amplitudes);
        self.levels
            .iter()
            .map(|l| coeffs[l.columns()].iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }
}

/// `e^{i·angle·H}` as a dense unitary built from the eigendecomposition.
pub fn pauli_exponential(h: &HamiltonianSpec, angle: f64) -> Result<Matrix> {
    let eig = eigendecompose(h)?;
    Ok(eig.function_of(|e| Complex64::from_polar(1.0, angle * e)))
}
