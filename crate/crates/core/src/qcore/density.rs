use nalgebra::DMatrix;

use super::{PauliAxis, StateVector, C64, MAX_QUBITS};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;

/// A validated density operator: Hermitian, unit trace, PSD (all within
/// tolerance). Stored dense.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates and wraps a `2^n × 2^n` matrix.
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: entries.ncols(),
            });
        }
        if dim < 2 || !dim.is_power_of_two() || dim.trailing_zeros() as usize > MAX_QUBITS {
            return Err(Error::DimensionMismatch {
                expected: dim.next_power_of_two().max(2),
                found: dim,
            });
        }
        let herm_dev = hermitian_deviation(&entries);
        if herm_dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm_dev));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(trace.re));
        }
        let min_eig = symmetrize(&entries)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::NotPsd(min_eig));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            entries,
        })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(state: &StateVector) -> Self {
        Self::mixture(std::slice::from_ref(state)).expect("single state mixture")
    }

    /// Uniform mixture `(1/m) Σ |ψ_k⟩⟨ψ_k|`.
    pub fn mixture(states: &[StateVector]) -> Result<Self> {
        let first = states.first().ok_or(Error::Empty("mixture states"))?;
        let dim = first.dim();
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for s in states {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            let a = s.amplitudes();
            for c in 0..dim {
                let ac = a[c].conj();
                if ac == C64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..dim {
                    acc[(r, c)] += a[r] * ac;
                }
            }
        }
        acc /= C64::new(states.len() as f64, 0.0);
        Ok(Self {
            n_qubits: first.n_qubits(),
            entries: acc,
        })
    }

    /// The maximally mixed state `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        Self::from_matrix(DMatrix::from_diagonal_element(dim, dim, C64::new(1.0 / dim as f64, 0.0)))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// `Tr[P ρ]` for a single-qubit density matrix; the imaginary part is the
    /// numerical residue.
    pub fn expectation(&self, axis: PauliAxis) -> Result<C64> {
        if self.n_qubits != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: self.n_qubits,
            });
        }
        let p = super::gates::pauli(axis);
        let m = &self.entries;
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..2 {
            for k in 0..2 {
                acc += p[r][k] * m[(k, r)];
            }
        }
        Ok(acc)
    }

    /// `‖self − other‖_F²`.
    pub fn frobenius_distance_sq(&self, other: &DensityMatrix) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok((&self.entries - &other.entries).iter().map(|z| z.norm_sqr()).sum())
    }

    fn check_same_dim(&self, other: &DensityMatrix) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(())
    }
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            let d = (m[(r, c)] - m[(c, r)].conj()).norm();
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    worst
}

fn symmetrize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// One-qubit reduced density matrix `Tr_{j≠keep}[|ψ⟩⟨ψ|]`.
pub fn reduced_density_1q(state: &StateVector, keep: usize) -> Result<DensityMatrix> {
    state.check_qubit(keep)?;
    let m = state.mask(keep);
    let a = state.amplitudes();
    let mut rho = DMatrix::<C64>::zeros(2, 2);
    for i in 0..a.len() {
        if i & m == 0 {
            let a0 = a[i];
            let a1 = a[i | m];
            rho[(0, 0)] += a0 * a0.conj();
            rho[(0, 1)] += a0 * a1.conj();
            rho[(1, 1)] += a1 * a1.conj();
        }
    }
    rho[(1, 0)] = rho[(0, 1)].conj();
    Ok(DensityMatrix {
        n_qubits: 1,
        entries: rho,
    })
}

/// `½ Σ|λ_i|` over the eigenvalues of `ρ − σ`, clamped to `[0, 1]`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.check_same_dim(sigma)?;
    let diff = symmetrize(&(&rho.entries - &sigma.entries));
    let half_norm: f64 = 0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>();
    Ok(half_norm.clamp(0.0, 1.0))
}
