//! Dense statevector and density-matrix primitives.
//!
//! Qubit ordering: qubit 0 is the most significant bit of the amplitude
//! index, so for `n` qubits the basis state `|b_0 b_1 … b_{n-1}⟩` lives at
//! index `Σ b_k 2^{n-1-k}`.
//!
//! All public operations are pure: they borrow their inputs and return new
//! values. The `*_in_place` methods are the crate-internal fast path used by
//! circuit evaluation.

mod density;
pub mod gates;

pub use density::{reduced_density_1q, trace_distance, DensityMatrix};
pub use gates::{Gate1, Gate2};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type C64 = num_complex::Complex64;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 16;
/// Tolerance on `|G†G − I|` for caller-supplied gates.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance on `|‖ψ‖ − 1|` for caller-supplied amplitudes.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
}

/// A normalized pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::UnsupportedQubitCount(n_qubits));
    }
    Ok(())
}

impl StateVector {
    /// `|0⟩^⊗n`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// Computational basis state with the given amplitude index.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two and the norm 1
    /// within [`NORM_TOL`].
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: len.next_power_of_two().max(2),
                found: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("amplitudes"));
        }
        let norm = norm_of(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let norm = norm_of(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::from_amplitudes(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(inner_raw(&self.amps, &other.amps))
    }

    pub(crate) fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    pub(crate) fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    /// Applies a 2×2 matrix to one qubit without unitarity or range checks.
    pub(crate) fn apply_1q_in_place(&mut self, qubit: usize, g: &Gate1) {
        let m = self.mask(qubit);
        let dim = self.amps.len();
        for i in 0..dim {
            if i & m == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | m];
                self.amps[i] = g[0][0] * a0 + g[0][1] * a1;
                self.amps[i | m] = g[1][0] * a0 + g[1][1] * a1;
            }
        }
    }

    /// Applies a 2×2 matrix to `target` on the subspace where `control` is 1.
    pub(crate) fn apply_controlled_1q_in_place(&mut self, control: usize, target: usize, g: &Gate1) {
        let mc = self.mask(control);
        let mt = self.mask(target);
        let dim = self.amps.len();
        for i in 0..dim {
            if i & mc != 0 && i & mt == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | mt];
                self.amps[i] = g[0][0] * a0 + g[0][1] * a1;
                self.amps[i | mt] = g[1][0] * a0 + g[1][1] * a1;
            }
        }
    }

    /// Zeroes every amplitude whose `qubit` bit is 0 (projector onto `|1⟩`).
    pub(crate) fn project_one_in_place(&mut self, qubit: usize) {
        let m = self.mask(qubit);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & m == 0 {
                *a = C64::new(0.0, 0.0);
            }
        }
    }

    pub(crate) fn apply_2q_in_place(&mut self, qa: usize, qb: usize, g: &Gate2) {
        let ma = self.mask(qa);
        let mb = self.mask(qb);
        let dim = self.amps.len();
        for i in 0..dim {
            if i & ma == 0 && i & mb == 0 {
                let idx = [i, i | mb, i | ma, i | ma | mb];
                let v = idx.map(|k| self.amps[k]);
                for (r, &k) in idx.iter().enumerate() {
                    self.amps[k] = g[r][0] * v[0] + g[r][1] * v[1] + g[r][2] * v[2] + g[r][3] * v[3];
                }
            }
        }
    }

    pub(crate) fn apply_cnot_in_place(&mut self, control: usize, target: usize) {
        let mc = self.mask(control);
        let mt = self.mask(target);
        let dim = self.amps.len();
        for i in 0..dim {
            if i & mc != 0 && i & mt == 0 {
                self.amps.swap(i, i | mt);
            }
        }
    }

    /// `(a0, a1)` amplitude pairs differing only in `qubit`, as a Bloch vector.
    pub(crate) fn bloch_components(&self, qubit: usize) -> [f64; 3] {
        let m = self.mask(qubit);
        let mut z = 0.0;
        let mut c = C64::new(0.0, 0.0);
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | m];
                z += a0.norm_sqr() - a1.norm_sqr();
                c += a0.conj() * a1;
            }
        }
        [2.0 * c.re, 2.0 * c.im, z]
    }
}

fn norm_of(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner_raw(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Applies a single-qubit unitary and returns the new state.
pub fn apply_one_qubit(state: &StateVector, qubit: usize, gate: &Gate1) -> Result<StateVector> {
    state.check_qubit(qubit)?;
    let dev = gates::unitarity_deviation1(gate);
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary(dev));
    }
    let mut out = state.clone();
    out.apply_1q_in_place(qubit, gate);
    Ok(out)
}

/// Applies a two-qubit unitary on `(qubit_a, qubit_b)`; the gate's local
/// basis is `|q_a q_b⟩` with `qubit_a` the more significant bit.
pub fn apply_two_qubit(state: &StateVector, qubit_a: usize, qubit_b: usize, gate: &Gate2) -> Result<StateVector> {
    state.check_qubit(qubit_a)?;
    state.check_qubit(qubit_b)?;
    if qubit_a == qubit_b {
        return Err(Error::SameQubit(qubit_a));
    }
    let dev = gates::unitarity_deviation2(gate);
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary(dev));
    }
    let mut out = state.clone();
    out.apply_2q_in_place(qubit_a, qubit_b, gate);
    Ok(out)
}

/// `|⟨a|b⟩|²`, clamped to at most 1.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// `⟨P_qubit⟩` for a Pauli observable on one qubit.
pub fn pauli_expectation(state: &StateVector, qubit: usize, axis: PauliAxis) -> Result<f64> {
    state.check_qubit(qubit)?;
    let [x, y, z] = state.bloch_components(qubit);
    Ok(match axis {
        PauliAxis::X => x,
        PauliAxis::Y => y,
        PauliAxis::Z => z,
    })
}

/// All `3n` single-qubit Pauli expectations ordered `(X_0, Y_0, Z_0, X_1, …)`.
pub fn pauli_expectations(state: &StateVector) -> Vec<f64> {
    (0..state.n_qubits)
        .flat_map(|q| state.bloch_components(q))
        .collect()
}
