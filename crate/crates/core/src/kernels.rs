//! Gram matrices: fidelity and projected quantum kernels over embedded
//! states, RBF and linear kernels over classical vectors.
//!
//! Every [`GramMatrix`] is validated at construction (symmetry, unit diagonal
//! where applicable, PSD up to float noise); a matrix failing the checks is
//! an error, never silently repaired.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{self, reduced_density_1q, DensityMatrix, StateVector};

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const DIAGONAL_TOL: f64 = 1e-10;
/// Smallest eigenvalue tolerated before a matrix counts as non-PSD.
pub const PSD_TOL: f64 = 1e-8;
/// Pairs per PQK matrix on which the Frobenius and Pauli exponents are compared.
pub const PQK_SPOT_CHECKS: usize = 100;
const PQK_FORMULA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    Fidelity,
    Pqk,
    Rbf,
    Linear,
}

impl KernelKind {
    pub fn has_unit_diagonal(self) -> bool {
        !matches!(self, KernelKind::Linear)
    }

    fn code(self) -> u8 {
        match self {
            KernelKind::Fidelity => 0,
            KernelKind::Pqk => 1,
            KernelKind::Rbf => 2,
            KernelKind::Linear => 3,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => KernelKind::Fidelity,
            1 => KernelKind::Pqk,
            2 => KernelKind::Rbf,
            3 => KernelKind::Linear,
            other => return Err(Error::Format(format!("unknown kernel code {other}"))),
        })
    }
}

/// Symmetric PSD kernel matrix plus the kernel that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    kind: KernelKind,
    params: BTreeMap<String, f64>,
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn new(kind: KernelKind, params: BTreeMap<String, f64>, entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 {
            return Err(Error::Empty("gram matrix"));
        }
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gram matrix"));
        }
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                asym = asym.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        if kind.has_unit_diagonal() {
            let dev = (0..n).map(|i| (entries[(i, i)] - 1.0).abs()).fold(0.0, f64::max);
            if dev > DIAGONAL_TOL {
                return Err(Error::NotUnitDiagonal(dev));
            }
        }
        let min_eig = min_eigenvalue(&entries);
        if min_eig < -PSD_TOL {
            return Err(Error::NotPsd(min_eig));
        }
        Ok(Self { kind, params, entries })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.entries.row(i).iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }

    const MAGIC: &'static [u8; 4] = b"QGRM";
    const VERSION: u32 = 1;

    /// Binary cache layout (little endian): magic `QGRM`, `u32` version,
    /// `u8` kernel code, `u64` N, `u32` parameter count, then per parameter
    /// `u32` name length + UTF-8 name + `f64` value, then N² `f64` row-major.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&[self.kind.code()])?;
        w.write_all(&(self.size() as u64).to_le_bytes())?;
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for (name, value) in &self.params {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&value.to_le_bytes())?;
        }
        let n = self.size();
        for i in 0..n {
            for j in 0..n {
                w.write_all(&self.entries[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("not a gram matrix file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != Self::VERSION {
            return Err(Error::Format(format!("unsupported gram file version {version}")));
        }
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let kind = KernelKind::from_code(code[0])?;
        let n = read_u64(&mut r)? as usize;
        let n_params = read_u32(&mut r)?;
        let mut params = BTreeMap::new();
        for _ in 0..n_params {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?;
            params.insert(name, read_f64(&mut r)?);
        }
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            data.push(read_f64(&mut r)?);
        }
        Self::new(kind, params, DMatrix::from_row_slice(n, n, &data))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        crate::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Fills a symmetric matrix from `f(i, j)` for `i ≤ j`, rows in parallel.
/// The result does not depend on the thread schedule.
fn symmetric_from(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| f(i, j)).collect())
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            m[(i, i + off)] = v;
            m[(i + off, i)] = v;
        }
    }
    m
}

fn cross_from(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> DMatrix<f64> {
    let data: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .map(|i| (0..cols).map(|j| f(i, j)).collect())
        .collect();
    DMatrix::from_fn(rows, cols, |i, j| data[i][j])
}

fn check_states(states: &[StateVector]) -> Result<usize> {
    let first = states.first().ok_or(Error::Empty("state list"))?;
    let n = first.n_qubits();
    if let Some(bad) = states.iter().find(|s| s.n_qubits() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.n_qubits(),
        });
    }
    Ok(n)
}

fn check_vectors(features: &[Vec<f64>]) -> Result<usize> {
    let first = features.first().ok_or(Error::Empty("feature list"))?;
    let d = first.len();
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel features"));
    }
    Ok(d)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("kernel gamma must be positive, got {gamma}")));
    }
    Ok(())
}

fn overlap_sq(a: &StateVector, b: &StateVector) -> f64 {
    qcore::inner_raw(a.amplitudes(), b.amplitudes()).norm_sqr().min(1.0)
}

/// `K_ij = |⟨ψ_i|ψ_j⟩|²`.
pub fn fidelity_gram(states: &[StateVector]) -> Result<GramMatrix> {
    check_states(states)?;
    let m = symmetric_from(states.len(), |i, j| {
        if i == j {
            1.0
        } else {
            overlap_sq(&states[i], &states[j])
        }
    });
    GramMatrix::new(KernelKind::Fidelity, BTreeMap::new(), m)
}

/// Rectangular fidelity kernel between two state lists (e.g. test × train).
pub fn fidelity_cross(rows: &[StateVector], cols: &[StateVector]) -> Result<DMatrix<f64>> {
    let n = check_states(rows)?;
    if check_states(cols)? != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cols[0].n_qubits(),
        });
    }
    Ok(cross_from(rows.len(), cols.len(), |i, j| overlap_sq(&rows[i], &cols[j])))
}

/// `exp(−γ‖h_i − h_j‖²)`.
pub fn rbf_entry(h_i: &[f64], h_j: &[f64], gamma: f64) -> Result<f64> {
    if h_i.len() != h_j.len() {
        return Err(Error::DimensionMismatch {
            expected: h_i.len(),
            found: h_j.len(),
        });
    }
    check_gamma(gamma)?;
    Ok((-gamma * sq_dist(h_i, h_j)).exp())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rbf_gram(features: &[Vec<f64>], gamma: f64) -> Result<GramMatrix> {
    check_vectors(features)?;
    check_gamma(gamma)?;
    let m = symmetric_from(features.len(), |i, j| (-gamma * sq_dist(&features[i], &features[j])).exp());
    GramMatrix::new(KernelKind::Rbf, BTreeMap::from([("gamma".to_string(), gamma)]), m)
}

pub fn rbf_cross(rows: &[Vec<f64>], cols: &[Vec<f64>], gamma: f64) -> Result<DMatrix<f64>> {
    check_same_width(rows, cols)?;
    check_gamma(gamma)?;
    Ok(cross_from(rows.len(), cols.len(), |i, j| (-gamma * sq_dist(&rows[i], &cols[j])).exp()))
}

pub fn linear_gram(features: &[Vec<f64>]) -> Result<GramMatrix> {
    check_vectors(features)?;
    let m = symmetric_from(features.len(), |i, j| dot(&features[i], &features[j]));
    GramMatrix::new(KernelKind::Linear, BTreeMap::new(), m)
}

pub fn linear_cross(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    check_same_width(rows, cols)?;
    Ok(cross_from(rows.len(), cols.len(), |i, j| dot(&rows[i], &cols[j])))
}

fn check_same_width(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<()> {
    let d = check_vectors(rows)?;
    let d2 = check_vectors(cols)?;
    if d != d2 {
        return Err(Error::DimensionMismatch { expected: d, found: d2 });
    }
    Ok(())
}

/// How the scalar variance in `γ = 1 / (Var(v)·d)` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VarianceMode {
    /// Population variance of all expectation values pooled across samples,
    /// qubits and Pauli axes.
    #[default]
    Pooled,
    /// Mean of the per-observable population variances across samples.
    PerObservable,
}

/// Per-state vector `(⟨X_0⟩, ⟨Y_0⟩, ⟨Z_0⟩, ⟨X_1⟩, …)`.
pub fn pauli_features(states: &[StateVector]) -> Vec<Vec<f64>> {
    states.par_iter().map(qcore::pauli_expectations).collect()
}

/// Bandwidth `γ = 1 / (Var(v)·d)` for the projected kernel.
pub fn pqk_gamma(expectations: &[Vec<f64>], d: usize, mode: VarianceMode) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("input feature count d must be ≥ 1".into()));
    }
    if expectations.len() < 2 {
        return Err(Error::Empty("PQK gamma needs at least two samples"));
    }
    check_vectors(expectations)?;
    let var = match mode {
        VarianceMode::Pooled => population_variance(expectations.iter().flatten().copied()),
        VarianceMode::PerObservable => {
            let width = expectations[0].len();
            (0..width)
                .map(|c| population_variance(expectations.iter().map(|row| row[c])))
                .sum::<f64>()
                / width as f64
        }
    };
    if !(var > 1e-20) {
        return Err(Error::DegenerateData(
            "Pauli expectations have zero variance; PQK bandwidth undefined".into(),
        ));
    }
    Ok(1.0 / (var * d as f64))
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

/// `Σ_k ‖ρ_k(a) − ρ_k(b)‖_F²` through explicit reduced density matrices.
pub fn pqk_exponent_frobenius(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: a.n_qubits(),
            found: b.n_qubits(),
        });
    }
    let mut total = 0.0;
    for q in 0..a.n_qubits() {
        total += reduced_density_1q(a, q)?.frobenius_distance_sq(&reduced_density_1q(b, q)?)?;
    }
    Ok(total)
}

/// `½ Σ_k Σ_P (⟨P_k⟩_a − ⟨P_k⟩_b)²`, the same exponent through Pauli
/// expectations.
pub fn pqk_exponent_pauli(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: a.n_qubits(),
            found: b.n_qubits(),
        });
    }
    Ok(0.5 * sq_dist(&qcore::pauli_expectations(a), &qcore::pauli_expectations(b)))
}

fn reduced_all(states: &[StateVector]) -> Result<Vec<Vec<DensityMatrix>>> {
    states
        .par_iter()
        .map(|s| (0..s.n_qubits()).map(|q| reduced_density_1q(s, q)).collect())
        .collect()
}

fn rdm_exponent(a: &[DensityMatrix], b: &[DensityMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.frobenius_distance_sq(y).expect("same qubit count"))
        .sum()
}

fn spot_check(rows: &[StateVector], cols: &[StateVector], exponent: impl Fn(usize, usize) -> f64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(((rows.len() as u64) << 32) ^ cols.len() as u64);
    for _ in 0..PQK_SPOT_CHECKS.min(rows.len() * cols.len()) {
        let i = rng.random_range(0..rows.len());
        let j = rng.random_range(0..cols.len());
        let via_pauli = pqk_exponent_pauli(&rows[i], &cols[j])?;
        let gap = (exponent(i, j) - via_pauli).abs();
        if gap > PQK_FORMULA_TOL {
            return Err(Error::FormulaMismatch(gap));
        }
    }
    Ok(())
}

/// `k(x_i, x_j) = exp[−γ Σ_k ‖ρ_k(x_i) − ρ_k(x_j)‖_F²]` over one-qubit
/// reduced density matrices.
pub fn pqk_gram(states: &[StateVector], gamma: f64) -> Result<GramMatrix> {
    check_states(states)?;
    check_gamma(gamma)?;
    let rdms = reduced_all(states)?;
    let exponent = |i: usize, j: usize| rdm_exponent(&rdms[i], &rdms[j]);
    spot_check(states, states, exponent)?;
    let m = symmetric_from(states.len(), |i, j| (-gamma * exponent(i, j)).exp());
    GramMatrix::new(KernelKind::Pqk, BTreeMap::from([("gamma".to_string(), gamma)]), m)
}

pub fn pqk_cross(rows: &[StateVector], cols: &[StateVector], gamma: f64) -> Result<DMatrix<f64>> {
    let n = check_states(rows)?;
    if check_states(cols)? != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cols[0].n_qubits(),
        });
    }
    check_gamma(gamma)?;
    let (ra, rb) = (reduced_all(rows)?, reduced_all(cols)?);
    let exponent = |i: usize, j: usize| rdm_exponent(&ra[i], &rb[j]);
    spot_check(rows, cols, exponent)?;
    Ok(cross_from(rows.len(), cols.len(), |i, j| (-gamma * exponent(i, j)).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::tests::random_state;
    use crate::qcore::C64;

    #[test]
    fn fidelity_gram_examples() {
        let s = StateVector::zero(2).unwrap();
        let g = fidelity_gram(&[s.clone(), s.clone(), s]).unwrap();
        assert!(g.entries().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let g = fidelity_gram(&[StateVector::zero(1).unwrap(), StateVector::basis(1, 1).unwrap()]).unwrap();
        assert_eq!(g.get(0, 1), 0.0);
        assert_eq!(g.get(1, 0), 0.0);
    }

    #[test]
    fn fidelity_gram_matches_direct_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let states: Vec<_> = (0..3).map(|_| random_state(2, &mut rng)).collect();
        let g = fidelity_gram(&states).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let a = states[i].amplitudes();
                let b = states[j].amplitudes();
                let mut ip = C64::new(0.0, 0.0);
                for k in 0..4 {
                    ip += a[k].conj() * b[k];
                }
                assert!((g.get(i, j) - ip.norm_sqr()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fidelity_gram_errors() {
        assert!(matches!(fidelity_gram(&[]), Err(Error::Empty(_))));
        let mixed = [StateVector::zero(1).unwrap(), StateVector::zero(2).unwrap()];
        assert!(matches!(fidelity_gram(&mixed), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rbf_entry_examples() {
        let h = [0.3, -1.2, 4.0];
        assert_eq!(rbf_entry(&h, &h, 1.0).unwrap(), 1.0);
        assert!((rbf_entry(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap() - 0.36787944117144233).abs() < 1e-15);
        assert!((rbf_entry(&[0.0, 0.0], &[1.0, 1.0], 0.5).unwrap() - 0.36787944117144233).abs() < 1e-15);
        assert!(matches!(rbf_entry(&[0.0], &[0.0, 1.0], 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(rbf_entry(&[0.0], &[1.0], 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(rbf_entry(&[0.0], &[1.0], -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn linear_gram_examples() {
        let g = linear_gram(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(0, 1), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let g = linear_gram(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut naive = 0.0;
                for k in 0..3 {
                    naive += x[i][k] * x[j][k];
                }
                assert!((g.get(i, j) - naive).abs() < 1e-15);
            }
        }
        assert!(matches!(linear_gram(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn pqk_gamma_examples() {
        // pooled values {−1, +1}: population variance 1
        let v = vec![vec![1.0, -1.0, 1.0], vec![-1.0, 1.0, -1.0]];
        assert!((pqk_gamma(&v, 39, VarianceMode::Pooled).unwrap() - 1.0 / 39.0).abs() < 1e-15);
        // pooled variance 0.5: values ±sqrt(0.5)
        let a = 0.5f64.sqrt();
        let v = vec![vec![a, -a, a], vec![-a, a, -a]];
        assert!((pqk_gamma(&v, 4, VarianceMode::Pooled).unwrap() - 0.5).abs() < 1e-12);
        let same = vec![vec![0.2; 6]; 4];
        assert!(matches!(pqk_gamma(&same, 4, VarianceMode::Pooled), Err(Error::DegenerateData(_))));
        assert!(matches!(pqk_gamma(&v[..1], 4, VarianceMode::Pooled), Err(Error::Empty(_))));
        assert!(matches!(pqk_gamma(&v, 0, VarianceMode::Pooled), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn pqk_gamma_modes_differ_when_observables_are_offset() {
        // each observable constant across samples but different between observables:
        // pooled variance is positive, per-observable variance is zero
        let v = vec![vec![1.0, 0.0, -1.0]; 3];
        assert!(pqk_gamma(&v, 3, VarianceMode::Pooled).is_ok());
        assert!(pqk_gamma(&v, 3, VarianceMode::PerObservable).is_err());
    }

    #[test]
    fn pqk_examples() {
        let s = StateVector::zero(2).unwrap();
        let g = pqk_gram(&[s.clone(), s], 1.0).unwrap();
        assert!((g.get(0, 1) - 1.0).abs() < 1e-15);
        let g = pqk_gram(&[StateVector::zero(1).unwrap(), StateVector::basis(1, 1).unwrap()], 1.0).unwrap();
        assert!((g.get(0, 1) - (-2.0f64).exp()).abs() < 1e-15);
        assert!(matches!(pqk_gram(&[], 1.0), Err(Error::Empty(_))));
    }

    #[test]
    fn pqk_exponent_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for n in [2, 4] {
            for _ in 0..50 {
                let a = random_state(n, &mut rng);
                let b = random_state(n, &mut rng);
                let f = pqk_exponent_frobenius(&a, &b).unwrap();
                let p = pqk_exponent_pauli(&a, &b).unwrap();
                assert!((f - p).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gram_validation_rejects_bad_matrices() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            GramMatrix::new(KernelKind::Rbf, BTreeMap::new(), asym),
            Err(Error::NotSymmetric(_))
        ));
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.9]);
        assert!(matches!(
            GramMatrix::new(KernelKind::Fidelity, BTreeMap::new(), diag.clone()),
            Err(Error::NotUnitDiagonal(_))
        ));
        assert!(GramMatrix::new(KernelKind::Linear, BTreeMap::new(), diag).is_ok());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GramMatrix::new(KernelKind::Rbf, BTreeMap::new(), indefinite),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn parallel_gram_equals_sequential_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let states: Vec<_> = (0..30).map(|_| random_state(3, &mut rng)).collect();
        let g = pqk_gram(&states, 0.7).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let e = pqk_exponent_frobenius(&states[i], &states[j]).unwrap();
                let expect = if i == j { 1.0 } else { (-0.7 * e).exp() };
                assert_eq!(g.get(i, j).to_bits(), (-0.7 * rdm_exponent(
                    &reduced_all(&states[i..=i]).unwrap()[0],
                    &reduced_all(&states[j..=j]).unwrap()[0],
                )).exp().to_bits());
                assert!((g.get(i, j) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let x: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let g = rbf_gram(&x, 0.3).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"QGRM");
        let back = GramMatrix::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        buf[0] = b'X';
        assert!(matches!(GramMatrix::read_from(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn cross_kernels_match_square_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let states: Vec<_> = (0..6).map(|_| random_state(2, &mut rng)).collect();
        let sq = pqk_gram(&states, 0.4).unwrap();
        let cross = pqk_cross(&states[..2], &states, 0.4).unwrap();
        for i in 0..2 {
            for j in 0..6 {
                if i != j {
                    assert!((sq.get(i, j) - cross[(i, j)]).abs() < 1e-15);
                }
            }
        }
        let f = fidelity_gram(&states).unwrap();
        let fc = fidelity_cross(&states[..2], &states).unwrap();
        assert!((f.get(1, 4) - fc[(1, 4)]).abs() < 1e-15);
    }
}
