//! ZZ and XYZ embedding circuits.
//!
//! ZZ: each of the `l` layers applies `H^⊗n` and then
//! `exp(i Σ_k φ_k Z_k + i Σ_k φ_{k,k+1} Z_k Z_{k+1})` with
//! `φ_k = z_k` and `φ_{k,k+1} = (π − z_k)(π − z_{k+1}) / 2`.
//!
//! XYZ: each layer applies the X-type exponential, then the Y-type, then the
//! Z-type, where the P-type factor is
//! `exp(i Σ_k z_k P_k + i Σ_k z_{n+k} P_k P_{k+1})`. The input is `2n`
//! angles; `z_{2n-1}` would couple qubit `n-1` to a non-existent neighbour on
//! the linear chain and is ignored.
//!
//! Phase convention: `exp(iφZ) = diag(e^{iφ}, e^{-iφ})`, i.e. every term is
//! realised as `exp(-i·(−φ)·P)`. Terms inside one exponential commute, so each
//! factor is a product of one- and two-qubit rotations in index order.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::qcore::{PauliAxis, StateVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapKind {
    #[serde(rename = "zz")]
    Zz,
    #[serde(rename = "xyz")]
    Xyz,
}

impl MapKind {
    pub fn default_layers(self) -> usize {
        match self {
            MapKind::Zz => 3,
            MapKind::Xyz => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Entanglement {
    #[default]
    #[serde(rename = "linear")]
    Linear,
}

impl Entanglement {
    /// Coupled qubit pairs for an `n`-qubit register.
    pub fn pairs(self, n_qubits: usize) -> Vec<(usize, usize)> {
        match self {
            Entanglement::Linear => (0..n_qubits.saturating_sub(1)).map(|k| (k, k + 1)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub kind: MapKind,
    pub n_qubits: usize,
    pub layers: usize,
    #[serde(default)]
    pub entanglement: Entanglement,
}

impl FeatureMapSpec {
    pub fn new(kind: MapKind, n_qubits: usize) -> Self {
        Self {
            kind,
            n_qubits,
            layers: kind.default_layers(),
            entanglement: Entanglement::Linear,
        }
    }

    pub fn zz(n_qubits: usize) -> Self {
        Self::new(MapKind::Zz, n_qubits)
    }

    pub fn xyz(n_qubits: usize) -> Self {
        Self::new(MapKind::Xyz, n_qubits)
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }

    /// Length of the classical vector the map consumes.
    pub fn input_dim(&self) -> usize {
        match self.kind {
            MapKind::Zz => self.n_qubits,
            MapKind::Xyz => 2 * self.n_qubits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::qcore::MAX_QUBITS {
            return Err(Error::UnsupportedQubitCount(self.n_qubits));
        }
        if self.layers == 0 {
            return Err(Error::InvalidParameter("feature map needs at least one layer".into()));
        }
        Ok(())
    }
}

/// Single-qubit angles `φ_k` and linear-pair angles `φ_{k,k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleVector {
    pub singles: Vec<f64>,
    pub pairs: Vec<f64>,
}

impl AngleVector {
    fn flat(&self) -> Vec<f64> {
        self.singles.iter().chain(&self.pairs).copied().collect()
    }
}

/// `φ_k = z_k`, `φ_{k,k+1} = (π − z_k)(π − z_{k+1}) / 2`.
pub fn zz_angles(z: &[f64]) -> AngleVector {
    let pairs = z.windows(2).map(|w| (PI - w[0]) * (PI - w[1]) / 2.0).collect();
    AngleVector {
        singles: z.to_vec(),
        pairs,
    }
}

/// Expands `n` features into the `2n` XYZ inputs with the same angle
/// functions the ZZ map uses: `z_k` for singles, `(π − z_k)(π − z_{k+1})/2`
/// for the couplings (the last slot is unused and set to 0).
pub fn xyz_inputs_from_features(x: &[f64]) -> Vec<f64> {
    let a = zz_angles(x);
    let mut out = a.singles;
    out.extend(a.pairs);
    out.push(0.0);
    out
}

/// A feature map with its circuit built once.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    spec: FeatureMapSpec,
    circuit: Circuit,
}

impl FeatureMap {
    pub fn new(spec: FeatureMapSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_qubits;
        let pairs = spec.entanglement.pairs(n);
        let mut c = Circuit::new(n);
        for _ in 0..spec.layers {
            match spec.kind {
                MapKind::Zz => {
                    for q in 0..n {
                        c.h(q);
                    }
                    for q in 0..n {
                        c.rot(q, PauliAxis::Z, q, -1.0);
                    }
                    for (k, &(a, b)) in pairs.iter().enumerate() {
                        c.rot_pair(a, b, PauliAxis::Z, n + k, -1.0);
                    }
                }
                MapKind::Xyz => {
                    for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
                        for q in 0..n {
                            c.rot(q, axis, q, -1.0);
                        }
                        for (k, &(a, b)) in pairs.iter().enumerate() {
                            c.rot_pair(a, b, axis, n + k, -1.0);
                        }
                    }
                }
            }
        }
        Ok(Self { spec, circuit: c })
    }

    pub fn spec(&self) -> &FeatureMapSpec {
        &self.spec
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim(),
                found: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map input"));
        }
        Ok(())
    }

    /// Circuit parameters for input `z`.
    fn params(&self, z: &[f64]) -> Vec<f64> {
        match self.spec.kind {
            MapKind::Zz => zz_angles(z).flat(),
            MapKind::Xyz => z.to_vec(),
        }
    }

    /// Pulls a gradient over circuit parameters back to the input `z`.
    fn pull_back(&self, z: &[f64], dparams: &[C64]) -> Vec<C64> {
        match self.spec.kind {
            MapKind::Xyz => {
                let mut dz = vec![C64::new(0.0, 0.0); z.len()];
                dz[..dparams.len()].copy_from_slice(dparams);
                dz
            }
            MapKind::Zz => {
                let n = z.len();
                let mut dz = dparams[..n].to_vec();
                for k in 0..n.saturating_sub(1) {
                    let g = dparams[n + k];
                    dz[k] += g * (-(PI - z[k + 1]) / 2.0);
                    dz[k + 1] += g * (-(PI - z[k]) / 2.0);
                }
                dz
            }
        }
    }

    pub fn embed(&self, z: &[f64]) -> Result<StateVector> {
        self.check_input(z)?;
        self.circuit.run(&self.params(z))
    }

    /// Returns `(|ψ(z)⟩, ⟨target|ψ(z)⟩, ∂⟨target|ψ(z)⟩/∂z)`.
    pub fn overlap_gradient(&self, z: &[f64], target: &StateVector) -> Result<(StateVector, C64, Vec<C64>)> {
        self.check_input(z)?;
        let (psi, ov, dparams) = self.circuit.overlap_gradient(&self.params(z), target)?;
        Ok((psi, ov, self.pull_back(z, &dparams)))
    }

    /// Central-difference variant of [`Self::overlap_gradient`].
    pub fn overlap_gradient_fd(
        &self,
        z: &[f64],
        target: &StateVector,
        eps: f64,
    ) -> Result<(StateVector, C64, Vec<C64>)> {
        let psi = self.embed(z)?;
        let ov = target.inner(&psi)?;
        let mut shifted = z.to_vec();
        let mut grads = Vec::with_capacity(z.len());
        for k in 0..z.len() {
            shifted[k] = z[k] + eps;
            let up = target.inner(&self.embed(&shifted)?)?;
            shifted[k] = z[k] - eps;
            let down = target.inner(&self.embed(&shifted)?)?;
            shifted[k] = z[k];
            grads.push((up - down) / (2.0 * eps));
        }
        Ok((psi, ov, grads))
    }
}

fn require_kind(spec: &FeatureMapSpec, kind: MapKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidParameter(format!(
            "expected a {kind:?} feature map, got {:?}",
            spec.kind
        )));
    }
    Ok(())
}

/// `V_ZZ(φ(z))|0⟩^⊗n`.
pub fn embed_zz(z: &[f64], spec: &FeatureMapSpec) -> Result<StateVector> {
    require_kind(spec, MapKind::Zz)?;
    FeatureMap::new(*spec)?.embed(z)
}

/// `V_XYZ(z)|0⟩^⊗n` for a `2n`-long input.
pub fn embed_xyz(z: &[f64], spec: &FeatureMapSpec) -> Result<StateVector> {
    require_kind(spec, MapKind::Xyz)?;
    FeatureMap::new(*spec)?.embed(z)
}
