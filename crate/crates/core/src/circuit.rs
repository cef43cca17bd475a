//! Parameterized gate sequences with adjoint-mode gradients.
//!
//! Every parameterized gate has the form `exp(-i·s·θ_k·G)` with `G` a Pauli
//! (or a controlled Pauli), so `∂U/∂θ_k = -i·s·G·U` and gradients of overlaps
//! and expectation values come out of one backward sweep over the gate list.
//! A parameter index may be shared by any number of gates.

use crate::error::{Error, Result};
use crate::qcore::gates::{self, Gate1};
use crate::qcore::{inner_raw, PauliAxis, StateVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Fixed { qubit: usize, gate: Gate1 },
    Cnot { control: usize, target: usize },
    /// `exp(-i·scale·θ[param]·P_qubit)`
    Rot { qubit: usize, axis: PauliAxis, param: usize, scale: f64 },
    /// `exp(-i·scale·θ[param]·P_a P_b)`
    RotPair { a: usize, b: usize, axis: PauliAxis, param: usize, scale: f64 },
    /// `exp(-i·scale·θ[param]·P_target)` on the `control = 1` subspace.
    CRot { control: usize, target: usize, axis: PauliAxis, param: usize, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_params: usize,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            n_params: 0,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// One past the largest parameter index referenced.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    fn note_param(&mut self, param: usize) {
        self.n_params = self.n_params.max(param + 1);
    }

    pub fn fixed(&mut self, qubit: usize, gate: Gate1) -> &mut Self {
        self.ops.push(Op::Fixed { qubit, gate });
        self
    }

    pub fn h(&mut self, qubit: usize) -> &mut Self {
        self.fixed(qubit, gates::hadamard())
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> &mut Self {
        self.ops.push(Op::Cnot { control, target });
        self
    }

    pub fn rot(&mut self, qubit: usize, axis: PauliAxis, param: usize, scale: f64) -> &mut Self {
        self.note_param(param);
        self.ops.push(Op::Rot { qubit, axis, param, scale });
        self
    }

    pub fn rot_pair(&mut self, a: usize, b: usize, axis: PauliAxis, param: usize, scale: f64) -> &mut Self {
        self.note_param(param);
        self.ops.push(Op::RotPair { a, b, axis, param, scale });
        self
    }

    pub fn crot(&mut self, control: usize, target: usize, axis: PauliAxis, param: usize, scale: f64) -> &mut Self {
        self.note_param(param);
        self.ops.push(Op::CRot {
            control,
            target,
            axis,
            param,
            scale,
        });
        self
    }

    fn validate(&self, state: &StateVector, params: &[f64]) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: state.n_qubits(),
            });
        }
        if params.len() < self.n_params {
            return Err(Error::DimensionMismatch {
                expected: self.n_params,
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("circuit parameters"));
        }
        for op in &self.ops {
            let qubits: &[usize] = match op {
                Op::Fixed { qubit, .. } | Op::Rot { qubit, .. } => std::slice::from_ref(qubit),
                Op::Cnot { control, target } | Op::CRot { control, target, .. } => &[*control, *target],
                Op::RotPair { a, b, .. } => &[*a, *b],
            };
            for &q in qubits {
                state.check_qubit(q)?;
            }
            if qubits.len() == 2 && qubits[0] == qubits[1] {
                return Err(Error::SameQubit(qubits[0]));
            }
        }
        Ok(())
    }

    /// Runs the circuit on `|0⟩^⊗n`.
    pub fn run(&self, params: &[f64]) -> Result<StateVector> {
        self.run_on(&StateVector::zero(self.n_qubits)?, params)
    }

    pub fn run_on(&self, input: &StateVector, params: &[f64]) -> Result<StateVector> {
        self.validate(input, params)?;
        let mut s = input.clone();
        for op in &self.ops {
            apply_op(&mut s, op, params, false);
        }
        Ok(s)
    }

    /// Returns `(|ψ⟩, ⟨target|ψ⟩, ∂⟨target|ψ⟩/∂θ)` where `|ψ⟩` is the circuit
    /// applied to `|0⟩^⊗n`.
    pub fn overlap_gradient(&self, params: &[f64], target: &StateVector) -> Result<(StateVector, C64, Vec<C64>)> {
        let psi = self.run(params)?;
        let overlap = target.inner(&psi)?;
        let mut grads = vec![C64::new(0.0, 0.0); self.n_params];
        let mut phi = psi.clone();
        let mut lambda = target.clone();
        self.backward_sweep(&mut phi, &mut lambda, params, |param, value| grads[param] += value);
        Ok((psi, overlap, grads))
    }

    /// Returns `(⟨P_qubit⟩, ∂⟨P_qubit⟩/∂θ)` for the circuit applied to `input`.
    pub fn expectation_gradient(
        &self,
        input: &StateVector,
        params: &[f64],
        qubit: usize,
        axis: PauliAxis,
    ) -> Result<(f64, Vec<f64>)> {
        input.check_qubit(qubit)?;
        let psi = self.run_on(input, params)?;
        let mut lambda = psi.clone();
        lambda.apply_1q_in_place(qubit, &gates::pauli(axis));
        let value = inner_raw(psi.amplitudes(), lambda.amplitudes()).re;
        let mut grads = vec![0.0; self.n_params];
        let mut phi = psi;
        self.backward_sweep(&mut phi, &mut lambda, params, |param, v| grads[param] += 2.0 * v.re);
        Ok((value, grads))
    }

    /// Walks the gate list backwards. At parameterized gate `k` it reports
    /// `⟨λ_k| -i·s·G_k |φ_k⟩`, then undoes gate `k` on both vectors.
    fn backward_sweep(
        &self,
        phi: &mut StateVector,
        lambda: &mut StateVector,
        params: &[f64],
        mut sink: impl FnMut(usize, C64),
    ) {
        let minus_i = C64::new(0.0, -1.0);
        let mut scratch = phi.clone();
        for op in self.ops.iter().rev() {
            if let Some((param, scale)) = param_of(op) {
                scratch.amps_mut().copy_from_slice(phi.amplitudes());
                apply_generator(&mut scratch, op);
                let v = inner_raw(lambda.amplitudes(), scratch.amplitudes()) * minus_i * scale;
                sink(param, v);
            }
            apply_op(phi, op, params, true);
            apply_op(lambda, op, params, true);
        }
    }
}

fn param_of(op: &Op) -> Option<(usize, f64)> {
    match *op {
        Op::Rot { param, scale, .. } | Op::RotPair { param, scale, .. } | Op::CRot { param, scale, .. } => {
            Some((param, scale))
        }
        _ => None,
    }
}

fn apply_op(s: &mut StateVector, op: &Op, params: &[f64], inverse: bool) {
    let sign = if inverse { -1.0 } else { 1.0 };
    match op {
        Op::Fixed { qubit, gate } => {
            if inverse {
                s.apply_1q_in_place(*qubit, &gates::dagger1(gate));
            } else {
                s.apply_1q_in_place(*qubit, gate);
            }
        }
        Op::Cnot { control, target } => s.apply_cnot_in_place(*control, *target),
        Op::Rot { qubit, axis, param, scale } => {
            s.apply_1q_in_place(*qubit, &gates::pauli_exp(*axis, sign * scale * params[*param]));
        }
        Op::RotPair { a, b, axis, param, scale } => {
            s.apply_2q_in_place(*a, *b, &gates::pauli_pair_exp(*axis, sign * scale * params[*param]));
        }
        Op::CRot {
            control,
            target,
            axis,
            param,
            scale,
        } => {
            let g = gates::pauli_exp(*axis, sign * scale * params[*param]);
            s.apply_controlled_1q_in_place(*control, *target, &g);
        }
    }
}

fn apply_generator(s: &mut StateVector, op: &Op) {
    match op {
        Op::Rot { qubit, axis, .. } => s.apply_1q_in_place(*qubit, &gates::pauli(*axis)),
        Op::RotPair { a, b, axis, .. } => {
            let p = gates::pauli(*axis);
            s.apply_1q_in_place(*a, &p);
            s.apply_1q_in_place(*b, &p);
        }
        Op::CRot {
            control, target, axis, ..
        } => {
            s.project_one_in_place(*control);
            s.apply_1q_in_place(*target, &gates::pauli(*axis));
        }
        Op::Fixed { .. } | Op::Cnot { .. } => unreachable!("fixed gates have no generator"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_circuit(n: usize, n_params: usize, rng: &mut ChaCha8Rng) -> Circuit {
        let mut c = Circuit::new(n);
        for q in 0..n {
            c.h(q);
        }
        for k in 0..40 {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            let axis = PauliAxis::ALL[rng.random_range(0..3)];
            let p = k % n_params;
            let scale = rng.random_range(-1.5..1.5);
            match k % 5 {
                0 => c.rot(a, axis, p, scale),
                1 => c.rot_pair(a, b, axis, p, scale),
                2 => c.crot(a, b, axis, p, scale),
                3 => c.cnot(a, b),
                _ => c.fixed(a, gates::phase_s()),
            };
        }
        c
    }

    #[test]
    fn overlap_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let c = random_circuit(3, 6, &mut rng);
            let params: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let target = c.run(&(0..6).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()).unwrap();
            let (_, ov, grads) = c.overlap_gradient(&params, &target).unwrap();
            assert!((ov - target.inner(&c.run(&params).unwrap()).unwrap()).norm() < 1e-14);
            let eps = 1e-6;
            for k in 0..c.n_params() {
                let mut p = params.clone();
                p[k] += eps;
                let up = target.inner(&c.run(&p).unwrap()).unwrap();
                p[k] -= 2.0 * eps;
                let down = target.inner(&c.run(&p).unwrap()).unwrap();
                let fd = (up - down) / (2.0 * eps);
                assert!((fd - grads[k]).norm() < 1e-7, "param {k}: {fd} vs {}", grads[k]);
            }
        }
    }

    #[test]
    fn expectation_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let c = random_circuit(4, 5, &mut rng);
            let input = crate::qcore::tests::random_state(4, &mut rng);
            let params: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let axis = PauliAxis::ALL[rng.random_range(0..3)];
            let (value, grads) = c.expectation_gradient(&input, &params, 1, axis).unwrap();
            let eval = |p: &[f64]| crate::qcore::pauli_expectation(&c.run_on(&input, p).unwrap(), 1, axis).unwrap();
            assert!((value - eval(&params)).abs() < 1e-13);
            let eps = 1e-6;
            for k in 0..c.n_params() {
                let mut p = params.clone();
                p[k] += eps;
                let up = eval(&p);
                p[k] -= 2.0 * eps;
                let fd = (up - eval(&p)) / (2.0 * eps);
                assert!((fd - grads[k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn validation_errors() {
        let mut c = Circuit::new(2);
        c.rot(0, PauliAxis::Z, 1, 1.0);
        assert!(matches!(c.run(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(c.run(&[0.0, f64::NAN]), Err(Error::NonFinite(_))));
        let mut bad = Circuit::new(2);
        bad.cnot(0, 2);
        assert!(matches!(bad.run(&[]), Err(Error::QubitOutOfRange { .. })));
        let mut same = Circuit::new(2);
        same.cnot(1, 1);
        assert!(matches!(same.run(&[]), Err(Error::SameQubit(1))));
    }
}
