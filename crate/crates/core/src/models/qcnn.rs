//! Eight-qubit QCNN built from 15-angle two-qubit blocks and controlled
//! rotation pooling.
//!
//! Each stage runs a convolution over adjacent active qubits (even pairs,
//! then odd pairs, one shared block per sublayer) and pools pair `k` by a
//! CRz then CRx from the discarded qubit `active[2k+1]` onto the survivor
//! `active[2k]`. Active qubits go 8 → 4 → 2 → 1 and qubit 0 is read out as
//! `p = (1 − ⟨Z⟩)/2`.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::qcore::gates::{self, Gate2};
use crate::qcore::{pauli_expectation, PauliAxis, StateVector};
use crate::training::{optimize, sample_batches, LossHistory, TrainConfig};

pub const QCNN_QUBITS: usize = 8;
pub const BLOCK_PARAMS: usize = 15;
const PROB_FLOOR: f64 = 1e-12;

/// `U3(t1, t2, t3) = Rz(t2)·Rx(−π/2)·Rz(t1)·Rx(π/2)·Rz(t3)`, pushed in
/// application order (rightmost first). `base` indexes `t1`.
fn push_u3(c: &mut Circuit, qubit: usize, base: usize) {
    c.rot(qubit, PauliAxis::Z, base + 2, 0.5);
    c.fixed(qubit, gates::rx(FRAC_PI_2));
    c.rot(qubit, PauliAxis::Z, base, 0.5);
    c.fixed(qubit, gates::rx(-FRAC_PI_2));
    c.rot(qubit, PauliAxis::Z, base + 1, 0.5);
}

/// Appends one two-qubit block reading angles `base..base + 15`:
/// U3⊗U3, CNOT(a→b), Ry on a, Rz on b, CNOT(b→a), Ry on a, CNOT(a→b), U3⊗U3.
pub fn push_su4(c: &mut Circuit, a: usize, b: usize, base: usize) {
    push_u3(c, a, base);
    push_u3(c, b, base + 3);
    c.cnot(a, b);
    c.rot(a, PauliAxis::Y, base + 6, 0.5);
    c.rot(b, PauliAxis::Z, base + 7, 0.5);
    c.cnot(b, a);
    c.rot(a, PauliAxis::Y, base + 8, 0.5);
    c.cnot(a, b);
    push_u3(c, a, base + 9);
    push_u3(c, b, base + 12);
}

/// The 4×4 matrix of one block, in the `|q_a q_b⟩` basis.
pub fn su4_unitary(angles: &[f64]) -> Result<Gate2> {
    if angles.len() != BLOCK_PARAMS {
        return Err(Error::DimensionMismatch {
            expected: BLOCK_PARAMS,
            found: angles.len(),
        });
    }
    if angles.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("block angles"));
    }
    let mut c = Circuit::new(2);
    push_su4(&mut c, 0, 1, 0);
    let mut u = [[crate::qcore::C64::new(0.0, 0.0); 4]; 4];
    for col in 0..4 {
        let out = c.run_on(&StateVector::basis(2, col)?, angles)?;
        for (row, amp) in out.amplitudes().iter().enumerate() {
            u[row][col] = *amp;
        }
    }
    Ok(u)
}

/// Trainable QCNN: the circuit plus its flat angle vector.
#[derive(Debug, Clone)]
pub struct Qcnn {
    circuit: Circuit,
    params: Vec<f64>,
    readout: usize,
    final_block_base: usize,
}

impl Qcnn {
    /// Architecture with all angles zero.
    pub fn zeros() -> Self {
        let mut c = Circuit::new(QCNN_QUBITS);
        let mut active: Vec<usize> = (0..QCNN_QUBITS).collect();
        let mut next = 0;
        let mut final_block_base = 0;
        while active.len() > 1 {
            let even: Vec<(usize, usize)> = (0..active.len() / 2).map(|k| (active[2 * k], active[2 * k + 1])).collect();
            let odd: Vec<(usize, usize)> = (0..(active.len() - 1) / 2)
                .map(|k| (active[2 * k + 1], active[2 * k + 2]))
                .collect();
            for sublayer in [even, odd] {
                if sublayer.is_empty() {
                    continue;
                }
                final_block_base = next;
                for (a, b) in sublayer {
                    push_su4(&mut c, a, b, next);
                }
                next += BLOCK_PARAMS;
            }
            for k in 0..active.len() / 2 {
                let (keep, drop) = (active[2 * k], active[2 * k + 1]);
                c.crot(drop, keep, PauliAxis::Z, next, 0.5);
                c.crot(drop, keep, PauliAxis::X, next + 1, 0.5);
                next += 2;
            }
            active = active.iter().step_by(2).copied().collect();
        }
        Self {
            params: vec![0.0; c.n_params()],
            circuit: c,
            readout: active[0],
            final_block_base,
        }
    }

    /// Angles drawn uniformly from `[−π, π)`.
    pub fn random(seed: u64) -> Self {
        let mut q = Self::zeros();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in q.params.iter_mut() {
            *p = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        }
        q
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                found: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn readout(&self) -> usize {
        self.readout
    }

    /// Index of the first angle of the last convolution block.
    pub fn final_block_base(&self) -> usize {
        self.final_block_base
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != QCNN_QUBITS {
            return Err(Error::UnsupportedQubitCount(state.n_qubits()));
        }
        Ok(())
    }

    /// Probability of reading `|1⟩` on the readout qubit.
    pub fn forward(&self, state: &StateVector) -> Result<f64> {
        self.check_state(state)?;
        let out = self.circuit.run_on(state, &self.params)?;
        let p = (1.0 - pauli_expectation(&out, self.readout, PauliAxis::Z)?) / 2.0;
        debug_assert!((-1e-12..=1.0 + 1e-12).contains(&p), "probability {p} out of range");
        Ok(p.clamp(0.0, 1.0))
    }

    /// `(p, ∂p/∂θ)`.
    pub fn forward_gradient(&self, state: &StateVector) -> Result<(f64, Vec<f64>)> {
        self.check_state(state)?;
        let (z, dz) = self
            .circuit
            .expectation_gradient(state, &self.params, self.readout, PauliAxis::Z)?;
        Ok(((1.0 - z) / 2.0, dz.into_iter().map(|g| -0.5 * g).collect()))
    }

    fn with_params(&self, params: &[f64]) -> Self {
        let mut q = self.clone();
        q.params.copy_from_slice(params);
        q
    }

    /// Class `+1` predicted when `p ≥ ½`.
    pub fn predict(&self, states: &[StateVector]) -> Result<Vec<i8>> {
        states
            .par_iter()
            .map(|s| self.forward(s).map(|p| if p >= 0.5 { 1 } else { -1 }))
            .collect()
    }
}

fn bce(p: f64, label: i8) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

fn dbce_dp(p: f64, label: i8) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    if label == 1 {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

fn check_labeled(states: &[StateVector], labels: &[i8], idx: &[usize]) -> Result<()> {
    if states.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            found: labels.len(),
        });
    }
    if idx.is_empty() {
        return Err(Error::Empty("QCNN batch"));
    }
    Ok(())
}

/// Mean binary cross-entropy of `p` against labels (`+1` ↔ readout `|1⟩`).
pub fn qcnn_loss(model: &Qcnn, states: &[StateVector], labels: &[i8], idx: &[usize]) -> Result<f64> {
    check_labeled(states, labels, idx)?;
    let losses = idx
        .par_iter()
        .map(|&i| model.forward(&states[i]).map(|p| bce(p, labels[i])))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / idx.len() as f64)
}

pub fn qcnn_loss_gradient(model: &Qcnn, states: &[StateVector], labels: &[i8], idx: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_labeled(states, labels, idx)?;
    let parts = idx
        .par_iter()
        .map(|&i| model.forward_gradient(&states[i]).map(|(p, dp)| (p, dp, labels[i])))
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / idx.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.n_params()];
    for (p, dp, label) in parts {
        loss += bce(p, label);
        let up = dbce_dp(p, label) * scale;
        for (g, d) in grad.iter_mut().zip(dp) {
            *g += up * d;
        }
    }
    Ok((loss * scale, grad))
}

#[derive(Debug, Clone)]
pub struct QcnnFit {
    pub model: Qcnn,
    pub history: LossHistory,
    pub best_epoch: usize,
}

/// Minimizes BCE on fixed embedded states; returns the best-validation model.
pub fn qcnn_train(
    init: &Qcnn,
    train: (&[StateVector], &[i8]),
    val: (&[StateVector], &[i8]),
    cfg: &TrainConfig,
) -> Result<QcnnFit> {
    let val_idx: Vec<usize> = (0..val.0.len()).collect();
    check_labeled(train.0, train.1, &(0..train.0.len()).collect::<Vec<_>>())?;
    check_labeled(val.0, val.1, &val_idx)?;
    let fitted = optimize(
        init.params().to_vec(),
        cfg,
        |rng| Ok(sample_batches(train.0.len(), cfg.batch_samples, cfg.steps_per_epoch, rng)),
        |p, batch: &Vec<usize>| qcnn_loss_gradient(&init.with_params(p), train.0, train.1, batch),
        |p| qcnn_loss(&init.with_params(p), val.0, val.1, &val_idx),
    )?;
    Ok(QcnnFit {
        model: init.with_params(&fitted.params),
        history: fitted.history,
        best_epoch: fitted.best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::tests::random_state;
    use crate::qcore::C64;
    use crate::qcore::{apply_two_qubit, gates::unitarity_deviation2};

    #[test]
    fn parameter_count() {
        // 2·15 + 4·2, 2·15 + 2·2, 15 + 2
        assert_eq!(Qcnn::zeros().n_params(), 89);
        assert_eq!(Qcnn::zeros().readout(), 0);
    }

    #[test]
    fn blocks_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let angles: Vec<f64> = (0..15).map(|_| rng.random_range(-4.0..4.0)).collect();
            assert!(unitarity_deviation2(&su4_unitary(&angles).unwrap()) < 1e-10);
        }
        assert!(matches!(su4_unitary(&[0.0; 14]), Err(Error::DimensionMismatch { .. })));
        let mut bad = [0.0; 15];
        bad[3] = f64::INFINITY;
        assert!(matches!(su4_unitary(&bad), Err(Error::NonFinite(_))));
    }

    #[test]
    fn zero_angle_block_is_the_cnot_skeleton() {
        // With all angles zero each U3 is Rx(−π/2)Rx(π/2) = I, so the block is
        // CNOT(a→b)·CNOT(b→a)·CNOT(a→b), i.e. SWAP.
        let u = su4_unitary(&[0.0; 15]).unwrap();
        let cnot_ab = gates::cnot();
        let mut cnot_ba = [[C64::new(0.0, 0.0); 4]; 4];
        for (row, col) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
            cnot_ba[row][col] = C64::new(1.0, 0.0);
        }
        let want = gates::matmul2(&cnot_ab, &gates::matmul2(&cnot_ba, &cnot_ab));
        let swap = [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]];
        for r in 0..4 {
            for c in 0..4 {
                assert!((u[r][c] - want[r][c]).norm() < 1e-14);
                assert!((u[r][c] - C64::new(swap[r][c] as f64, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn block_matches_matrix_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let angles: Vec<f64> = (0..15).map(|_| rng.random_range(-3.0..3.0)).collect();
        let u = su4_unitary(&angles).unwrap();
        let input = random_state(3, &mut rng);
        let mut c = Circuit::new(3);
        push_su4(&mut c, 2, 0, 0);
        let via_circuit = c.run_on(&input, &angles).unwrap();
        let via_matrix = apply_two_qubit(&input, 2, 0, &u).unwrap();
        for (a, b) in via_circuit.amplitudes().iter().zip(via_matrix.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn probabilities_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..1000 {
            let q = Qcnn::random(trial);
            let p = q.forward(&random_state(8, &mut rng)).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(matches!(
            Qcnn::zeros().forward(&StateVector::zero(4).unwrap()),
            Err(Error::UnsupportedQubitCount(4))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let q = Qcnn::random(100 + trial);
            let state = random_state(8, &mut rng);
            let (p, grad) = q.forward_gradient(&state).unwrap();
            assert!((p - q.forward(&state).unwrap()).abs() < 1e-12);
            let eps = 1e-5;
            let mut params = q.params().to_vec();
            for k in 0..params.len() {
                let orig = params[k];
                params[k] = orig + eps;
                let up = q.with_params(&params).forward(&state).unwrap();
                params[k] = orig - eps;
                let down = q.with_params(&params).forward(&state).unwrap();
                params[k] = orig;
                let fd = (up - down) / (2.0 * eps);
                let gap = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
                assert!(gap < 1e-4 || (fd - grad[k]).abs() < 1e-9, "param {k}: {fd} vs {}", grad[k]);
            }
        }
    }

    #[test]
    fn final_flip_saturates_the_all_zero_input() {
        // A unitary circuit cannot send every input to readout |1⟩; the
        // constructible saturation is: with every other angle zero, a π flip in
        // the last block's post-rotation sends |0…0⟩ to p = 1, and it maps
        // p to 1 − p for every input.
        let plain = Qcnn::zeros();
        let mut flipped = Qcnn::zeros();
        let mut params = vec![0.0; flipped.n_params()];
        params[flipped.final_block_base() + 9] = std::f64::consts::PI;
        flipped.set_params(&params).unwrap();
        let zero = StateVector::zero(8).unwrap();
        assert_eq!(plain.forward(&zero).unwrap(), 0.0);
        assert!((flipped.forward(&zero).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = random_state(8, &mut rng);
            let sum = plain.forward(&s).unwrap() + flipped.forward(&s).unwrap();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    fn plus_state() -> StateVector {
        let amp = C64::new(1.0 / 16.0, 0.0);
        StateVector::from_amplitudes(vec![amp; 256]).unwrap()
    }

    #[test]
    fn chance_level_loss_is_ln2() {
        let states = vec![plus_state(); 4];
        let labels = [1, -1, 1, -1];
        let q = Qcnn::zeros();
        assert!((q.forward(&states[0]).unwrap() - 0.5).abs() < 1e-12);
        let loss = qcnn_loss(&q, &states, &labels, &[0, 1, 2, 3]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_returns_initial_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let states: Vec<_> = (0..8).map(|_| random_state(8, &mut rng)).collect();
        let labels = [1, -1, 1, -1, 1, -1, 1, -1];
        let init = Qcnn::random(7);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 2,
            batch_samples: 4,
            steps_per_epoch: 2,
            ..TrainConfig::default()
        };
        let fit = qcnn_train(&init, (&states[..6], &labels[..6]), (&states[6..], &labels[6..]), &cfg).unwrap();
        assert_eq!(fit.model.params(), init.params());
    }

    /// Basis-state embeddings whose class is the first bit.
    fn separable_states(n: usize, seed: u64) -> (Vec<StateVector>, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label: i8 = if i % 2 == 0 { 1 } else { -1 };
            let rest = rng.random_range(0..128usize);
            let idx = if label == 1 { 128 + rest } else { rest };
            // small random rotation away from the basis state keeps inputs generic
            let mut amps = StateVector::basis(8, idx).unwrap().amplitudes().to_vec();
            for a in amps.iter_mut() {
                *a += C64::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02));
            }
            states.push(StateVector::normalized(amps).unwrap());
            labels.push(label);
        }
        (states, labels)
    }

    #[test]
    fn learns_linearly_separated_embeddings() {
        let (states, labels) = separable_states(48, 8);
        let cfg = TrainConfig {
            learning_rate: 0.05,
            max_epochs: 200,
            batch_samples: 16,
            steps_per_epoch: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let fit = qcnn_train(
            &Qcnn::random(10),
            (&states[..36], &labels[..36]),
            (&states[36..], &labels[36..]),
            &cfg,
        )
        .unwrap();
        let pred = fit.model.predict(&states[..36]).unwrap();
        let correct = pred.iter().zip(&labels[..36]).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / 36.0 > 0.9, "train accuracy {correct}/36");
    }
}
