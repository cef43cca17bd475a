//! Fixed one- and two-qubit gate matrices.
//!
//! Two-qubit matrices act on the local basis `|q_a q_b⟩` with `q_a` the more
//! significant bit, so `cnot()` is controlled by the first qubit of the pair.

use super::{PauliAxis, C64};

pub type Gate1 = [[C64; 2]; 2];
pub type Gate2 = [[C64; 4]; 4];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn identity1() -> Gate1 {
    [[ONE, ZERO], [ZERO, ONE]]
}

pub fn hadamard() -> Gate1 {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

pub fn pauli(axis: PauliAxis) -> Gate1 {
    match axis {
        PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
        PauliAxis::Y => [[ZERO, -I], [I, ZERO]],
        PauliAxis::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// `S = diag(1, i)`.
pub fn phase_s() -> Gate1 {
    [[ONE, ZERO], [ZERO, I]]
}

/// `exp(-i·angle·P)` for a single Pauli `P`.
pub fn pauli_exp(axis: PauliAxis, angle: f64) -> Gate1 {
    let (s, c) = angle.sin_cos();
    let p = pauli(axis);
    let mut g = [[ZERO; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            let id = if r == k { ONE } else { ZERO };
            g[r][k] = id * c - I * s * p[r][k];
        }
    }
    g
}

/// Standard rotation `R_axis(θ) = exp(-iθP/2)`.
pub fn rotation(axis: PauliAxis, theta: f64) -> Gate1 {
    pauli_exp(axis, theta / 2.0)
}

pub fn rx(theta: f64) -> Gate1 {
    rotation(PauliAxis::X, theta)
}

pub fn ry(theta: f64) -> Gate1 {
    rotation(PauliAxis::Y, theta)
}

pub fn rz(theta: f64) -> Gate1 {
    rotation(PauliAxis::Z, theta)
}

pub fn cnot() -> Gate2 {
    let mut g = [[ZERO; 4]; 4];
    g[0][0] = ONE;
    g[1][1] = ONE;
    g[2][3] = ONE;
    g[3][2] = ONE;
    g
}

pub fn kron(a: &Gate1, b: &Gate1) -> Gate2 {
    let mut g = [[ZERO; 4]; 4];
    for (ar, arow) in a.iter().enumerate() {
        for (ac, &av) in arow.iter().enumerate() {
            for (br, brow) in b.iter().enumerate() {
                for (bc, &bv) in brow.iter().enumerate() {
                    g[2 * ar + br][2 * ac + bc] = av * bv;
                }
            }
        }
    }
    g
}

/// `exp(-i·angle·P⊗P)`.
pub fn pauli_pair_exp(axis: PauliAxis, angle: f64) -> Gate2 {
    let p = pauli(axis);
    let pp = kron(&p, &p);
    let (s, c) = angle.sin_cos();
    let mut g = [[ZERO; 4]; 4];
    for r in 0..4 {
        for k in 0..4 {
            let id = if r == k { ONE } else { ZERO };
            g[r][k] = id * c - I * s * pp[r][k];
        }
    }
    g
}

pub fn matmul2(a: &Gate2, b: &Gate2) -> Gate2 {
    let mut g = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            g[r][c] = (0..4).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    g
}

pub fn dagger1(g: &Gate1) -> Gate1 {
    [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]]
}

pub fn dagger2(g: &Gate2) -> Gate2 {
    let mut d = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            d[r][c] = g[c][r].conj();
        }
    }
    d
}

fn max_unitarity_deviation<const N: usize>(g: &[[C64; N]; N]) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..N {
        for c in 0..N {
            let dot: C64 = (0..N).map(|k| g[k][r].conj() * g[k][c]).sum();
            let target = if r == c { ONE } else { ZERO };
            let dev = (dot - target).norm();
            if dev.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(dev);
        }
    }
    worst
}

/// Largest entry of `|G†G − I|`; NaN entries report as infinite.
pub fn unitarity_deviation1(g: &Gate1) -> f64 {
    max_unitarity_deviation(g)
}

pub fn unitarity_deviation2(g: &Gate2) -> f64 {
    max_unitarity_deviation(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_gates_are_unitary() {
        for g in [hadamard(), phase_s(), rx(0.3), ry(-1.2), rz(2.5)] {
            assert!(unitarity_deviation1(&g) < 1e-14);
        }
        for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
            assert!(unitarity_deviation1(&pauli(axis)) < 1e-15);
            assert!(unitarity_deviation2(&pauli_pair_exp(axis, 0.77)) < 1e-14);
        }
        assert!(unitarity_deviation2(&cnot()) < 1e-15);
    }

    #[test]
    fn pauli_exp_of_z_is_the_documented_diagonal() {
        // exp(iφZ) = diag(e^{iφ}, e^{-iφ}), written as exp(-i(-φ)Z)
        let phi = 0.4;
        let g = pauli_exp(PauliAxis::Z, -phi);
        assert!((g[0][0] - C64::from_polar(1.0, phi)).norm() < 1e-15);
        assert!((g[1][1] - C64::from_polar(1.0, -phi)).norm() < 1e-15);
        assert_eq!(g[0][1], ZERO);
    }

    #[test]
    fn non_unitary_detected() {
        let mut g = hadamard();
        g[0][0] *= 2.0;
        assert!(unitarity_deviation1(&g) > 0.1);
        g[1][1] = C64::new(f64::NAN, 0.0);
        assert!(unitarity_deviation1(&g).is_infinite());
    }
}
