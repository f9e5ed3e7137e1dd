//! Independent reference models used by the integration tests.
//!
//! The entanglement-swap reference simulates the full four-qubit circuit
//! on 16x16 density matrices: two Werner pairs, a CNOT + Hadamard Bell
//! measurement on the middle qubits with two-qubit depolarizing gate
//! noise, classically flipped outcome bits, and the Pauli correction on
//! the far qubit. The storage reference applies a per-qubit replacement
//! (depolarizing) channel to both halves of a pair. Neither shares any
//! code with the closed-form expressions in the library.

#![allow(dead_code)]

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(n: usize) -> Mat {
    vec![vec![0.0; n]; n]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[j][i] = a[i][j];
        }
    }
    out
}

/// `U rho U^T` for real `U`.
pub fn conjugate(u: &Mat, rho: &Mat) -> Mat {
    matmul(&matmul(u, rho), &transpose(u))
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (m, n) = (a.len(), b.len());
    let mut out = zeros(m * n);
    for i in 0..m {
        for j in 0..m {
            if a[i][j] == 0.0 {
                continue;
            }
            for r in 0..n {
                for s in 0..n {
                    out[i * n + r][j * n + s] = a[i][j] * b[r][s];
                }
            }
        }
    }
    out
}

pub fn add_scaled(into: &mut Mat, a: &Mat, w: f64) {
    for (ri, row) in into.iter_mut().enumerate() {
        for (ci, v) in row.iter_mut().enumerate() {
            *v += w * a[ri][ci];
        }
    }
}

/// Two-qubit Werner state with fidelity `f` to the Phi+ Bell state.
pub fn werner(f: f64) -> Mat {
    let mut p = zeros(4);
    for &i in &[0usize, 3] {
        for &j in &[0usize, 3] {
            p[i][j] = 0.5;
        }
    }
    let mut rho = zeros(4);
    add_scaled(&mut rho, &p, f);
    let mut rest = eye(4);
    add_scaled(&mut rest, &p, -1.0);
    add_scaled(&mut rho, &rest, (1.0 - f) / 3.0);
    rho
}

/// Fidelity of a two-qubit state with the Phi+ Bell state.
pub fn phi_plus_fidelity(rho: &Mat) -> f64 {
    0.5 * (rho[0][0] + rho[0][3] + rho[3][0] + rho[3][3])
}

fn h2() -> Mat {
    let s = 0.5f64.sqrt();
    vec![vec![s, s], vec![s, -s]]
}

fn x2() -> Mat {
    vec![vec![0.0, 1.0], vec![1.0, 0.0]]
}

fn z2() -> Mat {
    vec![vec![1.0, 0.0], vec![0.0, -1.0]]
}

/// A single-qubit operator embedded at position `q` of a 4-qubit register
/// (qubit 0 is the most significant index bit).
fn embed1(op: &Mat, q: usize) -> Mat {
    let mut out = eye(1);
    for slot in 0..4 {
        let factor = if slot == q { op.clone() } else { eye(2) };
        out = kron(&out, &factor);
    }
    out
}

/// CNOT with control qubit 1 and target qubit 2 of the 4-qubit register.
fn cnot_12() -> Mat {
    let mut m = zeros(16);
    for i in 0..16 {
        let control = (i >> 2) & 1;
        let j = if control == 1 { i ^ 0b0010 } else { i };
        m[j][i] = 1.0;
    }
    m
}

/// Partial trace over qubits 1 and 2, leaving the (0, 3) pair as a 4x4
/// state indexed by `a*2 + d`.
fn trace_mid(rho: &Mat) -> Mat {
    let mut out = zeros(4);
    for a in 0..2usize {
        for d in 0..2usize {
            for a2 in 0..2usize {
                for d2 in 0..2usize {
                    let mut sum = 0.0;
                    for b in 0..2usize {
                        for c in 0..2usize {
                            let i = a * 8 + b * 4 + c * 2 + d;
                            let j = a2 * 8 + b * 4 + c * 2 + d2;
                            sum += rho[i][j];
                        }
                    }
                    out[a * 2 + d][a2 * 2 + d2] = sum;
                }
            }
        }
    }
    out
}

/// Projects qubits 1 and 2 onto the Z outcomes `(mb, mc)` (unnormalized).
fn project_mid(rho: &Mat, mb: usize, mc: usize) -> Mat {
    let keep = |i: usize| ((i >> 2) & 1) == mb && ((i >> 1) & 1) == mc;
    let mut out = zeros(16);
    for i in 0..16 {
        if !keep(i) {
            continue;
        }
        for j in 0..16 {
            if keep(j) {
                out[i][j] = rho[i][j];
            }
        }
    }
    out
}

/// Fidelity delivered by an entanglement swap, simulated on the full
/// four-qubit density matrix.
pub fn swap_oracle(f1: f64, f2: f64, gate_error: f64, measurement_error: f64) -> f64 {
    // Registers: 0 and 1 hold the first pair, 2 and 3 the second.
    let mut rho = kron(&werner(f1), &werner(f2));
    // Bell measurement circuit on the middle qubits: CNOT then H.
    rho = conjugate(&cnot_12(), &rho);
    // Two-qubit depolarizing noise on the measured pair.
    let mut depolarized = zeros(16);
    add_scaled(&mut depolarized, &rho, 1.0 - gate_error);
    let reduced = trace_mid(&rho);
    // Re-embed tr_mid(rho) (x) I/4 on the middle qubits.
    for a in 0..2usize {
        for d in 0..2usize {
            for a2 in 0..2usize {
                for d2 in 0..2usize {
                    let v = reduced[a * 2 + d][a2 * 2 + d2] * 0.25;
                    for b in 0..2usize {
                        for c in 0..2usize {
                            let i = a * 8 + b * 4 + c * 2 + d;
                            let j = a2 * 8 + b * 4 + c * 2 + d2;
                            depolarized[i][j] += gate_error * v;
                        }
                    }
                }
            }
        }
    }
    rho = conjugate(&embed1(&h2(), 1), &depolarized);

    // Measure, flip the reported bits with the measurement error, correct.
    let z_far = kron(&eye(2), &z2());
    let x_far = kron(&eye(2), &x2());
    let mut far = zeros(4);
    for mb in 0..2usize {
        for mc in 0..2usize {
            let branch = trace_mid(&project_mid(&rho, mb, mc));
            for rb in 0..2usize {
                for rc in 0..2usize {
                    let w = flip_weight(mb, rb, measurement_error)
                        * flip_weight(mc, rc, measurement_error);
                    if w == 0.0 {
                        continue;
                    }
                    let mut corrected = branch.clone();
                    if rb == 1 {
                        corrected = conjugate(&z_far, &corrected);
                    }
                    if rc == 1 {
                        corrected = conjugate(&x_far, &corrected);
                    }
                    add_scaled(&mut far, &corrected, w);
                }
            }
        }
    }
    phi_plus_fidelity(&far)
}

fn flip_weight(truth: usize, reported: usize, p: f64) -> f64 {
    if truth == reported {
        1.0 - p
    } else {
        p
    }
}

/// Fidelity after storing both halves of a Werner pair for `elapsed`
/// seconds, each qubit going through a replacement (depolarizing) channel
/// with keep probability `exp(-elapsed / tau)`.
pub fn decay_oracle(f: f64, elapsed: f64, tau: f64) -> f64 {
    let q = (-elapsed / tau).exp();
    let rho = werner(f);
    // Channel on qubit 0: keep, or replace with I/2 (x) tr_0(rho).
    let tr0 = |rho: &Mat| -> Mat {
        let mut out = zeros(2);
        for d in 0..2 {
            for d2 in 0..2 {
                out[d][d2] = rho[d][d2] + rho[2 + d][2 + d2];
            }
        }
        out
    };
    let tr1 = |rho: &Mat| -> Mat {
        let mut out = zeros(2);
        for a in 0..2 {
            for a2 in 0..2 {
                out[a][a2] = rho[a * 2][a2 * 2] + rho[a * 2 + 1][a2 * 2 + 1];
            }
        }
        out
    };
    let half = |m: &Mat| {
        let mut s = m.clone();
        for row in &mut s {
            for v in row {
                *v *= 0.5;
            }
        }
        s
    };
    let mut after0 = zeros(4);
    add_scaled(&mut after0, &rho, q);
    add_scaled(&mut after0, &kron(&half(&eye(2)), &tr0(&rho)), 1.0 - q);
    let mut after1 = zeros(4);
    add_scaled(&mut after1, &after0, q);
    add_scaled(&mut after1, &kron(&tr1(&after0), &half(&eye(2))), 1.0 - q);
    phi_plus_fidelity(&after1)
}

/// Deterministic uniform draw helper shared by test files.
pub fn uniform(rng: &mut impl rand::Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
