#![allow(dead_code)]

use r2d_core::model::{ModeMatrices, SwitchedRoesserSystem};
use r2d_core::numerics::{Matrix, SymMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, s: f64) -> Matrix {
    if s == 0.0 {
        return Matrix::zeros(rows, cols);
    }
    Matrix::from_row_major(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-s..s)).collect()).unwrap()
}

pub fn rand_sym(rng: &mut ChaCha8Rng, n: usize, s: f64) -> SymMatrix {
    SymMatrix::symmetrize(&rand_matrix(rng, n, n, s))
}

/// `GGᵀ + shift·I`.
pub fn rand_pd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> SymMatrix {
    let g = rand_matrix(rng, n, n, 1.0);
    SymMatrix::symmetrize(&(&(&g * &g.transpose()) + &Matrix::identity(n).scale(shift)))
}

pub fn rand_system(rng: &mut ChaCha8Rng, modes: usize, uncertain: bool) -> SwitchedRoesserSystem {
    let n1 = rng.gen_range(1..=2);
    let n2 = rng.gen_range(1..=2);
    let (q, r, p) = (rng.gen_range(1..=2), rng.gen_range(1..=2), rng.gen_range(1..=2));
    let n = n1 + n2;
    let u = if uncertain { 0.2 } else { 0.0 };
    SwitchedRoesserSystem {
        n1,
        n2,
        q,
        r,
        p,
        d_h: rng.gen_range(1..=3),
        d_v: rng.gen_range(1..=3),
        delay_free: false,
        modes: (0..modes)
            .map(|_| ModeMatrices {
                a: rand_matrix(rng, n, n, 1.0),
                a_d: rand_matrix(rng, n, n, 0.3),
                b: rand_matrix(rng, n, q, 1.0),
                h: rand_matrix(rng, n, r, u),
                e1: rand_matrix(rng, p, n, u),
                e2: rand_matrix(rng, p, n, u),
                e3: rand_matrix(rng, p, q, u),
            })
            .collect(),
    }
}
