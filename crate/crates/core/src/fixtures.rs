//! The two-mode delayed example system and its published solution set.

use std::f64::consts::FRAC_PI_2;

use crate::model::{
    BoundaryConditions, ModeMatrices, SwitchedRoesserSystem, UncertaintyProfile,
    UncertaintyRealization,
};
use crate::numerics::{Matrix, SymMatrix};

pub const SEC4_ALPHA: f64 = 0.6;
pub const SEC4_BETA: f64 = 1.2;
pub const SEC4_RATIO: f64 = 8.0;
pub const SEC4_TAU_A: f64 = 6.5;
pub const SEC4_LAG: usize = 2;
pub const SEC4_BOUNDARY_EXTENT: usize = 20;

fn m(rows: [[f64; 2]; 2]) -> Matrix {
    Matrix::from_rows(&rows)
}

fn s(rows: [[f64; 2]; 2]) -> SymMatrix {
    SymMatrix::new(m(rows)).expect("fixture matrices are symmetric")
}

/// Two modes, whole-state matrices 2×2 with `n1 = n2 = 1`, `d_h = 2`, `d_v = 3`.
pub fn sec4_system() -> SwitchedRoesserSystem {
    let mode1 = ModeMatrices {
        a: m([[1.0, 1.5], [1.0, 0.5]]),
        a_d: m([[-0.15, 0.0], [-0.1, -0.12]]),
        b: m([[-4.5, 0.0], [1.0, -3.0]]),
        h: m([[0.2, 0.15], [0.1, 0.2]]),
        e1: m([[0.1, 0.15], [0.1, 0.0]]),
        e2: m([[0.1, 0.0], [0.1, 0.2]]),
        e3: m([[0.15, 0.0], [0.13, 0.12]]),
    };
    let mode2 = ModeMatrices {
        a: m([[1.0, 2.0], [1.0, 1.0]]),
        a_d: m([[-0.1, 0.2], [0.0, -0.2]]),
        b: m([[-5.0, 1.0], [-1.0, -3.0]]),
        h: m([[0.2, 0.25], [0.2, 0.3]]),
        e1: m([[0.1, 0.2], [0.2, 0.1]]),
        e2: m([[0.2, 0.1], [0.2, 0.1]]),
        e3: m([[0.12, 0.15], [0.12, 0.1]]),
    };
    SwitchedRoesserSystem {
        n1: 1,
        n2: 1,
        q: 2,
        r: 2,
        p: 2,
        d_h: 2,
        d_v: 3,
        delay_free: false,
        modes: vec![mode1, mode2],
    }
}

/// `x^h = 10` for `0 ≤ j ≤ 20` and `x^v = 6` for `0 ≤ i ≤ 20`, held constant
/// across the delay strips.
pub fn sec4_boundary(sys: &SwitchedRoesserSystem) -> BoundaryConditions {
    BoundaryConditions::constant(
        sys,
        SEC4_BOUNDARY_EXTENT,
        SEC4_BOUNDARY_EXTENT,
        &[10.0],
        &[6.0],
    )
}

/// `F_1 = diag(sin(π/2·(i+j)))`, `F_2 = diag(cos(π/2·(i+j)))`.
pub fn sec4_uncertainty() -> UncertaintyProfile {
    UncertaintyProfile {
        per_mode: vec![
            UncertaintyRealization::ScalarSinusoid {
                amplitude: 1.0,
                frequency: FRAC_PI_2,
            },
            UncertaintyRealization::ScalarCosinusoid {
                amplitude: 1.0,
                frequency: FRAC_PI_2,
            },
        ],
    }
}

/// Solution matrices as printed (four decimals).
#[derive(Debug, Clone)]
pub struct PrintedSolution {
    pub x: Vec<SymMatrix>,
    pub y: Vec<SymMatrix>,
    pub w: Vec<Matrix>,
    pub eps: Vec<f64>,
    pub k: Vec<Matrix>,
    /// Indexed by ordered pair `(k, l)`, zero-based.
    pub x_pair: Vec<((usize, usize), SymMatrix)>,
    pub y_pair: Vec<((usize, usize), SymMatrix)>,
    pub eps_pair: Vec<((usize, usize), f64)>,
    pub mu1: f64,
    pub mu2: f64,
    pub lambda_star: f64,
    pub tau_a_star: f64,
}

pub fn sec4_printed_solution() -> PrintedSolution {
    PrintedSolution {
        x: vec![
            s([[0.4300, 0.0080], [0.0080, 0.4365]]),
            s([[0.4180, -0.0451], [-0.0451, 0.3841]]),
        ],
        y: vec![
            s([[1.0619, -0.0738], [-0.0738, 1.0681]]),
            s([[1.0295, -0.0395], [-0.0395, 0.8684]]),
        ],
        w: vec![
            m([[0.0991, 0.1475], [0.1789, 0.1255]]),
            m([[0.0840, 0.1560], [0.0944, 0.0590]]),
        ],
        eps: vec![0.7882, 0.9010],
        k: vec![
            m([[0.2243, 0.3338], [0.4107, 0.2800]]),
            m([[0.2481, 0.4354], [0.2454, 0.1823]]),
        ],
        x_pair: vec![
            ((0, 1), s([[0.6059, -0.1005], [-0.1005, 0.5325]])),
            ((1, 0), s([[0.5805, -0.0926], [-0.0926, 0.5677]])),
        ],
        y_pair: vec![
            ((0, 1), s([[1.0435, -0.0451], [-0.0451, 0.9365]])),
            ((1, 0), s([[1.0422, -0.0447], [-0.0447, 0.9670]])),
        ],
        eps_pair: vec![((0, 1), 0.9987), ((1, 0), 1.0404)],
        mu1: 1.5694,
        mu2: 9.1561,
        lambda_star: 0.4338,
        tau_a_star: 6.15,
    }
}
