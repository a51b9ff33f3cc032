//! The uncertain switched Roesser model, its boundary conditions and the
//! realization of the norm-bounded uncertainty `F(i, j)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Matrix, NumericError, SymMatrix};

/// Admissibility slack on `λ_max(FᵀF) ≤ 1`; sinusoidal profiles touch the
/// bound exactly.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;
/// Largest accepted delay, in grid steps.
pub const MAX_DELAY: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid system: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("mode index {index} out of range for {modes} modes")]
    ModeIndex { index: usize, modes: usize },
    #[error("inadmissible uncertainty: λ_max(FᵀF) = {0} exceeds 1")]
    Inadmissible(f64),
    #[error("uncertainty matrix must be {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    UncertaintyShape {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid uncertainty realization: {0}")]
    BadRealization(String),
    #[error("invalid boundary conditions: {0}")]
    Boundary(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One dimension or range problem found by [`SwitchedRoesserSystem::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub mode: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Some(k) => write!(f, "mode {}: {}: {}", k + 1, self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Matrices of one subsystem. `a`, `a_d` are n×n, `b` n×q, `h` n×r, and
/// `e1`, `e2`, `e3` are p×n, p×n, p×q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMatrices {
    pub a: Matrix,
    pub a_d: Matrix,
    pub b: Matrix,
    pub h: Matrix,
    pub e1: Matrix,
    pub e2: Matrix,
    pub e3: Matrix,
}

impl ModeMatrices {
    /// Mode without uncertainty (`H`, `E*` zero).
    pub fn certain(a: Matrix, a_d: Matrix, b: Matrix, r: usize, p: usize) -> Self {
        let n = a.rows();
        let q = b.cols();
        Self {
            a,
            a_d,
            b,
            h: Matrix::zeros(n, r),
            e1: Matrix::zeros(p, n),
            e2: Matrix::zeros(p, n),
            e3: Matrix::zeros(p, q),
        }
    }

    fn fields(&self) -> [(&'static str, &Matrix); 7] {
        [
            ("A", &self.a),
            ("A_d", &self.a_d),
            ("B", &self.b),
            ("H", &self.h),
            ("E1", &self.e1),
            ("E2", &self.e2),
            ("E3", &self.e3),
        ]
    }
}

/// Uncertain switched Roesser system with constant state delays `d_h`, `d_v`.
///
/// Delays must be at least one grid step. A delay-free system sets
/// `delay_free`, zero delays and zero `A_d`/`E2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchedRoesserSystem {
    pub n1: usize,
    pub n2: usize,
    pub q: usize,
    /// Column count of `H` (row count of `F`).
    pub r: usize,
    /// Row count of `E1`, `E2`, `E3` (column count of `F`).
    pub p: usize,
    pub d_h: usize,
    pub d_v: usize,
    #[serde(default)]
    pub delay_free: bool,
    pub modes: Vec<ModeMatrices>,
}

impl SwitchedRoesserSystem {
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn d_bar(&self) -> usize {
        self.d_h.max(self.d_v)
    }

    pub fn mode(&self, k: usize) -> Result<&ModeMatrices, ModelError> {
        self.modes.get(k).ok_or(ModelError::ModeIndex {
            index: k,
            modes: self.modes.len(),
        })
    }

    /// Every dimension/range problem, with the mode index and field name.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut global = |field: &str, message: String| {
            out.push(Violation {
                mode: None,
                field: field.to_string(),
                message,
            })
        };
        if self.n1 == 0 {
            global("n1", "must be >= 1".into());
        }
        if self.n2 == 0 {
            global("n2", "must be >= 1".into());
        }
        if self.modes.is_empty() {
            global("modes", "N ≥ 1 required".into());
        }
        if self.delay_free {
            if self.d_h != 0 || self.d_v != 0 {
                global("delays", "delay-free systems must have d_h = d_v = 0".into());
            }
        } else {
            if self.d_h == 0 {
                global("d_h", "must be >= 1 unless the system is delay-free".into());
            }
            if self.d_v == 0 {
                global("d_v", "must be >= 1 unless the system is delay-free".into());
            }
        }
        if self.d_h > MAX_DELAY {
            global("d_h", format!("exceeds the cap of {MAX_DELAY}"));
        }
        if self.d_v > MAX_DELAY {
            global("d_v", format!("exceeds the cap of {MAX_DELAY}"));
        }

        let n = self.n();
        let (q, r, p) = (self.q, self.r, self.p);
        for (k, mode) in self.modes.iter().enumerate() {
            let expected = [
                (n, n),
                (n, n),
                (n, q),
                (n, r),
                (p, n),
                (p, n),
                (p, q),
            ];
            for ((name, m), want) in mode.fields().into_iter().zip(expected) {
                if m.shape() != want {
                    out.push(Violation {
                        mode: Some(k),
                        field: name.to_string(),
                        message: format!(
                            "expected {}x{}, got {}x{}",
                            want.0,
                            want.1,
                            m.rows(),
                            m.cols()
                        ),
                    });
                } else if m.as_slice().iter().any(|v| !v.is_finite()) {
                    out.push(Violation {
                        mode: Some(k),
                        field: name.to_string(),
                        message: "non-finite entry".into(),
                    });
                }
            }
            if self.delay_free && (!mode.a_d.is_zero() || !mode.e2.is_zero()) {
                out.push(Violation {
                    mode: Some(k),
                    field: "A_d".into(),
                    message: "delay-free systems need zero A_d and E2".into(),
                });
            }
        }
        out
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    /// Same system with the delayed channel removed (`A_d = 0`, `E2 = 0`).
    pub fn without_delay(&self) -> Self {
        let mut sys = self.clone();
        sys.d_h = 0;
        sys.d_v = 0;
        sys.delay_free = true;
        for m in &mut sys.modes {
            m.a_d = Matrix::zeros(m.a_d.rows(), m.a_d.cols());
            m.e2 = Matrix::zeros(m.e2.rows(), m.e2.cols());
        }
        sys
    }

    /// `(Â, Â_d, B̂)` for mode `k` under the uncertainty value `f`.
    pub fn realize_uncertain_matrices(
        &self,
        k: usize,
        f: &Matrix,
    ) -> Result<RealizedMode, ModelError> {
        let mode = self.mode(k)?;
        if f.shape() != (self.r, self.p) {
            return Err(ModelError::UncertaintyShape {
                expected_rows: self.r,
                expected_cols: self.p,
                rows: f.rows(),
                cols: f.cols(),
            });
        }
        check_admissible(f)?;
        let hf = &mode.h * f;
        Ok(RealizedMode {
            a: &mode.a + &(&hf * &mode.e1),
            a_d: &mode.a_d + &(&hf * &mode.e2),
            b: &mode.b + &(&hf * &mode.e3),
        })
    }
}

/// Mode matrices with a particular uncertainty value folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedMode {
    pub a: Matrix,
    pub a_d: Matrix,
    pub b: Matrix,
}

/// `λ_max(FᵀF)`, i.e. the squared spectral norm.
pub fn uncertainty_gain(f: &Matrix) -> Result<f64, NumericError> {
    if f.rows() == 0 || f.cols() == 0 {
        return Ok(0.0);
    }
    SymMatrix::symmetrize(&(&f.transpose() * f)).lambda_max()
}

pub fn check_admissible(f: &Matrix) -> Result<(), ModelError> {
    let g = uncertainty_gain(f)?;
    if g > 1.0 + ADMISSIBILITY_TOL {
        return Err(ModelError::Inadmissible(g));
    }
    Ok(())
}

/// Nonzero boundary values; everything not stored is zero.
///
/// `h_values[(i, j)]` is `x^h(i, j)` for `i ∈ [−d_h, 0]`, `j ∈ [0, z1]` and
/// `v_values[(i, j)]` is `x^v(i, j)` for `i ∈ [0, z2]`, `j ∈ [−d_v, 0]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConditions {
    pub z1: usize,
    pub z2: usize,
    pub h_values: BTreeMap<(i64, i64), Vec<f64>>,
    pub v_values: BTreeMap<(i64, i64), Vec<f64>>,
}

impl BoundaryConditions {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Constant boundary: `x^h(i, j) = h` on the whole strip `i ∈ [−d_h, 0]`,
    /// `0 ≤ j ≤ z1`, and likewise `x^v(i, j) = v` for `0 ≤ i ≤ z2`.
    pub fn constant(sys: &SwitchedRoesserSystem, z1: usize, z2: usize, h: &[f64], v: &[f64]) -> Self {
        let mut bc = Self {
            z1,
            z2,
            ..Self::default()
        };
        for i in -(sys.d_h as i64)..=0 {
            for j in 0..=z1 as i64 {
                bc.h_values.insert((i, j), h.to_vec());
            }
        }
        for j in -(sys.d_v as i64)..=0 {
            for i in 0..=z2 as i64 {
                bc.v_values.insert((i, j), v.to_vec());
            }
        }
        bc
    }

    /// `x^h(i, j)` on the boundary strip; zero outside the declared range.
    pub fn h(&self, i: i64, j: i64, n1: usize) -> Vec<f64> {
        if j < 0 || j > self.z1 as i64 || i > 0 {
            return vec![0.0; n1];
        }
        self.h_values
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| vec![0.0; n1])
    }

    /// `x^v(i, j)` on the boundary strip; zero outside the declared range.
    pub fn v(&self, i: i64, j: i64, n2: usize) -> Vec<f64> {
        if i < 0 || i > self.z2 as i64 || j > 0 {
            return vec![0.0; n2];
        }
        self.v_values
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| vec![0.0; n2])
    }

    pub fn validate(&self, sys: &SwitchedRoesserSystem) -> Result<(), ModelError> {
        let dh = sys.d_h as i64;
        let dv = sys.d_v as i64;
        for (&(i, j), val) in &self.h_values {
            if !(-dh..=0).contains(&i) || !(0..=self.z1 as i64).contains(&j) {
                return Err(ModelError::Boundary(format!(
                    "h value at ({i}, {j}) outside i ∈ [{}, 0], j ∈ [0, {}]",
                    -dh, self.z1
                )));
            }
            if val.len() != sys.n1 {
                return Err(ModelError::Boundary(format!(
                    "h value at ({i}, {j}) has {} entries, expected {}",
                    val.len(),
                    sys.n1
                )));
            }
        }
        for (&(i, j), val) in &self.v_values {
            if !(0..=self.z2 as i64).contains(&i) || !(-dv..=0).contains(&j) {
                return Err(ModelError::Boundary(format!(
                    "v value at ({i}, {j}) outside i ∈ [0, {}], j ∈ [{}, 0]",
                    self.z2, -dv
                )));
            }
            if val.len() != sys.n2 {
                return Err(ModelError::Boundary(format!(
                    "v value at ({i}, {j}) has {} entries, expected {}",
                    val.len(),
                    sys.n2
                )));
            }
        }
        Ok(())
    }

    /// `max(z1, z2)`: past this diagonal no boundary energy enters.
    pub fn extent(&self) -> usize {
        self.z1.max(self.z2)
    }
}

/// How `F(i, j)` evolves over the grid for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UncertaintyRealization {
    Zero,
    /// `amplitude·sin(frequency·(i + j))` on the leading diagonal of an r×p matrix.
    ScalarSinusoid { amplitude: f64, frequency: f64 },
    /// `amplitude·cos(frequency·(i + j))` on the leading diagonal.
    ScalarCosinusoid { amplitude: f64, frequency: f64 },
    Constant { matrix: Matrix },
    /// Explicit per-cell values; cells not listed are zero.
    CustomTable { entries: Vec<TableEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub i: i64,
    pub j: i64,
    pub matrix: Matrix,
}

impl UncertaintyRealization {
    pub fn validate(&self, r: usize, p: usize) -> Result<(), ModelError> {
        match self {
            Self::Zero => Ok(()),
            Self::ScalarSinusoid { amplitude, frequency }
            | Self::ScalarCosinusoid { amplitude, frequency } => {
                if !amplitude.is_finite() || !frequency.is_finite() {
                    return Err(ModelError::BadRealization("non-finite parameter".into()));
                }
                if amplitude.abs() > 1.0 {
                    return Err(ModelError::BadRealization(format!(
                        "amplitude {amplitude} exceeds 1"
                    )));
                }
                Ok(())
            }
            Self::Constant { matrix } => check_shape_and_bound(matrix, r, p),
            Self::CustomTable { entries } => entries
                .iter()
                .try_for_each(|e| check_shape_and_bound(&e.matrix, r, p)),
        }
    }

    /// `F(i, j)` as an r×p matrix.
    pub fn eval(&self, i: i64, j: i64, r: usize, p: usize) -> Matrix {
        let m = (i + j) as f64;
        match self {
            Self::Zero => Matrix::zeros(r, p),
            Self::ScalarSinusoid { amplitude, frequency } => {
                Matrix::eye(r, p).scale(amplitude * (frequency * m).sin())
            }
            Self::ScalarCosinusoid { amplitude, frequency } => {
                Matrix::eye(r, p).scale(amplitude * (frequency * m).cos())
            }
            Self::Constant { matrix } => matrix.clone(),
            Self::CustomTable { entries } => entries
                .iter()
                .find(|e| e.i == i && e.j == j)
                .map(|e| e.matrix.clone())
                .unwrap_or_else(|| Matrix::zeros(r, p)),
        }
    }
}

fn check_shape_and_bound(m: &Matrix, r: usize, p: usize) -> Result<(), ModelError> {
    if m.shape() != (r, p) {
        return Err(ModelError::UncertaintyShape {
            expected_rows: r,
            expected_cols: p,
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    check_admissible(m)
}

/// One realization per mode; the active mode's entry drives `F(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyProfile {
    pub per_mode: Vec<UncertaintyRealization>,
}

impl UncertaintyProfile {
    pub fn zero(modes: usize) -> Self {
        Self {
            per_mode: vec![UncertaintyRealization::Zero; modes],
        }
    }

    pub fn validate(&self, sys: &SwitchedRoesserSystem) -> Result<(), ModelError> {
        if self.per_mode.len() != sys.num_modes() {
            return Err(ModelError::BadRealization(format!(
                "{} realizations for {} modes",
                self.per_mode.len(),
                sys.num_modes()
            )));
        }
        self.per_mode.iter().try_for_each(|u| u.validate(sys.r, sys.p))
    }

    pub fn eval(&self, mode: usize, i: i64, j: i64, r: usize, p: usize) -> Matrix {
        self.per_mode
            .get(mode)
            .map_or_else(|| Matrix::zeros(r, p), |u| u.eval(i, j, r, p))
    }
}
