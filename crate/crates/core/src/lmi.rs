//! Matrix inequalities as affine symmetric-matrix expressions over
//! structured decision variables.
//!
//! An [`AffineLmi`] is a grid of blocks. Each stored block `(r, c)` carries an
//! optional constant and a list of [`Term`]s `L·V·R`; off-diagonal blocks are
//! mirrored by transposition and diagonal blocks contribute their symmetric
//! part, so the assembled matrix is symmetric for every assignment.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, SwitchedRoesserSystem};
use crate::numerics::{Matrix, NumericError, SymMatrix};

/// Relative strictness margin: "≺ 0" means `λ_max ≤ −1e-7·(1 + ‖F0‖_F)`.
pub const STRICT_REL: f64 = 1e-7;
/// Slack for substituting solutions printed to four decimals.
pub const ROUNDING_SLACK: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("{name} = {value} is outside {range}")]
    Rate {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("constraint {constraint} references undeclared variable {var}")]
    UnknownVariable { constraint: String, var: String },
    #[error("variable {0} declared twice")]
    DuplicateVariable(String),
    #[error("no value for variable {0}")]
    MissingValue(String),
    #[error("value for {name} does not match its declared shape: {reason}")]
    ShapeMismatch { name: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Shape of a decision variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarShape {
    /// Symmetric, block diagonal with the given block orders.
    SymBlockDiag(Vec<usize>),
    /// Symmetric with no further structure.
    Sym(usize),
    Full { rows: usize, cols: usize },
    Scalar,
}

impl VarShape {
    /// Matrix dimensions of a value of this shape (scalars are 1×1).
    pub fn dims(&self) -> (usize, usize) {
        match self {
            VarShape::SymBlockDiag(orders) => {
                let n = orders.iter().sum();
                (n, n)
            }
            VarShape::Sym(n) => (*n, *n),
            VarShape::Full { rows, cols } => (*rows, *cols),
            VarShape::Scalar => (1, 1),
        }
    }

    /// Number of free scalar coordinates.
    pub fn dof(&self) -> usize {
        match self {
            VarShape::SymBlockDiag(orders) => orders.iter().map(|b| b * (b + 1) / 2).sum(),
            VarShape::Sym(n) => n * (n + 1) / 2,
            VarShape::Full { rows, cols } => rows * cols,
            VarShape::Scalar => 1,
        }
    }
}

/// Structure imposed on the Lyapunov-type variables `X`, `Y` (and `P`, `Q`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Structure {
    /// `diag{X_h, X_v}` with blocks of orders `n1`, `n2`.
    #[default]
    BlockDiagonal,
    /// Unstructured symmetric matrix.
    Full,
}

impl Structure {
    fn shape(self, n1: usize, n2: usize) -> VarShape {
        match self {
            Structure::BlockDiagonal => VarShape::SymBlockDiag(vec![n1, n2]),
            Structure::Full => VarShape::Sym(n1 + n2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVariable {
    pub name: String,
    pub shape: VarShape,
    /// Constrained positive definite (positive for scalars).
    pub positive: bool,
}

/// Numeric value of a decision variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Scalar(f64),
    Sym(SymMatrix),
    Full(Matrix),
}

impl Value {
    /// The value as a matrix; scalars become `s·I_inner`.
    fn as_matrix(&self, inner: usize) -> Matrix {
        match self {
            Value::Scalar(s) => Matrix::identity(inner).scale(*s),
            Value::Sym(m) => m.as_matrix().clone(),
            Value::Full(m) => m.clone(),
        }
    }

    pub fn as_sym(&self) -> Option<&SymMatrix> {
        match self {
            Value::Sym(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_full(&self) -> Option<&Matrix> {
        match self {
            Value::Full(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(s) => Some(*s),
            _ => None,
        }
    }

    /// Checks the value against a declared shape.
    pub fn conforms(&self, shape: &VarShape) -> Result<(), String> {
        match (self, shape) {
            (Value::Scalar(_), VarShape::Scalar) => Ok(()),
            (Value::Full(m), VarShape::Full { rows, cols }) if m.shape() == (*rows, *cols) => Ok(()),
            (Value::Sym(m), VarShape::Sym(n)) if m.order() == *n => Ok(()),
            (Value::Sym(m), VarShape::SymBlockDiag(orders)) => {
                let n: usize = orders.iter().sum();
                if m.order() != n {
                    return Err(format!("order {} instead of {n}", m.order()));
                }
                let block_of = block_index(orders);
                for i in 0..n {
                    for j in 0..n {
                        if block_of[i] != block_of[j] && m[(i, j)] != 0.0 {
                            return Err(format!("nonzero off-block entry ({i}, {j})"));
                        }
                    }
                }
                Ok(())
            }
            (v, s) => Err(format!("{v:?} is not a {s:?}")),
        }
    }
}

fn block_index(orders: &[usize]) -> Vec<usize> {
    orders
        .iter()
        .enumerate()
        .flat_map(|(b, &o)| std::iter::repeat_n(b, o))
        .collect()
}

/// Variable name → value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub values: BTreeMap<String, Value>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: Value) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.values.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn sym(&self, name: &str) -> Result<&SymMatrix, LmiError> {
        self.get(name)
            .and_then(Value::as_sym)
            .ok_or_else(|| LmiError::MissingValue(name.to_string()))
    }

    pub fn full(&self, name: &str) -> Result<&Matrix, LmiError> {
        self.get(name)
            .and_then(Value::as_full)
            .ok_or_else(|| LmiError::MissingValue(name.to_string()))
    }

    pub fn scalar(&self, name: &str) -> Result<f64, LmiError> {
        self.get(name)
            .and_then(Value::as_scalar)
            .ok_or_else(|| LmiError::MissingValue(name.to_string()))
    }
}

/// `L·V·R` (or its transpose), where a scalar `V` acts as `v·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub var: String,
    pub left: Matrix,
    pub right: Matrix,
    pub transpose: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockEntry {
    pub row: usize,
    pub col: usize,
    pub constant: Option<Matrix>,
    pub terms: Vec<Term>,
}

/// Affine symmetric-matrix expression required to be negative definite.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLmi {
    pub name: String,
    pub block_orders: Vec<usize>,
    pub entries: Vec<BlockEntry>,
}

impl AffineLmi {
    pub fn new(name: impl Into<String>, block_orders: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            block_orders,
            entries: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.block_orders.iter().sum()
    }

    fn offsets(&self) -> Vec<usize> {
        self.block_orders
            .iter()
            .scan(0, |acc, &o| {
                let start = *acc;
                *acc += o;
                Some(start)
            })
            .collect()
    }

    fn entry_mut(&mut self, row: usize, col: usize) -> &mut BlockEntry {
        let pos = self
            .entries
            .iter()
            .position(|e| e.row == row && e.col == col)
            .unwrap_or_else(|| {
                self.entries.push(BlockEntry {
                    row,
                    col,
                    constant: None,
                    terms: Vec::new(),
                });
                self.entries.len() - 1
            });
        &mut self.entries[pos]
    }

    /// Adds `left·var·right` to block `(row, col)`.
    pub fn term(mut self, row: usize, col: usize, var: &str, left: Matrix, right: Matrix) -> Self {
        self.entry_mut(row, col).terms.push(Term {
            var: var.to_string(),
            left,
            right,
            transpose: false,
        });
        self
    }

    /// Adds `(left·var·right)ᵀ` to block `(row, col)`.
    pub fn term_t(mut self, row: usize, col: usize, var: &str, left: Matrix, right: Matrix) -> Self {
        self.entry_mut(row, col).terms.push(Term {
            var: var.to_string(),
            left,
            right,
            transpose: true,
        });
        self
    }

    pub fn constant(mut self, row: usize, col: usize, value: Matrix) -> Self {
        let e = self.entry_mut(row, col);
        e.constant = Some(match e.constant.take() {
            Some(c) => &c + &value,
            None => value,
        });
        self
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.entries
            .iter()
            .flat_map(|e| e.terms.iter().map(|t| t.var.as_str()))
            .collect()
    }

    fn place(out: &mut Matrix, offs: &[usize], row: usize, col: usize, block: &Matrix) {
        if row == col {
            let s = SymMatrix::symmetrize(block);
            out.add_block(offs[row], offs[col], s.as_matrix());
        } else {
            out.add_block(offs[row], offs[col], block);
            out.add_block(offs[col], offs[row], &block.transpose());
        }
    }

    /// Evaluates only the constant part `F0`.
    pub fn constant_term(&self) -> SymMatrix {
        let n = self.order();
        let offs = self.offsets();
        let mut out = Matrix::zeros(n, n);
        for e in &self.entries {
            if let Some(c) = &e.constant {
                Self::place(&mut out, &offs, e.row, e.col, c);
            }
        }
        SymMatrix::symmetrize(&out)
    }

    /// `δ_strict` for this constraint.
    pub fn strict_margin(&self) -> f64 {
        STRICT_REL * (1.0 + self.constant_term().frobenius_norm())
    }

    /// Assembles the matrix at `values`.
    pub fn eval(&self, values: &Assignment) -> Result<SymMatrix, LmiError> {
        let n = self.order();
        let offs = self.offsets();
        let mut out = Matrix::zeros(n, n);
        for e in &self.entries {
            let (br, bc) = (self.block_orders[e.row], self.block_orders[e.col]);
            let mut block = e.constant.clone().unwrap_or_else(|| Matrix::zeros(br, bc));
            for t in &e.terms {
                let v = values
                    .get(&t.var)
                    .ok_or_else(|| LmiError::MissingValue(t.var.clone()))?;
                let vm = v.as_matrix(t.left.cols());
                let prod = t
                    .left
                    .matmul(&vm)
                    .and_then(|lv| lv.matmul(&t.right))
                    .map_err(|e| LmiError::Dimension(format!("{} {}: {e}", self.name, t.var)))?;
                let prod = if t.transpose { prod.transpose() } else { prod };
                if prod.shape() != (br, bc) {
                    return Err(LmiError::Dimension(format!(
                        "{}: term in {} at block ({}, {}) is {}x{}, block is {br}x{bc}",
                        self.name,
                        t.var,
                        e.row,
                        e.col,
                        prod.rows(),
                        prod.cols()
                    )));
                }
                block = &block + &prod;
            }
            Self::place(&mut out, &offs, e.row, e.col, &block);
        }
        Ok(SymMatrix::symmetrize(&out))
    }
}

/// Decision variables plus inequality constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub name: String,
    pub variables: Vec<DecisionVariable>,
    pub constraints: Vec<AffineLmi>,
}

impl LmiProblem {
    pub fn variable(&self, name: &str) -> Option<&DecisionVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Checks declarations and every term's dimensions against its block.
    pub fn validate(&self) -> Result<(), LmiError> {
        let mut seen = BTreeSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                return Err(LmiError::DuplicateVariable(v.name.clone()));
            }
        }
        for c in &self.constraints {
            for e in &c.entries {
                if e.row >= c.block_orders.len() || e.col >= c.block_orders.len() {
                    return Err(LmiError::Dimension(format!(
                        "{}: block ({}, {}) outside a {}-block grid",
                        c.name,
                        e.row,
                        e.col,
                        c.block_orders.len()
                    )));
                }
                let (br, bc) = (c.block_orders[e.row], c.block_orders[e.col]);
                if let Some(k) = &e.constant {
                    if k.shape() != (br, bc) {
                        return Err(LmiError::Dimension(format!(
                            "{}: constant at ({}, {}) has wrong shape",
                            c.name, e.row, e.col
                        )));
                    }
                }
                for t in &e.terms {
                    let var = self.variable(&t.var).ok_or_else(|| LmiError::UnknownVariable {
                        constraint: c.name.clone(),
                        var: t.var.clone(),
                    })?;
                    let (vr, vc) = match var.shape {
                        VarShape::Scalar => (t.left.cols(), t.left.cols()),
                        ref s => s.dims(),
                    };
                    let (out_r, out_c) = if t.transpose {
                        (t.right.cols(), t.left.rows())
                    } else {
                        (t.left.rows(), t.right.cols())
                    };
                    if t.left.cols() != vr || t.right.rows() != vc || (out_r, out_c) != (br, bc) {
                        return Err(LmiError::Dimension(format!(
                            "{}: term in {} at block ({}, {}) does not fit",
                            c.name, t.var, e.row, e.col
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that `a` covers every variable with a conforming value.
    pub fn check_shapes(&self, a: &Assignment) -> Result<(), LmiError> {
        for v in &self.variables {
            let value = a.get(&v.name).ok_or_else(|| LmiError::MissingValue(v.name.clone()))?;
            value.conforms(&v.shape).map_err(|reason| LmiError::ShapeMismatch {
                name: v.name.clone(),
                reason,
            })?;
        }
        Ok(())
    }
}

/// Block-diagonal state partition and delays shared by all assemblies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n1: usize,
    pub n2: usize,
    pub d_h: usize,
    pub d_v: usize,
}

impl StateLayout {
    pub fn of(sys: &SwitchedRoesserSystem) -> Self {
        Self {
            n1: sys.n1,
            n2: sys.n2,
            d_h: sys.d_h,
            d_v: sys.d_v,
        }
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// Diagonal of `diag{rate^{d_h} I_h, rate^{d_v} I_v}`.
    pub fn delay_weights(&self, rate: f64) -> Vec<f64> {
        let wh = rate.powi(self.d_h as i32);
        let wv = rate.powi(self.d_v as i32);
        std::iter::repeat_n(wh, self.n1)
            .chain(std::iter::repeat_n(wv, self.n2))
            .collect()
    }
}

pub fn check_alpha(alpha: f64) -> Result<(), LmiError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(LmiError::Rate {
            name: "alpha",
            value: alpha,
            range: "(0, 1)",
        })
    }
}

pub fn check_beta(beta: f64) -> Result<(), LmiError> {
    if beta > 1.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(LmiError::Rate {
            name: "beta",
            value: beta,
            range: "(1, ∞)",
        })
    }
}

fn check_square(name: &str, m: &Matrix, n: usize) -> Result<(), LmiError> {
    if m.shape() != (n, n) {
        return Err(LmiError::Dimension(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// `[Q − rate·P, 0, AᵀP; ∗, −ΛQ, A_dᵀP; ∗, ∗, −P] ≺ 0` in `(P, Q)`.
fn assemble_analysis(
    name: &str,
    a: &Matrix,
    a_d: &Matrix,
    rate: f64,
    layout: StateLayout,
    structure: Structure,
) -> Result<LmiProblem, LmiError> {
    let n = layout.n();
    check_square("A", a, n)?;
    check_square("A_d", a_d, n)?;
    let i = Matrix::identity(n);
    let lambda = Matrix::diag(&layout.delay_weights(rate));
    let shape = structure.shape(layout.n1, layout.n2);
    let lmi = AffineLmi::new(name, vec![n, n, n])
        .term(0, 0, "Q", i.clone(), i.clone())
        .term(0, 0, "P", i.scale(-rate), i.clone())
        .term(1, 1, "Q", lambda.scale(-1.0), i.clone())
        .term(2, 0, "P", i.clone(), a.clone())
        .term(2, 1, "P", i.clone(), a_d.clone())
        .term(2, 2, "P", i.scale(-1.0), i.clone());
    Ok(LmiProblem {
        name: name.to_string(),
        variables: vec![
            DecisionVariable {
                name: "P".into(),
                shape: shape.clone(),
                positive: true,
            },
            DecisionVariable {
                name: "Q".into(),
                shape,
                positive: true,
            },
        ],
        constraints: vec![lmi],
    })
}

/// α-contraction inequality for the delayed Roesser system `(A, A_d)`.
pub fn assemble_lemma3(
    a: &Matrix,
    a_d: &Matrix,
    alpha: f64,
    layout: StateLayout,
    structure: Structure,
) -> Result<LmiProblem, LmiError> {
    check_alpha(alpha)?;
    assemble_analysis("contraction", a, a_d, alpha, layout, structure)
}

/// β-growth-cap inequality, same layout with `Λ2`.
pub fn assemble_lemma4(
    a: &Matrix,
    a_d: &Matrix,
    beta: f64,
    layout: StateLayout,
    structure: Structure,
) -> Result<LmiProblem, LmiError> {
    check_beta(beta)?;
    assemble_analysis("growth", a, a_d, beta, layout, structure)
}

/// Variable names used by the synthesis problems (modes are 1-based).
pub mod names {
    pub fn x(k: usize) -> String {
        format!("X{}", k + 1)
    }
    pub fn y(k: usize) -> String {
        format!("Y{}", k + 1)
    }
    pub fn w(k: usize) -> String {
        format!("W{}", k + 1)
    }
    pub fn eps(k: usize) -> String {
        format!("eps{}", k + 1)
    }
    pub fn x_pair(k: usize, l: usize) -> String {
        format!("X{}{}", k + 1, l + 1)
    }
    pub fn y_pair(k: usize, l: usize) -> String {
        format!("Y{}{}", k + 1, l + 1)
    }
    pub fn eps_pair(k: usize, l: usize) -> String {
        format!("eps{}{}", k + 1, l + 1)
    }
}

fn pd_var(name: String, shape: VarShape) -> DecisionVariable {
    DecisionVariable {
        name,
        shape,
        positive: true,
    }
}

/// Matched-period synthesis inequality for mode `k` in `(X^k, Y^k, W^k, ε_k)`.
///
/// Block orders `[n, n, n, n, p]`; only the lower triangle is stored.
pub fn assemble_thm1_matched(
    sys: &SwitchedRoesserSystem,
    k: usize,
    alpha: f64,
    structure: Structure,
) -> Result<LmiProblem, LmiError> {
    check_alpha(alpha)?;
    sys.check()?;
    let mode = sys.mode(k)?;
    let layout = StateLayout::of(sys);
    let (n, p, q) = (sys.n(), sys.p, sys.q);
    let i = Matrix::identity(n);
    let ip = Matrix::identity(p);
    let lambda = Matrix::diag(&layout.delay_weights(alpha));
    let (x, y, w, e) = (names::x(k), names::y(k), names::w(k), names::eps(k));

    let lmi = AffineLmi::new(format!("matched[{}]", k + 1), vec![n, n, n, n, p])
        .term(0, 0, &x, i.scale(-alpha), i.clone())
        .term(1, 1, &y, lambda.scale(-1.0), i.clone())
        .term(2, 0, &x, mode.a.clone(), i.clone())
        .term(2, 0, &w, mode.b.clone(), i.clone())
        .term(2, 1, &y, mode.a_d.clone(), i.clone())
        .term(2, 2, &x, i.scale(-1.0), i.clone())
        .term(2, 2, &e, mode.h.clone(), mode.h.transpose())
        .term(3, 0, &x, i.clone(), i.clone())
        .term(3, 3, &y, i.scale(-1.0), i.clone())
        .term(4, 0, &x, mode.e1.clone(), i.clone())
        .term(4, 0, &w, mode.e3.clone(), i.clone())
        .term(4, 1, &y, mode.e2.clone(), i.clone())
        .term(4, 4, &e, ip.scale(-1.0), ip.clone());

    let shape = structure.shape(sys.n1, sys.n2);
    Ok(LmiProblem {
        name: format!("matched mode {}", k + 1),
        variables: vec![
            pd_var(x, shape.clone()),
            pd_var(y, shape),
            DecisionVariable {
                name: w,
                shape: VarShape::Full { rows: q, cols: n },
                positive: false,
            },
            pd_var(e, VarShape::Scalar),
        ],
        constraints: vec![lmi],
    })
}

fn fold_gain(sys: &SwitchedRoesserSystem, l: usize, gain: &Matrix) -> Result<(Matrix, Matrix), LmiError> {
    let mode = sys.mode(l)?;
    if gain.shape() != (sys.q, sys.n()) {
        return Err(LmiError::Dimension(format!(
            "gain is {}x{}, expected {}x{}",
            gain.rows(),
            gain.cols(),
            sys.q,
            sys.n()
        )));
    }
    let a_cl = &mode.a + &(&mode.b * gain);
    let e_cl = &mode.e1 + &(&mode.e3 * gain);
    Ok((a_cl, e_cl))
}

/// Mismatched-period inequality: plant in mode `l`, controller still using
/// `gain` (mode `k`'s). Variables `(X^{kl}, Y^{kl}, ε_{kl})`; `A^l + B^l·K^k`
/// is folded into one fixed matrix so the expression is affine.
pub fn assemble_thm1_mismatched(
    sys: &SwitchedRoesserSystem,
    k: usize,
    l: usize,
    gain: &Matrix,
    beta: f64,
    structure: Structure,
) -> Result<LmiProblem, LmiError> {
    check_beta(beta)?;
    sys.check()?;
    sys.mode(k)?;
    let mode = sys.mode(l)?;
    let (a_cl, e_cl) = fold_gain(sys, l, gain)?;
    let layout = StateLayout::of(sys);
    let (n, p) = (sys.n(), sys.p);
    let i = Matrix::identity(n);
    let ip = Matrix::identity(p);
    let lambda = Matrix::diag(&layout.delay_weights(beta));
    let (x, y, e) = (names::x_pair(k, l), names::y_pair(k, l), names::eps_pair(k, l));

    let lmi = AffineLmi::new(format!("mismatched[{}->{}]", k + 1, l + 1), vec![n, n, n, n, p])
        .term(0, 0, &x, i.scale(-beta), i.clone())
        .term(1, 1, &y, lambda.scale(-1.0), i.clone())
        .term(2, 0, &x, a_cl, i.clone())
        .term(2, 1, &y, mode.a_d.clone(), i.clone())
        .term(2, 2, &x, i.scale(-1.0), i.clone())
        .term(2, 2, &e, mode.h.clone(), mode.h.transpose())
        .term(3, 0, &x, i.clone(), i.clone())
        .term(3, 3, &y, i.scale(-1.0), i.clone())
        .term(4, 0, &x, e_cl, i.clone())
        .term(4, 1, &y, mode.e2.clone(), i.clone())
        .term(4, 4, &e, ip.scale(-1.0), ip.clone());

    let shape = structure.shape(sys.n1, sys.n2);
    Ok(LmiProblem {
        name: format!("mismatched pair {}->{}", k + 1, l + 1),
        variables: vec![pd_var(x, shape.clone()), pd_var(y, shape), pd_var(e, VarShape::Scalar)],
        constraints: vec![lmi],
    })
}

fn require_delay_free(sys: &SwitchedRoesserSystem) -> Result<(), LmiError> {
    if sys.modes.iter().all(|m| m.a_d.is_zero() && m.e2.is_zero()) {
        Ok(())
    } else {
        Err(LmiError::Dimension(
            "delay-free assembly needs zero A_d and E2 in every mode".into(),
        ))
    }
}

/// Delay-free matched inequality in `(X^k, W^k, ε_k)`, blocks `[n, n, p]`.
pub fn assemble_corollary1_matched(
    sys: &SwitchedRoesserSystem,
    k: usize,
    alpha: f64,
    structure: Structure,
) -> Result<LmiProblem, LmiError> {
    check_alpha(alpha)?;
    sys.check()?;
    require_delay_free(sys)?;
    let mode = sys.mode(k)?;
    let (n, p, q) = (sys.n(), sys.p, sys.q);
    let i = Matrix::identity(n);
    let ip = Matrix::identity(p);
    let (x, w, e) = (names::x(k), names::w(k), names::eps(k));
    let lmi = AffineLmi::new(format!("matched-delay-free[{}]", k + 1), vec![n, n, p])
        .term(0, 0, &x, i.scale(-alpha), i.clone())
        .term(1, 0, &x, mode.a.clone(), i.clone())
        .term(1, 0, &w, mode.b.clone(), i.clone())
        .term(1, 1, &x, i.scale(-1.0), i.clone())
        .term(1, 1, &e, mode.h.clone(), mode.h.transpose())
        .term(2, 0, &x, mode.e1.clone(), i.clone())
        .term(2, 0, &w, mode.e3.clone(), i.clone())
        .term(2, 2, &e, ip.scale(-1.0), ip.clone());
    Ok(LmiProblem {
        name: format!("delay-free matched mode {}", k + 1),
        variables: vec![
            pd_var(x, structure.shape(sys.n1, sys.n2)),
            DecisionVariable {
                name: w,
                shape: VarShape::Full { rows: q, cols: n },
                positive: false,
            },
            pd_var(e, VarShape::Scalar),
        ],
        constraints: vec![lmi],
    })
}

/// Delay-free mismatched inequality in `(X^{kl}, ε_{kl})`.
pub fn assemble_corollary1_mismatched(
    sys: &SwitchedRoesserSystem,
    k: usize,
    l: usize,
    gain: &Matrix,
    beta: f64,
    structure: Structure,
) -> Result<LmiProblem, LmiError> {
    check_beta(beta)?;
    sys.check()?;
    require_delay_free(sys)?;
    sys.mode(k)?;
    let mode = sys.mode(l)?;
    let (a_cl, e_cl) = fold_gain(sys, l, gain)?;
    let (n, p) = (sys.n(), sys.p);
    let i = Matrix::identity(n);
    let ip = Matrix::identity(p);
    let (x, e) = (names::x_pair(k, l), names::eps_pair(k, l));
    let lmi = AffineLmi::new(format!("mismatched-delay-free[{}->{}]", k + 1, l + 1), vec![n, n, p])
        .term(0, 0, &x, i.scale(-beta), i.clone())
        .term(1, 0, &x, a_cl, i.clone())
        .term(1, 1, &x, i.scale(-1.0), i.clone())
        .term(1, 1, &e, mode.h.clone(), mode.h.transpose())
        .term(2, 0, &x, e_cl, i.clone())
        .term(2, 2, &e, ip.scale(-1.0), ip.clone());
    Ok(LmiProblem {
        name: format!("delay-free mismatched pair {}->{}", k + 1, l + 1),
        variables: vec![pd_var(x, structure.shape(sys.n1, sys.n2)), pd_var(e, VarShape::Scalar)],
        constraints: vec![lmi],
    })
}

fn sym_part(m: &Matrix) -> Matrix {
    SymMatrix::symmetrize(m).into_matrix()
}

/// Numeric analysis-form matrix
/// `[Q − rate·P, 0, A_clᵀP; ∗, −ΛQ, A_dᵀP; ∗, ∗, −P]` for a realized closed loop.
pub fn assemble_closedloop_analysis(
    a_cl: &Matrix,
    a_d: &Matrix,
    p: &SymMatrix,
    q: &SymMatrix,
    rate: f64,
    weights: &[f64],
) -> Result<SymMatrix, LmiError> {
    let n = p.order();
    check_square("A_cl", a_cl, n)?;
    check_square("A_d", a_d, n)?;
    if q.order() != n || weights.len() != n {
        return Err(LmiError::Dimension("P, Q and weights must share the order".into()));
    }
    let pm = p.as_matrix();
    let lambda = Matrix::diag(weights);
    let mut out = Matrix::zeros(3 * n, 3 * n);
    out.set_block(0, 0, &(q.as_matrix() - &pm.scale(rate)));
    out.set_block(n, n, &sym_part(&(&lambda * q.as_matrix())).scale(-1.0));
    let pa = pm * a_cl;
    let pad = pm * a_d;
    out.set_block(2 * n, 0, &pa);
    out.set_block(0, 2 * n, &pa.transpose());
    out.set_block(2 * n, n, &pad);
    out.set_block(n, 2 * n, &pad.transpose());
    out.set_block(2 * n, 2 * n, &pm.scale(-1.0));
    Ok(SymMatrix::symmetrize(&out))
}

/// Two-block Schur form `[Φ11, Φ12; Φ12ᵀ, Φ22]` with
/// `Φ11 = Q − rate·P + AᵀPA`, `Φ12 = AᵀPA_d`, `Φ22 = A_dᵀPA_d − ΛQ`.
pub fn schur_expand(
    a: &Matrix,
    a_d: &Matrix,
    p: &SymMatrix,
    q: &SymMatrix,
    rate: f64,
    weights: &[f64],
) -> Result<SymMatrix, LmiError> {
    let n = p.order();
    check_square("A", a, n)?;
    check_square("A_d", a_d, n)?;
    if q.order() != n || weights.len() != n {
        return Err(LmiError::Dimension("P, Q and weights must share the order".into()));
    }
    crate::numerics::cholesky(p)?;
    let pm = p.as_matrix();
    let at = a.transpose();
    let adt = a_d.transpose();
    let lambda = Matrix::diag(weights);
    let phi11 = &(q.as_matrix() - &pm.scale(rate)) + &(&(&at * pm) * a);
    let phi12 = &(&at * pm) * a_d;
    let phi22 = &(&(&adt * pm) * a_d) - &sym_part(&(&lambda * q.as_matrix()));
    let mut out = Matrix::zeros(2 * n, 2 * n);
    out.set_block(0, 0, &phi11);
    out.set_block(0, n, &phi12);
    out.set_block(n, 0, &phi12.transpose());
    out.set_block(n, n, &phi22);
    Ok(SymMatrix::symmetrize(&out))
}

/// Outcome of the uncertainty-elimination check.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationCheck {
    /// `λ_max(X0 + ε·U·Uᵀ + ε⁻¹·WᵀW)`.
    pub majorized_lambda_max: f64,
    pub majorized_holds: bool,
    /// Worst `λ_max(X0 + U·V·W + WᵀVᵀUᵀ)` over the samples.
    pub sampled_worst_lambda_max: f64,
    pub sampled_all_hold: bool,
    pub samples: usize,
}

/// Checks the ε-majorized form and the sampled uncertain form.
///
/// `x0` is n×n, `u` n×a, `w` b×n and every sample `V` a×b with `VᵀV ⪯ I`.
pub fn verify_lemma2_elimination(
    x0: &SymMatrix,
    u: &Matrix,
    w: &Matrix,
    epsilon: f64,
    samples: &[Matrix],
) -> Result<EliminationCheck, LmiError> {
    if !(epsilon > 0.0) {
        return Err(LmiError::Rate {
            name: "epsilon",
            value: epsilon,
            range: "(0, ∞)",
        });
    }
    let n = x0.order();
    if u.rows() != n || w.cols() != n {
        return Err(LmiError::Dimension("U must be n×a and W b×n".into()));
    }
    let x = x0.as_matrix();
    let major = &(x + &(u * &u.transpose()).scale(epsilon)) + &(&w.transpose() * w).scale(1.0 / epsilon);
    let majorized_lambda_max = SymMatrix::symmetrize(&major).lambda_max()?;
    let mut worst = f64::NEG_INFINITY;
    for v in samples {
        if v.shape() != (u.cols(), w.rows()) {
            return Err(LmiError::Dimension("sample V must be a×b".into()));
        }
        let uvw = &(u * v) * w;
        let m = &(x + &uvw) + &uvw.transpose();
        worst = worst.max(SymMatrix::symmetrize(&m).lambda_max()?);
    }
    if samples.is_empty() {
        worst = x0.lambda_max()?;
    }
    Ok(EliminationCheck {
        majorized_lambda_max,
        majorized_holds: majorized_lambda_max < 0.0,
        sampled_worst_lambda_max: worst,
        sampled_all_hold: worst < 0.0,
        samples: samples.len(),
    })
}

/// Random a×b matrices with spectral norm at most one. Every fourth sample
/// sits exactly on the boundary `‖V‖₂ = 1`.
pub fn sample_contractions<R: Rng>(rows: usize, cols: usize, count: usize, rng: &mut R) -> Vec<Matrix> {
    (0..count)
        .map(|s| {
            let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = Matrix::from_row_major(rows, cols, data).expect("sized");
            let norm = crate::model::uncertainty_gain(&m).unwrap_or(0.0).sqrt();
            if norm == 0.0 {
                return m;
            }
            let target = if s % 4 == 0 { 1.0 } else { rng.gen_range(0.0..1.0) };
            m.scale(target / norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numerics::is_negative_definite;

    fn layout11(d_h: usize, d_v: usize) -> StateLayout {
        StateLayout { n1: 1, n2: 1, d_h, d_v }
    }

    fn pq(p: SymMatrix, q: SymMatrix) -> Assignment {
        Assignment::new().with("P", Value::Sym(p)).with("Q", Value::Sym(q))
    }

    #[test]
    fn lemma3_decoupled_diagonal() {
        let alpha = 0.5;
        let lay = layout11(2, 3);
        let z = Matrix::zeros(2, 2);
        let prob = assemble_lemma3(&z, &z, alpha, lay, Structure::BlockDiagonal).unwrap();
        prob.validate().unwrap();
        let m = prob.constraints[0]
            .eval(&pq(SymMatrix::identity(2), SymMatrix::identity(2).scale(alpha / 2.0)))
            .unwrap();
        let w = lay.delay_weights(alpha);
        let expected = [
            -alpha / 2.0,
            -alpha / 2.0,
            -w[0] * alpha / 2.0,
            -w[1] * alpha / 2.0,
            -1.0,
            -1.0,
        ];
        assert_eq!(m.as_matrix(), &Matrix::diag(&expected));
        assert!(is_negative_definite(&m, 0.0));
    }

    #[test]
    fn lemma3_scalar_blocks_instance() {
        let a = Matrix::identity(2).scale(0.5);
        let z = Matrix::zeros(2, 2);
        let prob = assemble_lemma3(&a, &z, 0.9, layout11(1, 1), Structure::BlockDiagonal).unwrap();
        let m = prob.constraints[0]
            .eval(&pq(SymMatrix::identity(2), SymMatrix::identity(2).scale(0.1)))
            .unwrap();
        // decouples into [0.1−0.9, 0, 0.5; 0, −0.09, 0; 0.5, 0, −1] per state coordinate
        let block = SymMatrix::new(Matrix::from_rows(&[
            [-0.8, 0.0, 0.5],
            [0.0, -0.09, 0.0],
            [0.5, 0.0, -1.0],
        ]))
        .unwrap();
        let lm = m.lambda_max().unwrap();
        assert!((lm - block.lambda_max().unwrap()).abs() < 1e-12);
        assert!(lm < 0.0);
    }

    #[test]
    fn rate_preconditions() {
        let z = Matrix::zeros(2, 2);
        let lay = layout11(1, 1);
        assert!(matches!(
            assemble_lemma3(&z, &z, 1.0, lay, Structure::BlockDiagonal),
            Err(LmiError::Rate { name: "alpha", .. })
        ));
        assert!(matches!(
            assemble_lemma4(&z, &z, 0.9, lay, Structure::BlockDiagonal),
            Err(LmiError::Rate { name: "beta", .. })
        ));
        assert!(assemble_lemma4(&z, &z, 1.2, lay, Structure::BlockDiagonal).is_ok());
    }

    #[test]
    fn lemma4_mirrors_lemma3_layout() {
        let a = Matrix::identity(2).scale(0.5);
        let z = Matrix::zeros(2, 2);
        let prob = assemble_lemma4(&a, &z, 1.2, layout11(1, 1), Structure::BlockDiagonal).unwrap();
        let m = prob.constraints[0]
            .eval(&pq(SymMatrix::identity(2), SymMatrix::identity(2).scale(0.1)))
            .unwrap();
        assert!((m[(0, 0)] - (0.1 - 1.2)).abs() < 1e-15);
        assert!((m[(2, 2)] + 1.2 * 0.1).abs() < 1e-15);
        assert!(m.lambda_max().unwrap() < 0.0);
    }

    fn printed_matched(k: usize) -> Assignment {
        let s = fixtures::sec4_printed_solution();
        Assignment::new()
            .with(names::x(k), Value::Sym(s.x[k].clone()))
            .with(names::y(k), Value::Sym(s.y[k].clone()))
            .with(names::w(k), Value::Full(s.w[k].clone()))
            .with(names::eps(k), Value::Scalar(s.eps[k]))
    }

    #[test]
    fn printed_matched_solution_is_negative_definite() {
        let sys = fixtures::sec4_system();
        for k in 0..2 {
            let prob = assemble_thm1_matched(&sys, k, 0.6, Structure::Full).unwrap();
            prob.validate().unwrap();
            let a = printed_matched(k);
            prob.check_shapes(&a).unwrap();
            let lm = prob.constraints[0].eval(&a).unwrap().lambda_max().unwrap();
            assert!(lm <= ROUNDING_SLACK, "mode {k}: {lm}");
        }
    }

    #[test]
    fn printed_x_is_not_block_diagonal() {
        let sys = fixtures::sec4_system();
        let prob = assemble_thm1_matched(&sys, 0, 0.6, Structure::BlockDiagonal).unwrap();
        assert!(matches!(
            prob.check_shapes(&printed_matched(0)),
            Err(LmiError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn matched_diagonal_blocks_only() {
        let mut sys = fixtures::sec4_system();
        for m in &mut sys.modes {
            for mat in [&mut m.a, &mut m.a_d, &mut m.b, &mut m.h, &mut m.e1, &mut m.e2, &mut m.e3] {
                *mat = Matrix::zeros(mat.rows(), mat.cols());
            }
        }
        let alpha = 0.6;
        let prob = assemble_thm1_matched(&sys, 0, alpha, Structure::BlockDiagonal).unwrap();
        let a = Assignment::new()
            .with("X1", Value::Sym(SymMatrix::identity(2)))
            .with("Y1", Value::Sym(SymMatrix::identity(2)))
            .with("W1", Value::Full(Matrix::zeros(2, 2)))
            .with("eps1", Value::Scalar(1.0));
        let m = prob.constraints[0].eval(&a).unwrap();
        // diag blocks −αI, −Λ1, −I, −I, −I coupled only through the (4,1) = X entry
        let mut brute = Matrix::zeros(10, 10);
        let w = StateLayout::of(&sys).delay_weights(alpha);
        for i in 0..2 {
            brute[(i, i)] = -alpha;
            brute[(2 + i, 2 + i)] = -w[i];
            brute[(4 + i, 4 + i)] = -1.0;
            brute[(6 + i, 6 + i)] = -1.0;
            brute[(8 + i, 8 + i)] = -1.0;
            brute[(6 + i, i)] = 1.0;
            brute[(i, 6 + i)] = 1.0;
        }
        assert_eq!(m.as_matrix(), &brute);
    }

    #[test]
    fn printed_mismatched_solution_is_negative_definite() {
        let sys = fixtures::sec4_system();
        let s = fixtures::sec4_printed_solution();
        for (idx, &((k, l), ref xkl)) in s.x_pair.iter().enumerate() {
            let gain = &s.w[k] * &crate::numerics::inverse(s.x[k].as_matrix()).unwrap();
            let prob = assemble_thm1_mismatched(&sys, k, l, &gain, 1.2, Structure::Full).unwrap();
            prob.validate().unwrap();
            let a = Assignment::new()
                .with(names::x_pair(k, l), Value::Sym(xkl.clone()))
                .with(names::y_pair(k, l), Value::Sym(s.y_pair[idx].1.clone()))
                .with(names::eps_pair(k, l), Value::Scalar(s.eps_pair[idx].1));
            let lm = prob.constraints[0].eval(&a).unwrap().lambda_max().unwrap();
            assert!(lm <= ROUNDING_SLACK, "pair {k}->{l}: {lm}");
        }
    }

    #[test]
    fn mismatched_with_zero_gain_matches_lemma4_synthesis_form() {
        let mut sys = fixtures::sec4_system();
        for m in &mut sys.modes {
            for mat in [&mut m.h, &mut m.e1, &mut m.e2, &mut m.e3] {
                *mat = Matrix::zeros(mat.rows(), mat.cols());
            }
        }
        let beta = 1.2;
        let prob =
            assemble_thm1_mismatched(&sys, 0, 1, &Matrix::zeros(2, 2), beta, Structure::BlockDiagonal)
                .unwrap();
        let x = SymMatrix::diag(&[0.7, 0.4]);
        let y = SymMatrix::diag(&[1.3, 0.9]);
        let a = Assignment::new()
            .with("X12", Value::Sym(x.clone()))
            .with("Y12", Value::Sym(y.clone()))
            .with("eps12", Value::Scalar(0.5));
        let m = prob.constraints[0].eval(&a).unwrap();
        // Block-by-block: the growth form of mode 2 after the diag{X, Y, X}
        // congruence, with the Schur-expanded (4,4) block.
        let al = &sys.modes[1].a;
        let ad = &sys.modes[1].a_d;
        let w = StateLayout::of(&sys).delay_weights(beta);
        let n = 2;
        let blk = |r: usize, c: usize| m.as_matrix().block(r * n, c * n, n, n);
        assert_eq!(blk(0, 0), x.as_matrix().scale(-beta));
        assert_eq!(blk(1, 1), Matrix::diag(&[-w[0] * 1.3, -w[1] * 0.9]));
        assert!((&blk(2, 0) - &(al * x.as_matrix())).max_abs() < 1e-15);
        assert!((&blk(2, 1) - &(ad * y.as_matrix())).max_abs() < 1e-15);
        assert_eq!(blk(2, 2), x.as_matrix().scale(-1.0));
        assert_eq!(blk(3, 0), x.as_matrix().clone());
        assert_eq!(blk(3, 3), y.as_matrix().scale(-1.0));
        assert!(blk(4, 0).is_zero() && blk(4, 1).is_zero());
        assert_eq!(blk(4, 4), Matrix::identity(2).scale(-0.5));
    }

    #[test]
    fn corollary_is_thm1_without_delay_rows() {
        let sys = fixtures::sec4_system().without_delay();
        let printed = printed_matched(0);
        let full = assemble_thm1_matched(&sys, 0, 0.6, Structure::Full).unwrap();
        let cor = assemble_corollary1_matched(&sys, 0, 0.6, Structure::Full).unwrap();
        cor.validate().unwrap();
        let m18 = full.constraints[0].eval(&printed).unwrap();
        let m42 = cor.constraints[0].eval(&printed).unwrap();
        let keep = [0, 1, 4, 5, 8, 9];
        assert_eq!(m18.principal(&keep), m42);

        let gain = fixtures::sec4_printed_solution().k[0].clone();
        let full = assemble_thm1_mismatched(&sys, 0, 1, &gain, 1.2, Structure::Full).unwrap();
        let cor = assemble_corollary1_mismatched(&sys, 0, 1, &gain, 1.2, Structure::Full).unwrap();
        let a = Assignment::new()
            .with("X12", Value::Sym(SymMatrix::diag(&[0.6, 0.5])))
            .with("Y12", Value::Sym(SymMatrix::identity(2)))
            .with("eps12", Value::Scalar(0.9));
        assert_eq!(
            full.constraints[0].eval(&a).unwrap().principal(&keep),
            cor.constraints[0].eval(&a).unwrap()
        );
    }

    #[test]
    fn corollary_rejects_delayed_system() {
        let sys = fixtures::sec4_system();
        assert!(assemble_corollary1_matched(&sys, 0, 0.6, Structure::Full).is_err());
    }

    #[test]
    fn corollary_zero_system_is_negative_definite() {
        let mut sys = fixtures::sec4_system().without_delay();
        for m in &mut sys.modes {
            for mat in [&mut m.a, &mut m.b, &mut m.h, &mut m.e1, &mut m.e3] {
                *mat = Matrix::zeros(mat.rows(), mat.cols());
            }
        }
        let prob = assemble_corollary1_matched(&sys, 0, 0.6, Structure::BlockDiagonal).unwrap();
        let a = Assignment::new()
            .with("X1", Value::Sym(SymMatrix::identity(2)))
            .with("W1", Value::Full(Matrix::zeros(2, 2)))
            .with("eps1", Value::Scalar(1.0));
        assert!(is_negative_definite(&prob.constraints[0].eval(&a).unwrap(), 0.0));
    }

    #[test]
    fn closedloop_analysis_zero_loop() {
        let alpha = 0.6;
        let w = layout11(2, 3).delay_weights(alpha);
        let z = Matrix::zeros(2, 2);
        let m = assemble_closedloop_analysis(
            &z,
            &z,
            &SymMatrix::identity(2),
            &SymMatrix::identity(2).scale(alpha / 2.0),
            alpha,
            &w,
        )
        .unwrap();
        assert!(is_negative_definite(&m, 0.0));
    }

    #[test]
    fn schur_expand_zero_dynamics() {
        let z = Matrix::zeros(2, 2);
        let p = SymMatrix::diag(&[2.0, 3.0]);
        let q = SymMatrix::diag(&[0.5, 0.25]);
        let w = [0.36, 0.216];
        let m = schur_expand(&z, &z, &p, &q, 0.6, &w).unwrap();
        let expected = Matrix::diag(&[0.5 - 1.2, 0.25 - 1.8, -0.36 * 0.5, -0.216 * 0.25]);
        assert!((m.as_matrix() - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn lemma2_cases() {
        let u = Matrix::identity(2);
        let w = Matrix::identity(2);
        let zero = Matrix::zeros(2, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples = sample_contractions(2, 2, 200, &mut rng);

        let x0 = SymMatrix::identity(2).scale(-1.0);
        let c = verify_lemma2_elimination(&x0, &zero, &zero, 1.0, &samples).unwrap();
        assert!(c.majorized_holds && c.sampled_all_hold);
        assert_eq!(c.majorized_lambda_max, -1.0);

        let c = verify_lemma2_elimination(&SymMatrix::identity(2).scale(-3.0), &u, &w, 1.0, &samples).unwrap();
        assert!((c.majorized_lambda_max + 1.0).abs() < 1e-12);
        assert!(c.majorized_holds && c.sampled_all_hold);
        assert!(c.sampled_worst_lambda_max <= -1.0 + 1e-12);

        let c = verify_lemma2_elimination(&SymMatrix::identity(2).scale(-0.5), &u, &w, 1.0, &samples).unwrap();
        assert!((c.majorized_lambda_max - 1.5).abs() < 1e-12);
        assert!(!c.majorized_holds);

        assert!(verify_lemma2_elimination(&x0, &u, &w, 0.0, &samples).is_err());
    }

    use rand::SeedableRng;

    #[test]
    fn contractions_are_admissible() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for v in sample_contractions(3, 2, 100, &mut rng) {
            assert!(crate::model::uncertainty_gain(&v).unwrap() <= 1.0 + 1e-12);
        }
    }
}
