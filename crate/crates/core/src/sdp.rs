//! Strict feasibility of [`LmiProblem`]s by spectral minimax.
//!
//! The problem is compiled to `F_c(θ) = F_c0 + Σ_k θ_k·G_ck` over the scalar
//! coordinates of all decision variables. The solver minimizes a
//! log-sum-exp smoothing of `max_c λ_max(F_c(θ))` by projected gradient
//! steps with Armijo backtracking; positive definite variables are projected
//! onto `[δ_pd, cap]` in eigenvalue. Restarts from scaled identities run
//! independently (concurrently with the `parallel` feature) and the best one
//! is reported.
//!
//! Infeasibility is only ever reported "at tolerance": the method is a
//! local first-order search, not a certificate.

use std::sync::atomic::{AtomicUsize, Ordering};

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lmi::{AffineLmi, Assignment, LmiError, LmiProblem, Value, VarShape};
use crate::numerics::{sym_eigs, Matrix, SymMatrix};
use crate::par;

pub const DELTA_PD: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Log-sum-exp sharpness.
    pub smoothing: f64,
    pub armijo: f64,
    pub delta_pd: f64,
    /// Eigenvalue cap on positive variables; also bounds scalars.
    pub cap: f64,
    /// Frobenius bound on unconstrained variables.
    pub full_cap: f64,
    pub stall_window: usize,
    pub stall_tol: f64,
    /// A restart stops once `max λ_max ≤ −target_margin`.
    pub target_margin: f64,
    /// Identity scales used by successive restarts (cycled).
    pub scales: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 20_000,
            smoothing: 1e3,
            armijo: 1e-4,
            delta_pd: DELTA_PD,
            cap: 1e1,
            full_cap: 1e2,
            stall_window: 200,
            stall_tol: 1e-6,
            target_margin: 1e-2,
            scales: vec![1.0, 0.1, 10.0, 0.01, 100.0, 0.3, 3.0, 30.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Feasible,
    InfeasibleAtTolerance,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub status: Status,
    /// Best point found (present for every status).
    pub assignment: Assignment,
    /// `−max_c λ_max(F_c)` at the assignment.
    pub margin: f64,
    /// Largest `δ_strict` over the constraints.
    pub required_margin: f64,
    pub iterations: usize,
    pub restart: usize,
    /// Best `max_c λ_max` so far, one entry per iteration of the chosen restart.
    pub history: Vec<f64>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

/// Result of substituting an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// `(constraint name, λ_max, δ_strict)`.
    pub constraints: Vec<(String, f64, f64)>,
    /// `(variable name, λ_min)` for positive variables (the value for scalars).
    pub positive: Vec<(String, f64)>,
}

impl MarginReport {
    pub fn worst_lambda_max(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_positive(&self) -> f64 {
        self.positive.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    /// Every constraint at `λ_max ≤ −factor·δ_strict` and positives at `≥ δ_pd`.
    pub fn strictly_feasible(&self, factor: f64, delta_pd: f64) -> bool {
        self.constraints.iter().all(|(_, l, d)| *l <= -factor * d)
            && self.positive.iter().all(|(_, m)| *m >= delta_pd)
    }
}

/// Exact margins of every constraint at `a`, evaluated block by block.
pub fn check_assignment(p: &LmiProblem, a: &Assignment) -> Result<MarginReport, LmiError> {
    p.check_shapes(a)?;
    let mut constraints = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let m = c.eval(a)?;
        constraints.push((c.name.clone(), m.lambda_max()?, c.strict_margin()));
    }
    let mut positive = Vec::new();
    for v in p.variables.iter().filter(|v| v.positive) {
        let min = match a.get(&v.name) {
            Some(Value::Scalar(s)) => *s,
            Some(Value::Sym(m)) => m.lambda_min()?,
            Some(Value::Full(m)) => SymMatrix::symmetrize(m).lambda_min()?,
            None => return Err(LmiError::MissingValue(v.name.clone())),
        };
        positive.push((v.name.clone(), min));
    }
    Ok(MarginReport {
        constraints,
        positive,
    })
}

/// Where a variable's coordinates live in `θ`.
#[derive(Debug, Clone)]
struct Slot {
    offset: usize,
    shape: VarShape,
    positive: bool,
}

#[derive(Debug, Clone)]
struct Compiled {
    dim: usize,
    slots: Vec<(String, Slot)>,
    /// Per constraint: `F0` and one `G_k` per coordinate (dense).
    f0: Vec<Matrix>,
    g: Vec<Vec<Matrix>>,
    strict: Vec<f64>,
}

fn sym_coords(orders: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut off = 0;
    for &b in orders {
        for i in 0..b {
            for j in i..b {
                out.push((off + i, off + j));
            }
        }
        off += b;
    }
    out
}

fn sym_orders(shape: &VarShape) -> Option<Vec<usize>> {
    match shape {
        VarShape::SymBlockDiag(o) => Some(o.clone()),
        VarShape::Sym(n) => Some(vec![*n]),
        _ => None,
    }
}

impl Compiled {
    fn new(p: &LmiProblem) -> Result<Self, LmiError> {
        p.validate()?;
        let mut slots = Vec::new();
        let mut dim = 0;
        for v in &p.variables {
            slots.push((
                v.name.clone(),
                Slot {
                    offset: dim,
                    shape: v.shape.clone(),
                    positive: v.positive,
                },
            ));
            dim += v.shape.dof();
        }
        let mut c = Self {
            dim,
            slots,
            f0: Vec::new(),
            g: Vec::new(),
            strict: Vec::new(),
        };
        let zero = c.assignment(&vec![0.0; dim]);
        for lmi in &p.constraints {
            let f0 = lmi.eval(&zero)?.into_matrix();
            let mut gs = Vec::with_capacity(dim);
            for k in 0..dim {
                let mut theta = vec![0.0; dim];
                theta[k] = 1.0;
                let fk = lmi.eval(&c.assignment(&theta))?.into_matrix();
                gs.push(&fk - &f0);
            }
            c.strict.push(lmi_strict(lmi));
            c.f0.push(f0);
            c.g.push(gs);
        }
        Ok(c)
    }

    fn assignment(&self, theta: &[f64]) -> Assignment {
        let mut a = Assignment::new();
        for (name, slot) in &self.slots {
            let t = &theta[slot.offset..slot.offset + slot.shape.dof()];
            let value = match &slot.shape {
                VarShape::Scalar => Value::Scalar(t[0]),
                VarShape::Full { rows, cols } => {
                    Value::Full(Matrix::from_row_major(*rows, *cols, t.to_vec()).expect("sized"))
                }
                shape => {
                    let orders = sym_orders(shape).expect("symmetric shape");
                    let n = orders.iter().sum();
                    let mut m = Matrix::zeros(n, n);
                    for (&(i, j), &x) in sym_coords(&orders).iter().zip(t) {
                        m[(i, j)] = x;
                        m[(j, i)] = x;
                    }
                    Value::Sym(SymMatrix::symmetrize(&m))
                }
            };
            a.set(name.clone(), value);
        }
        a
    }

    fn eval(&self, c: usize, theta: &[f64]) -> SymMatrix {
        let mut m = self.f0[c].clone();
        let out = m.as_mut_slice();
        for (k, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                for (o, g) in out.iter_mut().zip(self.g[c][k].as_slice()) {
                    *o += t * g;
                }
            }
        }
        SymMatrix::symmetrize(&m)
    }

    /// Projects `θ` onto the variable bounds in place.
    fn project(&self, theta: &mut [f64], cfg: &SolverConfig) {
        let lo = 2.0 * cfg.delta_pd;
        for (_, slot) in &self.slots {
            let t = &mut theta[slot.offset..slot.offset + slot.shape.dof()];
            match &slot.shape {
                VarShape::Scalar => {
                    if slot.positive {
                        t[0] = t[0].clamp(lo, cfg.cap);
                    } else {
                        t[0] = t[0].clamp(-cfg.full_cap, cfg.full_cap);
                    }
                }
                VarShape::Full { .. } => {
                    let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > cfg.full_cap {
                        t.iter_mut().for_each(|x| *x *= cfg.full_cap / norm);
                    }
                }
                shape => {
                    let orders = sym_orders(shape).expect("symmetric shape");
                    let (lo_b, hi_b) = if slot.positive {
                        (lo, cfg.cap)
                    } else {
                        (-cfg.cap, cfg.cap)
                    };
                    let mut pos = 0;
                    for &b in &orders {
                        let count = b * (b + 1) / 2;
                        project_sym_block(&mut t[pos..pos + count], b, lo_b, hi_b);
                        pos += count;
                    }
                }
            }
        }
    }

    fn initial(&self, scale: f64, perturb: Option<&mut ChaCha8Rng>) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim];
        for (_, slot) in &self.slots {
            let t = &mut theta[slot.offset..slot.offset + slot.shape.dof()];
            match &slot.shape {
                VarShape::Scalar => t[0] = if slot.positive { scale } else { 0.0 },
                VarShape::Full { .. } => {}
                shape => {
                    for (x, (i, j)) in t.iter_mut().zip(sym_coords(&sym_orders(shape).unwrap())) {
                        *x = if i == j { scale } else { 0.0 };
                    }
                }
            }
        }
        if let Some(rng) = perturb {
            for x in theta.iter_mut() {
                *x += 0.1 * scale * rng.gen_range(-1.0..1.0);
            }
        }
        theta
    }
}

fn lmi_strict(lmi: &AffineLmi) -> f64 {
    lmi.strict_margin()
}

fn project_sym_block(t: &mut [f64], b: usize, lo: f64, hi: f64) {
    let mut m = Matrix::zeros(b, b);
    let coords = sym_coords(&[b]);
    for (&(i, j), &x) in coords.iter().zip(t.iter()) {
        m[(i, j)] = x;
        m[(j, i)] = x;
    }
    let s = SymMatrix::symmetrize(&m);
    let Ok(eig) = sym_eigs(&s) else { return };
    if eig.values.iter().all(|&v| v >= lo && v <= hi) {
        return;
    }
    let mut r = Matrix::zeros(b, b);
    for (k, &v) in eig.values.iter().enumerate() {
        let v = v.clamp(lo, hi);
        let u = eig.vector(k);
        for i in 0..b {
            for j in 0..b {
                r[(i, j)] += v * u[i] * u[j];
            }
        }
    }
    for (&(i, j), x) in coords.iter().zip(t.iter_mut()) {
        *x = 0.5 * (r[(i, j)] + r[(j, i)]);
    }
}

/// Smoothed objective, its gradient and the exact `max λ_max`.
struct Evaluation {
    smooth: f64,
    grad: Vec<f64>,
    lambda_max: f64,
}

fn evaluate(c: &Compiled, theta: &[f64], beta_s: f64, want_grad: bool) -> Option<Evaluation> {
    let mut all = Vec::new();
    for k in 0..c.f0.len() {
        let m = c.eval(k, theta);
        let eig = sym_eigs(&m).ok()?;
        for (idx, &v) in eig.values.iter().enumerate() {
            all.push((k, idx, v, eig.vector(idx)));
        }
    }
    let top = all.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = all.iter().map(|e| (beta_s * (e.2 - top)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let smooth = top + total.ln() / beta_s;
    let mut grad = vec![0.0; c.dim];
    if want_grad {
        for ((k, _, _, u), w) in all.iter().zip(&weights) {
            let w = w / total;
            if w < 1e-14 {
                continue;
            }
            for (gk, g) in grad.iter_mut().zip(&c.g[*k]) {
                let gu = g.mul_vec(u);
                *gk += w * u.iter().zip(&gu).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    Some(Evaluation {
        smooth,
        grad,
        lambda_max: top,
    })
}

struct RunResult {
    theta: Vec<f64>,
    best: f64,
    iterations: usize,
    stalled: bool,
    history: Vec<f64>,
}

fn run(c: &Compiled, cfg: &SolverConfig, mut theta: Vec<f64>, target: f64, abort: &dyn Fn() -> bool) -> RunResult {
    c.project(&mut theta, cfg);
    let Some(mut cur) = evaluate(c, &theta, cfg.smoothing, true) else {
        return RunResult {
            theta,
            best: f64::INFINITY,
            iterations: 0,
            stalled: true,
            history: Vec::new(),
        };
    };
    let mut best = cur.lambda_max;
    let mut best_theta = theta.clone();
    let mut history = Vec::new();
    let mut step = 1.0f64;
    let mut stalled = false;
    let mut iterations = 0;
    for it in 0..cfg.max_iters {
        if abort() {
            break;
        }
        iterations = it + 1;
        // warm-started backtracking, never above 1.0
        let mut t = (2.0 * step).min(1.0);
        let mut accepted = None;
        while t > 1e-14 {
            let mut cand: Vec<f64> = theta.iter().zip(&cur.grad).map(|(x, g)| x - t * g).collect();
            c.project(&mut cand, cfg);
            let moved: f64 = cand.iter().zip(&theta).map(|(a, b)| (a - b) * (a - b)).sum();
            if moved == 0.0 {
                break;
            }
            if let Some(e) = evaluate(c, &cand, cfg.smoothing, false) {
                if e.smooth <= cur.smooth - cfg.armijo * moved / t {
                    accepted = Some(cand);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            stalled = true;
            history.push(best);
            break;
        };
        step = t;
        theta = next;
        cur = match evaluate(c, &theta, cfg.smoothing, true) {
            Some(e) => e,
            None => {
                stalled = true;
                history.push(best);
                break;
            }
        };
        if cur.lambda_max < best {
            best = cur.lambda_max;
            best_theta.clone_from(&theta);
        }
        history.push(best);
        if history.len() > cfg.stall_window {
            let old = history[history.len() - 1 - cfg.stall_window];
            let gain = old - best;
            if gain <= cfg.stall_tol * (1.0 + best.abs()) {
                stalled = true;
                break;
            }
            // at the current pace the strict margin is out of reach within the budget
            let needed = (best + target) / gain * cfg.stall_window as f64;
            if needed > (cfg.max_iters - iterations) as f64 {
                stalled = true;
                break;
            }
        }
        if best <= -target.max(cfg.target_margin) {
            break;
        }
    }
    RunResult {
        theta: best_theta,
        best,
        iterations,
        stalled,
        history,
    }
}

/// Searches for a strictly feasible point. Deterministic in `(p, seed, cfg)`.
pub fn solve_feasibility(p: &LmiProblem, seed: u64, cfg: &SolverConfig) -> Result<FeasibilityReport, LmiError> {
    let compiled = Compiled::new(p)?;
    let required = compiled.strict.iter().copied().fold(0.0, f64::max);
    let restarts = cfg.restarts.max(1);
    let start = |r: usize, abort: &dyn Fn() -> bool| {
        let scale = cfg.scales[r % cfg.scales.len().max(1)];
        let mut init = compiled.initial(scale, None);
        if r > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(r as u64));
            let amp = if r < cfg.scales.len() { 1e-3 } else { 1e-1 };
            for x in init.iter_mut() {
                *x += amp * scale * rng.gen_range(-1.0..1.0);
            }
        }
        run(&compiled, cfg, init, required, abort)
    };
    // A restart is abandoned once a lower-indexed one has reached the goal;
    // the lowest goal-reaching restart never is, so the choice is deterministic.
    let goal = -required.max(cfg.target_margin);
    let winner = AtomicUsize::new(usize::MAX);
    let runs = par::map_indexed(restarts, |r| {
        let result = start(r, &|| winner.load(Ordering::Relaxed) < r);
        if result.best <= goal {
            winner.fetch_min(r, Ordering::Relaxed);
        }
        result
    });
    let chosen_idx = runs.iter().position(|r| r.best <= goal).unwrap_or_else(|| {
        runs.iter()
            .enumerate()
            .min_by(|a, b| a.1.best.total_cmp(&b.1.best).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .expect("at least one restart")
    });
    let (restart, chosen) = (chosen_idx, &runs[chosen_idx]);
    let assignment = compiled.assignment(&chosen.theta);
    let check = check_assignment(p, &assignment)?;
    let feasible = check.constraints.iter().all(|(_, l, d)| *l <= -d)
        && check.min_positive() >= cfg.delta_pd;
    let status = if feasible {
        Status::Feasible
    } else if runs.iter().all(|r| r.stalled) {
        Status::InfeasibleAtTolerance
    } else {
        Status::IterationLimit
    };
    let margin = -check.worst_lambda_max();
    debug!(
        "{}: {:?} margin {:.3e} after {} iterations (restart {})",
        p.name, status, margin, chosen.iterations, restart
    );
    Ok(FeasibilityReport {
        status,
        assignment,
        margin,
        required_margin: required,
        iterations: chosen.iterations,
        restart,
        history: chosen.history.clone(),
    })
}
