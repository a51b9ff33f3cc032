//! Switching plans, wavefront simulation, the piecewise Lyapunov functional
//! and decay estimation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BoundaryConditions, ModelError, SwitchedRoesserSystem, UncertaintyProfile};
use crate::numerics::{Matrix, SymMatrix};
use crate::par;
use crate::synthesis::{theoretical_decay, DwellTimeScheme, SynthesisCertificate, SynthesisError};

/// States beyond this magnitude stop the simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Diagonals with energy at or below this are left out of the fit.
pub const ENERGY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid switching plan: {0}")]
    Plan(String),
    #[error("gains: {0}")]
    Gains(String),
    #[error("window [{z}, {d}] outside horizon {horizon}")]
    Window { z: usize, d: usize, horizon: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

/// Plant switching signal `σ` and its lagging controller copy `σ′`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingPlan {
    pub switch_instants: Vec<usize>,
    /// One mode per segment; `len = switch_instants.len() + 1`.
    pub mode_sequence: Vec<usize>,
    pub controller_lags: Vec<usize>,
    pub horizon: usize,
}

pub fn build_switching_plan(
    instants: Vec<usize>,
    modes: Vec<usize>,
    lags: Vec<usize>,
    horizon: usize,
) -> Result<SwitchingPlan, SimError> {
    if modes.len() != instants.len() + 1 {
        return Err(SimError::Plan(format!(
            "{} switches need {} segment modes, got {}",
            instants.len(),
            instants.len() + 1,
            modes.len()
        )));
    }
    if lags.len() != instants.len() {
        return Err(SimError::Plan(format!(
            "{} switches need {} lags, got {}",
            instants.len(),
            instants.len(),
            lags.len()
        )));
    }
    if instants.first() == Some(&0) {
        return Err(SimError::Plan("first switch must be at m ≥ 1".into()));
    }
    for w in instants.windows(2) {
        if w[1] <= w[0] {
            return Err(SimError::Plan(format!("instants {} and {} not increasing", w[0], w[1])));
        }
    }
    for w in modes.windows(2) {
        if w[0] == w[1] {
            return Err(SimError::Plan(format!("consecutive segments share mode {}", w[0] + 1)));
        }
    }
    for (k, (&m, &lag)) in instants.iter().zip(&lags).enumerate() {
        let room = match instants.get(k + 1) {
            Some(&next) => next - m,
            None => horizon.saturating_sub(m) + 1,
        };
        if lag >= room {
            return Err(SimError::Plan(format!(
                "lag {lag} at switch {m} does not fit before the next switch"
            )));
        }
    }
    if let Some(&last) = instants.last() {
        if last > horizon {
            return Err(SimError::Plan(format!("switch {last} beyond horizon {horizon}")));
        }
    }
    Ok(SwitchingPlan {
        switch_instants: instants,
        mode_sequence: modes,
        controller_lags: lags,
        horizon,
    })
}

/// Switches at `⌊κ·τ_a⌋`, modes cycling from `first_mode`, constant lag.
pub fn periodic_plan(
    tau_a: f64,
    lag: usize,
    num_modes: usize,
    first_mode: usize,
    horizon: usize,
) -> Result<SwitchingPlan, SimError> {
    if !(tau_a >= 1.0) {
        return Err(SimError::Plan(format!("period {tau_a} must be at least 1")));
    }
    let mut instants = Vec::new();
    if num_modes > 1 {
        let mut k = 1;
        loop {
            let m = (k as f64 * tau_a).floor() as usize;
            if m >= horizon {
                break;
            }
            instants.push(m);
            k += 1;
        }
    }
    let modes = (0..=instants.len()).map(|s| (first_mode + s) % num_modes.max(1)).collect();
    let mut lags = vec![lag; instants.len()];
    // the trailing lag is cut at the horizon
    if let (Some(l), Some(&m)) = (lags.last_mut(), instants.last()) {
        *l = (*l).min(horizon - m);
    }
    build_switching_plan(instants, modes, lags, horizon)
}

impl SwitchingPlan {
    pub fn single_mode(mode: usize, horizon: usize) -> Self {
        Self {
            switch_instants: Vec::new(),
            mode_sequence: vec![mode],
            controller_lags: Vec::new(),
            horizon,
        }
    }

    fn segment(&self, m: usize) -> usize {
        self.switch_instants.partition_point(|&s| s <= m)
    }

    /// Plant mode `σ(m)`.
    pub fn sigma(&self, m: usize) -> usize {
        self.mode_sequence[self.segment(m)]
    }

    /// Controller mode `σ′(m)`.
    pub fn sigma_ctrl(&self, m: usize) -> usize {
        let seg = self.segment(m);
        if seg > 0 && m < self.switch_instants[seg - 1] + self.controller_lags[seg - 1] {
            self.mode_sequence[seg - 1]
        } else {
            self.mode_sequence[seg]
        }
    }

    pub fn is_mismatched(&self, m: usize) -> bool {
        self.sigma(m) != self.sigma_ctrl(m)
    }

    /// Mismatched length `T⁺(z, D)` over `[z, D)`.
    pub fn t_plus(&self, z: usize, d: usize) -> usize {
        (z..d).filter(|&m| self.is_mismatched(m)).count()
    }

    /// Matched length `T⁻(z, D) = D − z − T⁺(z, D)`.
    pub fn t_minus(&self, z: usize, d: usize) -> usize {
        (d - z.min(d)) - self.t_plus(z, d)
    }

    /// `T⁻/T⁺` over `[z, D)`; infinite without mismatched steps.
    pub fn realized_ratio(&self, z: usize, d: usize) -> f64 {
        let tp = self.t_plus(z, d);
        if tp == 0 {
            f64::INFINITY
        } else {
            self.t_minus(z, d) as f64 / tp as f64
        }
    }

    /// Switches strictly inside `(z, D)`.
    pub fn switch_count(&self, z: usize, d: usize) -> usize {
        self.switch_instants.iter().filter(|&&m| m > z && m < d).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellCheck {
    pub switches: usize,
    pub allowed: f64,
    pub holds: bool,
}

/// `N_σ(z, D) ≤ N0 + (D − z)/τ_a`.
pub fn average_dwell_time_check(plan: &SwitchingPlan, z: usize, d: usize, n0: f64, tau_a: f64) -> DwellCheck {
    let switches = plan.switch_count(z, d);
    let allowed = n0 + (d as f64 - z as f64) / tau_a;
    DwellCheck {
        switches,
        allowed,
        holds: switches as f64 <= allowed,
    }
}

/// States over the triangle `i, j ≥ 0, i + j ≤ D_max` plus the boundary strips.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    pub horizon: usize,
    pub n1: usize,
    pub n2: usize,
    pub d_h: usize,
    pub d_v: usize,
    h: Vec<f64>,
    v: Vec<f64>,
    /// `σ(D)` and `σ′(D)` per diagonal.
    pub sigma: Vec<usize>,
    pub sigma_ctrl: Vec<usize>,
    /// `Σ_{i+j=D} ‖x(i, j)‖²` for every computed diagonal.
    pub energy: Vec<f64>,
    pub diverged: bool,
    /// Last diagonal whose states are valid.
    pub completed: usize,
}

impl TrajectoryGrid {
    fn new(sys: &SwitchedRoesserSystem, horizon: usize) -> Self {
        let span = horizon + 1;
        Self {
            horizon,
            n1: sys.n1,
            n2: sys.n2,
            d_h: sys.d_h,
            d_v: sys.d_v,
            h: vec![0.0; (span + sys.d_h) * span * sys.n1],
            v: vec![0.0; span * (span + sys.d_v) * sys.n2],
            sigma: Vec::new(),
            sigma_ctrl: Vec::new(),
            energy: Vec::new(),
            diverged: false,
            completed: 0,
        }
    }

    fn h_index(&self, i: i64, j: i64) -> Option<usize> {
        let span = self.horizon as i64 + 1;
        let row = i + self.d_h as i64;
        (row >= 0 && row < span + self.d_h as i64 && j >= 0 && j < span)
            .then(|| ((row * span + j) as usize) * self.n1)
    }

    fn v_index(&self, i: i64, j: i64) -> Option<usize> {
        let span = self.horizon as i64 + 1;
        let col = j + self.d_v as i64;
        (i >= 0 && i < span && col >= 0 && col < span + self.d_v as i64)
            .then(|| ((i * (span + self.d_v as i64) + col) as usize) * self.n2)
    }

    /// `x^h(i, j)`; zero outside the stored region.
    pub fn xh(&self, i: i64, j: i64) -> Vec<f64> {
        match self.h_index(i, j) {
            Some(k) => self.h[k..k + self.n1].to_vec(),
            None => vec![0.0; self.n1],
        }
    }

    pub fn xv(&self, i: i64, j: i64) -> Vec<f64> {
        match self.v_index(i, j) {
            Some(k) => self.v[k..k + self.n2].to_vec(),
            None => vec![0.0; self.n2],
        }
    }

    /// `[x^h(i, j); x^v(i, j)]`.
    pub fn x(&self, i: i64, j: i64) -> Vec<f64> {
        let mut x = self.xh(i, j);
        x.extend(self.xv(i, j));
        x
    }

    fn set_h(&mut self, i: i64, j: i64, val: &[f64]) {
        if let Some(k) = self.h_index(i, j) {
            self.h[k..k + self.n1].copy_from_slice(val);
        }
    }

    fn set_v(&mut self, i: i64, j: i64, val: &[f64]) {
        if let Some(k) = self.v_index(i, j) {
            self.v[k..k + self.n2].copy_from_slice(val);
        }
    }

    /// Cells `(i, D − i)` of diagonal `D`.
    pub fn cells(d: usize) -> impl Iterator<Item = (i64, i64)> {
        (0..=d as i64).map(move |i| (i, d as i64 - i))
    }

    fn diagonal_energy(&self, d: usize) -> f64 {
        Self::cells(d)
            .map(|(i, j)| self.x(i, j).iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// `Σ_{i+j=z} ‖x‖²_C`: sup over backward shifts `θ_h ∈ (−d_h, 0]`,
    /// `θ_v ∈ (−d_v, 0]` of the shifted diagonal sums.
    pub fn c_norm(&self, z: usize) -> f64 {
        let mut sup_h = 0.0f64;
        for s in 0..self.d_h.max(1) as i64 {
            let e: f64 = Self::cells(z)
                .map(|(i, j)| self.xh(i - s, j).iter().map(|x| x * x).sum::<f64>())
                .sum();
            sup_h = sup_h.max(e);
        }
        let mut sup_v = 0.0f64;
        for s in 0..self.d_v.max(1) as i64 {
            let e: f64 = Self::cells(z)
                .map(|(i, j)| self.xv(i, j - s).iter().map(|x| x * x).sum::<f64>())
                .sum();
            sup_v = sup_v.max(e);
        }
        sup_h + sup_v
    }
}

/// Closed-loop (or open-loop) maps for one cell.
struct CellMaps {
    a: Matrix,
    a_d: Matrix,
}

fn cell_maps(
    sys: &SwitchedRoesserSystem,
    unc: &UncertaintyProfile,
    gains: Option<&[Matrix]>,
    mode: usize,
    ctrl: usize,
    i: i64,
    j: i64,
) -> Result<CellMaps, SimError> {
    let f = unc.eval(mode, i, j, sys.r, sys.p);
    let real = sys.realize_uncertain_matrices(mode, &f)?;
    let a = match gains {
        Some(g) => &real.a + &(&real.b * &g[ctrl]),
        None => real.a,
    };
    Ok(CellMaps { a, a_d: real.a_d })
}

/// Next `(x^h(i+1, j), x^v(i, j+1))` from the stored predecessors of cell `(i, j)`.
fn step_cell(
    grid: &TrajectoryGrid,
    sys: &SwitchedRoesserSystem,
    unc: &UncertaintyProfile,
    gains: Option<&[Matrix]>,
    plan: &SwitchingPlan,
    i: i64,
    j: i64,
) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    let m = (i + j) as usize;
    let maps = cell_maps(sys, unc, gains, plan.sigma(m), plan.sigma_ctrl(m), i, j)?;
    let x = grid.x(i, j);
    let mut xd = grid.xh(i - sys.d_h as i64, j);
    xd.extend(grid.xv(i, j - sys.d_v as i64));
    let ax = maps.a.mul_vec(&x);
    let adx = maps.a_d.mul_vec(&xd);
    let next: Vec<f64> = ax.iter().zip(&adx).map(|(a, b)| a + b).collect();
    Ok((next[..sys.n1].to_vec(), next[sys.n1..].to_vec()))
}

/// Propagates the system diagonal by diagonal up to `plan.horizon`.
pub fn simulate(
    sys: &SwitchedRoesserSystem,
    boundary: &BoundaryConditions,
    plan: &SwitchingPlan,
    uncertainty: &UncertaintyProfile,
    gains: Option<&[Matrix]>,
) -> Result<TrajectoryGrid, SimError> {
    sys.check()?;
    boundary.validate(sys)?;
    uncertainty.validate(sys)?;
    if let Some(&bad) = plan.mode_sequence.iter().find(|&&m| m >= sys.num_modes()) {
        return Err(SimError::Plan(format!("mode {} not in the system", bad + 1)));
    }
    if let Some(g) = gains {
        if g.len() != sys.num_modes() || g.iter().any(|k| k.shape() != (sys.q, sys.n())) {
            return Err(SimError::Gains(format!(
                "need {} gains of shape {}x{}",
                sys.num_modes(),
                sys.q,
                sys.n()
            )));
        }
    }
    let horizon = plan.horizon;
    let mut grid = TrajectoryGrid::new(sys, horizon);
    for j in 0..=horizon as i64 {
        for i in -(sys.d_h as i64)..=0 {
            grid.set_h(i, j, &boundary.h(i, j, sys.n1));
        }
    }
    for i in 0..=horizon as i64 {
        for j in -(sys.d_v as i64)..=0 {
            grid.set_v(i, j, &boundary.v(i, j, sys.n2));
        }
    }
    grid.sigma = (0..=horizon).map(|m| plan.sigma(m)).collect();
    grid.sigma_ctrl = (0..=horizon).map(|m| plan.sigma_ctrl(m)).collect();
    grid.energy.push(grid.diagonal_energy(0));
    for m in 0..horizon {
        let cells: Vec<(i64, i64)> = TrajectoryGrid::cells(m).collect();
        let next = par::map_indexed(cells.len(), |c| {
            let (i, j) = cells[c];
            step_cell(&grid, sys, uncertainty, gains, plan, i, j)
        });
        let mut blown = false;
        for (&(i, j), r) in cells.iter().zip(next) {
            let (h, v) = r?;
            blown |= h.iter().chain(&v).any(|x| !x.is_finite() || x.abs() > DIVERGENCE_LIMIT);
            grid.set_h(i + 1, j, &h);
            grid.set_v(i, j + 1, &v);
        }
        grid.energy.push(grid.diagonal_energy(m + 1));
        grid.completed = m + 1;
        if blown {
            grid.diverged = true;
            break;
        }
    }
    Ok(grid)
}

/// Recomputes diagonal `d ≥ 1` from stored predecessors.
pub fn recompute_diagonal(
    grid: &TrajectoryGrid,
    sys: &SwitchedRoesserSystem,
    plan: &SwitchingPlan,
    uncertainty: &UncertaintyProfile,
    gains: Option<&[Matrix]>,
    d: usize,
) -> Result<Vec<Vec<f64>>, SimError> {
    let mut out = vec![Vec::new(); d + 1];
    for (i, j) in TrajectoryGrid::cells(d - 1) {
        let (h, v) = step_cell(grid, sys, uncertainty, gains, plan, i, j)?;
        out[(i + 1) as usize].splice(0..0, h);
        out[i as usize].extend(v);
    }
    // cells (0, d) and (d, 0) take one component from the boundary
    out[0].splice(0..0, grid.xh(0, d as i64));
    out[d].extend(grid.xv(d as i64, 0));
    Ok(out)
}

fn quad(p: &Matrix, x: &[f64]) -> f64 {
    x.iter().zip(p.mul_vec(x)).map(|(a, b)| a * b).sum()
}

/// `V(i, j)` for one `(P, Q)` pair with delay weight `rate`:
/// `x^hᵀP_h x^h + x^vᵀP_v x^v + Σ_r rate^{i−r−1} x^h(r, j)ᵀQ_h x^h(r, j) + Σ_t (same for v)`.
pub fn lyapunov_cell(grid: &TrajectoryGrid, i: i64, j: i64, p: &SymMatrix, q: &SymMatrix, rate: f64) -> f64 {
    let (n1, n2) = (grid.n1, grid.n2);
    let ph = p.as_matrix().block(0, 0, n1, n1);
    let pv = p.as_matrix().block(n1, n1, n2, n2);
    let qh = q.as_matrix().block(0, 0, n1, n1);
    let qv = q.as_matrix().block(n1, n1, n2, n2);
    let mut v = quad(&ph, &grid.xh(i, j)) + quad(&pv, &grid.xv(i, j));
    for r in i - grid.d_h as i64..i {
        v += rate.powi((i - r - 1) as i32) * quad(&qh, &grid.xh(r, j));
    }
    for t in j - grid.d_v as i64..j {
        v += rate.powi((j - t - 1) as i32) * quad(&qv, &grid.xv(i, t));
    }
    v
}

/// `Σ_{i+j=D} V(i, j)` for every computed diagonal with a single `(P, Q)`.
pub fn lyapunov_diagonal_sums(grid: &TrajectoryGrid, p: &SymMatrix, q: &SymMatrix, rate: f64) -> Vec<f64> {
    (0..=grid.completed)
        .map(|d| {
            TrajectoryGrid::cells(d)
                .map(|(i, j)| lyapunov_cell(grid, i, j, p, q, rate))
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    /// `cells[D][i] = V(i, D − i)`.
    pub cells: Vec<Vec<f64>>,
    pub diagonal_sums: Vec<f64>,
    pub matched_evaluations: usize,
    pub mismatched_evaluations: usize,
}

/// Piecewise functional: `(P^k, Q^k)` on matched diagonals and
/// `(P^{kl}, Q^{kl})` on mismatched ones, with `α` delay weights in both.
pub fn lyapunov_trace(
    grid: &TrajectoryGrid,
    cert: &SynthesisCertificate,
    plan: &SwitchingPlan,
) -> Result<LyapunovTrace, SimError> {
    let mut trace = LyapunovTrace {
        cells: Vec::with_capacity(grid.completed + 1),
        diagonal_sums: Vec::with_capacity(grid.completed + 1),
        matched_evaluations: 0,
        mismatched_evaluations: 0,
    };
    for d in 0..=grid.completed {
        let (p, q) = if plan.is_mismatched(d) {
            trace.mismatched_evaluations += 1;
            cert.mismatched_pq(plan.sigma_ctrl(d), plan.sigma(d))?
        } else {
            trace.matched_evaluations += 1;
            cert.matched_pq(plan.sigma(d))?
        };
        let row: Vec<f64> = TrajectoryGrid::cells(d)
            .map(|(i, j)| lyapunov_cell(grid, i, j, &p, &q, cert.alpha))
            .collect();
        trace.diagonal_sums.push(row.iter().sum());
        trace.cells.push(row);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    pub z: usize,
    pub diagonal_energy: Vec<f64>,
    /// Fitted rate `c`; `+∞` when the fit is degenerate.
    pub c: f64,
    pub eta: f64,
    pub c_norm: f64,
    pub fit_start: usize,
    pub fit_end: usize,
    pub degenerate: bool,
}

/// Least-squares fit of `ln(energy)` against `D` over
/// `[z + max(d_h, d_v), completed]`.
pub fn estimate_decay(grid: &TrajectoryGrid, z: usize) -> Result<StabilityEstimate, SimError> {
    if z > grid.completed {
        return Err(SimError::Window {
            z,
            d: grid.completed,
            horizon: grid.horizon,
        });
    }
    let c_norm = grid.c_norm(z);
    let start = z + grid.d_h.max(grid.d_v);
    let pts: Vec<(f64, f64)> = (start..=grid.completed)
        .filter(|&d| grid.energy[d] > ENERGY_FLOOR)
        .map(|d| ((d - z) as f64, grid.energy[d].ln()))
        .collect();
    let (c, eta, degenerate) = if pts.len() < 2 {
        (f64::INFINITY, 0.0, true)
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let eta = if c_norm > 0.0 { intercept.exp() / c_norm } else { intercept.exp() };
        (-slope, eta, false)
    };
    Ok(StabilityEstimate {
        z,
        diagonal_energy: grid.energy.clone(),
        c,
        eta,
        c_norm,
        fit_start: start,
        fit_end: grid.completed,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub d: usize,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum BoundVerdict {
    Pass { rows: Vec<BoundRow> },
    Fail { rows: Vec<BoundRow> },
    NotApplicable { reason: String },
}

impl BoundVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            BoundVerdict::Pass { .. } => "pass",
            BoundVerdict::Fail { .. } => "fail",
            BoundVerdict::NotApplicable { .. } => "not-applicable",
        }
    }
}

/// Compares `Σ_{i+j=D} ‖x‖²` with the certified envelope times the C-norm at
/// `z`. Without switches the envelope is `(ζ1/ζ2)·e^{−λ⁻(D−z)}`.
pub fn verify_bound(
    estimate: &StabilityEstimate,
    cert: &SynthesisCertificate,
    scheme: &DwellTimeScheme,
    plan: &SwitchingPlan,
) -> BoundVerdict {
    let z = estimate.z;
    let end = estimate.fit_end;
    let switching = !plan.switch_instants.iter().all(|&m| m <= z) || (z..end).any(|m| plan.is_mismatched(m));
    if switching {
        if scheme.tau_a <= cert.tau_a_star {
            return BoundVerdict::NotApplicable {
                reason: format!("tau_a = {} does not exceed tau_a* = {}", scheme.tau_a, cert.tau_a_star),
            };
        }
        let ratio = plan.realized_ratio(z, end);
        if ratio < cert.required_ratio {
            return BoundVerdict::NotApplicable {
                reason: format!(
                    "realized matched ratio {ratio:.4} below required {:.4}",
                    cert.required_ratio
                ),
            };
        }
        for d in z + 1..=end {
            let check = average_dwell_time_check(plan, z, d, scheme.n0, scheme.tau_a);
            if !check.holds {
                return BoundVerdict::NotApplicable {
                    reason: format!("{} switches in ({z}, {d}) exceed {:.3}", check.switches, check.allowed),
                };
            }
        }
    }
    let rows: Vec<BoundRow> = (z..=end)
        .map(|d| {
            let factor = if switching {
                theoretical_decay(cert, scheme, z, d)
            } else {
                cert.zeta1 / cert.zeta2 * (-cert.lambda_minus * (d - z) as f64).exp()
            };
            let measured = estimate.diagonal_energy[d];
            let bound = factor * estimate.c_norm;
            BoundRow {
                d,
                measured,
                bound,
                holds: measured <= bound,
            }
        })
        .collect();
    if rows.iter().all(|r| r.holds) {
        BoundVerdict::Pass { rows }
    } else {
        BoundVerdict::Fail { rows }
    }
}

/// Violations of `Σ_D V ≤ rate·Σ_{D−1} V` (strict when the previous sum is
/// positive) for `D` in `(from, completed]`; returns the offending diagonals.
pub fn diagonal_rate_violations(sums: &[f64], rate: f64, from: usize) -> Vec<usize> {
    (from + 1..sums.len())
        .filter(|&d| {
            let prev = sums[d - 1];
            if prev > 0.0 {
                sums[d] >= rate * prev
            } else {
                sums[d] > 0.0
            }
        })
        .collect()
}

/// Single-mode certain system with a certified `(P, Q)` for the analysis
/// inequality at `rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisInstance {
    pub sys: SwitchedRoesserSystem,
    pub p: SymMatrix,
    pub q: SymMatrix,
    pub rate: f64,
    /// `λ_max` of the analysis matrix (negative).
    pub lambda_max: f64,
}

fn block_diag_pd<R: Rng>(rng: &mut R, n1: usize, n2: usize, lo: f64, hi: f64) -> SymMatrix {
    let n = n1 + n2;
    let mut m = Matrix::zeros(n, n);
    for (off, b) in [(0, n1), (n1, n2)] {
        let g = Matrix::from_row_major(b, b, (0..b * b).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .expect("sized");
        let gg = &g * &g.transpose();
        let scale = rng.gen_range(lo..hi);
        let block = &gg.scale(0.1 * scale) + &Matrix::identity(b).scale(scale);
        m.set_block(off, off, &block);
    }
    SymMatrix::symmetrize(&m)
}

/// Draws `(A, A_d, P, Q)` until the analysis matrix at `rate` is negative
/// definite; `None` after `attempts` rejections.
pub fn sample_analysis_instance<R: Rng>(
    rng: &mut R,
    n1: usize,
    n2: usize,
    d_h: usize,
    d_v: usize,
    rate: f64,
    attempts: usize,
) -> Option<AnalysisInstance> {
    let n = n1 + n2;
    let spread = rate.sqrt() * 0.8;
    let layout = crate::lmi::StateLayout { n1, n2, d_h, d_v };
    let weights = layout.delay_weights(rate);
    for _ in 0..attempts {
        let mut rand_mat = |s: f64| {
            Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.gen_range(-s..s)).collect()).expect("sized")
        };
        let a = rand_mat(spread / n as f64);
        let a_d = rand_mat(0.3 * spread / n as f64);
        let p = block_diag_pd(rng, n1, n2, 0.5, 2.0);
        let q = block_diag_pd(rng, n1, n2, 0.05 * rate, 0.3 * rate);
        let m = crate::lmi::assemble_closedloop_analysis(&a, &a_d, &p, &q, rate, &weights).ok()?;
        let lm = m.lambda_max().ok()?;
        if lm < 0.0 {
            let mode = crate::model::ModeMatrices::certain(a, a_d, Matrix::zeros(n, 1), 1, 1);
            let sys = SwitchedRoesserSystem {
                n1,
                n2,
                q: 1,
                r: 1,
                p: 1,
                d_h,
                d_v,
                delay_free: false,
                modes: vec![mode],
            };
            return Some(AnalysisInstance {
                sys,
                p,
                q,
                rate,
                lambda_max: lm,
            });
        }
    }
    None
}

/// Simulates an instance from a random boundary of extent `z` and returns
/// the diagonals past `z` where `Σ_D V ≤ rate·Σ_{D−1} V` fails.
pub fn rate_property_violations<R: Rng>(
    inst: &AnalysisInstance,
    rng: &mut R,
    z: usize,
    horizon: usize,
) -> Result<Vec<usize>, SimError> {
    let sys = &inst.sys;
    let mut bc = BoundaryConditions {
        z1: z,
        z2: z,
        ..BoundaryConditions::zero()
    };
    for j in 0..=z as i64 {
        for i in -(sys.d_h as i64)..=0 {
            bc.h_values.insert((i, j), (0..sys.n1).map(|_| rng.gen_range(-5.0..5.0)).collect());
        }
    }
    for i in 0..=z as i64 {
        for j in -(sys.d_v as i64)..=0 {
            bc.v_values.insert((i, j), (0..sys.n2).map(|_| rng.gen_range(-5.0..5.0)).collect());
        }
    }
    let plan = SwitchingPlan::single_mode(0, horizon);
    let grid = simulate(sys, &bc, &plan, &UncertaintyProfile::zero(1), None)?;
    let sums = lyapunov_diagonal_sums(&grid, &inst.p, &inst.q, inst.rate);
    Ok(diagonal_rate_violations(&sums, inst.rate, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::UncertaintyProfile;

    #[test]
    fn single_mode_plan() {
        let p = build_switching_plan(vec![], vec![0], vec![], 30).unwrap();
        assert!((0..=30).all(|m| p.sigma_ctrl(m) == p.sigma(m)));
        assert_eq!(p.t_plus(0, 30), 0);
    }

    #[test]
    fn lagged_intervals() {
        let p = build_switching_plan(vec![10, 20], vec![0, 1, 0], vec![2, 2], 40).unwrap();
        let mism: Vec<usize> = (0..40).filter(|&m| p.is_mismatched(m)).collect();
        assert_eq!(mism, vec![10, 11, 20, 21]);
        assert_eq!(p.t_plus(0, 40), 4);
        assert_eq!(p.t_minus(0, 40), 36);
        assert_eq!(p.sigma_ctrl(10), 0);
        assert_eq!(p.sigma(10), 1);
    }

    #[test]
    fn lag_must_fit() {
        assert!(build_switching_plan(vec![10, 12], vec![0, 1, 0], vec![2, 1], 40).is_err());
        assert!(build_switching_plan(vec![10, 20], vec![0, 0, 1], vec![0, 0], 40).is_err());
        assert!(build_switching_plan(vec![10, 10], vec![0, 1, 0], vec![0, 0], 40).is_err());
    }

    #[test]
    fn periodic_gaps() {
        let p = periodic_plan(6.5, 2, 2, 0, 60).unwrap();
        let gaps: Vec<usize> = std::iter::once(0)
            .chain(p.switch_instants.iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        assert_eq!(&gaps[..6], &[6, 7, 6, 7, 6, 7]);
        assert_eq!(p.mode_sequence[..4], [0, 1, 0, 1]);
    }

    #[test]
    fn dwell_checks() {
        let none = SwitchingPlan::single_mode(0, 40);
        assert!(average_dwell_time_check(&none, 0, 32, 1.0, 6.5).holds);
        let five = build_switching_plan(vec![5, 10, 15, 20, 25], vec![0, 1, 0, 1, 0, 1], vec![0; 5], 40).unwrap();
        let c = average_dwell_time_check(&five, 0, 32, 1.0, 6.5);
        assert_eq!(c.switches, 5);
        assert!(c.holds);
        let eight = build_switching_plan(
            vec![3, 7, 11, 15, 19, 23, 27, 31],
            vec![0, 1, 0, 1, 0, 1, 0, 1, 0],
            vec![0; 8],
            40,
        )
        .unwrap();
        assert!(!average_dwell_time_check(&eight, 0, 32, 1.0, 6.5).holds);
    }

    #[test]
    fn zero_boundary_gives_zero_trajectory() {
        let sys = fixtures::sec4_system();
        let plan = periodic_plan(6.5, 2, 2, 0, 20).unwrap();
        let g = simulate(
            &sys,
            &BoundaryConditions::zero(),
            &plan,
            &fixtures::sec4_uncertainty(),
            None,
        )
        .unwrap();
        assert!(g.energy.iter().all(|&e| e == 0.0));
        let est = estimate_decay(&g, 0).unwrap();
        assert!(est.degenerate && est.c == f64::INFINITY);
    }

    #[test]
    fn first_cell_by_hand() {
        let sys = fixtures::sec4_system();
        let bc = fixtures::sec4_boundary(&sys);
        let plan = SwitchingPlan::single_mode(0, 3);
        let g = simulate(&sys, &bc, &plan, &fixtures::sec4_uncertainty(), None).unwrap();
        // F(0,0) = sin 0 = 0; x(0,0) = [10; 6], delayed [x^h(-2,0); x^v(0,-3)] = [10; 6]
        let a = &sys.modes[0].a;
        let ad = &sys.modes[0].a_d;
        let xh = a[(0, 0)] * 10.0 + a[(0, 1)] * 6.0 + ad[(0, 0)] * 10.0 + ad[(0, 1)] * 6.0;
        let xv = a[(1, 0)] * 10.0 + a[(1, 1)] * 6.0 + ad[(1, 0)] * 10.0 + ad[(1, 1)] * 6.0;
        assert_eq!(g.xh(1, 0), vec![xh]);
        assert_eq!(g.xv(0, 1), vec![xv]);
    }

    #[test]
    fn open_loop_diverges() {
        let sys = fixtures::sec4_system();
        let bc = fixtures::sec4_boundary(&sys);
        let plan = periodic_plan(6.5, 2, 2, 0, 200).unwrap();
        let g = simulate(&sys, &bc, &plan, &fixtures::sec4_uncertainty(), None).unwrap();
        assert!(g.diverged);
        assert!(g.completed < 200);
    }

    #[test]
    fn geometric_energy_fit() {
        let sys = fixtures::sec4_system();
        let mut g = TrajectoryGrid::new(&sys, 30);
        g.completed = 30;
        g.energy = (0..=30).map(|d| 0.7f64.powi(d)).collect();
        let est = estimate_decay(&g, 0).unwrap();
        assert!((est.c + 0.7f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn single_cell_functional() {
        let mut sys = fixtures::sec4_system();
        sys.d_h = 1;
        sys.d_v = 1;
        let mut g = TrajectoryGrid::new(&sys, 4);
        g.set_h(2, 1, &[2.0]);
        g.set_h(1, 1, &[3.0]);
        let p = SymMatrix::diag(&[5.0, 7.0]);
        let q = SymMatrix::diag(&[0.5, 0.25]);
        // x^hᵀP_h x^h + Q_h·x^h(1,1)²·rate⁰
        assert_eq!(lyapunov_cell(&g, 2, 1, &p, &q, 0.6), 5.0 * 4.0 + 0.5 * 9.0);
    }

    #[test]
    fn causality_recompute() {
        let sys = fixtures::sec4_system();
        let bc = fixtures::sec4_boundary(&sys);
        let plan = periodic_plan(6.5, 2, 2, 0, 25).unwrap();
        let unc = fixtures::sec4_uncertainty();
        let gains = fixtures::sec4_printed_solution().k;
        let g = simulate(&sys, &bc, &plan, &unc, Some(&gains)).unwrap();
        for d in [1, 7, 13, 25] {
            let again = recompute_diagonal(&g, &sys, &plan, &unc, Some(&gains), d).unwrap();
            for (i, x) in again.iter().enumerate() {
                assert_eq!(x, &g.x(i as i64, (d - i) as i64));
            }
        }
    }

    #[test]
    fn zero_uncertainty_profile_runs() {
        let sys = fixtures::sec4_system();
        let bc = fixtures::sec4_boundary(&sys);
        let plan = SwitchingPlan::single_mode(1, 10);
        let g = simulate(&sys, &bc, &plan, &UncertaintyProfile::zero(2), None).unwrap();
        assert_eq!(g.completed, 10);
    }

    #[test]
    fn sampled_instances_contract() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for rate in [0.6, 1.3] {
            let inst = sample_analysis_instance(&mut rng, 1, 2, 2, 1, rate, 1000).expect("instance");
            assert!(inst.lambda_max < 0.0);
            let v = rate_property_violations(&inst, &mut rng, 3, 25).unwrap();
            assert!(v.is_empty(), "rate {rate}: {v:?}");
        }
    }

    #[test]
    fn rate_violation_helper() {
        assert!(diagonal_rate_violations(&[4.0, 2.0, 1.0, 0.4], 0.6, 0).is_empty());
        assert_eq!(diagonal_rate_violations(&[4.0, 2.0, 1.5], 0.6, 0), vec![2]);
    }
}
