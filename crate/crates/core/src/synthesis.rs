//! The four-step controller design: matched solves and gain extraction,
//! mismatched solves under the lagging gains, the coupling constants
//! `μ1, μ2` and the dwell-time quantities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lmi::{
    self, assemble_corollary1_matched, assemble_corollary1_mismatched, assemble_thm1_matched,
    assemble_thm1_mismatched, names, Assignment, LmiError, LmiProblem, Structure,
};
use crate::model::SwitchedRoesserSystem;
use crate::numerics::{gen_eig_max, inverse, sym_inverse, Matrix, NumericError, SymMatrix};
use crate::par;
use crate::sdp::{check_assignment, solve_feasibility, SolverConfig, Status};

/// Upper end of the β retry ladder.
pub const BETA_RETRY_MAX: f64 = 4.0;
pub const BETA_RETRY_FACTOR: f64 = 1.25;
const MU_FLOOR_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("matched inequality for mode {mode} is infeasible ({status:?}, margin {margin:.3e})")]
    MatchedInfeasible {
        mode: usize,
        status: Status,
        margin: f64,
    },
    #[error(
        "mismatched inequality for pair {from}->{to} is infeasible ({status:?}, margin {margin:.3e}){}",
        suggestion.map(|b| format!("; retry with beta = {b}")).unwrap_or_default()
    )]
    MismatchedInfeasible {
        from: usize,
        to: usize,
        status: Status,
        margin: f64,
        suggestion: Option<f64>,
    },
    #[error("lambda* = {value} must lie in (0, {upper})")]
    LambdaStar { value: f64, upper: f64 },
    #[error("ratio target {0} must be positive")]
    Ratio(f64),
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(String),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// `(X^k, Y^k, W^k, ε_k)`; `Y` is absent for delay-free systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSolution {
    pub x: SymMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<SymMatrix>,
    pub w: Matrix,
    pub eps: f64,
}

/// `(X^{kl}, Y^{kl}, ε_{kl})` for the ordered pair `from → to` (zero-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchedSolution {
    pub from: usize,
    pub to: usize,
    pub x: SymMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<SymMatrix>,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMargin {
    pub name: String,
    pub lambda_max: f64,
    pub required: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSelection {
    Direct(f64),
    /// Target `T⁻/T⁺` ratio.
    Ratio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub mu1: f64,
    pub mu2: f64,
    pub mu: f64,
    /// `μ2` was raised to meet `μ1·μ2·μ ≥ 1`.
    pub floor_applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellTime {
    pub lambda_star: f64,
    pub tau_a_star: f64,
    pub required_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub gains: Vec<Matrix>,
    pub matched: Vec<MatchedSolution>,
    pub mismatched: Vec<MismatchedSolution>,
    pub mu1: f64,
    pub mu2: f64,
    pub mu: f64,
    pub mu_floor_applied: bool,
    pub d_bar: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub lambda_star: f64,
    pub tau_a_star: f64,
    pub required_ratio: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    #[serde(default)]
    pub margins: Vec<ConstraintMargin>,
}

impl SynthesisCertificate {
    pub fn mismatched_for(&self, from: usize, to: usize) -> Option<&MismatchedSolution> {
        self.mismatched.iter().find(|m| m.from == from && m.to == to)
    }

    /// `(P, Q) = (X⁻¹, Y⁻¹)` of mode `k`; `Q` is zero when `Y` is absent.
    pub fn matched_pq(&self, k: usize) -> Result<(SymMatrix, SymMatrix), SynthesisError> {
        let m = &self.matched[k];
        pq(&m.x, m.y.as_ref())
    }

    pub fn mismatched_pq(&self, from: usize, to: usize) -> Result<(SymMatrix, SymMatrix), SynthesisError> {
        let m = self
            .mismatched_for(from, to)
            .ok_or_else(|| SynthesisError::NotPositiveDefinite(names::x_pair(from, to)))?;
        pq(&m.x, m.y.as_ref())
    }
}

fn pq(x: &SymMatrix, y: Option<&SymMatrix>) -> Result<(SymMatrix, SymMatrix), SynthesisError> {
    let p = sym_inverse(x)?;
    let q = match y {
        Some(y) => sym_inverse(y)?,
        None => SymMatrix::zeros(x.order()),
    };
    Ok((p, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellTimeScheme {
    pub tau_a: f64,
    pub n0: f64,
    pub min_matched_ratio: f64,
}

impl DwellTimeScheme {
    pub fn new(tau_a: f64, n0: f64, min_matched_ratio: f64) -> Self {
        Self {
            tau_a,
            n0,
            min_matched_ratio,
        }
    }

    /// Scheme for a certificate; `None` unless `tau_a > τ_a*`.
    pub fn from_certificate(cert: &SynthesisCertificate, tau_a: f64, n0: f64) -> Option<Self> {
        (tau_a > cert.tau_a_star).then(|| Self::new(tau_a, n0, cert.required_ratio))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub lambda: LambdaSelection,
    pub structure: Structure,
    pub solver: SolverConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            beta: 1.2,
            seed: 0,
            lambda: LambdaSelection::Ratio(8.0),
            structure: Structure::BlockDiagonal,
            solver: SolverConfig::default(),
        }
    }
}

fn delay_free(sys: &SwitchedRoesserSystem) -> bool {
    sys.delay_free
}

fn matched_problem(sys: &SwitchedRoesserSystem, k: usize, alpha: f64, s: Structure) -> Result<LmiProblem, LmiError> {
    if delay_free(sys) {
        assemble_corollary1_matched(sys, k, alpha, s)
    } else {
        assemble_thm1_matched(sys, k, alpha, s)
    }
}

fn mismatched_problem(
    sys: &SwitchedRoesserSystem,
    k: usize,
    l: usize,
    gain: &Matrix,
    beta: f64,
    s: Structure,
) -> Result<LmiProblem, LmiError> {
    if delay_free(sys) {
        assemble_corollary1_mismatched(sys, k, l, gain, beta, s)
    } else {
        assemble_thm1_mismatched(sys, k, l, gain, beta, s)
    }
}

/// `K = W·X⁻¹`.
pub fn extract_gain(w: &Matrix, x: &SymMatrix) -> Result<Matrix, NumericError> {
    w.matmul(&inverse(x.as_matrix())?)
}

fn margins_of(p: &LmiProblem, a: &Assignment) -> Result<Vec<ConstraintMargin>, LmiError> {
    Ok(check_assignment(p, a)?
        .constraints
        .into_iter()
        .map(|(name, lambda_max, required)| ConstraintMargin {
            name,
            lambda_max,
            required,
        })
        .collect())
}

/// Step 1: one matched solve per mode, gains by `K^k = W^k (X^k)⁻¹`.
pub fn step1_solve_matched(
    sys: &SwitchedRoesserSystem,
    cfg: &SynthesisConfig,
) -> Result<(Vec<MatchedSolution>, Vec<Matrix>, Vec<ConstraintMargin>), SynthesisError> {
    lmi::check_alpha(cfg.alpha)?;
    sys.check().map_err(LmiError::from)?;
    let results = par::map_indexed(sys.num_modes(), |k| -> Result<_, SynthesisError> {
        let p = matched_problem(sys, k, cfg.alpha, cfg.structure)?;
        let r = solve_feasibility(&p, cfg.seed.wrapping_add(k as u64), &cfg.solver)?;
        if !r.is_feasible() {
            return Err(SynthesisError::MatchedInfeasible {
                mode: k + 1,
                status: r.status,
                margin: r.margin,
            });
        }
        let a = &r.assignment;
        let sol = MatchedSolution {
            x: a.sym(&names::x(k))?.clone(),
            y: a.get(&names::y(k)).and_then(|v| v.as_sym()).cloned(),
            w: a.full(&names::w(k))?.clone(),
            eps: a.scalar(&names::eps(k))?,
        };
        let gain = extract_gain(&sol.w, &sol.x)?;
        Ok((sol, gain, margins_of(&p, a)?))
    });
    let mut sols = Vec::new();
    let mut gains = Vec::new();
    let mut margins = Vec::new();
    for r in results {
        let (s, g, m) = r?;
        sols.push(s);
        gains.push(g);
        margins.extend(m);
    }
    Ok((sols, gains, margins))
}

/// Ordered pairs `k ≠ l`, lexicographic.
pub fn ordered_pairs(modes: usize) -> Vec<(usize, usize)> {
    (0..modes)
        .flat_map(|k| (0..modes).filter(move |&l| l != k).map(move |l| (k, l)))
        .collect()
}

fn next_beta(beta: f64) -> Option<f64> {
    let b = beta * BETA_RETRY_FACTOR;
    (b <= BETA_RETRY_MAX).then_some(b)
}

/// Step 2: one mismatched solve per ordered pair with `K^k` substituted.
pub fn step2_solve_mismatched(
    sys: &SwitchedRoesserSystem,
    gains: &[Matrix],
    cfg: &SynthesisConfig,
) -> Result<(Vec<MismatchedSolution>, Vec<ConstraintMargin>), SynthesisError> {
    lmi::check_beta(cfg.beta)?;
    let pairs = ordered_pairs(sys.num_modes());
    let results = par::map_indexed(pairs.len(), |idx| -> Result<_, SynthesisError> {
        let (k, l) = pairs[idx];
        let p = mismatched_problem(sys, k, l, &gains[k], cfg.beta, cfg.structure)?;
        let seed = cfg.seed.wrapping_add(1000 + idx as u64);
        let r = solve_feasibility(&p, seed, &cfg.solver)?;
        if !r.is_feasible() {
            return Err(SynthesisError::MismatchedInfeasible {
                from: k + 1,
                to: l + 1,
                status: r.status,
                margin: r.margin,
                suggestion: next_beta(cfg.beta),
            });
        }
        let a = &r.assignment;
        let sol = MismatchedSolution {
            from: k,
            to: l,
            x: a.sym(&names::x_pair(k, l))?.clone(),
            y: a.get(&names::y_pair(k, l)).and_then(|v| v.as_sym()).cloned(),
            eps: a.scalar(&names::eps_pair(k, l))?,
        };
        Ok((sol, margins_of(&p, a)?))
    });
    let mut sols = Vec::new();
    let mut margins = Vec::new();
    for r in results {
        let (s, m) = r?;
        sols.push(s);
        margins.extend(m);
    }
    Ok((sols, margins))
}

fn inv_pd(m: &SymMatrix, name: String) -> Result<SymMatrix, SynthesisError> {
    if m.lambda_min()? <= 0.0 {
        return Err(SynthesisError::NotPositiveDefinite(name));
    }
    Ok(sym_inverse(m)?)
}

/// Step 3: tight `μ1`, `μ2` from the generalized eigenvalue bounds, then the
/// `μ1·μ2·μ ≥ 1` floor on `μ2`. With no pairs both maxima are taken as 1.
pub fn step3_minimize_mu(
    matched: &[MatchedSolution],
    mismatched: &[MismatchedSolution],
    alpha: f64,
    beta: f64,
    d_h: usize,
    d_v: usize,
) -> Result<Coupling, SynthesisError> {
    let d_bar = d_h.max(d_v);
    let mu = (alpha / beta).powi(d_bar as i32);
    let (mut mu1, mut mu2) = if mismatched.is_empty() {
        (1.0, 1.0)
    } else {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    };
    for m in mismatched {
        let (k, l) = (m.from, m.to);
        let xl = inv_pd(&matched[l].x, names::x(l))?;
        let xk = inv_pd(&matched[k].x, names::x(k))?;
        let xkl = inv_pd(&m.x, names::x_pair(k, l))?;
        mu1 = mu1.max(gen_eig_max(&xl, &xkl)?);
        mu2 = mu2.max(gen_eig_max(&xkl, &xk)?);
        if let (Some(yl), Some(yk), Some(ykl)) = (&matched[l].y, &matched[k].y, &m.y) {
            let yl = inv_pd(yl, names::y(l))?;
            let yk = inv_pd(yk, names::y(k))?;
            let ykl = inv_pd(ykl, names::y_pair(k, l))?;
            mu1 = mu1.max(gen_eig_max(&yl, &ykl)?);
            mu2 = mu2.max(gen_eig_max(&ykl, &yk)? / mu);
        }
    }
    let mut floor_applied = false;
    if mu1 * mu2 * mu < 1.0 {
        mu2 = (1.0 + MU_FLOOR_SLACK) / (mu1 * mu);
        floor_applied = true;
    }
    Ok(Coupling {
        mu1,
        mu2,
        mu,
        floor_applied,
    })
}

/// `λ*` solving `ratio = (λ⁺ + λ*)/(λ⁻ − λ*)`.
pub fn lambda_star_from_ratio(ratio: f64, lambda_minus: f64, lambda_plus: f64) -> f64 {
    (ratio * lambda_minus - lambda_plus) / (ratio + 1.0)
}

/// Step 4: `λ*`, `τ_a* = ln(μ1μ2)/λ*` and the required matched ratio.
pub fn step4_dwell_time(
    mu1: f64,
    mu2: f64,
    lambda_minus: f64,
    lambda_plus: f64,
    selection: LambdaSelection,
) -> Result<DwellTime, SynthesisError> {
    let lambda_star = match selection {
        LambdaSelection::Direct(v) => v,
        LambdaSelection::Ratio(r) if r > 0.0 => lambda_star_from_ratio(r, lambda_minus, lambda_plus),
        LambdaSelection::Ratio(r) => return Err(SynthesisError::Ratio(r)),
    };
    if !(lambda_star > 0.0 && lambda_star < lambda_minus) {
        return Err(SynthesisError::LambdaStar {
            value: lambda_star,
            upper: lambda_minus,
        });
    }
    Ok(DwellTime {
        lambda_star,
        tau_a_star: (mu1 * mu2).ln() / lambda_star,
        required_ratio: (lambda_plus + lambda_star) / (lambda_minus - lambda_star),
    })
}

/// `ζ1 = max(λ_max(P) + d̄·λ_max(Q))`, `ζ2 = min λ_min(P)` over all matched
/// and mismatched solutions.
pub fn bound_constants(
    matched: &[MatchedSolution],
    mismatched: &[MismatchedSolution],
    d_h: usize,
    d_v: usize,
) -> Result<(f64, f64), SynthesisError> {
    let d_bar = d_h.max(d_v) as f64;
    let mut zeta1 = f64::NEG_INFINITY;
    let mut zeta2 = f64::INFINITY;
    let all = matched
        .iter()
        .map(|m| (&m.x, m.y.as_ref()))
        .chain(mismatched.iter().map(|m| (&m.x, m.y.as_ref())));
    for (x, y) in all {
        let (p, q) = pq(x, y)?;
        let q_max = if y.is_some() { q.lambda_max()? } else { 0.0 };
        zeta1 = zeta1.max(p.lambda_max()? + d_bar * q_max);
        zeta2 = zeta2.min(p.lambda_min()?);
    }
    if !(zeta2 > 0.0) {
        return Err(SynthesisError::NotPositiveDefinite("P".into()));
    }
    Ok((zeta1, zeta2))
}

/// `(ζ1/ζ2)·max(μ1, 1)·(μ1μ2)^{N0}·exp((ln(μ1μ2)/τ_a − λ*)(D − z))`.
pub fn theoretical_decay(cert: &SynthesisCertificate, scheme: &DwellTimeScheme, z: usize, d: usize) -> f64 {
    let mm = cert.mu1 * cert.mu2;
    let exponent = (mm.ln() / scheme.tau_a - cert.lambda_star) * (d as f64 - z as f64);
    (cert.zeta1 / cert.zeta2) * cert.mu1.max(1.0) * mm.powf(scheme.n0) * exponent.exp()
}

/// Steps 1–4 end to end.
pub fn synthesize(sys: &SwitchedRoesserSystem, cfg: &SynthesisConfig) -> Result<SynthesisCertificate, SynthesisError> {
    lmi::check_alpha(cfg.alpha)?;
    lmi::check_beta(cfg.beta)?;
    let (matched, gains, mut margins) = step1_solve_matched(sys, cfg)?;
    let (mismatched, m2) = step2_solve_mismatched(sys, &gains, cfg)?;
    margins.extend(m2);
    certificate_from_solutions(sys, cfg.alpha, cfg.beta, cfg.lambda, matched, mismatched, margins)
}

/// Steps 3–4 on given solutions; gains are re-extracted from `W`, `X`.
pub fn certificate_from_solutions(
    sys: &SwitchedRoesserSystem,
    alpha: f64,
    beta: f64,
    lambda: LambdaSelection,
    matched: Vec<MatchedSolution>,
    mismatched: Vec<MismatchedSolution>,
    margins: Vec<ConstraintMargin>,
) -> Result<SynthesisCertificate, SynthesisError> {
    let coupling = step3_minimize_mu(&matched, &mismatched, alpha, beta, sys.d_h, sys.d_v)?;
    let lambda_minus = -alpha.ln();
    let lambda_plus = beta.ln();
    let dwell = step4_dwell_time(coupling.mu1, coupling.mu2, lambda_minus, lambda_plus, lambda)?;
    let (zeta1, zeta2) = bound_constants(&matched, &mismatched, sys.d_h, sys.d_v)?;
    let gains = matched
        .iter()
        .map(|m| extract_gain(&m.w, &m.x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SynthesisCertificate {
        alpha,
        beta,
        gains,
        matched,
        mismatched,
        mu1: coupling.mu1,
        mu2: coupling.mu2,
        mu: coupling.mu,
        mu_floor_applied: coupling.floor_applied,
        d_bar: sys.d_bar(),
        lambda_minus,
        lambda_plus,
        lambda_star: dwell.lambda_star,
        tau_a_star: dwell.tau_a_star,
        required_ratio: dwell.required_ratio,
        zeta1,
        zeta2,
        margins,
    })
}

/// Every inequality of a certificate with its substituted assignment.
pub fn certificate_problems(
    sys: &SwitchedRoesserSystem,
    cert: &SynthesisCertificate,
    structure: Structure,
) -> Result<Vec<(LmiProblem, Assignment)>, SynthesisError> {
    let mut out = Vec::new();
    for (k, m) in cert.matched.iter().enumerate() {
        let p = matched_problem(sys, k, cert.alpha, structure)?;
        let mut a = Assignment::new()
            .with(names::x(k), lmi::Value::Sym(m.x.clone()))
            .with(names::w(k), lmi::Value::Full(m.w.clone()))
            .with(names::eps(k), lmi::Value::Scalar(m.eps));
        if let Some(y) = &m.y {
            a.set(names::y(k), lmi::Value::Sym(y.clone()));
        }
        out.push((p, a));
    }
    for m in &cert.mismatched {
        let (k, l) = (m.from, m.to);
        let p = mismatched_problem(sys, k, l, &cert.gains[k], cert.beta, structure)?;
        let mut a = Assignment::new()
            .with(names::x_pair(k, l), lmi::Value::Sym(m.x.clone()))
            .with(names::eps_pair(k, l), lmi::Value::Scalar(m.eps));
        if let Some(y) = &m.y {
            a.set(names::y_pair(k, l), lmi::Value::Sym(y.clone()));
        }
        out.push((p, a));
    }
    Ok(out)
}

/// Re-checks every inequality of a certificate against the system.
pub fn recheck_certificate(
    sys: &SwitchedRoesserSystem,
    cert: &SynthesisCertificate,
    structure: Structure,
) -> Result<Vec<(LmiProblem, crate::sdp::MarginReport)>, SynthesisError> {
    certificate_problems(sys, cert, structure)?
        .into_iter()
        .map(|(p, a)| {
            let r = check_assignment(&p, &a)?;
            Ok((p, r))
        })
        .collect()
}

/// The printed solution set as solver-independent structures.
pub fn printed_solutions(
    s: &crate::fixtures::PrintedSolution,
) -> (Vec<MatchedSolution>, Vec<MismatchedSolution>) {
    let matched = (0..s.x.len())
        .map(|k| MatchedSolution {
            x: s.x[k].clone(),
            y: Some(s.y[k].clone()),
            w: s.w[k].clone(),
            eps: s.eps[k],
        })
        .collect();
    let mismatched = s
        .x_pair
        .iter()
        .zip(&s.y_pair)
        .zip(&s.eps_pair)
        .map(|(((pair, x), (_, y)), (_, eps))| MismatchedSolution {
            from: pair.0,
            to: pair.1,
            x: x.clone(),
            y: Some(y.clone()),
            eps: *eps,
        })
        .collect();
    (matched, mismatched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::ModeMatrices;

    #[test]
    fn printed_gains() {
        let s = fixtures::sec4_printed_solution();
        for k in 0..2 {
            let g = extract_gain(&s.w[k], &s.x[k]).unwrap();
            assert!((&g - &s.k[k]).max_abs() < 1e-3, "{g:?}");
        }
    }

    #[test]
    fn printed_mu_and_dwell() {
        let s = fixtures::sec4_printed_solution();
        let (m, mm) = printed_solutions(&s);
        let c = step3_minimize_mu(&m, &mm, 0.6, 1.2, 2, 3).unwrap();
        assert!((c.mu1 - s.mu1).abs() / s.mu1 < 1e-2);
        assert!((c.mu2 - s.mu2).abs() / s.mu2 < 1e-2);
        assert!((c.mu - 0.125).abs() < 1e-15);
        assert!(!c.floor_applied);
        let d = step4_dwell_time(c.mu1, c.mu2, -(0.6f64).ln(), 1.2f64.ln(), LambdaSelection::Ratio(8.0)).unwrap();
        assert!((d.lambda_star - s.lambda_star).abs() < 1e-4);
        assert!((d.tau_a_star - s.tau_a_star).abs() < 0.02);
        assert!((d.required_ratio - 8.0).abs() < 1e-10);
    }

    #[test]
    fn identical_matrices_floor() {
        let x = SymMatrix::identity(2);
        let matched = vec![
            MatchedSolution {
                x: x.clone(),
                y: Some(x.clone()),
                w: Matrix::zeros(1, 2),
                eps: 1.0,
            };
            2
        ];
        let mismatched = vec![MismatchedSolution {
            from: 0,
            to: 1,
            x: x.clone(),
            y: Some(x.clone()),
            eps: 1.0,
        }];
        // α = β gives μ = 1
        let c = step3_minimize_mu(&matched, &mismatched, 0.9, 0.9, 1, 1).unwrap();
        assert!((c.mu1 - 1.0).abs() < 1e-12);
        assert!((c.mu2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dwell_zero_when_mu_product_is_one() {
        let d = step4_dwell_time(1.0, 1.0, 0.5, 0.2, LambdaSelection::Direct(0.3)).unwrap();
        assert_eq!(d.tau_a_star, 0.0);
        assert!(step4_dwell_time(1.0, 1.0, 0.5, 0.2, LambdaSelection::Direct(0.6)).is_err());
        assert!(step4_dwell_time(1.0, 1.0, 0.5, 0.2, LambdaSelection::Ratio(-1.0)).is_err());
    }

    #[test]
    fn zeta_single_identity() {
        let m = vec![MatchedSolution {
            x: SymMatrix::identity(2),
            y: Some(SymMatrix::identity(2)),
            w: Matrix::zeros(1, 2),
            eps: 1.0,
        }];
        assert_eq!(bound_constants(&m, &[], 2, 3).unwrap(), (4.0, 1.0));
    }

    #[test]
    fn decay_at_zero_length() {
        let s = fixtures::sec4_printed_solution();
        let (m, mm) = printed_solutions(&s);
        let sys = fixtures::sec4_system();
        let cert =
            certificate_from_solutions(&sys, 0.6, 1.2, LambdaSelection::Ratio(8.0), m, mm, vec![]).unwrap();
        let scheme = DwellTimeScheme::new(6.5, 1.0, cert.required_ratio);
        let b0 = theoretical_decay(&cert, &scheme, 20, 20);
        let expected = cert.zeta1 / cert.zeta2 * cert.mu1.max(1.0) * cert.mu1 * cert.mu2;
        assert!((b0 - expected).abs() < 1e-12 * expected);
        assert!(theoretical_decay(&cert, &scheme, 20, 21) < b0);
        let per_step = (cert.mu1 * cert.mu2).ln() / 6.5 - cert.lambda_star;
        assert!((per_step + 0.0238).abs() < 2e-3, "{per_step}");
    }

    #[test]
    fn uncontrollable_unstable_fails_naming_mode() {
        let one = |v: f64| Matrix::from_rows(&[[v, 0.0], [0.0, v]]);
        let mode = ModeMatrices::certain(one(1.2), Matrix::zeros(2, 2), Matrix::zeros(2, 2), 2, 2);
        let sys = SwitchedRoesserSystem {
            n1: 1,
            n2: 1,
            q: 2,
            r: 2,
            p: 2,
            d_h: 1,
            d_v: 1,
            delay_free: false,
            modes: vec![mode],
        };
        let mut cfg = SynthesisConfig::default();
        cfg.solver.max_iters = 2000;
        match step1_solve_matched(&sys, &cfg) {
            Err(SynthesisError::MatchedInfeasible { mode: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_mode_has_no_pairs() {
        assert!(ordered_pairs(1).is_empty());
        assert_eq!(ordered_pairs(3).len(), 6);
    }

    #[test]
    fn beta_ladder() {
        assert_eq!(next_beta(1.2), Some(1.5));
        assert_eq!(next_beta(3.5), None);
    }
}
