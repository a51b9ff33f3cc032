//! The four subcommands, independent of argument parsing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use r2d_core::fixtures;
use r2d_core::lmi::{Structure, Value, ROUNDING_SLACK};
use r2d_core::sdp::check_assignment;
use r2d_core::sim::{
    average_dwell_time_check, build_switching_plan, estimate_decay, lyapunov_trace, periodic_plan, simulate,
    verify_bound, BoundVerdict, DwellCheck, SwitchingPlan, TrajectoryGrid,
};
use r2d_core::synthesis::{
    certificate_from_solutions, certificate_problems, printed_solutions, synthesize, DwellTimeScheme,
    SynthesisCertificate, SynthesisConfig, SynthesisError,
};
use serde::{Serialize, Serializer};

use crate::document::{self, parse_certificate, parse_run_config, parse_system, LagPolicy, Problem, RunConfig};
use crate::error::CliError;
use crate::format::{g17, to_json};

/// Where the system comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSource {
    File(PathBuf),
    Example(String),
}

/// Command-line values that replace run-configuration fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub ratio: Option<f64>,
    pub lambda_star: Option<f64>,
    pub n0: Option<f64>,
    pub tau_a: Option<f64>,
    pub lag: Option<Vec<usize>>,
    pub horizon: Option<usize>,
}

impl RunOverrides {
    pub fn apply(&self, run: &mut RunConfig) {
        if let Some(v) = self.alpha {
            run.alpha = v;
        }
        if let Some(v) = self.beta {
            run.beta = v;
        }
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(v) = self.ratio {
            run.ratio = Some(v);
            run.lambda_star = None;
        }
        if let Some(v) = self.lambda_star {
            run.lambda_star = Some(v);
            run.ratio = None;
        }
        if let Some(v) = self.n0 {
            run.n0 = v;
        }
        if let Some(v) = self.tau_a {
            run.tau_a = v;
        }
        if let Some(v) = &self.lag {
            run.lag = match v.as_slice() {
                [one] => LagPolicy::Constant(*one),
                many => LagPolicy::Explicit(many.to_vec()),
            };
        }
        if let Some(v) = self.horizon {
            run.horizon = v;
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    to_json(value).map_err(|e| CliError::Core(e.to_string()))
}

/// Loads the system and the run configuration (file, example default, or
/// built-in default) with overrides applied and validated.
pub fn load(
    source: &SystemSource,
    config: Option<&Path>,
    overrides: &RunOverrides,
) -> Result<(Problem, RunConfig), CliError> {
    let (doc, example_run) = match source {
        SystemSource::File(p) => (parse_system(&p.display().to_string(), &read(p)?)?, None),
        SystemSource::Example(name) => {
            let (d, r) = document::example(name)?;
            (d, Some(r))
        }
    };
    let problem = doc.to_problem()?;
    let mut run = match config {
        Some(p) => parse_run_config(&p.display().to_string(), &read(p)?)?,
        None => example_run.unwrap_or_default(),
    };
    overrides.apply(&mut run);
    run.validate()?;
    Ok((problem, run))
}

pub fn load_certificate(path: &Path) -> Result<SynthesisCertificate, CliError> {
    parse_certificate(&path.display().to_string(), &read(path)?)
}

/// Writes `system.json` and `run.json` for a built-in fixture.
pub fn cmd_example(name: &str, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let (doc, run) = document::example(name)?;
    Ok(vec![
        write(out, "system.json", &json(&doc)?)?,
        write(out, "run.json", &json(&run)?)?,
    ])
}

pub fn synthesis_config(run: &RunConfig) -> SynthesisConfig {
    SynthesisConfig {
        alpha: run.alpha,
        beta: run.beta,
        seed: run.seed,
        lambda: run.lambda_selection(),
        ..SynthesisConfig::default()
    }
}

pub fn synth_report(cert: &SynthesisCertificate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "alpha = {}  beta = {}", g17(cert.alpha), g17(cert.beta));
    for (k, g) in cert.gains.iter().enumerate() {
        let _ = writeln!(s, "K{} =", k + 1);
        for r in 0..g.rows() {
            let row: Vec<String> = (0..g.cols()).map(|c| format!("{:>12.6}", g[(r, c)])).collect();
            let _ = writeln!(s, "  [{}]", row.join(" "));
        }
    }
    let _ = writeln!(
        s,
        "mu1 = {:.6}  mu2 = {:.6}  mu = {:.6}{}",
        cert.mu1,
        cert.mu2,
        cert.mu,
        if cert.mu_floor_applied { "  (floor applied)" } else { "" }
    );
    let _ = writeln!(
        s,
        "lambda- = {:.6}  lambda+ = {:.6}  lambda* = {:.6}",
        cert.lambda_minus, cert.lambda_plus, cert.lambda_star
    );
    let _ = writeln!(
        s,
        "tau_a* = {:.6}  required T-/T+ = {:.6}",
        cert.tau_a_star, cert.required_ratio
    );
    let _ = writeln!(s, "zeta1 = {:.6}  zeta2 = {:.6}", cert.zeta1, cert.zeta2);
    for m in &cert.margins {
        let _ = writeln!(s, "{:<12} lambda_max = {:.3e} (required <= {:.3e})", m.name, m.lambda_max, -m.required);
    }
    s
}

/// Runs the synthesis procedure and writes `certificate.json` and `report.txt`.
pub fn cmd_synth(problem: &Problem, run: &RunConfig, out: &Path) -> Result<SynthesisCertificate, CliError> {
    let cfg = synthesis_config(run);
    let cert = synthesize(&problem.system, &cfg).map_err(|e| match e {
        SynthesisError::MatchedInfeasible { .. } | SynthesisError::MismatchedInfeasible { .. } => {
            CliError::Infeasible(e.to_string())
        }
        other => CliError::Core(other.to_string()),
    })?;
    info!("tau_a* = {}", cert.tau_a_star);
    write(out, "certificate.json", &json(&cert)?)?;
    write(out, "report.txt", &synth_report(&cert))?;
    Ok(cert)
}

/// What `check` substitutes.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckTarget {
    Printed,
    Certificate(Box<SynthesisCertificate>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub name: String,
    pub lambda_max: f64,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityRow {
    pub name: String,
    pub min_eigenvalue: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub constraints: Vec<ConstraintRow>,
    pub positivity: Vec<PositivityRow>,
    pub passed: bool,
}

impl CheckReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.constraints {
            let _ = writeln!(
                s,
                "{:<12} lambda_max = {:>11.3e}  threshold {:>11.3e}  {}",
                c.name,
                c.lambda_max,
                c.threshold,
                if c.holds { "ok" } else { "VIOLATED" }
            );
        }
        for p in &self.positivity {
            if !p.holds {
                let _ = writeln!(s, "{:<12} not positive definite (min eigenvalue {:.3e})", p.name, p.min_eigenvalue);
            }
        }
        let _ = writeln!(s, "{}", if self.passed { "all constraints hold" } else { "check failed" });
        s
    }
}

/// Parses `name=value`.
pub fn parse_override(s: &str) -> Result<(String, f64), CliError> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{s}' is not name=value")))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("override '{s}' has a non-numeric value")))?;
    Ok((name.trim().to_string(), v))
}

/// Substitutes a solution set into every inequality and reports margins.
///
/// Printed solutions pass at `λ_max ≤ 10⁻³`; certificates need
/// `λ_max ≤ −δ_strict/2`. Positive variables must stay positive in both.
pub fn cmd_check(problem: &Problem, target: &CheckTarget, overrides: &[(String, f64)]) -> Result<CheckReport, CliError> {
    let sys = &problem.system;
    let core = |e: SynthesisError| CliError::Core(e.to_string());
    let (cert, printed) = match target {
        CheckTarget::Printed => {
            let (m, mm) = printed_solutions(&fixtures::sec4_printed_solution());
            if m.len() != sys.num_modes() || m[0].x.order() != sys.n() {
                return Err(CliError::Config("printed solutions exist only for the sec4 system".into()));
            }
            let cert = certificate_from_solutions(
                sys,
                fixtures::SEC4_ALPHA,
                fixtures::SEC4_BETA,
                r2d_core::synthesis::LambdaSelection::Ratio(fixtures::SEC4_RATIO),
                m,
                mm,
                Vec::new(),
            )
            .map_err(core)?;
            (cert, true)
        }
        CheckTarget::Certificate(c) => ((**c).clone(), false),
    };
    let mut problems = certificate_problems(sys, &cert, Structure::Full).map_err(core)?;
    for (name, v) in overrides {
        let mut used = false;
        for (_, a) in &mut problems {
            if a.get(name).is_some() {
                a.set(name.clone(), Value::Scalar(*v));
                used = true;
            }
        }
        if !used {
            return Err(CliError::Config(format!("no scalar variable named '{name}'")));
        }
    }
    let mut constraints = Vec::new();
    let mut positivity = Vec::new();
    for (p, a) in &problems {
        let r = check_assignment(p, a).map_err(|e| CliError::Core(e.to_string()))?;
        for (name, lm, delta) in r.constraints {
            let threshold = if printed { ROUNDING_SLACK } else { -delta / 2.0 };
            constraints.push(ConstraintRow {
                name,
                lambda_max: lm,
                threshold,
                holds: lm <= threshold,
            });
        }
        for (name, min) in r.positive {
            positivity.push(PositivityRow {
                name,
                min_eigenvalue: min,
                holds: min > 0.0,
            });
        }
    }
    let passed = constraints.iter().all(|c| c.holds) && positivity.iter().all(|p| p.holds);
    Ok(CheckReport {
        constraints,
        positivity,
        passed,
    })
}

/// The switching plan a run configuration describes. Modes in the
/// configuration are one-based.
pub fn plan_for(run: &RunConfig, num_modes: usize) -> Result<SwitchingPlan, CliError> {
    let bad = |e: r2d_core::sim::SimError| CliError::Config(e.to_string());
    match &run.instants {
        Some(instants) => {
            let modes: Vec<usize> = match &run.modes {
                Some(m) => m
                    .iter()
                    .map(|&k| {
                        if k == 0 || k > num_modes {
                            Err(CliError::Config(format!("mode {k} outside 1..={num_modes}")))
                        } else {
                            Ok(k - 1)
                        }
                    })
                    .collect::<Result<_, _>>()?,
                None => (0..=instants.len()).map(|s| s % num_modes).collect(),
            };
            let lags = match &run.lag {
                LagPolicy::Constant(l) => vec![*l; instants.len()],
                LagPolicy::Explicit(v) => v.clone(),
            };
            build_switching_plan(instants.clone(), modes, lags, run.horizon).map_err(bad)
        }
        None => {
            let lag = match &run.lag {
                LagPolicy::Constant(l) => *l,
                LagPolicy::Explicit(v) => *v.first().unwrap_or(&0),
            };
            let mut plan = periodic_plan(run.tau_a, lag, num_modes, 0, run.horizon).map_err(bad)?;
            if let LagPolicy::Explicit(v) = &run.lag {
                if v.len() != plan.switch_instants.len() {
                    return Err(CliError::Config(format!(
                        "{} lags given for {} periodic switches",
                        v.len(),
                        plan.switch_instants.len()
                    )));
                }
                plan = build_switching_plan(plan.switch_instants, plan.mode_sequence, v.clone(), run.horizon)
                    .map_err(bad)?;
            }
            Ok(plan)
        }
    }
}

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&g17(*v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovCounts {
    pub matched_evaluations: usize,
    pub mismatched_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub horizon: usize,
    pub completed: usize,
    pub diverged: bool,
    pub closed_loop: bool,
    pub z: usize,
    /// Fitted decay rate; the string `"inf"` when the fit is degenerate.
    #[serde(serialize_with = "finite_or_inf")]
    pub c: f64,
    pub eta: f64,
    pub c_norm: f64,
    pub fit_start: usize,
    pub fit_end: usize,
    pub degenerate: bool,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub switch_instants: Vec<usize>,
    pub dwell_check: DwellCheck,
    pub t_minus: usize,
    pub t_plus: usize,
    #[serde(serialize_with = "finite_or_inf")]
    pub realized_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundVerdict>,
}

/// Everything `simulate` produces, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub trajectory_csv: String,
    pub diagonals_csv: String,
    pub summary: SimulationSummary,
    pub plot: String,
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(g17).unwrap_or_default()
}

/// Simulates the system, closed loop when a certificate is supplied.
pub fn run_simulation(
    problem: &Problem,
    cert: Option<&SynthesisCertificate>,
    run: &RunConfig,
    z: Option<usize>,
) -> Result<SimulationOutput, CliError> {
    let sys = &problem.system;
    let core = |e: r2d_core::sim::SimError| CliError::Core(e.to_string());
    let plan = plan_for(run, sys.num_modes())?;
    let gains = cert.map(|c| c.gains.as_slice());
    let grid = simulate(sys, &problem.boundary, &plan, &problem.uncertainty, gains).map_err(core)?;
    let trace = cert.map(|c| lyapunov_trace(&grid, c, &plan)).transpose().map_err(core)?;

    let (n1, n2) = (sys.n1, sys.n2);
    let mut traj = String::from("i,j,D");
    for k in 1..=n1 {
        let _ = write!(traj, ",x_h{k}");
    }
    for k in 1..=n2 {
        let _ = write!(traj, ",x_v{k}");
    }
    traj.push_str(",mode_sys,mode_ctrl,V\n");
    let mut diag = String::from("D,energy,V_sum,T_plus_cum,T_minus_cum\n");
    let (mut tp, mut tm) = (0usize, 0usize);
    for d in 0..=grid.completed {
        for (idx, (i, j)) in TrajectoryGrid::cells(d).enumerate() {
            let _ = write!(traj, "{i},{j},{d}");
            for v in grid.xh(i, j).into_iter().chain(grid.xv(i, j)) {
                let _ = write!(traj, ",{}", g17(v));
            }
            let v = trace.as_ref().map(|t| t.cells[d][idx]);
            let _ = writeln!(traj, ",{},{},{}", grid.sigma[d] + 1, grid.sigma_ctrl[d] + 1, csv_opt(v));
        }
        if plan.is_mismatched(d) {
            tp += 1;
        } else {
            tm += 1;
        }
        let vs = trace.as_ref().map(|t| t.diagonal_sums[d]);
        let _ = writeln!(diag, "{d},{},{},{tp},{tm}", g17(grid.energy[d]), csv_opt(vs));
    }

    let z = z.unwrap_or_else(|| problem.boundary.extent()).min(grid.completed);
    let est = estimate_decay(&grid, z).map_err(core)?;
    let end = grid.completed;
    let dwell_check = average_dwell_time_check(&plan, z, end, run.n0, run.tau_a);
    let bound = cert.map(|c| {
        if grid.diverged {
            BoundVerdict::NotApplicable {
                reason: "trajectory diverged".into(),
            }
        } else {
            let scheme = DwellTimeScheme::new(run.tau_a, run.n0, c.required_ratio);
            verify_bound(&est, c, &scheme, &plan)
        }
    });
    let summary = SimulationSummary {
        horizon: run.horizon,
        completed: grid.completed,
        diverged: grid.diverged,
        closed_loop: cert.is_some(),
        z,
        c: est.c,
        eta: est.eta,
        c_norm: est.c_norm,
        fit_start: est.fit_start,
        fit_end: est.fit_end,
        degenerate: est.degenerate,
        initial_energy: grid.energy[0],
        final_energy: grid.energy[grid.completed],
        switch_instants: plan.switch_instants.clone(),
        dwell_check,
        t_minus: plan.t_minus(z, end),
        t_plus: plan.t_plus(z, end),
        realized_ratio: plan.realized_ratio(z, end),
        lyapunov: trace.as_ref().map(|t| LyapunovCounts {
            matched_evaluations: t.matched_evaluations,
            mismatched_evaluations: t.mismatched_evaluations,
        }),
        bound,
    };
    Ok(SimulationOutput {
        trajectory_csv: traj,
        diagonals_csv: diag,
        summary,
        plot: plot_script(n1, n2),
    })
}

fn plot_script(n1: usize, n2: usize) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    for k in 0..n1 + n2 {
        let (name, idx) = if k < n1 { ("x_h", k + 1) } else { ("x_v", k - n1 + 1) };
        let _ = writeln!(
            s,
            "set output '{name}{idx}.png'\nsplot 'trajectory.csv' using 1:2:{} with points pt 7 ps 0.4",
            4 + k
        );
    }
    s.push_str("set output 'energy.png'\nset logscale y\nplot 'diagonals.csv' using 1:2 with linespoints\nunset logscale y\n");
    let _ = writeln!(
        s,
        "set output 'switching.png'\nplot 'trajectory.csv' using 3:{} with steps title 'sigma', '' using 3:{} with steps title 'sigma_ctrl'",
        4 + n1 + n2,
        5 + n1 + n2
    );
    s
}

/// Writes `trajectory.csv`, `diagonals.csv`, `summary.json` and, when asked,
/// `plot.gp`. Divergence is reported after the files are written.
pub fn cmd_simulate(
    problem: &Problem,
    cert: Option<&SynthesisCertificate>,
    run: &RunConfig,
    z: Option<usize>,
    out: &Path,
    plot: bool,
) -> Result<SimulationSummary, CliError> {
    let o = run_simulation(problem, cert, run, z)?;
    write(out, "trajectory.csv", &o.trajectory_csv)?;
    write(out, "diagonals.csv", &o.diagonals_csv)?;
    write(out, "summary.json", &json(&o.summary)?)?;
    if plot {
        write(out, "plot.gp", &o.plot)?;
    }
    if o.summary.diverged {
        return Err(CliError::Diverged(o.summary.completed));
    }
    Ok(o.summary)
}
