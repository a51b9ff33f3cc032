//! JSON system descriptions and run configurations.

use std::collections::BTreeMap;

use r2d_core::fixtures;
use r2d_core::model::{BoundaryConditions, ModeMatrices, SwitchedRoesserSystem, UncertaintyProfile, UncertaintyRealization};
use r2d_core::synthesis::{LambdaSelection, SynthesisCertificate};
use r2d_core::Matrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub q: usize,
    pub p: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Delays {
    pub d_h: usize,
    pub d_v: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeDoc {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "A_d")]
    pub a_d: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "H")]
    pub h: Matrix,
    #[serde(rename = "E1")]
    pub e1: Matrix,
    #[serde(rename = "E2")]
    pub e2: Matrix,
    #[serde(rename = "E3")]
    pub e3: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryEntry {
    pub i: i64,
    pub j: i64,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryDoc {
    pub z1: usize,
    pub z2: usize,
    #[serde(default)]
    pub h_values: Vec<BoundaryEntry>,
    #[serde(default)]
    pub v_values: Vec<BoundaryEntry>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub dims: Dims,
    pub delays: Delays,
    #[serde(default, skip_serializing_if = "is_false")]
    pub delay_free: bool,
    pub modes: Vec<ModeDoc>,
    pub boundary: BoundaryDoc,
    /// One realization per mode; missing means zero.
    #[serde(default)]
    pub uncertainty: Vec<UncertaintyRealization>,
}

/// A validated system with its boundary and uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub system: SwitchedRoesserSystem,
    pub boundary: BoundaryConditions,
    pub uncertainty: UncertaintyProfile,
}

fn entries(map: &BTreeMap<(i64, i64), Vec<f64>>) -> Vec<BoundaryEntry> {
    map.iter()
        .map(|(&(i, j), v)| BoundaryEntry { i, j, value: v.clone() })
        .collect()
}

impl SystemDocument {
    pub fn from_problem(p: &Problem) -> Self {
        let s = &p.system;
        Self {
            dims: Dims {
                n1: s.n1,
                n2: s.n2,
                q: s.q,
                p: s.p,
                r: s.r,
            },
            delays: Delays { d_h: s.d_h, d_v: s.d_v },
            delay_free: s.delay_free,
            modes: s
                .modes
                .iter()
                .map(|m| ModeDoc {
                    a: m.a.clone(),
                    a_d: m.a_d.clone(),
                    b: m.b.clone(),
                    h: m.h.clone(),
                    e1: m.e1.clone(),
                    e2: m.e2.clone(),
                    e3: m.e3.clone(),
                })
                .collect(),
            boundary: BoundaryDoc {
                z1: p.boundary.z1,
                z2: p.boundary.z2,
                h_values: entries(&p.boundary.h_values),
                v_values: entries(&p.boundary.v_values),
            },
            uncertainty: p.uncertainty.per_mode.clone(),
        }
    }

    /// Builds and validates the model objects.
    pub fn to_problem(&self) -> Result<Problem, CliError> {
        let invalid = |message: String| CliError::Parse {
            origin: "system".into(),
            message,
        };
        let system = SwitchedRoesserSystem {
            n1: self.dims.n1,
            n2: self.dims.n2,
            q: self.dims.q,
            r: self.dims.r,
            p: self.dims.p,
            d_h: self.delays.d_h,
            d_v: self.delays.d_v,
            delay_free: self.delay_free,
            modes: self
                .modes
                .iter()
                .map(|m| ModeMatrices {
                    a: m.a.clone(),
                    a_d: m.a_d.clone(),
                    b: m.b.clone(),
                    h: m.h.clone(),
                    e1: m.e1.clone(),
                    e2: m.e2.clone(),
                    e3: m.e3.clone(),
                })
                .collect(),
        };
        let violations = system.validate();
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(invalid(list.join("; ")));
        }
        let mut boundary = BoundaryConditions {
            z1: self.boundary.z1,
            z2: self.boundary.z2,
            ..BoundaryConditions::zero()
        };
        for e in &self.boundary.h_values {
            boundary.h_values.insert((e.i, e.j), e.value.clone());
        }
        for e in &self.boundary.v_values {
            boundary.v_values.insert((e.i, e.j), e.value.clone());
        }
        boundary.validate(&system).map_err(|e| invalid(format!("boundary: {e}")))?;
        let uncertainty = if self.uncertainty.is_empty() {
            UncertaintyProfile::zero(system.num_modes())
        } else {
            UncertaintyProfile {
                per_mode: self.uncertainty.clone(),
            }
        };
        uncertainty
            .validate(&system)
            .map_err(|e| invalid(format!("uncertainty: {e}")))?;
        Ok(Problem {
            system,
            boundary,
            uncertainty,
        })
    }
}

/// Plant modes and controller lags for simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LagPolicy {
    Constant(usize),
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<f64>,
    #[serde(default = "default_n0")]
    pub n0: f64,
    pub tau_a: f64,
    pub horizon: usize,
    pub lag: LagPolicy,
    /// Explicit switch instants; a periodic plan from `tau_a` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instants: Option<Vec<usize>>,
    /// One-based segment modes for explicit instants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<usize>>,
}

fn default_n0() -> f64 {
    1.0
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(CliError::Config(format!("beta = {} must exceed 1", self.beta)));
        }
        if self.horizon < 1 {
            return Err(CliError::Config("horizon must be at least 1".into()));
        }
        if self.ratio.is_some() == self.lambda_star.is_some() {
            return Err(CliError::Config("give exactly one of ratio and lambda_star".into()));
        }
        if !(self.tau_a > 0.0) {
            return Err(CliError::Config(format!("tau_a = {} must be positive", self.tau_a)));
        }
        if !(self.n0 >= 0.0) {
            return Err(CliError::Config(format!("N0 = {} must be nonnegative", self.n0)));
        }
        Ok(())
    }

    pub fn lambda_selection(&self) -> LambdaSelection {
        match (self.ratio, self.lambda_star) {
            (_, Some(l)) => LambdaSelection::Direct(l),
            (Some(r), None) => LambdaSelection::Ratio(r),
            (None, None) => LambdaSelection::Ratio(fixtures::SEC4_RATIO),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: fixtures::SEC4_ALPHA,
            beta: fixtures::SEC4_BETA,
            seed: 0,
            ratio: Some(fixtures::SEC4_RATIO),
            lambda_star: None,
            n0: 1.0,
            tau_a: fixtures::SEC4_TAU_A,
            horizon: 60,
            lag: LagPolicy::Constant(fixtures::SEC4_LAG),
            instants: None,
            modes: None,
        }
    }
}

pub const EXAMPLES: &[&str] = &["sec4"];

pub fn example(name: &str) -> Result<(SystemDocument, RunConfig), CliError> {
    match name {
        "sec4" => {
            let system = fixtures::sec4_system();
            let boundary = fixtures::sec4_boundary(&system);
            let problem = Problem {
                boundary,
                uncertainty: fixtures::sec4_uncertainty(),
                system,
            };
            let run = RunConfig::default();
            Ok((SystemDocument::from_problem(&problem), run))
        }
        _ => Err(CliError::UnknownExample {
            name: name.to_string(),
            available: EXAMPLES.join(", "),
        }),
    }
}

/// Parses JSON, reporting the field path and position of any error.
pub fn parse_json<T: DeserializeOwned>(origin: &str, text: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Parse {
            origin: origin.to_string(),
            message: format!("line {} column {} at '{}': {}", inner.line(), inner.column(), path, inner),
        }
    })?;
    de.end().map_err(|e| CliError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn parse_system(origin: &str, text: &str) -> Result<SystemDocument, CliError> {
    parse_json(origin, text)
}

pub fn parse_run_config(origin: &str, text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = parse_json(origin, text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_certificate(origin: &str, text: &str) -> Result<SynthesisCertificate, CliError> {
    parse_json(origin, text)
}
