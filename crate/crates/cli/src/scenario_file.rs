//! Scenario documents: TOML by default, JSON when the path ends in `.json`.
//!
//! ```toml
//! model = "double_integrator"
//! T = 20.0
//! N = 200
//! q0 = [0.0]
//! v0 = [0.0]
//! qT = [5.0]
//! vT = [0.0]
//!
//! [cost]
//! w_v = [1.0]
//! w_u = [1.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use turnpike_core::models::HovercraftParams;
use turnpike_core::nlp::SolverOptions;
use turnpike_core::transcription::{Scheme, TranscriptionConfig};
use turnpike_core::{BoxBounds, ModelKind, Scenario, StageCost, State};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    DoubleIntegrator,
    Hovercraft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub w_v: Vec<f64>,
    pub w_u: Vec<f64>,
    /// Overall factor; `0.5` gives `½(‖v‖² + ‖u‖²)` for unit weights.
    #[serde(default = "half")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ref: Option<Vec<f64>>,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HovercraftSection {
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_upper: Option<Vec<f64>>,
    /// Bounds on the stacked state `(q, v)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_inner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lbfgs_memory: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sqp: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: ModelName,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N", default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub scheme: Scheme,
    pub q0: Vec<f64>,
    pub v0: Vec<f64>,
    #[serde(rename = "qT")]
    pub qt: Vec<f64>,
    #[serde(rename = "vT")]
    pub vt: Vec<f64>,
    pub cost: CostSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hovercraft: Option<HovercraftSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
}

fn default_nodes() -> usize {
    200
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl ScenarioFile {
    pub fn parse_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(format!("scenario parse error: {e}")))
    }

    pub fn parse_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| bad(format!("scenario parse error: {e}")))
    }

    /// Reads and validates a scenario; nothing is written on failure.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let file = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::parse_json(&text)?
        } else {
            Self::parse_toml(&text)?
        };
        file.scenario()?;
        file.solver_options()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario documents always serialize")
    }

    pub fn model(&self) -> Result<ModelKind, CliError> {
        match self.model {
            ModelName::DoubleIntegrator => {
                if self.hovercraft.is_some() {
                    return Err(bad("the [hovercraft] table only applies to model = \"hovercraft\""));
                }
                Ok(ModelKind::double_integrator(self.q0.len()))
            }
            ModelName::Hovercraft => {
                let mut p = HovercraftParams::default();
                if let Some(h) = &self.hovercraft {
                    p.lever = h.r;
                    p.mass = h.m.unwrap_or(p.mass);
                    p.inertia = h.j.unwrap_or(p.inertia);
                }
                p.validate().map_err(|e| bad(e.to_string()))?;
                Ok(ModelKind::hovercraft(p))
            }
        }
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let state = |q: &[f64], v: &[f64]| State::new(q.to_vec(), v.to_vec()).map_err(|e| bad(e.to_string()));
        let cost = StageCost {
            w_v: self.cost.w_v.clone(),
            w_u: self.cost.w_u.clone(),
            scale: self.cost.scale,
            v_ref: self.cost.v_ref.clone().unwrap_or_else(|| vec![0.0; self.cost.w_v.len()]),
        };
        let scenario = Scenario::new(self.model()?, cost, state(&self.q0, &self.v0)?, state(&self.qt, &self.vt)?, self.horizon)
            .map_err(|e| bad(e.to_string()))?;
        let Some(b) = &self.bounds else {
            return Ok(scenario);
        };
        let boxed = |lo: &Option<Vec<f64>>, hi: &Option<Vec<f64>>, n: usize| -> Result<Option<BoxBounds>, CliError> {
            if lo.is_none() && hi.is_none() {
                return Ok(None);
            }
            let lo = lo.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; n]);
            let hi = hi.clone().unwrap_or_else(|| vec![f64::INFINITY; n]);
            BoxBounds::new(lo, hi).map(Some).map_err(|e| bad(e.to_string()))
        };
        let control = boxed(&b.u_lower, &b.u_upper, scenario.nu())?;
        let state = boxed(&b.x_lower, &b.x_upper, 2 * scenario.nq())?;
        scenario.with_bounds(control, state).map_err(|e| bad(e.to_string()))
    }

    pub fn transcription(&self) -> TranscriptionConfig {
        TranscriptionConfig {
            intervals: self.nodes,
            scheme: self.scheme,
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions, CliError> {
        let mut o = SolverOptions::default();
        if let Some(s) = &self.solver {
            o.tol_kkt = s.tol.unwrap_or(o.tol_kkt);
            o.max_outer = s.max_outer.unwrap_or(o.max_outer);
            o.max_inner = s.max_inner.unwrap_or(o.max_inner);
            o.penalty_init = s.penalty_init.unwrap_or(o.penalty_init);
            o.penalty_growth = s.penalty_growth.unwrap_or(o.penalty_growth);
            o.lbfgs_memory = s.lbfgs_memory.unwrap_or(o.lbfgs_memory);
            o.max_sqp = s.max_sqp.unwrap_or(o.max_sqp);
            o.restarts = s.restarts.unwrap_or(o.restarts);
            o.seed = s.seed.unwrap_or(o.seed);
        }
        o.validate().map_err(|e| bad(e.to_string()))?;
        if self.nodes < 2 {
            return Err(bad("N must be at least 2"));
        }
        Ok(o)
    }

    /// Applies `--nodes`, `--tol` and `--seed` so the manifest echoes the
    /// effective settings.
    pub fn with_overrides(mut self, nodes: Option<usize>, tol: Option<f64>, seed: Option<u64>) -> Result<Self, CliError> {
        if let Some(n) = nodes {
            self.nodes = n;
        }
        if tol.is_some() || seed.is_some() {
            let s = self.solver.get_or_insert_with(SolverSection::default);
            s.tol = tol.or(s.tol);
            s.seed = seed.or(s.seed);
        }
        self.solver_options()?;
        Ok(self)
    }
}
