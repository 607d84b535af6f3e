//! Shared domain types: states, trajectories, stage costs and scenarios.
//!
//! All types are immutable once validated. Trajectories are represented by
//! their node values on a strictly increasing time grid; between nodes both
//! states and controls are interpolated linearly, and integrals are taken with
//! the trapezoidal rule so that post-hoc costs match the collocation objective.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::models::ModelKind;

/// Phase-space point `x = (q, v)` of a second-order mechanical system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if q.len() != v.len() {
            return Err(contract(format!(
                "configuration has {} entries but velocity has {}",
                q.len(),
                v.len()
            )));
        }
        if q.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(contract("state entries must be finite"));
        }
        Ok(Self { q, v })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            q: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Stacked first-order vector `(q, v)`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.dim());
        x.extend_from_slice(&self.q);
        x.extend_from_slice(&self.v);
        x
    }

    pub fn from_stacked(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(contract("stacked state must have even length"));
        }
        let n = x.len() / 2;
        Self::new(x[..n].to_vec(), x[n..].to_vec())
    }

    /// Euclidean distance between two stacked states.
    pub fn distance(&self, other: &State) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Node values of a (state, control, optional costate) trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<State>,
    controls: Vec<Vec<f64>>,
    costates: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        states: Vec<State>,
        controls: Vec<Vec<f64>>,
        costates: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if times.len() < 2 {
            return Err(contract("a trajectory needs at least two nodes"));
        }
        if states.len() != times.len() || controls.len() != times.len() {
            return Err(contract(format!(
                "{} times, {} states and {} controls",
                times.len(),
                states.len(),
                controls.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(contract("time grid must start at 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(contract("time grid must be finite and strictly increasing"));
        }
        let nq = states[0].dim();
        let nu = controls[0].len();
        if states.iter().any(|s| s.dim() != nq) || controls.iter().any(|u| u.len() != nu) {
            return Err(contract("node dimensions are not uniform"));
        }
        if controls.iter().flatten().any(|x| !x.is_finite()) {
            return Err(contract("controls must be finite"));
        }
        if let Some(lam) = &costates {
            if lam.len() != times.len() || lam.iter().any(|l| l.len() != 2 * nq) {
                return Err(contract("costates must have 2·n_q entries per node"));
            }
        }
        Ok(Self {
            times,
            states,
            controls,
            costates,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    pub fn costates(&self) -> Option<&[Vec<f64>]> {
        self.costates.as_deref()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("validated non-empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn nq(&self) -> usize {
        self.states[0].dim()
    }

    pub fn nu(&self) -> usize {
        self.controls[0].len()
    }

    /// Piecewise-linear interpolation of state and control at `t`.
    ///
    /// Node times return the stored values exactly.
    pub fn eval(&self, t: f64) -> Result<(State, Vec<f64>)> {
        let end = self.horizon();
        if !(0.0..=end).contains(&t) {
            return Err(Error::Range { t, start: 0.0, end });
        }
        // first index with times[k] > t
        let k = self.times.partition_point(|&s| s <= t);
        if k > 0 && self.times[k - 1] == t {
            return Ok((self.states[k - 1].clone(), self.controls[k - 1].clone()));
        }
        let (i, j) = (k - 1, k);
        let w = (t - self.times[i]) / (self.times[j] - self.times[i]);
        let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
        };
        let s = State {
            q: lerp(&self.states[i].q, &self.states[j].q),
            v: lerp(&self.states[i].v, &self.states[j].v),
        };
        Ok((s, lerp(&self.controls[i], &self.controls[j])))
    }

    /// Trapezoidal quadrature of the stage cost over the grid.
    pub fn cost(&self, cost: &StageCost) -> Result<f64> {
        if cost.w_v.len() != self.nq() || cost.w_u.len() != self.nu() {
            return Err(contract(format!(
                "cost weights ({}, {}) do not match trajectory dims ({}, {})",
                cost.w_v.len(),
                cost.w_u.len(),
                self.nq(),
                self.nu()
            )));
        }
        let stage: Vec<f64> = self
            .states
            .iter()
            .zip(&self.controls)
            .map(|(s, u)| cost.eval(&s.v, u))
            .collect();
        Ok(self
            .times
            .windows(2)
            .zip(stage.windows(2))
            .map(|(t, l)| 0.5 * (t[1] - t[0]) * (l[0] + l[1]))
            .sum())
    }
}

/// Quadratic stage cost `scale · (Σ w_v (v − v_ref)² + Σ w_u u²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    pub w_v: Vec<f64>,
    pub w_u: Vec<f64>,
    pub scale: f64,
    /// Velocity the cost is centred on; zero for both shipped models.
    #[serde(default)]
    pub v_ref: Vec<f64>,
}

impl StageCost {
    pub fn new(w_v: Vec<f64>, w_u: Vec<f64>, scale: f64) -> Result<Self> {
        let nq = w_v.len();
        Self::with_reference(w_v, w_u, scale, vec![0.0; nq])
    }

    pub fn with_reference(w_v: Vec<f64>, w_u: Vec<f64>, scale: f64, v_ref: Vec<f64>) -> Result<Self> {
        let cost = Self {
            w_v,
            w_u,
            scale,
            v_ref,
        };
        cost.validate()?;
        Ok(cost)
    }

    /// `½(‖v‖² + ‖u‖²)` in the given dimensions.
    pub fn half_squared(nq: usize, nu: usize) -> Self {
        Self {
            w_v: vec![1.0; nq],
            w_u: vec![1.0; nu],
            scale: 0.5,
            v_ref: vec![0.0; nq],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(contract("cost scale must be positive"));
        }
        if self.w_v.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(contract("velocity weights must be nonnegative"));
        }
        if self.w_u.is_empty() || self.w_u.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(contract("control weights must be positive"));
        }
        if self.v_ref.len() != self.w_v.len() || self.v_ref.iter().any(|x| !x.is_finite()) {
            return Err(contract("velocity reference must match the velocity weights"));
        }
        Ok(())
    }

    pub fn eval(&self, v: &[f64], u: &[f64]) -> f64 {
        let dv: f64 = self
            .w_v
            .iter()
            .zip(v)
            .zip(&self.v_ref)
            .map(|((w, x), r)| w * (x - r) * (x - r))
            .sum();
        let du: f64 = self.w_u.iter().zip(u).map(|(w, x)| w * x * x).sum();
        self.scale * (dv + du)
    }

    /// Partial derivatives `(∂ℓ/∂v, ∂ℓ/∂u)`.
    pub fn gradient(&self, v: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let gv = self
            .w_v
            .iter()
            .zip(v)
            .zip(&self.v_ref)
            .map(|((w, x), r)| 2.0 * self.scale * w * (x - r))
            .collect();
        let gu = self
            .w_u
            .iter()
            .zip(u)
            .map(|(w, x)| 2.0 * self.scale * w * x)
            .collect();
        (gv, gu)
    }
}

/// Componentwise box `lower ≤ x ≤ upper`; infinite entries are unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(contract("box bounds must have equal lengths"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(contract("box bounds need lower ≤ upper"));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).any(|b| b.is_finite())
    }
}

/// A complete fixed-horizon, fixed-endpoint optimal control problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: ModelKind,
    pub cost: StageCost,
    pub x0: State,
    pub xt: State,
    pub horizon: f64,
    pub control_bounds: Option<BoxBounds>,
    /// Bounds on the stacked state `(q, v)`.
    pub state_bounds: Option<BoxBounds>,
}

impl Scenario {
    pub fn new(model: ModelKind, cost: StageCost, x0: State, xt: State, horizon: f64) -> Result<Self> {
        let s = Self {
            model,
            cost,
            x0,
            xt,
            horizon,
            control_bounds: None,
            state_bounds: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_bounds(mut self, control: Option<BoxBounds>, state: Option<BoxBounds>) -> Result<Self> {
        self.control_bounds = control;
        self.state_bounds = state;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        use crate::models::Model;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(contract("horizon must be positive and finite"));
        }
        let nq = self.model.nq();
        let nu = self.model.nu();
        for (name, x) in [("x0", &self.x0), ("xT", &self.xt)] {
            if x.dim() != nq {
                return Err(contract(format!("{name} has dimension {} but model needs {nq}", x.dim())));
            }
            if x.q.iter().chain(&x.v).any(|v| !v.is_finite()) {
                return Err(contract(format!("{name} must be finite")));
            }
        }
        self.cost.validate()?;
        if self.cost.w_v.len() != nq || self.cost.w_u.len() != nu {
            return Err(contract("cost weights do not match model dimensions"));
        }
        if let Some(b) = &self.control_bounds {
            if b.dim() != nu || !b.contains(&vec![0.0; nu]) {
                return Err(contract("control bounds must have n_u entries and contain u = 0"));
            }
        }
        if let Some(b) = &self.state_bounds {
            if b.dim() != 2 * nq || !b.contains(&self.x0.stacked()) || !b.contains(&self.xt.stacked()) {
                return Err(contract("state bounds must have 2·n_q entries and contain both boundary states"));
            }
        }
        Ok(())
    }

    pub fn nq(&self) -> usize {
        use crate::models::Model;
        self.model.nq()
    }

    pub fn nu(&self) -> usize {
        use crate::models::Model;
        self.model.nu()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t: f64) -> Vec<f64> {
        (0..=n).map(|k| t * k as f64 / n as f64).collect()
    }

    fn constant_traj(n: usize, t: f64, v: f64, u: f64) -> Trajectory {
        let times = grid(n, t);
        let states = times.iter().map(|&s| State::new(vec![v * s], vec![v]).unwrap()).collect();
        let controls = vec![vec![u]; n + 1];
        Trajectory::new(times, states, controls, None).unwrap()
    }

    #[test]
    fn eval_at_nodes_is_exact() {
        let times = vec![0.0, 0.3, 0.7, 1.1];
        let states: Vec<State> = (0..4)
            .map(|k| State::new(vec![0.1 * k as f64 + 1.0 / 3.0], vec![(k as f64).sin()]).unwrap())
            .collect();
        let controls: Vec<Vec<f64>> = (0..4).map(|k| vec![(k as f64).cos() / 7.0]).collect();
        let traj = Trajectory::new(times.clone(), states.clone(), controls.clone(), None).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let (s, u) = traj.eval(t).unwrap();
            assert_eq!(s, states[k]);
            assert_eq!(u, controls[k]);
        }
    }

    #[test]
    fn eval_constant_and_midpoint() {
        let traj = constant_traj(7, 20.0, 0.25, 0.0);
        assert_eq!(traj.eval(13.37).unwrap().0.v, vec![0.25]);

        let times = vec![0.0, 1.0];
        let states = vec![State::new(vec![0.0], vec![0.0]).unwrap(), State::new(vec![0.0], vec![1.0]).unwrap()];
        let traj = Trajectory::new(times, states, vec![vec![0.0]; 2], None).unwrap();
        assert_eq!(traj.eval(0.5).unwrap().0.v, vec![0.5]);
    }

    #[test]
    fn eval_out_of_range() {
        let traj = constant_traj(4, 1.0, 0.0, 0.0);
        assert!(matches!(traj.eval(1.5), Err(Error::Range { .. })));
        assert!(matches!(traj.eval(-1e-9), Err(Error::Range { .. })));
    }

    #[test]
    fn cost_of_constant_integrands() {
        let c = StageCost::half_squared(1, 1);
        assert_eq!(constant_traj(10, 20.0, 0.0, 0.0).cost(&c).unwrap(), 0.0);
        let val = constant_traj(10, 20.0, 0.25, 0.0).cost(&c).unwrap();
        assert!((val - 0.625).abs() < 1e-14);
        // refinement invariance on constants
        let fine = constant_traj(1000, 20.0, 0.25, 0.0).cost(&c).unwrap();
        assert!((fine - 0.625).abs() < 1e-12);
    }

    #[test]
    fn cost_dimension_mismatch() {
        let c = StageCost::half_squared(2, 1);
        assert!(matches!(constant_traj(3, 1.0, 0.0, 0.0).cost(&c), Err(Error::Contract(_))));
    }

    #[test]
    fn trajectory_rejects_bad_grids() {
        let s = State::zeros(1);
        assert!(Trajectory::new(vec![0.0, 0.0], vec![s.clone(); 2], vec![vec![0.0]; 2], None).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0], vec![s.clone(); 3], vec![vec![0.0]; 2], None).is_err());
        assert!(Trajectory::new(vec![0.5, 1.0], vec![s.clone(); 2], vec![vec![0.0]; 2], None).is_err());
    }

    #[test]
    fn stage_cost_validation() {
        assert!(StageCost::new(vec![1.0], vec![0.0], 0.5).is_err());
        assert!(StageCost::new(vec![-1.0], vec![1.0], 0.5).is_err());
        assert!(StageCost::new(vec![0.0], vec![1.0], 0.5).is_ok());
        let c = StageCost::with_reference(vec![1.0], vec![1.0], 0.5, vec![1.0]).unwrap();
        assert_eq!(c.eval(&[1.0], &[0.0]), 0.0);
        assert_eq!(c.eval(&[3.0], &[2.0]), 4.0);
    }
}
