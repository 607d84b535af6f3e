//! Symmetry actions on phase space, trim primitives and velocity steady states.
//!
//! Two groups are supported: translations of the whole configuration
//! (`ℝ^{n_q}` acting by `q ↦ q + g`) and the planar Euclidean group acting on
//! `(x, y, θ)` by rotating and shifting the position and shifting the heading.
//! Both actions are lifted to velocities by their tangent maps.

use serde::{Deserialize, Serialize};

use crate::domain::{State, StageCost};
use crate::error::{contract, Error, Result};
use crate::models::{simulate, ControlSignal, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryAction {
    /// `ℝ^dim` shifting every configuration coordinate.
    Translation { dim: usize },
    /// `SE(2)` acting on `(x, y, θ)`.
    PlanarSe2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupElement {
    Translation(Vec<f64>),
    /// Rotation by `dtheta` followed by the shift `(dx, dy)`.
    Se2 { dx: f64, dy: f64, dtheta: f64 },
}

fn rotate(angle: f64, p: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

impl SymmetryAction {
    pub fn config_dim(&self) -> usize {
        match self {
            Self::Translation { dim } => *dim,
            Self::PlanarSe2 => 3,
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            Self::Translation { dim } => GroupElement::Translation(vec![0.0; *dim]),
            Self::PlanarSe2 => GroupElement::Se2 {
                dx: 0.0,
                dy: 0.0,
                dtheta: 0.0,
            },
        }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        match (self, g) {
            (Self::Translation { dim }, GroupElement::Translation(s)) if s.len() == *dim => Ok(()),
            (Self::PlanarSe2, GroupElement::Se2 { .. }) => Ok(()),
            _ => Err(contract(format!("group element {g:?} does not belong to {self:?}"))),
        }
    }

    /// Group product `g ∘ h`, i.e. act with `h` first.
    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        Ok(match (g, h) {
            (GroupElement::Translation(a), GroupElement::Translation(b)) => {
                GroupElement::Translation(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (
                GroupElement::Se2 { dx, dy, dtheta },
                GroupElement::Se2 {
                    dx: hx,
                    dy: hy,
                    dtheta: ht,
                },
            ) => {
                let [rx, ry] = rotate(*dtheta, [*hx, *hy]);
                GroupElement::Se2 {
                    dx: rx + dx,
                    dy: ry + dy,
                    dtheta: dtheta + ht,
                }
            }
            _ => unreachable!("checked above"),
        })
    }

    /// Lifted action `Ψ^{TQ}(g, ·)` on a phase-space point.
    pub fn act_lifted(&self, g: &GroupElement, x: &State) -> Result<State> {
        self.check(g)?;
        if x.dim() != self.config_dim() {
            return Err(contract(format!(
                "state has dimension {} but the action needs {}",
                x.dim(),
                self.config_dim()
            )));
        }
        Ok(match g {
            GroupElement::Translation(shift) => State {
                q: x.q.iter().zip(shift).map(|(q, s)| q + s).collect(),
                v: x.v.clone(),
            },
            GroupElement::Se2 { dx, dy, dtheta } => {
                let [px, py] = rotate(*dtheta, [x.q[0], x.q[1]]);
                let [vx, vy] = rotate(*dtheta, [x.v[0], x.v[1]]);
                State {
                    q: vec![px + dx, py + dy, x.q[2] + dtheta],
                    v: vec![vx, vy, x.v[2]],
                }
            }
        })
    }

    /// One-parameter subgroup `exp(ξ t)`.
    ///
    /// For `SE(2)` the algebra element is the spatial twist `(ξx, ξy, ω)`:
    /// the generated flow moves a point `p` with velocity `ω J p + (ξx, ξy)`.
    pub fn exp(&self, xi: &[f64], t: f64) -> Result<GroupElement> {
        if xi.len() != self.config_dim() {
            return Err(contract("algebra element has the wrong dimension"));
        }
        Ok(match self {
            Self::Translation { .. } => GroupElement::Translation(xi.iter().map(|x| x * t).collect()),
            Self::PlanarSe2 => {
                let phi = xi[2] * t;
                // V(φ)·ξ·t with V = [[sinφ/φ, −(1−cosφ)/φ], [(1−cosφ)/φ, sinφ/φ]]
                let (a, b) = if phi.abs() < 1e-8 {
                    (t * (1.0 - phi * phi / 6.0), t * phi / 2.0)
                } else {
                    (phi.sin() / xi[2], (1.0 - phi.cos()) / xi[2])
                };
                GroupElement::Se2 {
                    dx: a * xi[0] - b * xi[1],
                    dy: b * xi[0] + a * xi[1],
                    dtheta: phi,
                }
            }
        })
    }

    /// Velocity of the orbit `t ↦ exp(ξ t)·x` at `t = 0`.
    pub fn infinitesimal_velocity(&self, xi: &[f64], q: &[f64]) -> Vec<f64> {
        match self {
            Self::Translation { .. } => xi.to_vec(),
            Self::PlanarSe2 => vec![xi[0] - xi[2] * q[1], xi[1] + xi[2] * q[0], xi[2]],
        }
    }

    /// Rate of change of the lifted velocity along the orbit: zero for
    /// translations, rotation at rate ω of the planar part for `SE(2)`.
    fn orbit_acceleration(&self, xi: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Self::Translation { dim } => vec![0.0; *dim],
            Self::PlanarSe2 => vec![-xi[2] * v[1], xi[2] * v[0], 0.0],
        }
    }
}

/// Maximum distance between `φ_u(t; g·x₀)` and `g·φ_u(t; x₀)` on the grid.
pub fn check_equivariance<M: Model + ?Sized>(
    model: &M,
    action: &SymmetryAction,
    g: &GroupElement,
    x0: &State,
    control: &ControlSignal,
    horizon: f64,
    steps: usize,
) -> Result<f64> {
    let moved_first = simulate(model, &action.act_lifted(g, x0)?, control, horizon, steps)?;
    let base = simulate(model, x0, control, horizon, steps)?;
    let mut worst: f64 = 0.0;
    for (a, b) in moved_first.states().iter().zip(base.states()) {
        worst = worst.max(a.distance(&action.act_lifted(g, b)?));
    }
    Ok(worst)
}

/// Constant-control trajectory generated by a one-parameter symmetry subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimPrimitive {
    pub action: SymmetryAction,
    pub xi: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub x0: State,
}

impl TrimPrimitive {
    /// Validates that the anchor velocity is generated by `ξ` and that the
    /// model reproduces the orbit's acceleration under `ū`.
    pub fn new<M: Model + ?Sized>(
        model: &M,
        action: SymmetryAction,
        xi: Vec<f64>,
        u_bar: Vec<f64>,
        x0: State,
    ) -> Result<Self> {
        if xi.len() != action.config_dim() || x0.dim() != model.nq() || u_bar.len() != model.nu() {
            return Err(contract("trim dimensions do not match the model and action"));
        }
        let gen = action.infinitesimal_velocity(&xi, &x0.q);
        let mismatch = gen.iter().zip(&x0.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if mismatch > 1e-10 {
            return Err(contract(format!("anchor velocity differs from the generator by {mismatch:e}")));
        }
        let trim = Self {
            action,
            xi,
            u_bar,
            x0,
        };
        let defect = trim.orbit_defect(model, 1.0, 16)?;
        if defect > 1e-10 {
            return Err(contract(format!("not a trim: acceleration defect {defect:e}")));
        }
        Ok(trim)
    }

    /// Trim through `x0` built from a velocity steady state.
    pub fn from_velocity_steady_state<M: Model + ?Sized>(
        model: &M,
        action: SymmetryAction,
        steady: &VelocitySteadyState,
        q0: Vec<f64>,
    ) -> Result<Self> {
        let xi = match action {
            SymmetryAction::Translation { .. } => steady.v_bar.clone(),
            SymmetryAction::PlanarSe2 => {
                let w = steady.v_bar[2];
                vec![steady.v_bar[0] + w * q0[1], steady.v_bar[1] - w * q0[0], w]
            }
        };
        let x0 = State::new(q0, steady.v_bar.clone())?;
        Self::new(model, action, xi, steady.u_bar.clone(), x0)
    }

    /// `Ψ^{TQ}(exp(ξ t), x₀)`.
    pub fn flow(&self, t: f64) -> Result<State> {
        self.action.act_lifted(&self.action.exp(&self.xi, t)?, &self.x0)
    }

    /// Largest mismatch between the model acceleration under `ū` and the
    /// acceleration of the orbit, sampled at `samples` points of `[0, horizon]`.
    pub fn orbit_defect<M: Model + ?Sized>(&self, model: &M, horizon: f64, samples: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..=samples {
            let x = self.flow(horizon * k as f64 / samples as f64)?;
            let a = model.accel(&x.q, &x.v, &self.u_bar);
            let want = self.action.orbit_acceleration(&self.xi, &x.v);
            worst = a.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        }
        Ok(worst)
    }
}

/// Pair `(v̄, ū)` with vanishing acceleration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocitySteadyState {
    pub v_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
}

impl VelocitySteadyState {
    /// Max acceleration magnitude over the model's steady-state configurations.
    pub fn residual<M: Model + ?Sized>(&self, model: &M) -> f64 {
        model
            .steady_state_configurations()
            .iter()
            .flat_map(|q| model.accel(q, &self.v_bar, &self.u_bar))
            .fold(0.0, |m, a| m.max(a.abs()))
    }
}

pub const STEADY_STATE_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;

/// Stacked accelerations over all steady-state configurations and their `u`-Jacobian.
fn stacked_residual<M: Model + ?Sized>(model: &M, v: &[f64], u: &[f64]) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let configs = model.steady_state_configurations();
    let (nq, nu) = (model.nq(), model.nu());
    let mut r = Vec::with_capacity(configs.len() * nq);
    let mut jac = nalgebra::DMatrix::zeros(configs.len() * nq, nu);
    for (c, q) in configs.iter().enumerate() {
        r.extend(model.accel(q, v, u));
        let j = model.accel_jacobians(q, v, u);
        jac.view_mut((c * nq, 0), (nq, nu)).copy_from(&j.du);
    }
    (r, jac)
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Damped Gauss–Newton on `u ↦ a(q, v̄, u)` from `u = 0`, over every
/// steady-state configuration of the model.
pub fn find_velocity_steady_state<M: Model + ?Sized>(model: &M, v_bar: &[f64]) -> Result<VelocitySteadyState> {
    if v_bar.len() != model.nq() {
        return Err(contract("velocity has the wrong dimension"));
    }
    let mut u = vec![0.0; model.nu()];
    let (mut r, mut jac) = stacked_residual(model, v_bar, &u);
    let mut res = inf_norm(&r);
    for _ in 0..NEWTON_MAX_ITER {
        if res <= STEADY_STATE_TOL {
            return Ok(VelocitySteadyState {
                v_bar: v_bar.to_vec(),
                u_bar: u,
            });
        }
        let rhs = nalgebra::DVector::from_vec(r.iter().map(|x| -x).collect());
        let step = jac
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Diagnostic(e.to_string()))?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(u, s)| u + alpha * s).collect();
            let (tr, tj) = stacked_residual(model, v_bar, &trial);
            let tres = inf_norm(&tr);
            if tres < res || alpha < 1e-12 {
                u = trial;
                r = tr;
                jac = tj;
                res = tres;
                break;
            }
            alpha *= 0.5;
        }
    }
    if res <= STEADY_STATE_TOL {
        return Ok(VelocitySteadyState {
            v_bar: v_bar.to_vec(),
            u_bar: u,
        });
    }
    Err(Error::RootFind {
        iterations: NEWTON_MAX_ITER,
        residual: res,
    })
}

/// Minimizer of `ℓ(v, ū(v))` over velocity steady states in a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSteadyState {
    pub steady: VelocitySteadyState,
    pub cost: f64,
    /// Grid points whose cost ties the minimum within `1e-12`; more than one
    /// signals a non-unique optimal steady state.
    pub ties: usize,
}

const GRID_POINTS: usize = 21;

/// Grid search with 21 points per box dimension followed by a damped Newton
/// polish of the reduced cost `v ↦ ℓ(v, ū(v))`. Among tied grid points the
/// one with the smallest `‖v‖` is kept.
pub fn optimal_velocity_steady_state<M: Model + ?Sized>(
    model: &M,
    cost: &StageCost,
    v_box: &crate::domain::BoxBounds,
) -> Result<OptimalSteadyState> {
    let n = model.nq();
    if v_box.dim() != n || cost.w_v.len() != n || cost.w_u.len() != model.nu() {
        return Err(contract("box or cost dimensions do not match the model"));
    }
    if v_box.lower.iter().chain(&v_box.upper).any(|b| !b.is_finite()) {
        return Err(contract("search box must be compact"));
    }
    let reduced = |v: &[f64]| -> Option<(f64, VelocitySteadyState)> {
        let s = find_velocity_steady_state(model, v).ok()?;
        Some((cost.eval(&s.v_bar, &s.u_bar), s))
    };

    let mut best: Option<(f64, f64, VelocitySteadyState)> = None;
    let mut costs = Vec::new();
    let total = GRID_POINTS.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let v: Vec<f64> = (0..n)
            .map(|d| {
                let k = rem % GRID_POINTS;
                rem /= GRID_POINTS;
                let (lo, hi) = (v_box.lower[d], v_box.upper[d]);
                lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64
            })
            .collect();
        let Some((c, s)) = reduced(&v) else { continue };
        costs.push(c);
        let norm = v.iter().map(|x| x * x).sum::<f64>();
        let better = match &best {
            None => true,
            Some((bc, bn, _)) => c < *bc - 1e-12 || (c <= *bc + 1e-12 && norm < *bn),
        };
        if better {
            best = Some((c, norm, s));
        }
    }
    let Some((mut best_cost, _, mut best_state)) = best else {
        return Err(Error::Infeasible("no velocity steady state inside the search box".into()));
    };
    let ties = costs.iter().filter(|&&c| (c - best_cost).abs() <= 1e-12).count();

    // Newton polish on the reduced cost with central differences.
    let h = 1e-5;
    let mut v = best_state.v_bar.clone();
    for _ in 0..NEWTON_MAX_ITER {
        let f = |x: &[f64]| reduced(x).map(|r| r.0).unwrap_or(f64::INFINITY);
        let f0 = f(&v);
        let mut grad = nalgebra::DVector::zeros(n);
        let mut hess = nalgebra::DMatrix::zeros(n, n);
        let shifted = |i: usize, di: f64, j: usize, dj: f64| {
            let mut x = v.clone();
            x[i] += di;
            x[j] += dj;
            f(&x)
        };
        for i in 0..n {
            grad[i] = (shifted(i, h, i, 0.0) - shifted(i, -h, i, 0.0)) / (2.0 * h);
            for j in 0..n {
                hess[(i, j)] = (shifted(i, h, j, h) - shifted(i, h, j, -h) - shifted(i, -h, j, h)
                    + shifted(i, -h, j, -h))
                    / (4.0 * h * h);
            }
        }
        if grad.amax() < 1e-9 {
            break;
        }
        let Some(step) = hess.clone().cholesky().map(|c| c.solve(&(-&grad))) else {
            break;
        };
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-8 {
            let trial: Vec<f64> = v
                .iter()
                .zip(step.iter())
                .enumerate()
                .map(|(d, (x, s))| (x + alpha * s).clamp(v_box.lower[d], v_box.upper[d]))
                .collect();
            if f(&trial) < f0 {
                v = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if let Some((c, s)) = reduced(&v) {
        if c <= best_cost {
            best_cost = c;
            best_state = s;
        }
    }
    Ok(OptimalSteadyState {
        steady: best_state,
        cost: best_cost,
        ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoxBounds;
    use crate::models::{DoubleIntegrator, Hovercraft, HovercraftParams};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn hover() -> Hovercraft {
        Hovercraft {
            params: HovercraftParams::default(),
        }
    }

    #[test]
    fn translation_acts_on_configuration_only() {
        let a = SymmetryAction::Translation { dim: 1 };
        let x = State::new(vec![2.0], vec![0.25]).unwrap();
        let y = a.act_lifted(&GroupElement::Translation(vec![7.0]), &x).unwrap();
        assert_eq!(y, State::new(vec![9.0], vec![0.25]).unwrap());
        assert_eq!(a.act_lifted(&a.identity(), &x).unwrap(), x);
    }

    #[test]
    fn se2_rotates_velocity() {
        let a = SymmetryAction::PlanarSe2;
        let x = State::new(vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]).unwrap();
        let g = GroupElement::Se2 {
            dx: 0.0,
            dy: 0.0,
            dtheta: FRAC_PI_2,
        };
        let y = a.act_lifted(&g, &x).unwrap();
        assert!(y.v[0].abs() < 1e-12 && (y.v[1] - 1.0).abs() < 1e-12);
        assert_eq!(y.q[2], FRAC_PI_2);
    }

    #[test]
    fn mismatched_elements_are_rejected() {
        let a = SymmetryAction::Translation { dim: 2 };
        let x = State::zeros(2);
        assert!(a.act_lifted(&GroupElement::Translation(vec![1.0]), &x).is_err());
        assert!(a.act_lifted(&SymmetryAction::PlanarSe2.identity(), &x).is_err());
        assert!(SymmetryAction::PlanarSe2.act_lifted(&SymmetryAction::PlanarSe2.identity(), &x).is_err());
    }

    #[test]
    fn equivariance_examples() {
        let ctrl = ControlSignal::new(
            vec![0.0, 1.0, 2.5, 4.0],
            vec![vec![0.3, -0.2], vec![-0.5, 0.8], vec![0.1, 0.1], vec![0.0, -0.4]],
        )
        .unwrap();
        let x0 = State::new(vec![0.4, -1.2, 0.7], vec![0.2, 0.1, -0.3]).unwrap();
        let tr = SymmetryAction::Translation { dim: 3 };
        let d = check_equivariance(&hover(), &tr, &GroupElement::Translation(vec![3.0, -1.0, 0.0]), &x0, &ctrl, 4.0, 400).unwrap();
        assert!(d <= 1e-8, "{d}");
        let g = GroupElement::Se2 {
            dx: 0.5,
            dy: 2.0,
            dtheta: FRAC_PI_3,
        };
        let d = check_equivariance(&hover(), &SymmetryAction::PlanarSe2, &g, &x0, &ctrl, 4.0, 400).unwrap();
        assert!(d <= 1e-8, "{d}");

        let di = DoubleIntegrator::new(1);
        let c1 = ControlSignal::new(vec![0.0, 2.0], vec![vec![1.0], vec![-1.0]]).unwrap();
        let x = State::new(vec![0.3], vec![-0.1]).unwrap();
        let d = check_equivariance(&di, &SymmetryAction::Translation { dim: 1 }, &GroupElement::Translation(vec![7.0]), &x, &c1, 2.0, 100).unwrap();
        assert!(d <= 1e-10, "{d}");
    }

    #[test]
    fn heading_shift_alone_is_not_a_symmetry() {
        // Shifting θ without rotating the plane breaks equivariance for u ≠ 0.
        let tr = SymmetryAction::Translation { dim: 3 };
        let x0 = State::zeros(3);
        let ctrl = ControlSignal::constant(vec![1.0, 0.0]);
        let d = check_equivariance(&hover(), &tr, &GroupElement::Translation(vec![0.0, 0.0, 1.0]), &x0, &ctrl, 2.0, 100).unwrap();
        assert!(d > 0.1);
    }

    #[test]
    fn double_integrator_trim() {
        let di = DoubleIntegrator::new(1);
        let trim = TrimPrimitive::new(
            &di,
            SymmetryAction::Translation { dim: 1 },
            vec![0.25],
            vec![0.0],
            State::new(vec![0.0], vec![0.25]).unwrap(),
        )
        .unwrap();
        assert_eq!(trim.flow(20.0).unwrap(), State::new(vec![5.0], vec![0.25]).unwrap());
        assert_eq!(trim.flow(0.0).unwrap(), trim.x0);
        // one-parameter group property
        let (t, s) = (3.7, 1.9);
        let a = trim.flow(t + s).unwrap();
        let b = trim.action.act_lifted(&trim.action.exp(&trim.xi, s).unwrap(), &trim.flow(t).unwrap()).unwrap();
        assert!(a.distance(&b) < 1e-14);
    }

    #[test]
    fn non_trims_are_rejected() {
        let di = DoubleIntegrator::new(1);
        let act = SymmetryAction::Translation { dim: 1 };
        // control does not vanish
        assert!(TrimPrimitive::new(&di, act, vec![0.25], vec![0.1], State::new(vec![0.0], vec![0.25]).unwrap()).is_err());
        // velocity not generated by ξ
        assert!(TrimPrimitive::new(&di, act, vec![0.25], vec![0.0], State::new(vec![0.0], vec![0.5]).unwrap()).is_err());
        // hovercraft drifting while spinning is not an SE(2) orbit under zero thrust
        let s = find_velocity_steady_state(&hover(), &[1.0, 0.0, 0.2]).unwrap();
        assert!(TrimPrimitive::from_velocity_steady_state(&hover(), SymmetryAction::PlanarSe2, &s, vec![0.0; 3]).is_err());
    }

    #[test]
    fn hovercraft_circular_trim_matches_simulation() {
        // Sideways drift with spin: velocity perpendicular to the heading,
        // sustained by a constant body-frame thrust along the heading.
        let h = hover();
        let (omega, speed) = (0.4, 0.8);
        let x0 = State::new(vec![1.0, -0.5, 0.0], vec![0.0, speed, omega]).unwrap();
        let xi = vec![x0.v[0] + omega * x0.q[1], x0.v[1] - omega * x0.q[0], omega];
        let u_bar = vec![-omega * speed, 0.0];
        let trim = TrimPrimitive::new(&h, SymmetryAction::PlanarSe2, xi, u_bar.clone(), x0.clone()).unwrap();
        let sim = simulate(&h, &x0, &ControlSignal::constant(u_bar), 10.0, 1000).unwrap();
        for (t, s) in sim.times().iter().zip(sim.states()) {
            assert!(trim.flow(*t).unwrap().distance(s) < 1e-8);
        }
    }

    #[test]
    fn trims_from_steady_states_follow_the_flow() {
        let di = DoubleIntegrator::new(2);
        let s = find_velocity_steady_state(&di, &[0.25, -1.0]).unwrap();
        let trim = TrimPrimitive::from_velocity_steady_state(&di, SymmetryAction::Translation { dim: 2 }, &s, vec![1.0, 2.0]).unwrap();
        let sim = simulate(&di, &trim.x0, &ControlSignal::constant(s.u_bar.clone()), 5.0, 50).unwrap();
        for (t, st) in sim.times().iter().zip(sim.states()) {
            assert!(trim.flow(*t).unwrap().distance(st) < 1e-8);
        }
        let h = hover();
        let s = find_velocity_steady_state(&h, &[1.0, 0.5, 0.0]).unwrap();
        let trim = TrimPrimitive::from_velocity_steady_state(&h, SymmetryAction::PlanarSe2, &s, vec![0.0, 1.0, 0.3]).unwrap();
        let sim = simulate(&h, &trim.x0, &ControlSignal::constant(s.u_bar.clone()), 5.0, 50).unwrap();
        for (t, st) in sim.times().iter().zip(sim.states()) {
            assert!(trim.flow(*t).unwrap().distance(st) < 1e-8);
        }
    }

    #[test]
    fn steady_state_examples() {
        let di = DoubleIntegrator::new(1);
        assert_eq!(find_velocity_steady_state(&di, &[0.25]).unwrap().u_bar, vec![0.0]);
        assert_eq!(find_velocity_steady_state(&di, &[0.0]).unwrap().u_bar, vec![0.0]);
        let s = find_velocity_steady_state(&hover(), &[1.0, 0.0, 0.2]).unwrap();
        assert_eq!(s.u_bar, vec![0.0, 0.0]);
        assert!(s.residual(&hover()) <= STEADY_STATE_TOL);
    }

    #[test]
    fn steady_state_newton_solves_nonzero_roots() {
        // a = u − sin(v): steady control depends on v
        struct Drag;
        impl Model for Drag {
            fn nq(&self) -> usize {
                1
            }
            fn nu(&self) -> usize {
                1
            }
            fn accel(&self, _q: &[f64], v: &[f64], u: &[f64]) -> Vec<f64> {
                vec![u[0] + 0.2 * u[0].powi(3) - v[0].sin()]
            }
            fn accel_jacobians(&self, _q: &[f64], v: &[f64], u: &[f64]) -> crate::models::AccelJacobians {
                crate::models::AccelJacobians {
                    dq: nalgebra::DMatrix::zeros(1, 1),
                    dv: nalgebra::DMatrix::from_element(1, 1, -v[0].cos()),
                    du: nalgebra::DMatrix::from_element(1, 1, 1.0 + 0.6 * u[0] * u[0]),
                }
            }
        }
        let s = find_velocity_steady_state(&Drag, &[1.2]).unwrap();
        assert!(s.residual(&Drag) <= STEADY_STATE_TOL);
        assert!(s.u_bar[0] > 0.5);
    }

    #[test]
    fn steady_state_failure_is_reported() {
        // a = 1 + u² never vanishes
        struct NoRoot;
        impl Model for NoRoot {
            fn nq(&self) -> usize {
                1
            }
            fn nu(&self) -> usize {
                1
            }
            fn accel(&self, _q: &[f64], _v: &[f64], u: &[f64]) -> Vec<f64> {
                vec![1.0 + u[0] * u[0]]
            }
            fn accel_jacobians(&self, _q: &[f64], _v: &[f64], u: &[f64]) -> crate::models::AccelJacobians {
                crate::models::AccelJacobians {
                    dq: nalgebra::DMatrix::zeros(1, 1),
                    dv: nalgebra::DMatrix::zeros(1, 1),
                    du: nalgebra::DMatrix::from_element(1, 1, 2.0 * u[0]),
                }
            }
        }
        assert!(matches!(find_velocity_steady_state(&NoRoot, &[0.0]), Err(Error::RootFind { .. })));
    }

    #[test]
    fn optimal_steady_state_examples() {
        let di = DoubleIntegrator::new(1);
        let bx = BoxBounds::new(vec![-2.0], vec![2.0]).unwrap();
        let o = optimal_velocity_steady_state(&di, &StageCost::half_squared(1, 1), &bx).unwrap();
        assert_eq!(o.steady.v_bar, vec![0.0]);
        assert_eq!(o.steady.u_bar, vec![0.0]);
        assert_eq!(o.ties, 1);

        let shifted = StageCost::with_reference(vec![1.0], vec![1.0], 0.5, vec![1.0]).unwrap();
        let o = optimal_velocity_steady_state(&di, &shifted, &bx).unwrap();
        assert!((o.steady.v_bar[0] - 1.0).abs() < 1e-9);
        assert_eq!(o.steady.u_bar, vec![0.0]);

        // minimizer off the grid is found by the polish
        let off = StageCost::with_reference(vec![1.0], vec![1.0], 0.5, vec![0.333]).unwrap();
        let o = optimal_velocity_steady_state(&di, &off, &bx).unwrap();
        assert!((o.steady.v_bar[0] - 0.333).abs() < 1e-6, "{:?}", o);

        let hc = StageCost::new(vec![1.0; 3], vec![1.0; 2], 1.0).unwrap();
        let bx3 = BoxBounds::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let o = optimal_velocity_steady_state(&hover(), &hc, &bx3).unwrap();
        assert_eq!(o.steady.v_bar, vec![0.0; 3]);
        assert_eq!(o.steady.u_bar, vec![0.0; 2]);
    }

    #[test]
    fn degenerate_cost_reports_ties_and_picks_smallest_velocity() {
        let di = DoubleIntegrator::new(1);
        let flat = StageCost::new(vec![0.0], vec![1.0], 0.5).unwrap();
        let bx = BoxBounds::new(vec![-1.0], vec![1.0]).unwrap();
        let o = optimal_velocity_steady_state(&di, &flat, &bx).unwrap();
        assert_eq!(o.ties, 21);
        assert_eq!(o.steady.v_bar, vec![0.0]);
    }
}
