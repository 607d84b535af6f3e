//! Direct collocation of a [`Scenario`] into an equality-constrained NLP.
//!
//! Decision vector layout: all stacked states `x_0 … x_N` followed by all
//! controls `u_0 … u_N`. Constraints are the collocation defects of every
//! interval followed by the initial and terminal boundary equalities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{Scenario, State, Trajectory};
use crate::error::{contract, Result};
use crate::models::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Trapezoidal,
    HermiteSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptionConfig {
    /// Number of uniform intervals `N`.
    pub intervals: usize,
    pub scheme: Scheme,
}

impl TranscriptionConfig {
    pub fn trapezoidal(intervals: usize) -> Self {
        Self {
            intervals,
            scheme: Scheme::Trapezoidal,
        }
    }
}

/// Sparse matrix in coordinate form with a fixed pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        self.entries.push((row, col, val));
    }

    fn push_block(&mut self, row: usize, col: usize, block: &DMatrix<f64>) {
        for j in 0..block.ncols() {
            for i in 0..block.nrows() {
                self.push(row + i, col + j, block[(i, j)]);
            }
        }
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols];
        for &(i, j, v) in &self.entries {
            x[j] += v * y[i];
        }
        x
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

/// Finite-dimensional problem `min f(z)` s.t. `c(z) = 0`, `lower ≤ z ≤ upper`.
pub trait NlpProblem: Sync {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn objective(&self, z: &[f64]) -> f64;
    fn objective_gradient(&self, z: &[f64]) -> Vec<f64>;
    fn constraints(&self, z: &[f64]) -> Vec<f64>;
    fn constraint_jacobian(&self, z: &[f64]) -> SparseMatrix;

    /// Box bounds on `z`; `None` when every entry is free.
    fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }

    /// Quadratic objective and affine constraints.
    fn is_linear_quadratic(&self) -> bool {
        false
    }

    /// Position keys `(variables, constraints)` along the problem's natural
    /// sequence (e.g. time). Sorting unknowns by key makes the KKT matrix banded.
    fn ordering_keys(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

/// Index map from node quantities into the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub nq: usize,
    pub nu: usize,
    pub intervals: usize,
}

impl NodeLayout {
    pub fn nx(&self) -> usize {
        2 * self.nq
    }

    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn dim(&self) -> usize {
        self.nodes() * (self.nx() + self.nu)
    }

    pub fn num_constraints(&self) -> usize {
        (self.intervals + 2) * self.nx()
    }

    /// Offset of `x_k`.
    pub fn state(&self, k: usize) -> usize {
        k * self.nx()
    }

    /// Offset of `u_k`.
    pub fn control(&self, k: usize) -> usize {
        self.nodes() * self.nx() + k * self.nu
    }

    /// First constraint row of the initial boundary block; terminal follows.
    pub fn boundary_row(&self) -> usize {
        self.intervals * self.nx()
    }
}

/// Collocation NLP for one scenario.
#[derive(Debug, Clone)]
pub struct CollocationProblem {
    scenario: Scenario,
    config: TranscriptionConfig,
    layout: NodeLayout,
    step: f64,
}

pub fn transcribe(scenario: &Scenario, config: TranscriptionConfig) -> Result<CollocationProblem> {
    if config.intervals < 2 {
        return Err(contract("collocation needs at least two intervals"));
    }
    scenario.validate()?;
    let layout = NodeLayout {
        nq: scenario.nq(),
        nu: scenario.nu(),
        intervals: config.intervals,
    };
    Ok(CollocationProblem {
        scenario: scenario.clone(),
        config,
        layout,
        step: scenario.horizon / config.intervals as f64,
    })
}

/// Linear interpolation of the boundary states, zero controls.
pub fn initial_guess(scenario: &Scenario, config: TranscriptionConfig) -> Vec<f64> {
    let layout = NodeLayout {
        nq: scenario.nq(),
        nu: scenario.nu(),
        intervals: config.intervals,
    };
    let (a, b) = (scenario.x0.stacked(), scenario.xt.stacked());
    let mut z = vec![0.0; layout.dim()];
    for k in 0..layout.nodes() {
        let w = k as f64 / config.intervals as f64;
        let off = layout.state(k);
        for i in 0..layout.nx() {
            z[off + i] = if k == config.intervals { b[i] } else { a[i] + w * (b[i] - a[i]) };
        }
    }
    z
}

/// Node time `t_k`, with the last node pinned to the horizon.
fn node_time(horizon: f64, intervals: usize, k: usize) -> f64 {
    if k == intervals {
        horizon
    } else {
        horizon * k as f64 / intervals as f64
    }
}

/// Unpacks a decision vector into a trajectory on the collocation grid.
pub fn extract_trajectory(z: &[f64], scenario: &Scenario, config: TranscriptionConfig) -> Result<Trajectory> {
    let layout = NodeLayout {
        nq: scenario.nq(),
        nu: scenario.nu(),
        intervals: config.intervals,
    };
    if z.len() != layout.dim() {
        return Err(contract(format!("decision vector has {} entries, layout needs {}", z.len(), layout.dim())));
    }
    let (nq, nu) = (layout.nq, layout.nu);
    let times = (0..layout.nodes()).map(|k| node_time(scenario.horizon, config.intervals, k)).collect();
    let states = (0..layout.nodes())
        .map(|k| {
            let o = layout.state(k);
            State::new(z[o..o + nq].to_vec(), z[o + nq..o + 2 * nq].to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let controls = (0..layout.nodes())
        .map(|k| z[layout.control(k)..layout.control(k) + nu].to_vec())
        .collect();
    Trajectory::new(times, states, controls, None)
}

/// Node costates estimated from the constraint multipliers.
///
/// Defect multipliers approximate `−λ` at interval midpoints, so interior
/// nodes average their two neighbours. The boundary multipliers give `−λ(0)`
/// and `λ(T)` directly.
pub fn costate_estimates(multipliers: &[f64], layout: NodeLayout) -> Result<Vec<Vec<f64>>> {
    if multipliers.len() != layout.num_constraints() {
        return Err(contract(format!(
            "{} multipliers for {} constraints",
            multipliers.len(),
            layout.num_constraints()
        )));
    }
    let nx = layout.nx();
    let n = layout.intervals;
    let defect = |k: usize| &multipliers[k * nx..(k + 1) * nx];
    let b = layout.boundary_row();
    Ok((0..=n)
        .map(|k| match k {
            0 => multipliers[b..b + nx].iter().map(|m| -m).collect(),
            k if k == n => multipliers[b + nx..b + 2 * nx].to_vec(),
            k => defect(k - 1).iter().zip(defect(k)).map(|(a, c)| -0.5 * (a + c)).collect(),
        })
        .collect())
}

/// Control minimizing the Hamiltonian `ℓ + λ_qᵀv + λ_vᵀa` at one node, for
/// dynamics affine in `u`; clipped to the control box when one is set.
fn hamiltonian_control(scenario: &Scenario, state: &State, u: &[f64], costate: &[f64]) -> Vec<f64> {
    let nq = state.q.len();
    let du = scenario.model.accel_jacobians(&state.q, &state.v, u).du;
    let lv = &costate[nq..];
    let cost = &scenario.cost;
    let mut out: Vec<f64> = (0..u.len())
        .map(|j| {
            let g: f64 = (0..nq).map(|i| du[(i, j)] * lv[i]).sum();
            -g / (2.0 * cost.scale * cost.w_u[j])
        })
        .collect();
    if let Some(b) = &scenario.control_bounds {
        for (j, x) in out.iter_mut().enumerate() {
            *x = x.clamp(b.lower[j], b.upper[j]);
        }
    }
    out
}

/// Trajectory for reporting: node states from `z`, costates from the
/// multipliers, and the two endpoint controls recovered from the boundary
/// costates.
///
/// The raw endpoint controls only see one interval each and sit half a step
/// away from `t = 0` and `t = T`; interior node controls are kept as solved.
pub fn extract_solution(
    z: &[f64],
    multipliers: &[f64],
    scenario: &Scenario,
    config: TranscriptionConfig,
) -> Result<Trajectory> {
    let raw = extract_trajectory(z, scenario, config)?;
    let layout = NodeLayout {
        nq: scenario.nq(),
        nu: scenario.nu(),
        intervals: config.intervals,
    };
    let costates = costate_estimates(multipliers, layout)?;
    let mut controls = raw.controls().to_vec();
    for k in [0, config.intervals] {
        controls[k] = hamiltonian_control(scenario, &raw.states()[k], &controls[k], &costates[k]);
    }
    Trajectory::new(raw.times().to_vec(), raw.states().to_vec(), controls, Some(costates))
}

/// Inverse of [`extract_trajectory`].
pub fn pack_trajectory(traj: &Trajectory) -> Vec<f64> {
    let layout = NodeLayout {
        nq: traj.nq(),
        nu: traj.nu(),
        intervals: traj.len() - 1,
    };
    let mut z = vec![0.0; layout.dim()];
    for (k, (s, u)) in traj.states().iter().zip(traj.controls()).enumerate() {
        let o = layout.state(k);
        z[o..o + layout.nq].copy_from_slice(&s.q);
        z[o + layout.nq..o + layout.nx()].copy_from_slice(&s.v);
        let c = layout.control(k);
        z[c..c + layout.nu].copy_from_slice(u);
    }
    z
}

/// First-order dynamics, cost and their derivatives at one point.
struct Local {
    f: Vec<f64>,
    fx: DMatrix<f64>,
    fu: DMatrix<f64>,
}

impl CollocationProblem {
    pub fn layout(&self) -> NodeLayout {
        self.layout
    }

    pub fn config(&self) -> TranscriptionConfig {
        self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn x<'a>(&self, z: &'a [f64], k: usize) -> &'a [f64] {
        let o = self.layout.state(k);
        &z[o..o + self.layout.nx()]
    }

    fn u<'a>(&self, z: &'a [f64], k: usize) -> &'a [f64] {
        let o = self.layout.control(k);
        &z[o..o + self.layout.nu]
    }

    fn local(&self, x: &[f64], u: &[f64]) -> Local {
        let nq = self.layout.nq;
        let model = &self.scenario.model;
        let (q, v) = x.split_at(nq);
        let jac = model.accel_jacobians(q, v, u);
        let mut fx = DMatrix::zeros(2 * nq, 2 * nq);
        for i in 0..nq {
            fx[(i, nq + i)] = 1.0;
        }
        fx.view_mut((nq, 0), (nq, nq)).copy_from(&jac.dq);
        fx.view_mut((nq, nq), (nq, nq)).copy_from(&jac.dv);
        let mut fu = DMatrix::zeros(2 * nq, self.layout.nu);
        fu.view_mut((nq, 0), (nq, self.layout.nu)).copy_from(&jac.du);
        Local {
            f: model.rhs(x, u),
            fx,
            fu,
        }
    }

    fn stage(&self, x: &[f64], u: &[f64]) -> f64 {
        self.scenario.cost.eval(&x[self.layout.nq..], u)
    }

    /// Gradient of the stage cost with respect to the stacked state and control.
    fn stage_gradient(&self, x: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nq = self.layout.nq;
        let (gv, gu) = self.scenario.cost.gradient(&x[nq..], u);
        let mut gx = vec![0.0; 2 * nq];
        gx[nq..].copy_from_slice(&gv);
        (gx, gu)
    }

    /// Hermite–Simpson midpoint state and control.
    fn midpoint(&self, xk: &[f64], xl: &[f64], uk: &[f64], ul: &[f64], fk: &[f64], fl: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.step;
        let xc = (0..xk.len())
            .map(|i| 0.5 * (xk[i] + xl[i]) + h / 8.0 * (fk[i] - fl[i]))
            .collect();
        let uc = uk.iter().zip(ul).map(|(a, b)| 0.5 * (a + b)).collect();
        (xc, uc)
    }
}

impl NlpProblem for CollocationProblem {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn num_constraints(&self) -> usize {
        self.layout.num_constraints()
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let h = self.step;
        let n = self.layout.intervals;
        match self.config.scheme {
            Scheme::Trapezoidal => (0..n)
                .map(|k| 0.5 * h * (self.stage(self.x(z, k), self.u(z, k)) + self.stage(self.x(z, k + 1), self.u(z, k + 1))))
                .sum(),
            Scheme::HermiteSimpson => (0..n)
                .map(|k| {
                    let (xk, xl, uk, ul) = (self.x(z, k), self.x(z, k + 1), self.u(z, k), self.u(z, k + 1));
                    let model = &self.scenario.model;
                    let (xc, uc) = self.midpoint(xk, xl, uk, ul, &model.rhs(xk, uk), &model.rhs(xl, ul));
                    h / 6.0 * (self.stage(xk, uk) + 4.0 * self.stage(&xc, &uc) + self.stage(xl, ul))
                })
                .sum(),
        }
    }

    fn objective_gradient(&self, z: &[f64]) -> Vec<f64> {
        let h = self.step;
        let lay = self.layout;
        let (nx, nu) = (lay.nx(), lay.nu);
        let mut g = vec![0.0; lay.dim()];
        let add = |g: &mut Vec<f64>, off: usize, w: f64, v: &[f64]| {
            for (i, x) in v.iter().enumerate() {
                g[off + i] += w * x;
            }
        };
        match self.config.scheme {
            Scheme::Trapezoidal => {
                for k in 0..lay.nodes() {
                    let w = if k == 0 || k == lay.intervals { 0.5 * h } else { h };
                    let (gx, gu) = self.stage_gradient(self.x(z, k), self.u(z, k));
                    add(&mut g, lay.state(k), w, &gx);
                    add(&mut g, lay.control(k), w, &gu);
                }
            }
            Scheme::HermiteSimpson => {
                for k in 0..lay.intervals {
                    let (xk, xl, uk, ul) = (self.x(z, k), self.x(z, k + 1), self.u(z, k), self.u(z, k + 1));
                    let (lk, ll) = (self.local(xk, uk), self.local(xl, ul));
                    let (xc, uc) = self.midpoint(xk, xl, uk, ul, &lk.f, &ll.f);
                    for (x, u, off_x, off_u) in [(xk, uk, lay.state(k), lay.control(k)), (xl, ul, lay.state(k + 1), lay.control(k + 1))] {
                        let (gx, gu) = self.stage_gradient(x, u);
                        add(&mut g, off_x, h / 6.0, &gx);
                        add(&mut g, off_u, h / 6.0, &gu);
                    }
                    let (gxc, guc) = self.stage_gradient(&xc, &uc);
                    let gxc = nalgebra::DVector::from_vec(gxc);
                    let eye = DMatrix::<f64>::identity(nx, nx);
                    let dxk = &eye * 0.5 + &lk.fx * (h / 8.0);
                    let dxl = &eye * 0.5 - &ll.fx * (h / 8.0);
                    let w = 4.0 * h / 6.0;
                    add(&mut g, lay.state(k), w, (dxk.transpose() * &gxc).as_slice());
                    add(&mut g, lay.state(k + 1), w, (dxl.transpose() * &gxc).as_slice());
                    let duk = lk.fu.transpose() * &gxc * (h / 8.0);
                    let dul = ll.fu.transpose() * &gxc * (-h / 8.0);
                    let half: Vec<f64> = guc.iter().map(|x| 0.5 * x).collect();
                    add(&mut g, lay.control(k), w, duk.as_slice());
                    add(&mut g, lay.control(k), w, &half);
                    add(&mut g, lay.control(k + 1), w, dul.as_slice());
                    add(&mut g, lay.control(k + 1), w, &half);
                }
            }
        }
        debug_assert_eq!(g.len(), lay.nodes() * (nx + nu));
        g
    }

    fn constraints(&self, z: &[f64]) -> Vec<f64> {
        let h = self.step;
        let lay = self.layout;
        let nx = lay.nx();
        let model = &self.scenario.model;
        let mut c = Vec::with_capacity(lay.num_constraints());
        let mut f_prev = model.rhs(self.x(z, 0), self.u(z, 0));
        for k in 0..lay.intervals {
            let (xk, xl, uk, ul) = (self.x(z, k), self.x(z, k + 1), self.u(z, k), self.u(z, k + 1));
            let f_next = model.rhs(xl, ul);
            match self.config.scheme {
                Scheme::Trapezoidal => {
                    c.extend((0..nx).map(|i| xl[i] - xk[i] - 0.5 * h * (f_prev[i] + f_next[i])));
                }
                Scheme::HermiteSimpson => {
                    let (xc, uc) = self.midpoint(xk, xl, uk, ul, &f_prev, &f_next);
                    let fc = model.rhs(&xc, &uc);
                    c.extend((0..nx).map(|i| xl[i] - xk[i] - h / 6.0 * (f_prev[i] + 4.0 * fc[i] + f_next[i])));
                }
            }
            f_prev = f_next;
        }
        let (a, b) = (self.scenario.x0.stacked(), self.scenario.xt.stacked());
        c.extend(self.x(z, 0).iter().zip(&a).map(|(x, a)| x - a));
        c.extend(self.x(z, lay.intervals).iter().zip(&b).map(|(x, b)| x - b));
        c
    }

    fn constraint_jacobian(&self, z: &[f64]) -> SparseMatrix {
        let h = self.step;
        let lay = self.layout;
        let nx = lay.nx();
        let eye = DMatrix::<f64>::identity(nx, nx);
        let mut jac = SparseMatrix::new(lay.num_constraints(), lay.dim());
        let mut prev = self.local(self.x(z, 0), self.u(z, 0));
        for k in 0..lay.intervals {
            let (xk, xl, uk, ul) = (self.x(z, k), self.x(z, k + 1), self.u(z, k), self.u(z, k + 1));
            let next = self.local(xl, ul);
            let row = k * nx;
            match self.config.scheme {
                Scheme::Trapezoidal => {
                    jac.push_block(row, lay.state(k), &(-&eye - &prev.fx * (0.5 * h)));
                    jac.push_block(row, lay.state(k + 1), &(&eye - &next.fx * (0.5 * h)));
                    jac.push_block(row, lay.control(k), &(&prev.fu * (-0.5 * h)));
                    jac.push_block(row, lay.control(k + 1), &(&next.fu * (-0.5 * h)));
                }
                Scheme::HermiteSimpson => {
                    let (xc, uc) = self.midpoint(xk, xl, uk, ul, &prev.f, &next.f);
                    let mid = self.local(&xc, &uc);
                    let dfc_dxk = &mid.fx * (&eye * 0.5 + &prev.fx * (h / 8.0));
                    let dfc_dxl = &mid.fx * (&eye * 0.5 - &next.fx * (h / 8.0));
                    let dfc_duk = &mid.fx * &prev.fu * (h / 8.0) + &mid.fu * 0.5;
                    let dfc_dul = &mid.fx * &next.fu * (-h / 8.0) + &mid.fu * 0.5;
                    let s = h / 6.0;
                    jac.push_block(row, lay.state(k), &(-&eye - (&prev.fx + dfc_dxk * 4.0) * s));
                    jac.push_block(row, lay.state(k + 1), &(&eye - (&next.fx + dfc_dxl * 4.0) * s));
                    jac.push_block(row, lay.control(k), &(-(&prev.fu + dfc_duk * 4.0) * s));
                    jac.push_block(row, lay.control(k + 1), &(-(&next.fu + dfc_dul * 4.0) * s));
                }
            }
            prev = next;
        }
        let b = lay.boundary_row();
        for i in 0..nx {
            jac.push(b + i, lay.state(0) + i, 1.0);
            jac.push(b + nx + i, lay.state(lay.intervals) + i, 1.0);
        }
        jac
    }

    fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let sb = self.scenario.state_bounds.as_ref().filter(|b| b.is_finite());
        let cb = self.scenario.control_bounds.as_ref().filter(|b| b.is_finite());
        if sb.is_none() && cb.is_none() {
            return None;
        }
        let lay = self.layout;
        let mut lo = vec![f64::NEG_INFINITY; lay.dim()];
        let mut hi = vec![f64::INFINITY; lay.dim()];
        for k in 0..lay.nodes() {
            if let Some(b) = sb {
                lo[lay.state(k)..lay.state(k) + lay.nx()].copy_from_slice(&b.lower);
                hi[lay.state(k)..lay.state(k) + lay.nx()].copy_from_slice(&b.upper);
            }
            if let Some(b) = cb {
                lo[lay.control(k)..lay.control(k) + lay.nu].copy_from_slice(&b.lower);
                hi[lay.control(k)..lay.control(k) + lay.nu].copy_from_slice(&b.upper);
            }
        }
        Some((lo, hi))
    }

    fn is_linear_quadratic(&self) -> bool {
        self.scenario.model.is_linear() && self.bounds().is_none()
    }

    fn ordering_keys(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let lay = self.layout;
        let mut var = vec![0.0; lay.dim()];
        for k in 0..lay.nodes() {
            var[lay.state(k)..lay.state(k) + lay.nx()].fill(k as f64);
            var[lay.control(k)..lay.control(k) + lay.nu].fill(k as f64);
        }
        let nx = lay.nx();
        let mut con: Vec<f64> = (0..lay.intervals * nx).map(|r| (r / nx) as f64 + 0.5).collect();
        con.extend(std::iter::repeat(-0.5).take(nx));
        con.extend(std::iter::repeat(lay.intervals as f64 + 0.5).take(nx));
        Some((var, con))
    }
}
