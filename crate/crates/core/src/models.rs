//! Mechanical models in first-order form `q̇ = v`, `v̇ = a(q, v, u)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{State, Trajectory};
use crate::error::{contract, Error, Result};

/// Partial derivatives of the acceleration map.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelJacobians {
    /// `∂a/∂q`, `n_q × n_q`.
    pub dq: DMatrix<f64>,
    /// `∂a/∂v`, `n_q × n_q`.
    pub dv: DMatrix<f64>,
    /// `∂a/∂u`, `n_q × n_u`.
    pub du: DMatrix<f64>,
}

/// Uniform interface over second-order control systems.
pub trait Model: Send + Sync {
    fn nq(&self) -> usize;
    fn nu(&self) -> usize;
    fn accel(&self, q: &[f64], v: &[f64], u: &[f64]) -> Vec<f64>;
    fn accel_jacobians(&self, q: &[f64], v: &[f64], u: &[f64]) -> AccelJacobians;

    /// True when `a` is affine in `(q, v, u)`.
    fn is_linear(&self) -> bool {
        false
    }

    /// Configurations at which a velocity steady state must have vanishing
    /// acceleration. Models whose acceleration does not depend on `q` only
    /// need one sample.
    fn steady_state_configurations(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.nq()]]
    }

    fn nx(&self) -> usize {
        2 * self.nq()
    }

    /// Right-hand side of the first-order system on a stacked state.
    fn rhs(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.nq();
        let mut dx = Vec::with_capacity(2 * n);
        dx.extend_from_slice(&x[n..]);
        dx.extend(self.accel(&x[..n], &x[n..], u));
        dx
    }
}

/// `q̈ = u` in `dim` independent axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleIntegrator {
    pub dim: usize,
}

impl DoubleIntegrator {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

/// Scalar double-integrator acceleration.
pub fn double_integrator_accel(_v: f64, u: f64) -> f64 {
    u
}

impl Model for DoubleIntegrator {
    fn nq(&self) -> usize {
        self.dim
    }

    fn nu(&self) -> usize {
        self.dim
    }

    fn accel(&self, _q: &[f64], v: &[f64], u: &[f64]) -> Vec<f64> {
        v.iter().zip(u).map(|(&v, &u)| double_integrator_accel(v, u)).collect()
    }

    fn accel_jacobians(&self, _q: &[f64], _v: &[f64], _u: &[f64]) -> AccelJacobians {
        let n = self.dim;
        AccelJacobians {
            dq: DMatrix::zeros(n, n),
            dv: DMatrix::zeros(n, n),
            du: DMatrix::identity(n, n),
        }
    }

    fn is_linear(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HovercraftParams {
    pub mass: f64,
    pub inertia: f64,
    /// Lever arm of the lateral thruster.
    pub lever: f64,
}

impl Default for HovercraftParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: 1.0,
            lever: 0.5,
        }
    }
}

impl HovercraftParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.inertia > 0.0 && self.lever >= 0.0)
            || !(self.mass.is_finite() && self.inertia.is_finite() && self.lever.is_finite())
        {
            return Err(contract("hovercraft needs m > 0, J > 0, r ≥ 0"));
        }
        Ok(())
    }
}

/// Planar hovercraft with configuration `(x, y, θ)` and body-frame thrust `(u₁, u₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hovercraft {
    pub params: HovercraftParams,
}

/// Accelerations `(ẍ, ÿ, θ̈)` of the hovercraft.
pub fn hovercraft_accel(theta: f64, _v: [f64; 3], u: [f64; 2], p: &HovercraftParams) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [
        (c * u[0] - s * u[1]) / p.mass,
        (s * u[0] + c * u[1]) / p.mass,
        -p.lever * u[1] / p.inertia,
    ]
}

impl Model for Hovercraft {
    fn nq(&self) -> usize {
        3
    }

    fn nu(&self) -> usize {
        2
    }

    fn accel(&self, q: &[f64], v: &[f64], u: &[f64]) -> Vec<f64> {
        hovercraft_accel(q[2], [v[0], v[1], v[2]], [u[0], u[1]], &self.params).to_vec()
    }

    fn accel_jacobians(&self, q: &[f64], _v: &[f64], u: &[f64]) -> AccelJacobians {
        let p = &self.params;
        let (s, c) = q[2].sin_cos();
        let mut dq = DMatrix::zeros(3, 3);
        dq[(0, 2)] = (-s * u[0] - c * u[1]) / p.mass;
        dq[(1, 2)] = (c * u[0] - s * u[1]) / p.mass;
        let mut du = DMatrix::zeros(3, 2);
        du[(0, 0)] = c / p.mass;
        du[(0, 1)] = -s / p.mass;
        du[(1, 0)] = s / p.mass;
        du[(1, 1)] = c / p.mass;
        du[(2, 1)] = -p.lever / p.inertia;
        AccelJacobians {
            dq,
            dv: DMatrix::zeros(3, 3),
            du,
        }
    }

    /// Headings spread over the circle: the hovercraft's acceleration depends
    /// on θ, so a steady state has to hold for every heading.
    fn steady_state_configurations(&self) -> Vec<Vec<f64>> {
        (0..8)
            .map(|k| vec![0.0, 0.0, k as f64 * std::f64::consts::FRAC_PI_4 + 0.1])
            .collect()
    }
}

/// The shipped models, addressable by identifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DoubleIntegrator(DoubleIntegrator),
    Hovercraft(Hovercraft),
}

impl ModelKind {
    pub fn double_integrator(dim: usize) -> Self {
        Self::DoubleIntegrator(DoubleIntegrator::new(dim))
    }

    pub fn hovercraft(params: HovercraftParams) -> Self {
        Self::Hovercraft(Hovercraft { params })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::DoubleIntegrator(_) => "double_integrator",
            Self::Hovercraft(_) => "hovercraft",
        }
    }

    fn inner(&self) -> &dyn Model {
        match self {
            Self::DoubleIntegrator(m) => m,
            Self::Hovercraft(m) => m,
        }
    }
}

impl Model for ModelKind {
    fn nq(&self) -> usize {
        self.inner().nq()
    }
    fn nu(&self) -> usize {
        self.inner().nu()
    }
    fn accel(&self, q: &[f64], v: &[f64], u: &[f64]) -> Vec<f64> {
        self.inner().accel(q, v, u)
    }
    fn accel_jacobians(&self, q: &[f64], v: &[f64], u: &[f64]) -> AccelJacobians {
        self.inner().accel_jacobians(q, v, u)
    }
    fn is_linear(&self) -> bool {
        self.inner().is_linear()
    }
    fn steady_state_configurations(&self) -> Vec<Vec<f64>> {
        self.inner().steady_state_configurations()
    }
}

/// Piecewise-linear control input.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(contract("control signal needs matching, non-empty times and values"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(contract("control signal times must be strictly increasing"));
        }
        let nu = values[0].len();
        if values.iter().any(|v| v.len() != nu) {
            return Err(contract("control signal values must share a dimension"));
        }
        Ok(Self { times, values })
    }

    pub fn constant(u: Vec<f64>) -> Self {
        Self {
            times: vec![0.0],
            values: vec![u],
        }
    }

    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            times: traj.times().to_vec(),
            values: traj.controls().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Value at `t`, held constant outside the node range.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0].clone();
        }
        if k == self.times.len() {
            return self.values[k - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1]
            .iter()
            .zip(&self.values[k])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

/// Classical fixed-step RK4 on the first-order form over `steps` uniform intervals.
pub fn simulate<M: Model + ?Sized>(
    model: &M,
    x0: &State,
    control: &ControlSignal,
    horizon: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps < 2 {
        return Err(contract("simulation needs at least two steps"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(contract("horizon must be positive"));
    }
    if x0.dim() != model.nq() || control.dim() != model.nu() {
        return Err(contract("initial state or control has the wrong dimension"));
    }
    let h = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    let mut x = x0.stacked();
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    controls.push(control.eval(0.0));

    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };

    for k in 0..steps {
        let t = times[k];
        let u0 = control.eval(t);
        let um = control.eval(t + 0.5 * h);
        let u1 = control.eval(times[k + 1]);
        let k1 = model.rhs(&x, &u0);
        let k2 = model.rhs(&axpy(&x, 0.5 * h, &k1), &um);
        let k3 = model.rhs(&axpy(&x, 0.5 * h, &k2), &um);
        let k4 = model.rhs(&axpy(&x, h, &k3), &u1);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: times[k + 1] });
        }
        states.push(State::from_stacked(&x)?);
        controls.push(u1);
    }
    Trajectory::new(times, states, controls, None)
}
