//! Closed-form optimal solution of the double integrator with cost
//! `½∫(v² + u²)` and fixed endpoints.
//!
//! Eliminating `u* = −λ₂` from the maximum principle (with `λ₀ = 1`) leaves the
//! linear state-adjoint system `ż = H z` on `z = (q, v, λ₁, λ₂)`. Its
//! transition matrix is known in closed form, and the two free initial
//! costates follow from the terminal conditions.
//!
//! `cosh`/`sinh` overflow near `t ≈ 710`; [`OVERFLOW_LIMIT`] is the hard
//! threshold. Applying `e^{Ht}` to the initial data cancels modes of size
//! `e^t`, losing roughly `e^T·ε` absolute accuracy, so above
//! [`TRANSITION_ROUTE_LIMIT`] trajectories are evaluated in the rescaled modal
//! form `v = −λ₁ + A e^{−t} + B e^{t−T}`. The costate formulas themselves are
//! ratios of like-sized terms and stay accurate up to [`LARGE_HORIZON`], above
//! which they are taken from the modal form too.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

pub const OVERFLOW_LIMIT: f64 = 700.0;
pub const LARGE_HORIZON: f64 = 30.0;
pub const TRANSITION_ROUTE_LIMIT: f64 = 8.0;

/// Velocity constant `C_q̃ / |q̃|` of the hyperbolic bound `|v*| ≤ C_q̃ / T`.
pub const VELOCITY_CONSTANT: f64 = 1.5;

/// The state-adjoint matrix over `(q, v, λ₁, λ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSystem;

impl HamiltonianSystem {
    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::new(
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, -1.0, //
            0.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, -1.0, 0.0,
        )
    }

    /// Coefficients of `det(σI − H)`, highest power first.
    pub fn characteristic_polynomial(&self) -> [f64; 5] {
        characteristic_polynomial(&self.matrix())
    }
}

/// Faddeev–LeVerrier recursion; exact for small integer matrices.
pub fn characteristic_polynomial(a: &Matrix4<f64>) -> [f64; 5] {
    let mut coeffs = [0.0; 5];
    coeffs[0] = 1.0;
    let mut m = Matrix4::zeros();
    for k in 1..=4 {
        m = a * m + Matrix4::identity() * coeffs[k - 1];
        coeffs[k] = -(a * m).trace() / k as f64;
    }
    coeffs
}

fn check_horizon(t: f64) -> Result<()> {
    if !t.is_finite() || t.abs() > OVERFLOW_LIMIT {
        return Err(Error::Overflow {
            t,
            limit: OVERFLOW_LIMIT,
        });
    }
    Ok(())
}

/// `e^{H t}` in closed form.
pub fn transition_matrix(t: f64) -> Result<Matrix4<f64>> {
    check_horizon(t)?;
    let (s, c) = (t.sinh(), t.cosh());
    Ok(Matrix4::new(
        1.0, s, s - t, 1.0 - c, //
        0.0, c, c - 1.0, -s, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, -s, -s, c,
    ))
}

/// Boundary data together with the initial costates that solve the
/// two-point boundary value problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostateInit {
    pub lambda1_0: f64,
    pub lambda2_0: f64,
    pub horizon: f64,
    pub q0: f64,
    pub v0: f64,
    pub vt: f64,
    pub q_tilde: f64,
}

impl CostateInit {
    pub fn qt(&self) -> f64 {
        self.q0 + self.q_tilde
    }
}

/// `2(cosh T − 1) − T sinh T`, strictly negative for `T > 0`.
pub fn costate_denominator(t: f64) -> f64 {
    2.0 * (t.cosh() - 1.0) - t * t.sinh()
}

/// Modal amplitudes `(λ₁, A, B)` of `v = −λ₁ + A e^{−t} + B e^{t−T}`.
fn modal_coefficients(q_tilde: f64, v0: f64, vt: f64, horizon: f64) -> (f64, f64, f64) {
    let e = (-horizon).exp();
    let tau = (0.5 * horizon).tanh();
    let l1 = (q_tilde - tau * (v0 + vt)) / (2.0 * tau - horizon);
    let sum = (v0 + vt + 2.0 * l1) / (1.0 + e);
    let diff = (v0 - vt) / -(-horizon).exp_m1();
    (l1, 0.5 * (sum + diff), 0.5 * (sum - diff))
}

pub fn solve_costates(q0: f64, v0: f64, qt: f64, vt: f64, horizon: f64) -> Result<CostateInit> {
    if !(horizon > 0.0) {
        return Err(contract(format!("horizon must be positive, got {horizon}")));
    }
    check_horizon(horizon)?;
    if ![q0, v0, qt, vt].iter().all(|x| x.is_finite()) {
        return Err(contract("boundary values must be finite"));
    }
    let q_tilde = qt - q0;
    let (lambda1_0, lambda2_0) = if horizon <= LARGE_HORIZON {
        let (s, c) = (horizon.sinh(), horizon.cosh());
        let l1 = (s * q_tilde + (1.0 - c) * (v0 + vt)) / costate_denominator(horizon);
        let l2 = (c * v0 - vt + (c - 1.0) * l1) / s;
        (l1, l2)
    } else {
        let (l1, a, b) = modal_coefficients(q_tilde, v0, vt, horizon);
        (l1, a - b * (-horizon).exp())
    };
    Ok(CostateInit {
        lambda1_0,
        lambda2_0,
        horizon,
        q0,
        v0,
        vt,
        q_tilde,
    })
}

/// Optimal state, costate and control at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalPoint {
    pub t: f64,
    pub q: f64,
    pub v: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub u: f64,
}

pub fn eval_optimal(init: &CostateInit, t: f64) -> Result<OptimalPoint> {
    let horizon = init.horizon;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Range {
            t,
            start: 0.0,
            end: horizon,
        });
    }
    let (q, v, lambda1, lambda2) = if t == 0.0 {
        (init.q0, init.v0, init.lambda1_0, init.lambda2_0)
    } else if horizon <= TRANSITION_ROUTE_LIMIT {
        let z = transition_matrix(t)? * Vector4::new(init.q0, init.v0, init.lambda1_0, init.lambda2_0);
        (z[0], z[1], z[2], z[3])
    } else {
        let (l1, a, b) = modal_coefficients(init.q_tilde, init.v0, init.vt, horizon);
        let decay = (-t).exp();
        let grow = (t - horizon).exp();
        let q = init.q0 - l1 * t + a * -(-t).exp_m1() + b * (grow - (-horizon).exp());
        (q, -l1 + a * decay + b * grow, init.lambda1_0, a * decay - b * grow)
    };
    Ok(OptimalPoint {
        t,
        q,
        v,
        lambda1,
        lambda2,
        u: -lambda2,
    })
}

/// `v*(t)` for `v₀ = v_T = 0` from the simplified closed form.
pub fn symmetric_velocity(q_tilde: f64, horizon: f64, t: f64) -> f64 {
    if horizon <= LARGE_HORIZON {
        q_tilde * (t.sinh() + (horizon - t).sinh() - horizon.sinh()) / costate_denominator(horizon)
    } else {
        // numerator and denominator multiplied by 2e^{−T}
        let e = |x: f64| x.exp();
        let num = e(t - horizon) - e(-t - horizon) + e(-t) - e(t - 2.0 * horizon) - 1.0 + e(-2.0 * horizon);
        let den = 2.0 * (1.0 + e(-2.0 * horizon) - 2.0 * e(-horizon)) - horizon * (1.0 - e(-2.0 * horizon));
        q_tilde * num / den
    }
}

/// Samples `eval_optimal` on `samples + 1` uniform points.
pub fn sample_optimal(init: &CostateInit, samples: usize) -> Result<Vec<OptimalPoint>> {
    if samples == 0 {
        return Err(contract("need at least one sample interval"));
    }
    (0..=samples)
        .map(|k| {
            let t = if k == samples {
                init.horizon
            } else {
                init.horizon * k as f64 / samples as f64
            };
            eval_optimal(init, t)
        })
        .collect()
}

/// Envelope for `T·max|u*|/|q̃|`: the ratio behaves like `6/T` for short
/// horizons and like `T/(T − 2)` for long ones, and stays below `1 + 6/T`.
pub fn control_envelope(horizon: f64) -> f64 {
    1.0 + 6.0 / horizon
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub horizon: f64,
    pub v_max: f64,
    pub t_v_max: f64,
    pub u_max: f64,
    pub t_u_max: f64,
    /// `T·max|v*|/|q̃|`.
    pub velocity_ratio: f64,
    /// `T·max|u*|/|q̃|`.
    pub control_ratio: f64,
    pub velocity_bound_holds: bool,
    pub control_bound_holds: bool,
    /// The velocity maximum sits at `T/2` and the control maximum at an endpoint.
    pub extrema_located: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicCertificate {
    pub q_tilde: f64,
    pub rows: Vec<CertificateRow>,
    /// Tightest velocity constant over the grid, `max_T T·max|v*|/|q̃|`.
    pub velocity_constant: f64,
    pub control_constant: f64,
    pub holds: bool,
}

const CERTIFICATE_SAMPLES: usize = 2000;

/// Checks `T·max|v*| ≤ 1.5|q̃|` (and the control envelope) for `v₀ = v_T = 0`
/// on every horizon in the grid.
pub fn hyperbolic_certificate(q_tilde: f64, horizons: &[f64]) -> Result<HyperbolicCertificate> {
    if horizons.is_empty() {
        return Err(contract("horizon grid is empty"));
    }
    let mut rows = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        let init = solve_costates(0.0, 0.0, q_tilde, 0.0, horizon)?;
        let pts = sample_optimal(&init, CERTIFICATE_SAMPLES)?;
        let mid = eval_optimal(&init, 0.5 * horizon)?;
        let (start, end) = (pts[0], pts[pts.len() - 1]);
        let sampled_v = pts.iter().fold(0.0_f64, |m, p| m.max(p.v.abs()));
        let sampled_u = pts.iter().fold(0.0_f64, |m, p| m.max(p.u.abs()));
        let v_max = mid.v.abs().max(sampled_v);
        let (u_max, t_u_max) = if start.u.abs() >= end.u.abs() {
            (start.u.abs().max(sampled_u), 0.0)
        } else {
            (end.u.abs().max(sampled_u), horizon)
        };
        let slack = 1e-12 * (1.0 + v_max.max(u_max));
        let extrema_located =
            sampled_v <= mid.v.abs() + slack && sampled_u <= start.u.abs().max(end.u.abs()) + slack;
        let (velocity_ratio, control_ratio) = if q_tilde == 0.0 {
            (0.0, 0.0)
        } else {
            (horizon * v_max / q_tilde.abs(), horizon * u_max / q_tilde.abs())
        };
        rows.push(CertificateRow {
            horizon,
            v_max,
            t_v_max: 0.5 * horizon,
            u_max,
            t_u_max,
            velocity_ratio,
            control_ratio,
            velocity_bound_holds: velocity_ratio <= VELOCITY_CONSTANT,
            control_bound_holds: control_ratio <= control_envelope(horizon),
            extrema_located,
        });
    }
    let velocity_constant = rows.iter().fold(0.0_f64, |m, r| m.max(r.velocity_ratio));
    let control_constant = rows.iter().fold(0.0_f64, |m, r| m.max(r.control_ratio));
    let holds = rows
        .iter()
        .all(|r| r.velocity_bound_holds && r.control_bound_holds && r.extrema_located);
    Ok(HyperbolicCertificate {
        q_tilde,
        rows,
        velocity_constant,
        control_constant,
        holds,
    })
}
