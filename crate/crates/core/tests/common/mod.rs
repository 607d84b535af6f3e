#![allow(dead_code)]

use turnpike_core::analytic_lq::{eval_optimal, solve_costates, CostateInit};
use turnpike_core::models::HovercraftParams;
use turnpike_core::{ModelKind, Scenario, StageCost, State, Trajectory};

pub fn di_scenario(q0: f64, v0: f64, qt: f64, vt: f64, horizon: f64) -> Scenario {
    Scenario::new(
        ModelKind::double_integrator(1),
        StageCost::half_squared(1, 1),
        State::new(vec![q0], vec![v0]).unwrap(),
        State::new(vec![qt], vec![vt]).unwrap(),
        horizon,
    )
    .unwrap()
}

pub fn parking(horizon: f64) -> Scenario {
    Scenario::new(
        ModelKind::hovercraft(HovercraftParams::default()),
        StageCost::half_squared(3, 2),
        State::new(vec![0.0, 1.0, 0.0], vec![0.0; 3]).unwrap(),
        State::new(vec![0.0; 3], vec![0.0; 3]).unwrap(),
        horizon,
    )
    .unwrap()
}

pub fn grid(n: usize, horizon: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| if k == n { horizon } else { horizon * k as f64 / n as f64 })
        .collect()
}

/// Closed-form optimum sampled on a uniform grid.
pub fn analytic_trajectory(init: &CostateInit, n: usize) -> Trajectory {
    let times = grid(n, init.horizon);
    let pts: Vec<_> = times.iter().map(|&t| eval_optimal(init, t).unwrap()).collect();
    Trajectory::new(
        times,
        pts.iter().map(|p| State::new(vec![p.q], vec![p.v]).unwrap()).collect(),
        pts.iter().map(|p| vec![p.u]).collect(),
        Some(pts.iter().map(|p| vec![p.lambda1, p.lambda2]).collect()),
    )
    .unwrap()
}

pub fn analytic_for(s: &Scenario, n: usize) -> Trajectory {
    let init = solve_costates(s.x0.q[0], s.x0.v[0], s.xt.q[0], s.xt.v[0], s.horizon).unwrap();
    analytic_trajectory(&init, n)
}

/// Max-norm errors in (q, v, u) between two trajectories on the same grid.
pub fn max_errors(a: &Trajectory, b: &Trajectory) -> (f64, f64, f64) {
    let mut e = (0.0_f64, 0.0_f64, 0.0_f64);
    for k in 0..a.len() {
        let (sa, sb) = (&a.states()[k], &b.states()[k]);
        for i in 0..sa.dim() {
            e.0 = e.0.max((sa.q[i] - sb.q[i]).abs());
            e.1 = e.1.max((sa.v[i] - sb.v[i]).abs());
        }
        for (x, y) in a.controls()[k].iter().zip(&b.controls()[k]) {
            e.2 = e.2.max((x - y).abs());
        }
    }
    e
}

/// Deterministic pseudo-random vector in [−1, 1].
pub fn noise(len: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}
