//! Turnpike diagnostics: deviation profiles from a velocity steady state,
//! measures of the excursion sets `{t : d(t) > ε}`, entry and exit times,
//! and hyperbolic-constant estimates over horizon sweeps.
//!
//! Profiles are piecewise linear between nodes and every quantity is computed
//! on that interpolant with exact segment crossings.

use serde::{Deserialize, Serialize};

use crate::domain::Trajectory;
use crate::error::{contract, Error, Result};
use crate::models::Model;
use crate::symmetry::{VelocitySteadyState, STEADY_STATE_TOL};

/// The pair `(v̄, ū)` deviations are measured from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnpikeReference {
    pub v_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
}

impl TurnpikeReference {
    /// Checks that `(v̄, ū)` is a velocity steady state of `model`.
    pub fn new<M: Model + ?Sized>(model: &M, v_bar: Vec<f64>, u_bar: Vec<f64>) -> Result<Self> {
        if v_bar.len() != model.nq() || u_bar.len() != model.nu() {
            return Err(contract("reference dimensions do not match the model"));
        }
        let steady = VelocitySteadyState { v_bar, u_bar };
        let r = steady.residual(model);
        if !(r <= STEADY_STATE_TOL) {
            return Err(contract(format!("(v̄, ū) is not a velocity steady state: residual {r:e}")));
        }
        Ok(Self {
            v_bar: steady.v_bar,
            u_bar: steady.u_bar,
        })
    }

    pub fn zero<M: Model + ?Sized>(model: &M) -> Result<Self> {
        Self::new(model, vec![0.0; model.nq()], vec![0.0; model.nu()])
    }
}

/// Samples of a nonnegative function on a grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationProfile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DeviationProfile {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(contract("a profile needs at least two samples and matching lengths"));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(contract("profile times must start at 0 and increase strictly"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(contract("profile values must be finite and nonnegative"));
        }
        Ok(Self { times, values })
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Linear interpolation, clamped to the grid.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        let k = self.times.partition_point(|s| *s <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] + w * (self.values[k] - self.values[k - 1])
    }

    /// Measure of `{t : d(t) > ε}` on the interpolant.
    pub fn theta_measure(&self, eps: f64) -> f64 {
        let mut total = 0.0;
        for k in 1..self.times.len() {
            let (t0, t1) = (self.times[k - 1], self.times[k]);
            let (a, b) = (self.values[k - 1] - eps, self.values[k] - eps);
            total += if a > 0.0 && b > 0.0 {
                t1 - t0
            } else if a > 0.0 && b <= 0.0 {
                (t1 - t0) * a / (a - b)
            } else if a <= 0.0 && b > 0.0 {
                (t1 - t0) * b / (b - a)
            } else {
                0.0
            };
        }
        total.min(self.horizon())
    }

    /// Max of the interpolant over `[a, b]`.
    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        let mut m = self.eval(a).max(self.eval(b));
        for (t, v) in self.times.iter().zip(&self.values) {
            if *t > a && *t < b {
                m = m.max(*v);
            }
        }
        m
    }

    /// Number of sign changes of `d − ε` along the grid.
    pub fn crossings(&self, eps: f64) -> usize {
        self.values
            .windows(2)
            .filter(|w| (w[0] > eps) != (w[1] > eps))
            .count()
    }
}

/// Euclidean norm of the stacked `(v − v̄, u − ū)` at each node.
pub fn deviation_profile(traj: &Trajectory, reference: &TurnpikeReference) -> Result<DeviationProfile> {
    if traj.nq() != reference.v_bar.len() || traj.nu() != reference.u_bar.len() {
        return Err(contract(format!(
            "trajectory has n_q = {}, n_u = {} but the reference has {} and {}",
            traj.nq(),
            traj.nu(),
            reference.v_bar.len(),
            reference.u_bar.len()
        )));
    }
    let values = traj
        .states()
        .iter()
        .zip(traj.controls())
        .map(|(s, u)| {
            let dv = s.v.iter().zip(&reference.v_bar).map(|(a, b)| (a - b).powi(2));
            let du = u.iter().zip(&reference.u_bar).map(|(a, b)| (a - b).powi(2));
            dv.chain(du).sum::<f64>().sqrt()
        })
        .collect();
    DeviationProfile::new(traj.times().to_vec(), values)
}

pub fn theta_measure(traj: &Trajectory, reference: &TurnpikeReference, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(contract("ε must be positive"));
    }
    Ok(deviation_profile(traj, reference)?.theta_measure(eps))
}

/// `τ₀` and `τ_T`; `None` when the profile never comes within `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryExit {
    pub tau0: Option<f64>,
    pub tau_t: Option<f64>,
}

impl EntryExit {
    /// The window `[τ₀, T − τ_T]`.
    pub fn window(&self, horizon: f64) -> Option<(f64, f64)> {
        Some((self.tau0?, horizon - self.tau_t?))
    }
}

/// First time `d ≤ δ` and `T` minus the last such time, with exact crossings.
pub fn entry_exit_times(profile: &DeviationProfile, delta: f64) -> Result<EntryExit> {
    if !(delta > 0.0) {
        return Err(contract("δ must be positive"));
    }
    let (t, d) = (&profile.times, &profile.values);
    let n = t.len();
    let first = (0..n).find(|&k| d[k] <= delta).map(|k| {
        if k == 0 {
            0.0
        } else {
            // d[k-1] > δ ≥ d[k]
            t[k - 1] + (t[k] - t[k - 1]) * (d[k - 1] - delta) / (d[k - 1] - d[k])
        }
    });
    let last = (0..n).rev().find(|&k| d[k] <= delta).map(|k| {
        if k == n - 1 {
            t[k]
        } else {
            t[k] + (t[k + 1] - t[k]) * (delta - d[k]) / (d[k + 1] - d[k])
        }
    });
    Ok(EntryExit {
        tau0: first,
        tau_t: last.map(|l| profile.horizon() - l),
    })
}

/// Threshold used for entry/exit detection in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    Fixed(f64),
    /// Whole interval, `τ₀ = τ_T = 0`.
    WholeInterval,
    /// `δ = 2·C_prev/T` with `C_prev` the estimate from shorter horizons,
    /// falling back to `0.05·max d`.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicRow {
    pub horizon: f64,
    pub delta: f64,
    pub entry_exit: EntryExit,
    /// `m(T)`, max deviation on the window.
    pub window_max: Option<f64>,
    /// `T·m(T)`.
    pub scaled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicEstimate {
    pub c_estimate: f64,
    pub rows: Vec<HyperbolicRow>,
    /// `T·m(T)` increases strictly over the top half of the sweep.
    pub growth: bool,
}

/// `C = max_T T·m(T)` over a sweep, processed in increasing `T`.
pub fn hyperbolic_constant(sweep: &[DeviationProfile], rule: DeltaRule) -> Result<HyperbolicEstimate> {
    if sweep.is_empty() {
        return Err(contract("empty sweep"));
    }
    let mut order: Vec<usize> = (0..sweep.len()).collect();
    order.sort_by(|&a, &b| sweep[a].horizon().total_cmp(&sweep[b].horizon()));
    let mut rows = Vec::with_capacity(sweep.len());
    let mut c_prev: Option<f64> = None;
    for &i in &order {
        let p = &sweep[i];
        let horizon = p.horizon();
        let delta = match rule {
            DeltaRule::Fixed(d) => d,
            DeltaRule::WholeInterval => f64::INFINITY,
            DeltaRule::Adaptive => match c_prev {
                Some(c) if c > 0.0 => 2.0 * c / horizon,
                _ => 0.05 * p.max(),
            },
        };
        let entry_exit = if delta.is_infinite() {
            EntryExit {
                tau0: Some(0.0),
                tau_t: Some(0.0),
            }
        } else if delta > 0.0 {
            entry_exit_times(p, delta)?
        } else {
            // d ≡ 0 under the adaptive fallback
            EntryExit {
                tau0: Some(0.0),
                tau_t: Some(0.0),
            }
        };
        let window_max = entry_exit.window(horizon).map(|(a, b)| if a <= b { p.max_on(a, b) } else { 0.0 });
        let scaled = window_max.map(|m| horizon * m);
        if let Some(s) = scaled {
            c_prev = Some(c_prev.map_or(s, |c| c.max(s)));
        }
        rows.push(HyperbolicRow {
            horizon,
            delta,
            entry_exit,
            window_max,
            scaled,
        });
    }
    let Some(c_estimate) = c_prev else {
        return Err(Error::Diagnostic("no horizon in the sweep has a defined turnpike window".into()));
    };
    let tail: Vec<f64> = rows[rows.len() / 2..].iter().filter_map(|r| r.scaled).collect();
    let growth = tail.len() >= 2 && tail.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
    Ok(HyperbolicEstimate { c_estimate, rows, growth })
}

/// 16 logarithmically spaced points on `[1e−3, max_d]`.
pub fn default_eps_grid(max_d: f64) -> Vec<f64> {
    const LOW: f64 = 1e-3;
    const POINTS: usize = 16;
    if !(max_d > LOW) {
        return vec![LOW];
    }
    let (a, b) = (LOW.ln(), max_d.ln());
    (0..POINTS)
        .map(|i| {
            if i == POINTS - 1 {
                max_d
            } else {
                (a + (b - a) * i as f64 / (POINTS - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuRow {
    pub eps: f64,
    /// `ν̂(ε)`, max of the measure over the sweep.
    pub nu_hat: f64,
    /// `C/ε`.
    pub bound: f64,
    pub bound_holds: bool,
    /// Members with `T ≥ C/ε` and a nonzero measure.
    pub late_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuEnvelope {
    pub rows: Vec<NuRow>,
}

impl NuEnvelope {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.bound_holds && r.late_violations == 0)
    }
}

/// `ν̂(ε)` across a sweep together with the hyperbolic implication
/// `ν̂(ε) ≤ C/ε`.
pub fn nu_envelope(sweep: &[DeviationProfile], eps_grid: &[f64], c_estimate: f64) -> Result<NuEnvelope> {
    if eps_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(contract("ε-grid must be positive"));
    }
    let rows = eps_grid
        .iter()
        .map(|&eps| {
            let measures: Vec<(f64, f64)> = sweep.iter().map(|p| (p.horizon(), p.theta_measure(eps))).collect();
            let nu_hat = measures.iter().fold(0.0_f64, |m, (_, v)| m.max(*v));
            let bound = c_estimate / eps;
            NuRow {
                eps,
                nu_hat,
                bound,
                bound_holds: nu_hat <= bound * (1.0 + 1e-12),
                late_violations: measures.iter().filter(|(t, v)| *t >= bound && *v > 0.0).count(),
            }
        })
        .collect();
    Ok(NuEnvelope { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub horizon: f64,
    pub profile: DeviationProfile,
    /// `(ε, μ[Θ_T(ε)])` over the ε-grid.
    pub theta: Vec<(f64, f64)>,
    pub tau0: Option<f64>,
    pub tau_t: Option<f64>,
    pub window_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnpikeReport {
    pub reference: TurnpikeReference,
    pub eps_grid: Vec<f64>,
    pub members: Vec<MemberReport>,
    pub c_estimate: f64,
    pub growth: bool,
    pub nu_envelope: NuEnvelope,
}

/// Full analysis of a sweep of trajectories, reported in increasing `T`.
pub fn analyze_sweep(
    sweep: &[Trajectory],
    reference: &TurnpikeReference,
    rule: DeltaRule,
    eps_grid: Option<Vec<f64>>,
) -> Result<TurnpikeReport> {
    let mut profiles = sweep
        .iter()
        .map(|t| deviation_profile(t, reference))
        .collect::<Result<Vec<_>>>()?;
    profiles.sort_by(|a, b| a.horizon().total_cmp(&b.horizon()));
    let estimate = hyperbolic_constant(&profiles, rule)?;
    let eps_grid = eps_grid.unwrap_or_else(|| default_eps_grid(profiles.iter().fold(0.0, |m, p| m.max(p.max()))));
    let nu = nu_envelope(&profiles, &eps_grid, estimate.c_estimate)?;
    let members = profiles
        .into_iter()
        .zip(&estimate.rows)
        .map(|(profile, row)| MemberReport {
            horizon: row.horizon,
            theta: eps_grid.iter().map(|&e| (e, profile.theta_measure(e))).collect(),
            tau0: row.entry_exit.tau0,
            tau_t: row.entry_exit.tau_t,
            window_max: row.window_max,
            profile,
        })
        .collect();
    Ok(TurnpikeReport {
        reference: reference.clone(),
        eps_grid,
        members,
        c_estimate: estimate.c_estimate,
        growth: estimate.growth,
        nu_envelope: nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic_lq::{eval_optimal, solve_costates};
    use crate::domain::State;
    use crate::models::{DoubleIntegrator, Hovercraft, HovercraftParams};

    fn grid(n: usize, t: f64) -> Vec<f64> {
        (0..=n).map(|k| t * k as f64 / n as f64).collect()
    }

    fn constant(n: usize, t: f64, d: f64) -> DeviationProfile {
        DeviationProfile::new(grid(n, t), vec![d; n + 1]).unwrap()
    }

    fn trim(n: usize, horizon: f64, v: f64) -> Trajectory {
        let times = grid(n, horizon);
        let states = times.iter().map(|t| State::new(vec![v * t], vec![v]).unwrap()).collect();
        Trajectory::new(times, states, vec![vec![0.0]; n + 1], None).unwrap()
    }

    fn analytic(q_tilde: f64, v0: f64, vt: f64, horizon: f64, n: usize) -> Trajectory {
        let init = solve_costates(0.0, v0, q_tilde, vt, horizon).unwrap();
        let times = grid(n, horizon);
        let pts: Vec<_> = times.iter().map(|&t| eval_optimal(&init, t).unwrap()).collect();
        let states = pts.iter().map(|p| State::new(vec![p.q], vec![p.v]).unwrap()).collect();
        let controls = pts.iter().map(|p| vec![p.u]).collect();
        Trajectory::new(times, states, controls, None).unwrap()
    }

    fn zero_ref() -> TurnpikeReference {
        TurnpikeReference::zero(&DoubleIntegrator::new(1)).unwrap()
    }

    #[test]
    fn reference_must_be_steady() {
        let hc = Hovercraft { params: HovercraftParams::default() };
        assert!(TurnpikeReference::zero(&hc).is_ok());
        assert!(TurnpikeReference::new(&hc, vec![0.0; 3], vec![1.0, 0.0]).is_err());
        assert!(TurnpikeReference::new(&hc, vec![0.0; 2], vec![0.0; 2]).is_err());
        // drifting with constant velocity is steady for the double integrator
        assert!(TurnpikeReference::new(&DoubleIntegrator::new(1), vec![0.25], vec![0.0]).is_ok());
    }

    #[test]
    fn trim_profiles() {
        let tr = trim(40, 20.0, 0.25);
        let on = TurnpikeReference::new(&DoubleIntegrator::new(1), vec![0.25], vec![0.0]).unwrap();
        assert!(deviation_profile(&tr, &on).unwrap().values.iter().all(|d| *d == 0.0));
        let off = deviation_profile(&tr, &zero_ref()).unwrap();
        assert!(off.values.iter().all(|d| *d == 0.25));
        let wrong = TurnpikeReference::zero(&Hovercraft { params: HovercraftParams::default() }).unwrap();
        assert!(deviation_profile(&tr, &wrong).is_err());
    }

    #[test]
    fn analytic_profile_peaks_mid_horizon() {
        let p = deviation_profile(&analytic(5.0, 0.0, 0.0, 20.0, 200), &zero_ref()).unwrap();
        let (k, m) = p
            .values
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bk, bm), (k, v)| if *v > bm { (k, *v) } else { (bk, bm) });
        // |u| at the ends is larger than v at the middle for T = 20
        let mid = p.values[100];
        assert!((mid - 0.277_752_555_467_408_3).abs() < 1e-12);
        assert!(k == 0 || k == 200 || k == 100, "{k} {m}");
    }

    #[test]
    fn constant_profile_measures() {
        let p = constant(50, 20.0, 0.25);
        assert_eq!(p.theta_measure(0.3), 0.0);
        assert!((p.theta_measure(0.2) - 20.0).abs() < 1e-12);
        assert!(theta_measure(&trim(10, 20.0, 0.25), &zero_ref(), 0.0).is_err());
    }

    #[test]
    fn measure_matches_closed_form_crossings() {
        // oracle: bisection on the closed-form deviation √(v² + u²) − ε
        let init = solve_costates(0.0, 0.0, 5.0, 0.0, 20.0).unwrap();
        let d = |t: f64| {
            let p = eval_optimal(&init, t).unwrap();
            (p.v * p.v + p.u * p.u).sqrt()
        };
        let eps = 0.2;
        let n = 4000;
        let fine: Vec<f64> = grid(n, 20.0);
        let mut exact = 0.0;
        for w in fine.windows(2) {
            let (a, b) = (d(w[0]) - eps, d(w[1]) - eps);
            if a > 0.0 && b > 0.0 {
                exact += w[1] - w[0];
            } else if (a > 0.0) != (b > 0.0) {
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if (d(mid) > eps) == (a > 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                exact += if a > 0.0 { lo - w[0] } else { w[1] - lo };
            }
        }
        let p = deviation_profile(&analytic(5.0, 0.0, 0.0, 20.0, 2000), &zero_ref()).unwrap();
        let got = p.theta_measure(eps);
        // interpolation error is O(h²) per crossing, h = 0.01
        assert!((got - exact).abs() < 1e-3, "{got} vs {exact}");
        assert!(got > 0.0 && got < 20.0);
    }

    #[test]
    fn measure_monotone_in_eps_and_bounded() {
        let p = deviation_profile(&analytic(5.0, 3.0, 6.0, 20.0, 400), &zero_ref()).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let m = p.theta_measure(k as f64 * 0.05);
            assert!(m <= prev && m <= 20.0 && m >= 0.0);
            prev = m;
        }
    }

    #[test]
    fn grid_measure_convergence() {
        for eps in [0.1, 0.2, 0.3, 0.5] {
            let n = 100;
            let coarse = deviation_profile(&analytic(5.0, 0.0, 0.0, 20.0, n), &zero_ref()).unwrap();
            let fine = deviation_profile(&analytic(5.0, 0.0, 0.0, 20.0, 2 * n), &zero_ref()).unwrap();
            let h = 20.0 / n as f64;
            let bound = 2.0 * h * coarse.crossings(eps).max(fine.crossings(eps)) as f64;
            assert!((coarse.theta_measure(eps) - fine.theta_measure(eps)).abs() <= bound, "{eps}");
        }
    }

    #[test]
    fn entry_exit_cases() {
        let z = constant(20, 10.0, 0.0);
        let e = entry_exit_times(&z, 0.1).unwrap();
        assert_eq!((e.tau0, e.tau_t), (Some(0.0), Some(0.0)));
        // d(t) = |t − 5| / 5 on [0, 10]: below 0.4 on [3, 7]
        let times = grid(10, 10.0);
        let values = times.iter().map(|t| (t - 5.0).abs() / 5.0).collect();
        let p = DeviationProfile::new(times, values).unwrap();
        let e = entry_exit_times(&p, 0.4).unwrap();
        assert!((e.tau0.unwrap() - 3.0).abs() < 1e-12 && (e.tau_t.unwrap() - 3.0).abs() < 1e-12);
        let e = entry_exit_times(&p, 0.3).unwrap();
        assert!((e.tau0.unwrap() - 3.5).abs() < 1e-12 && (e.tau_t.unwrap() - 3.5).abs() < 1e-12);
        assert_eq!(entry_exit_times(&constant(5, 1.0, 1.0), 0.5).unwrap().tau0, None);
        assert!(entry_exit_times(&p, 0.0).is_err());
    }

    #[test]
    fn nonzero_end_velocities_enter_late() {
        let p = deviation_profile(&analytic(5.0, 3.0, 6.0, 20.0, 400), &zero_ref()).unwrap();
        let e = entry_exit_times(&p, 1.0).unwrap();
        let (a, b) = (e.tau0.unwrap(), e.tau_t.unwrap());
        assert!(a > 0.0 && b > 0.0 && a + b <= 20.0);
    }

    #[test]
    fn hyperbolic_constant_cases() {
        let horizons = [5.0, 10.0, 20.0, 40.0, 80.0];
        let sweep: Vec<_> = horizons
            .iter()
            .map(|&t| deviation_profile(&analytic(5.0, 0.0, 0.0, t, 400), &zero_ref()).unwrap())
            .collect();
        let est = hyperbolic_constant(&sweep, DeltaRule::WholeInterval).unwrap();
        assert!(est.c_estimate <= 1.5 * 5.0 * 2f64.sqrt(), "{}", est.c_estimate);
        assert!(!est.growth);

        // trims: T·m(T) = |q̃| exactly
        let trims: Vec<_> = horizons
            .iter()
            .map(|&t| deviation_profile(&trim(50, t, 5.0 / t), &zero_ref()).unwrap())
            .collect();
        let est = hyperbolic_constant(&trims, DeltaRule::WholeInterval).unwrap();
        for r in &est.rows {
            assert!((r.scaled.unwrap() - 5.0).abs() < 1e-12);
        }
        assert!(!est.growth);

        let zeros: Vec<_> = horizons.iter().map(|&t| constant(10, t, 0.0)).collect();
        assert_eq!(hyperbolic_constant(&zeros, DeltaRule::Adaptive).unwrap().c_estimate, 0.0);

        let never: Vec<_> = horizons.iter().map(|&t| constant(10, t, 1.0)).collect();
        assert!(matches!(hyperbolic_constant(&never, DeltaRule::Fixed(0.5)), Err(Error::Diagnostic(_))));
        assert!(hyperbolic_constant(&[], DeltaRule::Adaptive).is_err());
    }

    #[test]
    fn growth_is_flagged() {
        // constant deviation: T·m(T) grows linearly
        let sweep: Vec<_> = [5.0, 10.0, 20.0, 40.0].iter().map(|&t| constant(10, t, 1.0)).collect();
        assert!(hyperbolic_constant(&sweep, DeltaRule::WholeInterval).unwrap().growth);
    }

    #[test]
    fn adaptive_delta_uses_previous_estimate() {
        let v_shape = |t: f64| {
            let times = grid(100, t);
            let values = times.iter().map(|s| (s - t / 2.0).abs()).collect();
            DeviationProfile::new(times, values).unwrap()
        };
        let sweep = [v_shape(20.0), v_shape(10.0)];
        let est = hyperbolic_constant(&sweep, DeltaRule::Adaptive).unwrap();
        // first member: δ = 0.05·5, window [4.75, 5.25], T·m = 2.5
        assert_eq!(est.rows[0].horizon, 10.0);
        assert!((est.rows[0].delta - 0.25).abs() < 1e-15);
        assert!((est.rows[0].scaled.unwrap() - 2.5).abs() < 1e-12);
        assert!((est.rows[1].delta - 2.0 * 2.5 / 20.0).abs() < 1e-15);
        assert!((est.rows[1].scaled.unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(est.c_estimate, est.rows[1].scaled.unwrap());
    }

    #[test]
    fn nu_envelope_cases() {
        // synthetic hyperbolic family d_T ≡ C/T
        let c = 3.0;
        let sweep: Vec<_> = [1.0, 2.0, 5.0, 10.0, 50.0].iter().map(|&t| constant(20, t, c / t)).collect();
        let grid_eps = default_eps_grid(3.0);
        assert_eq!(grid_eps.len(), 16);
        let env = nu_envelope(&sweep, &grid_eps, c).unwrap();
        assert!(env.holds());

        let zeros: Vec<_> = [1.0, 2.0].iter().map(|&t| constant(5, t, 0.0)).collect();
        let env = nu_envelope(&zeros, &[0.1, 1.0], 0.0).unwrap();
        assert!(env.rows.iter().all(|r| r.nu_hat == 0.0));
        assert!(nu_envelope(&zeros, &[0.0], 1.0).is_err());
    }

    #[test]
    fn analytic_sweep_report() {
        let horizons = [5.0, 10.0, 20.0, 40.0, 80.0];
        let sweep: Vec<_> = horizons.iter().map(|&t| analytic(5.0, 0.0, 0.0, t, 400)).collect();
        let report = analyze_sweep(&sweep, &zero_ref(), DeltaRule::WholeInterval, None).unwrap();
        assert!(report.nu_envelope.holds());
        assert_eq!(report.members.len(), 5);
        for m in &report.members {
            assert!(m.theta.iter().all(|(_, v)| *v >= 0.0 && *v <= m.horizon));
        }
        assert!(report.members.windows(2).all(|w| w[0].horizon < w[1].horizon));
        assert!(report.c_estimate > 0.0 && !report.growth);
    }

    #[test]
    fn eps_grid_shape() {
        let g = default_eps_grid(0.5);
        assert!((g[0] - 1e-3).abs() < 1e-18 && g[15] == 0.5);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(default_eps_grid(1e-4), vec![1e-3]);
    }
}
