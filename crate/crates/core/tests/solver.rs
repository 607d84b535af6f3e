mod common;

use common::*;
use turnpike_core::analytic_lq::{eval_optimal, solve_costates};
use turnpike_core::nlp::{dense_kkt_step, kkt_residual, solve, SolveMethod, SolverOptions};
use turnpike_core::transcription::{
    extract_solution, extract_trajectory, initial_guess, pack_trajectory, transcribe, NlpProblem, Scheme, SparseMatrix, TranscriptionConfig,
};
use turnpike_core::{BoxBounds, Scenario};

/// Hides the linear-quadratic flag so the iterative path is taken.
struct Iterative<'a, P: NlpProblem>(&'a P);

impl<P: NlpProblem> NlpProblem for Iterative<'_, P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn num_constraints(&self) -> usize {
        self.0.num_constraints()
    }
    fn objective(&self, z: &[f64]) -> f64 {
        self.0.objective(z)
    }
    fn objective_gradient(&self, z: &[f64]) -> Vec<f64> {
        self.0.objective_gradient(z)
    }
    fn constraints(&self, z: &[f64]) -> Vec<f64> {
        self.0.constraints(z)
    }
    fn constraint_jacobian(&self, z: &[f64]) -> SparseMatrix {
        self.0.constraint_jacobian(z)
    }
    fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.0.bounds()
    }
    fn ordering_keys(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.0.ordering_keys()
    }
}

fn solve_scenario(s: &Scenario, n: usize) -> turnpike_core::Trajectory {
    let cfg = TranscriptionConfig::trapezoidal(n);
    let p = transcribe(s, cfg).unwrap();
    let r = solve(&p, &initial_guess(s, cfg), &SolverOptions::default()).unwrap();
    assert!(r.converged, "{:?}", r.kkt_residual);
    extract_solution(&r.z_star, &r.multipliers, s, cfg).unwrap()
}

#[test]
fn double_integrator_matches_closed_form() {
    let s = di_scenario(0.0, 0.0, 5.0, 0.0, 20.0);
    let cfg = TranscriptionConfig::trapezoidal(200);
    let p = transcribe(&s, cfg).unwrap();
    let r = solve(&p, &initial_guess(&s, cfg), &SolverOptions::default()).unwrap();
    assert_eq!(r.method, SolveMethod::KktDirect);
    assert!(r.converged && r.kkt_residual <= 1e-10, "{}", r.kkt_residual);
    let num = extract_solution(&r.z_star, &r.multipliers, &s, cfg).unwrap();
    let (eq, ev, eu) = max_errors(&num, &analytic_for(&s, 200));
    assert!(ev <= 1e-3 && eu <= 1e-3 && eq <= 5e-3, "{eq} {ev} {eu}");
}

#[test]
fn zero_boundaries_give_zero_solution() {
    for horizon in [0.5, 3.0, 20.0] {
        let s = di_scenario(0.0, 0.0, 0.0, 0.0, horizon);
        let cfg = TranscriptionConfig::trapezoidal(40);
        let p = transcribe(&s, cfg).unwrap();
        let r = solve(&p, &initial_guess(&s, cfg), &SolverOptions::default()).unwrap();
        assert!(r.objective.abs() <= 1e-10);
        assert!(r.z_star.iter().all(|x| x.abs() <= 1e-10));
    }
}

#[test]
fn trim_boundaries_give_the_trim() {
    let s = di_scenario(0.0, 0.25, 5.0, 0.25, 20.0);
    let traj = solve_scenario(&s, 200);
    for (st, u) in traj.states().iter().zip(traj.controls()) {
        assert!(u[0].abs() <= 1e-6 && (st.v[0] - 0.25).abs() <= 1e-6);
    }
}

#[test]
fn refinement_converges_at_second_order() {
    let s = di_scenario(0.0, 0.0, 5.0, 0.0, 20.0);
    let errors: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&n| {
            let (eq, ev, eu) = max_errors(&solve_scenario(&s, n), &analytic_for(&s, n));
            eq.max(ev).max(eu)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "{errors:?}");
    }
}

#[test]
fn direct_and_iterative_paths_agree() {
    for (s, n) in [(di_scenario(0.0, 0.0, 5.0, 0.0, 20.0), 200), (di_scenario(1.0, -0.5, 2.0, 0.7, 4.0), 40)] {
        let cfg = TranscriptionConfig::trapezoidal(n);
        let p = transcribe(&s, cfg).unwrap();
        let z0 = initial_guess(&s, cfg);
        let direct = solve(&p, &z0, &SolverOptions::default()).unwrap();
        let iterative = solve(&Iterative(&p), &z0, &SolverOptions::default()).unwrap();
        assert_eq!(iterative.method, SolveMethod::AugmentedLagrangian);
        assert!(iterative.converged);
        let diff = direct
            .z_star
            .iter()
            .zip(&iterative.z_star)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-6, "{diff}");
    }
}

#[test]
fn pure_augmented_lagrangian_converges_on_a_small_problem() {
    let s = di_scenario(0.0, 0.0, 1.0, 0.0, 2.0);
    let cfg = TranscriptionConfig::trapezoidal(10);
    let p = transcribe(&s, cfg).unwrap();
    let opts = SolverOptions {
        max_sqp: 0,
        tol_kkt: 1e-7,
        ..Default::default()
    };
    let r = solve(&Iterative(&p), &initial_guess(&s, cfg), &opts).unwrap();
    assert!(r.converged, "{:?}", r.history.last());
    assert_eq!(r.iterations.sqp, 0);
    let direct = solve(&p, &initial_guess(&s, cfg), &SolverOptions::default()).unwrap();
    let diff = direct.z_star.iter().zip(&r.z_star).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-6, "{diff}");
    for w in r.history.windows(2) {
        assert!(w[1].feasibility <= w[0].feasibility || w[1].next_penalty > w[1].penalty);
    }
}

#[test]
fn banded_and_dense_kkt_solves_agree() {
    let s = di_scenario(0.0, 0.3, 5.0, -0.1, 7.0);
    let cfg = TranscriptionConfig::trapezoidal(60);
    let p = transcribe(&s, cfg).unwrap();
    let z0 = initial_guess(&s, cfg);
    let banded = solve(&p, &z0, &SolverOptions::default()).unwrap();
    let dense = dense_kkt_step(&p, &z0).unwrap();
    let diff = banded.z_star.iter().zip(&dense).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-9, "{diff}");
}

/// Defect multipliers are `−λ(t_k + h/2)`, boundary multipliers `−λ(0)` and `λ(T)`.
fn mapped_multipliers(s: &Scenario, n: usize) -> Vec<f64> {
    let init = solve_costates(s.x0.q[0], s.x0.v[0], s.xt.q[0], s.xt.v[0], s.horizon).unwrap();
    let h = s.horizon / n as f64;
    let lam = |t: f64| {
        let p = eval_optimal(&init, t).unwrap();
        [p.lambda1, p.lambda2]
    };
    let mut mu = Vec::new();
    for k in 0..n {
        mu.extend(lam((k as f64 + 0.5) * h).map(|x| -x));
    }
    mu.extend(lam(0.0).map(|x| -x));
    mu.extend(lam(s.horizon));
    mu
}

#[test]
fn analytic_costates_are_discrete_multipliers() {
    let s = di_scenario(0.0, 0.0, 5.0, 0.0, 10.0);
    let residual = |n: usize| {
        let p = transcribe(&s, TranscriptionConfig::trapezoidal(n)).unwrap();
        let z = pack_trajectory(&analytic_for(&s, n));
        kkt_residual(&p, &z, &mapped_multipliers(&s, n)).unwrap()
    };
    let (r1, r2) = (residual(100), residual(200));
    assert!(r1 < 1e-2, "{r1}");
    assert!(r1 / r2 > 3.5, "{r1} {r2}");

    // and the solver's multipliers approach them
    let n = 200;
    let cfg = TranscriptionConfig::trapezoidal(n);
    let p = transcribe(&s, cfg).unwrap();
    let r = solve(&p, &initial_guess(&s, cfg), &SolverOptions::default()).unwrap();
    let diff = r
        .multipliers
        .iter()
        .zip(mapped_multipliers(&s, n))
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-3, "{diff}");
}

#[test]
fn residual_is_positive_away_from_the_optimum() {
    let s = di_scenario(0.0, 0.0, 5.0, 0.0, 10.0);
    let cfg = TranscriptionConfig::trapezoidal(20);
    let p = transcribe(&s, cfg).unwrap();
    let m = p.num_constraints();
    assert!(kkt_residual(&p, &initial_guess(&s, cfg), &vec![0.0; m]).unwrap() > 0.0);
}

#[test]
fn hovercraft_parking_converges() {
    let s = parking(10.0);
    let cfg = TranscriptionConfig::trapezoidal(60);
    let p = transcribe(&s, cfg).unwrap();
    let z0 = initial_guess(&s, cfg);
    let r = solve(&p, &z0, &SolverOptions::default()).unwrap();
    assert!(r.converged, "{} {}", r.kkt_residual, r.feasibility);
    assert!(r.kkt_residual <= 1e-8 && r.feasibility <= 1e-8);
    for w in r.history.windows(2) {
        assert!(w[1].feasibility <= w[0].feasibility || w[1].next_penalty > w[1].penalty);
    }
    // bit-identical on a second run
    assert_eq!(solve(&p, &z0, &SolverOptions::default()).unwrap(), r);
}

#[test]
fn objective_does_not_increase_from_a_feasible_start() {
    // the optimum of a differently weighted problem is feasible for this one
    let mut other = parking(10.0);
    other.cost.w_u = vec![4.0, 4.0];
    let cfg = TranscriptionConfig::trapezoidal(60);
    let q = transcribe(&other, cfg).unwrap();
    let start = solve(&q, &initial_guess(&other, cfg), &SolverOptions::default()).unwrap();
    assert!(start.converged);

    let s = parking(10.0);
    let p = transcribe(&s, cfg).unwrap();
    let r = solve(&p, &start.z_star, &SolverOptions::default()).unwrap();
    assert!(r.converged);
    assert!(r.objective <= r.initial_objective, "{} {}", r.objective, r.initial_objective);
}

#[test]
fn control_bounds_are_enforced() {
    // unconstrained optimum has max |u| ≈ 0.278
    let s = di_scenario(0.0, 0.0, 5.0, 0.0, 20.0)
        .with_bounds(Some(BoxBounds::new(vec![-0.2], vec![0.2]).unwrap()), None)
        .unwrap();
    let cfg = TranscriptionConfig::trapezoidal(100);
    let p = transcribe(&s, cfg).unwrap();
    assert!(!p.is_linear_quadratic());
    let r = solve(&p, &initial_guess(&s, cfg), &SolverOptions::default()).unwrap();
    assert!(r.converged, "{} {}", r.kkt_residual, r.feasibility);
    let traj = extract_trajectory(&r.z_star, &s, cfg).unwrap();
    let umax = traj.controls().iter().fold(0.0_f64, |m, u| m.max(u[0].abs()));
    assert!(umax <= 0.2 && umax > 0.199, "{umax}");
}

#[test]
fn recovered_costates_converge_for_both_schemes() {
    let s = di_scenario(0.0, 0.0, 5.0, 0.0, 20.0);
    let init = solve_costates(0.0, 0.0, 5.0, 0.0, 20.0).unwrap();
    for scheme in [Scheme::Trapezoidal, Scheme::HermiteSimpson] {
        let errors: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&n| {
                let cfg = TranscriptionConfig { intervals: n, scheme };
                let p = transcribe(&s, cfg).unwrap();
                let r = solve(&p, &initial_guess(&s, cfg), &SolverOptions::default()).unwrap();
                let traj = extract_solution(&r.z_star, &r.multipliers, &s, cfg).unwrap();
                let costates = traj.costates().unwrap();
                traj.times().iter().zip(costates).fold(0.0_f64, |m, (&t, c)| {
                    let a = eval_optimal(&init, t).unwrap();
                    m.max((c[0] - a.lambda1).abs()).max((c[1] - a.lambda2).abs())
                })
            })
            .collect();
        assert!(errors[2] <= 1e-3, "{scheme:?} {errors:?}");
        assert!(errors[1] / errors[2] > 3.4, "{scheme:?} {errors:?}");
    }
}
