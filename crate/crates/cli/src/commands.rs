//! `solve`, `analytic`, `sweep`, `check` and `trims`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use turnpike_core::analytic_lq::{control_envelope, sample_optimal, solve_costates, OptimalPoint};
use turnpike_core::models::ControlSignal;
use turnpike_core::nlp::{gradient_check, solve, IterationCounts, SolveMethod, SolverOptions};
use turnpike_core::symmetry::{
    check_equivariance, find_velocity_steady_state, optimal_velocity_steady_state, GroupElement, OptimalSteadyState,
    SymmetryAction, VelocitySteadyState,
};
use turnpike_core::transcription::{extract_solution, initial_guess, transcribe, NlpProblem, TranscriptionConfig};
use turnpike_core::turnpike::{analyze_sweep, DeltaRule, NuEnvelope, TurnpikeReference};
use turnpike_core::{BoxBounds, Error, Model, ModelKind, Scenario, StageCost, State, Trajectory};

use crate::output::{analytic_header, analytic_rows, csv_bytes, fmt_f64, json_bytes, trajectory_header, trajectory_rows, Bundle};
use crate::scenario_file::ScenarioFile;
use crate::{exit, internal, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    CheckFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Ok => exit::OK,
            Self::NotConverged => exit::NOT_CONVERGED,
            Self::CheckFailed => exit::INVARIANT,
        }
    }
}

/// Files to write, the exit status, and a human-readable summary.
#[derive(Debug)]
pub struct Outcome {
    pub bundle: Bundle,
    pub status: Status,
    pub summary: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<&'a ScenarioFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transcription: Option<TranscriptionConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverOptions>,
    arguments: serde_json::Value,
    files: Vec<String>,
}

fn finish(mut bundle: Bundle, command: &'static str, file: Option<&ScenarioFile>, arguments: serde_json::Value) -> Bundle {
    let manifest = Manifest {
        tool: "turnpike",
        version: env!("CARGO_PKG_VERSION"),
        command,
        scenario: file,
        transcription: file.map(|f| f.transcription()),
        solver: file.and_then(|f| f.solver_options().ok()),
        arguments,
        files: bundle.names().map(String::from).collect(),
    };
    bundle.add("manifest.json", json_bytes(&manifest));
    bundle
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveMetrics {
    pub objective: f64,
    pub initial_objective: f64,
    pub kkt_residual: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub converged: bool,
    pub method: SolveMethod,
    pub iterations: IterationCounts,
    pub max_abs_v: f64,
    pub max_abs_u: f64,
}

fn max_abs(rows: impl Iterator<Item = f64>) -> f64 {
    rows.fold(0.0, |m, x| m.max(x.abs()))
}

/// Transcribes, solves and extracts one scenario.
pub fn solve_one(scenario: &Scenario, cfg: TranscriptionConfig, opts: &SolverOptions) -> Result<(Trajectory, SolveMetrics), CliError> {
    let problem = transcribe(scenario, cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = solve(&problem, &initial_guess(scenario, cfg), opts).map_err(internal)?;
    let traj = extract_solution(&report.z_star, &report.multipliers, scenario, cfg).map_err(internal)?;
    let metrics = SolveMetrics {
        objective: report.objective,
        initial_objective: report.initial_objective,
        kkt_residual: report.kkt_residual,
        stationarity: report.stationarity,
        feasibility: report.feasibility,
        converged: report.converged,
        method: report.method,
        iterations: report.iterations,
        max_abs_v: max_abs(traj.states().iter().flat_map(|s| s.v.clone())),
        max_abs_u: max_abs(traj.controls().iter().flatten().copied()),
    };
    Ok((traj, metrics))
}

pub fn cmd_solve(file: &ScenarioFile) -> Result<Outcome, CliError> {
    let scenario = file.scenario()?;
    let (traj, metrics) = solve_one(&scenario, file.transcription(), &file.solver_options()?)?;
    let mut bundle = Bundle::default();
    bundle.add(
        "trajectory.csv",
        csv_bytes(&trajectory_header(scenario.nq(), scenario.nu()), &trajectory_rows(&traj)),
    );
    bundle.add("metrics.json", json_bytes(&metrics));
    let summary = format!(
        "{} T={} N={}: objective {} kkt {:e} feasibility {:e} ({})\n",
        scenario.model.id(),
        fmt_f64(scenario.horizon),
        file.nodes,
        fmt_f64(metrics.objective),
        metrics.kkt_residual,
        metrics.feasibility,
        if metrics.converged { "converged" } else { "NOT converged" }
    );
    Ok(Outcome {
        bundle: finish(bundle, "solve", Some(file), serde_json::Value::Null),
        status: if metrics.converged { Status::Ok } else { Status::NotConverged },
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticArgs {
    pub q0: f64,
    pub v0: f64,
    #[serde(rename = "qT")]
    pub qt: f64,
    #[serde(rename = "vT")]
    pub vt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticMetrics {
    pub lambda1_0: f64,
    pub lambda2_0: f64,
    pub q_tilde: f64,
    pub max_abs_v: f64,
    pub max_abs_u: f64,
    /// `T·max|v|/|q̃|`, absent when `q̃ = 0`.
    pub velocity_ratio: Option<f64>,
    pub control_ratio: Option<f64>,
    pub velocity_bound: f64,
    pub control_envelope: f64,
}

pub fn analytic_points(args: &AnalyticArgs) -> Result<(AnalyticMetrics, Vec<OptimalPoint>), CliError> {
    let init = solve_costates(args.q0, args.v0, args.qt, args.vt, args.horizon).map_err(|e| match e {
        Error::Overflow { .. } | Error::Contract(_) => CliError::Usage(e.to_string()),
        e => internal(e),
    })?;
    let points = sample_optimal(&init, args.samples).map_err(|e| CliError::Usage(e.to_string()))?;
    let max_abs_v = max_abs(points.iter().map(|p| p.v));
    let max_abs_u = max_abs(points.iter().map(|p| p.u));
    let ratio = |m: f64| (init.q_tilde != 0.0).then(|| args.horizon * m / init.q_tilde.abs());
    let metrics = AnalyticMetrics {
        lambda1_0: init.lambda1_0,
        lambda2_0: init.lambda2_0,
        q_tilde: init.q_tilde,
        max_abs_v,
        max_abs_u,
        velocity_ratio: ratio(max_abs_v),
        control_ratio: ratio(max_abs_u),
        velocity_bound: 1.5,
        control_envelope: control_envelope(args.horizon),
    };
    Ok((metrics, points))
}

pub fn cmd_analytic(args: &AnalyticArgs) -> Result<Outcome, CliError> {
    let (metrics, points) = analytic_points(args)?;
    let mut bundle = Bundle::default();
    bundle.add("trajectory.csv", csv_bytes(&analytic_header(), &analytic_rows(&points)));
    bundle.add("metrics.json", json_bytes(&metrics));
    let summary = format!(
        "lambda1(0)={} lambda2(0)={} max|v|={} max|u|={}\n",
        fmt_f64(metrics.lambda1_0),
        fmt_f64(metrics.lambda2_0),
        fmt_f64(metrics.max_abs_v),
        fmt_f64(metrics.max_abs_u)
    );
    let arguments = serde_json::to_value(args).expect("plain data");
    Ok(Outcome {
        bundle: finish(bundle, "analytic", None, arguments),
        status: Status::Ok,
        summary,
    })
}

/// True when the closed form applies: scalar double integrator, cost
/// `½(v² + u²)`, no bounds.
fn has_closed_form(s: &Scenario) -> bool {
    matches!(s.model, ModelKind::DoubleIntegrator(_))
        && s.nq() == 1
        && s.cost == StageCost::half_squared(1, 1)
        && s.control_bounds.is_none()
        && s.state_bounds.is_none()
}

fn analytic_trajectory(s: &Scenario, intervals: usize) -> Result<Trajectory, CliError> {
    let init = solve_costates(s.x0.q[0], s.x0.v[0], s.xt.q[0], s.xt.v[0], s.horizon).map_err(|e| CliError::Usage(e.to_string()))?;
    let pts = sample_optimal(&init, intervals).map_err(internal)?;
    let states = pts
        .iter()
        .map(|p| State::new(vec![p.q], vec![p.v]))
        .collect::<turnpike_core::Result<Vec<_>>>()
        .map_err(internal)?;
    Trajectory::new(
        pts.iter().map(|p| p.t).collect(),
        states,
        pts.iter().map(|p| vec![p.u]).collect(),
        Some(pts.iter().map(|p| vec![p.lambda1, p.lambda2]).collect()),
    )
    .map_err(internal)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMember {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
    /// `analytic` or the solver path taken.
    pub method: String,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveMetrics>,
    /// Max of `‖v − v̄‖` over the middle third of the horizon.
    pub plateau_velocity: Option<f64>,
    /// Max of the full deviation `‖(v, u) − (v̄, ū)‖` over the middle third.
    pub middle_third_deviation: Option<f64>,
    pub tau0: Option<f64>,
    pub tau_t: Option<f64>,
    pub window_max: Option<f64>,
    /// `(ε, μ[Θ_T(ε)])` on the ε-grid.
    pub theta: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub reference: TurnpikeReference,
    pub delta_rule: DeltaRule,
    pub c_estimate: Option<f64>,
    pub growth: Option<bool>,
    pub eps_grid: Vec<f64>,
    pub nu_envelope: Option<NuEnvelope>,
    pub nu_bound_holds: Option<bool>,
    pub members: Vec<SweepMember>,
}

/// Intervals for horizon `t`, keeping the scenario file's step size.
pub fn sweep_nodes(file: &ScenarioFile, horizon: f64) -> usize {
    ((file.nodes as f64 * horizon / file.horizon).round() as usize).max(2)
}

fn middle_third<'a>(traj: &'a Trajectory) -> impl Iterator<Item = usize> + 'a {
    let horizon = traj.times()[traj.len() - 1];
    traj.times()
        .iter()
        .enumerate()
        .filter(move |(_, t)| **t >= horizon / 3.0 && **t <= 2.0 * horizon / 3.0)
        .map(|(k, _)| k)
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("TURNPIKE_THREADS must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Internal(e.to_string()))
}

/// Reads `TURNPIKE_THREADS`.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("TURNPIKE_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("TURNPIKE_THREADS={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// The reference `(v̄, ū)`: the velocity steady state at the cost's centre.
pub fn sweep_reference(scenario: &Scenario) -> Result<TurnpikeReference, CliError> {
    let steady = find_velocity_steady_state(&scenario.model, &scenario.cost.v_ref)
        .map_err(|e| CliError::Usage(format!("cost.v_ref is not a velocity steady state: {e}")))?;
    TurnpikeReference::new(&scenario.model, steady.v_bar, steady.u_bar).map_err(|e| CliError::Usage(e.to_string()))
}

/// Solves every horizon and analyses the sweep; the bundle holds the per-horizon CSVs.
pub fn sweep(file: &ScenarioFile, horizons: &[f64], threads: Option<usize>) -> Result<(SweepReport, Bundle), CliError> {
    if horizons.is_empty() || horizons.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(CliError::Usage("--T-list needs positive, finite horizons".into()));
    }
    let base = file.scenario()?;
    let opts = file.solver_options()?;
    let reference = sweep_reference(&base)?;
    let mut horizons = horizons.to_vec();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();

    type Solved = (f64, usize, Result<(Trajectory, Option<SolveMetrics>), CliError>);
    let run = |&horizon: &f64| -> Solved {
        let nodes = sweep_nodes(file, horizon);
        let mut s = base.clone();
        s.horizon = horizon;
        let result = if has_closed_form(&s) {
            analytic_trajectory(&s, nodes).map(|t| (t, None))
        } else {
            let cfg = TranscriptionConfig {
                intervals: nodes,
                scheme: file.scheme,
            };
            solve_one(&s, cfg, &opts).map(|(t, m)| (t, Some(m)))
        };
        (horizon, nodes, result)
    };
    let solved: Vec<Solved> = thread_pool(threads)?.install(|| horizons.par_iter().map(run).collect());

    let mut bundle = Bundle::default();
    let mut members = Vec::new();
    let mut good = Vec::new();
    for (horizon, nodes, result) in solved {
        let mut m = SweepMember {
            horizon,
            nodes,
            method: "analytic".into(),
            converged: false,
            solve: None,
            plateau_velocity: None,
            middle_third_deviation: None,
            tau0: None,
            tau_t: None,
            window_max: None,
            theta: Vec::new(),
            error: None,
        };
        match result {
            Err(e @ CliError::Usage(_)) => return Err(e),
            Err(e) => m.error = Some(e.to_string()),
            Ok((traj, metrics)) => {
                if let Some(metrics) = &metrics {
                    m.method = serde_json::to_value(metrics.method)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_default();
                    m.converged = metrics.converged;
                } else {
                    m.converged = true;
                }
                m.solve = metrics;
                m.plateau_velocity = Some(
                    middle_third(&traj)
                        .map(|k| {
                            let v = &traj.states()[k].v;
                            v.iter().zip(&reference.v_bar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                        })
                        .fold(0.0, f64::max),
                );
                bundle.add(
                    format!("trajectory_T{horizon}.csv"),
                    csv_bytes(&trajectory_header(base.nq(), base.nu()), &trajectory_rows(&traj)),
                );
                if m.converged {
                    good.push(traj);
                }
            }
        }
        members.push(m);
    }

    let mut report = SweepReport {
        reference: reference.clone(),
        delta_rule: DeltaRule::Adaptive,
        c_estimate: None,
        growth: None,
        eps_grid: Vec::new(),
        nu_envelope: None,
        nu_bound_holds: None,
        members,
    };
    if !good.is_empty() {
        // the adaptive threshold may never be reached on short horizons
        let analysis = match analyze_sweep(&good, &reference, DeltaRule::Adaptive, None) {
            Err(Error::Diagnostic(_)) => {
                report.delta_rule = DeltaRule::WholeInterval;
                analyze_sweep(&good, &reference, DeltaRule::WholeInterval, None)
            }
            other => other,
        }
        .map_err(internal)?;
        for member in &analysis.members {
            let row = report
                .members
                .iter_mut()
                .find(|m| m.horizon == member.horizon)
                .expect("analysed members come from the sweep");
            let t = member.horizon;
            row.middle_third_deviation = Some(member.profile.max_on(t / 3.0, 2.0 * t / 3.0));
            row.tau0 = member.tau0;
            row.tau_t = member.tau_t;
            row.window_max = member.window_max;
            row.theta = member.theta.clone();
            let rows: Vec<Vec<f64>> = member.profile.times.iter().zip(&member.profile.values).map(|(a, b)| vec![*a, *b]).collect();
            bundle.add(format!("deviation_T{t}.csv"), csv_bytes(&["t".into(), "d".into()], &rows));
        }
        let nu_rows: Vec<Vec<f64>> = analysis
            .nu_envelope
            .rows
            .iter()
            .map(|r| vec![r.eps, r.nu_hat, r.bound, f64::from(u8::from(r.bound_holds)), r.late_violations as f64])
            .collect();
        let header = ["eps", "nu_hat", "bound", "bound_holds", "late_violations"].map(String::from);
        bundle.add("nu_table.csv", csv_bytes(&header, &nu_rows));
        report.c_estimate = Some(analysis.c_estimate);
        report.growth = Some(analysis.growth);
        report.eps_grid = analysis.eps_grid;
        report.nu_bound_holds = Some(analysis.nu_envelope.holds());
        report.nu_envelope = Some(analysis.nu_envelope);
    }
    bundle.add("report.json", json_bytes(&report));
    Ok((report, bundle))
}

pub fn cmd_sweep(file: &ScenarioFile, horizons: &[f64], threads: Option<usize>) -> Result<Outcome, CliError> {
    let (report, bundle) = sweep(file, horizons, threads)?;
    let mut summary = String::new();
    for m in &report.members {
        let _ = writeln!(
            summary,
            "T={} N={} {} plateau={} {}",
            m.horizon,
            m.nodes,
            m.method,
            m.plateau_velocity.map_or("-".into(), fmt_f64),
            if m.converged { "ok" } else { "FAILED" }
        );
    }
    if let Some(c) = report.c_estimate {
        let _ = writeln!(summary, "C_estimate={} ({:?})", fmt_f64(c), report.delta_rule);
    }
    let status = if report.members.iter().all(|m| m.converged) {
        Status::Ok
    } else {
        Status::NotConverged
    };
    let horizons: Vec<f64> = report.members.iter().map(|m| m.horizon).collect();
    let arguments = serde_json::json!({ "T_list": horizons });
    Ok(Outcome {
        bundle: finish(bundle, "sweep", Some(file), arguments),
        status,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

pub const GRADIENT_TOL: f64 = 1e-6;
const GRADIENT_STEP: f64 = 1e-6;
pub const EQUIVARIANCE_TOL: f64 = 1e-8;
pub const EQUIVARIANCE_STEPS: usize = 400;

/// Worst finite-difference mismatch at `points` random perturbations of `base`.
pub fn gradient_row<P: NlpProblem + ?Sized>(name: &str, problem: &P, base: &[f64], points: usize, seed: u64) -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let worst = (0..points)
        .map(|_| {
            let z: Vec<f64> = base.iter().map(|b| b + rng.gen_range(-1.0..=1.0)).collect();
            gradient_check(problem, &z, GRADIENT_STEP).max_error()
        })
        .fold(0.0, f64::max);
    CheckRow::new(name, worst, GRADIENT_TOL)
}

/// Symmetry actions of a model, with a flag for "shift the plane only".
pub fn model_actions(model: &ModelKind) -> Vec<(&'static str, SymmetryAction, bool)> {
    match model {
        ModelKind::DoubleIntegrator(_) => vec![("translation", SymmetryAction::Translation { dim: model.nq() }, false)],
        ModelKind::Hovercraft(_) => vec![
            ("planar shift", SymmetryAction::Translation { dim: 3 }, true),
            ("SE(2)", SymmetryAction::PlanarSe2, false),
        ],
    }
}

/// Max equivariance deviation over `cases` random `(g, x₀, u)` on `[0, 5]`.
pub fn equivariance_deviation<M: Model + ?Sized>(
    model: &M,
    action: SymmetryAction,
    planar_shift_only: bool,
    cases: usize,
    seed: u64,
) -> Result<f64, CliError> {
    const HORIZON: f64 = 5.0;
    const KNOTS: usize = 11;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |n: usize, scale: f64| -> Vec<f64> { (0..n).map(|_| scale * rng.gen_range(-1.0..=1.0)).collect() };
    let (nq, nu) = (model.nq(), model.nu());
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let g = match action {
            SymmetryAction::Translation { dim } => {
                let mut s = uniform(dim, 10.0);
                if planar_shift_only {
                    s[2] = 0.0;
                }
                GroupElement::Translation(s)
            }
            SymmetryAction::PlanarSe2 => {
                let w = uniform(3, 1.0);
                GroupElement::Se2 {
                    dx: 10.0 * w[0],
                    dy: 10.0 * w[1],
                    dtheta: std::f64::consts::PI * w[2],
                }
            }
        };
        let x0 = State::new(uniform(nq, 3.0), uniform(nq, 1.0)).map_err(internal)?;
        let times = (0..KNOTS).map(|i| HORIZON * i as f64 / (KNOTS - 1) as f64).collect();
        let values = (0..KNOTS).map(|_| uniform(nu, 1.0)).collect();
        let u = ControlSignal::new(times, values).map_err(internal)?;
        let d = check_equivariance(model, &action, &g, &x0, &u, HORIZON, EQUIVARIANCE_STEPS).map_err(internal)?;
        worst = worst.max(d);
    }
    Ok(worst)
}

pub fn check_rows(file: &ScenarioFile, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let scenario = file.scenario()?;
    let cfg = file.transcription();
    let problem = transcribe(&scenario, cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rows = vec![gradient_row("gradient check (20 points)", &problem, &initial_guess(&scenario, cfg), 20, seed)];
    for (i, (name, action, shift_only)) in model_actions(&scenario.model).into_iter().enumerate() {
        let d = equivariance_deviation(&scenario.model, action, shift_only, 20, seed.wrapping_add(1 + i as u64))?;
        rows.push(CheckRow::new(format!("equivariance: {name} (20 cases)"), d, EQUIVARIANCE_TOL));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(100));
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let v: Vec<f64> = (0..scenario.nq()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let steady = find_velocity_steady_state(&scenario.model, &v).map_err(internal)?;
        worst = worst.max(steady.residual(&scenario.model));
    }
    rows.push(CheckRow::new("velocity steady-state residual (10 samples)", worst, 1e-10));
    Ok(rows)
}

pub fn format_rows(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>10.3e}  <= {:<8.1e}  {}",
            r.name,
            r.value,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    s
}

pub fn cmd_check(file: &ScenarioFile, seed: u64) -> Result<Outcome, CliError> {
    let rows = check_rows(file, seed)?;
    let mut bundle = Bundle::default();
    bundle.add("check.json", json_bytes(&rows));
    let status = if rows.iter().all(|r| r.pass) { Status::Ok } else { Status::CheckFailed };
    Ok(Outcome {
        bundle: finish(bundle, "check", Some(file), serde_json::json!({ "seed": seed })),
        status,
        summary: format_rows(&rows),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrimRow {
    pub v_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub residual: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrimsReport {
    pub model: &'static str,
    pub steady_states: Vec<TrimRow>,
    pub optimal: OptimalSteadyState,
    pub search_box: BoxBounds,
}

/// Steady states on the grid `v̄ ∈ {−1, 0, 1}^{n_q}` and the optimal one in
/// the box `v_ref ± 2`.
pub fn trims(scenario: &Scenario) -> Result<TrimsReport, CliError> {
    let (model, cost) = (&scenario.model, &scenario.cost);
    let n = model.nq();
    let mut steady_states = Vec::new();
    for idx in 0..3usize.pow(n as u32) {
        let v: Vec<f64> = (0..n).map(|i| (idx / 3usize.pow(i as u32) % 3) as f64 - 1.0).collect();
        let VelocitySteadyState { v_bar, u_bar } = find_velocity_steady_state(model, &v).map_err(internal)?;
        let steady = VelocitySteadyState { v_bar, u_bar };
        steady_states.push(TrimRow {
            residual: steady.residual(model),
            cost: cost.eval(&steady.v_bar, &steady.u_bar),
            v_bar: steady.v_bar,
            u_bar: steady.u_bar,
        });
    }
    let search_box = BoxBounds::new(
        cost.v_ref.iter().map(|v| v - 2.0).collect(),
        cost.v_ref.iter().map(|v| v + 2.0).collect(),
    )
    .map_err(internal)?;
    let optimal = optimal_velocity_steady_state(model, cost, &search_box).map_err(internal)?;
    Ok(TrimsReport {
        model: model.id(),
        steady_states,
        optimal,
        search_box,
    })
}

pub fn cmd_trims(file: &ScenarioFile) -> Result<Outcome, CliError> {
    let report = trims(&file.scenario()?)?;
    let mut summary = String::new();
    let list = |x: &[f64]| x.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(", ");
    for r in &report.steady_states {
        let _ = writeln!(summary, "v=({}) u=({}) residual={:.1e} cost={}", list(&r.v_bar), list(&r.u_bar), r.residual, fmt_f64(r.cost));
    }
    let o = &report.optimal;
    let _ = writeln!(
        summary,
        "optimal: v=({}) u=({}) cost={} ties={}",
        list(&o.steady.v_bar),
        list(&o.steady.u_bar),
        fmt_f64(o.cost),
        o.ties
    );
    let mut bundle = Bundle::default();
    bundle.add("trims.json", json_bytes(&report));
    Ok(Outcome {
        bundle: finish(bundle, "trims", Some(file), serde_json::Value::Null),
        status: Status::Ok,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn di(horizon: f64, nodes: usize) -> ScenarioFile {
        ScenarioFile::parse_toml(&format!(
            "model = \"double_integrator\"\nT = {horizon:?}\nN = {nodes}\nq0 = [0.0]\nv0 = [0.0]\nqT = [5.0]\nvT = [0.0]\n[cost]\nw_v = [1.0]\nw_u = [1.0]\n"
        ))
        .unwrap()
    }

    #[test]
    fn solve_bundle_has_the_fixed_layout() {
        let out = cmd_solve(&di(20.0, 100)).unwrap();
        assert_eq!(out.status, Status::Ok);
        assert_eq!(out.bundle.names().collect::<Vec<_>>(), ["trajectory.csv", "metrics.json", "manifest.json"]);
        let csv = std::str::from_utf8(out.bundle.get("trajectory.csv").unwrap()).unwrap();
        assert!(csv.starts_with("t,q_1,v_1,u_1\n0.0,0.0,0.0,"));
        assert_eq!(csv.lines().count(), 102);
        let metrics: serde_json::Value = serde_json::from_slice(out.bundle.get("metrics.json").unwrap()).unwrap();
        assert_eq!(metrics["converged"], true);
        assert_eq!(metrics["method"], "kkt_direct");
    }

    #[test]
    fn analytic_trim_case() {
        let args = AnalyticArgs {
            q0: 0.0,
            v0: 0.25,
            qt: 5.0,
            vt: 0.25,
            horizon: 20.0,
            samples: 200,
        };
        let (m, pts) = analytic_points(&args).unwrap();
        assert!(pts.iter().all(|p| (p.v - 0.25).abs() <= 1e-12 && p.u.abs() <= 1e-12));
        assert!((m.velocity_ratio.unwrap() - 1.0).abs() <= 1e-12);
        let over = AnalyticArgs { horizon: 900.0, ..args };
        assert!(matches!(analytic_points(&over), Err(CliError::Usage(_))));
    }

    #[test]
    fn sweep_uses_the_closed_form_for_the_double_integrator() {
        let out = cmd_sweep(&di(20.0, 200), &[10.0, 5.0], Some(2)).unwrap();
        assert_eq!(out.status, Status::Ok);
        let report: serde_json::Value = serde_json::from_slice(out.bundle.get("report.json").unwrap()).unwrap();
        let members = report["members"].as_array().unwrap();
        assert_eq!(members[0]["T"], 5.0);
        assert_eq!(members[1]["N"], 100);
        assert!(members.iter().all(|m| m["method"] == "analytic"));
        assert!(out.bundle.get("trajectory_T5.csv").is_some() && out.bundle.get("nu_table.csv").is_some());
        assert!(cmd_sweep(&di(20.0, 200), &[], None).is_err());
    }

    #[test]
    fn check_passes_for_the_double_integrator() {
        let out = cmd_check(&di(4.0, 20), 0).unwrap();
        assert_eq!(out.status, Status::Ok, "{}", out.summary);
        assert!(out.summary.lines().count() == 3 && !out.summary.contains("FAIL"));
    }

    #[test]
    fn trims_report_the_zero_optimum() {
        let report = trims(&di(20.0, 10).scenario().unwrap()).unwrap();
        assert_eq!(report.steady_states.len(), 3);
        assert!(report.steady_states.iter().all(|r| r.u_bar == [0.0] && r.residual == 0.0));
        assert_eq!(report.optimal.steady.v_bar, [0.0]);
    }

    #[test]
    fn thread_env_is_validated() {
        assert!(thread_pool(Some(0)).is_err());
        assert_eq!(thread_pool(Some(3)).unwrap().current_num_threads(), 3);
    }
}
