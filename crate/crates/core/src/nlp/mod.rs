//! Equality-constrained NLP solver.
//!
//! Linear-quadratic problems are solved by a Newton step on the KKT system
//! (exact up to round-off, repeated once if the residual is still above
//! tolerance). Everything else goes through an augmented Lagrangian loop whose
//! subproblems are minimized by projected L-BFGS. Once the KKT residual drops
//! below a handover level, SQP with a finite-difference Lagrangian Hessian and
//! a filter line search finishes the solve. Failed attempts are retried from
//! seeded perturbations of the starting point.

mod banded;
mod lbfgs;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::transcription::{NlpProblem, SparseMatrix};

use banded::BandedMatrix;
use lbfgs::{LbfgsSettings, projected_grad_norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Tolerance on both stationarity and feasibility.
    pub tol_kkt: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub lbfgs_memory: usize,
    /// SQP iterations allowed after the augmented Lagrangian loop.
    pub max_sqp: usize,
    /// Perturbed restarts tried when the first attempt does not converge.
    pub restarts: usize,
    /// Seeds the restart perturbations.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-8,
            max_outer: 30,
            max_inner: 500,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            lbfgs_memory: 20,
            max_sqp: 200,
            restarts: 3,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tol_kkt, self.penalty_init, self.penalty_growth];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) || self.tol_kkt >= 1.0 {
            return Err(contract("solver tolerances and penalties must be positive, tol < 1"));
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.lbfgs_memory == 0 || self.penalty_growth <= 1.0 {
            return Err(contract("iteration limits must be positive and penalty growth > 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    KktDirect,
    AugmentedLagrangian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IterationCounts {
    pub outer: usize,
    pub inner: usize,
    pub sqp: usize,
    pub restarts: usize,
}

/// Per-outer-iteration record of the augmented Lagrangian loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub feasibility: f64,
    pub stationarity: f64,
    /// Penalty used for this subproblem.
    pub penalty: f64,
    /// Penalty for the next subproblem.
    pub next_penalty: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub z_star: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub kkt_residual: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub iterations: IterationCounts,
    pub method: SolveMethod,
    pub history: Vec<OuterRecord>,
    pub converged: bool,
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn finite(what: &str, x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Callback(what.to_string()))
    }
}

fn lagrangian_gradient<P: NlpProblem + ?Sized>(problem: &P, z: &[f64], mu: &[f64]) -> Vec<f64> {
    let mut g = problem.objective_gradient(z);
    let jt = problem.constraint_jacobian(z).tr_mul_vec(mu);
    g.iter_mut().zip(jt).for_each(|(a, b)| *a += b);
    g
}

/// `(‖∇f + Jᵀμ‖∞, ‖c‖∞)`, with stationarity projected at active bounds.
fn kkt_parts<P: NlpProblem + ?Sized>(problem: &P, z: &[f64], mu: &[f64]) -> (f64, f64) {
    let g = lagrangian_gradient(problem, z, mu);
    let bounds = problem.bounds();
    (projected_grad_norm(z, &g, bounds.as_ref()), inf_norm(&problem.constraints(z)))
}

/// Combined KKT measure `max(‖∇f + Jᵀμ‖∞, ‖c‖∞)`.
pub fn kkt_residual<P: NlpProblem + ?Sized>(problem: &P, z: &[f64], multipliers: &[f64]) -> Result<f64> {
    if z.len() != problem.dim() || multipliers.len() != problem.num_constraints() {
        return Err(contract(format!(
            "expected {} variables and {} multipliers, got {} and {}",
            problem.dim(),
            problem.num_constraints(),
            z.len(),
            multipliers.len()
        )));
    }
    let (s, f) = kkt_parts(problem, z, multipliers);
    Ok(s.max(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub objective_error: f64,
    pub jacobian_error: f64,
}

impl GradientCheck {
    pub fn max_error(&self) -> f64 {
        self.objective_error.max(self.jacobian_error)
    }
}

/// Central-difference comparison of the analytic objective gradient and
/// constraint Jacobian, as max error relative to `max(1, |fd|)`.
pub fn gradient_check<P: NlpProblem + ?Sized>(problem: &P, z: &[f64], step: f64) -> GradientCheck {
    let n = problem.dim();
    let g = problem.objective_gradient(z);
    let jac = problem.constraint_jacobian(z).to_dense();
    let mut objective_error: f64 = 0.0;
    let mut jacobian_error: f64 = 0.0;
    let mut zp = z.to_vec();
    for j in 0..n {
        let h = step * z[j].abs().max(1.0);
        zp[j] = z[j] + h;
        let (fp, cp) = (problem.objective(&zp), problem.constraints(&zp));
        zp[j] = z[j] - h;
        let (fm, cm) = (problem.objective(&zp), problem.constraints(&zp));
        zp[j] = z[j];
        let fd = (fp - fm) / (2.0 * h);
        objective_error = objective_error.max((g[j] - fd).abs() / fd.abs().max(1.0));
        for i in 0..cp.len() {
            let fd = (cp[i] - cm[i]) / (2.0 * h);
            jacobian_error = jacobian_error.max((jac[(i, j)] - fd).abs() / fd.abs().max(1.0));
        }
    }
    GradientCheck {
        objective_error,
        jacobian_error,
    }
}

/// Lagrangian Hessian by central differences of `∇f + Jᵀμ`. When the
/// problem supplies integer node keys and couples only neighbouring nodes,
/// columns three nodes apart are probed together.
fn lagrangian_hessian<P: NlpProblem + ?Sized>(problem: &P, z: &[f64], mu: &[f64], eps: f64) -> SparseMatrix {
    let n = problem.dim();
    let mut hess = SparseMatrix::new(n, n);
    let keys = problem
        .ordering_keys()
        .map(|(v, _)| v)
        .filter(|v| v.iter().all(|k| k.fract() == 0.0 && *k >= 0.0));

    // groups of columns probed together, and for each column its (node, slot)
    let (groups, node_slot): (Vec<Vec<usize>>, Option<Vec<(usize, usize)>>) = match &keys {
        Some(keys) => {
            let mut per_node: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for (j, k) in keys.iter().enumerate() {
                per_node.entry(*k as usize).or_default().push(j);
            }
            let mut slot = vec![(0, 0); n];
            let mut groups: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
            for (node, cols) in &per_node {
                for (l, &j) in cols.iter().enumerate() {
                    slot[j] = (*node, l);
                    groups.entry((node % 3, l)).or_default().push(j);
                }
            }
            (groups.into_values().collect(), Some(slot))
        }
        None => ((0..n).map(|j| vec![j]).collect(), None),
    };
    let lookup: Option<std::collections::HashMap<(usize, usize), usize>> =
        node_slot.as_ref().map(|s| s.iter().enumerate().map(|(j, &ns)| (ns, j)).collect());

    let mut dense_cols = DMatrix::<f64>::zeros(0, 0);
    if node_slot.is_none() {
        dense_cols = DMatrix::zeros(n, n);
    }
    for group in &groups {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        let steps: Vec<f64> = group.iter().map(|&j| eps * z[j].abs().max(1.0)).collect();
        for (&j, h) in group.iter().zip(&steps) {
            zp[j] += h;
            zm[j] -= h;
        }
        let gp = lagrangian_gradient(problem, &zp, mu);
        let gm = lagrangian_gradient(problem, &zm, mu);
        match (&node_slot, &lookup) {
            (Some(slot), Some(lookup)) => {
                let (node0, l) = slot[group[0]];
                let r = node0 % 3;
                for i in 0..n {
                    let d = gp[i] - gm[i];
                    if d == 0.0 {
                        continue;
                    }
                    let ki = slot[i].0;
                    // the unique node ≡ r (mod 3) within one of node ki
                    let k = (ki.saturating_sub(1)..=ki + 1).find(|k| k % 3 == r);
                    if let Some(&j) = k.and_then(|k| lookup.get(&(k, l))) {
                        let h = eps * z[j].abs().max(1.0);
                        hess.push(i, j, d / (2.0 * h));
                    }
                }
            }
            _ => {
                let j = group[0];
                for i in 0..n {
                    dense_cols[(i, j)] = (gp[i] - gm[i]) / (2.0 * steps[0]);
                }
            }
        }
    }
    if node_slot.is_none() {
        for j in 0..n {
            for i in 0..n {
                let v = dense_cols[(i, j)];
                if v != 0.0 {
                    hess.push(i, j, v);
                }
            }
        }
    }
    // symmetrize
    let mut sym = SparseMatrix::new(n, n);
    for &(i, j, v) in &hess.entries {
        sym.push(i, j, 0.5 * v);
        sym.push(j, i, 0.5 * v);
    }
    sym
}

/// Factorization of `[H + δₕI, Jᵀ; J, −δ꜀I]` in the problem's node ordering.
struct KktFactor {
    n: usize,
    m: usize,
    pos: Vec<usize>,
    fixed: Vec<bool>,
    lu: banded::BandedLu,
}

impl KktFactor {
    fn new<P: NlpProblem + ?Sized>(
        problem: &P,
        hess: &SparseMatrix,
        jac: &SparseMatrix,
        delta_h: f64,
        delta_c: f64,
        fixed: &[bool],
    ) -> Result<Self> {
        let (n, m) = (problem.dim(), problem.num_constraints());
        let size = n + m;
        let mut order: Vec<usize> = (0..size).collect();
        if let Some((vk, ck)) = problem.ordering_keys() {
            let key = |i: usize| if i < n { vk[i] } else { ck[i - n] };
            order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        }
        let mut pos = vec![0; size];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        let mut entries = Vec::with_capacity(hess.entries.len() + 2 * jac.entries.len() + size);
        // variables held at an active bound get an identity row and column
        for &(i, j, v) in &hess.entries {
            if !fixed[i] && !fixed[j] {
                entries.push((pos[i], pos[j], v));
            }
        }
        for &(i, j, v) in &jac.entries {
            if !fixed[j] {
                entries.push((pos[n + i], pos[j], v));
                entries.push((pos[j], pos[n + i], v));
            }
        }
        for i in 0..n {
            entries.push((pos[i], pos[i], if fixed[i] { 1.0 } else { delta_h }));
        }
        for i in 0..m {
            entries.push((pos[n + i], pos[n + i], -delta_c));
        }
        let lu = BandedMatrix::from_entries(size, &entries).factorize()?;
        Ok(Self {
            n,
            m,
            pos,
            fixed: fixed.to_vec(),
            lu,
        })
    }

    fn solve(&self, rx: &[f64], rc: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rhs = vec![0.0; self.n + self.m];
        for i in 0..self.n {
            rhs[self.pos[i]] = if self.fixed[i] { 0.0 } else { rx[i] };
        }
        for i in 0..self.m {
            rhs[self.pos[self.n + i]] = rc[i];
        }
        let sol = self.lu.solve(&rhs);
        let d = (0..self.n).map(|i| sol[self.pos[i]]).collect();
        let y = (0..self.m).map(|i| sol[self.pos[self.n + i]]).collect();
        (d, y)
    }
}

fn project(z: &mut [f64], bounds: Option<&(Vec<f64>, Vec<f64>)>) {
    if let Some((lo, hi)) = bounds {
        for ((x, l), h) in z.iter_mut().zip(lo).zip(hi) {
            *x = x.clamp(*l, *h);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Variables at a bound whose Lagrangian gradient pushes outward.
fn active_bounds<P: NlpProblem + ?Sized>(
    problem: &P,
    z: &[f64],
    mu: &[f64],
    bounds: Option<&(Vec<f64>, Vec<f64>)>,
) -> Vec<bool> {
    match bounds {
        None => vec![false; z.len()],
        Some((lo, hi)) => {
            let g = lagrangian_gradient(problem, z, mu);
            (0..z.len())
                .map(|i| (z[i] <= lo[i] && g[i] > 0.0) || (z[i] >= hi[i] && g[i] < 0.0))
                .collect()
        }
    }
}

/// Regularized KKT step. `δₕ` grows until the step has positive curvature,
/// `δ꜀` is only used when the constraint Jacobian is rank deficient.
fn regularized_step<P: NlpProblem + ?Sized>(
    problem: &P,
    hess: &SparseMatrix,
    jac: &SparseMatrix,
    grad: &[f64],
    cons: &[f64],
    convex: bool,
    fixed: &[bool],
) -> Result<(KktFactor, Vec<f64>, Vec<f64>, f64)> {
    let neg_g: Vec<f64> = grad.iter().map(|v| -v).collect();
    let neg_c: Vec<f64> = cons.iter().map(|v| -v).collect();
    let mut delta_h = 0.0;
    let mut delta_c = 0.0;
    for _ in 0..40 {
        match KktFactor::new(problem, hess, jac, delta_h, delta_c, fixed) {
            Ok(f) => {
                let (d, y) = f.solve(&neg_g, &neg_c);
                let mut hd = hess.mul_vec(&d);
                hd.iter_mut().zip(fixed).filter(|(_, f)| **f).for_each(|(x, _)| *x = 0.0);
                let dd = dot(&d, &d);
                let curvature = dot(&d, &hd) + delta_h * dd;
                if convex || curvature >= 1e-10 * dd || delta_h >= 1e10 {
                    return Ok((f, d, y, delta_h));
                }
            }
            Err(_) => {
                if delta_c == 0.0 {
                    delta_c = 1e-10;
                    continue;
                }
            }
        }
        delta_h = if delta_h == 0.0 { 1e-6 } else { delta_h * 8.0 };
    }
    Err(contract("could not regularize the KKT matrix"))
}

/// SQP iterations without halving the best KKT residual before giving up.
const SQP_STALL: usize = 30;

/// Sequential quadratic programming with a filter line search on
/// (constraint violation, objective) and second-order corrections. Returns
/// the number of accepted steps.
fn sqp<P: NlpProblem + ?Sized>(
    problem: &P,
    z: &mut Vec<f64>,
    mu: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
    quadratic: bool,
) -> Result<usize> {
    const GAMMA_THETA: f64 = 1e-5;
    const GAMMA_PHI: f64 = 1e-5;
    const ETA: f64 = 1e-4;
    const S_THETA: f64 = 1.1;
    const S_PHI: f64 = 2.3;

    let bounds = problem.bounds();
    let theta_of = |x: &[f64]| l1(&problem.constraints(x));
    let theta0 = theta_of(z);
    let theta_max = 1e4 * theta0.max(1.0);
    let mut filter: Vec<(f64, f64)> = Vec::new();
    let mut steps = 0;
    let (mut best, mut best_at) = (f64::INFINITY, 0);
    for it in 0..max_iter {
        let (stat, feas) = kkt_parts(problem, z, mu);
        if stat.max(feas) <= tol && (steps > 0 || !quadratic) {
            break;
        }
        if stat.max(feas) < 0.5 * best {
            best = stat.max(feas);
            best_at = it;
        } else if it - best_at >= SQP_STALL {
            break;
        }
        // exact for quadratics at any step size; unit steps avoid round-off
        let eps = if quadratic { 1.0 } else { 1e-5 };
        let hess = lagrangian_hessian(problem, z, mu, eps);
        let jac = problem.constraint_jacobian(z);
        let grad = problem.objective_gradient(z);
        let cons = problem.constraints(z);
        finite("objective gradient", &grad)?;
        finite("constraints", &cons)?;
        let fixed = active_bounds(problem, z, mu, bounds.as_ref());
        let (factor, d, mu_new, _) = regularized_step(problem, &hess, &jac, &grad, &cons, quadratic, &fixed)?;
        if quadratic {
            z.iter_mut().zip(&d).for_each(|(x, d)| *x += d);
            project(z, bounds.as_ref());
            *mu = mu_new;
            steps += 1;
            continue;
        }

        let theta = l1(&cons);
        let phi = problem.objective(z);
        let slope = dot(&grad, &d);
        let trial_at = |alpha: f64, extra: Option<&[f64]>| {
            let mut t: Vec<f64> = z.iter().zip(&d).map(|(x, d)| x + alpha * d).collect();
            if let Some(s) = extra {
                t.iter_mut().zip(s).for_each(|(x, s)| *x += s);
            }
            project(&mut t, bounds.as_ref());
            t
        };
        let in_filter = |th: f64, ph: f64| {
            filter
                .iter()
                .any(|&(ft, fp)| th >= (1.0 - GAMMA_THETA) * ft && ph >= fp - GAMMA_PHI * ft)
        };
        // Some(true) for an objective-decrease step, Some(false) for a
        // violation-decrease step, None if rejected.
        let judge = |alpha: f64, x: &[f64]| -> Option<bool> {
            let ph = problem.objective(x);
            let th = theta_of(x);
            if !(ph.is_finite() && th.is_finite()) || th > theta_max || in_filter(th, ph) {
                return None;
            }
            let switching = slope < 0.0 && alpha * (-slope).powf(S_PHI) > theta.powf(S_THETA);
            if switching && theta <= 1e-4 * theta0.max(1.0) {
                return (ph <= phi + ETA * alpha * slope).then_some(true);
            }
            if th <= (1.0 - GAMMA_THETA) * theta || ph <= phi - GAMMA_PHI * theta {
                return Some(false);
            }
            None
        };

        let mut accepted: Option<(Vec<f64>, f64, bool)> = None;
        let full = trial_at(1.0, None);
        if let Some(kind) = judge(1.0, &full) {
            accepted = Some((full, 1.0, kind));
        } else {
            // second-order correction against the Maratos effect
            let c_full = problem.constraints(&full);
            if c_full.iter().all(|v| v.is_finite()) && l1(&c_full) >= theta {
                let neg: Vec<f64> = c_full.iter().map(|v| -v).collect();
                let (s, _) = factor.solve(&vec![0.0; d.len()], &neg);
                let soc = trial_at(1.0, Some(&s));
                if let Some(kind) = judge(1.0, &soc) {
                    accepted = Some((soc, 1.0, kind));
                }
            }
            let mut alpha = 0.5;
            while accepted.is_none() && alpha > 1e-12 {
                let t = trial_at(alpha, None);
                if let Some(kind) = judge(alpha, &t) {
                    accepted = Some((t, alpha, kind));
                }
                alpha *= 0.5;
            }
        }
        let Some((next, alpha, objective_step)) = accepted else {
            break;
        };
        if !objective_step {
            filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
        }
        *z = next;
        mu.iter_mut().zip(&mu_new).for_each(|(a, b)| *a += alpha * (b - *a));
        steps += 1;
    }
    Ok(steps)
}

/// Relative size of the uniform perturbation applied to `z0` on a restart.
const RESTART_SCALE: f64 = 0.1;

/// One augmented Lagrangian run followed by SQP, from `z`.
fn augmented_lagrangian<P: NlpProblem + ?Sized>(
    problem: &P,
    mut z: Vec<f64>,
    opts: &SolverOptions,
    counts: &mut IterationCounts,
) -> Result<(Vec<f64>, Vec<f64>, Vec<OuterRecord>)> {
    let bounds = problem.bounds();
    project(&mut z, bounds.as_ref());
    let mut mu = vec![0.0; problem.num_constraints()];
    let mut history = Vec::new();
    let mut rho = opts.penalty_init;
    let mut feas_prev = inf_norm(&problem.constraints(&z));
    let mut converged = false;
    for outer in 0..opts.max_outer {
        counts.outer += 1;
        let settings = LbfgsSettings {
            memory: opts.lbfgs_memory,
            max_iter: opts.max_inner,
            grad_tol: (0.1 * opts.tol_kkt).max(10f64.powi(-(outer as i32) - 2)),
            armijo: 1e-4,
        };
        let mu_k = mu.clone();
        let out = lbfgs::minimize(
            &mut z,
            |x| {
                let c = problem.constraints(x);
                let f = problem.objective(x);
                let val = f + c.iter().zip(&mu_k).map(|(c, m)| m * c + 0.5 * rho * c * c).sum::<f64>();
                let shifted: Vec<f64> = c.iter().zip(&mu_k).map(|(c, m)| m + rho * c).collect();
                let mut g = problem.objective_gradient(x);
                let jt = problem.constraint_jacobian(x).tr_mul_vec(&shifted);
                g.iter_mut().zip(jt).for_each(|(a, b)| *a += b);
                (val, g)
            },
            bounds.as_ref(),
            &settings,
        );
        counts.inner += out.iterations;
        let c = problem.constraints(&z);
        finite("constraints", &c)?;
        mu.iter_mut().zip(&c).for_each(|(m, c)| *m += rho * c);
        let feas = inf_norm(&c);
        let (stat, _) = kkt_parts(problem, &z, &mu);
        let penalty = rho;
        if feas > 0.25 * feas_prev {
            rho *= opts.penalty_growth;
        }
        feas_prev = feas;
        history.push(OuterRecord {
            feasibility: feas,
            stationarity: stat,
            penalty,
            next_penalty: rho,
            inner_iterations: out.iterations,
        });
        if stat.max(feas) <= opts.tol_kkt {
            converged = true;
            break;
        }
        // SQP takes over once the multiplier estimates are informative
        if opts.max_sqp > 0 && (stat.max(feas) <= SQP_HANDOVER || outer + 1 >= SQP_HANDOVER_OUTER) {
            break;
        }
    }
    if !converged && opts.max_sqp > 0 {
        counts.sqp += sqp(problem, &mut z, &mut mu, opts.tol_kkt, opts.max_sqp, false)?;
    }
    finite("solution", &z)?;
    Ok((z, mu, history))
}

/// KKT level and outer-iteration count at which SQP takes over.
const SQP_HANDOVER: f64 = 1e-3;
const SQP_HANDOVER_OUTER: usize = 10;

pub fn solve<P: NlpProblem + ?Sized>(problem: &P, z0: &[f64], opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let (n, m) = (problem.dim(), problem.num_constraints());
    if z0.len() != n {
        return Err(contract(format!("initial point has {} entries, problem has {n}", z0.len())));
    }
    let initial_objective = problem.objective(z0);
    if !initial_objective.is_finite() {
        return Err(Error::Callback("objective".into()));
    }
    finite("objective gradient", &problem.objective_gradient(z0))?;
    finite("constraints", &problem.constraints(z0))?;

    let mut counts = IterationCounts::default();
    let (z, mu, history, method) = if problem.is_linear_quadratic() {
        let mut z = z0.to_vec();
        let mut mu = vec![0.0; m];
        counts.sqp = sqp(problem, &mut z, &mut mu, opts.tol_kkt, 3, true)?;
        (z, mu, Vec::new(), SolveMethod::KktDirect)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<OuterRecord>)> = None;
        for attempt in 0..=opts.restarts {
            let mut start = z0.to_vec();
            if attempt > 0 {
                // breaks symmetric saddles such as an unrotated initial guess
                for x in start.iter_mut() {
                    *x += RESTART_SCALE * x.abs().max(1.0) * rng.gen_range(-1.0..=1.0);
                }
                counts.restarts += 1;
            }
            let (z, mu, history) = augmented_lagrangian(problem, start, opts, &mut counts)?;
            let kkt = {
                let (s, f) = kkt_parts(problem, &z, &mu);
                s.max(f)
            };
            if best.as_ref().map_or(true, |b| kkt < b.0) {
                best = Some((kkt, z, mu, history));
            }
            if kkt <= opts.tol_kkt {
                break;
            }
        }
        let (_, z, mu, history) = best.expect("at least one attempt");
        (z, mu, history, SolveMethod::AugmentedLagrangian)
    };

    let (stationarity, feasibility) = kkt_parts(problem, &z, &mu);
    let objective = problem.objective(&z);
    finite("solution", &z)?;
    Ok(SolveReport {
        converged: stationarity <= opts.tol_kkt && feasibility <= opts.tol_kkt,
        kkt_residual: stationarity.max(feasibility),
        z_star: z,
        multipliers: mu,
        objective,
        initial_objective,
        stationarity,
        feasibility,
        iterations: counts,
        method,
        history,
    })
}

/// Dense reference solve of the equality-constrained QP at `z0`, used to
/// cross-check the banded path.
pub fn dense_kkt_step<P: NlpProblem + ?Sized>(problem: &P, z0: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (problem.dim(), problem.num_constraints());
    let hess = lagrangian_hessian(problem, z0, &vec![0.0; m], 1.0).to_dense();
    let jac = problem.constraint_jacobian(z0).to_dense();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&hess);
    k.view_mut((n, 0), (m, n)).copy_from(&jac);
    k.view_mut((0, n), (n, m)).copy_from(&jac.transpose());
    let mut rhs = DVector::zeros(n + m);
    for (i, g) in problem.objective_gradient(z0).iter().enumerate() {
        rhs[i] = -g;
    }
    for (i, c) in problem.constraints(z0).iter().enumerate() {
        rhs[n + i] = -c;
    }
    let sol = k.lu().solve(&rhs).ok_or_else(|| contract("singular KKT matrix"))?;
    Ok((0..n).map(|i| z0[i] + sol[i]).collect())
}
