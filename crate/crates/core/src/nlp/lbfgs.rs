//! Projected limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;

pub(crate) struct LbfgsSettings {
    pub memory: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub armijo: f64,
}

pub(crate) struct LbfgsOutcome {
    pub iterations: usize,
    #[allow(dead_code)]
    pub grad_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(z: &mut [f64], bounds: Option<&(Vec<f64>, Vec<f64>)>) {
    if let Some((lo, hi)) = bounds {
        for ((x, l), h) in z.iter_mut().zip(lo).zip(hi) {
            *x = x.clamp(*l, *h);
        }
    }
}

/// Norm of the projected gradient: components pushing against an active
/// bound do not count.
pub(crate) fn projected_grad_norm(z: &[f64], g: &[f64], bounds: Option<&(Vec<f64>, Vec<f64>)>) -> f64 {
    match bounds {
        None => g.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Some((lo, hi)) => z
            .iter()
            .zip(g)
            .zip(lo.iter().zip(hi))
            .map(|((x, g), (l, h))| {
                if (*x <= *l && *g > 0.0) || (*x >= *h && *g < 0.0) {
                    0.0
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max),
    }
}

/// Minimizes `fg` (value and gradient) starting from `z`, in place.
pub(crate) fn minimize<F>(
    z: &mut Vec<f64>,
    mut fg: F,
    bounds: Option<&(Vec<f64>, Vec<f64>)>,
    settings: &LbfgsSettings,
) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    project(z, bounds);
    let (mut f, mut g) = fg(z);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory);
    let mut iterations = 0;
    let mut grad_norm = projected_grad_norm(z, &g, bounds);

    while iterations < settings.max_iter && grad_norm > settings.grad_tol {
        iterations += 1;
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|x| *x *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        if dot(&d, &g) >= 0.0 {
            history.clear();
            d = g.iter().map(|x| -x).collect();
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let mut trial: Vec<f64> = z.iter().zip(&d).map(|(x, d)| x + alpha * d).collect();
            project(&mut trial, bounds);
            let step: Vec<f64> = trial.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            let (ft, gt) = fg(&trial);
            if ft.is_finite() && ft <= f + settings.armijo * decrease {
                accepted = Some((trial, ft, gt, step));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, ft, gt, s)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        *z = trial;
        f = ft;
        g = gt;
        grad_norm = projected_grad_norm(z, &g, bounds);
    }
    LbfgsOutcome { iterations, grad_norm }
}
