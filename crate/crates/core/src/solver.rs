//! Small dense convex minimizers on the zero-sum subspace `sum(alpha) = 0`.
//!
//! Objectives built from score differences are invariant to shifting every
//! coordinate, so iterates are kept centered and gradients are projected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Objective with optional gradient output (overwritten when given).
pub trait Objective {
    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64], Option<&mut [f64]>) -> f64,
{
    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        self(x, grad)
    }
}

fn center(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self { max_iter: 5000, grad_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothMinimum {
    pub alpha: Vec<f64>,
    pub value: f64,
    /// Norm of the projected gradient at `alpha`.
    pub grad_norm: f64,
    pub iterations: usize,
    /// `grad_norm < grad_tol`.
    pub converged: bool,
}

/// BFGS with Armijo backtracking, restricted to the zero-sum subspace.
pub fn bfgs_centered(x0: &[f64], f: &dyn Objective, cfg: BfgsConfig) -> SmoothMinimum {
    let n = x0.len();
    let mut x = x0.to_vec();
    center(&mut x);
    let mut g = vec![0.0; n];
    let mut value = f.eval(&x, Some(&mut g));
    center(&mut g);
    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut iterations = 0;
    let mut next_g = vec![0.0; n];
    while iterations < cfg.max_iter && norm(&g) >= cfg.grad_tol {
        iterations += 1;
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        center(&mut d);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let mut trial = vec![0.0; n];
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] + step * d[i];
            }
            let v = f.eval(&trial, Some(&mut next_g));
            if v.is_finite() && v <= value + 1e-4 * step * slope {
                value = v;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        center(&mut next_g);
        let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| next_g[i] - g[i]).collect();
        x.copy_from_slice(&trial);
        g.copy_from_slice(&next_g);
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) && sy > 0.0 {
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }
    let grad_norm = norm(&g);
    SmoothMinimum { alpha: x, value, grad_norm, iterations, converged: grad_norm < cfg.grad_tol }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// Step-size decay for the subgradient method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgradientSchedule {
    /// `c / sqrt(t)`.
    InvSqrt,
    /// `c / t`.
    Inv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub step_scale: f64,
    /// Spread allowed between the best values of the two schedules.
    pub value_tol: f64,
    /// Standard deviation of the random restart points.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        Self { restarts: 16, iterations: 4000, step_scale: 1.0, value_tol: 1e-4, init_scale: 2.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonsmoothMinimum {
    pub alpha: Vec<f64>,
    pub value: f64,
    /// Largest gap between the per-schedule best values and the overall best.
    pub spread: f64,
    /// `spread <= value_tol * (1 + |value|)`.
    pub stable: bool,
}

fn subgradient_run(
    x0: &[f64],
    f: &dyn Objective,
    schedule: SubgradientSchedule,
    iterations: usize,
    step_scale: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    center(&mut x);
    let mut g = vec![0.0; n];
    let mut best = (x.clone(), f64::INFINITY);
    for t in 1..=iterations {
        let v = f.eval(&x, Some(&mut g));
        if v < best.1 {
            best = (x.clone(), v);
        }
        center(&mut g);
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        let eta = match schedule {
            SubgradientSchedule::InvSqrt => step_scale / (t as f64).sqrt(),
            SubgradientSchedule::Inv => step_scale / t as f64,
        };
        for i in 0..n {
            x[i] -= eta * g[i] / gn;
        }
    }
    best
}

/// Normalized subgradient descent from the origin plus random restarts,
/// under both decay schedules; reports the best point and how well the two
/// schedules agree.
pub fn subgradient_centered(n: usize, f: &dyn Objective, cfg: SubgradientConfig) -> NonsmoothMinimum {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.restarts.max(1))
        .map(|r| {
            if r == 0 {
                vec![0.0; n]
            } else {
                (0..n).map(|_| cfg.init_scale * (rng.gen::<f64>() * 2.0 - 1.0)).collect()
            }
        })
        .collect();
    let mut per_schedule = Vec::new();
    let mut best: (Vec<f64>, f64) = (vec![0.0; n], f64::INFINITY);
    for schedule in [SubgradientSchedule::InvSqrt, SubgradientSchedule::Inv] {
        let mut sched_best = f64::INFINITY;
        for x0 in &starts {
            let (x, v) = subgradient_run(x0, f, schedule, cfg.iterations, cfg.step_scale);
            sched_best = sched_best.min(v);
            if v < best.1 {
                best = (x, v);
            }
        }
        per_schedule.push(sched_best);
    }
    let spread = per_schedule.iter().map(|v| v - best.1).fold(0.0, f64::max);
    let stable = spread <= cfg.value_tol * (1.0 + best.1.abs());
    NonsmoothMinimum { alpha: best.0, value: best.1, spread, stable }
}
