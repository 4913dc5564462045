//! Unconstrained minimizers: BFGS with backtracking line search and
//! simulated annealing with geometric cooling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfgsConfig {
    /// Stop when the gradient ∞-norm falls below this.
    pub gtol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            gtol: 1e-6,
            max_iter: 500,
            c1: 1e-4,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn identity(k: usize, scale: f64) -> Vec<f64> {
    let mut h = vec![0.0; k * k];
    for i in 0..k {
        h[i * k + i] = scale;
    }
    h
}

/// Minimizes `f` given `fg(x, grad) -> value`; the inverse Hessian is
/// updated only when the curvature condition `sᵀy > 0` holds.
pub fn bfgs(mut fg: impl FnMut(&[f64], &mut [f64]) -> f64, x0: &[f64], cfg: &BfgsConfig) -> Minimum {
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; k];
    let mut f = fg(&x, &mut g);
    let mut evals = 1;
    let mut h = identity(k, 1.0);
    let mut fresh = true;
    let mut xn = vec![0.0; k];
    let mut gn = vec![0.0; k];
    let mut p = vec![0.0; k];
    let mut converged = false;
    let mut iter = 0;
    while iter < cfg.max_iter {
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            break;
        }
        if inf_norm(&g) < cfg.gtol {
            converged = true;
            break;
        }
        iter += 1;
        for i in 0..k {
            p[i] = -(0..k).map(|j| h[i * k + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            h = identity(k, 1.0);
            fresh = true;
            p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi = -gi);
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            for i in 0..k {
                xn[i] = x[i] + step * p[i];
            }
            let fnew = fg(&xn, &mut gn);
            evals += 1;
            if fnew.is_finite() && fnew <= f + cfg.c1 * step * slope {
                accepted = Some(fnew);
                break;
            }
            step *= 0.5;
        }
        let Some(fnew) = accepted else {
            if fresh {
                break;
            }
            h = identity(k, 1.0);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = (0..k).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..k).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if fresh {
                h = identity(k, sy / dot(&y, &y));
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..k).map(|i| (0..k).map(|j| h[i * k + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..k {
                for j in 0..k {
                    h[i * k + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
        f = fnew;
    }
    if !converged && f.is_finite() && inf_norm(&g) < cfg.gtol {
        converged = true;
    }
    Minimum {
        x,
        value: f,
        converged,
        iterations: iter,
        evaluations: evals,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SannConfig {
    pub iterations: usize,
    pub t0: f64,
    pub cooling: f64,
    /// Proposal standard deviation at `t0`.
    pub proposal_sd: f64,
    /// Lower bound on the proposal scale relative to `proposal_sd`.
    pub min_scale: f64,
    pub restarts: usize,
}

impl Default for SannConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            t0: 1.0,
            cooling: 0.995,
            proposal_sd: 0.1,
            min_scale: 1e-2,
            restarts: 5,
        }
    }
}

/// Simulated annealing. Temperature `T_k = t0·cooling^k`; proposals are
/// Gaussian with standard deviation `proposal_sd·max(T_k/t0, min_scale)`;
/// worse moves are accepted with probability `exp(-Δf/T_k)`. Each restart
/// starts from `x0` with its own random stream; the best point is kept.
pub fn sann(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], cfg: &SannConfig, seed: u64) -> Minimum {
    let k = x0.len();
    let mut best_x = x0.to_vec();
    let mut best_f = f(x0);
    let mut evals = 1;
    let unif = Uniform::new(0.0, 1.0).expect("valid range");
    for r in 0..cfg.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut x = x0.to_vec();
        let mut fx = f(&x);
        evals += 1;
        let mut y = vec![0.0; k];
        let mut t = cfg.t0;
        for _ in 0..cfg.iterations {
            let sd = cfg.proposal_sd * (t / cfg.t0).max(cfg.min_scale);
            for i in 0..k {
                let z: f64 = StandardNormal.sample(&mut rng);
                y[i] = x[i] + sd * z;
            }
            let fy = f(&y);
            evals += 1;
            if fy.is_finite() {
                let accept = fy <= fx || (t > 0.0 && unif.sample(&mut rng) < (-(fy - fx) / t).exp());
                if accept {
                    x.copy_from_slice(&y);
                    fx = fy;
                    if fx < best_f {
                        best_f = fx;
                        best_x.copy_from_slice(&x);
                    }
                }
            }
            t *= cfg.cooling;
        }
    }
    Minimum {
        x: best_x,
        value: best_f,
        converged: true,
        iterations: cfg.iterations * cfg.restarts.max(1),
        evaluations: evals,
    }
}
