use crate::error::Result;
use crate::linalg::{trace_of_product, CMat, CVec, C64};

use super::{DesignOptions, DesignProblem, DesignResult, ReflectionVector};

/// One majorization step expanded at `θ_t`.
///
/// The minorizer of the concentrated objective is
/// `g(θ; θ_t) = 2 Re Σ_j b_j^* θ_j + c`, where `b_j = tr B[j]` is the trace of
/// the `j`-th `L_o Q × L_o Q` column block of
/// `B = λΘ_t − F F^H Θ_t ΞΞ^H + F T Π^H`. Over unit-modulus `θ` it is
/// maximized by `θ_j = e^{j arg b_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MmStep {
    /// Maximizer of the minorizer.
    pub next: ReflectionVector,
    pub b: CVec,
    pub lambda: f64,
    /// Concentrated objective at the expansion point.
    pub mse_bar: f64,
    constant: f64,
}

impl MmStep {
    /// Minorizer value `g(θ; θ_t)`.
    pub fn surrogate(&self, theta: &ReflectionVector) -> f64 {
        let lin: C64 = self.b.iter().zip(theta.values().iter()).map(|(b, t)| b.conj() * t).sum();
        2.0 * lin.re + self.constant
    }
}

impl DesignProblem {
    pub fn mm_step(&self, theta: &ReflectionVector) -> Result<MmStep> {
        self.check(theta)?;
        let k = self.num_ris;
        let n = self.elements;
        let nk = self.len();
        let th = theta.values();
        let x = self.x_matrix(theta)?;
        let e = self.e_matrix(theta)?;
        let f = self.f_matrix(&x, &e)?;
        let p = &f * f.adjoint();
        let mse_bar = trace_of_product(&e.adjoint(), &f).re;
        let lambda = self.lambda(&p);

        let s = CMat::from_fn(k, k, |a, b| trace_of_product(&p, &self.block_grams[a * k + b]));
        let u: Vec<C64> = self.t_at.iter().map(|ta| trace_of_product(&f, ta)).collect();
        let lq = self.samples as f64;
        let b = CVec::from_fn(nk, |j, _| {
            let kj = j / n;
            let mut acc = th[j] * (lambda * lq) + self.h_eq[j].conj() * u[kj];
            for a in 0..k {
                let w: C64 = (a * n..(a + 1) * n).map(|i| th[i] * self.r_delta[(i, j)]).sum();
                acc -= w * s[(a, kj)];
            }
            acc
        });
        let next = ReflectionVector::from_phases(b.iter().map(|z| z.arg()).collect());
        let constant = -2.0 * lambda * (nk as f64) * lq + trace_of_product(&p, &x).re
            - 2.0 * trace_of_product(&p, &self.r_v).re;
        Ok(MmStep { next, b, lambda, mse_bar, constant })
    }
}

/// Phase-only update maximizing the minorizer at `θ_t`.
pub fn mm_update(problem: &DesignProblem, theta: &ReflectionVector) -> Result<ReflectionVector> {
    Ok(problem.mm_step(theta)?.next)
}

fn small_change(old: f64, new: f64, tol: f64) -> bool {
    (new - old).abs() <= tol * new.abs()
}

fn finish(
    problem: &DesignProblem,
    theta: ReflectionVector,
    trace: Vec<f64>,
    iterations: usize,
    accelerated: bool,
    converged: bool,
) -> Result<DesignResult> {
    let g = problem.equalizer(&theta)?;
    Ok(DesignResult { theta, g, objective_trace: trace, iterations, accelerated, converged })
}

/// Plain MM iteration. A step that fails to improve the objective (which can
/// only happen through rounding at a fixed point) ends the iteration without
/// being taken, so the recorded trace is non-increasing.
pub fn algorithm2(problem: &DesignProblem, init: &ReflectionVector, opts: &DesignOptions) -> Result<DesignResult> {
    let energy = problem.target_energy();
    let mut theta = init.clone();
    let mut bar = problem.mse_bar(&theta)?;
    let mut trace = vec![energy - bar];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let next = mm_update(problem, &theta)?;
        let next_bar = problem.mse_bar(&next)?;
        if next_bar < bar {
            converged = true;
            break;
        }
        let done = small_change(bar, next_bar, opts.tolerance);
        theta = next;
        bar = next_bar;
        trace.push(energy - bar);
        if done {
            converged = true;
            break;
        }
    }
    finish(problem, theta, trace, iterations, false, converged)
}

/// SQUAREM-accelerated MM: two MM steps define `r` and `v`, the iterate is
/// extrapolated with step `α = −‖r‖/‖v‖` and projected back onto unit modulus,
/// and `α` is pulled towards −1 until the objective does not get worse.
pub fn algorithm3_squarem(
    problem: &DesignProblem,
    init: &ReflectionVector,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    let energy = problem.target_energy();
    let mut theta = init.clone();
    let mut bar = problem.mse_bar(&theta)?;
    let mut trace = vec![energy - bar];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let t0 = theta.values();
        let first = mm_update(problem, &theta)?;
        let second = mm_update(problem, &first)?;
        let t1 = first.values();
        let t2 = second.values();
        let r = &t1 - &t0;
        let v = &t2 - &t1 - &r;

        let mut accepted = None;
        let (rn, vn) = (r.norm(), v.norm());
        if vn > 0.0 {
            let mut alpha = -rn / vn;
            for _ in 0..=opts.max_backtracks {
                let point = &t0 - &r * C64::new(2.0 * alpha, 0.0) + &v * C64::new(alpha * alpha, 0.0);
                let cand = ReflectionVector::from_complex(&point);
                let cand_bar = problem.mse_bar(&cand)?;
                if cand_bar >= bar {
                    accepted = Some((cand, cand_bar));
                    break;
                }
                alpha = (alpha - 1.0) / 2.0;
            }
        }
        let (next, next_bar) = match accepted {
            Some(c) => c,
            None => {
                let b = problem.mse_bar(&second)?;
                (second, b)
            }
        };
        if next_bar < bar {
            converged = true;
            break;
        }
        let done = small_change(bar, next_bar, opts.tolerance);
        theta = next;
        bar = next_bar;
        trace.push(energy - bar);
        if done {
            converged = true;
            break;
        }
    }
    finish(problem, theta, trace, iterations, true, converged)
}
