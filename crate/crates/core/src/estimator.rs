//! Training-phase model and the joint maximum-likelihood estimator of timing
//! offsets and cascaded channels (alternating projection over the offsets).
//!
//! The stacked training model is `y_t = N(ε) h_eq + v_t` with
//! `N(ε) = [Φ_1 ⊗ (A(ε_1)s_t), …, Φ_K ⊗ (A(ε_K)s_t)]`. The dense `N(ε)` is
//! available through [`build_n`], but the least-squares fit works on its
//! Kronecker structure directly: the Gram matrix is
//! `(Φ^H Φ) ∘ [a_k^H a_k']` and `N^H y` needs only `K M` inner products of
//! length `L_o Q`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, hpd_solve, to_complex, CMat, CVec, C64, ONE, ZERO};
use crate::pulse::SteeringMatrix;

/// RIS reflection pattern `Φ` across training sub-phases plus the pilot `s_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPattern {
    /// `M × NK`, unit-modulus entries.
    pub phi: CMat,
    /// Pilot sequence of length `L`.
    pub pilot: CVec,
    phi_gram: CMat,
}

impl TrainingPattern {
    /// DFT reflection pattern (`Φ[m, i] = e^{-j2π m i / M}`) and a white QPSK
    /// pilot drawn from `rng`.
    pub fn generate<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.subphases;
        let nk = cfg.total_elements();
        let phi = CMat::from_fn(m, nk, |r, c| {
            C64::from_polar(1.0, -2.0 * PI * ((r * c) % m) as f64 / m as f64)
        });
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let pilot = CVec::from_fn(cfg.pulse.seq_len(), |_, _| {
            let re = if rng.random::<bool>() { s } else { -s };
            let im = if rng.random::<bool>() { s } else { -s };
            C64::new(re, im)
        });
        Self::new(phi, pilot, cfg)
    }

    pub fn from_seed(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        Self::generate(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn new(phi: CMat, pilot: CVec, cfg: &SystemConfig) -> Result<Self> {
        let nk = cfg.total_elements();
        if phi.ncols() != nk {
            return Err(Error::Dimension { expected: nk, actual: phi.ncols() });
        }
        if phi.nrows() != cfg.subphases {
            return Err(Error::Dimension { expected: cfg.subphases, actual: phi.nrows() });
        }
        if phi.nrows() < nk {
            return Err(Error::InvalidConfig(format!(
                "{} sub-phases leave the {} cascaded coefficients unidentifiable",
                phi.nrows(),
                nk
            )));
        }
        if pilot.len() != cfg.pulse.seq_len() {
            return Err(Error::Dimension { expected: cfg.pulse.seq_len(), actual: pilot.len() });
        }
        let phi_gram = phi.adjoint() * &phi;
        Ok(TrainingPattern { phi, pilot, phi_gram })
    }

    /// `Φ_k`: the `N` columns of `Φ` belonging to RIS `k`.
    pub fn phi_block(&self, k: usize, elements: usize) -> CMat {
        self.phi.columns(k * elements, elements).into_owned()
    }
}

/// `A(ε_k) s` for every RIS.
pub(crate) fn shaped_pilots(offsets: &[f64], pilot: &CVec, cfg: &SystemConfig) -> Vec<CVec> {
    offsets
        .iter()
        .map(|&e| shaped_pilot(e, pilot, cfg))
        .collect()
}

fn shaped_pilot(offset: f64, pilot: &CVec, cfg: &SystemConfig) -> CVec {
    to_complex(&SteeringMatrix::new(offset, &cfg.pulse).entries) * pilot
}

fn check_offsets(offsets: &[f64], cfg: &SystemConfig) -> Result<()> {
    if offsets.len() != cfg.num_ris {
        return Err(Error::Dimension { expected: cfg.num_ris, actual: offsets.len() });
    }
    Ok(())
}

/// Dense `N(ε)` of shape `M L_o Q × NK`.
pub fn build_n(offsets: &[f64], tp: &TrainingPattern, cfg: &SystemConfig) -> Result<CMat> {
    check_offsets(offsets, cfg)?;
    Ok(kron_blocks(&shaped_pilots(offsets, &tp.pilot, cfg), tp, cfg))
}

/// `[Φ_1 ⊗ x_1, …, Φ_K ⊗ x_K]` for per-RIS column vectors `x_k`.
pub(crate) fn kron_blocks(columns: &[CVec], tp: &TrainingPattern, cfg: &SystemConfig) -> CMat {
    let lq = cfg.pulse.samples();
    let n = cfg.elements;
    let mut out = CMat::zeros(cfg.training_len(), cfg.total_elements());
    for (k, x) in columns.iter().enumerate() {
        for l in 0..n {
            let i = k * n + l;
            for m in 0..tp.phi.nrows() {
                let p = tp.phi[(m, i)];
                for s in 0..lq {
                    out[(m * lq + s, i)] = p * x[s];
                }
            }
        }
    }
    out
}

/// `[Φ_k ⊗ x_k]^H [Φ_k ⊗ w_k]` from the cached `Φ^H Φ`: entry `(i, j)` is
/// `(Φ^H Φ)[i, j] · x_{k_i}^H w_{k_j}`.
pub(crate) fn cross_gram(x: &[CVec], w: &[CVec], tp: &TrainingPattern, elements: usize) -> CMat {
    let k_ris = x.len();
    let cross = CMat::from_fn(k_ris, k_ris, |a, b| x[a].dotc(&w[b]));
    let nk = k_ris * elements;
    CMat::from_fn(nk, nk, |i, j| tp.phi_gram[(i, j)] * cross[(i / elements, j / elements)])
}

/// `N(ε) h` evaluated blockwise.
fn predict(pulses: &[CVec], h_eq: &CVec, tp: &TrainingPattern, cfg: &SystemConfig) -> CVec {
    let lq = cfg.pulse.samples();
    let n = cfg.elements;
    let mut out = CVec::zeros(cfg.training_len());
    for m in 0..tp.phi.nrows() {
        let mut seg = out.rows_mut(m * lq, lq);
        for (k, a) in pulses.iter().enumerate() {
            let mut gain = ZERO;
            for l in 0..n {
                gain += tp.phi[(m, k * n + l)] * h_eq[k * n + l];
            }
            seg.axpy(gain, a, ONE);
        }
    }
    out
}

/// Least-squares channel for fixed offsets together with the projection
/// residual `Λ(ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFit {
    pub h_eq: CVec,
    pub cost: f64,
}

pub fn fit_channel(offsets: &[f64], y: &CVec, tp: &TrainingPattern, cfg: &SystemConfig) -> Result<ChannelFit> {
    check_offsets(offsets, cfg)?;
    if y.len() != cfg.training_len() {
        return Err(Error::Dimension { expected: cfg.training_len(), actual: y.len() });
    }
    let pulses = shaped_pilots(offsets, &tp.pilot, cfg);
    fit_with_pulses(&pulses, y, tp, cfg)
}

fn fit_with_pulses(pulses: &[CVec], y: &CVec, tp: &TrainingPattern, cfg: &SystemConfig) -> Result<ChannelFit> {
    let n = cfg.elements;
    let nk = pulses.len() * n;
    let lq = cfg.pulse.samples();
    let m_sub = tp.phi.nrows();

    let gram = cross_gram(pulses, pulses, tp, n);

    // z[k][m] = a_k^H y_m
    let z: Vec<Vec<C64>> = pulses
        .iter()
        .map(|a| (0..m_sub).map(|m| a.dotc(&y.rows(m * lq, lq))).collect())
        .collect();
    let rhs = CMat::from_fn(nk, 1, |i, _| {
        let zk = &z[i / n];
        (0..m_sub).map(|m| tp.phi[(m, i)].conj() * zk[m]).sum::<C64>()
    });

    let h_eq = hpd_solve(&gram, &rhs, "least-squares channel fit")?.column(0).into_owned();
    let residual = y - predict(pulses, &h_eq, tp, cfg);
    Ok(ChannelFit { h_eq, cost: residual.norm_squared() })
}

/// `ĥ_eq = (N^H N)^{-1} N^H y_t`.
pub fn ls_channel(offsets: &[f64], y: &CVec, tp: &TrainingPattern, cfg: &SystemConfig) -> Result<CVec> {
    fit_channel(offsets, y, tp, cfg).map(|f| f.h_eq)
}

/// `Λ(ε) = ‖P(ε) y_t‖²`.
pub fn cost_lambda(offsets: &[f64], y: &CVec, tp: &TrainingPattern, cfg: &SystemConfig) -> Result<f64> {
    fit_channel(offsets, y, tp, cfg).map(|f| f.cost)
}

/// `y_t = N(ε) h_eq + v_t`, `v_t ~ CN(0, σ_t² I)`.
pub fn simulate_training<R: Rng + ?Sized>(
    channels: &ChannelSet,
    offsets: &[f64],
    tp: &TrainingPattern,
    noise_var: f64,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<CVec> {
    check_offsets(offsets, cfg)?;
    if noise_var < 0.0 {
        return Err(Error::InvalidConfig("noise variance must be non-negative".into()));
    }
    let h_eq = channels.cascade().h_eq;
    let pulses = shaped_pilots(offsets, &tp.pilot, cfg);
    let mut y = predict(&pulses, &h_eq, tp, cfg);
    if noise_var > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise_var);
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Spacing of the coarse offset grid.
    pub grid_step: f64,
    /// Final bracket width of the golden-section refinement.
    pub refine_width: f64,
    /// Sweep-to-sweep offset change that counts as converged.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            grid_step: 0.02,
            refine_width: 1e-6,
            tolerance: 1e-6,
            max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub offsets: Vec<f64>,
    pub h_eq: CVec,
    pub final_cost: f64,
    pub sweeps: usize,
    /// `Λ` at the initial point and after every coordinate update.
    pub cost_trace: Vec<f64>,
    pub converged: bool,
}

/// Offsets are kept strictly inside (-1, 1).
const EDGE: f64 = 1e-9;

/// Coarse grid over (-1, 1) then golden-section refinement around the best
/// grid point. Returns the better of the result and `current`.
fn minimize_offset(
    mut cost: impl FnMut(f64) -> Result<f64>,
    current: (f64, f64),
    opts: &MleOptions,
) -> Result<(f64, f64)> {
    let steps = (2.0 / opts.grid_step).round() as usize;
    let mut best = current;
    let mut grid_best = (f64::NAN, f64::INFINITY);
    for j in 1..steps {
        let x = -1.0 + j as f64 * opts.grid_step;
        let c = cost(x)?;
        if c < grid_best.1 {
            grid_best = (x, c);
        }
    }
    if grid_best.1 < best.1 {
        best = grid_best;
    }

    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (grid_best.0 - opts.grid_step).max(-1.0 + EDGE);
    let mut hi = (grid_best.0 + opts.grid_step).min(1.0 - EDGE);
    let mut x1 = hi - invphi * (hi - lo);
    let mut x2 = lo + invphi * (hi - lo);
    let mut c1 = cost(x1)?;
    let mut c2 = cost(x2)?;
    while hi - lo > opts.refine_width {
        if c1 < c2 {
            hi = x2;
            x2 = x1;
            c2 = c1;
            x1 = hi - invphi * (hi - lo);
            c1 = cost(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            c1 = c2;
            x2 = lo + invphi * (hi - lo);
            c2 = cost(x2)?;
        }
    }
    for cand in [(x1, c1), (x2, c2)] {
        if cand.1 < best.1 {
            best = cand;
        }
    }
    Ok(best)
}

/// Joint ML estimate by alternating 1-D minimizations of `Λ` over each
/// offset, followed by the least-squares channel at the final offsets.
pub fn mle_alternating(
    y: &CVec,
    tp: &TrainingPattern,
    cfg: &SystemConfig,
    init: &[f64],
    opts: &MleOptions,
) -> Result<EstimationResult> {
    check_offsets(init, cfg)?;
    if init.iter().any(|e| !(e.abs() < 1.0)) {
        return Err(Error::InvalidConfig("initial offsets must lie in (-1, 1)".into()));
    }
    let mut offsets = init.to_vec();
    let mut pulses = shaped_pilots(&offsets, &tp.pilot, cfg);
    let mut cost = fit_with_pulses(&pulses, y, tp, cfg)?.cost;
    let mut trace = vec![cost];
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let previous = offsets.clone();
        for k in 0..cfg.num_ris {
            let (best, best_cost) = minimize_offset(
                |e| {
                    let mut trial = pulses.clone();
                    trial[k] = shaped_pilot(e, &tp.pilot, cfg);
                    fit_with_pulses(&trial, y, tp, cfg).map(|f| f.cost)
                },
                (offsets[k], cost),
                opts,
            )?;
            offsets[k] = best;
            pulses[k] = shaped_pilot(best, &tp.pilot, cfg);
            cost = best_cost;
            trace.push(cost);
        }
        let change = offsets
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }

    let fit = fit_with_pulses(&pulses, y, tp, cfg)?;
    Ok(EstimationResult {
        offsets,
        h_eq: fit.h_eq,
        final_cost: fit.cost,
        sweeps,
        cost_trace: trace,
        converged,
    })
}

/// Synchronization-blind estimator: a single offset shared by all RISs.
pub fn mle_common_offset(
    y: &CVec,
    tp: &TrainingPattern,
    cfg: &SystemConfig,
    opts: &MleOptions,
) -> Result<EstimationResult> {
    let k = cfg.num_ris;
    let start = fit_channel(&vec![0.0; k], y, tp, cfg)?.cost;
    let (best, _) = minimize_offset(
        |e| fit_channel(&vec![e; k], y, tp, cfg).map(|f| f.cost),
        (0.0, start),
        opts,
    )?;
    let offsets = vec![best; k];
    let fit = fit_channel(&offsets, y, tp, cfg)?;
    Ok(EstimationResult {
        offsets,
        h_eq: fit.h_eq,
        final_cost: fit.cost,
        sweeps: 1,
        cost_trace: vec![start, fit.cost],
        converged: true,
    })
}
