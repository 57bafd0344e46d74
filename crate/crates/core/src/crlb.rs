//! Fisher information and Cramér-Rao bounds for the joint offset/channel
//! estimate, with the parameter vector `ξ = [ε, Re h_eq, Im h_eq]`.

use nalgebra::DMatrix;

use crate::channel::he_from_heq;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::estimator::{cross_gram, kron_blocks, shaped_pilots, TrainingPattern};
use crate::linalg::{hpd_inverse, to_complex, CMat, CVec, RMat, C64};
use crate::pulse::SteeringMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbResult {
    /// `K × K` bound on the offset estimates.
    pub c_eps: RMat,
    /// `NK × NK` bound on the cascaded channel estimate.
    pub c_heq: CMat,
}

impl CrlbResult {
    pub fn trace_eps(&self) -> f64 {
        self.c_eps.trace()
    }

    pub fn trace_heq(&self) -> f64 {
        self.c_heq.trace().re
    }
}

fn check(offsets: &[f64], h_eq: &CVec, cfg: &SystemConfig) -> Result<()> {
    if offsets.len() != cfg.num_ris {
        return Err(Error::Dimension { expected: cfg.num_ris, actual: offsets.len() });
    }
    if h_eq.len() != cfg.total_elements() {
        return Err(Error::Dimension { expected: cfg.total_elements(), actual: h_eq.len() });
    }
    Ok(())
}

/// `D(ε_k) s` for every RIS.
fn shaped_derivatives(offsets: &[f64], tp: &TrainingPattern, cfg: &SystemConfig) -> Vec<CVec> {
    offsets
        .iter()
        .map(|&e| to_complex(&SteeringMatrix::derivative(e, &cfg.pulse).entries) * &tp.pilot)
        .collect()
}

/// Dense `N_d(ε) = [Φ_1 ⊗ (D(ε_1)s), …, Φ_K ⊗ (D(ε_K)s)]`.
pub fn build_nd(offsets: &[f64], tp: &TrainingPattern, cfg: &SystemConfig) -> Result<CMat> {
    if offsets.len() != cfg.num_ris {
        return Err(Error::Dimension { expected: cfg.num_ris, actual: offsets.len() });
    }
    Ok(kron_blocks(&shaped_derivatives(offsets, tp, cfg), tp, cfg))
}

/// Gram blocks `N^H N`, `N^H N_d` and `N_d^H N_d`.
struct Grams {
    nn: CMat,
    nnd: CMat,
    ndnd: CMat,
}

fn grams(offsets: &[f64], tp: &TrainingPattern, cfg: &SystemConfig) -> Grams {
    let a = shaped_pilots(offsets, &tp.pilot, cfg);
    let d = shaped_derivatives(offsets, tp, cfg);
    Grams {
        nn: cross_gram(&a, &a, tp, cfg.elements),
        nnd: cross_gram(&a, &d, tp, cfg.elements),
        ndnd: cross_gram(&d, &d, tp, cfg.elements),
    }
}

/// Real Fisher information matrix of `ξ`, size `K + 2NK`.
pub fn fim(
    offsets: &[f64],
    h_eq: &CVec,
    tp: &TrainingPattern,
    noise_var: f64,
    cfg: &SystemConfig,
) -> Result<RMat> {
    check(offsets, h_eq, cfg)?;
    if !(noise_var > 0.0) {
        return Err(Error::InvalidConfig("noise variance must be positive".into()));
    }
    let k = cfg.num_ris;
    let nk = cfg.total_elements();
    let g = grams(offsets, tp, cfg);
    let he = he_from_heq(h_eq, k);
    let het = he.transpose();
    let tt = he.map(|z| z.conj()) * &g.ndnd * &het;
    let th = he.map(|z| z.conj()) * g.nnd.adjoint();
    let hh = &g.nn;

    let mut j = RMat::zeros(k + 2 * nk, k + 2 * nk);
    j.view_mut((0, 0), (k, k)).copy_from(&tt.map(|z| z.re));
    j.view_mut((0, k), (k, nk)).copy_from(&th.map(|z| z.re));
    j.view_mut((0, k + nk), (k, nk)).copy_from(&th.map(|z| -z.im));
    j.view_mut((k, k), (nk, nk)).copy_from(&hh.map(|z| z.re));
    j.view_mut((k, k + nk), (nk, nk)).copy_from(&hh.map(|z| -z.im));
    j.view_mut((k + nk, k + nk), (nk, nk)).copy_from(&hh.map(|z| z.re));
    j.view_mut((k + nk, k), (nk, nk)).copy_from(&hh.map(|z| z.im));
    let ht = th.transpose();
    j.view_mut((k, 0), (nk, k)).copy_from(&ht.map(|z| z.re));
    j.view_mut((k + nk, 0), (nk, k)).copy_from(&ht.map(|z| -z.im));
    Ok(j * (2.0 / noise_var))
}

/// Closed-form bounds via the partitioned inverse:
/// `C_ε = σ²/2 Υ` and `C_h = σ²/2 (2Z + V Υ V^H)` with `Z = (N^H N)^{-1}`,
/// `Υ = Re{H_e^* N_d^H P N_d H_e^T}^{-1}` and `V = Z N^H N_d H_e^T`.
pub fn crlb_theorem1(
    offsets: &[f64],
    h_eq: &CVec,
    tp: &TrainingPattern,
    noise_var: f64,
    cfg: &SystemConfig,
) -> Result<CrlbResult> {
    check(offsets, h_eq, cfg)?;
    if !(noise_var > 0.0) {
        return Err(Error::InvalidConfig("noise variance must be positive".into()));
    }
    let g = grams(offsets, tp, cfg);
    let he = he_from_heq(h_eq, cfg.num_ris);
    let het = he.transpose();
    let z = hpd_inverse(&g.nn, "channel Gram N^H N")?;
    // N_d^H P N_d with P the orthogonal projector onto range(N)^⊥.
    let nd_p_nd = &g.ndnd - g.nnd.adjoint() * &z * &g.nnd;
    let inner = he.map(|c| c.conj()) * nd_p_nd * &het;
    let inner = inner.map(|c| c.re);
    let inner = (&inner + inner.transpose()) * 0.5;
    let upsilon = hpd_inverse(&inner, "offset information")?;
    let v = &z * &g.nnd * &het;
    let half = noise_var / 2.0;

    let ups_c = upsilon.map(|x| C64::new(x, 0.0));
    let c_heq = (&z * C64::new(2.0, 0.0) + &v * ups_c * v.adjoint()) * C64::new(half, 0.0);
    let c_heq = (&c_heq + c_heq.adjoint()) * C64::new(0.5, 0.0);
    Ok(CrlbResult { c_eps: upsilon * half, c_heq })
}

/// Brute-force bounds `Γ J^{-1} Γ^H` with `Γ = [[I, 0, 0], [0, I, jI]]`, using
/// a general LU inverse of the full information matrix.
pub fn crlb_bruteforce(
    offsets: &[f64],
    h_eq: &CVec,
    tp: &TrainingPattern,
    noise_var: f64,
    cfg: &SystemConfig,
) -> Result<CrlbResult> {
    let j = fim(offsets, h_eq, tp, noise_var, cfg)?;
    let jinv = j.clone().try_inverse().ok_or(Error::Singular {
        context: "Fisher information",
        condition: f64::INFINITY,
    })?;
    let k = cfg.num_ris;
    let nk = cfg.total_elements();
    let mut gamma = CMat::zeros(k + nk, k + 2 * nk);
    for i in 0..k {
        gamma[(i, i)] = C64::new(1.0, 0.0);
    }
    for i in 0..nk {
        gamma[(k + i, k + i)] = C64::new(1.0, 0.0);
        gamma[(k + i, k + nk + i)] = C64::new(0.0, 1.0);
    }
    let c = &gamma * to_complex(&jinv) * gamma.adjoint();
    let c_eps: DMatrix<f64> = c.view((0, 0), (k, k)).map(|z| z.re);
    let c_heq = c.view((k, k), (nk, nk)).into_owned();
    Ok(CrlbResult { c_eps, c_heq })
}
