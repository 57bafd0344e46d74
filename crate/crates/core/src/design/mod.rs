//! Joint RIS reflection and receive-equalizer design that accounts for the
//! residual timing and channel uncertainty left by the estimator.
//!
//! The equalizer is eliminated in closed form, leaving a unit-modulus problem
//! over the reflection vector `θ` that is solved by majorization-minimization
//! ([`algorithm2`]) or its SQUAREM-accelerated variant ([`algorithm3_squarem`]).

mod benchmarks;
mod dense;
mod mm;
mod problem;

use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

pub use benchmarks::{benchmark1_sync_naive, benchmark2_perfect, random_phase_design};
pub use dense::{build_theta, build_xi_pi, mse_full};
pub use mm::{algorithm2, algorithm3_squarem, mm_update, MmStep};
pub use problem::DesignProblem;

/// Unit-modulus reflection coefficients, stored as phases so the modulus is
/// exact by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionVector {
    phases: Vec<f64>,
}

impl ReflectionVector {
    pub fn from_phases(phases: Vec<f64>) -> Self {
        ReflectionVector { phases }
    }

    /// Keeps only the phase of each entry; zero entries map to phase 0.
    pub fn from_complex(values: &CVec) -> Self {
        ReflectionVector { phases: values.iter().map(|z| z.arg()).collect() }
    }

    pub fn ones(len: usize) -> Self {
        ReflectionVector { phases: vec![0.0; len] }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        ReflectionVector { phases: (0..len).map(|_| rng.random::<f64>() * two_pi).collect() }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn values(&self) -> CVec {
        CVec::from_iterator(self.len(), self.phases.iter().map(|&p| C64::from_polar(1.0, p)))
    }
}

/// Estimates and their error statistics that the design is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignInputs {
    pub offsets: Vec<f64>,
    pub h_eq: CVec,
    /// Error covariance of `h_eq` (typically its Cramér-Rao bound).
    pub c_heq: CMat,
    /// Data-phase noise covariance, `L_o Q × L_o Q`.
    pub r_v: CMat,
}

impl DesignInputs {
    pub fn new(offsets: Vec<f64>, h_eq: CVec, c_heq: CMat, r_v: CMat, cfg: &SystemConfig) -> Result<Self> {
        let nk = cfg.total_elements();
        let lq = cfg.pulse.samples();
        if offsets.len() != cfg.num_ris {
            return Err(Error::Dimension { expected: cfg.num_ris, actual: offsets.len() });
        }
        if h_eq.len() != nk {
            return Err(Error::Dimension { expected: nk, actual: h_eq.len() });
        }
        if c_heq.shape() != (nk, nk) {
            return Err(Error::Dimension { expected: nk, actual: c_heq.nrows() });
        }
        if r_v.shape() != (lq, lq) {
            return Err(Error::Dimension { expected: lq, actual: r_v.nrows() });
        }
        check_psd(&c_heq)?;
        check_psd(&r_v)?;
        Ok(DesignInputs { offsets, h_eq, c_heq, r_v })
    }

    /// White data-phase noise `R_v = σ² I`.
    pub fn white(offsets: Vec<f64>, h_eq: CVec, c_heq: CMat, noise_var: f64, cfg: &SystemConfig) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::InvalidConfig("noise variance must be positive".into()));
        }
        let lq = cfg.pulse.samples();
        Self::new(offsets, h_eq, c_heq, CMat::identity(lq, lq) * C64::new(noise_var, 0.0), cfg)
    }

    /// Error-free knowledge of offsets and channel.
    pub fn perfect(offsets: Vec<f64>, h_eq: CVec, noise_var: f64, cfg: &SystemConfig) -> Result<Self> {
        let nk = h_eq.len();
        Self::white(offsets, h_eq, CMat::zeros(nk, nk), noise_var, cfg)
    }

    /// `R_δ = ĥ ĥ^H + C`.
    pub fn r_delta(&self) -> CMat {
        &self.h_eq * self.h_eq.adjoint() + &self.c_heq
    }
}

fn check_psd(m: &CMat) -> Result<()> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if (m - m.adjoint()).iter().any(|z| z.norm() > 1e-10 * scale.max(1.0)) {
        return Err(Error::InvalidConfig("covariance matrix is not Hermitian".into()));
    }
    let eig = SymmetricEigen::new((m + m.adjoint()) * C64::new(0.5, 0.0));
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if lmin < -1e-10 * lmax.max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: lmin });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub max_iterations: usize,
    /// Relative change of the concentrated objective that stops the iteration.
    pub tolerance: f64,
    /// Step-length halvings tried before SQUAREM falls back to the plain step.
    pub max_backtracks: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions { max_iterations: 500, tolerance: 1e-8, max_backtracks: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub theta: ReflectionVector,
    /// Equalizer `G`, `L_o × L_o Q`.
    pub g: CMat,
    /// MSE with the optimal equalizer, at the initial point and after every
    /// iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub accelerated: bool,
    pub converged: bool,
}

impl DesignResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}
