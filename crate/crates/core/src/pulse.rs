//! Root-raised-cosine pulse, its derivative and autocorrelation, and the
//! timing-steering and windowing matrices built from them.
//!
//! Time is measured in symbol periods throughout (`T = 1`). The pulse is
//! truncated to `[-L_g, L_g]` and is identically zero outside.
//!
//! The textbook RRC quotient has removable singularities at `t = 0` and
//! `t = ±1/(4β)`. Rather than patching a small neighbourhood with a series,
//! the numerator and denominator are rewritten so the vanishing factor cancels
//! exactly: one form is used near the origin and another elsewhere. Both forms
//! are exact identities, so the pulse and its derivative stay accurate right
//! up to (and on) the singular points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    /// Roll-off factor β in (0, 1].
    pub rolloff: f64,
    /// One-sided pulse tail length L_g, in symbols.
    pub span_symbols: usize,
    /// Oversampling factor Q = T / T_s.
    pub oversampling: usize,
    /// Observation length L_o, in symbols.
    pub observation_len: usize,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            rolloff: 0.22,
            span_symbols: 4,
            oversampling: 2,
            observation_len: 12,
        }
    }
}

impl PulseConfig {
    /// Transmitted sequence length `L = 2 L_g + L_o`.
    pub fn seq_len(&self) -> usize {
        2 * self.span_symbols + self.observation_len
    }

    /// Received samples per observation, `L_o Q`.
    pub fn samples(&self) -> usize {
        self.observation_len * self.oversampling
    }

    pub fn sample_interval(&self) -> f64 {
        1.0 / self.oversampling as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "roll-off {} outside (0, 1]",
                self.rolloff
            )));
        }
        if self.span_symbols == 0 || self.oversampling == 0 || self.observation_len == 0 {
            return Err(Error::InvalidConfig(
                "span, oversampling and observation length must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `sin(x) / x`.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Derivative of [`sinc`].
pub(crate) fn sinc_prime(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0)
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}

/// Untruncated unit-energy RRC value and derivative at `t >= 0`.
fn rrc_value_and_slope(t: f64, beta: f64) -> (f64, f64) {
    debug_assert!(t >= 0.0);
    let a = PI * (1.0 - beta);
    let b = PI * (1.0 + beta);
    let t0 = 1.0 / (4.0 * beta);
    if t < 0.5 * t0 {
        // Common factor t removed from numerator and denominator.
        let p = a * sinc(a * t) + 4.0 * beta * (b * t).cos();
        let q = PI * (1.0 - 16.0 * beta * beta * t * t);
        let dp = a * a * sinc_prime(a * t) - 4.0 * beta * b * (b * t).sin();
        let dq = -32.0 * PI * beta * beta * t;
        (p / q, (dp * q - p * dq) / (q * q))
    } else {
        // Common factor (t - t0) removed; uses cos(bt) = -sin(at + 2πβ(t - t0)).
        let u = t - t0;
        let c = PI * beta;
        let phi = a * t + c * u;
        let psi = a * t + 2.0 * c * u;
        let s = c * sinc(c * u);
        let ds = c * c * sinc_prime(c * u);
        let p = -2.0 * phi.cos() * s - 4.0 * beta * psi.sin();
        let q = -4.0 * beta * PI * t * (1.0 + 4.0 * beta * t);
        let dp = 2.0 * (a + c) * phi.sin() * s - 2.0 * phi.cos() * ds
            - 4.0 * beta * (a + 2.0 * c) * psi.cos();
        let dq = -4.0 * beta * PI * (1.0 + 8.0 * beta * t);
        (p / q, (dp * q - p * dq) / (q * q))
    }
}

/// Unit-energy root-raised-cosine impulse response `g(t)`, truncated to
/// `|t| <= L_g`.
pub fn rrc_impulse(t: f64, cfg: &PulseConfig) -> f64 {
    if t.abs() > cfg.span_symbols as f64 {
        return 0.0;
    }
    rrc_value_and_slope(t.abs(), cfg.rolloff).0
}

/// Analytic derivative `g'(t)` of [`rrc_impulse`] (zero outside the support).
pub fn rrc_derivative(t: f64, cfg: &PulseConfig) -> f64 {
    if t.abs() > cfg.span_symbols as f64 {
        return 0.0;
    }
    let slope = rrc_value_and_slope(t.abs(), cfg.rolloff).1;
    if t < 0.0 {
        -slope
    } else {
        slope
    }
}

/// Autocorrelation `R_g(τ) = ∫ g(t) g(t - τ) dt` of the untruncated pulse:
/// the raised-cosine pulse, evaluated in a form without removable
/// singularities.
pub fn rg_autocorr(tau: f64, cfg: &PulseConfig) -> f64 {
    let beta = cfg.rolloff;
    let tau = tau.abs();
    // cos(πβτ) / (1 - 2βτ) rewritten around τ₁ = 1/(2β).
    let v = tau - 1.0 / (2.0 * beta);
    let sinc_pi = sinc(PI * tau);
    sinc_pi * 0.5 * PI * sinc(PI * beta * v) / (1.0 + 2.0 * beta * tau)
}

/// The `L_o Q × L` matrix of shifted pulse samples for one timing offset.
///
/// Column `j` corresponds to symbol index `i = j - L_g`, row `n` to sample time
/// `n T_s`; the entry is `g(n T_s - i - ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix {
    pub offset: f64,
    pub entries: RMat,
}

impl SteeringMatrix {
    /// `A(ε)`. Offsets are meaningful in (-1, 1).
    pub fn new(offset: f64, cfg: &PulseConfig) -> Self {
        Self::fill(offset, cfg, |t| rrc_impulse(t, cfg))
    }

    /// `D(ε) = ∂A(ε)/∂ε`, entrywise `-g'(n T_s - i - ε)`.
    pub fn derivative(offset: f64, cfg: &PulseConfig) -> Self {
        Self::fill(offset, cfg, |t| -rrc_derivative(t, cfg))
    }

    fn fill(offset: f64, cfg: &PulseConfig, f: impl Fn(f64) -> f64) -> Self {
        let ts = cfg.sample_interval();
        let lg = cfg.span_symbols as f64;
        let entries = RMat::from_fn(cfg.samples(), cfg.seq_len(), |n, j| {
            f(n as f64 * ts - (j as f64 - lg) - offset)
        });
        SteeringMatrix { offset, entries }
    }
}

/// First row `η` of the detection window:
/// `[R_g(-L_g), …, R_g(0), …, R_g(L_g), 0, …, 0]` of length `L`.
pub fn window_taps(cfg: &PulseConfig) -> RVec {
    let lg = cfg.span_symbols as isize;
    RVec::from_fn(cfg.seq_len(), |j, _| {
        let j = j as isize;
        if j <= 2 * lg {
            rg_autocorr((j - lg) as f64, cfg)
        } else {
            0.0
        }
    })
}

/// The `L_o × L` circulant windowing matrix `T(η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMatrix {
    pub entries: RMat,
}

impl WindowMatrix {
    /// Row `r` is `η` cyclically shifted right by `r`.
    pub fn from_taps(taps: &RVec, cfg: &PulseConfig) -> Result<Self> {
        let len = cfg.seq_len();
        if taps.len() != len {
            return Err(Error::Dimension { expected: len, actual: taps.len() });
        }
        let entries = RMat::from_fn(cfg.observation_len, len, |r, c| taps[(c + len - r) % len]);
        Ok(WindowMatrix { entries })
    }

    pub fn new(cfg: &PulseConfig) -> Self {
        Self::from_taps(&window_taps(cfg), cfg).expect("taps have length L by construction")
    }
}
