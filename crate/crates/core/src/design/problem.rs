use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{hpd_solve, induced_one_norm, to_complex, trace_of_product, CMat, CVec, RMat, C64};
use crate::pulse::{SteeringMatrix, WindowMatrix};

use super::{DesignInputs, ReflectionVector};

/// Precomputed structure of one design instance.
///
/// With `Θ = θ^T ⊗ I` every quantity of the objective reduces to sums of small
/// `L_o Q × L_o Q` blocks: `ΘΠ = Σ_k (θ_k^T ĥ_k) A_k` and
/// `ΘΞΞ^HΘ^H = Σ_{a,b} (θ_a^T R_δ[a,b] θ_b^*) A_a A_b^T`.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub(crate) num_ris: usize,
    pub(crate) elements: usize,
    pub(crate) samples: usize,
    pub(crate) h_eq: CVec,
    pub(crate) r_delta: CMat,
    pub(crate) r_v: CMat,
    /// `A_a A_b^T`, indexed `a * K + b`.
    pub(crate) block_grams: Vec<CMat>,
    /// `A_k T^T`.
    a_tt: Vec<CMat>,
    /// `T A_k^T`.
    pub(crate) t_at: Vec<CMat>,
    pub(crate) target_energy: f64,
    /// Induced 1-norm of `ΞΞ^H`.
    pub(crate) xi_norm: f64,
}

impl DesignProblem {
    pub fn new(inputs: &DesignInputs, cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.num_ris;
        let n = cfg.elements;
        if inputs.offsets.len() != k {
            return Err(Error::Dimension { expected: k, actual: inputs.offsets.len() });
        }
        if inputs.h_eq.len() != n * k {
            return Err(Error::Dimension { expected: n * k, actual: inputs.h_eq.len() });
        }
        let steering: Vec<RMat> = inputs
            .offsets
            .iter()
            .map(|&e| SteeringMatrix::new(e, &cfg.pulse).entries)
            .collect();
        let t = WindowMatrix::new(&cfg.pulse).entries;
        let mut block_grams = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in 0..k {
                block_grams.push(to_complex(&(&steering[a] * steering[b].transpose())));
            }
        }
        let a_tt = steering.iter().map(|a| to_complex(&(a * t.transpose()))).collect();
        let t_at = steering.iter().map(|a| to_complex(&(&t * a.transpose()))).collect();
        let r_delta = inputs.r_delta();
        let samples = cfg.pulse.samples();

        // Column (j, c) of ΞΞ^H has absolute sum Σ_i |R_δ[i, j]| |G_{k_i, k_j}|[:, c].
        let mut xi_norm = 0.0_f64;
        for j in 0..n * k {
            let kj = j / n;
            let mut col = vec![0.0; samples];
            for a in 0..k {
                let weight: f64 = (a * n..(a + 1) * n).map(|i| r_delta[(i, j)].norm()).sum();
                if weight == 0.0 {
                    continue;
                }
                let g = &block_grams[a * k + kj];
                for (c, acc) in col.iter_mut().enumerate() {
                    *acc += weight * g.column(c).iter().map(|z| z.norm()).sum::<f64>();
                }
            }
            xi_norm = col.into_iter().fold(xi_norm, f64::max);
        }

        Ok(DesignProblem {
            num_ris: k,
            elements: n,
            samples,
            h_eq: inputs.h_eq.clone(),
            r_delta,
            r_v: inputs.r_v.clone(),
            block_grams,
            a_tt,
            t_at,
            target_energy: t.norm_squared(),
            xi_norm,
        })
    }

    pub fn len(&self) -> usize {
        self.num_ris * self.elements
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `tr{T T^H}`: the MSE of the all-zero equalizer.
    pub fn target_energy(&self) -> f64 {
        self.target_energy
    }

    /// `‖ΞΞ^H‖₁`.
    pub fn xi_gram_norm(&self) -> f64 {
        self.xi_norm
    }

    pub(crate) fn check(&self, theta: &ReflectionVector) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), actual: theta.len() });
        }
        Ok(())
    }

    /// `W[a, b] = θ_a^T R_δ[a, b] θ_b^*`.
    pub(crate) fn block_weights(&self, theta: &CVec) -> CMat {
        let n = self.elements;
        let k = self.num_ris;
        let mut w = CMat::zeros(k, k);
        for i in 0..self.len() {
            for j in 0..self.len() {
                w[(i / n, j / n)] += theta[i] * self.r_delta[(i, j)] * theta[j].conj();
            }
        }
        w
    }

    /// `X = ΘΞΞ^HΘ^H + R_v`.
    pub fn x_matrix(&self, theta: &ReflectionVector) -> Result<CMat> {
        self.check(theta)?;
        let w = self.block_weights(&theta.values());
        let mut x = self.r_v.clone();
        let k = self.num_ris;
        for a in 0..k {
            for b in 0..k {
                x += &self.block_grams[a * k + b] * w[(a, b)];
            }
        }
        Ok(x)
    }

    /// `E = ΘΠT^H`.
    pub fn e_matrix(&self, theta: &ReflectionVector) -> Result<CMat> {
        self.check(theta)?;
        let th = theta.values();
        let n = self.elements;
        let mut e = CMat::zeros(self.samples, self.a_tt[0].ncols());
        for (k, at) in self.a_tt.iter().enumerate() {
            let c: C64 = (0..n).map(|l| th[k * n + l] * self.h_eq[k * n + l]).sum();
            e += at * c;
        }
        Ok(e)
    }

    /// `F = X^{-1} E`; the optimal equalizer is `F^H`.
    pub(crate) fn f_matrix(&self, x: &CMat, e: &CMat) -> Result<CMat> {
        hpd_solve(x, e, "equalizer normal equations")
    }

    /// Closed-form minimizer over `G` for fixed `θ`: `T Π^H Θ^H X^{-1}`.
    pub fn equalizer(&self, theta: &ReflectionVector) -> Result<CMat> {
        let x = self.x_matrix(theta)?;
        let e = self.e_matrix(theta)?;
        Ok(self.f_matrix(&x, &e)?.adjoint())
    }

    /// `tr{G X G^H} − 2 Re tr{G ΘΠ T^H} + tr{T T^H}`.
    pub fn mse_theta(&self, theta: &ReflectionVector, g: &CMat) -> Result<f64> {
        let x = self.x_matrix(theta)?;
        let e = self.e_matrix(theta)?;
        if g.shape() != (e.ncols(), e.nrows()) {
            return Err(Error::Dimension { expected: e.ncols(), actual: g.nrows() });
        }
        let quad = trace_of_product(&(g * x), &g.adjoint()).re;
        let cross = trace_of_product(g, &e).re;
        Ok(quad - 2.0 * cross + self.target_energy)
    }

    /// Concentrated objective `tr{E^H X^{-1} E}` (to be maximized).
    pub fn mse_bar(&self, theta: &ReflectionVector) -> Result<f64> {
        let x = self.x_matrix(theta)?;
        let e = self.e_matrix(theta)?;
        let f = self.f_matrix(&x, &e)?;
        Ok(trace_of_product(&e.adjoint(), &f).re)
    }

    /// MSE with the optimal equalizer, `tr{T T^H} − mse_bar(θ)`.
    pub fn objective(&self, theta: &ReflectionVector) -> Result<f64> {
        Ok(self.target_energy - self.mse_bar(theta)?)
    }

    /// `λ = ‖ΞΞ^H‖₁ ‖F F^H‖₁`.
    pub(crate) fn lambda(&self, p: &CMat) -> f64 {
        self.xi_norm * induced_one_norm(p)
    }
}
