//! Literal dense forms of the design objective. They scale badly and exist to
//! cross-check the structured evaluation in [`DesignProblem`](super::DesignProblem).

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_sqrt, kron, to_complex, CMat, CVec};
use crate::pulse::{SteeringMatrix, WindowMatrix};

use super::DesignInputs;

fn steering(inputs: &DesignInputs, cfg: &SystemConfig) -> Vec<CMat> {
    inputs
        .offsets
        .iter()
        .map(|&e| to_complex(&SteeringMatrix::new(e, &cfg.pulse).entries))
        .collect()
}

fn column(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// `Θ = θ^T ⊗ I_{L_o Q}`.
pub fn build_theta(theta: &CVec, cfg: &SystemConfig) -> CMat {
    let lq = cfg.pulse.samples();
    kron(&CMat::from_row_slice(1, theta.len(), theta.as_slice()), &CMat::identity(lq, lq))
}

/// `Ξ` and `Π` with `R_δ^{1/2}` taken as the Hermitian square root.
pub fn build_xi_pi(inputs: &DesignInputs, cfg: &SystemConfig) -> Result<(CMat, CMat)> {
    let root = hermitian_sqrt(&inputs.r_delta())?;
    Ok(xi_pi_from_root(inputs, &root, cfg))
}

/// Row block `i` of `Ξ` is `r_i ⊗ A(ε̂_{k_i})` for row `r_i` of the root;
/// row block `i` of `Π` is `ĥ_i A(ε̂_{k_i})`.
pub(crate) fn xi_pi_from_root(inputs: &DesignInputs, root: &CMat, cfg: &SystemConfig) -> (CMat, CMat) {
    let a = steering(inputs, cfg);
    let n = cfg.elements;
    let nk = cfg.total_elements();
    let (lq, l) = (cfg.pulse.samples(), cfg.pulse.seq_len());
    let mut xi = CMat::zeros(nk * lq, root.ncols() * l);
    let mut pi = CMat::zeros(nk * lq, l);
    for i in 0..nk {
        let ak = &a[i / n];
        let row = CMat::from_fn(1, root.ncols(), |_, c| root[(i, c)]);
        xi.view_mut((i * lq, 0), (lq, root.ncols() * l)).copy_from(&kron(&row, ak));
        pi.view_mut((i * lq, 0), (lq, l)).copy_from(&(ak * inputs.h_eq[i]));
    }
    (xi, pi)
}

/// MSE written with `Ψ = blk[θ_1^T, …, θ_K^T] ⊗ I_L`, `Ĥ = ĥ ⊗ I_L` and
/// `R_δ(Ĥ) = R_δ ⊗ I_L`, evaluated without any structural shortcut.
pub fn mse_full(theta: &CVec, g: &CMat, inputs: &DesignInputs, cfg: &SystemConfig) -> Result<f64> {
    let k = cfg.num_ris;
    let n = cfg.elements;
    let nk = cfg.total_elements();
    let l = cfg.pulse.seq_len();
    if theta.len() != nk {
        return Err(Error::Dimension { expected: nk, actual: theta.len() });
    }
    let a_blocks = steering(inputs, cfg);
    let mut a_all = CMat::zeros(cfg.pulse.samples(), k * l);
    for (j, a) in a_blocks.iter().enumerate() {
        a_all.view_mut((0, j * l), (a.nrows(), l)).copy_from(a);
    }
    let mut blk = CMat::zeros(k, nk);
    for i in 0..nk {
        blk[(i / n, i)] = theta[i];
    }
    let eye = CMat::identity(l, l);
    let psi = kron(&blk, &eye);
    let h_big = kron(&column(&inputs.h_eq), &eye);
    let r_big = kron(&inputs.r_delta(), &eye);
    let t = to_complex(&WindowMatrix::new(&cfg.pulse).entries);

    let gap = g * &a_all * &psi;
    let quad = (&gap * r_big * gap.adjoint()).trace().re;
    let noise = (g * &inputs.r_v * g.adjoint()).trace().re;
    let cross = (&gap * h_big * t.adjoint()).trace().re;
    Ok(quad + noise - 2.0 * cross + (&t * t.adjoint()).trace().re)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignProblem, ReflectionVector};
    use crate::error::Error;
    use crate::linalg::C64;
    use crate::linalg::complex_gaussian_vec;
    use crate::pulse::PulseConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(k: usize, n: usize, seed: u64) -> (SystemConfig, DesignInputs) {
        let cfg = SystemConfig::new(PulseConfig::default(), k, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = complex_gaussian_vec(&mut rng, n * k, 1.0);
        let root = CMat::from_fn(n * k, n * k, |_, _| crate::linalg::complex_gaussian(&mut rng, 0.02));
        let offsets = (0..k).map(|i| 0.37 * i as f64 - 0.4).collect();
        let inputs = DesignInputs::white(offsets, h, &root * root.adjoint(), 0.2, &cfg).unwrap();
        (cfg, inputs)
    }

    #[test]
    fn theta_basis_vector_selects_first_block() {
        let cfg = SystemConfig::new(PulseConfig::default(), 2, 2);
        let mut e1 = CVec::zeros(4);
        e1[0] = C64::new(1.0, 0.0);
        let big = build_theta(&e1, &cfg);
        let lq = cfg.pulse.samples();
        assert_eq!(big.shape(), (lq, 4 * lq));
        assert_eq!(big.columns(0, lq).into_owned(), CMat::identity(lq, lq));
        assert!(big.columns(lq, 3 * lq).iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn theta_frobenius_norm_and_kron_identity() {
        let cfg = SystemConfig::new(PulseConfig::default(), 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = ReflectionVector::random(6, &mut rng).values();
        let big = build_theta(&theta, &cfg);
        let lq = cfg.pulse.samples();
        assert!((big.norm_squared() - (6 * lq) as f64).abs() < 1e-10);
        let x = complex_gaussian_vec(&mut rng, 6, 1.0);
        let lhs = &big * kron(&column(&x), &CMat::identity(lq, lq));
        let rhs = CMat::identity(lq, lq) * (theta.transpose() * &x)[0];
        assert!((lhs - rhs).camax() < 1e-12);
    }

    #[test]
    fn shapes() {
        let (cfg, inputs) = instance(2, 3, 2);
        let (xi, pi) = build_xi_pi(&inputs, &cfg).unwrap();
        let (lq, l) = (cfg.pulse.samples(), cfg.pulse.seq_len());
        assert_eq!(xi.shape(), (6 * lq, 6 * l));
        assert_eq!(pi.shape(), (6 * lq, l));
    }

    #[test]
    fn kronecker_identities_hold() {
        // A(ε̂) Ψ (R^{1/2} ⊗ I) = Θ Ξ and A(ε̂) Ψ Ĥ = Θ Π.
        let (cfg, inputs) = instance(2, 2, 3);
        let theta = ReflectionVector::random(4, &mut ChaCha8Rng::seed_from_u64(4)).values();
        let (xi, pi) = build_xi_pi(&inputs, &cfg).unwrap();
        let l = cfg.pulse.seq_len();
        let a: Vec<CMat> = steering(&inputs, &cfg);
        let mut a_all = CMat::zeros(cfg.pulse.samples(), 2 * l);
        for (j, m) in a.iter().enumerate() {
            a_all.view_mut((0, j * l), (m.nrows(), l)).copy_from(m);
        }
        let mut blk = CMat::zeros(2, 4);
        for i in 0..4 {
            blk[(i / 2, i)] = theta[i];
        }
        let eye = CMat::identity(l, l);
        let apsi = &a_all * kron(&blk, &eye);
        let root = hermitian_sqrt(&inputs.r_delta()).unwrap();
        let big = build_theta(&theta, &cfg);
        let lhs = &apsi * kron(&root, &eye);
        assert!((lhs - &big * &xi).camax() < 1e-10);
        let lhs = &apsi * kron(&column(&inputs.h_eq), &eye);
        assert!((lhs - &big * &pi).camax() < 1e-10);
    }

    #[test]
    fn zero_uncertainty_root_is_rank_one() {
        let cfg = SystemConfig::new(PulseConfig::default(), 1, 3);
        let h = complex_gaussian_vec(&mut ChaCha8Rng::seed_from_u64(5), 3, 1.0);
        let inputs = DesignInputs::perfect(vec![0.2], h.clone(), 0.1, &cfg).unwrap();
        let r = inputs.r_delta();
        let sv = r.clone().singular_values();
        assert!(sv[1] < 1e-12 * sv[0]);
        let root = hermitian_sqrt(&r).unwrap();
        assert!((&root * &root - &r).camax() < 1e-10 * r.camax());
    }

    #[test]
    fn non_psd_covariance_rejected() {
        let cfg = SystemConfig::new(PulseConfig::default(), 1, 2);
        let mut c = CMat::zeros(2, 2);
        c[(0, 0)] = C64::new(-0.5, 0.0);
        let r = DesignInputs::white(vec![0.0], CVec::zeros(2), c, 0.1, &cfg);
        assert!(matches!(r, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn full_form_matches_structured_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for s in 0..10 {
            let (cfg, inputs) = instance(2, 2, 20 + s);
            let p = DesignProblem::new(&inputs, &cfg).unwrap();
            let theta = ReflectionVector::random(4, &mut rng);
            let (lo, lq) = (cfg.pulse.observation_len, cfg.pulse.samples());
            let g = CMat::from_column_slice(lo, lq, complex_gaussian_vec(&mut rng, lo * lq, 0.05).as_slice());
            let full = mse_full(&theta.values(), &g, &inputs, &cfg).unwrap();
            let structured = p.mse_theta(&theta, &g).unwrap();
            assert!((full - structured).abs() <= 1e-10 * (1.0 + full.abs()));
            assert!(full >= 0.0);
            let zero = CMat::zeros(lo, lq);
            assert!((mse_full(&theta.values(), &zero, &inputs, &cfg).unwrap() - p.target_energy()).abs() < 1e-10);
        }
    }

    #[test]
    fn square_root_choice_is_irrelevant() {
        let (cfg, inputs) = instance(2, 2, 7);
        let r = inputs.r_delta() + CMat::identity(4, 4) * C64::new(1e-6, 0.0);
        let inputs = DesignInputs { c_heq: &r - &inputs.h_eq * inputs.h_eq.adjoint(), ..inputs };
        let hermitian = hermitian_sqrt(&inputs.r_delta()).unwrap();
        let lower = inputs.r_delta().cholesky().unwrap().l();
        let theta = ReflectionVector::random(4, &mut ChaCha8Rng::seed_from_u64(8)).values();
        let big = build_theta(&theta, &cfg);
        let x = |root: &CMat| {
            let (xi, _) = xi_pi_from_root(&inputs, root, &cfg);
            &big * &xi * xi.adjoint() * big.adjoint()
        };
        let a = x(&hermitian);
        assert!((a.clone() - x(&lower)).camax() < 1e-9 * a.camax());
    }
}
