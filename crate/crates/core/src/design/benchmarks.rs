use rand::Rng;

use crate::config::SystemConfig;
use crate::error::Result;
use crate::linalg::CVec;

use super::{algorithm3_squarem, DesignInputs, DesignOptions, DesignProblem, DesignResult, ReflectionVector};

fn fixed_design(problem: &DesignProblem, theta: ReflectionVector) -> Result<DesignResult> {
    let g = problem.equalizer(&theta)?;
    let objective = problem.objective(&theta)?;
    Ok(DesignResult {
        theta,
        g,
        objective_trace: vec![objective],
        iterations: 0,
        accelerated: false,
        converged: true,
    })
}

/// Synchronization-blind design: reflection phases co-phase the estimated
/// cascaded channel, and the equalizer assumes every RIS shares the mean
/// estimated offset.
pub fn benchmark1_sync_naive(inputs: &DesignInputs, cfg: &SystemConfig) -> Result<DesignResult> {
    let theta = ReflectionVector::from_phases(inputs.h_eq.iter().map(|h| -h.arg()).collect());
    let mean = inputs.offsets.iter().sum::<f64>() / inputs.offsets.len() as f64;
    let blind = DesignInputs { offsets: vec![mean; inputs.offsets.len()], ..inputs.clone() };
    fixed_design(&DesignProblem::new(&blind, cfg)?, theta)
}

/// Accelerated design with error-free offsets and channel.
pub fn benchmark2_perfect(
    offsets: &[f64],
    h_eq: &CVec,
    noise_var: f64,
    cfg: &SystemConfig,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    let inputs = DesignInputs::perfect(offsets.to_vec(), h_eq.clone(), noise_var, cfg)?;
    let problem = DesignProblem::new(&inputs, cfg)?;
    algorithm3_squarem(&problem, &ReflectionVector::ones(h_eq.len()), opts)
}

/// Uniformly random reflection phases with the matching optimal equalizer.
pub fn random_phase_design<R: Rng + ?Sized>(
    inputs: &DesignInputs,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<DesignResult> {
    let theta = ReflectionVector::random(inputs.h_eq.len(), rng);
    fixed_design(&DesignProblem::new(inputs, cfg)?, theta)
}
