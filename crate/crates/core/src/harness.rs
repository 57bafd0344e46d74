//! Monte Carlo experiment runner: estimation, asynchrony-impact and design
//! sweeps over SNR, convergence traces, and CSV output.
//!
//! Every trial owns a ChaCha8 stream derived from `(seed, trial)`; noise for
//! each SNR point comes from a separate stream so results do not depend on
//! the SNR grid order, the number of worker threads or scheduling.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, MmWaveParams, UraGeometry};
use crate::config::SystemConfig;
use crate::crlb::crlb_theorem1;
use crate::design::{
    algorithm2, algorithm3_squarem, benchmark1_sync_naive, benchmark2_perfect, random_phase_design, DesignInputs,
    DesignOptions, DesignProblem, DesignResult, ReflectionVector,
};
use crate::error::{Error, Result};
use crate::estimator::{mle_alternating, mle_common_offset, simulate_training, MleOptions, TrainingPattern};
use crate::linalg::CVec;
use crate::pulse::PulseConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Rayleigh,
    Mmwave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OffsetModel {
    /// Independent `ε_k ~ U(-1, 1)`.
    Uniform,
    /// `ε_k = ε₀ + Δ_k` with `ε₀ ~ U(-0.5, 0.5)` and `Δ_k ~ U(-Δ_max, Δ_max)`,
    /// clipped into (-1, 1).
    CommonPlusDelta { delta_max: f64 },
}

impl OffsetModel {
    pub fn draw<R: Rng + ?Sized>(&self, num_ris: usize, rng: &mut R) -> Vec<f64> {
        const LIMIT: f64 = 1.0 - 1e-6;
        match *self {
            OffsetModel::Uniform => (0..num_ris).map(|_| rng.random_range(-LIMIT..LIMIT)).collect(),
            OffsetModel::CommonPlusDelta { delta_max } => {
                let common = rng.random_range(-0.5..0.5);
                (0..num_ris)
                    .map(|_| {
                        let delta = if delta_max > 0.0 { rng.random_range(-delta_max..delta_max) } else { 0.0 };
                        (common + delta).clamp(-LIMIT, LIMIT)
                    })
                    .collect()
            }
        }
    }

    /// `E‖ε‖² / K`, ignoring clipping.
    pub fn mean_square(&self) -> f64 {
        match *self {
            OffsetModel::Uniform => 1.0 / 3.0,
            OffsetModel::CommonPlusDelta { delta_max } => 1.0 / 12.0 + delta_max * delta_max / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Alg2,
    Alg3,
}

fn default_nx() -> usize {
    4
}
fn default_ny() -> usize {
    1
}
fn default_paths() -> usize {
    3
}
fn default_algorithm() -> Algorithm {
    Algorithm::Alg3
}
fn default_offsets() -> OffsetModel {
    OffsetModel::Uniform
}

/// Everything that defines a Monte Carlo run. Deserializes from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// Number of RISs (K).
    pub num_ris: usize,
    /// Array size; each RIS has `nx * ny` elements.
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_ny")]
    pub ny: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    #[serde(default = "default_offsets")]
    pub offset_model: OffsetModel,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Propagation paths per RIS for the mmWave scenario.
    #[serde(default = "default_paths")]
    pub paths_per_ris: usize,
    #[serde(default)]
    pub pulse: PulseConfig,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidConfig("SNR grid must not be empty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("SNR values must be finite".into()));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidConfig("array dimensions must be positive".into()));
        }
        if self.scenario == Scenario::Mmwave && self.paths_per_ris == 0 {
            return Err(Error::InvalidConfig("mmWave scenario needs at least one path".into()));
        }
        if let OffsetModel::CommonPlusDelta { delta_max } = self.offset_model {
            if !(0.0..1.0).contains(&delta_max) {
                return Err(Error::InvalidConfig("delta_max must lie in [0, 1)".into()));
            }
        }
        self.system().validate()
    }

    pub fn elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig::new(self.pulse, self.num_ris, self.elements())
    }
}

/// One aggregated output line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub excluded: usize,
}

/// Draws of one trial that are shared across the SNR grid.
pub struct TrialDraw {
    pub channels: ChannelSet,
    pub offsets: Vec<f64>,
    pub pattern: TrainingPattern,
    pub rng: ChaCha8Rng,
}

pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Noise stream for `(snr index, trial)`, disjoint from the trial streams.
pub fn noise_rng(seed: u64, snr_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((snr_index as u64 + 1) << 32) | trial as u64);
    rng
}

pub fn draw_trial(spec: &ExperimentSpec, trial: usize) -> Result<TrialDraw> {
    let cfg = spec.system();
    let mut rng = trial_rng(spec.seed, trial);
    let channels = match spec.scenario {
        Scenario::Rayleigh => ChannelSet::rayleigh(spec.num_ris, spec.elements(), &mut rng)?,
        Scenario::Mmwave => {
            let params = MmWaveParams::new(spec.paths_per_ris, UraGeometry::half_wavelength(spec.nx, spec.ny));
            ChannelSet::mmwave(spec.num_ris, &params, &mut rng)?
        }
    };
    let offsets = spec.offset_model.draw(spec.num_ris, &mut rng);
    let pattern = TrainingPattern::generate(&cfg, &mut rng)?;
    Ok(TrialDraw { channels, offsets, pattern, rng })
}

pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Named per-trial values at one SNR point; `None` marks an excluded trial.
type Outcome = Option<Vec<(&'static str, f64)>>;

fn aggregate(spec: &ExperimentSpec, per_snr: Vec<Vec<Outcome>>) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let mut excluded_total = 0;
    let mut total = 0;
    for (snr, outcomes) in spec.snr_grid_db.iter().zip(per_snr) {
        let excluded = outcomes.iter().filter(|o| o.is_none()).count();
        excluded_total += excluded;
        total += outcomes.len();
        let kept: Vec<&Vec<(&str, f64)>> = outcomes.iter().flatten().collect();
        let Some(first) = kept.first() else {
            continue;
        };
        for (m, (name, _)) in first.iter().enumerate() {
            let values: Vec<f64> = kept.iter().map(|o| o[m].1).collect();
            let (mean, stderr) = mean_stderr(&values);
            rows.push(SweepRow {
                snr_db: *snr,
                metric: name.to_string(),
                mean,
                stderr,
                trials: values.len(),
                excluded,
            });
        }
    }
    if excluded_total * 100 > total {
        return Err(Error::FailureRate { excluded: excluded_total, total });
    }
    Ok(rows)
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_trials<F>(spec: &ExperimentSpec, body: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&TrialDraw, usize, f64) -> Result<Vec<(&'static str, f64)>> + Sync,
{
    spec.validate()?;
    let per_trial: Vec<Vec<Outcome>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let draw = draw_trial(spec, trial).ok();
            spec.snr_grid_db
                .iter()
                .enumerate()
                .map(|(s, &snr)| draw.as_ref().and_then(|d| body(d, trial, snr).map_err(|_| s).ok()))
                .collect()
        })
        .collect();
    let per_snr = (0..spec.snr_grid_db.len())
        .map(|s| per_trial.iter().map(|t| t[s].clone()).collect())
        .collect();
    aggregate(spec, per_snr)
}

fn snr_index(spec: &ExperimentSpec, snr: f64) -> usize {
    spec.snr_grid_db.iter().position(|&s| s == snr).unwrap_or(0)
}

fn sq_err(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm_squared()
}

fn offset_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Estimation accuracy against the Cramér-Rao bounds.
///
/// Metrics: `channel_nmse` = ‖ĥ − h‖²/‖h‖², `channel_crlb` = tr C_h/‖h‖²,
/// `timing_mse` = ‖ε̂ − ε‖²/K, `timing_crlb` = tr C_ε/K, and `timing_nmse`,
/// `timing_crlb_norm`: the same two normalized by the model's `E‖ε‖²`.
pub fn run_estimation_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    let cfg = spec.system();
    let k = spec.num_ris as f64;
    let energy = spec.offset_model.mean_square() * k;
    run_trials(spec, |draw, trial, snr| {
        let var = noise_variance(snr);
        let mut rng = noise_rng(spec.seed, snr_index(spec, snr), trial);
        let y = simulate_training(&draw.channels, &draw.offsets, &draw.pattern, var, &cfg, &mut rng)?;
        let est = mle_alternating(&y, &draw.pattern, &cfg, &vec![0.0; spec.num_ris], &MleOptions::default())?;
        let h = draw.channels.cascade().h_eq;
        let bound = crlb_theorem1(&draw.offsets, &h, &draw.pattern, var, &cfg)?;
        let h_energy = h.norm_squared();
        let t_err = offset_err(&est.offsets, &draw.offsets);
        Ok(vec![
            ("channel_nmse", sq_err(&est.h_eq, &h) / h_energy),
            ("channel_crlb", bound.trace_heq() / h_energy),
            ("timing_mse", t_err / k),
            ("timing_crlb", bound.trace_eps() / k),
            ("timing_nmse", t_err / energy),
            ("timing_crlb_norm", bound.trace_eps() / energy),
        ])
    })
}

/// Bounds only, averaged over channel and offset draws.
pub fn run_crlb_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    let cfg = spec.system();
    let k = spec.num_ris as f64;
    run_trials(spec, |draw, _, snr| {
        let h = draw.channels.cascade().h_eq;
        let bound = crlb_theorem1(&draw.offsets, &h, &draw.pattern, noise_variance(snr), &cfg)?;
        Ok(vec![
            ("channel_crlb", bound.trace_heq() / h.norm_squared()),
            ("timing_crlb", bound.trace_eps() / k),
        ])
    })
}

/// Proposed estimator against the one that assumes a single shared offset.
pub fn run_async_impact(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    let cfg = spec.system();
    let k = spec.num_ris as f64;
    run_trials(spec, |draw, trial, snr| {
        let var = noise_variance(snr);
        let mut rng = noise_rng(spec.seed, snr_index(spec, snr), trial);
        let y = simulate_training(&draw.channels, &draw.offsets, &draw.pattern, var, &cfg, &mut rng)?;
        let opts = MleOptions::default();
        let proposed = mle_alternating(&y, &draw.pattern, &cfg, &vec![0.0; spec.num_ris], &opts)?;
        let naive = mle_common_offset(&y, &draw.pattern, &cfg, &opts)?;
        let h = draw.channels.cascade().h_eq;
        let he = h.norm_squared();
        Ok(vec![
            ("proposed_channel_nmse", sq_err(&proposed.h_eq, &h) / he),
            ("naive_channel_nmse", sq_err(&naive.h_eq, &h) / he),
            ("proposed_timing_mse", offset_err(&proposed.offsets, &draw.offsets) / k),
            ("naive_timing_mse", offset_err(&naive.offsets, &draw.offsets) / k),
        ])
    })
}

/// Designs of one trial, each evaluated with the true offsets and channel.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub proposed: DesignResult,
    pub benchmark1: DesignResult,
    pub benchmark2: DesignResult,
    pub random: DesignResult,
    /// NMSE `mse_theta(θ, G) / tr{T T^H}` under the true parameters, in the
    /// order proposed, benchmark 1, benchmark 2, random.
    pub nmse: [f64; 4],
}

/// Estimation followed by all designs for one trial at one SNR.
pub fn design_trial(spec: &ExperimentSpec, draw: &TrialDraw, trial: usize, snr: f64) -> Result<DesignOutcome> {
    let cfg = spec.system();
    let var = noise_variance(snr);
    let mut rng = noise_rng(spec.seed, snr_index(spec, snr), trial);
    let y = simulate_training(&draw.channels, &draw.offsets, &draw.pattern, var, &cfg, &mut rng)?;
    let est = mle_alternating(&y, &draw.pattern, &cfg, &vec![0.0; spec.num_ris], &MleOptions::default())?;
    let bound = crlb_theorem1(&est.offsets, &est.h_eq, &draw.pattern, var, &cfg)?;
    let inputs = DesignInputs::white(est.offsets.clone(), est.h_eq.clone(), bound.c_heq, var, &cfg)?;
    let opts = DesignOptions::default();
    let init = ReflectionVector::ones(cfg.total_elements());
    let problem = DesignProblem::new(&inputs, &cfg)?;
    let proposed = match spec.algorithm {
        Algorithm::Alg2 => algorithm2(&problem, &init, &opts)?,
        Algorithm::Alg3 => algorithm3_squarem(&problem, &init, &opts)?,
    };
    let h = draw.channels.cascade().h_eq;
    let benchmark1 = benchmark1_sync_naive(&inputs, &cfg)?;
    let benchmark2 = benchmark2_perfect(&draw.offsets, &h, var, &cfg, &opts)?;
    let random = random_phase_design(&inputs, &cfg, &mut rng)?;

    let truth = DesignProblem::new(&DesignInputs::perfect(draw.offsets.clone(), h, var, &cfg)?, &cfg)?;
    let energy = truth.target_energy();
    let eval = |d: &DesignResult| truth.mse_theta(&d.theta, &d.g).map(|m| m / energy);
    let nmse = [eval(&proposed)?, eval(&benchmark1)?, eval(&benchmark2)?, eval(&random)?];
    Ok(DesignOutcome { proposed, benchmark1, benchmark2, random, nmse })
}

/// Data-phase NMSE of the proposed design and the three comparison schemes.
pub fn run_design_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    run_trials(spec, |draw, trial, snr| {
        let out = design_trial(spec, draw, trial, snr)?;
        Ok(vec![
            ("proposed_nmse", out.nmse[0]),
            ("benchmark1_nmse", out.nmse[1]),
            ("benchmark2_nmse", out.nmse[2]),
            ("random_nmse", out.nmse[3]),
        ])
    })
}

/// Objective traces of the plain and accelerated MM iterations on the same
/// estimated instance (trial `trial`, first SNR of the grid).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTraces {
    pub alg2: DesignResult,
    pub alg3: DesignResult,
}

pub fn run_convergence(spec: &ExperimentSpec, trial: usize) -> Result<ConvergenceTraces> {
    spec.validate()?;
    let cfg = spec.system();
    let snr = spec.snr_grid_db[0];
    let var = noise_variance(snr);
    let draw = draw_trial(spec, trial)?;
    let mut rng = noise_rng(spec.seed, 0, trial);
    let y = simulate_training(&draw.channels, &draw.offsets, &draw.pattern, var, &cfg, &mut rng)?;
    let est = mle_alternating(&y, &draw.pattern, &cfg, &vec![0.0; spec.num_ris], &MleOptions::default())?;
    let bound = crlb_theorem1(&est.offsets, &est.h_eq, &draw.pattern, var, &cfg)?;
    let inputs = DesignInputs::white(est.offsets, est.h_eq, bound.c_heq, var, &cfg)?;
    let problem = DesignProblem::new(&inputs, &cfg)?;
    let init = ReflectionVector::ones(cfg.total_elements());
    let opts = DesignOptions::default();
    Ok(ConvergenceTraces {
        alg2: algorithm2(&problem, &init, &opts)?,
        alg3: algorithm3_squarem(&problem, &init, &opts)?,
    })
}

pub fn write_rows<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TracePoint {
    iteration: usize,
    objective: f64,
}

pub fn write_trace<W: Write>(trace: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (iteration, &objective) in trace.iter().enumerate() {
        w.serialize(TracePoint { iteration, objective })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            scenario: Scenario::Rayleigh,
            num_ris: 2,
            nx: 2,
            ny: 1,
            snr_grid_db: vec![10.0, 20.0],
            trials: 6,
            offset_model: OffsetModel::Uniform,
            algorithm: Algorithm::Alg3,
            seed: 7,
            paths_per_ris: 3,
            pulse: PulseConfig::default(),
        }
    }

    #[test]
    fn toml_round_trip() {
        let s = ExperimentSpec { offset_model: OffsetModel::CommonPlusDelta { delta_max: 0.3 }, ..spec() };
        let text = toml::to_string(&s).unwrap();
        assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), s);
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let s = ExperimentSpec::from_toml(
            "scenario = \"rayleigh\"\nnum_ris = 2\nsnr_grid_db = [0.0]\ntrials = 3\nseed = 1\n",
        )
        .unwrap();
        assert_eq!(s.nx, 4);
        assert_eq!(s.algorithm, Algorithm::Alg3);
        assert_eq!(s.pulse, PulseConfig::default());
    }

    #[test]
    fn invalid_specs_rejected() {
        for bad in [
            ExperimentSpec { trials: 0, ..spec() },
            ExperimentSpec { snr_grid_db: vec![], ..spec() },
            ExperimentSpec { num_ris: 0, ..spec() },
            ExperimentSpec { offset_model: OffsetModel::CommonPlusDelta { delta_max: 1.5 }, ..spec() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))), "{bad:?}");
        }
        assert!(ExperimentSpec::from_toml("scenario = \"rayleigh\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn offsets_follow_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let e = OffsetModel::CommonPlusDelta { delta_max: 0.1 }.draw(3, &mut rng);
            let spread = e.iter().cloned().fold(f64::MIN, f64::max) - e.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 0.2);
            assert!(OffsetModel::Uniform.draw(3, &mut rng).iter().all(|x| x.abs() < 1.0));
        }
        let same = OffsetModel::CommonPlusDelta { delta_max: 0.0 }.draw(4, &mut rng);
        assert!(same.iter().all(|&x| x == same[0]));
    }

    #[test]
    fn streams_are_distinct() {
        let a: u64 = trial_rng(1, 0).random();
        let b: u64 = trial_rng(1, 1).random();
        let c: u64 = noise_rng(1, 0, 0).random();
        assert!(a != b && a != c && b != c);
        let again: u64 = trial_rng(1, 0).random();
        assert_eq!(a, again);
    }

    #[test]
    fn sweep_is_reproducible_and_thread_independent() {
        let s = spec();
        let a = run_estimation_sweep(&s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_estimation_sweep(&s)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 6);
        assert!(a.iter().all(|r| r.trials == 6 && r.excluded == 0));
        let mut buf = Vec::new();
        write_rows(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("snr_db,metric,mean,stderr,trials,excluded\n"));
    }

    #[test]
    fn failure_rate_enforced() {
        let s = spec();
        let per_snr = vec![vec![None, Some(vec![("x", 1.0)])], vec![Some(vec![("x", 1.0)]); 2]];
        assert!(matches!(aggregate(&s, per_snr), Err(Error::FailureRate { excluded: 1, total: 4 })));
    }

    #[test]
    fn stderr_of_known_sample() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trace_csv_layout() {
        let mut buf = Vec::new();
        write_trace(&[3.0, 2.5], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,objective\n0,3.0\n1,2.5\n");
    }
}
