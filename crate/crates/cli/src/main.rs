use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rissync::crlb::crlb_theorem1;
use rissync::estimator::{mle_alternating, simulate_training, MleOptions};
use rissync::harness::{
    design_trial, draw_trial, noise_rng, noise_variance, run_async_impact, run_convergence, run_crlb_sweep,
    run_design_sweep, run_estimation_sweep, write_rows, write_trace, Algorithm, ExperimentSpec, OffsetModel,
    Scenario, SweepRow,
};
use rissync::{Error, PulseConfig, Result};

#[derive(Parser, Debug)]
#[command(name = "rissync", version, about = "Timing-offset estimation and reflection design for multi-RIS links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate offsets and channels for a single trial and compare with the bounds.
    Estimate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Sweep the Cramér-Rao bounds over the SNR grid (CSV).
    Crlb {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every design scheme on a single trial.
    Design {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Monte Carlo sweep over the SNR grid (CSV).
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value_t = SweepKind::Estimation)]
        kind: SweepKind,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Objective traces of the plain and accelerated design iterations.
    Convergence {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepKind {
    Estimation,
    Async,
    Design,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScenarioArg {
    Rayleigh,
    Mmwave,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OffsetArg {
    Uniform,
    CommonPlusDelta,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgorithmArg {
    Alg2,
    Alg3,
}

/// Experiment settings. Flags override values read from `--config`.
#[derive(Args, Debug, Clone)]
struct SpecArgs {
    /// TOML file with the experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    /// Number of RISs (K).
    #[arg(long)]
    num_ris: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    offset_model: Option<OffsetArg>,
    /// Spread of the per-RIS offsets around the common offset.
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths_per_ris: Option<usize>,
    #[arg(long)]
    rolloff: Option<f64>,
    #[arg(long)]
    span_symbols: Option<usize>,
    #[arg(long)]
    oversampling: Option<usize>,
    #[arg(long)]
    observation_len: Option<usize>,
}

fn default_spec() -> ExperimentSpec {
    ExperimentSpec {
        scenario: Scenario::Rayleigh,
        num_ris: 2,
        nx: 4,
        ny: 1,
        snr_grid_db: vec![0.0, 10.0, 20.0, 30.0],
        trials: 100,
        offset_model: OffsetModel::Uniform,
        algorithm: Algorithm::Alg3,
        seed: 1,
        paths_per_ris: 3,
        pulse: PulseConfig::default(),
    }
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut s = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => default_spec(),
        };
        if let Some(v) = self.scenario {
            s.scenario = match v {
                ScenarioArg::Rayleigh => Scenario::Rayleigh,
                ScenarioArg::Mmwave => Scenario::Mmwave,
            };
        }
        if let Some(v) = self.num_ris {
            s.num_ris = v;
        }
        if let Some(v) = self.nx {
            s.nx = v;
        }
        if let Some(v) = self.ny {
            s.ny = v;
        }
        if let Some(v) = &self.snr_db {
            s.snr_grid_db = v.clone();
        }
        if let Some(v) = self.trials {
            s.trials = v;
        }
        let current_delta = match s.offset_model {
            OffsetModel::CommonPlusDelta { delta_max } => delta_max,
            OffsetModel::Uniform => 0.1,
        };
        match (self.offset_model, self.delta_max) {
            (Some(OffsetArg::Uniform), Some(_)) => {
                return Err(Error::InvalidConfig("--delta-max needs the common-plus-delta offset model".into()))
            }
            (Some(OffsetArg::Uniform), None) => s.offset_model = OffsetModel::Uniform,
            (Some(OffsetArg::CommonPlusDelta), d) => {
                s.offset_model = OffsetModel::CommonPlusDelta { delta_max: d.unwrap_or(current_delta) }
            }
            (None, Some(d)) => match s.offset_model {
                OffsetModel::CommonPlusDelta { .. } => s.offset_model = OffsetModel::CommonPlusDelta { delta_max: d },
                OffsetModel::Uniform => {
                    return Err(Error::InvalidConfig("--delta-max needs the common-plus-delta offset model".into()))
                }
            },
            (None, None) => {}
        }
        if let Some(v) = self.algorithm {
            s.algorithm = match v {
                AlgorithmArg::Alg2 => Algorithm::Alg2,
                AlgorithmArg::Alg3 => Algorithm::Alg3,
            };
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.paths_per_ris {
            s.paths_per_ris = v;
        }
        if let Some(v) = self.rolloff {
            s.pulse.rolloff = v;
        }
        if let Some(v) = self.span_symbols {
            s.pulse.span_symbols = v;
        }
        if let Some(v) = self.oversampling {
            s.pulse.oversampling = v;
        }
        if let Some(v) = self.observation_len {
            s.pulse.observation_len = v;
        }
        s.validate()?;
        Ok(s)
    }
}

fn emit_rows(rows: &[SweepRow], output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => write_rows(rows, BufWriter::new(File::create(path)?)),
        None => write_rows(rows, io::stdout().lock()),
    }
}

fn estimate(spec: &ExperimentSpec, trial: usize) -> Result<()> {
    let cfg = spec.system();
    let snr = spec.snr_grid_db[0];
    let var = noise_variance(snr);
    let draw = draw_trial(spec, trial)?;
    let mut rng = noise_rng(spec.seed, 0, trial);
    let y = simulate_training(&draw.channels, &draw.offsets, &draw.pattern, var, &cfg, &mut rng)?;
    let est = mle_alternating(&y, &draw.pattern, &cfg, &vec![0.0; spec.num_ris], &MleOptions::default())?;
    let h = draw.channels.cascade().h_eq;
    let bound = crlb_theorem1(&draw.offsets, &h, &draw.pattern, var, &cfg)?;
    let mut out = io::stdout().lock();
    writeln!(out, "snr_db: {snr}")?;
    writeln!(out, "true offsets: {:?}", draw.offsets)?;
    writeln!(out, "estimated offsets: {:?}", est.offsets)?;
    writeln!(out, "sweeps: {} (converged: {})", est.sweeps, est.converged)?;
    writeln!(out, "channel nmse: {:e}", (&est.h_eq - &h).norm_squared() / h.norm_squared())?;
    writeln!(out, "channel crlb (normalized): {:e}", bound.trace_heq() / h.norm_squared())?;
    let t_err: f64 = est.offsets.iter().zip(&draw.offsets).map(|(a, b)| (a - b).powi(2)).sum();
    writeln!(out, "timing mse per entry: {:e}", t_err / spec.num_ris as f64)?;
    writeln!(out, "timing crlb per entry: {:e}", bound.trace_eps() / spec.num_ris as f64)?;
    Ok(())
}

fn design(spec: &ExperimentSpec, trial: usize) -> Result<()> {
    let snr = spec.snr_grid_db[0];
    let draw = draw_trial(spec, trial)?;
    let out_d = design_trial(spec, &draw, trial, snr)?;
    let mut out = io::stdout().lock();
    writeln!(out, "snr_db: {snr}")?;
    writeln!(out, "proposed nmse: {:e} ({} iterations)", out_d.nmse[0], out_d.proposed.iterations)?;
    writeln!(out, "benchmark1 nmse: {:e}", out_d.nmse[1])?;
    writeln!(out, "benchmark2 nmse: {:e} ({} iterations)", out_d.nmse[2], out_d.benchmark2.iterations)?;
    writeln!(out, "random nmse: {:e}", out_d.nmse[3])?;
    Ok(())
}

fn convergence(spec: &ExperimentSpec, trial: usize, dir: &Path) -> Result<()> {
    let traces = run_convergence(spec, trial)?;
    std::fs::create_dir_all(dir)?;
    write_trace(&traces.alg2.objective_trace, BufWriter::new(File::create(dir.join("convergence_alg2.csv"))?))?;
    write_trace(&traces.alg3.objective_trace, BufWriter::new(File::create(dir.join("convergence_alg3.csv"))?))?;
    println!(
        "alg2: {} iterations, final {:e}; alg3: {} iterations, final {:e}",
        traces.alg2.iterations,
        traces.alg2.final_objective(),
        traces.alg3.iterations,
        traces.alg3.final_objective()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate { spec, trial } => estimate(&spec.resolve()?, trial),
        Command::Crlb { spec, output } => emit_rows(&run_crlb_sweep(&spec.resolve()?)?, output.as_deref()),
        Command::Design { spec, trial } => design(&spec.resolve()?, trial),
        Command::Sweep { spec, kind, output } => {
            let spec = spec.resolve()?;
            let rows = match kind {
                SweepKind::Estimation => run_estimation_sweep(&spec)?,
                SweepKind::Async => run_async_impact(&spec)?,
                SweepKind::Design => run_design_sweep(&spec)?,
            };
            emit_rows(&rows, output.as_deref())
        }
        Command::Convergence { spec, trial, output_dir } => convergence(&spec.resolve()?, trial, &output_dir),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::FailureRate { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::FailureRate { excluded: 3, total: 100 }), 2);
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 1);
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "rissync", "sweep", "--num-ris", "3", "--snr-db", "-5,5", "--offset-model", "common-plus-delta",
            "--delta-max", "0.2", "--algorithm", "alg2",
        ])
        .unwrap();
        let Command::Sweep { spec, .. } = cli.command else { panic!() };
        let s = spec.resolve().unwrap();
        assert_eq!(s.num_ris, 3);
        assert_eq!(s.snr_grid_db, vec![-5.0, 5.0]);
        assert_eq!(s.offset_model, OffsetModel::CommonPlusDelta { delta_max: 0.2 });
        assert_eq!(s.algorithm, Algorithm::Alg2);
    }

    #[test]
    fn delta_without_model_rejected() {
        let cli = Cli::try_parse_from(["rissync", "crlb", "--delta-max", "0.2"]).unwrap();
        let Command::Crlb { spec, .. } = cli.command else { panic!() };
        assert!(matches!(spec.resolve(), Err(Error::InvalidConfig(_))));
    }
}
