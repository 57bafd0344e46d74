//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rissync::channel::ChannelSet;
use rissync::crlb::{crlb_bruteforce, crlb_theorem1};
use rissync::design::{algorithm2, algorithm3_squarem, mse_full, DesignInputs, DesignOptions, DesignProblem, ReflectionVector};
use rissync::estimator::{mle_alternating, simulate_training, MleOptions, TrainingPattern};
use rissync::harness::{
    design_trial, draw_trial, mean_stderr, run_convergence, run_estimation_sweep, write_rows, Algorithm,
    ExperimentSpec, OffsetModel, Scenario,
};
use rissync::linalg::{complex_gaussian, complex_gaussian_vec, CMat, C64};
use rissync::{PulseConfig, SystemConfig};

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, pass: bool, detail: String, elapsed: Duration) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {detail} ({:.1}s)", elapsed.as_secs_f64());
        if !pass {
            self.failures += 1;
        }
    }
}

fn cfg(k: usize, n: usize) -> SystemConfig {
    SystemConfig::new(PulseConfig::default(), k, n)
}

/// Random design instance with a small PSD channel-error covariance.
fn design_instance(rng: &mut ChaCha8Rng) -> (SystemConfig, DesignInputs) {
    let k = rng.random_range(1..=3);
    let n = rng.random_range(1..=3);
    let c = cfg(k, n);
    let nk = k * n;
    let h = complex_gaussian_vec(rng, nk, 1.0);
    let scale = 10f64.powf(rng.random_range(-4.0..-1.0));
    let root = CMat::from_fn(nk, nk, |_, _| complex_gaussian(rng, scale));
    let offsets = (0..k).map(|_| rng.random_range(-0.95..0.95)).collect();
    let noise = 10f64.powf(rng.random_range(-2.0..1.0));
    let inputs = DesignInputs::white(offsets, h, &root * root.adjoint(), noise, &c).unwrap();
    (c, inputs)
}

fn random_g(c: &SystemConfig, rng: &mut ChaCha8Rng) -> CMat {
    let (lo, lq) = (c.pulse.observation_len, c.pulse.samples());
    CMat::from_column_slice(lo, lq, complex_gaussian_vec(rng, lo * lq, 0.1).as_slice())
}

fn noiseless_recovery(report: &mut Report) {
    let start = Instant::now();
    let c = cfg(2, 4);
    let mut worst_eps = 0.0_f64;
    let mut worst_h = 0.0_f64;
    for i in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let ch = ChannelSet::rayleigh(2, 4, &mut rng).unwrap();
        let eps = OffsetModel::Uniform.draw(2, &mut rng);
        let tp = TrainingPattern::generate(&c, &mut rng).unwrap();
        let y = simulate_training(&ch, &eps, &tp, 0.0, &c, &mut rng).unwrap();
        let est = mle_alternating(&y, &tp, &c, &[0.0, 0.0], &MleOptions::default()).unwrap();
        let h = ch.cascade().h_eq;
        for k in 0..2 {
            worst_eps = worst_eps.max((est.offsets[k] - eps[k]).abs());
        }
        worst_h = worst_h.max((&est.h_eq - &h).norm() / h.norm());
    }
    let elapsed = start.elapsed();
    let pass = worst_eps <= 1e-4 && worst_h <= 1e-6 && elapsed < Duration::from_secs(10);
    report.record(
        1,
        "noiseless exact recovery",
        pass,
        format!("max |eps err| = {worst_eps:.2e}, max channel rel err = {worst_h:.2e}"),
        elapsed,
    );
}

fn crlb_cross_validation(report: &mut Report) {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + i);
        let k = rng.random_range(1..=3);
        let n = rng.random_range(1..=4);
        let c = cfg(k, n);
        let h = ChannelSet::rayleigh(k, n, &mut rng).unwrap().cascade().h_eq;
        let eps = OffsetModel::Uniform.draw(k, &mut rng);
        let tp = TrainingPattern::generate(&c, &mut rng).unwrap();
        let var = 10f64.powf(rng.random_range(-3.0..0.0));
        let a = crlb_theorem1(&eps, &h, &tp, var, &c).unwrap();
        let b = crlb_bruteforce(&eps, &h, &tp, var, &c).unwrap();
        worst = worst.max((&a.c_eps - &b.c_eps).amax() / b.c_eps.amax());
        worst = worst.max((&a.c_heq - &b.c_heq).camax() / b.c_heq.camax());
    }
    report.record(
        2,
        "closed-form CRLB vs brute-force FIM inverse",
        worst <= 1e-8,
        format!("max relative deviation = {worst:.2e}"),
        start.elapsed(),
    );
}

fn efficiency_and_timing(report: &mut Report) {
    let start = Instant::now();
    let spec = ExperimentSpec {
        scenario: Scenario::Rayleigh,
        num_ris: 2,
        nx: 4,
        ny: 4,
        snr_grid_db: vec![25.0],
        trials: 200,
        offset_model: OffsetModel::Uniform,
        algorithm: Algorithm::Alg3,
        seed: 3,
        paths_per_ris: 3,
        pulse: PulseConfig::default(),
    };
    let rows = run_estimation_sweep(&spec).unwrap();
    let elapsed = start.elapsed();
    let get = |m: &str| rows.iter().find(|r| r.metric == m).unwrap().mean;
    let ratio = get("channel_nmse") / get("channel_crlb");
    report.record(
        3,
        "estimator efficiency at 25 dB",
        (0.9..=2.0).contains(&ratio) && elapsed < Duration::from_secs(300),
        format!("channel NMSE / normalized CRLB = {ratio:.3}"),
        elapsed,
    );
    let (mse, bound) = (get("timing_mse"), get("timing_crlb"));
    report.record(
        4,
        "timing MSE against CRLB at 25 dB",
        mse >= 0.8 * bound,
        format!("timing MSE per entry = {mse:.3e}, tr(C_eps)/K = {bound:.3e}, ratio = {:.3}", mse / bound),
        elapsed,
    );
}

fn reformulation_equivalence(report: &mut Report) {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    for _ in 0..100 {
        let (c, inputs) = design_instance(&mut rng);
        let theta = ReflectionVector::random(c.total_elements(), &mut rng);
        let g = random_g(&c, &mut rng);
        let full = mse_full(&theta.values(), &g, &inputs, &c).unwrap();
        let structured = DesignProblem::new(&inputs, &c).unwrap().mse_theta(&theta, &g).unwrap();
        worst = worst.max((full - structured).abs() / (1.0 + full.abs()));
    }
    report.record(
        5,
        "MSE reformulation equivalence",
        worst <= 1e-10,
        format!("max |full - reformulated| / (1 + |full|) = {worst:.2e}"),
        start.elapsed(),
    );
}

fn equalizer_stationarity(report: &mut Report) {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let h = 1e-6;
    for _ in 0..50 {
        let (c, inputs) = design_instance(&mut rng);
        let p = DesignProblem::new(&inputs, &c).unwrap();
        let theta = ReflectionVector::random(c.total_elements(), &mut rng);
        let g = p.equalizer(&theta).unwrap();
        for idx in 0..g.len() {
            for dir in [C64::new(h, 0.0), C64::new(0.0, h)] {
                let mut plus = g.clone();
                plus[idx] += dir;
                let mut minus = g.clone();
                minus[idx] -= dir;
                let d = (p.mse_theta(&theta, &plus).unwrap() - p.mse_theta(&theta, &minus).unwrap()) / (2.0 * h);
                worst = worst.max(d.abs());
            }
        }
    }
    report.record(
        6,
        "closed-form equalizer stationarity",
        worst <= 1e-6,
        format!("max |finite-difference gradient| = {worst:.2e}"),
        start.elapsed(),
    );
}

fn mm_descent_and_surrogate(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    let mut monotone = true;
    let mut worst_touch = 0.0_f64;
    let mut worst_violation = f64::NEG_INFINITY;
    let opts = DesignOptions::default();
    for _ in 0..100 {
        let (c, inputs) = design_instance(&mut rng);
        let p = DesignProblem::new(&inputs, &c).unwrap();
        let nk = c.total_elements();
        let init = ReflectionVector::ones(nk);
        for res in [algorithm2(&p, &init, &opts).unwrap(), algorithm3_squarem(&p, &init, &opts).unwrap()] {
            monotone &= res.objective_trace.windows(2).all(|w| w[1] <= w[0]);
        }
        let at = ReflectionVector::random(nk, &mut rng);
        let step = p.mm_step(&at).unwrap();
        worst_touch = worst_touch.max((step.surrogate(&at) - step.mse_bar).abs() / step.mse_bar.abs().max(1.0));
        for _ in 0..10 {
            let other = ReflectionVector::random(nk, &mut rng);
            let bar = p.mse_bar(&other).unwrap();
            worst_violation = worst_violation.max((step.surrogate(&other) - bar) / bar.abs().max(1.0));
        }
    }
    let pass = monotone && worst_touch <= 1e-9 && worst_violation <= 1e-12;
    report.record(
        7,
        "MM descent and surrogate axioms",
        pass,
        format!(
            "traces monotone = {monotone}, max touching gap = {worst_touch:.2e}, max (g - objective) = {worst_violation:.2e}"
        ),
        start.elapsed(),
    );
}

fn phase_update_optimality(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let mut worst = f64::NEG_INFINITY;
    let grid = (2.0 * std::f64::consts::PI / 1e-3).ceil() as usize;
    for _ in 0..20 {
        let (c, inputs) = design_instance(&mut rng);
        let p = DesignProblem::new(&inputs, &c).unwrap();
        let theta = ReflectionVector::random(c.total_elements(), &mut rng);
        let step = p.mm_step(&theta).unwrap();
        let best = step.surrogate(&step.next);
        for j in 0..c.total_elements() {
            let mut phases = step.next.phases().to_vec();
            for g in 0..grid {
                phases[j] = g as f64 * 1e-3;
                let v = step.surrogate(&ReflectionVector::from_phases(phases.clone()));
                worst = worst.max((v - best) / best.abs().max(1.0));
            }
        }
    }
    report.record(
        8,
        "closed-form phase update vs 1e-3 phase grid",
        worst <= 1e-12,
        format!("max relative surrogate gain of grid over update = {worst:.2e}"),
        start.elapsed(),
    );
}

fn design_ordering(report: &mut Report) {
    let start = Instant::now();
    let names = ["random", "benchmark 1", "proposed", "benchmark 2"];
    let mut pass = true;
    let mut details = Vec::new();
    for k in [2, 4] {
        let spec = ExperimentSpec {
            scenario: Scenario::Rayleigh,
            num_ris: k,
            nx: 4,
            ny: 2,
            snr_grid_db: vec![10.0],
            trials: 100,
            offset_model: OffsetModel::CommonPlusDelta { delta_max: 0.3 },
            algorithm: Algorithm::Alg3,
            seed: 9,
            paths_per_ris: 3,
            pulse: PulseConfig::default(),
        };
        let outcomes: Vec<[f64; 4]> = (0..spec.trials)
            .into_par_iter()
            .filter_map(|t| {
                let draw = draw_trial(&spec, t).ok()?;
                let o = design_trial(&spec, &draw, t, 10.0).ok()?;
                // Order: random, benchmark 1, proposed, benchmark 2.
                Some([o.nmse[3], o.nmse[1], o.nmse[0], o.nmse[2]])
            })
            .collect();
        let excluded = spec.trials - outcomes.len();
        pass &= excluded * 100 <= spec.trials;
        let means: Vec<f64> = (0..4).map(|s| mean_stderr(&outcomes.iter().map(|o| o[s]).collect::<Vec<_>>()).0).collect();
        let mut line = format!("K={k}: means");
        for (name, m) in names.iter().zip(&means) {
            line.push_str(&format!(" {name}={m:.4e}"));
        }
        for s in 0..3 {
            let diffs: Vec<f64> = outcomes.iter().map(|o| o[s] - o[s + 1]).collect();
            let (gap, se) = mean_stderr(&diffs);
            pass &= gap > 2.0 * se;
            line.push_str(&format!("; {}-{} gap={gap:.3e} ({:.1} SE)", names[s], names[s + 1], gap / se));
        }
        details.push(line);
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(900);
    report.record(9, "design NMSE ordering at 10 dB", pass, details.join(" | "), elapsed);
}

fn acceleration(report: &mut Report) {
    let start = Instant::now();
    let spec = ExperimentSpec {
        scenario: Scenario::Rayleigh,
        num_ris: 2,
        nx: 4,
        ny: 1,
        snr_grid_db: vec![0.0],
        trials: 20,
        offset_model: OffsetModel::Uniform,
        algorithm: Algorithm::Alg3,
        seed: 10,
        paths_per_ris: 3,
        pulse: PulseConfig::default(),
    };
    let mut pass = true;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut iters = (0, 0);
    for t in 0..spec.trials {
        let tr = run_convergence(&spec, t).unwrap();
        let target = tr.alg2.final_objective();
        let reach = tr.alg3.objective_trace.iter().position(|&v| v <= target * 1.01);
        pass &= matches!(reach, Some(i) if i <= tr.alg2.iterations);
        worst_excess = worst_excess.max(tr.alg3.final_objective() - target);
        iters.0 += tr.alg2.iterations;
        iters.1 += tr.alg3.iterations;
    }
    pass &= worst_excess <= 1e-6;
    report.record(
        10,
        "SQUAREM acceleration",
        pass,
        format!(
            "max (alg3 final - alg2 final) = {worst_excess:.2e}; mean iterations alg2 = {:.1}, alg3 = {:.1}",
            iters.0 as f64 / spec.trials as f64,
            iters.1 as f64 / spec.trials as f64
        ),
        start.elapsed(),
    );
}

fn determinism(report: &mut Report) {
    let start = Instant::now();
    let spec = ExperimentSpec {
        scenario: Scenario::Mmwave,
        num_ris: 2,
        nx: 2,
        ny: 2,
        snr_grid_db: vec![0.0, 15.0],
        trials: 8,
        offset_model: OffsetModel::CommonPlusDelta { delta_max: 0.2 },
        algorithm: Algorithm::Alg3,
        seed: 11,
        paths_per_ris: 2,
        pulse: PulseConfig::default(),
    };
    let csv = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let rows = pool.install(|| run_estimation_sweep(&spec)).unwrap();
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        buf
    };
    let (a, b, c) = (csv(1), csv(1), csv(4));
    report.record(
        11,
        "byte-identical sweep output",
        a == b && a == c && !a.is_empty(),
        format!("{} bytes, repeat identical = {}, 4-thread identical = {}", a.len(), a == b, a == c),
        start.elapsed(),
    );
}

fn main() {
    let mut report = Report { failures: 0 };
    noiseless_recovery(&mut report);
    crlb_cross_validation(&mut report);
    efficiency_and_timing(&mut report);
    reformulation_equivalence(&mut report);
    equalizer_stationarity(&mut report);
    mm_descent_and_surrogate(&mut report);
    phase_update_optimality(&mut report);
    design_ordering(&mut report);
    acceleration(&mut report);
    determinism(&mut report);
    if report.failures > 0 {
        println!("{} acceptance criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
