//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Tolerances are fixed here and are not tuned to the results. Criteria that
//! do not reproduce are reported as FAIL rather than relaxed.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use qhmc_core::integrators::{leapfrog_path, leapfrog_step, PathConfig};
use qhmc_core::samplers::SamplerConfig;
use qhmc_core::targets::{QuadraticTarget, Target};
use qhmc_core::{MassMatrix, MassSpec};
use qhmc_harness::config::{BridgeParams, DenoiseExperiment, DoubleWellParams, IllGaussianParams, LpParams, MixtureParams, QsgnhtParams};
use qhmc_harness::{run_experiment, Experiment, ExperimentConfig, ExperimentOutput, RunSpec};

enum Verdict {
    Pass,
    Fail,
    Skip,
    Declared,
}

struct Line {
    id: &'static str,
    title: &'static str,
    verdict: Verdict,
    detail: String,
    elapsed: Duration,
}

fn check(id: &'static str, title: &'static str, f: impl FnOnce() -> (Verdict, String)) -> Line {
    let start = Instant::now();
    let (verdict, detail) = f();
    Line {
        id,
        title,
        verdict,
        detail,
        elapsed: start.elapsed(),
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn run(label: &str, mass: MassSpec, n_paths: usize) -> RunSpec {
    RunSpec {
        label: label.into(),
        sampler: SamplerConfig::new(PathConfig::default(), mass, n_paths),
    }
}

fn experiment(experiment: Experiment, runs: Vec<RunSpec>, repetitions: usize) -> ExperimentOutput {
    let mut config = ExperimentConfig::new(experiment);
    config.runs = runs;
    config.repetitions = repetitions;
    run_experiment(&config).expect("experiment runs")
}

fn metric(out: &ExperimentOutput, label: &str, rep: usize, f: impl Fn(&qhmc_harness::RunMetrics) -> Option<f64>) -> f64 {
    f(&out.run(label, rep).unwrap_or_else(|| panic!("missing run {label}")).metrics).unwrap_or(f64::NAN)
}

fn harmonic_energy_error(eps: f64) -> f64 {
    let target = QuadraticTarget::scalar(1.0);
    let m = MassMatrix::scalar(1.0).unwrap();
    let (mut x, mut q) = ([1.0], [0.0]);
    let h0 = target.potential(&x) + 0.5 * q[0] * q[0];
    let mut grad = [0.0];
    target.gradient_into(&x, &mut grad);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        leapfrog_step(&target, &mut x, &mut q, &mut grad, &m, eps);
        worst = worst.max((target.potential(&x) + 0.5 * q[0] * q[0] - h0).abs());
    }
    worst
}

fn c1() -> (Verdict, String) {
    let start = Instant::now();
    let ratio = harmonic_energy_error(0.1) / harmonic_energy_error(0.05);
    let fast = start.elapsed() < Duration::from_secs(1);
    (verdict((3.5..=4.5).contains(&ratio) && fast), format!("max|ΔH| ratio {ratio:.3} (band [3.5, 4.5])"))
}

fn c2() -> (Verdict, String) {
    let start = Instant::now();
    let target = QuadraticTarget::scalar(16.0);
    let heavy = leapfrog_path(&target, &[1.0], &[0.0], &MassMatrix::scalar(4.5e-3).unwrap(), 0.03, 10_000);
    let light = leapfrog_path(&target, &[1.0], &[0.0], &MassMatrix::scalar(2.7e-3).unwrap(), 0.03, 10_000);
    let bounded = !heavy.divergent && heavy.position[0].abs() <= 10.0;
    let fast = start.elapsed() < Duration::from_secs(1);
    (
        verdict(bounded && light.divergent && fast),
        format!(
            "m=4.5e-3 divergent={} |x_end|={:.3}; m=2.7e-3 divergent={}",
            heavy.divergent,
            heavy.position[0].abs(),
            light.divergent
        ),
    )
}

fn c3() -> (Verdict, String) {
    let mus = [-2.0, 0.0, 2.0];
    let runs = mus
        .iter()
        .map(|&mu| run(&format!("mu{mu}"), MassSpec::scalar_log_normal(mu, 1.0).unwrap(), 200_000))
        .collect();
    let out = experiment(Experiment::Lp1d(LpParams::default()), runs, 1);
    let w: Vec<f64> = mus.iter().map(|mu| metric(&out, &format!("mu{mu}"), 0, |m| m.w1)).collect();
    (
        verdict(w.iter().all(|&v| v <= 0.05)),
        format!("W1 at μ_m=-2/0/2: {:.4}/{:.4}/{:.4} (each ≤ 0.05)", w[0], w[1], w[2]),
    )
}

fn c4() -> (Verdict, String) {
    let out = experiment(
        Experiment::Lp1d(LpParams {
            p: 0.1,
            lambda: 20.0,
            start: 0.1,
        }),
        vec![
            run("s-qhmc", MassSpec::scalar_log_normal(0.0, 2.0).unwrap(), 50_000),
            run("hmc-light", MassSpec::fixed_scalar(1e-2).unwrap(), 50_000),
            run("hmc-heavy", MassSpec::fixed_scalar(1e2).unwrap(), 50_000),
        ],
        1,
    );
    let q = metric(&out, "s-qhmc", 0, |m| m.w1);
    let light = metric(&out, "hmc-light", 0, |m| m.w1);
    let heavy = metric(&out, "hmc-heavy", 0, |m| m.w1);
    let worst = light.max(heavy);
    (
        verdict(q <= 0.1 * worst),
        format!("S-QHMC W1 {q:.4} vs worst HMC {worst:.4} (m=1e-2: {light:.4}, m=1e2: {heavy:.4}); need ≤ 0.1×"),
    )
}

fn c5() -> (Verdict, String) {
    let runs = [0.0, 1.0, 2.0]
        .iter()
        .map(|&s| run(&format!("sigma{s}"), MassSpec::scalar_log_normal(1.0, s).unwrap(), 2500))
        .collect();
    let out = experiment(Experiment::DoubleWell(DoubleWellParams::default()), runs, 1);
    let e: Vec<f64> = ["sigma0", "sigma1", "sigma2"]
        .iter()
        .map(|l| metric(&out, l, 0, |m| m.escape.as_ref().map(|c| c.final_fraction())))
        .collect();
    (
        verdict(e[2] - e[1] >= 0.05 && e[1] - e[0] >= 0.05),
        format!("escape fraction σ_m=2/1/0: {:.3}/{:.3}/{:.3} (gaps ≥ 0.05)", e[2], e[1], e[0]),
    )
}

fn c6() -> (Verdict, String) {
    let out = experiment(
        Experiment::IllGaussian(IllGaussianParams::default()),
        vec![
            run("d-qhmc", MassSpec::diagonal_log_normal(vec![-3.0, -1.0], vec![1.0, 1.0]).unwrap(), 10_000),
            run("s-qhmc", MassSpec::scalar_log_normal(-2.0, 1.0).unwrap(), 10_000),
        ],
        1,
    );
    let var = |label: &str| -> Vec<f64> { out.run(label, 0).unwrap().metrics.variance.iter().map(|v| v.unwrap_or(f64::NAN)).collect() };
    let rel = |v: &[f64]| [(v[0] / 100.0 - 1.0).abs(), (v[1] - 1.0).abs()];
    let (d, s) = (var("d-qhmc"), var("s-qhmc"));
    let (rd, rs) = (rel(&d), rel(&s));
    let d_ok = rd.iter().all(|&r| r <= 0.15);
    let s_off = rs.iter().any(|&r| r > 0.25);
    (
        verdict(d_ok && s_off),
        format!(
            "D-QHMC var ({:.2}, {:.3}) within ±15%: {d_ok}; S-QHMC var ({:.2}, {:.3}) off by >25%: {s_off} (max rel. error {:.3})",
            d[0],
            d[1],
            s[0],
            s[1],
            rs[0].max(rs[1])
        ),
    )
}

fn c7() -> (Verdict, String) {
    let m1 = MassMatrix::diagonal(vec![0.1, 0.001]).unwrap();
    let m2 = MassMatrix::diagonal(vec![0.001, 0.1]).unwrap();
    let out = experiment(
        Experiment::Gmm2d(MixtureParams::default()),
        vec![
            run("m-qhmc", MassSpec::mixture(vec![0.5, 0.5], vec![m1, m2]).unwrap(), 20_000),
            run("hmc", MassSpec::fixed_scalar(0.02).unwrap(), 20_000),
        ],
        1,
    );
    let fr = |label: &str| out.run(label, 0).unwrap().metrics.mode_fractions.clone().unwrap();
    let (m, h) = (fr("m-qhmc"), fr("hmc"));
    let m_ok = m.iter().all(|&f| (0.35..=0.65).contains(&f));
    let h_stuck = h.iter().any(|&f| f < 0.15);
    (
        verdict(m_ok && h_stuck),
        format!(
            "M-QHMC modes ({:.3}, {:.3}) in [0.35, 0.65]: {m_ok}; HMC m=0.02 modes ({:.3}, {:.3}) one < 0.15: {h_stuck}",
            m[0], m[1], h[0], h[1]
        ),
    )
}

fn c8() -> (Verdict, String) {
    let params = QsgnhtParams::default();
    let runs = Experiment::QsgnhtGauss(params.clone()).default_runs();
    let out = experiment(Experiment::QsgnhtGauss(params), runs, 1);
    let v = |label: &str| metric(&out, label, 0, |m| m.variance[0]);
    let (thermo, naive) = (v("qsgnht"), v("no-thermostat"));
    (
        verdict((thermo - 1.0).abs() <= 0.10 && (naive - 1.0).abs() > 0.15),
        format!("QSGNHT variance {thermo:.3} (±10% of 1); no-thermostat control {naive:.3} (off by >15%)"),
    )
}

fn diabetes_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/diabetes.tab.txt")
}

fn c9() -> (Verdict, String) {
    let data = diabetes_path();
    if !data.is_file() {
        return (
            Verdict::Skip,
            format!(
                "diabetes table not found at {}; expected a tab-separated file with header AGE SEX BMI BP S1 S2 S3 S4 S5 S6 Y",
                data.display()
            ),
        );
    }
    let seeds = 5;
    let mean_mse = |lambda: f64| -> (f64, f64) {
        let params = BridgeParams {
            data: data.clone(),
            lambda,
            mu: 100.0,
            ..BridgeParams::default()
        };
        let experiment = Experiment::Bridge(params);
        let runs = experiment.default_runs();
        let mut config = ExperimentConfig::new(experiment);
        config.runs = runs;
        config.repetitions = seeds;
        let out = run_experiment(&config).expect("bridge runs");
        let avg = |label: &str| out.runs_labelled(label).map(|r| r.metrics.test_mse.unwrap_or(f64::INFINITY)).sum::<f64>() / seeds as f64;
        (avg("hmc"), avg("s-qhmc"))
    };
    let (h10, q10) = mean_mse(10.0);
    let (h100, q100) = mean_mse(100.0);
    let (h1000, q1000) = mean_mse(1000.0);
    let band = (0.23..=0.33).contains(&q10);
    (
        verdict(band && q100 <= h100 && q1000 <= h1000),
        format!(
            "mean test MSE over {seeds} splits, HMC/S-QHMC: λ=10 {h10:.3}/{q10:.3} (S-QHMC in [0.23, 0.33]: {band}); \
             λ=100 {h100:.3}/{q100:.3}; λ=1000 {h1000:.3}/{q1000:.3} (S-QHMC ≤ HMC)"
        ),
    )
}

fn c10() -> (Verdict, String) {
    let params = DenoiseExperiment::default();
    let experiment = Experiment::Denoise(params);
    let runs = experiment.default_runs();
    let out = self::experiment(experiment, runs, 1);
    let spread = |prefix: &str| {
        let v: Vec<f64> = [0.0, 1.0, 2.0].iter().map(|mu| metric(&out, &format!("{prefix}-mu{mu}"), 0, |m| m.psnr)).collect();
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        (v, hi - lo)
    };
    let (q, qs) = spread("s-qhmc");
    let (h, hs) = spread("hmc");
    let accept = out.runs.iter().map(|r| r.metrics.acceptance_rate.unwrap_or(0.0)).fold(0.0, f64::max);
    (
        verdict(qs <= 1.5 && hs >= 4.0),
        format!(
            "PSNR μ_m=0/1/2 S-QHMC {:.2}/{:.2}/{:.2} (spread {qs:.2} ≤ 1.5), HMC {:.2}/{:.2}/{:.2} (spread {hs:.2} ≥ 4); \
             highest acceptance rate {accept:.3}",
            q[0], q[1], q[2], h[0], h[1], h[2]
        ),
    )
}

fn c11() -> (Verdict, String) {
    (
        Verdict::Declared,
        "MNIST pruning accuracies and NUTS/RMHMC CPU-time comparisons are not reproduced; \
         the thermostat is covered by C8 and the compression rate by its unit oracle"
            .into(),
    )
}

fn main() {
    let lines = [
        check("C1", "integrator order", c1),
        check("C2", "stability threshold", c2),
        check("C3", "l1 robustness", c3),
        check("C4", "spiky failure contrast", c4),
        check("C5", "double-well tunneling", c5),
        check("C6", "ill-conditioned Gaussian", c6),
        check("C7", "Gaussian mixture", c7),
        check("C8", "QSGNHT correctness", c8),
        check("C9", "bridge regression", c9),
        check("C10", "denoising robustness", c10),
        check("C11", "desk-scale exclusions", c11),
    ];
    let mut failed = 0;
    for line in &lines {
        let tag = match line.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
            Verdict::Declared => "DECLARED",
        };
        println!("{:<4} {:<8} {}: {} [{:.1}s]", line.id, tag, line.title, line.detail, line.elapsed.as_secs_f64());
    }
    let passed = lines.iter().filter(|l| matches!(l.verdict, Verdict::Pass)).count();
    println!("acceptance: {passed} passed, {failed} failed, {} not scored", lines.len() - passed - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
