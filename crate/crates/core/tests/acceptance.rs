//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints its line even when output capture is on; exits non-zero if any
//! criterion fails.

mod common;

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use sgmcert::metrics::w2_gaussian_fit;
use sgmcert::sampler::{em_backward_run, em_exact_moments, ideal_backward_moments, EmRunConfig, Horizon};
use sgmcert::stats::{log_log_slope, Verdict};
use sgmcert::verify::{
    self, check_a_identity, check_prop_b1, check_sgld, check_theorem, combine, run_suite, GaussianCheckConfig, GaussianExperiment,
    LemmaCheck, LemmaId, SuiteConfig,
};
use sgmcert::gaussian::w2_gaussian;
use sgmcert::{rng, AffineFamily, GaussianProblem, OuSchedule};

const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn failed_checks(checks: &[LemmaCheck]) -> Vec<String> {
    checks
        .iter()
        .filter(|c| c.verdict != Verdict::Pass)
        .map(|c| format!("{} {} {}", c.lemma_id, c.label, c.verdict.as_str()))
        .collect()
}

fn summarize(checks: &[LemmaCheck]) -> Outcome {
    let bad = failed_checks(checks);
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() { format!("{} checks pass", checks.len()) } else { bad.join("; ") },
    }
}

fn exact_identities() -> sgmcert::Result<Outcome> {
    let checks = [1, 3, 10]
        .iter()
        .map(|&d| check_prop_b1(d, 100_000, rng::derive_seed(SEED, "acc-b1", d as u64)))
        .collect::<sgmcert::Result<Vec<_>>>()?;
    let worst = checks.iter().map(|c| c.lhs.value()).fold(0.0, f64::max);
    let mut o = summarize(&checks);
    o.detail = format!("{}, worst relative error {worst:.2e}", o.detail);
    Ok(o)
}

fn score_matching_consistency() -> sgmcert::Result<Outcome> {
    let cfg = GaussianCheckConfig { fixed_theta_hat: Some(vec![1.0]), n_replicas: 2, ..GaussianCheckConfig::example(1, SEED) };
    let exp = GaussianExperiment::new(cfg)?;
    let c = check_a_identity(&exp, 1_000_000)?;
    let est = match c.lhs {
        verify::Lhs::Estimate(e) => e,
        verify::Lhs::Exact(_) => unreachable!("identity check is a Monte Carlo estimate"),
    };
    Ok(Outcome {
        pass: c.verdict == Verdict::Pass,
        detail: format!("worst {}: difference {:.3e} +- {:.3e}", c.label, est.mean, est.half_width),
    })
}

fn sgld_contraction() -> sgmcert::Result<Outcome> {
    let exp = GaussianExperiment::new(GaussianCheckConfig::example(2, SEED))?;
    let checks = check_sgld(LemmaId::B2, &exp)?;
    let ns: Vec<&str> = checks.iter().map(|c| c.label.as_str()).collect();
    let mut o = summarize(&checks);
    o.detail = format!("{} at {}", o.detail, ns.join(", "));
    Ok(o)
}

fn moment_lemmas() -> sgmcert::Result<Outcome> {
    let cfg = SuiteConfig::example(2, SEED);
    let ids = [LemmaId::B4, LemmaId::B5, LemmaId::B6, LemmaId::B7, LemmaId::C1, LemmaId::C2];
    let checks = run_suite(&ids, &cfg)?;
    let b6: Vec<f64> = checks.iter().filter(|c| c.lemma_id == LemmaId::B6).map(|c| c.lhs.value()).collect();
    let slope = log_log_slope(&cfg.gammas, &b6);
    let slope_ok = (slope - 1.0).abs() <= 0.2;
    let mut o = summarize(&checks);
    o.pass &= slope_ok;
    o.detail = format!("{}; B6 slope {slope:.3} (want 1 +- 0.2)", o.detail);
    Ok(o)
}

fn sampler_rate() -> sgmcert::Result<Outcome> {
    let mu = 1.0;
    let problem = GaussianProblem::new(vec![mu])?;
    let sched = OuSchedule::new(5.0, 0.0)?;
    let target = ideal_backward_moments(5.0, &sched, &problem)?;
    let cov = target.covariance();
    let gammas = [0.2, 0.1, 0.05, 0.025];
    let mut fitted = Vec::new();
    let mut exact = Vec::new();
    for (i, &g) in gammas.iter().enumerate() {
        let cfg = EmRunConfig::new(sched, g, vec![mu], 2_000_000, rng::derive_seed(SEED, "acc-rate", i as u64), Horizon::Full)?;
        let s = em_backward_run(&cfg, &AffineFamily::new(1))?;
        fitted.push(w2_gaussian_fit(&s, &target.mean, &cov)?);
        let law = em_exact_moments(&cfg);
        let last = law.last().expect("initial law present");
        exact.push(w2_gaussian(&last.mean, &last.covariance(), &target.mean, &cov)?);
    }
    let slope = log_log_slope(&gammas, &fitted);
    let exact_slope = log_log_slope(&gammas, &exact);
    let w: Vec<String> = fitted.iter().map(|w| format!("{w:.3e}")).collect();
    Ok(Outcome {
        pass: (slope - 1.0).abs() <= 0.3,
        detail: format!("slope {slope:.3} (want 1 +- 0.3; exact-law slope {exact_slope:.3}), W2 = [{}]", w.join(", ")),
    })
}

fn theorem1_domination() -> sgmcert::Result<Outcome> {
    let mut r = rng::stream(SEED, "acc-t1-configs", 0);
    let dims = [1usize, 2, 8, 1, 2];
    let mut checks = Vec::new();
    let mut desc = Vec::new();
    for (i, &d) in dims.iter().enumerate() {
        let dir = rng::standard_normal_vec(&mut r, d);
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radius = 3.0 * r.gen::<f64>().powf(1.0 / d as f64);
        let mu: Vec<f64> = dir.iter().map(|v| radius * v / norm).collect();
        let horizon = [1.0, 2.0, 3.0][r.gen_range(0..3)];
        let gamma = [0.1, 0.05, 0.02][r.gen_range(0..3)];
        let cfg = GaussianCheckConfig {
            mu,
            horizon,
            n_replicas: 20,
            theta0: vec![0.0; d],
            ..GaussianCheckConfig::example(d, rng::derive_seed(SEED, "acc-t1", i as u64))
        };
        let exp = GaussianExperiment::new(cfg)?;
        let c = check_theorem(LemmaId::T1, &exp, gamma, 2000)?;
        desc.push(format!("d={d} |mu|={radius:.2} T={horizon} gamma={gamma}: {:.3} <= {:.3}", c.lhs.upper(), c.rhs.to_f64()));
        checks.push(c);
    }
    let verdict = combine(checks.iter().map(|c| c.verdict));
    Ok(Outcome { pass: verdict == Verdict::Pass, detail: desc.join("; ") })
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn budget_round_trip() -> sgmcert::Result<Outcome> {
    let dir = tempfile::tempdir().map_err(|e| sgmcert::Error::Io(e.to_string()))?;
    let out = Command::new(env!("CARGO_BIN_EXE_sgmcert"))
        .arg("--config")
        .arg(workspace_root().join("configs/d2.toml"))
        .arg("--out")
        .arg(dir.path())
        .args(["e2e", "--delta", "0.5"])
        .output()
        .map_err(|e| sgmcert::Error::Io(e.to_string()))?;
    let text = std::fs::read_to_string(dir.path().join("e2e.json")).map_err(|e| sgmcert::Error::Io(e.to_string()))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| sgmcert::Error::Io(e.to_string()))?;
    let r = &v["result"];
    let w2 = r["total_w2"].as_f64().unwrap_or(f64::NAN);
    let upper = r["total_w2_upper"].as_f64().unwrap_or(f64::NAN);
    let bound = r["bound"]["total"].as_f64().unwrap_or(f64::NAN);
    let pass = out.status.code() == Some(0) && w2 < 0.5 && r["bound_within_delta"] == true;
    Ok(Outcome {
        pass,
        detail: format!(
            "exit {:?}, W2 {w2:.5} (upper {upper:.5}), bound at the capped budget {bound:.4}, beta {} (capped: {}), n {}",
            out.status.code(),
            r["used"]["beta"],
            r["used"]["beta_capped"],
            r["used"]["n_iters"]
        ),
    })
}

fn theorem2_evaluator() -> sgmcert::Result<Outcome> {
    let (err, at) = common::theorem2_golden_error();
    let golden_ok = err <= 1e-10;
    let cfg = GaussianCheckConfig { epsilon: 0.05, n_replicas: 50, ..GaussianCheckConfig::example(2, SEED) };
    let exp = GaussianExperiment::new(cfg)?;
    let c = check_theorem(LemmaId::T2, &exp, 0.01, 2000)?;
    Ok(Outcome {
        pass: golden_ok && c.verdict == Verdict::Pass,
        detail: format!(
            "golden worst relative error {err:.2e} ({at}); T2 W2 upper {:.4} <= {}",
            c.lhs.upper(),
            c.rhs
        ),
    })
}

fn small_suite(seed: u64) -> SuiteConfig {
    let mut cfg = SuiteConfig::example(2, seed);
    cfg.experiment.n_replicas = 16;
    cfg.experiment.paths_per_replica = 16;
    cfg.gammas = vec![0.5, 0.1];
    cfg.b1_trials = 2000;
    cfg.denoise_samples = 20_000;
    cfg.theorem_paths = 200;
    cfg.c_trials = 100;
    cfg
}

fn suite_json(threads: usize) -> sgmcert::Result<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| sgmcert::Error::InvalidArgument(e.to_string()))?;
    let checks = pool.install(|| run_suite(&LemmaId::ALL, &small_suite(SEED)))?;
    Ok(serde_json::to_string_pretty(&checks).expect("checks serialize"))
}

fn determinism() -> sgmcert::Result<Outcome> {
    let a = suite_json(1)?;
    let b = suite_json(1)?;
    let c = suite_json(3)?;
    let dir = tempfile::tempdir().map_err(|e| sgmcert::Error::Io(e.to_string()))?;
    let mut reports = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        std::fs::create_dir_all(&out).map_err(|e| sgmcert::Error::Io(e.to_string()))?;
        for args in [&["optimize"][..], &["sample"], &["bound", "t1"], &["bound", "t2"], &["budget", "t1", "--delta", "0.5"]] {
            let status = Command::new(env!("CARGO_BIN_EXE_sgmcert"))
                .arg("--config")
                .arg(workspace_root().join("configs/d2.toml"))
                .arg("--out")
                .arg(&out)
                .args(args)
                .output()
                .map_err(|e| sgmcert::Error::Io(e.to_string()))?
                .status;
            if !status.success() {
                return Ok(Outcome { pass: false, detail: format!("{args:?} exited with {status}") });
            }
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .map_err(|e| sgmcert::Error::Io(e.to_string()))?
            .map(|e| {
                let e = e.expect("directory entry");
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("report readable"))
            })
            .collect();
        files.sort();
        reports.push(files);
    }
    let same_suite = a == b && a == c;
    let same_cli = reports[0] == reports[1];
    Ok(Outcome {
        pass: same_suite && same_cli,
        detail: format!(
            "suite JSON identical across reruns and 1/3 threads: {same_suite}; {} CLI reports identical: {same_cli}",
            reports[0].len()
        ),
    })
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, Option<Duration>, fn() -> sgmcert::Result<Outcome>);
    let criteria: [Criterion; 9] = [
        (1, "exact identities", Some(Duration::from_secs(5)), exact_identities),
        (2, "score-matching consistency", Some(Duration::from_secs(30)), score_matching_consistency),
        (3, "SGLD contraction", Some(Duration::from_secs(60)), sgld_contraction),
        (4, "moment lemmas", Some(Duration::from_secs(120)), moment_lemmas),
        (5, "sampler rate", Some(Duration::from_secs(120)), sampler_rate),
        (6, "Gaussian-example bound domination", Some(Duration::from_secs(300)), theorem1_domination),
        (7, "delta-budget round trip", Some(Duration::from_secs(300)), budget_round_trip),
        (8, "general bound evaluator", Some(Duration::from_secs(60)), theorem2_evaluator),
        (9, "determinism", None, determinism),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut all_pass = true;
    for (n, name, limit, f) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
        let took = start.elapsed();
        let in_time = limit.is_none_or(|l| took <= l);
        let pass = outcome.pass && in_time;
        all_pass &= pass;
        println!(
            "criterion {n} {name}: {} | {} | {:.1}s{}",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            took.as_secs_f64(),
            limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default()
        );
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
