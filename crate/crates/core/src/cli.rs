//! Batch runner behind the `sgmcert` binary.
//!
//! Every subcommand reads one TOML config, writes its reports into `--out`
//! and prints a short summary. Reports embed the resolved config and the
//! master seed, and contain nothing that varies between runs, so identical
//! inputs give byte-identical files. Exit codes: 0 success, 1 a bound or
//! lemma was violated (or the run failed), 2 a configuration error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::bounds::{table1_budget, table2_budget, theorem1_bound, theorem2_bound, Theorem1Params, Theorem2Params};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::gaussian::{affine_constants, w2_gaussian, GaussianProblem};
use crate::metrics::w2_gaussian_fit;
use crate::ou::{OuSchedule, TimeGrid};
use crate::rng;
use crate::sampler::{em_backward_run, em_exact_moments, EmRunConfig, Horizon};
use crate::score::AffineFamily;
use crate::score_matching::{sgld_error_bound, sgld_replicas, sgld_run, sgld_second_moment_bound, SgldConfig};
use crate::stats::{McEstimate, Verdict};
use crate::verify::{self, empirical_w2, GaussianCheckConfig, GaussianExperiment, LemmaId, SuiteConfig};

/// Environment variable that caps the worker threads when `--threads` is absent.
pub const THREADS_ENV: &str = "SGMCERT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sgmcert", version, about = "Score-based generative model simulation and W2 bound certification")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(short, long, global = true, default_value = "sgmcert.toml")]
    pub config: PathBuf,
    /// Report directory.
    #[arg(short, long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    T1,
    T2,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimizer replicas; writes the trajectory CSV.
    Optimize,
    /// Backward sampler; writes terminal samples as CSV.
    Sample,
    /// Evaluates a bound at the configured parameters.
    Bound {
        #[arg(value_enum)]
        which: Which,
    },
    /// Parameters that guarantee a target accuracy.
    Budget {
        #[arg(value_enum)]
        which: Which,
        #[arg(long)]
        delta: f64,
    },
    /// Monte Carlo checks of the lemmas and theorems.
    Verify {
        /// A check id (B1..B7, C1, C2, C3cor, C4, A-identity, T1, T2) or `all`.
        #[arg(default_value = "all")]
        id: String,
    },
    /// Budget, optimize, sample and compare the sampler's W2 with `delta`.
    E2e {
        #[arg(long)]
        delta: f64,
    },
}

/// Outcome of a subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Violation,
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Violation) => 1,
        Err(Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::TimeOutOfRange { .. }) => 2,
        Err(_) => 1,
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = run(&cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    exit_code(&result)
}

fn thread_cap(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return if n == 0 { Err(Error::Config("--threads must be positive".into())) } else { Ok(Some(n)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = Config::load(&cli.config)?;
    let threads = thread_cap(cli.threads)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    fs::create_dir_all(&cli.out)?;
    pool.install(|| dispatch(&cli.command, &cfg, &cli.out))
}

fn dispatch(cmd: &Command, cfg: &Config, out: &Path) -> Result<Outcome> {
    match cmd {
        Command::Optimize => optimize(cfg, out),
        Command::Sample => sample(cfg, out),
        Command::Bound { which } => bound(*which, cfg, out),
        Command::Budget { which, delta } => budget(*which, *delta, cfg, out),
        Command::Verify { id } => verify_cmd(id, cfg, out),
        Command::E2e { delta } => e2e(*delta, cfg, out),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn report(command: &str, cfg: &Config, body: serde_json::Value) -> serde_json::Value {
    json!({
        "command": command,
        "seed": cfg.seed(),
        "config": cfg,
        "result": body,
    })
}

fn problem(cfg: &Config) -> Result<GaussianProblem> {
    GaussianProblem::new(cfg.problem.mu.clone())
}

fn schedule(cfg: &Config) -> Result<OuSchedule> {
    OuSchedule::new(cfg.schedule.horizon, cfg.schedule.epsilon)
}

fn sgld_config(cfg: &Config) -> Result<SgldConfig> {
    SgldConfig::new(schedule(cfg)?, problem(cfg)?, cfg.sgld.lambda, cfg.sgld.beta, cfg.sgld.n_iters, cfg.theta0())
}

fn optimize(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut cps = cfg.checkpoints();
    cps.retain(|&n| n <= cfg.sgld.n_iters);
    let sgld = sgld_config(cfg)?.with_checkpoints(cps);
    let runs = sgld_replicas(&sgld, cfg.seed(), cfg.sgld.n_replicas)?;
    let d = cfg.d();

    let mut csv = String::from("replica,n");
    for j in 0..d {
        csv.push_str(&format!(",theta_{j}"));
    }
    csv.push('\n');
    for (r, run) in runs.iter().enumerate() {
        for cp in &run.checkpoints {
            csv.push_str(&format!("{r},{}", cp.n));
            for v in &cp.theta {
                csv.push_str(&format!(",{v:?}"));
            }
            csv.push('\n');
        }
    }
    fs::write(out.join("optimize.csv"), csv)?;

    let e0 = sgld.e0();
    let mu = sgld.problem.theta_star().to_vec();
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (c, &n) in sgld.checkpoints.iter().enumerate() {
        let err: Vec<f64> = runs.iter().map(|r| crate::gaussian::dist_sq(&r.checkpoints[c].theta, &mu)).collect();
        let est = McEstimate::from_samples(&err, cfg.seed());
        let bound = sgld_error_bound(&sgld, n, e0);
        let v = if runs.len() > 1 { verify::inequality_verdict(&est, bound.into()) } else { Verdict::Inconclusive };
        verdicts.push(v);
        rows.push(json!({
            "n": n,
            "mean_sq_error": est,
            "error_bound": bound,
            "second_moment_bound": sgld_second_moment_bound(&sgld, n, e0),
            "verdict": v,
        }));
    }
    let verdict = verify::combine(verdicts);
    let body = json!({
        "n_replicas": runs.len(),
        "constants": sgld.constants(),
        "tau_moments": sgld.moments(),
        "checkpoints": rows,
        "final_theta": runs.iter().map(|r| r.theta.clone()).collect::<Vec<_>>(),
        "verdict": verdict,
    });
    write_json(&out.join("optimize.json"), &report("optimize", cfg, body))?;
    println!("optimize: {} replicas x {} iterations, error bound verdict {}", runs.len(), cfg.sgld.n_iters, verdict.as_str());
    Ok(outcome(verdict))
}

fn outcome(v: Verdict) -> Outcome {
    if v == Verdict::Fail {
        Outcome::Violation
    } else {
        Outcome::Pass
    }
}

fn sample(cfg: &Config, out: &Path) -> Result<Outcome> {
    let prob = problem(cfg)?;
    let sched = schedule(cfg)?;
    let theta_hat = match &cfg.sampler.theta_hat {
        Some(t) => t.clone(),
        None => sgld_run(&sgld_config(cfg)?, &mut rng::stream(cfg.seed(), "sgld", 0))?.theta,
    };
    let horizon = cfg.sampler.horizon;
    let run_cfg = EmRunConfig::new(sched, cfg.schedule.gamma, theta_hat.clone(), cfg.sampler.n_paths, cfg.seed(), horizon)?;
    let samples = em_backward_run(&run_cfg, &AffineFamily::new(cfg.d()))?;
    let mut buf = Vec::new();
    samples.write_csv(&mut buf)?;
    fs::write(out.join("samples.csv"), buf)?;

    let id = DMatrix::identity(cfg.d(), cfg.d());
    let exact = em_exact_moments(&run_cfg);
    let last = exact.last().expect("at least the initial law");
    let w2_exact = w2_gaussian(&last.mean, &last.covariance(), prob.mu(), &id)?;
    let w2_fit = w2_gaussian_fit(&samples, prob.mu(), &id)?;
    let body = json!({
        "theta_hat": theta_hat,
        "horizon": horizon,
        "gamma": run_cfg.grid.gamma(),
        "n_steps": run_cfg.grid.n_steps(),
        "n_paths": samples.len(),
        "n_diverged": samples.n_diverged,
        "sample_mean": samples.mean(),
        "w2_fit": w2_fit,
        "w2_exact_law": w2_exact,
    });
    write_json(&out.join("sample.json"), &report("sample", cfg, body))?;
    println!("sample: {} paths, W2 to target {w2_fit:.6} (fitted), {w2_exact:.6} (exact law)", samples.len());
    Ok(Outcome::Pass)
}

fn theorem1_params(cfg: &Config) -> Result<Theorem1Params> {
    let sgld = sgld_config(cfg)?;
    Theorem1Params::for_problem(
        &sgld.problem,
        cfg.schedule.horizon,
        cfg.sgld.beta,
        cfg.sgld.lambda,
        cfg.sgld.n_iters,
        cfg.schedule.gamma,
        sgld.e0(),
    )
}

/// General-bound parameters: configured constants where given, otherwise the
/// affine family on the Gaussian example with the optimizer bounds plugged in.
/// `general.e_theta4` has no default: nothing bounds the fourth moment of
/// the optimizer output, so it must be supplied.
pub fn theorem2_params(cfg: &Config) -> Result<Theorem2Params> {
    let sgld = sgld_config(cfg)?;
    let prob = &sgld.problem;
    let g = &cfg.general;
    let k = affine_constants(prob);
    let n = cfg.sgld.n_iters;
    let e0 = sgld.e0();
    let eps_al = g.eps_al.unwrap_or_else(|| sgld_error_bound(&sgld, n, e0));
    let e_theta4 = g
        .e_theta4
        .ok_or_else(|| Error::Config("general.e_theta4 (E|theta_hat|^4) is required for the general bound".into()))?;
    let mut p = verify::gaussian_theorem2_params(prob, &sgld.schedule, eps_al, e_theta4, g.zeta, g.nu, cfg.schedule.gamma)?;
    p.m = cfg.problem.m.unwrap_or(p.m);
    p.alpha = g.alpha.unwrap_or(k.alpha);
    p.l_mo = g.l_mo.unwrap_or(k.l_mo);
    p.k1 = g.k1.unwrap_or(k.k1);
    p.k2 = g.k2.unwrap_or(k.k2);
    p.k3 = g.k3.unwrap_or(k.k3);
    p.k4 = g.k4.unwrap_or(k.k4);
    p.k_total = p.k1 + p.k2 + p.k3 + g.s000.unwrap_or(0.0);
    if let Some(e) = g.eps_sn {
        p.eps_sn = e;
    }
    p.validate()?;
    Ok(p)
}

fn bound(which: Which, cfg: &Config, out: &Path) -> Result<Outcome> {
    let (name, rep) = match which {
        Which::T1 => ("bound_t1.json", theorem1_bound(&theorem1_params(cfg)?)?),
        Which::T2 => ("bound_t2.json", theorem2_bound(&theorem2_params(cfg)?)?),
    };
    write_json(&out.join(name), &report("bound", cfg, serde_json::to_value(&rep).expect("report serializes")))?;
    println!("bound {}: total {}", rep.bound, rep.total());
    for (n, v) in rep.terms() {
        println!("  {n:<12} {v}");
    }
    Ok(Outcome::Pass)
}

fn budget(which: Which, delta: f64, cfg: &Config, out: &Path) -> Result<Outcome> {
    let (name, body) = match which {
        Which::T1 => {
            let sgld = sgld_config(cfg)?;
            let b = table1_budget(delta, &sgld.problem, sgld.e0(), cfg.e2e.t_margin)?;
            ("budget_t1.json", serde_json::to_value(b).expect("budget serializes"))
        }
        Which::T2 => {
            let b = table2_budget(delta, &theorem2_params(cfg)?)?;
            ("budget_t2.json", serde_json::to_value(b).expect("budget serializes"))
        }
    };
    write_json(&out.join(name), &report("budget", cfg, body.clone()))?;
    println!("budget: {}", serde_json::to_string(&body).expect("json"));
    Ok(Outcome::Pass)
}

/// Suite settings derived from a config.
pub fn suite_config(cfg: &Config) -> SuiteConfig {
    SuiteConfig {
        experiment: GaussianCheckConfig {
            mu: cfg.problem.mu.clone(),
            horizon: cfg.schedule.horizon,
            epsilon: cfg.schedule.epsilon,
            lambda: cfg.sgld.lambda,
            beta: cfg.sgld.beta,
            n_iters: cfg.sgld.n_iters,
            theta0: cfg.theta0(),
            checkpoints: cfg.sgld.checkpoints.clone().unwrap_or_else(|| vec![10, 50, 100, 500]),
            n_replicas: cfg.sgld.n_replicas,
            paths_per_replica: cfg.verify.paths_per_replica,
            zeta: cfg.general.zeta,
            nu: cfg.general.nu,
            seed: cfg.seed(),
            fixed_theta_hat: None,
        },
        gammas: cfg.verify.gammas.clone(),
        powers: cfg.verify.powers.clone(),
        b1_dims: cfg.verify.b1_dims.clone(),
        b1_trials: cfg.verify.b1_trials,
        denoise_samples: cfg.verify.mc_samples,
        theorem_gamma: cfg.schedule.gamma,
        theorem_paths: cfg.sampler.n_paths,
        c_trials: cfg.verify.c_trials,
    }
}

fn verify_cmd(id: &str, cfg: &Config, out: &Path) -> Result<Outcome> {
    let ids: Vec<LemmaId> = if id.eq_ignore_ascii_case("all") { LemmaId::ALL.to_vec() } else { vec![id.parse()?] };
    let checks = verify::run_suite(&ids, &suite_config(cfg))?;
    let verdict = verify::combine(checks.iter().map(|c| c.verdict));
    let body = json!({ "checks": checks, "verdict": verdict });
    write_json(&out.join("verify.json"), &report("verify", cfg, body))?;
    print!("{}", verify::render_table(&checks));
    println!("verify: {}", verdict.as_str());
    Ok(outcome(verdict))
}

fn e2e(delta: f64, cfg: &Config, out: &Path) -> Result<Outcome> {
    let prob = problem(cfg)?;
    let theta0 = cfg.theta0();
    let e0 = crate::gaussian::dist_sq(&theta0, prob.theta_star());
    let budget = table1_budget(delta, &prob, e0, cfg.e2e.t_margin)?;
    let horizon = budget.horizon;
    let beta = budget.beta_delta.min(cfg.e2e.beta_cap);
    let n_iters = budget.n_delta.ceil() as u64;
    let grid = TimeGrid::covering(budget.gamma_delta, horizon)?;
    let exp_cfg = GaussianCheckConfig {
        mu: cfg.problem.mu.clone(),
        horizon,
        epsilon: 0.0,
        lambda: budget.lambda_delta,
        beta,
        n_iters,
        theta0,
        checkpoints: Vec::new(),
        n_replicas: cfg.e2e.n_replicas,
        paths_per_replica: cfg.e2e.n_paths,
        zeta: cfg.general.zeta,
        nu: cfg.general.nu,
        seed: cfg.seed(),
        fixed_theta_hat: None,
    };
    let exp = GaussianExperiment::new(exp_cfg)?;
    let params = Theorem1Params::for_problem(&prob, horizon, beta, budget.lambda_delta, n_iters, grid.gamma(), e0)?;
    let bound = theorem1_bound(&params)?;
    let w = empirical_w2(&exp, grid, Horizon::Full, cfg.e2e.n_paths, rng::derive_seed(cfg.seed(), "e2e", 0))?;
    let upper = w.w2.upper();
    let within_delta = upper < delta;
    let within_bound = bound.total() >= upper.into();
    let verdict = if w.n_diverged > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(within_delta && within_bound)
    };
    let body = json!({
        "delta": delta,
        "budget": budget,
        "used": {
            "horizon": horizon,
            "beta": beta,
            "beta_capped": beta < budget.beta_delta,
            "lambda": budget.lambda_delta,
            "n_iters": n_iters,
            "gamma": grid.gamma(),
            "n_steps": grid.n_steps(),
            "n_replicas": cfg.e2e.n_replicas,
            "n_paths": cfg.e2e.n_paths,
        },
        "bound": bound,
        "bound_within_delta": bound.total() < delta.into(),
        "total_w2": w.w2.mean,
        "total_w2_upper": upper,
        "w2": w,
        "final_theta": exp.theta_hats(),
        "within_delta": within_delta,
        "within_bound": within_bound,
        "verdict": verdict,
    });
    write_json(&out.join("e2e.json"), &report("e2e", cfg, body))?;
    println!(
        "e2e: delta {delta}, W2 {:.6} (upper {:.6}), bound {}, verdict {}",
        w.w2.mean,
        upper,
        bound.total(),
        verdict.as_str()
    );
    Ok(if verdict == Verdict::Fail { Outcome::Violation } else { Outcome::Pass })
}
