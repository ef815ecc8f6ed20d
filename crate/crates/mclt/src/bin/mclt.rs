//! Command-line front end: campaign runs from config files, exact
//! enumeration, bound evaluation, Stein-equation self-checks, branching
//! process experiments, and rate fitting of existing CSVs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mclt::bounds;
use mclt::bpre::{self, EnvironmentLaw};

use mclt::distances;
use mclt::error::{Error, Result};
use mclt::experiments::{self, RateCorrection};
use mclt::models::{self, ModelSpec};
use mclt::stein;

#[derive(Parser)]
#[command(name = "mclt", about = "Martingale CLT convergence-rate laboratory")]
struct Cli {
    /// Base RNG seed; overrides seeds from config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count; overrides RAYON_NUM_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides out_dir from config files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every campaign block in a config file.
    Run {
        /// Path to a key=value config with [experiment] blocks.
        config: PathBuf,
    },
    /// Exact distances for an enumerable model at one n.
    Enumerate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Evaluate every admissible bound for a model at one (n, a).
    Bounds {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Stein-equation residual, derivative bounds, and scaled-family checks.
    SteinCheck {
        /// Number of random Lipschitz test functions.
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Branching-process moment identities and CLT rate experiment.
    Bpre {
        #[arg(long, default_value_t = 1.5)]
        m_a: f64,
        #[arg(long, default_value_t = 2.5)]
        m_b: f64,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
        /// Generation grid, comma separated.
        #[arg(long, default_value = "16,32,64,128,256")]
        n_grid: String,
    },
    /// Fit a rate exponent to one distance column of a campaign CSV.
    Fit {
        csv: PathBuf,
        /// Column to fit, e.g. K_hat or W_hat.
        #[arg(long, default_value = "W_hat")]
        column: String,
        /// Divide out a ln(n) factor before fitting.
        #[arg(long)]
        log_correction: bool,
    },
}

fn parse_model(name: &str, alpha: Option<f64>, c: Option<f64>, _delta: Option<f64>) -> Result<ModelSpec> {
    match name {
        "rademacher" => Ok(ModelSpec::rademacher()),
        "iid_gaussian" => Ok(ModelSpec::iid_gaussian()),
        "random_variance_decay" => {
            let alpha = alpha.ok_or_else(|| Error::Config("--alpha required".into()))?;
            let c = c.ok_or_else(|| Error::Config("--c required".into()))?;
            ModelSpec::random_variance_decay(alpha, c)
        }
        "heavy_tail" => {
            let delta = _delta.ok_or_else(|| Error::Config("--delta required".into()))?;
            ModelSpec::heavy_tail(delta)
        }
        other => Err(Error::Config(format!("unknown model {other:?}"))),
    }
}

fn cmd_run(path: &PathBuf, seed: Option<u64>, out: Option<&PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let mut configs = experiments::parse_config(&text)?;
    for config in &mut configs {
        if let Some(s) = seed {
            config.seed = s;
        }
        if let Some(dir) = out {
            config.out_dir = Some(dir.clone());
        }
    }
    for config in &configs {
        let records = experiments::run_campaign(config)?;
        println!(
            "campaign {} ({} cells, policy {}):",
            config.model.id(),
            records.len(),
            config.a_policy.label()
        );
        for r in &records {
            let best_bound = r
                .bound_totals
                .iter()
                .map(|(_, rep)| rep.total)
                .fold(f64::INFINITY, f64::min);
            println!(
                "  n {:>6}  K {:.5} ({:.5})  W {:.5} ({:.5})  best bound {:.5}  kw_slack {:.5}",
                r.n, r.k.value, r.k.std_error, r.w.value, r.w.std_error, best_bound, r.kw_slack
            );
        }
    }
    Ok(())
}

fn cmd_enumerate(model: &ModelSpec, n: usize) -> Result<()> {
    let law = distances::enumerate_law(model, n)?;
    let k = distances::kolmogorov_exact(&law)?;
    let w = distances::wasserstein_exact(&law)?;
    println!(
        "model {} n {}: {} atoms, K = {:.12}, W = {:.12}",
        model.id(),
        n,
        law.support.len(),
        k.value,
        w.value
    );
    Ok(())
}

fn cmd_bounds(model: &ModelSpec, n: usize, a: f64) -> Result<()> {
    let profile = match models::analytic_moments(model, n) {
        Ok(p) => p,
        Err(Error::UnsupportedProvider(_)) => models::estimate_moments(model, n, 10_000, 1)?,
        Err(e) => return Err(e),
    };
    println!("model {} n {} s_n {:.6} a {:.6}", model.id(), n, profile.s_n(), a);
    for theorem in bounds::TheoremId::all() {
        match bounds::evaluate_bound(theorem, &profile, a) {
            Ok(report) => println!(
                "  {:<22} total {:>12.6}  tail {:>10.6}  explicit {}",
                theorem.id(),
                report.total,
                report.tail_term,
                report.explicit_constants
            ),
            Err(e) => println!("  {:<22} inadmissible: {e}", theorem.id()),
        }
    }
    Ok(())
}

fn cmd_stein_check(count: usize, seed: u64) -> Result<()> {
    let mut failures = 0usize;
    for (label, f) in [
        ("identity", stein::PiecewiseLinear::identity()),
        ("abs", stein::PiecewiseLinear::abs()),
    ] {
        let solution = stein::stein_solve(&f, stein::GridSpec::default())?;
        let residual = stein::residual_max(&solution, &f);
        let check = stein::stein_bound_check(&solution, f.lipschitz());
        println!(
            "{label}: residual {:.3e}, two-sided gap {:.3e}, derivative bounds hold {}",
            residual, solution.two_sided_gap, check.all_hold
        );
        if residual > 1e-6 || !check.all_hold {
            failures += 1;
        }
    }
    for (i, f) in stein::random_lipschitz_family(seed, count).iter().enumerate() {
        let solution = stein::stein_solve(f, stein::GridSpec::default())?;
        let residual = stein::residual_max(&solution, f);
        let check = stein::stein_bound_check(&solution, f.lipschitz());
        let scaled = stein::scaled_family_check(f, 0.7, 1.3)?;
        let ok = residual <= 1e-6 && check.all_hold && scaled.all_hold;
        println!(
            "random {i}: residual {:.3e}, scaled-family error {:.3e}, ok {ok}",
            residual, scaled.identity_max_error
        );
        if !ok {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(Error::HardAssertion(format!("{failures} stein checks failed")));
    }
    Ok(())
}

fn cmd_bpre(law: EnvironmentLaw, replicates: usize, n_grid: &[usize], seed: u64) -> Result<()> {
    let env = bpre::env_moments(&law);
    println!(
        "environment: m {:.4} sigma^2 {:.4} tau^2 {:.4} mu {:.4} nu^2 {:.4}",
        env.m, env.sigma_sq, env.tau_sq, env.mu, env.nu_sq
    );
    for &z in &[1u64, 10, 100, 10_000] {
        let check = bpre::conditional_moment_check(&law, z, replicates.max(10_000), seed)?;
        println!(
            "conditional second moment at z {:>6}: sample {:.6} ({:.6})  target {:.6}  within 3 se {}",
            z, check.second_moment, check.second_moment_se, check.target, check.second_moment_within_3se
        );
    }
    let rate = bpre::clt_rate_experiment(&law, n_grid, 16, replicates, seed)?;
    for row in &rate {
        println!(
            "n {:>5}: K {:.5} ({:.5})  W {:.5} ({:.5})",
            row.n,
            row.kolmogorov.value,
            row.kolmogorov.std_error,
            row.wasserstein.value,
            row.wasserstein.std_error
        );
    }
    let points: Vec<(usize, f64)> = rate.iter().map(|r| (r.n, r.wasserstein.value)).collect();
    let fit = experiments::fit_rate(&points, RateCorrection::None)?;
    println!("W slope {:.4} +- {:.4} (r^2 {:.4})", fit.slope, fit.slope_se, fit.r_squared);
    Ok(())
}

fn cmd_fit(csv: &PathBuf, column: &str, log_correction: bool) -> Result<()> {
    let points = experiments::read_csv_column(csv, column)?;
    let correction = if log_correction { RateCorrection::Log } else { RateCorrection::None };
    let fit = experiments::fit_rate(&points, correction)?;
    println!(
        "{column}: slope {:.6} +- {:.6}, intercept {:.6}, r^2 {:.6} ({} points)",
        fit.slope,
        fit.slope_se,
        fit.intercept,
        fit.r_squared,
        points.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(1);
    match &cli.command {
        Command::Run { config } => cmd_run(config, cli.seed, cli.out.as_ref()),
        Command::Enumerate { model, n, alpha, c } => {
            cmd_enumerate(&parse_model(model, *alpha, *c, None)?, *n)
        }
        Command::Bounds { model, n, a, alpha, c, delta } => {
            cmd_bounds(&parse_model(model, *alpha, *c, *delta)?, *n, *a)
        }
        Command::SteinCheck { count } => cmd_stein_check(*count, seed),
        Command::Bpre { m_a, m_b, p, replicates, n_grid } => {
            let law = EnvironmentLaw::new(*m_a, *m_b, *p)?;
            let grid: Vec<usize> = n_grid
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad n {v:?}")))
                })
                .collect::<Result<_>>()?;
            cmd_bpre(law, *replicates, &grid, seed)
        }
        Command::Fit { csv, column, log_correction } => cmd_fit(csv, column, *log_correction),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
