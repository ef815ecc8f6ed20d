//! Supercritical branching processes in an i.i.d. random environment.
//!
//! Offspring law given environment mean m: geometric on {1, 2, ...} with
//! success 1/m, so no individual dies out and Var(Z_1 | env) = m^2 - m.
//! One generation from population z is z plus a negative binomial draw,
//! sampled through its gamma-Poisson mixture, which keeps the per
//! generation cost O(1) despite exponential population growth.

use rand_distr::{Distribution, Gamma, Poisson};

use crate::distances::{self, DistanceEstimate};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Two-point law on the offspring mean: m_a with probability p, else m_b.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvironmentLaw {
    pub m_a: f64,
    pub m_b: f64,
    pub p: f64,
}

/// Closed-form environment moments for the two-point law.
#[derive(Clone, Copy, Debug)]
pub struct EnvMoments {
    /// m = E m_0, the annealed offspring mean
    pub m: f64,
    /// sigma^2 = Var(m_0)
    pub sigma_sq: f64,
    /// tau^2 = E(Z_1 - m_0)^2 = E(m_0^2 - m_0) for geometric offspring
    pub tau_sq: f64,
    /// mu = E ln m_0
    pub mu: f64,
    /// nu^2 = Var(ln m_0)
    pub nu_sq: f64,
}

impl EnvironmentLaw {
    pub fn new(m_a: f64, m_b: f64, p: f64) -> Result<Self> {
        if !(m_a > 1.0) || !(m_b > 1.0) {
            return Err(Error::InvalidInput(format!(
                "offspring means must exceed 1, got ({m_a}, {m_b})"
            )));
        }
        if !(0.0 < p && p < 1.0) {
            return Err(Error::InvalidInput(format!("probability p = {p} outside (0, 1)")));
        }
        if m_a == m_b {
            return Err(Error::InvalidInput(
                "degenerate environment (m_a = m_b gives sigma = 0)".into(),
            ));
        }
        Ok(EnvironmentLaw { m_a, m_b, p })
    }
}

/// Closed-form m, sigma^2, tau^2, mu, nu^2 for a two-point environment.
pub fn env_moments(law: &EnvironmentLaw) -> EnvMoments {
    let (ma, mb, p) = (law.m_a, law.m_b, law.p);
    let q = 1.0 - p;
    let m = p * ma + q * mb;
    let sigma_sq = p * (ma - m) * (ma - m) + q * (mb - m) * (mb - m);
    let tau_sq = p * (ma * ma - ma) + q * (mb * mb - mb);
    let mu = p * ma.ln() + q * mb.ln();
    let nu_sq = p * (ma.ln() - mu) * (ma.ln() - mu) + q * (mb.ln() - mu) * (mb.ln() - mu);
    EnvMoments { m, sigma_sq, tau_sq, mu, nu_sq }
}

/// One population trajectory Z_0..Z_N with its environment means.
/// Populations are carried in f64; beyond 2^53 they lose integer exactness
/// and `precision_warning` is set.
#[derive(Clone, Debug)]
pub struct BprePath {
    pub generations: usize,
    pub populations: Vec<f64>,
    pub environment_means: Vec<f64>,
    pub precision_warning: bool,
}

const INTEGER_EXACT_LIMIT: f64 = 9007199254740992.0; // 2^53
const POISSON_EXACT_LIMIT: f64 = 1e9;

/// One reproduction step: z individuals, offspring mean m. Exact in law
/// via the negative-binomial / gamma-Poisson representation, with a normal
/// tail approximation once the Poisson mean dwarfs f64 resolution.
pub fn reproduction_step(z: f64, m: f64, rng: &mut CounterRng) -> f64 {
    debug_assert!(z >= 1.0 && m > 1.0);
    let q = 1.0 / m;
    // NegBinomial(z, q) = Poisson(Gamma(z, (1-q)/q))
    let lambda = Gamma::new(z, (1.0 - q) / q).expect("valid gamma").sample(rng);
    let failures = if lambda <= 0.0 {
        0.0
    } else if lambda < POISSON_EXACT_LIMIT {
        Poisson::new(lambda).expect("valid poisson").sample(rng)
    } else {
        (lambda + lambda.sqrt() * rng.standard_normal()).round().max(0.0)
    };
    z + failures
}

/// Naive per-individual geometric summation; reference implementation for
/// small populations.
pub fn reproduction_step_naive(z: u64, m: f64, rng: &mut CounterRng) -> u64 {
    let q = 1.0 / m;
    let log1mq = (1.0 - q).ln();
    let mut total = 0u64;
    for _ in 0..z {
        let u = rng.uniform_open();
        total += (u.ln() / log1mq).ceil().max(1.0) as u64;
    }
    total
}

fn draw_env(law: &EnvironmentLaw, rng: &mut CounterRng) -> f64 {
    if rng.uniform() < law.p {
        law.m_a
    } else {
        law.m_b
    }
}

/// Simulates N generations from Z_0 = 1 under a fresh environment draw per
/// generation.
pub fn simulate_bpre(law: &EnvironmentLaw, gens: usize, rng: &mut CounterRng) -> Result<BprePath> {
    if gens == 0 {
        return Err(Error::InvalidInput("need at least one generation".into()));
    }
    let mut populations = Vec::with_capacity(gens + 1);
    let mut environment_means = Vec::with_capacity(gens);
    let mut z = 1.0f64;
    let mut precision_warning = false;
    populations.push(z);
    for g in 0..gens {
        let m = draw_env(law, rng);
        environment_means.push(m);
        z = reproduction_step(z, m, rng);
        if !z.is_finite() {
            return Err(Error::PopulationOverflow { generation: g });
        }
        if z > INTEGER_EXACT_LIMIT {
            precision_warning = true;
        }
        populations.push(z);
    }
    Ok(BprePath { generations: gens, populations, environment_means, precision_warning })
}

/// The averaged Lotka-Nagaev estimator over a window and its normalized
/// statistic S_{n0,n} = (sqrt n / sigma)(m_hat - m).
#[derive(Clone, Copy, Debug)]
pub struct LotkaNagaevStat {
    pub n0: usize,
    pub n: usize,
    pub m_hat: f64,
    pub normalized: f64,
}

pub fn lotka_nagaev(
    path: &BprePath,
    n0: usize,
    n: usize,
    law: &EnvironmentLaw,
) -> Result<LotkaNagaevStat> {
    if n == 0 {
        return Err(Error::InvalidInput("window length 0".into()));
    }
    if n0 + n > path.generations {
        return Err(Error::InvalidInput(format!(
            "window n0 + n = {} exceeds path length {}",
            n0 + n,
            path.generations
        )));
    }
    let mut sum = 0.0;
    for k in n0..n0 + n {
        sum += path.populations[k + 1] / path.populations[k];
    }
    let m_hat = sum / n as f64;
    let env = env_moments(law);
    let normalized = (n as f64).sqrt() / env.sigma_sq.sqrt() * (m_hat - env.m);
    Ok(LotkaNagaevStat { n0, n, m_hat, normalized })
}

/// Monte-Carlo check of the conditional moment identity
/// E[xi_tilde^2 | F_k] = tau^2 / Z_k + sigma^2 from a fixed population z,
/// along with the martingale mean of xi_tilde itself.
#[derive(Clone, Copy, Debug)]
pub struct ConditionalMomentReport {
    pub z: u64,
    pub target: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub second_moment_within_3se: bool,
    pub mean_within_3se: bool,
}

pub fn conditional_moment_check(
    law: &EnvironmentLaw,
    z: u64,
    replicates: usize,
    seed: u64,
) -> Result<ConditionalMomentReport> {
    if z == 0 {
        return Err(Error::InvalidInput("population z must be >= 1".into()));
    }
    if replicates < 2 {
        return Err(Error::InvalidInput("need at least 2 replicates".into()));
    }
    let env = env_moments(law);
    let zf = z as f64;
    let target = env.sigma_sq + env.tau_sq / zf;
    let mut xi = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut rng = CounterRng::new(seed, &[0x636d, r as u64]);
        let m = draw_env(law, &mut rng);
        let z_next = reproduction_step(zf, m, &mut rng);
        xi.push(z_next / zf - env.m);
    }
    let nf = replicates as f64;
    let mean = xi.iter().sum::<f64>() / nf;
    let mean_var = xi.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let mean_se = (mean_var / nf).sqrt();
    let sq: Vec<f64> = xi.iter().map(|v| v * v).collect();
    let second = sq.iter().sum::<f64>() / nf;
    let sq_var = sq.iter().map(|v| (v - second) * (v - second)).sum::<f64>() / (nf - 1.0);
    let second_se = (sq_var / nf).sqrt();
    Ok(ConditionalMomentReport {
        z,
        target,
        second_moment: second,
        second_moment_se: second_se,
        mean,
        mean_se,
        second_moment_within_3se: (second - target).abs() <= 3.0 * second_se,
        mean_within_3se: mean.abs() <= 3.0 * mean_se,
    })
}

/// Distances of S_{n0,n} to the standard normal over a grid of window
/// lengths.
#[derive(Clone, Debug)]
pub struct CltRateRecord {
    pub n: usize,
    pub kolmogorov: DistanceEstimate,
    pub wasserstein: DistanceEstimate,
}

pub fn clt_rate_experiment(
    law: &EnvironmentLaw,
    n_grid: &[usize],
    n0: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<CltRateRecord>> {
    if replicates < 1000 {
        return Err(Error::Precondition(format!(
            "clt_rate_experiment needs >= 1000 replicates, got {replicates}"
        )));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("n grid must be sorted ascending".into()));
    }
    let mut out = Vec::with_capacity(n_grid.len());
    for (ni, &n) in n_grid.iter().enumerate() {
        let stats = sample_normalized_stats(law, n0, n, replicates, seed, ni as u64)?;
        let dist = distances::DiscreteDistribution::from_samples(&stats)?;
        let k = distances::kolmogorov_empirical(&dist, replicates)?;
        let w = distances::wasserstein_empirical(&stats, seed ^ 0xb00, replicates)?;
        out.push(CltRateRecord { n, kolmogorov: k, wasserstein: w });
    }
    Ok(out)
}

/// Draws `replicates` values of S_{n0,n}, one independent path each.
pub fn sample_normalized_stats(
    law: &EnvironmentLaw,
    n0: usize,
    n: usize,
    replicates: usize,
    seed: u64,
    stream_tag: u64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let gens = n0 + n;
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = CounterRng::new(seed, &[0xb9e, stream_tag, r as u64]);
            let path = simulate_bpre(law, gens, &mut rng)?;
            Ok(lotka_nagaev(&path, n0, n, law)?.normalized)
        })
        .collect()
}

/// Empirical tail of (ln Z_n - mu n)/(sqrt n nu) against a Gaussian-decay
/// envelope. Shape check only; the paper leaves the constant free.
#[derive(Clone, Debug)]
pub struct TailReport {
    pub xs: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub fitted_c: f64,
    pub monotone: bool,
}

pub fn log_growth_tail_check(
    law: &EnvironmentLaw,
    gens: usize,
    xs: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<TailReport> {
    use rayon::prelude::*;
    let env = env_moments(law);
    let x_max = env.mu * (gens as f64).sqrt() / env.nu_sq.sqrt();
    if xs.iter().any(|&x| x <= 0.0 || x > x_max) {
        return Err(Error::InvalidInput(format!("x grid must lie in (0, {x_max:.3}]")));
    }
    let standardized: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = CounterRng::new(seed, &[0x7a11, r as u64]);
            let path = simulate_bpre(law, gens, &mut rng)?;
            let z_n = *path.populations.last().unwrap();
            Ok((z_n.ln() - env.mu * gens as f64).abs() / ((gens as f64).sqrt() * env.nu_sq.sqrt()))
        })
        .collect::<Result<_>>()?;
    let nf = replicates as f64;
    let probabilities: Vec<f64> = xs
        .iter()
        .map(|&x| standardized.iter().filter(|&&s| s >= x).count() as f64 / nf)
        .collect();
    // Least squares of -ln p on x^2 through the origin.
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &p) in xs.iter().zip(&probabilities) {
        if p > 0.0 {
            num += x * x * (-(p.ln()));
            den += x * x * x * x;
        }
    }
    let fitted_c = if den > 0.0 { num / den } else { 0.0 };
    // Allow small inversions at MC noise scale.
    let monotone = probabilities.windows(2).all(|w| {
        let se = (w[0].max(1e-12) * (1.0 - w[0].max(1e-12).min(1.0 - 1e-12)) / nf).sqrt();
        w[1] <= w[0] + 3.0 * se + 1.0 / nf
    });
    Ok(TailReport { xs: xs.to_vec(), probabilities, fitted_c, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn law() -> EnvironmentLaw {
        EnvironmentLaw::new(1.5, 2.5, 0.5).unwrap()
    }

    #[test]
    fn env_moments_hand_values() {
        let env = env_moments(&law());
        assert_abs_diff_eq!(env.m, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(env.sigma_sq, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(env.tau_sq, 2.25, epsilon = 1e-15);
        assert_abs_diff_eq!(env.mu, (1.5f64.ln() + 2.5f64.ln()) / 2.0, epsilon = 1e-15);
        let half_log_ratio = (2.5f64 / 1.5).ln() / 2.0;
        assert_abs_diff_eq!(env.nu_sq, half_log_ratio * half_log_ratio, epsilon = 1e-15);

        let env2 = env_moments(&EnvironmentLaw::new(2.0, 4.0, 0.5).unwrap());
        assert_abs_diff_eq!(env2.m, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(env2.sigma_sq, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(env2.tau_sq, 7.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_environment_rejected() {
        assert!(EnvironmentLaw::new(2.0, 2.0, 0.5).is_err());
        assert!(EnvironmentLaw::new(0.9, 2.0, 0.5).is_err());
        assert!(EnvironmentLaw::new(1.5, 2.5, 0.0).is_err());
    }

    #[test]
    fn populations_never_die_and_means_in_support() {
        for r in 0..50 {
            let mut rng = CounterRng::new(9, &[r]);
            let path = simulate_bpre(&law(), 30, &mut rng).unwrap();
            assert!(path.populations.iter().all(|&z| z >= 1.0));
            assert!(path.environment_means.iter().all(|&m| m == 1.5 || m == 2.5));
        }
    }

    #[test]
    fn first_generation_mean() {
        // E Z_1 = m = 2 for the (1.5, 2.5, 1/2) law.
        let reps = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for r in 0..reps {
            let mut rng = CounterRng::new(4, &[r]);
            let path = simulate_bpre(&law(), 1, &mut rng).unwrap();
            let z1 = path.populations[1];
            sum += z1;
            sq += z1 * z1;
        }
        let nf = reps as f64;
        let mean = sum / nf;
        let se = ((sq / nf - mean * mean) / nf).sqrt();
        assert!((mean - 2.0).abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn geometric_variance_identity_per_environment() {
        // Var(Z_1 | m) = m^2 - m, checked by MC at fixed environment.
        for &m in &[1.5f64, 2.5] {
            let reps = 200_000;
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut rng = CounterRng::new(21, &[m.to_bits()]);
            for _ in 0..reps {
                let z = reproduction_step(1.0, m, &mut rng);
                sum += z;
                sq += z * z;
            }
            let nf = reps as f64;
            let mean = sum / nf;
            let var = sq / nf - mean * mean;
            let expected = m * m - m;
            // 4th-moment-driven SE of the sample variance, rough bound.
            let se = expected * (8.0 / nf).sqrt() * 3.0;
            assert!((var - expected).abs() <= 3.0 * se.max(0.02), "m {m} var {var}");
        }
    }

    #[test]
    fn negative_binomial_matches_naive_summation() {
        // Two-sample KS between NB stepping and per-individual geometrics.
        let z = 100u64;
        let m = 2.5;
        let reps = 100_000;
        let mut a = Vec::with_capacity(reps);
        let mut b = Vec::with_capacity(reps);
        let mut rng_a = CounterRng::new(31, &[0]);
        let mut rng_b = CounterRng::new(31, &[1]);
        for _ in 0..reps {
            a.push(reproduction_step(z as f64, m, &mut rng_a));
            b.push(reproduction_step_naive(z, m, &mut rng_b) as f64);
        }
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let ks = two_sample_ks(&a, &b);
        // 99% critical value c(0.01) sqrt((n+m)/(nm)), c = 1.628
        let crit = 1.628 * ((2.0 * reps as f64) / (reps as f64 * reps as f64)).sqrt();
        assert!(ks < crit, "ks {ks} crit {crit}");
    }

    fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
        // Advance both samples past each distinct value; evaluating inside
        // a tie block would inflate the sup on lattice data.
        let (mut i, mut j) = (0usize, 0usize);
        let mut d: f64 = 0.0;
        while i < a.len() && j < b.len() {
            let v = a[i].min(b[j]);
            while i < a.len() && a[i] <= v {
                i += 1;
            }
            while j < b.len() && b[j] <= v {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn log_growth_rate() {
        // (ln Z_N)/N -> mu.
        let env = env_moments(&law());
        let gens = 200;
        let reps = 2_000;
        let mut vals = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut rng = CounterRng::new(77, &[r as u64]);
            let path = simulate_bpre(&law(), gens, &mut rng).unwrap();
            vals.push(path.populations[gens].ln() / gens as f64);
        }
        let nf = reps as f64;
        let mean = vals.iter().sum::<f64>() / nf;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
        let se = (var / nf).sqrt();
        assert!((mean - env.mu).abs() <= 3.0 * se + 2.0 / gens as f64, "mean {mean} mu {}", env.mu);
    }

    #[test]
    fn lotka_nagaev_centered_and_windowed() {
        let mut rng = CounterRng::new(5, &[0]);
        let path = simulate_bpre(&law(), 30, &mut rng).unwrap();
        // Single-window statistic is (Z_{n0+1}/Z_{n0} - m)/sigma.
        let stat = lotka_nagaev(&path, 10, 1, &law()).unwrap();
        let env = env_moments(&law());
        let expected = (path.populations[11] / path.populations[10] - env.m) / env.sigma_sq.sqrt();
        assert_abs_diff_eq!(stat.normalized, expected, epsilon = 1e-12);
        assert!(lotka_nagaev(&path, 25, 10, &law()).is_err());
    }

    #[test]
    fn conditional_moment_hand_targets() {
        let r = conditional_moment_check(&law(), 10, 50_000, 3).unwrap();
        assert_abs_diff_eq!(r.target, 0.475, epsilon = 1e-15);
        assert!(r.second_moment_within_3se, "got {} vs {}", r.second_moment, r.target);
        assert!(r.mean_within_3se);
        let r1 = conditional_moment_check(&law(), 1, 50_000, 3).unwrap();
        assert_abs_diff_eq!(r1.target, 2.5, epsilon = 1e-15);
        let big = conditional_moment_check(&law(), 1_000_000, 10_000, 3).unwrap();
        assert_abs_diff_eq!(big.target, 0.25, epsilon = 1e-4);
    }

    #[test]
    fn overflow_reported_with_generation() {
        // ~3000 generations at mu ~ 0.66 overflows f64.
        let mut rng = CounterRng::new(1, &[0]);
        match simulate_bpre(&law(), 3000, &mut rng) {
            Err(Error::PopulationOverflow { generation }) => assert!(generation > 100),
            other => panic!("expected overflow, got {other:?}"),
        }
    }
}
