//! Kolmogorov and Wasserstein-1 distances of a (discrete or empirical)
//! law to the standard normal.
//!
//! The Wasserstein-1 distance to the normal equals the L1 distance of the
//! CDFs, which for a step-function CDF has a closed form in the normal
//! antiderivative A(x) = x Phi(x) + phi(x); no transport solver involved.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{self, ModelKind, ModelSpec};
use crate::normal;
use crate::rng::CounterRng;

/// Atoms closer than this merge in `enumerate_law`; square-root arithmetic
/// produces duplicates up to rounding.
pub const ATOM_MERGE_TOL: f64 = 1e-12;
const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Clone, Debug)]
pub struct DiscreteDistribution {
    pub support: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probabilities.len() {
            return Err(Error::InvalidInput("empty or mismatched support".into()));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("support must be strictly increasing".into()));
        }
        if probabilities.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidInput("probabilities must be positive".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteDistribution { support, probabilities })
    }

    /// Empirical distribution of a sample; exact duplicates merge.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
        let w = 1.0 / samples.len() as f64;
        let mut support = Vec::new();
        let mut probabilities: Vec<f64> = Vec::new();
        for &x in &sorted {
            if support.last() == Some(&x) {
                *probabilities.last_mut().unwrap() += w;
            } else {
                support.push(x);
                probabilities.push(w);
            }
        }
        // Renormalize accumulated weights exactly.
        let total: f64 = probabilities.iter().sum();
        for p in &mut probabilities {
            *p /= total;
        }
        DiscreteDistribution { support, probabilities }.validated()
    }

    fn validated(self) -> Result<Self> {
        Self::new(self.support, self.probabilities)
    }

    /// Right-continuous CDF levels F(x_i).
    pub fn cdf_levels(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMethod {
    ExactEnumeration,
    EmpiricalExactIntegral,
}

#[derive(Clone, Copy, Debug)]
pub struct DistanceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: DistanceMethod,
    pub sample_size: usize,
}

/// Exact sup |F - Phi| for a step CDF: the sup is attained at a support
/// point, approached from the left or the right.
pub fn kolmogorov_exact(dist: &DiscreteDistribution) -> Result<DistanceEstimate> {
    let levels = dist.cdf_levels();
    let mut sup: f64 = 0.0;
    let mut prev_level = 0.0;
    for (i, &x) in dist.support.iter().enumerate() {
        let phi = normal::cdf(x);
        sup = sup.max((levels[i] - phi).abs()).max((prev_level - phi).abs());
        prev_level = levels[i];
    }
    Ok(DistanceEstimate {
        value: sup,
        std_error: 0.0,
        method: DistanceMethod::ExactEnumeration,
        sample_size: dist.support.len(),
    })
}

/// Exact integral of |F - Phi| dx via the antiderivative of Phi, with sign
/// changes located by the normal quantile.
pub fn wasserstein_exact(dist: &DiscreteDistribution) -> Result<DistanceEstimate> {
    let levels = dist.cdf_levels();
    let first = dist.support[0];
    let last = *dist.support.last().unwrap();
    // Left tail: F = 0, integral of Phi over (-inf, x_1].
    let mut total = normal::cdf_antiderivative(first);
    // Right tail: F = 1, integral of 1 - Phi over [x_m, inf).
    total += normal::pdf(last) - last * normal::sf(last);
    for i in 0..dist.support.len() - 1 {
        total += segment_abs_integral(dist.support[i], dist.support[i + 1], levels[i]);
    }
    Ok(DistanceEstimate {
        value: total,
        std_error: 0.0,
        method: DistanceMethod::ExactEnumeration,
        sample_size: dist.support.len(),
    })
}

/// Integral of |Phi(x) - c| over [a, b] for a constant level c.
fn segment_abs_integral(a: f64, b: f64, c: f64) -> f64 {
    let signed = |lo: f64, hi: f64| {
        normal::cdf_antiderivative(hi) - normal::cdf_antiderivative(lo) - c * (hi - lo)
    };
    if c <= 0.0 || c >= 1.0 {
        return signed(a, b).abs();
    }
    let crossing = normal::quantile(c);
    if crossing > a && crossing < b {
        // Phi < c left of the crossing, > c right of it.
        (-signed(a, crossing)) + signed(crossing, b)
    } else {
        signed(a, b).abs()
    }
}

/// Kolmogorov statistic of an empirical law with the 95% DKW band as
/// standard error; `m` is the underlying sample count.
pub fn kolmogorov_empirical(dist: &DiscreteDistribution, m: usize) -> Result<DistanceEstimate> {
    let exact = kolmogorov_exact(dist)?;
    Ok(DistanceEstimate {
        value: exact.value,
        std_error: ((2.0 / 0.05f64).ln() / (2.0 * m as f64)).sqrt(),
        method: DistanceMethod::EmpiricalExactIntegral,
        sample_size: m,
    })
}

/// Wasserstein distance of the empirical law of `samples` to the normal,
/// with a bootstrap standard error (200 resamples).
pub fn wasserstein_empirical(samples: &[f64], seed: u64, m: usize) -> Result<DistanceEstimate> {
    let dist = DiscreteDistribution::from_samples(samples)?;
    let point = wasserstein_exact(&dist)?.value;
    // Map sorted-sample position -> support index for cheap multinomial
    // resampling.
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut support_of = Vec::with_capacity(sorted.len());
    let mut idx = 0usize;
    for &x in &sorted {
        while dist.support[idx] < x {
            idx += 1;
        }
        support_of.push(idx);
    }
    let n = sorted.len();
    let boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| {
            let mut rng = CounterRng::new(seed, &[0xb007, b as u64]);
            let mut counts = vec![0u32; dist.support.len()];
            for _ in 0..n {
                let j = (rng.next() % n as u64) as usize;
                counts[support_of[j]] += 1;
            }
            let mut support = Vec::new();
            let mut probs = Vec::new();
            for (i, &cnt) in counts.iter().enumerate() {
                if cnt > 0 {
                    support.push(dist.support[i]);
                    probs.push(cnt as f64 / n as f64);
                }
            }
            let resampled = DiscreteDistribution { support, probabilities: probs };
            wasserstein_exact(&resampled).map(|d| d.value)
        })
        .collect::<Result<_>>()?;
    let bm = boots.iter().sum::<f64>() / boots.len() as f64;
    let var =
        boots.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (boots.len() as f64 - 1.0);
    Ok(DistanceEstimate {
        value: point,
        std_error: var.sqrt(),
        method: DistanceMethod::EmpiricalExactIntegral,
        sample_size: m,
    })
}

/// Draws `replicates` values of S_n/s_n (s_n^2 = n for this model family).
pub fn sample_standardized_sums(
    spec: &ModelSpec,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let scale = (n as f64).sqrt();
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            models::generate_path_replicate(spec, n, seed, r as u64).map(|p| p.total() / scale)
        })
        .collect()
}

/// Monte-Carlo plug-in estimates of K and W for a model at horizon n.
pub fn estimate_distances_mc(
    spec: &ModelSpec,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<(DistanceEstimate, DistanceEstimate)> {
    if replicates < 1000 {
        return Err(Error::Precondition(format!(
            "estimate_distances_mc needs >= 1000 replicates, got {replicates}"
        )));
    }
    let samples = sample_standardized_sums(spec, n, replicates, seed)?;
    let dist = DiscreteDistribution::from_samples(&samples)?;
    let k = kolmogorov_empirical(&dist, replicates)?;
    let w = wasserstein_empirical(&samples, seed ^ 0x57a7, replicates)?;
    Ok((k, w))
}

/// Exact law of S_n/s_n by enumeration of all sign paths. Supported for
/// the finite sign-tree models only.
pub fn enumerate_law(spec: &ModelSpec, n: usize) -> Result<DiscreteDistribution> {
    if n == 0 || n > 20 {
        return Err(Error::InvalidInput(format!("enumeration supports 1 <= n <= 20, got {n}")));
    }
    let scale = (n as f64).sqrt();
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    match &spec.kind {
        ModelKind::Rademacher => {
            let total = 1u64 << n;
            let p = 1.0 / total as f64;
            for mask in 0..total {
                let sum = (2 * mask.count_ones() as i64 - n as i64) as f64;
                atoms.push((sum / scale, p));
            }
        }
        ModelKind::RandomVarianceDecay { alpha, c } => {
            // Signs eps_0..eps_n: 2^{n+1} paths.
            let us: Vec<f64> = (1..=n).map(|k| c * (k as f64).powf(-alpha)).collect();
            let total = 1u64 << (n + 1);
            let p = 1.0 / total as f64;
            for mask in 0..total {
                let sign = |j: usize| if mask >> j & 1 == 0 { 1.0 } else { -1.0 };
                let mut sum = 0.0;
                for k in 1..=n {
                    sum += sign(k) * (1.0 + us[k - 1] * sign(k - 1)).sqrt();
                }
                atoms.push((sum / scale, p));
            }
        }
        _ => {
            return Err(Error::UnsupportedModel(format!(
                "enumerate_law supports rademacher and random-variance-decay, not {}",
                spec.id()
            )))
        }
    }
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut support = Vec::new();
    let mut probabilities: Vec<f64> = Vec::new();
    for (x, p) in atoms {
        match support.last() {
            Some(&last) if x - last <= ATOM_MERGE_TOL => {
                *probabilities.last_mut().unwrap() += p
            }
            _ => {
                support.push(x);
                probabilities.push(p);
            }
        }
    }
    let total: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= total;
    }
    DiscreteDistribution::new(support, probabilities)
}

/// Result of the K <= (2/pi)^{1/4} sqrt(W) relation check.
#[derive(Clone, Copy, Debug)]
pub struct KwRelation {
    pub holds: bool,
    /// Right-hand side (with error allowance) minus K; nonnegative iff the
    /// relation holds.
    pub slack: f64,
}

pub fn kw_relation_check(k: &DistanceEstimate, w: &DistanceEstimate) -> KwRelation {
    let coeff = (2.0 / std::f64::consts::PI).powf(0.25);
    let rhs = coeff * w.value.max(0.0).sqrt();
    // First-order propagation of the W standard error through sqrt.
    let w_err = if w.value > 1e-12 { w.std_error / (2.0 * w.value.sqrt()) } else { w.std_error };
    let allowance = 3.0 * (k.std_error + coeff * w_err);
    let slack = rhs + allowance - k.value;
    KwRelation { holds: slack >= 0.0, slack }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn point_mass_at_zero() -> DiscreteDistribution {
        DiscreteDistribution::new(vec![0.0], vec![1.0]).unwrap()
    }

    fn rademacher_law() -> DiscreteDistribution {
        DiscreteDistribution::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn kolmogorov_point_mass() {
        let k = kolmogorov_exact(&point_mass_at_zero()).unwrap();
        assert_abs_diff_eq!(k.value, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn kolmogorov_rademacher_closed_form() {
        let k = kolmogorov_exact(&rademacher_law()).unwrap();
        assert_abs_diff_eq!(k.value, normal::cdf(1.0) - 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(k.value, 0.3413447460685429, epsilon = 1e-12);
    }

    #[test]
    fn kolmogorov_three_step_enumeration() {
        // Law of S_3/sqrt(3): support +-sqrt(3), +-1/sqrt(3) with probs
        // 1/8, 3/8 (brute force over all 8 sign paths).
        let dist = enumerate_law(&ModelSpec::rademacher(), 3).unwrap();
        let s3 = 3f64.sqrt();
        assert_eq!(dist.support.len(), 4);
        assert_abs_diff_eq!(dist.support[0], -s3, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.support[1], -1.0 / s3, epsilon = 1e-15);
        assert_eq!(dist.probabilities, vec![0.125, 0.375, 0.375, 0.125]);
        // Exact sup from the CDF steps.
        let k = kolmogorov_exact(&dist).unwrap();
        let mut expected: f64 = 0.0;
        let levels = [0.125, 0.5, 0.875, 1.0];
        let mut prev = 0.0;
        for (i, &x) in dist.support.iter().enumerate() {
            let p = normal::cdf(x);
            expected = expected.max((levels[i] - p).abs()).max((prev - p).abs());
            prev = levels[i];
        }
        assert_abs_diff_eq!(k.value, expected, epsilon = 1e-15);
    }

    #[test]
    fn wasserstein_point_mass_is_mean_abs_normal() {
        let w = wasserstein_exact(&point_mass_at_zero()).unwrap();
        assert_abs_diff_eq!(w.value, (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn wasserstein_quantile_grid_is_small() {
        let m = 1000;
        let support: Vec<f64> =
            (1..=m).map(|i| normal::quantile((i as f64 - 0.5) / m as f64)).collect();
        let probs = vec![1.0 / m as f64; m];
        let dist = DiscreteDistribution::new(support, probs).unwrap();
        let w = wasserstein_exact(&dist).unwrap();
        assert!(w.value < 0.005, "w = {}", w.value);
        // And K of an m-point quantile grid at the (i - 1/2)/m levels is
        // exactly 0.5/m.
        let k = kolmogorov_exact(&dist).unwrap();
        assert_abs_diff_eq!(k.value, 0.5 / m as f64, epsilon = 1e-12);
    }

    #[test]
    fn wasserstein_rademacher_symmetric_form() {
        // 2 int_0^1 (Phi - 1/2) + 2 int_1^inf (1 - Phi), by symmetry.
        let direct = 2.0
            * (normal::cdf_antiderivative(1.0) - normal::cdf_antiderivative(0.0) - 0.5)
            + 2.0 * (normal::pdf(1.0) - normal::sf(1.0));
        let w = wasserstein_exact(&rademacher_law()).unwrap();
        assert_abs_diff_eq!(w.value, direct, epsilon = 1e-14);
        // Cross-check with fine Riemann quadrature of |F - Phi|.
        let f = |x: f64| {
            let fx = if x < -1.0 {
                0.0
            } else if x < 1.0 {
                0.5
            } else {
                1.0
            };
            (fx - normal::cdf(x)).abs()
        };
        let mut quad = 0.0;
        let h = 1e-4;
        let mut x = -10.0;
        while x < 10.0 {
            quad += h * 0.5 * (f(x) + f(x + h));
            x += h;
        }
        assert_abs_diff_eq!(w.value, quad, epsilon = 1e-6);
    }

    #[test]
    fn wasserstein_matches_adaptive_quadrature_on_enumerated_laws() {
        for n in 1..=12 {
            let dist = enumerate_law(&ModelSpec::rademacher(), n).unwrap();
            let w = wasserstein_exact(&dist).unwrap();
            let levels = dist.cdf_levels();
            let f = |x: f64| {
                let idx = dist.support.partition_point(|&s| s <= x);
                let fx = if idx == 0 { 0.0 } else { levels[idx - 1] };
                (fx - normal::cdf(x)).abs()
            };
            let quad = normal::adaptive_simpson(&f, -12.0, 12.0, 1e-11);
            assert_abs_diff_eq!(w.value, quad, epsilon = 1e-8);
        }
    }

    #[test]
    fn enumeration_rvd_c0_matches_rademacher() {
        let a = enumerate_law(&ModelSpec::rademacher(), 3).unwrap();
        let b =
            enumerate_law(&ModelSpec::random_variance_decay(0.5, 0.0).unwrap(), 3).unwrap();
        assert_eq!(a.support.len(), b.support.len());
        for (x, y) in a.support.iter().zip(&b.support) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert_eq!(a.probabilities, b.probabilities);
    }

    #[test]
    fn enumeration_rejects_unsupported() {
        assert!(enumerate_law(&ModelSpec::iid_gaussian(), 4).is_err());
        assert!(enumerate_law(&ModelSpec::rademacher(), 21).is_err());
    }

    #[test]
    fn mc_gaussian_is_normal_within_bands() {
        let spec = ModelSpec::iid_gaussian();
        let (k, w) = estimate_distances_mc(&spec, 8, 20_000, 5).unwrap();
        assert!(k.value <= k.std_error, "K {} exceeds DKW band {}", k.value, k.std_error);
        assert!(w.value <= 3.0 * w.std_error + 0.02, "W {} se {}", w.value, w.std_error);
    }

    #[test]
    fn mc_matches_enumeration_rademacher() {
        let spec = ModelSpec::rademacher();
        let n = 10;
        let exact = enumerate_law(&spec, n).unwrap();
        let k_exact = kolmogorov_exact(&exact).unwrap().value;
        let w_exact = wasserstein_exact(&exact).unwrap().value;
        let (k, w) = estimate_distances_mc(&spec, n, 100_000, 11).unwrap();
        assert!((k.value - k_exact).abs() <= 3.0 * k.std_error, "K {} vs {k_exact}", k.value);
        assert!((w.value - w_exact).abs() <= 3.0 * w.std_error, "W {} vs {w_exact}", w.value);
    }

    #[test]
    fn kw_relation_on_exact_laws() {
        for n in 1..=12 {
            let dist = enumerate_law(&ModelSpec::rademacher(), n).unwrap();
            let k = kolmogorov_exact(&dist).unwrap();
            let w = wasserstein_exact(&dist).unwrap();
            let rel = kw_relation_check(&k, &w);
            assert!(rel.holds, "n = {n}, slack {}", rel.slack);
        }
        let zero = DistanceEstimate {
            value: 0.0,
            std_error: 0.0,
            method: DistanceMethod::ExactEnumeration,
            sample_size: 1,
        };
        let rel = kw_relation_check(&zero, &zero);
        assert!(rel.holds);
        assert_abs_diff_eq!(rel.slack, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(DiscreteDistribution::new(vec![], vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![1.0, 0.5], vec![0.5, 0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![0.0, 1.0], vec![0.6, 0.6]).is_err());
    }
}
