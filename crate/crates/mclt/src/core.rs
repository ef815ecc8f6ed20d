//! Shared data model: realized difference paths, per-step moment profiles
//! and the smoothed scale sequences built from them.
//!
//! Index convention: the scale arrays run k = 1..n+1 so the boundary
//! values rho_bar_{n,n+1} = 0 and tau_{n,n+1} = a exist without special
//! cases. Accessors take the 1-based k of the math convention.

use crate::error::{Error, Result};

/// One realized martingale-difference trajectory X_1..X_n together with
/// its conditional-variance trajectory sigma_k^2 = E[X_k^2 | F_{k-1}]
/// realized along the path.
#[derive(Clone, Debug)]
pub struct DifferencePath {
    pub n: usize,
    pub differences: Vec<f64>,
    pub conditional_variances: Vec<f64>,
    /// S_k, forward cumulative sum of the differences in index order.
    pub partial_sums: Vec<f64>,
}

impl DifferencePath {
    pub fn new(differences: Vec<f64>, conditional_variances: Vec<f64>) -> Result<Self> {
        let n = differences.len();
        if n == 0 {
            return Err(Error::InvalidInput("horizon 0".into()));
        }
        if conditional_variances.len() != n {
            return Err(Error::InvalidInput(format!(
                "variance trajectory length {} != horizon {}",
                conditional_variances.len(),
                n
            )));
        }
        if let Some(v) = conditional_variances.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("negative conditional variance {v}")));
        }
        let mut partial_sums = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &x in &differences {
            acc += x;
            partial_sums.push(acc);
        }
        Ok(DifferencePath { n, differences, conditional_variances, partial_sums })
    }

    /// S_n, the full martingale sum.
    pub fn total(&self) -> f64 {
        self.partial_sums[self.n - 1]
    }

    /// V_k^2 trajectory (forward cumulative sum of conditional variances),
    /// with V_0^2 = 0 prepended: length n + 1.
    pub fn running_variance(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n + 1);
        let mut acc = 0.0;
        v.push(0.0);
        for &s in &self.conditional_variances {
            acc += s;
            v.push(acc);
        }
        v
    }
}

/// Per-step deterministic moment data with either analytic closed forms or
/// Monte-Carlo estimates behind it.
#[derive(Clone, Debug)]
pub struct MomentProfile {
    pub n: usize,
    /// sigma_bar_k^2 = E X_k^2
    pub unconditional_variances: Vec<f64>,
    /// s_k^2 (forward cumulative sum), length n; s_n^2 is the last entry.
    pub cumulative: Vec<f64>,
    pub delta: Option<f64>,
    pub provider: MomentProvider,
}

impl MomentProfile {
    pub fn new(
        unconditional_variances: Vec<f64>,
        delta: Option<f64>,
        provider: MomentProvider,
    ) -> Result<Self> {
        let profile = Self::new_relaxed(unconditional_variances, delta, provider)?;
        if profile.total_variance() < 2.0 {
            return Err(Error::InvalidInput(format!(
                "s_n^2 = {} < 2; horizon too short for the rate statements",
                profile.total_variance()
            )));
        }
        Ok(profile)
    }

    /// Same as `new` but without the s_n^2 >= 2 floor. Intended for
    /// single-step closed-form evaluations where the rate statements are
    /// not invoked.
    pub fn new_relaxed(
        unconditional_variances: Vec<f64>,
        delta: Option<f64>,
        provider: MomentProvider,
    ) -> Result<Self> {
        let n = unconditional_variances.len();
        if n == 0 {
            return Err(Error::InvalidInput("horizon 0".into()));
        }
        if let Some(v) = unconditional_variances.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidInput(format!("nonpositive variance {v}")));
        }
        if let Some(d) = delta {
            if !(0.0..=1.0).contains(&d) || d == 0.0 {
                return Err(Error::InvalidInput(format!("delta {d} outside (0, 1]")));
            }
        }
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &v in &unconditional_variances {
            acc += v;
            cumulative.push(acc);
        }
        Ok(MomentProfile { n, unconditional_variances, cumulative, delta, provider })
    }

    /// s_n^2
    pub fn total_variance(&self) -> f64 {
        self.cumulative[self.n - 1]
    }

    /// s_n
    pub fn s_n(&self) -> f64 {
        self.total_variance().sqrt()
    }

    /// s_{k}^2 with s_0^2 = 0, 0-based-friendly accessor (k in 0..=n).
    pub fn cumulative_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    pub fn moments(&self, k: usize) -> StepMoments<'_> {
        StepMoments { provider: &self.provider, k }
    }

    /// Whether sigma_k^2 = sigma_bar_k^2 almost surely for every step, i.e.
    /// V_n^2 = s_n^2. Analytic providers decide by the closed-form variance
    /// gap; Monte-Carlo providers by the realized conditional variances
    /// being constant within each step.
    pub fn deterministic_variance(&self) -> bool {
        match &self.provider {
            MomentProvider::Analytic { laws } => laws.iter().all(|l| l.sigma_gap() == 0.0),
            MomentProvider::MonteCarlo { cond_var_samples, .. } => cond_var_samples
                .iter()
                .all(|s| s.windows(2).all(|w| w[0] == w[1])),
        }
    }
}

/// A point estimate with its standard error (0 for analytic values).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moment {
    pub value: f64,
    pub se: f64,
}

impl Moment {
    pub fn exact(value: f64) -> Self {
        Moment { value, se: 0.0 }
    }
}

/// Closed-form marginal law of one difference X_k (all unit variance).
#[derive(Clone, Debug)]
pub enum StepLaw {
    /// X in {-1, +1} with probability 1/2 each.
    Rademacher,
    /// X ~ N(0, 1).
    Gaussian,
    /// |X| Pareto with density beta x0^beta x^{-beta-1} on [x0, inf),
    /// x0 = sqrt((beta-2)/beta), symmetric sign.
    ParetoSymmetric { beta: f64, x0: f64 },
    /// |X| in {sqrt(1-u), sqrt(1+u)} with probability 1/2 each; the
    /// conditional variance is 1 + u * sign of the previous step, so
    /// E|sigma^2 - sigma_bar^2| = u.
    TwoPoint { u: f64 },
}

/// Whether the truncation boundary point itself is included.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Inclusive,
    Exclusive,
}

impl StepLaw {
    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            StepLaw::Rademacher => Some(vec![(1.0, 1.0)]),
            StepLaw::TwoPoint { u } => {
                Some(vec![((1.0 - u).sqrt(), 0.5), ((1.0 + u).sqrt(), 0.5)])
            }
            _ => None,
        }
    }

    /// E[|X|^p 1{|X| <= t}] (Inclusive) or E[|X|^p 1{|X| < t}] (Exclusive).
    pub fn abs_pow_below(&self, p: f64, t: f64, boundary: Boundary) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if let Some(atoms) = self.atoms() {
            return atoms
                .iter()
                .filter(|(v, _)| *v < t || (boundary == Boundary::Inclusive && *v == t))
                .map(|(v, m)| m * v.powf(p))
                .sum();
        }
        match self {
            StepLaw::Gaussian => {
                use statrs::function::gamma::{gamma, gamma_lr};
                let full = 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt();
                full * gamma_lr((p + 1.0) / 2.0, t * t / 2.0)
            }
            StepLaw::ParetoSymmetric { beta, x0 } => {
                if t <= *x0 {
                    0.0
                } else {
                    let e = p - beta;
                    if e.abs() < 1e-9 {
                        beta * x0.powf(*beta) * x0.powf(e) * (t / x0).ln()
                    } else {
                        beta * x0.powf(*beta) * (t.powf(e) - x0.powf(e)) / e
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// E[|X|^p 1{|X| > t}] (Exclusive) or E[|X|^p 1{|X| >= t}] (Inclusive).
    /// Returns infinity for Pareto when p >= beta.
    pub fn abs_pow_above(&self, p: f64, t: f64, boundary: Boundary) -> f64 {
        if let Some(atoms) = self.atoms() {
            return atoms
                .iter()
                .filter(|(v, _)| *v > t || (boundary == Boundary::Inclusive && *v == t))
                .map(|(v, m)| m * v.powf(p))
                .sum();
        }
        match self {
            StepLaw::Gaussian | StepLaw::ParetoSymmetric { .. } => {
                let full = self.abs_pow(p);
                if full.is_infinite() {
                    full
                } else {
                    full - self.abs_pow_below(p, t.max(0.0), Boundary::Inclusive)
                }
            }
            _ => unreachable!(),
        }
    }

    /// E|X|^p.
    pub fn abs_pow(&self, p: f64) -> f64 {
        match self {
            StepLaw::Rademacher => 1.0,
            StepLaw::TwoPoint { u } => {
                0.5 * ((1.0 - u).powf(p / 2.0) + (1.0 + u).powf(p / 2.0))
            }
            StepLaw::Gaussian => {
                use statrs::function::gamma::gamma;
                2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
            StepLaw::ParetoSymmetric { beta, x0 } => {
                if p >= *beta {
                    f64::INFINITY
                } else {
                    beta * x0.powf(p) / (beta - p)
                }
            }
        }
    }

    /// P(|X| > t) / P(|X| >= t) per the boundary flag.
    pub fn prob_above(&self, t: f64, boundary: Boundary) -> f64 {
        self.abs_pow_above(0.0, t, boundary)
    }

    /// E|sigma_k^2 - sigma_bar_k^2|.
    pub fn sigma_gap(&self) -> f64 {
        match self {
            StepLaw::TwoPoint { u } => *u,
            _ => 0.0,
        }
    }

    /// Essential sup of E[|X|^p 1{|X| <= t} | F_{k-1}]. For i.i.d. laws
    /// this is the unconditional moment; for the two-point-variance law it
    /// is the max over the two variance branches.
    pub fn cond_sup_abs_pow_below(&self, p: f64, t: f64, boundary: Boundary) -> f64 {
        match self {
            StepLaw::TwoPoint { u } => {
                let branch = |v: f64| {
                    let keep = v < t || (boundary == Boundary::Inclusive && v == t);
                    if keep {
                        v.powf(p)
                    } else {
                        0.0
                    }
                };
                branch((1.0 - u).sqrt()).max(branch((1.0 + u).sqrt()))
            }
            _ => self.abs_pow_below(p, t, boundary),
        }
    }

    /// Essential sup of E[|X|^p 1{|X| > t} | F_{k-1}].
    pub fn cond_sup_abs_pow_above(&self, p: f64, t: f64, boundary: Boundary) -> f64 {
        match self {
            StepLaw::TwoPoint { u } => {
                let branch = |v: f64| {
                    let keep = v > t || (boundary == Boundary::Inclusive && v == t);
                    if keep {
                        v.powf(p)
                    } else {
                        0.0
                    }
                };
                branch((1.0 - u).sqrt()).max(branch((1.0 + u).sqrt()))
            }
            _ => self.abs_pow_above(p, t, boundary),
        }
    }
}

/// Moment backend for a profile: closed forms per step, or stored
/// Monte-Carlo replicates with standard errors.
#[derive(Clone, Debug)]
pub enum MomentProvider {
    Analytic { laws: Vec<StepLaw> },
    MonteCarlo {
        /// samples[k-1][r] = r-th replicate of X_k
        samples: Vec<Vec<f64>>,
        /// cond_var_samples[k-1][r] = realized sigma_k^2 on replicate r
        cond_var_samples: Vec<Vec<f64>>,
    },
}

impl MomentProvider {
    pub fn is_analytic(&self) -> bool {
        matches!(self, MomentProvider::Analytic { .. })
    }
}

fn mc_mean_se(values: impl Iterator<Item = f64>) -> Moment {
    let vals: Vec<f64> = values.collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Moment { value: mean, se: (var / n).sqrt() }
}

/// Moment functionals of one step k (1-based), routed through the profile's
/// provider.
pub struct StepMoments<'a> {
    provider: &'a MomentProvider,
    k: usize,
}

impl StepMoments<'_> {
    fn law(&self) -> Option<&StepLaw> {
        match self.provider {
            MomentProvider::Analytic { laws } => Some(&laws[self.k - 1]),
            _ => None,
        }
    }

    fn mc_samples(&self) -> Option<&[f64]> {
        match self.provider {
            MomentProvider::MonteCarlo { samples, .. } => Some(&samples[self.k - 1]),
            _ => None,
        }
    }

    pub fn abs_pow_below(&self, p: f64, t: f64, boundary: Boundary) -> Moment {
        match self.law() {
            Some(law) => Moment::exact(law.abs_pow_below(p, t, boundary)),
            None => {
                let s = self.mc_samples().unwrap();
                mc_mean_se(s.iter().map(|&x| {
                    let a = x.abs();
                    let keep = a < t || (boundary == Boundary::Inclusive && a == t);
                    if keep {
                        a.powf(p)
                    } else {
                        0.0
                    }
                }))
            }
        }
    }

    pub fn abs_pow_above(&self, p: f64, t: f64, boundary: Boundary) -> Moment {
        match self.law() {
            Some(law) => Moment::exact(law.abs_pow_above(p, t, boundary)),
            None => {
                let s = self.mc_samples().unwrap();
                mc_mean_se(s.iter().map(|&x| {
                    let a = x.abs();
                    let keep = a > t || (boundary == Boundary::Inclusive && a == t);
                    if keep {
                        a.powf(p)
                    } else {
                        0.0
                    }
                }))
            }
        }
    }

    pub fn abs_pow(&self, p: f64) -> Moment {
        match self.law() {
            Some(law) => Moment::exact(law.abs_pow(p)),
            None => {
                let s = self.mc_samples().unwrap();
                mc_mean_se(s.iter().map(|&x| x.abs().powf(p)))
            }
        }
    }

    pub fn prob_above(&self, t: f64, boundary: Boundary) -> Moment {
        self.abs_pow_above(0.0, t, boundary)
    }

    /// E|sigma_k^2 - sigma_bar_k^2|. The Monte-Carlo route centers the
    /// realized conditional variances at their sample mean.
    pub fn sigma_gap(&self) -> Moment {
        match self.provider {
            MomentProvider::Analytic { laws } => Moment::exact(laws[self.k - 1].sigma_gap()),
            MomentProvider::MonteCarlo { cond_var_samples, .. } => {
                let s = &cond_var_samples[self.k - 1];
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                mc_mean_se(s.iter().map(|&v| (v - mean).abs()))
            }
        }
    }

    /// Essential-sup conditional truncated moments; only available behind
    /// closed-form laws.
    pub fn cond_sup_abs_pow_below(&self, p: f64, t: f64, boundary: Boundary) -> Option<f64> {
        self.law().map(|law| law.cond_sup_abs_pow_below(p, t, boundary))
    }

    pub fn cond_sup_abs_pow_above(&self, p: f64, t: f64, boundary: Boundary) -> Option<f64> {
        self.law().map(|law| law.cond_sup_abs_pow_above(p, t, boundary))
    }
}

/// The a-smoothed scale sequences for a horizon: rho_bar_{n,k} and
/// tau_{n,k} for k = 1..n+1, plus the per-path rho/upsilon variants when
/// built from a realized path. Squares are stored so the defining
/// identities hold bit-exactly.
#[derive(Clone, Debug)]
pub struct ScaleLedger {
    pub n: usize,
    pub a: f64,
    rho_bar_sq: Vec<f64>,
    tau_sq: Vec<f64>,
    rho_sq: Option<Vec<f64>>,
    upsilon_sq: Option<Vec<f64>>,
}

impl ScaleLedger {
    /// rho_bar_{n,k}, 1-based k in 1..=n+1.
    pub fn rho_bar(&self, k: usize) -> f64 {
        self.rho_bar_sq[k - 1].sqrt()
    }

    pub fn rho_bar_sq(&self, k: usize) -> f64 {
        self.rho_bar_sq[k - 1]
    }

    /// tau_{n,k} = sqrt(rho_bar_{n,k}^2 + a^2), 1-based k in 1..=n+1.
    pub fn tau(&self, k: usize) -> f64 {
        self.tau_sq[k - 1].sqrt()
    }

    pub fn tau_sq(&self, k: usize) -> f64 {
        self.tau_sq[k - 1]
    }

    pub fn rho(&self, k: usize) -> Option<f64> {
        self.rho_sq.as_ref().map(|v| v[k - 1].sqrt())
    }

    pub fn upsilon(&self, k: usize) -> Option<f64> {
        self.upsilon_sq.as_ref().map(|v| v[k - 1].sqrt())
    }

    pub fn upsilon_sq(&self, k: usize) -> Option<f64> {
        self.upsilon_sq.as_ref().map(|v| v[k - 1])
    }
}

fn build_scales(n: usize, a: f64, cumulative_at: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let total = cumulative_at(n);
    let mut remaining_sq = Vec::with_capacity(n + 1);
    let mut shifted_sq = Vec::with_capacity(n + 1);
    for k in 1..=n + 1 {
        // max(0) guards rounding in the k = n+1 difference.
        let r = (total - cumulative_at(k - 1)).max(0.0);
        remaining_sq.push(r);
        shifted_sq.push(r + a * a);
    }
    (remaining_sq, shifted_sq)
}

/// Builds the deterministic scale sequences rho_bar/tau for a profile.
pub fn build_scale_ledger(profile: &MomentProfile, a: f64) -> Result<ScaleLedger> {
    if !(a >= 0.0) {
        return Err(Error::InvalidInput(format!("smoothing parameter a = {a} must be >= 0")));
    }
    let (rho_bar_sq, tau_sq) = build_scales(profile.n, a, |k| profile.cumulative_at(k));
    Ok(ScaleLedger { n: profile.n, a, rho_bar_sq, tau_sq, rho_sq: None, upsilon_sq: None })
}

/// Builds the per-path scale sequences rho/upsilon from a realized path.
/// The rho_bar/tau side is filled in from the path's conditional variances
/// as well, which coincides with the profile version for
/// deterministic-variance models.
pub fn per_path_scales(path: &DifferencePath, a: f64) -> Result<ScaleLedger> {
    if !(a >= 0.0) {
        return Err(Error::InvalidInput(format!("smoothing parameter a = {a} must be >= 0")));
    }
    let running = path.running_variance();
    let (rho_sq, upsilon_sq) = build_scales(path.n, a, |k| running[k]);
    Ok(ScaleLedger {
        n: path.n,
        a,
        rho_bar_sq: rho_sq.clone(),
        tau_sq: upsilon_sq.clone(),
        rho_sq: Some(rho_sq),
        upsilon_sq: Some(upsilon_sq),
    })
}
