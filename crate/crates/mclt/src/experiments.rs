//! Config-driven campaign runner: sweeps (model, n, a-policy) grids,
//! estimates distances, evaluates the requested bounds, enforces the hard
//! assertions (K-W relation, explicit-bound domination), emits a stable
//! CSV plus a plot script, and fits convergence-rate exponents.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::bounds::{self, BoundReport, TheoremId};
use crate::bpre::EnvironmentLaw;
use crate::core::MomentProfile;
use crate::distances::{self, DistanceEstimate};
use crate::error::{Error, Result};
use crate::models::{self, ModelKind, ModelSpec};

/// Smoothing-parameter policy for a campaign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum APolicy {
    Fixed(f64),
    /// a = s_n^{1/(1+delta)}.
    PaperRule(f64),
    Optimized,
}

impl APolicy {
    pub fn label(&self) -> String {
        match self {
            APolicy::Fixed(a) => format!("fixed:{a}"),
            APolicy::PaperRule(d) => format!("paper_rule:{d}"),
            APolicy::Optimized => "optimized".into(),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        if s == "optimized" {
            return Ok(APolicy::Optimized);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            let a: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("bad fixed a value {v:?}")))?;
            if !(a >= 0.0) {
                return Err(Error::Config(format!("fixed a must be >= 0, got {a}")));
            }
            return Ok(APolicy::Fixed(a));
        }
        if let Some(v) = s.strip_prefix("paper_rule:") {
            let d: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("bad paper rule delta {v:?}")))?;
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Config(format!("paper rule delta {d} outside (0, 1]")));
            }
            return Ok(APolicy::PaperRule(d));
        }
        Err(Error::Config(format!(
            "a_policy {s:?} not one of optimized | fixed:<a> | paper_rule:<delta>"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMethodChoice {
    /// 2^n sign-path enumeration; only for enumerable models with n <= 20.
    Exact,
    MonteCarlo,
}

/// One campaign block from a config file.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub a_policy: APolicy,
    pub distance_method: DistanceMethodChoice,
    pub bound_set: Vec<TheoremId>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("empty n grid".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n grid must be sorted strictly ascending".into()));
        }
        if self.distance_method == DistanceMethodChoice::MonteCarlo && self.replicates < 1000 {
            return Err(Error::Config(format!(
                "Monte-Carlo campaigns need >= 1000 replicates, got {}",
                self.replicates
            )));
        }
        if self.distance_method == DistanceMethodChoice::Exact {
            let enumerable = matches!(
                self.model.kind,
                ModelKind::Rademacher | ModelKind::RandomVarianceDecay { .. }
            );
            if !enumerable || *self.n_grid.last().unwrap() > 20 {
                return Err(Error::Config(
                    "exact distances need an enumerable model and n <= 20".into(),
                ));
            }
        }
        for theorem in &self.bound_set {
            self.check_admissible(*theorem)?;
        }
        Ok(())
    }

    fn check_admissible(&self, theorem: TheoremId) -> Result<()> {
        let deterministic = self.model.deterministic_variance();
        let ok = match theorem {
            TheoremId::ThmWStein | TheoremId::CorWMoment | TheoremId::RollinW => deterministic,
            TheoremId::ThmKConditional => {
                // Bounded-difference models with closed-form conditional sups.
                matches!(
                    self.model.kind,
                    ModelKind::Rademacher | ModelKind::RandomVarianceDecay { .. }
                )
            }
            TheoremId::ThmKTruncated | TheoremId::ThmWNonstationary => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "bound {} inadmissible for model {}",
                theorem.id(),
                self.model.id()
            )))
        }
    }
}

/// Parses the flat key=value config format with repeated [experiment]
/// blocks. Grammar (one assignment per line, '#' starts a comment):
///
/// ```text
/// config      := block*
/// block       := "[experiment]" assignment*
/// assignment  := key "=" value
/// key         := model | alpha | c | delta | m_a | m_b | p | burn_in
///              | n_grid | replicates | a_policy | distance | bounds
///              | seed | out_dir
/// ```
///
/// `n_grid` and `bounds` take comma-separated lists; `model` is one of
/// rademacher | iid_gaussian | random_variance_decay | heavy_tail | bpre,
/// with the matching parameter keys.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>> {
    let mut blocks: Vec<Vec<(String, String)>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "[experiment]" {
            blocks.push(Vec::new());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
        })?;
        let block = blocks.last_mut().ok_or_else(|| {
            Error::Config(format!("line {}: assignment before any [experiment] block", lineno + 1))
        })?;
        block.push((key.trim().to_string(), value.trim().to_string()));
    }
    if blocks.is_empty() {
        return Err(Error::Config("no [experiment] blocks".into()));
    }
    blocks.into_iter().map(build_block).collect()
}

fn build_block(pairs: Vec<(String, String)>) -> Result<ExperimentConfig> {
    let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let parse_f64 = |key: &str| -> Result<Option<f64>> {
        get(key)
            .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("bad {key}={v:?}"))))
            .transpose()
    };

    let model_name =
        get("model").ok_or_else(|| Error::Config("missing model key".into()))?;
    let model = match model_name {
        "rademacher" => ModelSpec::rademacher(),
        "iid_gaussian" => ModelSpec::iid_gaussian(),
        "random_variance_decay" => {
            let alpha = parse_f64("alpha")?
                .ok_or_else(|| Error::Config("random_variance_decay needs alpha".into()))?;
            let c = parse_f64("c")?
                .ok_or_else(|| Error::Config("random_variance_decay needs c".into()))?;
            ModelSpec::random_variance_decay(alpha, c)?
        }
        "heavy_tail" => {
            let delta = parse_f64("delta")?
                .ok_or_else(|| Error::Config("heavy_tail needs delta".into()))?;
            ModelSpec::heavy_tail(delta)?
        }
        "bpre" => {
            let m_a = parse_f64("m_a")?.ok_or_else(|| Error::Config("bpre needs m_a".into()))?;
            let m_b = parse_f64("m_b")?.ok_or_else(|| Error::Config("bpre needs m_b".into()))?;
            let p = parse_f64("p")?.ok_or_else(|| Error::Config("bpre needs p".into()))?;
            let burn_in = get("burn_in")
                .map(|v| v.parse::<usize>().map_err(|_| Error::Config(format!("bad burn_in {v:?}"))))
                .transpose()?
                .unwrap_or(16);
            let law = EnvironmentLaw::new(m_a, m_b, p)?;
            ModelSpec::new(ModelKind::BpreDifference { law, burn_in })?
        }
        other => return Err(Error::Config(format!("unknown model {other:?}"))),
    };

    let n_grid: Vec<usize> = get("n_grid")
        .ok_or_else(|| Error::Config("missing n_grid".into()))?
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad n {v:?}"))))
        .collect::<Result<_>>()?;
    let replicates = get("replicates")
        .unwrap_or("10000")
        .parse::<usize>()
        .map_err(|_| Error::Config("bad replicates".into()))?;
    let a_policy = APolicy::parse(get("a_policy").unwrap_or("optimized"))?;
    let distance_method = match get("distance").unwrap_or("mc") {
        "mc" => DistanceMethodChoice::MonteCarlo,
        "exact" => DistanceMethodChoice::Exact,
        other => return Err(Error::Config(format!("unknown distance method {other:?}"))),
    };
    let bound_set: Vec<TheoremId> = match get("bounds") {
        None => default_bounds(&model),
        Some(list) => list
            .split(',')
            .map(|v| theorem_from_id(v.trim()))
            .collect::<Result<_>>()?,
    };
    let seed = get("seed")
        .unwrap_or("1")
        .parse::<u64>()
        .map_err(|_| Error::Config("bad seed".into()))?;
    let out_dir = get("out_dir").map(PathBuf::from);

    let config = ExperimentConfig {
        model,
        n_grid,
        replicates,
        a_policy,
        distance_method,
        bound_set,
        seed,
        out_dir,
    };
    config.validate()?;
    Ok(config)
}

pub fn theorem_from_id(id: &str) -> Result<TheoremId> {
    TheoremId::all()
        .into_iter()
        .find(|t| t.id() == id)
        .ok_or_else(|| Error::Config(format!("unknown bound id {id:?}")))
}

/// The admissible explicit-constant W bounds for a model, which is what a
/// campaign asserts domination for by default.
pub fn default_bounds(model: &ModelSpec) -> Vec<TheoremId> {
    if model.deterministic_variance() {
        vec![TheoremId::ThmWStein, TheoremId::CorWMoment, TheoremId::RollinW]
    } else {
        vec![TheoremId::ThmWNonstationary]
    }
}

/// One (model, n) cell of a finished campaign.
#[derive(Clone, Debug)]
pub struct CampaignRecord {
    pub model_id: String,
    pub n: usize,
    pub replicates: usize,
    pub a_policy: String,
    /// The a of the first bound in the set (bounds optimize individually
    /// under the OPTIMIZED policy).
    pub a_used: f64,
    pub k: DistanceEstimate,
    pub w: DistanceEstimate,
    pub bound_totals: Vec<(TheoremId, BoundReport)>,
    pub kw_slack: f64,
    pub seed: u64,
    pub runtime_ms: u64,
}

fn profile_for(model: &ModelSpec, n: usize, replicates: usize, seed: u64) -> Result<MomentProfile> {
    match models::analytic_moments(model, n) {
        Ok(p) => Ok(p),
        Err(Error::UnsupportedProvider(_)) => {
            models::estimate_moments(model, n, replicates.clamp(100, 20_000), seed ^ 0x90f17e)
        }
        Err(e) => Err(e),
    }
}

fn choose_a(
    policy: APolicy,
    theorem: TheoremId,
    profile: &MomentProfile,
) -> Result<(f64, BoundReport)> {
    // The truncated K bound requires a >= 1; clamp every policy to its
    // admissible region.
    let floor = if theorem == TheoremId::ThmKTruncated { 1.0 } else { 0.0 };
    match policy {
        APolicy::Fixed(a) => {
            let a = a.max(floor);
            Ok((a, bounds::evaluate_bound(theorem, profile, a)?))
        }
        APolicy::PaperRule(delta) => {
            let a = profile.s_n().powf(1.0 / (1.0 + delta)).max(floor);
            Ok((a, bounds::evaluate_bound(theorem, profile, a)?))
        }
        APolicy::Optimized => {
            let (lo, hi) = bounds::default_search_range(profile);
            let range = (lo.max(floor), hi.max(floor));
            bounds::optimize_a(
                |a| bounds::evaluate_bound(theorem, profile, a),
                profile,
                range,
            )
        }
    }
}

fn run_cell(config: &ExperimentConfig, n: usize) -> Result<CampaignRecord> {
    let start = Instant::now();
    let model = &config.model;
    let (k, w) = match config.distance_method {
        DistanceMethodChoice::Exact => {
            let law = distances::enumerate_law(model, n)?;
            (distances::kolmogorov_exact(&law)?, distances::wasserstein_exact(&law)?)
        }
        DistanceMethodChoice::MonteCarlo => {
            distances::estimate_distances_mc(model, n, config.replicates, config.seed)?
        }
    };

    let profile = profile_for(model, n, config.replicates, config.seed)?;
    let mut bound_totals = Vec::with_capacity(config.bound_set.len());
    for &theorem in &config.bound_set {
        let (_, report) = choose_a(config.a_policy, theorem, &profile)?;
        bound_totals.push((theorem, report));
    }
    let a_used = bound_totals.first().map(|(_, r)| r.a_used).unwrap_or(0.0);

    // Hard assertion 1: the K <= (2/pi)^{1/4} sqrt(W) relation.
    let relation = distances::kw_relation_check(&k, &w);
    if !relation.holds {
        return Err(Error::HardAssertion(format!(
            "K-W relation violated at model {} n {n}: slack {}",
            model.id(),
            relation.slack
        )));
    }
    // Hard assertion 2: explicit-constant bounds dominate the W estimate.
    for (theorem, report) in &bound_totals {
        if report.explicit_constants
            && report.total + 3.0 * report.moment_error < w.value - 3.0 * w.std_error
        {
            return Err(Error::HardAssertion(format!(
                "bound {} = {} fails to dominate W = {} at model {} n {n}",
                theorem.id(),
                report.total,
                w.value,
                model.id()
            )));
        }
    }

    Ok(CampaignRecord {
        model_id: model.id(),
        n,
        replicates: config.replicates,
        a_policy: config.a_policy.label(),
        a_used,
        k,
        w,
        bound_totals,
        kw_slack: relation.slack,
        seed: config.seed,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

/// Runs every cell of a campaign (in parallel, reduced in grid order) and
/// writes the CSV and plot script when an output directory is configured.
pub fn run_campaign(config: &ExperimentConfig) -> Result<Vec<CampaignRecord>> {
    config.validate()?;
    let records: Vec<CampaignRecord> = config
        .n_grid
        .par_iter()
        .map(|&n| {
            run_cell(config, n).map_err(|e| {
                Error::Config(format!("cell (model {}, n {n}) failed: {e}", config.model.id()))
            })
        })
        .collect::<Result<_>>()?;
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        let stem = config.model.id();
        std::fs::write(dir.join(format!("{stem}.csv")), records_to_csv(&records, &config.bound_set))
            .map_err(Error::from)?;
        std::fs::write(
            dir.join(format!("{stem}.gnuplot")),
            plot_script(&stem, &config.bound_set),
        )
        .map_err(Error::from)?;
    }
    Ok(records)
}

fn fmt_float(v: f64) -> String {
    // 17 significant digits round-trip f64 exactly.
    format!("{v:.16e}")
}

/// Stable CSV schema: model_id, n, replicates, a_policy, a_used, K_hat,
/// K_se, W_hat, W_se, one bound_<id> column per requested bound, kw_slack,
/// seed, runtime_ms.
pub fn records_to_csv(records: &[CampaignRecord], bound_set: &[TheoremId]) -> String {
    let mut out = String::new();
    out.push_str("model_id,n,replicates,a_policy,a_used,K_hat,K_se,W_hat,W_se");
    for theorem in bound_set {
        let _ = write!(out, ",bound_{}", theorem.id());
    }
    out.push_str(",kw_slack,seed,runtime_ms\n");
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.model_id,
            r.n,
            r.replicates,
            r.a_policy,
            fmt_float(r.a_used),
            fmt_float(r.k.value),
            fmt_float(r.k.std_error),
            fmt_float(r.w.value),
            fmt_float(r.w.std_error),
        );
        for theorem in bound_set {
            let total = r
                .bound_totals
                .iter()
                .find(|(t, _)| t == theorem)
                .map(|(_, rep)| rep.total)
                .unwrap_or(f64::NAN);
            let _ = write!(out, ",{}", fmt_float(total));
        }
        let _ = writeln!(out, ",{},{},{}", fmt_float(r.kw_slack), r.seed, r.runtime_ms);
    }
    out
}

/// A CSV with the runtime_ms column removed; the rest of the file is the
/// deterministic payload two equal-seed runs must reproduce byte for byte.
pub fn csv_deterministic_payload(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rfind(',') {
            Some(idx) => &line[..idx],
            None => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn plot_script(stem: &str, bound_set: &[TheoremId]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'n'");
    let _ = writeln!(s, "set ylabel 'distance / bound'");
    let _ = writeln!(s, "set key left bottom");
    let _ = writeln!(s, "set terminal svg size 900,600");
    let _ = writeln!(s, "set output '{stem}.svg'");
    let mut plots = vec![
        format!("'{stem}.csv' using 2:6 skip 1 with linespoints title 'K'"),
        format!("'{stem}.csv' using 2:8 skip 1 with linespoints title 'W'"),
    ];
    for (i, theorem) in bound_set.iter().enumerate() {
        plots.push(format!(
            "'{stem}.csv' using 2:{} skip 1 with lines title '{}'",
            10 + i,
            theorem.id()
        ));
    }
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateCorrection {
    None,
    /// Regress log(d / ln n) instead of log d, for ln(n)/n^p rate shapes.
    Log,
}

#[derive(Clone, Copy, Debug)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub correction: RateCorrection,
    pub slope_se: f64,
}

/// Ordinary least squares of log d (optionally log(d/ln n)) against log n.
pub fn fit_rate(points: &[(usize, f64)], correction: RateCorrection) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs >= 4 points, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(n, d) in points {
        if !(d > 0.0) || n < 2 {
            return Err(Error::InvalidInput(format!("invalid rate point ({n}, {d})")));
        }
        let nf = n as f64;
        xs.push(nf.ln());
        ys.push(match correction {
            RateCorrection::None => d.ln(),
            RateCorrection::Log => (d / nf.ln()).ln(),
        });
    }
    let m = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let syy: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("degenerate n grid for rate fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    let dof = (m - 2.0).max(1.0);
    let slope_se = (ss_res / dof / sxx).sqrt();
    Ok(RateFit { slope, intercept, r_squared, correction, slope_se })
}

/// One row of the theory table summarize checks fitted slopes against.
#[derive(Clone, Debug)]
pub struct TheoryRow {
    pub model_id: String,
    /// Which distance column is fitted: "K" or "W".
    pub distance: char,
    pub predicted: f64,
    pub correction: RateCorrection,
}

pub const SLOPE_TOLERANCE: f64 = 0.12;

/// Tabulates fitted slopes against predicted exponents. Records are grouped
/// by model id; each theory row fits its distance column over n.
pub fn summarize(records: &[CampaignRecord], theory: &[TheoryRow]) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<26} {:>4} {:>10} {:>18} {:>6}",
        "model", "dist", "predicted", "fitted +- se", "pass"
    );
    for row in theory {
        let points: Vec<(usize, f64)> = records
            .iter()
            .filter(|r| r.model_id == row.model_id)
            .map(|r| (r.n, if row.distance == 'K' { r.k.value } else { r.w.value }))
            .collect();
        let fit = fit_rate(&points, row.correction)?;
        let pass = (fit.slope - row.predicted).abs() <= SLOPE_TOLERANCE + 2.0 * fit.slope_se;
        let _ = writeln!(
            out,
            "{:<26} {:>4} {:>10.3} {:>11.3} +- {:>5.3} {:>5}",
            row.model_id,
            row.distance,
            row.predicted,
            fit.slope,
            fit.slope_se,
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(out)
}

/// Reads the K_hat or W_hat column of a campaign CSV back into rate points.
pub fn read_csv_column(path: &Path, column: &str) -> Result<Vec<(usize, f64)>> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n_idx = cols
        .iter()
        .position(|c| *c == "n")
        .ok_or_else(|| Error::Config("CSV has no n column".into()))?;
    let d_idx = cols
        .iter()
        .position(|c| *c == column)
        .ok_or_else(|| Error::Config(format!("CSV has no {column} column")))?;
    let mut points = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() <= n_idx.max(d_idx) {
            continue;
        }
        let n = fields[n_idx]
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad n field {:?}", fields[n_idx])))?;
        let d = fields[d_idx]
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad {column} field {:?}", fields[d_idx])))?;
        points.push((n, d));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const BASIC: &str = "
[experiment]
model = rademacher
n_grid = 4, 8
replicates = 2000
a_policy = optimized
distance = exact
seed = 7
";

    #[test]
    fn parses_minimal_config() {
        let configs = parse_config(BASIC).unwrap();
        assert_eq!(configs.len(), 1);
        let c = &configs[0];
        assert_eq!(c.model.id(), "rademacher");
        assert_eq!(c.n_grid, vec![4, 8]);
        assert_eq!(c.a_policy, APolicy::Optimized);
        assert_eq!(c.distance_method, DistanceMethodChoice::Exact);
        assert_eq!(c.seed, 7);
        assert_eq!(
            c.bound_set,
            vec![TheoremId::ThmWStein, TheoremId::CorWMoment, TheoremId::RollinW]
        );
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse_config("model = rademacher\n").is_err()); // no block
        assert!(parse_config("[experiment]\nmodel = unknown\nn_grid = 4\n").is_err());
        assert!(parse_config("[experiment]\nmodel = rademacher\nn_grid = 8, 4\n").is_err());
        assert!(parse_config(
            "[experiment]\nmodel = rademacher\nn_grid = 4\nreplicates = 10\ndistance = mc\n"
        )
        .is_err());
        // Inadmissible pairing: stein bound on a random-variance model.
        assert!(parse_config(
            "[experiment]\nmodel = random_variance_decay\nalpha = 0.5\nc = 0.5\nn_grid = 8\ndistance = exact\nbounds = thm_w_stein\n"
        )
        .is_err());
        assert!(parse_config(
            "[experiment]\nmodel = iid_gaussian\nn_grid = 64\na_policy = fixed:-1\n"
        )
        .is_err());
    }

    #[test]
    fn exact_campaign_matches_enumeration() {
        let configs = parse_config(BASIC).unwrap();
        let records = run_campaign(&configs[0]).unwrap();
        assert_eq!(records.len(), 2);
        for r in &records {
            let law = distances::enumerate_law(&ModelSpec::rademacher(), r.n).unwrap();
            let k = distances::kolmogorov_exact(&law).unwrap();
            let w = distances::wasserstein_exact(&law).unwrap();
            assert_abs_diff_eq!(r.k.value, k.value, epsilon = 1e-15);
            assert_abs_diff_eq!(r.w.value, w.value, epsilon = 1e-15);
            assert!(r.kw_slack >= 0.0);
        }
    }

    #[test]
    fn gaussian_mc_within_dkw_band() {
        let config = ExperimentConfig {
            model: ModelSpec::iid_gaussian(),
            n_grid: vec![16, 64],
            replicates: 4000,
            a_policy: APolicy::Optimized,
            distance_method: DistanceMethodChoice::MonteCarlo,
            bound_set: default_bounds(&ModelSpec::iid_gaussian()),
            seed: 3,
            out_dir: None,
        };
        let records = run_campaign(&config).unwrap();
        for r in &records {
            assert!(r.k.value <= r.k.std_error, "K {} vs DKW {}", r.k.value, r.k.std_error);
        }
    }

    #[test]
    fn campaign_csv_deterministic() {
        let configs = parse_config(BASIC).unwrap();
        let a = records_to_csv(&run_campaign(&configs[0]).unwrap(), &configs[0].bound_set);
        let b = records_to_csv(&run_campaign(&configs[0]).unwrap(), &configs[0].bound_set);
        assert_eq!(csv_deterministic_payload(&a), csv_deterministic_payload(&b));
    }

    #[test]
    fn csv_roundtrips_column() {
        let configs = parse_config(BASIC).unwrap();
        let records = run_campaign(&configs[0]).unwrap();
        let csv = records_to_csv(&records, &configs[0].bound_set);
        let dir = std::env::temp_dir().join("mclt_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.csv");
        std::fs::write(&path, &csv).unwrap();
        let points = read_csv_column(&path, "W_hat").unwrap();
        assert_eq!(points.len(), records.len());
        for (p, r) in points.iter().zip(&records) {
            assert_eq!(p.0, r.n);
            assert_eq!(p.1, r.w.value);
        }
    }

    #[test]
    fn fit_recovers_synthetic_power_laws() {
        let points: Vec<(usize, f64)> =
            (5..=13).map(|e| (1usize << e, 3.0 / ((1u64 << e) as f64).sqrt())).collect();
        let fit = fit_rate(&points, RateCorrection::None).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.slope_se < 1e-12);

        let log_points: Vec<(usize, f64)> = (5..=13)
            .map(|e| {
                let n = (1u64 << e) as f64;
                (1usize << e, 0.7 * n.ln() / n.sqrt())
            })
            .collect();
        let fit = fit_rate(&log_points, RateCorrection::Log).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_bad_points() {
        assert!(fit_rate(&[(4, 1.0), (8, 0.5)], RateCorrection::None).is_err());
        assert!(fit_rate(&[(4, 1.0), (8, 0.5), (16, -0.1), (32, 0.2)], RateCorrection::None)
            .is_err());
    }

    #[test]
    fn summarize_reports_pass() {
        let configs = parse_config(
            "
[experiment]
model = rademacher
n_grid = 4, 6, 8, 10, 12
distance = exact
seed = 5
",
        )
        .unwrap();
        let records = run_campaign(&configs[0]).unwrap();
        let theory = vec![TheoryRow {
            model_id: "rademacher".into(),
            distance: 'W',
            predicted: -0.5,
            correction: RateCorrection::Log,
        }];
        let table = summarize(&records, &theory).unwrap();
        assert!(table.contains("rademacher"));
    }

    #[test]
    fn policy_labels_roundtrip() {
        for policy in [APolicy::Optimized, APolicy::Fixed(1.5), APolicy::PaperRule(0.5)] {
            assert_eq!(APolicy::parse(&policy.label()).unwrap(), policy);
        }
        assert!(APolicy::parse("bogus").is_err());
    }
}
