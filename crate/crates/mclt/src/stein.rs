//! Numerical solution of the Stein equation g'(x) - x g(x) = f(x) - E f(Y)
//! for Lipschitz test functions, plus verification of the solution bounds
//! (sup |g| <= 2 L, sup |g'| <= sqrt(2/pi) L, sup |g''| <= 2 L for an
//! L-Lipschitz f) and of the shifted-scaled family f_{s,t}(w) = g((w-s)/t).

use crate::error::{Error, Result};
use crate::normal;

/// Piecewise-linear test function: node values at strictly increasing
/// breakpoints, extended linearly beyond the ends with the boundary slopes.
///
/// This family is closed under the shift-scale reparametrization the scaled
/// checks need, and its normal mean has an exact closed form, which keeps
/// the two-sided solver representation consistent at the +-8 grid ends
/// (the right-tail form divides by phi(8) ~ 5e-15, so f_mean must match
/// the segment integrals to near machine precision).
#[derive(Clone, Debug)]
pub struct PiecewiseLinear {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(Error::InvalidInput("need >= 2 matching breakpoints/values".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite breakpoint or value".into()));
        }
        Ok(PiecewiseLinear { breakpoints, values })
    }

    pub fn identity() -> Self {
        PiecewiseLinear { breakpoints: vec![-1.0, 1.0], values: vec![-1.0, 1.0] }
    }

    pub fn constant(c: f64) -> Self {
        PiecewiseLinear { breakpoints: vec![-1.0, 1.0], values: vec![c, c] }
    }

    pub fn abs() -> Self {
        PiecewiseLinear { breakpoints: vec![-1.0, 0.0, 1.0], values: vec![1.0, 0.0, 1.0] }
    }

    fn slope(&self, seg: usize) -> f64 {
        (self.values[seg + 1] - self.values[seg])
            / (self.breakpoints[seg + 1] - self.breakpoints[seg])
    }

    /// Segment index whose linear extension covers x: 0 left of the first
    /// interior breakpoint, len-2 right of the last.
    fn segment_of(&self, x: f64) -> usize {
        let m = self.breakpoints.len();
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        idx.clamp(1, m - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = self.segment_of(x);
        self.values[s] + self.slope(s) * (x - self.breakpoints[s])
    }

    /// Maximum absolute slope, the Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        (0..self.breakpoints.len() - 1).map(|s| self.slope(s).abs()).fold(0.0, f64::max)
    }

    /// Exact E f(Y) for Y standard normal, by closed-form segment integrals.
    pub fn normal_mean(&self) -> f64 {
        let mut total = 0.0;
        let m = self.breakpoints.len();
        for s in 0..m - 1 {
            let alpha = self.slope(s);
            let beta = self.values[s] - alpha * self.breakpoints[s];
            let a = if s == 0 { f64::NEG_INFINITY } else { self.breakpoints[s] };
            let b = if s == m - 2 { f64::INFINITY } else { self.breakpoints[s + 1] };
            total += normal::linear_segment_mean(alpha, beta, a, b);
        }
        total
    }

    /// The function x -> f(t x + s) / t, piecewise linear again. Solving the
    /// Stein equation for this reparametrization yields the scaled family
    /// member f_{s,t}(w) = g((w - s)/t).
    pub fn shift_scale(&self, s: f64, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidInput(format!("scale t must be positive, got {t}")));
        }
        let breakpoints = self.breakpoints.iter().map(|b| (b - s) / t).collect();
        let values = self
            .breakpoints
            .iter()
            .map(|&b| self.eval(b) / t)
            .collect();
        PiecewiseLinear::new(breakpoints, values)
    }
}

/// Uniform solver grid; the default spans [-8, 8] at spacing 1/512.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { lo: -8.0, hi: 8.0, step: 1.0 / 512.0 }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.lo < self.hi) || !(self.step > 0.0) {
            return Err(Error::InvalidInput("grid needs lo < hi and step > 0".into()));
        }
        if self.lo > -8.0 || self.hi < 8.0 {
            return Err(Error::InvalidInput("grid must span at least [-8, 8]".into()));
        }
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        Ok((0..=n).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

#[derive(Clone, Debug)]
pub struct SteinSolution {
    pub grid: Vec<f64>,
    pub g_values: Vec<f64>,
    pub g_prime_values: Vec<f64>,
    pub f_mean: f64,
    /// |left form - right form| at x = 0, i.e. the full integral of
    /// (f - f_mean) phi divided by phi(0); near zero iff f_mean is
    /// consistent with the segment integrals.
    pub two_sided_gap: f64,
}

impl SteinSolution {
    /// First-order tail approximation g(x) ~ -(f(x) - f_mean)/x beyond the
    /// grid; never used inside bound suprema.
    pub fn tail_value(&self, f: &PiecewiseLinear, x: f64) -> f64 {
        -(f.eval(x) - self.f_mean) / x
    }
}

/// Solves the Stein equation on the grid via the stable two-sided
/// representation: for x <= 0, g(x) = [int_{-inf}^x (f - f_mean) phi] / phi(x),
/// and for x > 0 the upper-tail form with a sign flip. Each tail integral is
/// an exact sum of closed-form segment integrals, so numerator and
/// denominator shrink together and the ratio never overflows on [-8, 8].
pub fn stein_solve(f: &PiecewiseLinear, grid_spec: GridSpec) -> Result<SteinSolution> {
    let grid = grid_spec.points()?;
    let f_mean = f.normal_mean();
    if !f_mean.is_finite() {
        return Err(Error::InvalidInput("non-finite f mean".into()));
    }

    // Prefix integrals J_i = int_{-inf}^{b_i} (f - f_mean) phi at each
    // breakpoint, and the matching suffix integrals from +inf.
    let m = f.breakpoints.len();
    let mut prefix = vec![0.0; m];
    for i in 1..m {
        let s = i - 1;
        let alpha = f.slope(s);
        let beta = f.values[s] - alpha * f.breakpoints[s] - f_mean;
        let a = if s == 0 { f64::NEG_INFINITY } else { f.breakpoints[s] };
        prefix[i] = prefix[i - 1] + normal::linear_segment_mean(alpha, beta, a, f.breakpoints[i]);
    }
    let mut suffix = vec![0.0; m];
    for i in (0..m - 1).rev() {
        let s = i;
        let alpha = f.slope(s);
        let beta = f.values[s] - alpha * f.breakpoints[s] - f_mean;
        let b = if s == m - 2 { f64::INFINITY } else { f.breakpoints[s + 1] };
        suffix[i] = suffix[i + 1] + normal::linear_segment_mean(alpha, beta, f.breakpoints[i], b);
    }

    // Tail integral up to (lower = true) or from (lower = false) x.
    // prefix[s] covers (-inf, b_s] and the first segment's line extends to
    // -inf, so the remainder always starts at b_s (or -inf for s = 0);
    // symmetrically for the suffix side.
    let tail_integral = |x: f64, lower: bool| {
        let s = f.segment_of(x);
        let alpha = f.slope(s);
        let beta = f.values[s] - alpha * f.breakpoints[s] - f_mean;
        if lower {
            let a = if s == 0 { f64::NEG_INFINITY } else { f.breakpoints[s] };
            prefix[s] + normal::linear_segment_mean(alpha, beta, a, x)
        } else {
            let b = if s == m - 2 { f64::INFINITY } else { f.breakpoints[s + 1] };
            suffix[s + 1] + normal::linear_segment_mean(alpha, beta, x, b)
        }
    };

    let mut g_values = Vec::with_capacity(grid.len());
    let mut g_prime_values = Vec::with_capacity(grid.len());
    for &x in &grid {
        let g = if x <= 0.0 {
            tail_integral(x, true) / normal::pdf(x)
        } else {
            -tail_integral(x, false) / normal::pdf(x)
        };
        if !g.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite solution at x = {x}")));
        }
        g_values.push(g);
        g_prime_values.push(x * g + f.eval(x) - f_mean);
    }
    let two_sided_gap = ((tail_integral(0.0, true) + tail_integral(0.0, false))
        / normal::pdf(0.0))
    .abs();
    Ok(SteinSolution { grid, g_values, g_prime_values, f_mean, two_sided_gap })
}

/// Maximum residual |g'(x) - x g(x) - (f(x) - f_mean)| over interior grid
/// points; the solution invariant requires <= 1e-6.
pub fn residual_max(sol: &SteinSolution, f: &PiecewiseLinear) -> f64 {
    let n = sol.grid.len();
    (1..n - 1)
        .map(|i| {
            let x = sol.grid[i];
            (sol.g_prime_values[i] - x * sol.g_values[i] - (f.eval(x) - sol.f_mean)).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug)]
pub struct BoundCheck {
    pub sup: f64,
    pub limit: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(sup: f64, limit: f64, allowance: f64) -> Self {
        BoundCheck { sup, limit, holds: sup <= limit + allowance }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SteinBoundReport {
    pub g_sup: BoundCheck,
    pub g_prime_sup: BoundCheck,
    pub g_second_sup: BoundCheck,
    pub all_hold: bool,
}

/// Grid suprema of |g|, |g'| and a central-difference |g''| against the
/// explicit solution bounds 2 L, sqrt(2/pi) L, 2 L. The second derivative
/// comes from differencing g' rather than differentiating the equation, so
/// the check stays independent of the solve; it gets a 1e-4 allowance.
pub fn stein_bound_check(sol: &SteinSolution, f_lipschitz: f64) -> SteinBoundReport {
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let n = sol.grid.len();
    let g2_sup = (1..n - 1)
        .map(|i| {
            let h2 = sol.grid[i + 1] - sol.grid[i - 1];
            ((sol.g_prime_values[i + 1] - sol.g_prime_values[i - 1]) / h2).abs()
        })
        .fold(0.0, f64::max);
    let g_sup = BoundCheck::new(sup(&sol.g_values), 2.0 * f_lipschitz, 0.0);
    let g_prime_sup = BoundCheck::new(
        sup(&sol.g_prime_values),
        (2.0 / std::f64::consts::PI).sqrt() * f_lipschitz,
        0.0,
    );
    let g_second_sup = BoundCheck::new(g2_sup, 2.0 * f_lipschitz, 1e-4);
    let all_hold = g_sup.holds && g_prime_sup.holds && g_second_sup.holds;
    SteinBoundReport { g_sup, g_prime_sup, g_second_sup, all_hold }
}

#[derive(Clone, Copy, Debug)]
pub struct ScaledFamilyReport {
    pub f_sup: BoundCheck,
    pub f_prime_sup: BoundCheck,
    pub f_second_sup: BoundCheck,
    pub identity_max_error: f64,
    pub identity_holds: bool,
    pub all_hold: bool,
}

/// Verifies the shifted-scaled solution family f_{s,t}(w) = g((w - s)/t),
/// where g solves the equation for x -> h(t x + s)/t: the defining identity
/// t^2 f'_{s,t}(w) - (w - s) f_{s,t}(w) = h(w) - E h(t Y + s) at grid
/// points (adaptive quadrature for the right side), and the scaled bounds
/// sup |f| <= 2 L_h, sup |f'| <= L_h / t, sup |f''| <= 2 L_h / t^2.
pub fn scaled_family_check(h: &PiecewiseLinear, s: f64, t: f64) -> Result<ScaledFamilyReport> {
    let f = h.shift_scale(s, t)?;
    let sol = stein_solve(&f, GridSpec::default())?;
    let l_h = h.lipschitz();

    // E h(t Y + s) by quadrature, independent of the closed forms above.
    let h_mean = normal::adaptive_simpson(
        &|y: f64| h.eval(t * y + s) * normal::pdf(y),
        -12.0,
        12.0,
        1e-10,
    );

    let n = sol.grid.len();
    let mut identity_max_error = 0.0f64;
    for i in 1..n - 1 {
        let x = sol.grid[i];
        let w = t * x + s;
        // f_{s,t}(w) = g(x), f'_{s,t}(w) = g'(x)/t.
        let lhs = t * sol.g_prime_values[i] - (w - s) * sol.g_values[i];
        let rhs = h.eval(w) - h_mean;
        identity_max_error = identity_max_error.max((lhs - rhs).abs());
    }

    let sup = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let g2_sup = (1..n - 1)
        .map(|i| {
            let h2 = sol.grid[i + 1] - sol.grid[i - 1];
            ((sol.g_prime_values[i + 1] - sol.g_prime_values[i - 1]) / h2).abs()
        })
        .fold(0.0, f64::max);
    let f_sup = BoundCheck::new(sup(&sol.g_values), 2.0 * l_h, 0.0);
    let f_prime_sup = BoundCheck::new(sup(&sol.g_prime_values) / t, l_h / t, 0.0);
    let f_second_sup = BoundCheck::new(g2_sup / (t * t), 2.0 * l_h / (t * t), 1e-4 / (t * t));
    let identity_holds = identity_max_error <= 1e-5;
    let all_hold = f_sup.holds && f_prime_sup.holds && f_second_sup.holds && identity_holds;
    Ok(ScaledFamilyReport {
        f_sup,
        f_prime_sup,
        f_second_sup,
        identity_max_error,
        identity_holds,
        all_hold,
    })
}

/// Seeded random 1-Lipschitz piecewise-linear test functions for property
/// checks: breakpoints spread over [-6, 6], slopes in [-1, 1].
pub fn random_lipschitz_family(seed: u64, count: usize) -> Vec<PiecewiseLinear> {
    use crate::rng::CounterRng;
    (0..count)
        .map(|i| {
            let mut rng = CounterRng::new(seed, &[0x57e1, i as u64]);
            let pieces = 2 + (rng.next() % 7) as usize;
            let mut breakpoints: Vec<f64> =
                (0..=pieces).map(|_| -6.0 + 12.0 * rng.uniform()).collect();
            breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            while breakpoints.len() < 2 {
                breakpoints.push(breakpoints.last().unwrap() + 1.0);
            }
            let mut values = vec![rng.uniform() * 2.0 - 1.0];
            for w in breakpoints.windows(2) {
                let slope = rng.uniform() * 2.0 - 1.0;
                values.push(values.last().unwrap() + slope * (w[1] - w[0]));
            }
            PiecewiseLinear::new(breakpoints, values).expect("valid random function")
        })
        .collect()
}
