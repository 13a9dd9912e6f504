//! Two-sample comparison of censored event collections.
//!
//! The centerpiece is the Monte Carlo U-test: both collections are fitted
//! once, then each trial draws fresh uncensored samples from the two fitted
//! curves and runs a one-sided Mann-Whitney U-test; the per-trial p-values
//! are aggregated with Fisher's method, `T = -2 sum log p_i ~ chi^2_{2k}`
//! under the null. KS and MMD statistics quantify the distance between two
//! reconstructions, and the chi-squared uniformity / Holm-Bonferroni helpers
//! support Type I error calibration studies.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::EventCollection;
use crate::sampling::{self, SamplerConfig};
use crate::special;
use crate::survival::{self, SurvivalCurve};

/// Largest `m * n` for which the tie-free U distribution is enumerated
/// exactly; larger products use the tie-corrected normal approximation.
pub const EXACT_U_LIMIT: usize = 400;

/// Iteration budget for the fits inside [`mc_u_test`]. Wider than the plain
/// [`survival::DEFAULT_MAX_ITER`]: experiment-scale interval sets sometimes
/// need a few more thousand self-consistency steps to pass the tolerance,
/// and a Monte Carlo run should not die on one slow fit.
pub const MC_FIT_MAX_ITER: usize = 200_000;

/// p-values are floored here before taking logs in Fisher's method.
pub const P_VALUE_FLOOR: f64 = 1e-300;

/// How the U-test p-value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UMethod {
    Exact,
    NormalApproximation,
}

/// One-sided Mann-Whitney U-test result. The alternative is "the first
/// sample stochastically dominates the second" (large values of `u`).
#[derive(Debug, Clone)]
pub struct UTestResult {
    pub u: f64,
    pub p: f64,
    pub method: UMethod,
}

/// Direction of the dominance alternative in [`mc_u_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    ADominatesB,
    BDominatesA,
}

/// Outcome of a Monte Carlo U-test run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TestReport {
    /// Fisher combined statistic `T = -2 sum log p_i`.
    pub statistic: f64,
    /// Upper-tail probability of `T` under chi^2 with `2 * n_trials` df.
    pub p_value: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub alternative: Alternative,
    pub per_trial_p: Vec<f64>,
}

/// One-sided Mann-Whitney U-test with midranks for ties.
///
/// `u = R_1 - m(m+1)/2` where `R_1` sums sample A's ranks in the merged
/// order; the p-value is `P(U >= u)` under the null. Tie-free samples with
/// `m * n <= 400` use the exact count recursion, everything else the normal
/// approximation with tie-corrected variance and continuity correction.
pub fn mann_whitney_u(s_a: &[f64], s_b: &[f64]) -> Result<UTestResult> {
    if s_a.is_empty() || s_b.is_empty() {
        return Err(Error::InvalidInput(
            "mann_whitney_u requires two nonempty samples".into(),
        ));
    }
    if s_a.iter().chain(s_b).any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("samples contain NaN".into()));
    }
    let m = s_a.len();
    let n = s_b.len();
    let mut merged: Vec<(f64, bool)> = s_a
        .iter()
        .map(|&x| (x, true))
        .chain(s_b.iter().map(|&x| (x, false)))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut r1 = 0.0;
    let mut tie_groups: Vec<usize> = Vec::new();
    let mut has_ties = false;
    let mut i = 0;
    while i < merged.len() {
        let mut j = i + 1;
        while j < merged.len() && merged[j].0 == merged[i].0 {
            j += 1;
        }
        let size = j - i;
        if size > 1 {
            has_ties = true;
        }
        // ranks i+1 ..= j share the midrank (i + j + 1) / 2
        let midrank = (i + j + 1) as f64 / 2.0;
        let a_in_group = merged[i..j].iter().filter(|(_, is_a)| *is_a).count();
        r1 += a_in_group as f64 * midrank;
        tie_groups.push(size);
        i = j;
    }
    let u = r1 - (m * (m + 1)) as f64 / 2.0;

    if m * n <= EXACT_U_LIMIT && !has_ties {
        let p = exact_u_upper_tail(m, n, u.round() as usize);
        Ok(UTestResult {
            u,
            p,
            method: UMethod::Exact,
        })
    } else {
        let p = normal_u_upper_tail(u, m, n, &tie_groups);
        Ok(UTestResult {
            u,
            p,
            method: UMethod::NormalApproximation,
        })
    }
}

/// As [`mann_whitney_u`] but always via the normal approximation, mainly to
/// check the approximation against the exact tail at small sizes.
pub fn mann_whitney_u_normal(s_a: &[f64], s_b: &[f64]) -> Result<UTestResult> {
    let exact = mann_whitney_u(s_a, s_b)?;
    if exact.method == UMethod::NormalApproximation {
        return Ok(exact);
    }
    // tie-free by construction when the exact path was taken
    let ones = vec![1usize; s_a.len() + s_b.len()];
    Ok(UTestResult {
        u: exact.u,
        p: normal_u_upper_tail(exact.u, s_a.len(), s_b.len(), &ones),
        method: UMethod::NormalApproximation,
    })
}

/// Exact `P(U >= u)` for tie-free samples via the count recursion
/// `N(i, j, u) = N(i-1, j, u-j) + N(i, j-1, u)` (the largest observation is
/// either from A, beating all j B's, or from B, beating none).
fn exact_u_upper_tail(m: usize, n: usize, u: usize) -> f64 {
    let umax = m * n;
    if u == 0 {
        return 1.0;
    }
    // counts[j][v] for the current number of A's
    let mut counts = vec![vec![0.0f64; umax + 1]; n + 1];
    for row in counts.iter_mut() {
        row[0] = 1.0;
    }
    for _i in 1..=m {
        let prev = counts.clone();
        for j in 0..=n {
            for v in 0..=umax {
                let from_a = if v >= j { prev[j][v - j] } else { 0.0 };
                let from_b = if j >= 1 { counts[j - 1][v] } else { 0.0 };
                counts[j][v] = from_a + from_b;
            }
        }
    }
    let total: f64 = counts[n].iter().sum();
    let favourable: f64 = counts[n][u.min(umax)..].iter().sum();
    favourable / total
}

fn normal_u_upper_tail(u: f64, m: usize, n: usize, tie_groups: &[usize]) -> f64 {
    let mf = m as f64;
    let nf = n as f64;
    let total = mf + nf;
    let mean = mf * nf / 2.0;
    let tie_term: f64 = tie_groups
        .iter()
        .map(|&t| {
            let tf = t as f64;
            tf * tf * tf - tf
        })
        .sum();
    let var = mf * nf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if var <= 0.0 {
        // every observation tied: U is degenerate at its mean
        return 1.0;
    }
    let z = (u - mean - 0.5) / var.sqrt();
    special::normal_sf(z).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Fisher's combined probability test: `T = -2 sum log p_i` and the
/// upper-tail probability of `T` under chi^2 with `2k` degrees of freedom.
/// p-values are floored at [`P_VALUE_FLOOR`] before logging.
pub fn fisher_combine(p_values: &[f64]) -> Result<(f64, f64)> {
    if p_values.is_empty() {
        return Err(Error::InvalidInput(
            "fisher_combine requires at least one p-value".into(),
        ));
    }
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "p-value {p} outside [0, 1]"
            )));
        }
    }
    let t = -2.0
        * p_values
            .iter()
            .map(|&p| p.max(P_VALUE_FLOOR).ln())
            .sum::<f64>();
    let p = special::chi2_sf(t, 2 * p_values.len());
    Ok((t, p))
}

/// Monte Carlo U-test for two censored event collections.
///
/// Fits both curves and their bands once, then runs `n_trials` trials; trial
/// `t` draws `m` samples from the first fitted curve and `n` from the second
/// on an RNG substream derived from `(config.seed, t)`, so results are
/// independent of how trials are scheduled across threads. Per-trial
/// p-values are combined with Fisher's method in trial order.
pub fn mc_u_test(
    e_a: &EventCollection,
    e_b: &EventCollection,
    m: usize,
    n: usize,
    n_trials: usize,
    alternative: Alternative,
    config: &SamplerConfig,
) -> Result<TestReport> {
    if m == 0 || n == 0 || n_trials == 0 {
        return Err(Error::InvalidInput(
            "mc_u_test requires m, n, n_trials >= 1".into(),
        ));
    }
    let curve_a = survival::fit(e_a.intervals(), survival::DEFAULT_TOL, MC_FIT_MAX_ITER)?;
    let curve_b = survival::fit(e_b.intervals(), survival::DEFAULT_TOL, MC_FIT_MAX_ITER)?;
    let band_a = survival::greenwood_band(&curve_a, config.alpha)?;
    let band_b = survival::greenwood_band(&curve_b, config.alpha)?;

    let per_trial_p = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = sampling::substream(config.seed, trial as u64);
            let s_a =
                sampling::draw_with_rng(&curve_a, &band_a, m, config.interpolation, &mut rng);
            let s_b =
                sampling::draw_with_rng(&curve_b, &band_b, n, config.interpolation, &mut rng);
            let result = match alternative {
                Alternative::ADominatesB => mann_whitney_u(&s_a, &s_b)?,
                Alternative::BDominatesA => mann_whitney_u(&s_b, &s_a)?,
            };
            Ok(result.p)
        })
        .collect::<Result<Vec<f64>>>()?;

    let (statistic, p_value) = fisher_combine(&per_trial_p)?;
    Ok(TestReport {
        statistic,
        p_value,
        n_trials,
        seed: config.seed,
        alternative,
        per_trial_p,
    })
}

/// Kolmogorov-Smirnov statistic `max_d |F_A(d) - F_B(d)|` between two step
/// CDFs, exact: the supremum is attained at (or just before) an evaluation
/// point of one of the curves, so both one-sided limits are checked at every
/// point of the union.
pub fn ks_statistic(a: &SurvivalCurve, b: &SurvivalCurve) -> f64 {
    let mut k = 0.0f64;
    for &d in a.eval_points().iter().chain(b.eval_points()) {
        let right = (a.evaluate(d).1 - b.evaluate(d).1).abs();
        let left = (a.cdf_left_limit(d) - b.cdf_left_limit(d)).abs();
        k = k.max(right).max(left);
    }
    k
}

/// A positive-definite kernel on distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// Radial basis function kernel `exp(-(x - y)^2 / (2 sigma^2))`.
    Rbf { sigma: f64 },
}

impl Kernel {
    pub fn rbf(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be positive and finite, got {sigma}"
            )));
        }
        Ok(Kernel::Rbf { sigma })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Kernel::Rbf { sigma } => {
                let d = x - y;
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

/// Biased empirical maximum mean discrepancy (V-statistic, diagonal terms
/// included): the square root of
/// `mean k(a, a') + mean k(b, b') - 2 mean k(a, b)`, clamped at zero before
/// the root.
pub fn mmd(s_a: &[f64], s_b: &[f64], kernel: &Kernel) -> Result<f64> {
    if s_a.is_empty() || s_b.is_empty() {
        return Err(Error::InvalidInput(
            "mmd requires two nonempty samples".into(),
        ));
    }
    let mean_kernel = |xs: &[f64], ys: &[f64]| -> f64 {
        let mut sum = 0.0;
        for &x in xs {
            for &y in ys {
                sum += kernel.eval(x, y);
            }
        }
        sum / (xs.len() as f64 * ys.len() as f64)
    };
    let v = mean_kernel(s_a, s_a) + mean_kernel(s_b, s_b) - 2.0 * mean_kernel(s_a, s_b);
    Ok(v.max(0.0).sqrt())
}

/// Median of all pairwise absolute distances in the combined sample (the
/// bandwidth heuristic for [`mmd`]). A zero median falls back to the
/// smallest positive pairwise distance; if every pair coincides the
/// bandwidth is degenerate.
pub fn median_bandwidth(s_a: &[f64], s_b: &[f64]) -> Result<f64> {
    let combined: Vec<f64> = s_a.iter().chain(s_b).copied().collect();
    if combined.len() < 2 {
        return Err(Error::InvalidInput(
            "median_bandwidth requires a combined sample of at least 2 points".into(),
        ));
    }
    let mut dists = Vec::with_capacity(combined.len() * (combined.len() - 1) / 2);
    for i in 0..combined.len() {
        for j in (i + 1)..combined.len() {
            dists.push((combined[i] - combined[j]).abs());
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        (dists[mid - 1] + dists[mid]) / 2.0
    };
    if median > 0.0 {
        return Ok(median);
    }
    dists
        .iter()
        .find(|&&d| d > 0.0)
        .copied()
        .ok_or(Error::DegenerateBandwidth)
}

/// Pearson chi-squared test of uniformity over `n_bins` equal-width bins of
/// `[0, 1]` (`[i/n, (i+1)/n)`, last bin closed). Returns the statistic and
/// the upper-tail probability under chi^2 with `n_bins - 1` df.
pub fn chi2_uniformity(p_values: &[f64], n_bins: usize) -> Result<(f64, f64)> {
    if p_values.is_empty() {
        return Err(Error::InvalidInput(
            "chi2_uniformity requires at least one value".into(),
        ));
    }
    if n_bins < 2 {
        return Err(Error::InvalidInput("n_bins must be at least 2".into()));
    }
    let mut counts = vec![0usize; n_bins];
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "value {p} outside [0, 1]"
            )));
        }
        let bin = ((p * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    let expected = p_values.len() as f64 / n_bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&o| {
            let diff = o as f64 - expected;
            diff * diff / expected
        })
        .sum();
    let p = special::chi2_sf(chi2, n_bins - 1);
    Ok((chi2, p))
}

/// Holm-Bonferroni step-down correction: walking the p-values in ascending
/// order, reject while `p_(i) <= alpha / (m - i + 1)`; the first failure
/// stops the procedure. Flags are returned in the input order. Requires
/// `alpha` in (0, 1).
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut reject = vec![false; m];
    for (rank, &i) in order.iter().enumerate() {
        if p_values[i] <= alpha / (m - rank) as f64 {
            reject[i] = true;
        } else {
            break;
        }
    }
    reject
}
