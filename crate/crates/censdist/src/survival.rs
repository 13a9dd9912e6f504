//! Turnbull nonparametric estimation of the distance distribution from
//! interval-censored observations.
//!
//! The estimator can only place probability mass on the *innermost* intervals
//! of the observation set (intersections of maximal cliques of pairwise
//! overlapping observations, all intervals closed). The masses are found by
//! the self-consistency fixed point
//!
//! ```text
//! p_j <- (1/W) sum_i w_i * (a_ij p_j / sum_l a_il p_l)
//! ```
//!
//! where `a_ij = 1` iff support interval `j` is contained in observation `i`
//! and `W` is the total observation weight; this is an EM iteration whose
//! observed-data log-likelihood never decreases. Pointwise confidence bands
//! come from the exponential Greenwood formula applied on the
//! `log(-log S)` scale.

use crate::error::{Error, Result};
use crate::geometry::DistanceInterval;
use crate::special;

/// Default convergence tolerance on the max mass change per iteration.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap for the self-consistency fixed point.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Masses below this are zeroed after convergence and the rest renormalized.
const MASS_PRUNE: f64 = 1e-12;

/// One support interval of the estimator (may be degenerate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnbullInterval {
    pub left: f64,
    pub right: f64,
}

/// Innermost intervals of a set of closed observation intervals, ordered by
/// left endpoint.
///
/// `[p, q]` is innermost iff `p` is some observation's left endpoint, `q` is
/// some observation's right endpoint, `p <= q`, and no observation endpoint
/// splits it (no left endpoint in `(p, q]`, no right endpoint in `[p, q)`).
/// Sorting all endpoints with left endpoints ordered before right endpoints
/// at equal values, these are exactly the adjacent (left, right) pairs.
pub fn turnbull_intervals(observations: &[DistanceInterval]) -> Result<Vec<TurnbullInterval>> {
    if observations.is_empty() {
        return Err(Error::EmptyData("no observation intervals"));
    }
    #[derive(PartialEq)]
    enum Kind {
        Left,
        Right,
    }
    let mut endpoints: Vec<(f64, Kind)> = Vec::with_capacity(2 * observations.len());
    for obs in observations {
        endpoints.push((obs.lower, Kind::Left));
        endpoints.push((obs.upper, Kind::Right));
    }
    endpoints.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| match (&a.1, &b.1) {
            (Kind::Left, Kind::Right) => std::cmp::Ordering::Less,
            (Kind::Right, Kind::Left) => std::cmp::Ordering::Greater,
            _ => std::cmp::Ordering::Equal,
        })
    });
    let mut support = Vec::new();
    for pair in endpoints.windows(2) {
        if pair[0].1 == Kind::Left && pair[1].1 == Kind::Right {
            support.push(TurnbullInterval {
                left: pair[0].0,
                right: pair[1].0,
            });
        }
    }
    Ok(support)
}

/// The fitted estimator: support intervals, their masses, and the step
/// survival function with per-point variance bookkeeping.
///
/// Evaluation points are the right endpoints of the support intervals.
/// `deaths[i]` and `n_at_risk[i]` are the EM-expected analogues of the
/// Kaplan-Meier counts: `deaths[i] = W * mass[i]` and
/// `n_at_risk[i] = W * S(d_{i-1})` with `S(d_0) := 1`. For exact
/// (degenerate) observations they reduce to the usual observable counts.
#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    support: Vec<TurnbullInterval>,
    mass: Vec<f64>,
    eval_points: Vec<f64>,
    survival: Vec<f64>,
    var_loglog: Vec<f64>,
    n_at_risk: Vec<f64>,
    deaths: Vec<f64>,
    n_total: f64,
    iterations: usize,
    residual: f64,
}

impl SurvivalCurve {
    pub fn support(&self) -> &[TurnbullInterval] {
        &self.support
    }

    /// Probability mass per support interval; sums to 1.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Right endpoints of the support intervals, ascending.
    pub fn eval_points(&self) -> &[f64] {
        &self.eval_points
    }

    /// `S(d_i)` at each evaluation point (right-continuous step values).
    pub fn survival(&self) -> &[f64] {
        &self.survival
    }

    /// Variance of `log(-log S(d_i))`; NaN where `S` is 0 or 1.
    pub fn var_loglog(&self) -> &[f64] {
        &self.var_loglog
    }

    pub fn n_at_risk(&self) -> &[f64] {
        &self.n_at_risk
    }

    pub fn deaths(&self) -> &[f64] {
        &self.deaths
    }

    /// Total observation weight.
    pub fn n_total(&self) -> f64 {
        self.n_total
    }

    /// Iterations the fixed point ran for (0 for directly constructed curves).
    pub fn em_iterations(&self) -> usize {
        self.iterations
    }

    /// Max mass change in the final iteration.
    pub fn em_residual(&self) -> f64 {
        self.residual
    }

    /// Right-continuous step evaluation: `S(d) = 1 - sum of masses with
    /// right endpoint <= d`; returns `(S, F)`.
    pub fn evaluate(&self, d: f64) -> (f64, f64) {
        let idx = self.eval_points.partition_point(|&r| r <= d);
        let s = if idx == 0 { 1.0 } else { self.survival[idx - 1] };
        (s, 1.0 - s)
    }

    /// Left limit of the CDF at `d`: mass strictly below `d`.
    pub fn cdf_left_limit(&self, d: f64) -> f64 {
        let idx = self.eval_points.partition_point(|&r| r < d);
        if idx == 0 {
            0.0
        } else {
            1.0 - self.survival[idx - 1]
        }
    }

    /// Curve for exactly observed values with per-value weights: point
    /// masses at the (merged, sorted) values, i.e. the weighted ECDF.
    pub fn from_weighted_points(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyData("no points"));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let intervals: Result<Vec<DistanceInterval>> = points
            .iter()
            .zip(weights)
            .map(|(&d, &w)| DistanceInterval::weighted(d, d, w))
            .collect();
        let merged = merge_observations(&intervals?);
        let support: Vec<TurnbullInterval> = merged
            .iter()
            .map(|o| TurnbullInterval {
                left: o.lower,
                right: o.upper,
            })
            .collect();
        let w_total: f64 = merged.iter().map(|o| o.weight).sum();
        let mass: Vec<f64> = merged.iter().map(|o| o.weight / w_total).collect();
        Ok(build_curve(support, mass, w_total, 0, 0.0))
    }

    /// Weighted ECDF of exact samples (unit weights).
    pub fn from_exact_samples(samples: &[f64]) -> Result<Self> {
        Self::from_weighted_points(samples, &vec![1.0; samples.len()])
    }
}

/// Sorts observations by (lower, upper) and merges identical intervals,
/// summing weights. Makes the fit independent of observation order and makes
/// `k` unit-weight copies bit-identical to one weight-`k` observation.
fn merge_observations(observations: &[DistanceInterval]) -> Vec<DistanceInterval> {
    let mut sorted = observations.to_vec();
    sorted.sort_by(|a, b| a.lower.total_cmp(&b.lower).then(a.upper.total_cmp(&b.upper)));
    let mut merged: Vec<DistanceInterval> = Vec::with_capacity(sorted.len());
    for obs in sorted {
        match merged.last_mut() {
            Some(last) if last.lower == obs.lower && last.upper == obs.upper => {
                last.weight += obs.weight;
            }
            _ => merged.push(obs),
        }
    }
    merged
}

/// Fits the estimator by self-consistency EM over the innermost intervals.
///
/// Stops when the max absolute mass change drops below `tol`; errors with
/// the final residual if `max_iter` is exhausted first.
pub fn fit(observations: &[DistanceInterval], tol: f64, max_iter: usize) -> Result<SurvivalCurve> {
    fit_impl(observations, tol, max_iter, None)
}

/// As [`fit`], recording the observed-data log-likelihood of the mass vector
/// entering each iteration. The likelihood sequence is nondecreasing.
pub fn fit_traced(
    observations: &[DistanceInterval],
    tol: f64,
    max_iter: usize,
    log_likelihoods: &mut Vec<f64>,
) -> Result<SurvivalCurve> {
    fit_impl(observations, tol, max_iter, Some(log_likelihoods))
}

fn fit_impl(
    observations: &[DistanceInterval],
    tol: f64,
    max_iter: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<SurvivalCurve> {
    if observations.is_empty() {
        return Err(Error::EmptyData("no observation intervals"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }

    let merged = merge_observations(observations);
    let support = turnbull_intervals(&merged)?;
    let m = support.len();

    let lefts: Vec<f64> = support.iter().map(|s| s.left).collect();
    let rights: Vec<f64> = support.iter().map(|s| s.right).collect();
    // Support intervals contained in observation i form a contiguous index
    // range because the support is disjoint and sorted.
    let ranges: Vec<(usize, usize)> = merged
        .iter()
        .map(|obs| {
            let lo = lefts.partition_point(|&l| l < obs.lower);
            let hi = rights.partition_point(|&r| r <= obs.upper);
            debug_assert!(lo < hi, "observation contains no support interval");
            (lo, hi)
        })
        .collect();
    let weights: Vec<f64> = merged.iter().map(|o| o.weight).collect();
    let w_total: f64 = weights.iter().sum();

    let mut p = vec![1.0 / m as f64; m];
    let mut prefix = vec![0.0; m + 1];
    let mut factor = vec![0.0; m + 1];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        for j in 0..m {
            prefix[j + 1] = prefix[j] + p[j];
        }
        factor.iter_mut().for_each(|f| *f = 0.0);
        let mut loglik = 0.0;
        for (i, &(lo, hi)) in ranges.iter().enumerate() {
            let denom = prefix[hi] - prefix[lo];
            let scale = weights[i] / denom;
            factor[lo] += scale;
            factor[hi] -= scale;
            if trace.is_some() {
                loglik += weights[i] * denom.ln();
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(loglik);
        }
        let mut acc = 0.0;
        let mut max_delta = 0.0f64;
        for j in 0..m {
            acc += factor[j];
            let next = p[j] * acc / w_total;
            max_delta = max_delta.max((next - p[j]).abs());
            p[j] = next;
        }
        residual = max_delta;
        if max_delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            max_iter,
            residual,
            tol,
        });
    }

    for pj in &mut p {
        if *pj < MASS_PRUNE {
            *pj = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    for pj in &mut p {
        *pj /= total;
    }

    Ok(build_curve(support, p, w_total, iterations, residual))
}

fn build_curve(
    support: Vec<TurnbullInterval>,
    mass: Vec<f64>,
    n_total: f64,
    iterations: usize,
    residual: f64,
) -> SurvivalCurve {
    let m = support.len();
    let eval_points: Vec<f64> = support.iter().map(|s| s.right).collect();
    let mut survival = Vec::with_capacity(m);
    let mut cum = 0.0;
    for &pj in &mass {
        cum += pj;
        survival.push((1.0 - cum).max(0.0));
    }
    survival[m - 1] = 0.0;

    let deaths: Vec<f64> = mass.iter().map(|&pj| pj * n_total).collect();
    let n_at_risk: Vec<f64> = (0..m)
        .map(|j| {
            if j == 0 {
                n_total
            } else {
                survival[j - 1] * n_total
            }
        })
        .collect();

    // Cumulative Greenwood sum; terms contribute only where n_i > y_i > 0
    // (the last point has S = 0 and its band is degenerate anyway).
    let mut gsum = 0.0;
    let var_loglog: Vec<f64> = (0..m)
        .map(|j| {
            let n = n_at_risk[j];
            let y = deaths[j];
            if n > y && y > 0.0 {
                gsum += y / (n * (n - y));
            }
            let s = survival[j];
            if s > 0.0 && s < 1.0 {
                gsum / (s.ln() * s.ln())
            } else {
                f64::NAN
            }
        })
        .collect();

    SurvivalCurve {
        support,
        mass,
        eval_points,
        survival,
        var_loglog,
        n_at_risk,
        deaths,
        n_total,
        iterations,
        residual,
    }
}

/// Pointwise confidence band at level `alpha`, one entry per evaluation
/// point, with `F` bounds mirrored from the `S` bounds.
#[derive(Debug, Clone)]
pub struct ConfidenceBand {
    alpha: f64,
    s_lower: Vec<f64>,
    s_upper: Vec<f64>,
    f_lower: Vec<f64>,
    f_upper: Vec<f64>,
}

impl ConfidenceBand {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s_lower(&self) -> &[f64] {
        &self.s_lower
    }

    pub fn s_upper(&self) -> &[f64] {
        &self.s_upper
    }

    pub fn f_lower(&self) -> &[f64] {
        &self.f_lower
    }

    pub fn f_upper(&self) -> &[f64] {
        &self.f_upper
    }

    /// A band equal to the point estimate everywhere (zero sampling
    /// uncertainty); useful for noiseless inverse-transform sampling.
    pub fn degenerate(curve: &SurvivalCurve, alpha: f64) -> Self {
        let s = curve.survival().to_vec();
        ConfidenceBand {
            alpha,
            f_lower: s.iter().map(|v| 1.0 - v).collect(),
            f_upper: s.iter().map(|v| 1.0 - v).collect(),
            s_lower: s.clone(),
            s_upper: s,
        }
    }
}

/// Exponential Greenwood band: on the `g = log(-log S)` scale the half-width
/// is `h = Q(alpha/2) * sqrt(var_loglog)`, and the bounds are
/// `exp(-exp(g +/- h))` sorted so that lower <= upper. Points where S is 0 or
/// 1 get a degenerate band equal to the point estimate.
pub fn greenwood_band(curve: &SurvivalCurve, alpha: f64) -> Result<ConfidenceBand> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let q = special::normal_quantile(alpha / 2.0);
    let m = curve.eval_points().len();
    let mut s_lower = Vec::with_capacity(m);
    let mut s_upper = Vec::with_capacity(m);
    for j in 0..m {
        let s = curve.survival()[j];
        let var = curve.var_loglog()[j];
        if s <= 0.0 || s >= 1.0 || !var.is_finite() {
            s_lower.push(s);
            s_upper.push(s);
            continue;
        }
        let g = (-s.ln()).ln();
        let h = q * var.sqrt();
        let b1 = (-((g + h).exp())).exp();
        let b2 = (-((g - h).exp())).exp();
        s_lower.push(b1.min(b2));
        s_upper.push(b1.max(b2));
    }
    Ok(ConfidenceBand {
        alpha,
        f_lower: s_upper.iter().map(|v| 1.0 - v).collect(),
        f_upper: s_lower.iter().map(|v| 1.0 - v).collect(),
        s_lower,
        s_upper,
    })
}
