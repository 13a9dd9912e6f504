//! Shared special-function helpers.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Standard normal survival function, 1 - Phi(x), accurate in the upper tail.
pub(crate) fn normal_sf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function.
pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper-tail probability of a chi-squared distribution with `df` degrees of
/// freedom, i.e. the regularized upper incomplete gamma Q(df/2, x/2).
///
/// Even `df` (the Fisher-combination case) uses the exact finite Poisson sum
/// Q(k, x) = e^{-x} sum_{j<k} x^j / j!, evaluated in log space; odd `df`
/// falls back to the continued-fraction/series evaluation.
pub(crate) fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if df % 2 == 0 {
        poisson_cdf_upper(df / 2, x / 2.0)
    } else {
        gamma_ur(df as f64 / 2.0, x / 2.0)
    }
}

/// P(N < k) for N ~ Poisson(lambda): e^{-lambda} sum_{j=0}^{k-1} lambda^j/j!.
fn poisson_cdf_upper(k: usize, lambda: f64) -> f64 {
    debug_assert!(k >= 1 && lambda > 0.0);
    let ln_lambda = lambda.ln();
    let mut log_terms = Vec::with_capacity(k);
    let mut max_log = f64::NEG_INFINITY;
    for j in 0..k {
        let l = -lambda + j as f64 * ln_lambda - ln_gamma(j as f64 + 1.0);
        if l > max_log {
            max_log = l;
        }
        log_terms.push(l);
    }
    if !max_log.is_finite() {
        return 0.0;
    }
    let sum: f64 = log_terms.iter().map(|l| (l - max_log).exp()).sum();
    (max_log + sum.ln()).exp().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chi2_sf_two_df_is_exp() {
        // chi^2_2 survival is exp(-x/2)
        for x in [0.1, 1.0, 5.99146, 40.0] {
            assert_relative_eq!(chi2_sf(x, 2), (-x / 2.0).exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn chi2_sf_four_df_closed_form() {
        // chi^2_4 survival is (1 + x/2) exp(-x/2)
        let x = 11.98293;
        assert_relative_eq!(
            chi2_sf(x, 4),
            (1.0 + x / 2.0) * (-x / 2.0).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn chi2_sf_odd_df_matches_gamma() {
        assert_relative_eq!(chi2_sf(19.0, 19), gamma_ur(9.5, 9.5), max_relative = 1e-12);
    }

    #[test]
    fn normal_quantile_round_trip() {
        assert_relative_eq!(normal_quantile(0.975), 1.959963984540054, epsilon = 1e-9);
        assert_relative_eq!(normal_sf(normal_quantile(0.3)), 0.7, epsilon = 1e-12);
        assert_relative_eq!(normal_sf(0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn chi2_sf_huge_statistic_underflows_to_zero() {
        assert_eq!(chi2_sf(500_000.0, 20), 0.0);
    }
}
