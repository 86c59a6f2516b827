use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pearson product-moment correlation.
///
/// Errors on length mismatch, fewer than two points, or a constant input.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::usage(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::usage("need at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::usage("correlation is undefined for constant input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pairwise preference tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PreferenceCounts {
    pub response1: u64,
    pub response2: u64,
    pub both: u64,
    pub neither: u64,
}

impl PreferenceCounts {
    pub fn as_array(&self) -> [u64; 4] {
        [self.response1, self.response2, self.both, self.neither]
    }

    pub fn total(&self) -> u64 {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Goodness of fit of the four categories against a uniform expectation.
pub fn chi_square_gof(counts: &PreferenceCounts) -> Result<ChiSquareResult> {
    let obs = counts.as_array();
    let total = counts.total();
    if total == 0 {
        return Err(Error::usage("no preference observations"));
    }
    let expected = total as f64 / obs.len() as f64;
    let chi2 = obs
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum::<f64>();
    let df = obs.len() as u32 - 1;
    Ok(ChiSquareResult { chi2, df, p_value: chi_square_sf(chi2, df) })
}

/// Upper tail `P(X >= x)` of a chi-square with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    regularized_gamma_q(f64::from(df) / 2.0, x / 2.0)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln(Gamma(x))` for `x > 0` (Lanczos, reflection below 1/2).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 500;

/// Regularized upper incomplete gamma `Q(a, x)`.
///
/// Series for `x < a + 1`, modified Lentz continued fraction otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson_correlation(&x, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_correlation(&x, &[8.0, 6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson_correlation(&x, &[1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(pearson_correlation(&x, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn sf_closed_forms() {
        // df = 2 is exponential with mean 2.
        for x in [0.1, 1.0, 5.0, 30.0] {
            assert!((chi_square_sf(x, 2) - (-x / 2.0).exp()).abs() < 1e-13);
        }
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
        assert!((chi_square_sf(7.814_727_903_251_178, 3) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn preference_counts() {
        let r = chi_square_gof(&PreferenceCounts { response1: 74, response2: 25, both: 35, neither: 16 }).unwrap();
        assert_eq!(r.df, 3);
        assert!((r.chi2 - 52.186_666_666_666_67).abs() < 1e-9);
        assert!(r.p_value < 1e-10);
        assert!(chi_square_gof(&PreferenceCounts::default()).is_err());
        let flat = chi_square_gof(&PreferenceCounts { response1: 5, response2: 5, both: 5, neither: 5 }).unwrap();
        assert_eq!(flat.chi2, 0.0);
        assert_eq!(flat.p_value, 1.0);
    }
}
