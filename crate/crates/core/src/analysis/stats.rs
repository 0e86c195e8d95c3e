//! Rescaling, goodness of fit, law-of-large-numbers check and exponent fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MomentSet;
use crate::sampler::SampleRecord;

/// `c * s / n^{5/6}` with `c` the rescaling constant of `ms`.
pub fn rescale_values(values: &[f64], ms: &MomentSet, n: usize) -> Result<Vec<f64>> {
    let c = ms.rescale_constant()?;
    let factor = c / (n as f64).powf(5.0 / 6.0);
    Ok(values.iter().map(|s| s * factor).collect())
}

/// Rescaled `S_n` of every record.
pub fn rescale(records: &[SampleRecord], ms: &MomentSet, n: usize) -> Result<Vec<f64>> {
    let s: Vec<f64> = records.iter().map(|r| r.s).collect();
    rescale_values(&s, ms, n)
}

/// One-sample Kolmogorov-Smirnov distance between the empirical CDF of `samples`
/// and `cdf`. Returns `NaN` for an empty sample.
pub fn ks_statistic<F: Fn(f64) -> f64 + Sync>(samples: &[f64], cdf: F) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.par_sort_unstable_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / m) - f).max(f - i as f64 / m)
        })
        .reduce(|| 0.0, f64::max)
}

/// Constants of the law-of-large-numbers thresholds at `n = 1000`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlnTolerances {
    /// Bound on `|mean(S)/n|` in units of `sigma`.
    pub k_s: f64,
    /// Relative bound on `mean(T)/n - sigma^2`.
    pub k_t: f64,
    /// Relative bound on `mean(U)/n - mu4`.
    pub k_u: f64,
}

impl Default for LlnTolerances {
    fn default() -> Self {
        LlnTolerances {
            k_s: 0.05,
            k_t: 0.02,
            k_u: 0.02,
        }
    }
}

/// Deviations of the empirical means from `(0, sigma^2, mu4)` and their thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnCheck {
    pub mean_triple: [f64; 3],
    pub deviations: [f64; 3],
    pub thresholds: [f64; 3],
    pub passed: bool,
}

/// Compares `mean(S, T, U)/n` with `(0, sigma^2, mu4)`. The first threshold scales as
/// `n^{-1/6}`, the others as `n^{-1/2}`, relative to `n = 1000`.
pub fn lln_check(records: &[SampleRecord], ms: &MomentSet, n: usize, tol: &LlnTolerances) -> LlnCheck {
    let count = records.len().max(1) as f64;
    let nf = n as f64;
    let (s, t, u) = records.iter().fold((0.0, 0.0, 0.0), |acc, r| {
        (acc.0 + r.s, acc.1 + r.t, acc.2 + r.u)
    });
    let mean_triple = [s / count / nf, t / count / nf, u / count / nf];
    let deviations = [
        mean_triple[0].abs(),
        (mean_triple[1] - ms.sigma2).abs(),
        (mean_triple[2] - ms.mu4).abs(),
    ];
    let r = nf / 1000.0;
    let thresholds = [
        tol.k_s * ms.sigma2.sqrt() * r.powf(-1.0 / 6.0),
        tol.k_t * ms.sigma2 * r.powf(-0.5),
        tol.k_u * ms.mu4 * r.powf(-0.5),
    ];
    let passed = !records.is_empty() && deviations.iter().zip(&thresholds).all(|(d, t)| d <= t);
    LlnCheck {
        mean_triple,
        deviations,
        thresholds,
        passed,
    }
}

/// `mean |S_n|` over the records.
pub fn mean_abs_s(records: &[SampleRecord]) -> f64 {
    records.iter().map(|r| r.s.abs()).sum::<f64>() / records.len() as f64
}

/// Least-squares slope of `ln(mean |s|)` against `ln n`.
pub fn exponent_fit(pairs: &[(f64, f64)]) -> Result<f64> {
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} distinct values of n, at least 3 required",
            distinct.len()
        )));
    }
    if pairs.iter().any(|&(n, s)| !(n > 0.0 && s > 0.0)) {
        return Err(Error::DegenerateFit("n and mean |s| must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(n, s)| (n.ln(), s.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_reference_cases() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert_eq!(ks_statistic(&[0.5], uniform), 0.5);
        let m = 40;
        let s: Vec<f64> = (1..=m).map(|i| (i as f64 - 0.5) / m as f64).collect();
        assert!((ks_statistic(&s, uniform) - 0.5 / m as f64).abs() < 1e-15);
        assert!(ks_statistic(&[], uniform).is_nan());
    }

    #[test]
    fn fit_recovers_power_laws() {
        let ns = [250.0, 500.0, 1000.0, 2000.0];
        let p: Vec<_> = ns.iter().map(|&n: &f64| (n, 3.0 * n.powf(5.0 / 6.0))).collect();
        assert!((exponent_fit(&p).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        let p: Vec<_> = ns.iter().map(|&n: &f64| (n, 0.2 * n.sqrt())).collect();
        assert!((exponent_fit(&p).unwrap() - 0.5).abs() < 1e-12);
        let same = [(10.0, 1.0), (10.0, 2.0), (10.0, 3.0)];
        assert!(matches!(exponent_fit(&same), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn rescale_five_point_value() {
        let ms = MomentSet::new(2.0, 6.8, 26.0, 110.0);
        let r = rescale_values(&[0.0, 1e3], &ms, 1000).unwrap();
        assert_eq!(r[0], 0.0);
        let expect = (46.24 / 2.0 - 52.0 / 5.0f64).powf(1.0 / 6.0) * 1e3 / (2.0 * 10f64.powf(2.5));
        assert!((r[1] - expect).abs() < 1e-12 * expect);
        let bad = MomentSet::new(1.0, 1.0, 10.0, 100.0);
        assert!(matches!(
            rescale_values(&[1.0], &bad, 10),
            Err(Error::InadmissibleMeasure(_))
        ));
    }
}
