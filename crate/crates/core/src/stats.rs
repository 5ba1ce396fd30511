//! Estimators and tests for comparing replica ensembles with analytic laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

/// Default number of bootstrap resamples.
pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    Insufficient { needed: usize, got: usize },
    #[error("log-log fit needs positive values, got {0}")]
    NonPositive(f64),
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("window [{lo}, {hi}] is not covered by the grid [{first}, {last}] with at least 3 points")]
    WindowOutsideGrid { lo: f64, hi: f64, first: f64, last: f64 },
}

/// Moments, cumulants and jackknife errors of one sample.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased variance (second k-statistic).
    pub variance: f64,
    /// Unbiased third cumulant (third k-statistic).
    pub third_cumulant: f64,
    /// `<x^p> / <x>^p` for `p = 1 ..= p_max`.
    pub normalized_moments: Vec<f64>,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_third_cumulant: f64,
    pub se_normalized_moments: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Stats {
    mean: f64,
    k2: f64,
    k3: f64,
}

// k-statistics from power sums of data centred at `shift`.
fn stats_from_sums(n: f64, s1: f64, s2: f64, s3: f64, shift: f64) -> Stats {
    let d = s1 / n;
    let m2 = s2 / n - d * d;
    let m3 = s3 / n - 3.0 * d * (s2 / n) + 2.0 * d * d * d;
    Stats {
        mean: shift + d,
        k2: if n > 1.0 { n / (n - 1.0) * m2 } else { f64::NAN },
        k3: if n > 2.0 { n * n / ((n - 1.0) * (n - 2.0)) * m3 } else { f64::NAN },
    }
}

fn jackknife_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    ((nf - 1.0) / nf * ss).sqrt()
}

/// Summarize `samples` (at least 3) with normalized moments up to `p_max`.
///
/// Standard errors are leave-one-out jackknife estimates, computed from
/// power sums in `O(n p_max)`.
pub fn summarize(samples: &[f64], p_max: u32) -> Result<SampleSummary, StatsError> {
    let n = samples.len();
    if n < 3 {
        return Err(StatsError::Insufficient { needed: 3, got: n });
    }
    let nf = n as f64;
    let shift = samples.iter().sum::<f64>() / nf;
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for &x in samples {
        let y = x - shift;
        s1 += y;
        s2 += y * y;
        s3 += y * y * y;
    }
    let full = stats_from_sums(nf, s1, s2, s3, shift);

    let p_max = p_max as usize;
    let mut raw = vec![0.0f64; p_max + 1];
    for &x in samples {
        let mut power = 1.0;
        for r in raw.iter_mut().skip(1) {
            power *= x;
            *r += power;
        }
    }
    let normalized_moments: Vec<f64> = (1..=p_max)
        .map(|p| (raw[p] / nf) / full.mean.powi(p as i32))
        .collect();

    let loo = |x: f64| {
        let y = x - shift;
        stats_from_sums(nf - 1.0, s1 - y, s2 - y * y, s3 - y * y * y, shift)
    };
    let se_mean = jackknife_se(samples.iter().map(|&x| loo(x).mean), n);
    let se_variance = jackknife_se(samples.iter().map(|&x| loo(x).k2), n);
    let se_third_cumulant = if n >= 4 {
        jackknife_se(samples.iter().map(|&x| loo(x).k3), n)
    } else {
        f64::NAN
    };
    let se_normalized_moments = (1..=p_max)
        .map(|p| {
            let values = samples.iter().map(|&x| {
                let mean = loo(x).mean;
                ((raw[p] - x.powi(p as i32)) / (nf - 1.0)) / mean.powi(p as i32)
            });
            jackknife_se(values, n)
        })
        .collect();

    Ok(SampleSummary {
        count: n,
        mean: full.mean,
        variance: full.k2,
        third_cumulant: full.k3,
        normalized_moments,
        se_mean,
        se_variance,
        se_third_cumulant,
        se_normalized_moments,
    })
}

/// Outcome of a Kolmogorov-Smirnov comparison.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct KsResult {
    pub distance: f64,
    /// Effective sample size used for critical values.
    pub effective_n: f64,
    pub critical_5: f64,
    pub critical_1: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
}

impl KsResult {
    fn new(distance: f64, effective_n: f64) -> Self {
        let root = effective_n.sqrt();
        let lambda = (root + 0.12 + 0.11 / root) * distance;
        KsResult {
            distance,
            effective_n,
            critical_5: 1.358 / root,
            critical_1: 1.628 / root,
            p_value: kolmogorov_tail(lambda),
        }
    }

    pub fn rejects_at_1(&self) -> bool {
        self.distance > self.critical_1
    }

    pub fn rejects_at_5(&self) -> bool {
        self.distance > self.critical_5
    }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Supremum distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Insufficient { needed: 1, got: 0 });
    }
    let s = sorted(samples);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult::new(d, n))
}

/// Supremum distance between two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Insufficient { needed: 1, got: 0 });
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult::new(d, na * nb / (na + nb)))
}

/// Power-law fit `response ~ size^slope`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ScalingFit {
    pub sizes: Vec<f64>,
    pub responses: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the central 95% bootstrap interval of the slope.
    pub slope_ci_half_width: f64,
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn half_width_95(mut slopes: Vec<f64>) -> f64 {
    slopes.retain(|s| s.is_finite());
    if slopes.len() < 2 {
        return f64::NAN;
    }
    slopes.sort_by(f64::total_cmp);
    let at = |q: f64| slopes[((slopes.len() - 1) as f64 * q).round() as usize];
    0.5 * (at(0.975) - at(0.025))
}

fn check_positive(values: &[f64]) -> Result<(), StatsError> {
    match values.iter().find(|&&v| !(v > 0.0)) {
        Some(&v) => Err(StatsError::NonPositive(v)),
        None => Ok(()),
    }
}

/// Least-squares slope of `log(response)` against `log(size)`.
///
/// The confidence interval comes from a parametric bootstrap that redraws
/// each response from a normal with its standard error.
pub fn loglog_fit(sizes: &[f64], responses: &[f64], errors: &[f64], seed: u64) -> Result<ScalingFit, StatsError> {
    if sizes.len() != responses.len() {
        return Err(StatsError::LengthMismatch(sizes.len(), responses.len()));
    }
    if errors.len() != responses.len() {
        return Err(StatsError::LengthMismatch(errors.len(), responses.len()));
    }
    if sizes.len() < 3 {
        return Err(StatsError::Insufficient { needed: 3, got: sizes.len() });
    }
    check_positive(sizes)?;
    check_positive(responses)?;
    let lx: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = responses.iter().map(|r| r.ln()).collect();
    let (slope, intercept) = ols(&lx, &ly);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slopes = (0..DEFAULT_BOOTSTRAP)
        .map(|_| {
            let y: Vec<f64> = responses
                .iter()
                .zip(errors)
                .map(|(&r, &e)| {
                    let z: f64 = rng.sample(StandardNormal);
                    (r + e.abs() * z).max(r * 1e-6).ln()
                })
                .collect();
            ols(&lx, &y).0
        })
        .collect();

    Ok(ScalingFit {
        sizes: sizes.to_vec(),
        responses: responses.to_vec(),
        errors: errors.to_vec(),
        slope,
        intercept,
        slope_ci_half_width: half_width_95(slopes),
    })
}

/// Log-log fit of `statistic(replicas)` against size, with the confidence
/// interval from resampling replicas within each size.
pub fn loglog_fit_replicas(
    sizes: &[f64],
    replicas: &[Vec<f64>],
    statistic: impl Fn(&[f64]) -> f64,
    seed: u64,
) -> Result<ScalingFit, StatsError> {
    if sizes.len() != replicas.len() {
        return Err(StatsError::LengthMismatch(sizes.len(), replicas.len()));
    }
    if sizes.len() < 3 {
        return Err(StatsError::Insufficient { needed: 3, got: sizes.len() });
    }
    if let Some(r) = replicas.iter().find(|r| r.len() < 2) {
        return Err(StatsError::Insufficient { needed: 2, got: r.len() });
    }
    check_positive(sizes)?;
    let responses: Vec<f64> = replicas.iter().map(|r| statistic(r)).collect();
    check_positive(&responses)?;
    let lx: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = responses.iter().map(|r| r.ln()).collect();
    let (slope, intercept) = ols(&lx, &ly);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot_stats: Vec<Vec<f64>> = vec![Vec::with_capacity(DEFAULT_BOOTSTRAP); sizes.len()];
    let mut scratch = Vec::new();
    let mut slopes = Vec::with_capacity(DEFAULT_BOOTSTRAP);
    for _ in 0..DEFAULT_BOOTSTRAP {
        let y: Vec<f64> = replicas
            .iter()
            .enumerate()
            .map(|(k, r)| {
                scratch.clear();
                scratch.extend((0..r.len()).map(|_| r[rng.random_range(0..r.len())]));
                let s = statistic(&scratch);
                boot_stats[k].push(s);
                s.ln()
            })
            .collect();
        slopes.push(ols(&lx, &y).0);
    }
    let errors = boot_stats
        .iter()
        .map(|s| {
            let finite: Vec<f64> = s.iter().copied().filter(|v| v.is_finite()).collect();
            let m = finite.iter().sum::<f64>() / finite.len() as f64;
            (finite.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (finite.len() as f64 - 1.0)).sqrt()
        })
        .collect();

    Ok(ScalingFit {
        sizes: sizes.to_vec(),
        responses,
        errors,
        slope,
        intercept,
        slope_ci_half_width: half_width_95(slopes),
    })
}

/// Log-log decay exponent of a density trace over a time window.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci_half_width: f64,
}

/// Slope of `log(mean density)` against `log(t)` for grid times inside
/// `window`. `replicas[k][i]` is the density of replica `k` at `times[i]`;
/// with two or more replicas the interval is a replica bootstrap.
pub fn decay_exponent(
    times: &[f64],
    replicas: &[Vec<f64>],
    window: (f64, f64),
    seed: u64,
) -> Result<DecayFit, StatsError> {
    let (lo, hi) = window;
    if replicas.is_empty() {
        return Err(StatsError::Insufficient { needed: 1, got: 0 });
    }
    if let Some(r) = replicas.iter().find(|r| r.len() != times.len()) {
        return Err(StatsError::LengthMismatch(r.len(), times.len()));
    }
    let first = times.first().copied().unwrap_or(f64::NAN);
    let last = times.last().copied().unwrap_or(f64::NAN);
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= lo && times[i] <= hi).collect();
    if !(lo > 0.0 && lo >= first && hi <= last && lo < hi) || idx.len() < 3 {
        return Err(StatsError::WindowOutsideGrid { lo, hi, first, last });
    }
    let lx: Vec<f64> = idx.iter().map(|&i| times[i].ln()).collect();
    let mean_at = |members: &mut dyn Iterator<Item = &Vec<f64>>, count: usize| -> Vec<f64> {
        let mut acc = vec![0.0; idx.len()];
        for r in members {
            for (a, &i) in acc.iter_mut().zip(&idx) {
                *a += r[i];
            }
        }
        acc.iter().map(|a| a / count as f64).collect()
    };
    let mean = mean_at(&mut replicas.iter(), replicas.len());
    check_positive(&mean)?;
    let ly: Vec<f64> = mean.iter().map(|m| m.ln()).collect();
    let (slope, intercept) = ols(&lx, &ly);

    let slope_ci_half_width = if replicas.len() >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slopes = (0..DEFAULT_BOOTSTRAP)
            .map(|_| {
                let picks: Vec<&Vec<f64>> =
                    (0..replicas.len()).map(|_| &replicas[rng.random_range(0..replicas.len())]).collect();
                let m = mean_at(&mut picks.into_iter(), replicas.len());
                let y: Vec<f64> = m.iter().map(|v| v.ln()).collect();
                ols(&lx, &y).0
            })
            .collect();
        half_width_95(slopes)
    } else {
        // normal-theory interval of the regression slope
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
        let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        1.96 * (rss / (n - 2.0) / sxx).sqrt()
    };

    Ok(DecayFit {
        window,
        points: idx.len(),
        slope,
        intercept,
        slope_ci_half_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::Exp1;
    use rand::Rng;

    #[test]
    fn constant_sample() {
        let s = summarize(&[2.5; 10], 3).unwrap();
        assert_abs_diff_eq!(s.variance, 0.0);
        assert_abs_diff_eq!(s.third_cumulant, 0.0);
        assert_abs_diff_eq!(s.normalized_moments[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn one_two_three() {
        let s = summarize(&[1.0, 2.0, 3.0], 2).unwrap();
        assert_abs_diff_eq!(s.mean, 2.0);
        assert_abs_diff_eq!(s.variance, 1.0);
        assert_abs_diff_eq!(s.third_cumulant, 0.0);
        assert!(summarize(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn exponential_second_moment_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let xs: Vec<f64> = (0..1_000_000).map(|_| rng.sample(Exp1)).collect();
        let s = summarize(&xs, 3).unwrap();
        let err = (s.normalized_moments[1] - 2.0).abs();
        assert!(err < 3.0 * s.se_normalized_moments[1], "{} +- {}", s.normalized_moments[1], s.se_normalized_moments[1]);
        assert!((s.third_cumulant - 2.0).abs() < 3.0 * s.se_third_cumulant);
    }

    #[test]
    fn jackknife_mean_error_is_textbook() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let s = summarize(&xs, 1).unwrap();
        assert_abs_diff_eq!(s.se_mean, (s.variance / 50.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn k_statistics_are_unbiased_by_enumeration() {
        let population = [0.0, 1.0, 3.0, 7.0];
        let pn = population.len() as f64;
        let mu = population.iter().sum::<f64>() / pn;
        let kappa2 = population.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / pn;
        let kappa3 = population.iter().map(|x| (x - mu).powi(3)).sum::<f64>() / pn;
        for n in [3usize, 4, 5] {
            let total = population.len().pow(n as u32);
            let (mut k2, mut k3) = (0.0, 0.0);
            for code in 0..total {
                let mut c = code;
                let draw: Vec<f64> = (0..n)
                    .map(|_| {
                        let x = population[c % population.len()];
                        c /= population.len();
                        x
                    })
                    .collect();
                let s = summarize(&draw, 1).unwrap();
                k2 += s.variance;
                k3 += s.third_cumulant;
            }
            assert_abs_diff_eq!(k2 / total as f64, kappa2, epsilon = 1e-10);
            assert_abs_diff_eq!(k3 / total as f64, kappa3, epsilon = 1e-10);
        }
    }

    #[test]
    fn ks_basics() {
        let r = ks_one_sample(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(r.distance, 0.5);
        let a = [0.3, 1.2, 0.7, 2.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap().distance, 0.0);
        assert_abs_diff_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap().distance, 1.0);
        assert!(ks_one_sample(&[], |x| x).is_err());
        assert!(ks_two_sample(&[1.0], &[]).is_err());
    }

    #[test]
    fn ks_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let reps = 200;
        let rejections = (0..reps)
            .filter(|_| {
                let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
                ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap().rejects_at_1()
            })
            .count();
        // nominal rate 1%; 6 or more of 200 would be a 2.5-sigma excess
        assert!(rejections <= 5, "{rejections} rejections");
    }

    #[test]
    fn kolmogorov_tail_values() {
        assert_abs_diff_eq!(kolmogorov_tail(1.358), 0.05, epsilon = 5e-4);
        assert_abs_diff_eq!(kolmogorov_tail(1.628), 0.01, epsilon = 2e-4);
    }

    #[test]
    fn exact_power_law() {
        let sizes = [4.0, 8.0, 16.0, 32.0, 64.0];
        let y: Vec<f64> = sizes.iter().map(|s| s * s).collect();
        let fit = loglog_fit(&sizes, &y, &[0.0; 5], 1).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-12);
        let fit = loglog_fit(&sizes, &[3.0; 5], &[0.0; 5], 1).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);
        assert!(loglog_fit(&sizes[..2], &y[..2], &[0.0; 2], 1).is_err());
        assert!(matches!(loglog_fit(&sizes, &[1.0, 2.0, 0.0, 3.0, 4.0], &[0.0; 5], 1), Err(StatsError::NonPositive(_))));
    }

    #[test]
    fn noisy_quarter_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sizes: Vec<f64> = (0..8).map(|k| 10f64.powf(1.0 + 0.5 * k as f64)).collect();
        let y: Vec<f64> = sizes
            .iter()
            .map(|s| s.powf(0.25) * (1.0 + 0.01 * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let err: Vec<f64> = y.iter().map(|v| 0.01 * v).collect();
        let fit = loglog_fit(&sizes, &y, &err, 2).unwrap();
        assert!((fit.slope - 0.25).abs() < 0.05);
        assert!(fit.slope_ci_half_width > 0.0 && fit.slope_ci_half_width < 0.05);
    }

    #[test]
    fn replica_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sizes = [10.0, 20.0, 40.0, 80.0];
        let replicas: Vec<Vec<f64>> = sizes
            .iter()
            .map(|s| (0..500).map(|_| s * s * rng.sample::<f64, _>(Exp1)).collect())
            .collect();
        let mean = |r: &[f64]| r.iter().sum::<f64>() / r.len() as f64;
        let fit = loglog_fit_replicas(&sizes, &replicas, mean, 3).unwrap();
        assert!((fit.slope - 2.0).abs() < 3.0 * fit.slope_ci_half_width.max(0.02));
        assert!(fit.slope_ci_half_width < 0.1);
    }

    #[test]
    fn decay_slopes() {
        let times: Vec<f64> = (0..=40).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
        let inv: Vec<f64> = times.iter().map(|t| 1.0 / t).collect();
        let fit = decay_exponent(&times, &[inv], (1.0, 1e4), 0).unwrap();
        assert_abs_diff_eq!(fit.slope, -1.0, epsilon = 1e-12);

        let flat = vec![0.3; times.len()];
        let fit = decay_exponent(&times, &[flat.clone(), flat], (10.0, 100.0), 0).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noisy: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                times
                    .iter()
                    .map(|t| t.powf(-0.25) * (1.0 + 0.02 * rng.sample::<f64, _>(StandardNormal)))
                    .collect()
            })
            .collect();
        let fit = decay_exponent(&times, &noisy, (100.0, 1e4), 1).unwrap();
        assert!((fit.slope + 0.25).abs() < 0.05);

        let one = vec![noisy[0].clone()];
        assert!(decay_exponent(&times, &one, (0.5, 10.0), 0).is_err());
        assert!(decay_exponent(&times, &one, (10.0, 1e5), 0).is_err());
    }

    proptest! {
        #[test]
        fn loglog_slope_is_scale_equivariant(
            ys in proptest::collection::vec(0.1f64..100.0, 4),
            lambda in 0.01f64..100.0,
        ) {
            let sizes = [2.0, 4.0, 8.0, 16.0];
            let base = loglog_fit(&sizes, &ys, &[0.0; 4], 0).unwrap();
            let scaled: Vec<f64> = ys.iter().map(|y| y * lambda).collect();
            let fit = loglog_fit(&sizes, &scaled, &[0.0; 4], 0).unwrap();
            prop_assert!((fit.slope - base.slope).abs() < 1e-9);
            prop_assert!((fit.intercept - base.intercept - lambda.ln()).abs() < 1e-9);
        }

        #[test]
        fn summary_shift_invariance(xs in proptest::collection::vec(-50.0f64..50.0, 3..40), c in -1e3f64..1e3) {
            let a = summarize(&xs, 1).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let b = summarize(&shifted, 1).unwrap();
            prop_assert!((b.mean - a.mean - c).abs() < 1e-9);
            prop_assert!((b.variance - a.variance).abs() < 1e-7 * (1.0 + a.variance));
            prop_assert!((b.third_cumulant - a.third_cumulant).abs() < 1e-6 * (1.0 + a.variance.powf(1.5)));
        }
    }
}
