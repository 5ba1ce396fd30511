//! Large-`N` scaling functions for the complete graph.
//!
//! With `theta(tau) = sum_{k in Z} (-1)^k exp(-k^2 tau)` the scaled halting
//! time has CDF `theta` and density `theta'`. Poisson summation gives the
//! dual form
//!
//! ```text
//! theta(tau) = 2 sqrt(pi / tau) * sum_{n >= 0} exp(-a_n / tau),   a_n = pi^2 (2n + 1)^2 / 4
//! ```
//!
//! which converges fast exactly where the direct series does not. Each
//! function evaluates the direct series for `tau >= BRANCH_POINT` and the
//! resummed one below it.

use std::f64::consts::PI;

use super::AnalyticsError;

/// Switch point between the direct and resummed series.
pub const BRANCH_POINT: f64 = 1.0;

const TERM_FLOOR: f64 = 1e-15;
const MAX_TERMS: u32 = 200;

fn check_tau(tau: f64) -> Result<(), AnalyticsError> {
    if tau > 0.0 && tau.is_finite() || tau == f64::INFINITY {
        Ok(())
    } else {
        Err(AnalyticsError::Domain {
            name: "tau",
            value: tau,
            requirement: "tau > 0",
        })
    }
}

// sum_{k >= 1} (-1)^k k^(2 * power) exp(-k^2 tau)
fn direct_sum(tau: f64, power: i32) -> f64 {
    let mut sum = 0.0;
    for k in 1..=MAX_TERMS {
        let k2 = (k * k) as f64;
        let term = k2.powi(power) * (-k2 * tau).exp();
        sum += if k % 2 == 0 { term } else { -term };
        if term < TERM_FLOOR {
            break;
        }
    }
    sum
}

// sum_{n >= 0} exp(-a_n / tau) * poly(a_n / tau)
fn dual_sum(tau: f64, poly: impl Fn(f64) -> f64) -> f64 {
    let mut sum = 0.0;
    for n in 0..MAX_TERMS {
        let odd = (2 * n + 1) as f64;
        let x = PI * PI * odd * odd / (4.0 * tau);
        sum += (-x).exp() * poly(x);
        if (-x).exp() * (1.0 + x * x) < TERM_FLOOR * 1e-3 {
            break;
        }
    }
    sum
}

/// Direct series of the scaled density, accurate for `tau` of order one or larger.
pub fn pdf_direct(tau: f64) -> f64 {
    -2.0 * direct_sum(tau, 1)
}

/// Resummed series of the scaled density, accurate for small `tau`.
pub fn pdf_resummed(tau: f64) -> f64 {
    // d/dtau [tau^(-1/2) e^(-a/tau)] = tau^(-3/2) e^(-a/tau) (a/tau - 1/2)
    2.0 * PI.sqrt() * tau.powf(-1.5) * dual_sum(tau, |x| x - 0.5)
}

pub fn cdf_direct(tau: f64) -> f64 {
    1.0 + 2.0 * direct_sum(tau, 0)
}

pub fn cdf_resummed(tau: f64) -> f64 {
    2.0 * (PI / tau).sqrt() * dual_sum(tau, |_| 1.0)
}

/// Derivative of the scaled density.
pub fn pdf_derivative_direct(tau: f64) -> f64 {
    2.0 * direct_sum(tau, 2)
}

pub fn pdf_derivative_resummed(tau: f64) -> f64 {
    // second derivative of tau^(-1/2) e^(-a/tau), written in x = a/tau:
    // tau^(-5/2) e^(-x) (x^2 - 3x + 3/4)
    2.0 * PI.sqrt() * tau.powf(-2.5) * dual_sum(tau, |x| x * x - 3.0 * x + 0.75)
}

/// Density of the scaled halting time `T/N` on `K_{N+1}` as `N -> infinity`:
/// `sum_k (-1)^(k+1) k^2 exp(-k^2 tau)`.
pub fn scaled_halting_pdf(tau: f64) -> Result<f64, AnalyticsError> {
    check_tau(tau)?;
    Ok(if tau >= BRANCH_POINT {
        pdf_direct(tau)
    } else {
        pdf_resummed(tau)
    })
}

/// CDF of the scaled halting time.
pub fn scaled_halting_cdf(tau: f64) -> Result<f64, AnalyticsError> {
    check_tau(tau)?;
    Ok(if tau >= BRANCH_POINT {
        cdf_direct(tau)
    } else {
        cdf_resummed(tau)
    })
}

/// Laplace transform of the scaled density, `pi sqrt(s) / sinh(pi sqrt(s))`.
pub fn laplace_q(sigma: f64) -> Result<f64, AnalyticsError> {
    if !(sigma >= 0.0) {
        return Err(AnalyticsError::Domain {
            name: "sigma",
            value: sigma,
            requirement: "sigma >= 0",
        });
    }
    let x = PI * sigma.sqrt();
    Ok(if x < 1e-4 {
        1.0 - x * x / 6.0 + 7.0 * x.powi(4) / 360.0
    } else if x > 30.0 {
        2.0 * x * (-x).exp()
    } else {
        x / x.sinh()
    })
}

/// Laplace transform of the scaled density of `T - t_last`, `(1 + sigma) Q(sigma)`.
pub fn joint_laplace_r(sigma: f64) -> Result<f64, AnalyticsError> {
    Ok((1.0 + sigma) * laplace_q(sigma)?)
}

/// Scaled density of `(T - t_last) / N`.
///
/// Its transform is `(1 + sigma) Q(sigma)`; since the scaled halting density
/// vanishes at zero this inverts to `P(tau) + P'(tau)`.
pub fn joint_density_r(tau: f64) -> Result<f64, AnalyticsError> {
    check_tau(tau)?;
    Ok(if tau >= BRANCH_POINT {
        pdf_direct(tau) + pdf_derivative_direct(tau)
    } else {
        pdf_resummed(tau) + pdf_derivative_resummed(tau)
    })
}

/// Scaled joint density of `(T/N, t_last/N)`, supported on `0 < tau_last < tau`.
pub fn scaled_joint_pdf(tau: f64, tau_last: f64) -> Result<f64, AnalyticsError> {
    if !(tau_last > 0.0 && tau_last < tau) {
        return Err(AnalyticsError::Domain {
            name: "tau_last",
            value: tau_last,
            requirement: "0 < tau_last < tau",
        });
    }
    Ok(joint_density_r(tau - tau_last)? * (-tau_last).exp())
}

/// `<T t_last^p> / N^(p+1)` in the scaling limit: `p! pi^2/6 + p p!`.
pub fn joint_moment(p: u32) -> f64 {
    let factorial: f64 = (1..=p).map(f64::from).product();
    factorial * PI * PI / 6.0 + f64::from(p) * factorial
}

/// Density of the last-step duration on `K_{N+1}`, exactly `exp(-t/N) / N`.
pub fn last_step_pdf(rate_scale: f64, t: f64) -> Result<f64, AnalyticsError> {
    if !(t > 0.0) {
        return Err(AnalyticsError::Domain {
            name: "t",
            value: t,
            requirement: "t > 0",
        });
    }
    Ok((-t / rate_scale).exp() / rate_scale)
}

/// `<t^p> / <t>^p` for the last step: `p!`, exact for every `N`.
pub fn last_step_moment_ratio(p: u32) -> f64 {
    (1..=p).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn value_at_one() {
        // 2 (e^-1 - 4 e^-4 + 9 e^-9 - 16 e^-16 + 25 e^-25), remaining terms < 1e-15
        let partial: f64 = 2.0 * (1..=5).map(|k: i32| {
            let k2 = f64::from(k * k);
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * k2 * (-k2).exp()
        }).sum::<f64>();
        assert_abs_diff_eq!(scaled_halting_pdf(1.0).unwrap(), partial, epsilon = 1e-13);
        assert_abs_diff_eq!(partial, 0.591452, epsilon = 5e-7);
    }

    #[test]
    fn branches_agree() {
        for tau in [0.6, 0.8, 1.0, 1.3, 2.0] {
            assert_abs_diff_eq!(pdf_direct(tau), pdf_resummed(tau), epsilon = 1e-12);
            assert_abs_diff_eq!(cdf_direct(tau), cdf_resummed(tau), epsilon = 1e-12);
            assert_abs_diff_eq!(pdf_derivative_direct(tau), pdf_derivative_resummed(tau), epsilon = 1e-11);
        }
    }

    #[test]
    fn tails() {
        let tau = 30.0;
        let ratio = scaled_halting_pdf(tau).unwrap() / (2.0 * (-tau).exp());
        assert!((ratio - 1.0).abs() < 1e-6);

        let tau = 0.1;
        let small = 0.5 * (PI / tau).powf(2.5) * (-PI * PI / (4.0 * tau)).exp();
        let ratio = scaled_halting_pdf(tau).unwrap() / small;
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn cdf_limits() {
        assert_abs_diff_eq!(scaled_halting_cdf(f64::INFINITY).unwrap(), 1.0);
        assert!(scaled_halting_cdf(1e-3).unwrap() < 1e-300);
        assert_abs_diff_eq!(scaled_halting_cdf(200.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(scaled_halting_cdf(0.0).is_err());
        assert!(scaled_halting_pdf(-1.0).is_err());
        assert!(scaled_halting_pdf(f64::NAN).is_err());
    }

    #[test]
    fn cdf_derivative_is_pdf() {
        let h = 1e-5;
        for tau in [0.5, 1.0, 3.0] {
            let fd = (scaled_halting_cdf(tau + h).unwrap() - scaled_halting_cdf(tau - h).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(fd, scaled_halting_pdf(tau).unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn laplace_values() {
        assert_eq!(laplace_q(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(laplace_q(1.0).unwrap(), 0.2720290549, epsilon = 1e-10);
        assert!(laplace_q(-0.1).is_err());
        // the small-argument series agrees with the closed form at the switch
        let x = 0.999e-4;
        assert_abs_diff_eq!(laplace_q((x / PI).powi(2)).unwrap(), x / x.sinh(), epsilon = 1e-15);
        assert!(laplace_q(1e4).unwrap() > 0.0);
    }

    #[test]
    fn laplace_matches_truncated_product() {
        let product: f64 = (1..=1_000_000u64).map(|m| 1.0 / (1.0 + 1.0 / (m * m) as f64)).product();
        assert_abs_diff_eq!(product, laplace_q(1.0).unwrap(), epsilon = 1e-5);
    }

    #[test]
    fn joint_values() {
        assert_eq!(joint_laplace_r(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(joint_moment(1), PI * PI / 6.0 + 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(joint_moment(3), PI * PI + 18.0, epsilon = 1e-12);
        assert!(scaled_joint_pdf(1.0, 1.5).is_err());
        assert!(joint_density_r(0.5).unwrap() > 0.0);
    }

    #[test]
    fn last_step() {
        assert_eq!(last_step_moment_ratio(2), 2.0);
        assert_eq!(last_step_moment_ratio(4), 24.0);
        assert_abs_diff_eq!(last_step_pdf(10.0, 10.0).unwrap(), (-1.0f64).exp() / 10.0);
    }
}
