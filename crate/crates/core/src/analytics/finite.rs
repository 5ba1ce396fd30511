//! Exact finite-`N` laws on `K_{N+1}`.
//!
//! The halting time starting from `m0` empty vertices is a sum of independent
//! exponentials with rates `r_m = m^2 / N`, `m = 1 ..= m0`.

use super::AnalyticsError;

/// Largest `m0` for which the partial-fraction density is evaluated.
pub const HYPOEXP_MAX_M0: usize = 40;

fn check_m0(m0: usize) -> Result<(), AnalyticsError> {
    if m0 == 0 {
        Err(AnalyticsError::Domain {
            name: "m0",
            value: 0.0,
            requirement: "m0 >= 1",
        })
    } else {
        Ok(())
    }
}

fn check_nonnegative(name: &'static str, value: f64) -> Result<(), AnalyticsError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(AnalyticsError::Domain {
            name,
            value,
            requirement: "finite and >= 0",
        })
    }
}

/// Neumaier compensated sum.
pub(crate) fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// `<T> = N sum_{m=1}^{m0} m^-2`.
pub fn mean_halting_finite(rate_scale: f64, m0: usize) -> Result<f64, AnalyticsError> {
    check_m0(m0)?;
    // smallest terms first
    Ok(rate_scale * compensated_sum((1..=m0).rev().map(|m| 1.0 / (m as f64 * m as f64))))
}

/// Laplace transform of the halting time, `prod_{m=1}^{m0} (1 + sN/m^2)^-1`.
pub fn laplace_q_finite(s: f64, rate_scale: f64, m0: usize) -> Result<f64, AnalyticsError> {
    check_nonnegative("s", s)?;
    check_m0(m0)?;
    Ok((1..=m0).map(|m| 1.0 / (1.0 + s * rate_scale / (m * m) as f64)).product())
}

/// Partial-fraction weights `w_m = prod_{j != m} r_j / (r_j - r_m)`.
///
/// With `r_m` proportional to `m^2` the weights do not depend on `N`.
pub fn hypoexp_weights(m0: usize) -> Vec<f64> {
    (1..=m0)
        .map(|m| {
            (1..=m0)
                .filter(|&j| j != m)
                .map(|j| {
                    let (j, m) = (j as f64, m as f64);
                    j * j / ((j - m) * (j + m))
                })
                .product()
        })
        .collect()
}

/// Exact halting-time density on `K_{N+1}` for `m0 <= 40` empty vertices:
/// `sum_m w_m r_m exp(-r_m T)`.
///
/// Larger `m0` is rejected; use `scaled_halting_pdf(T / N) / N` there.
pub fn hypoexp_halting_pdf(rate_scale: f64, m0: usize, t: f64) -> Result<f64, AnalyticsError> {
    check_m0(m0)?;
    if m0 > HYPOEXP_MAX_M0 {
        return Err(AnalyticsError::Unsupported {
            what: format!(
                "partial-fraction halting density for m0 = {m0} (cap {HYPOEXP_MAX_M0}); \
                 use the scaling form scaled_halting_pdf(T / N) / N instead"
            ),
        });
    }
    if !(t > 0.0) {
        return Err(AnalyticsError::Domain {
            name: "T",
            value: t,
            requirement: "T > 0",
        });
    }
    let weights = hypoexp_weights(m0);
    let value = compensated_sum(weights.iter().enumerate().map(|(i, w)| {
        let m = (i + 1) as f64;
        let rate = m * m / rate_scale;
        w * rate * (-rate * t).exp()
    }));
    Ok(value.max(0.0))
}

/// Laplace transform of `P_m(t)` on `K_{N+1}` started with all particles on
/// one vertex (`m0 = N`): `(N/m^2) prod_{l=m}^{N} (1 + sN/l^2)^-1`.
pub fn laplace_qm_localized(s: f64, m: usize, rate_scale: usize) -> Result<f64, AnalyticsError> {
    check_nonnegative("s", s)?;
    if m == 0 || m > rate_scale {
        return Err(AnalyticsError::Domain {
            name: "m",
            value: m as f64,
            requirement: "1 <= m <= N",
        });
    }
    let n = rate_scale as f64;
    let product: f64 = (m..=rate_scale)
        .map(|l| 1.0 / (1.0 + s * n / (l * l) as f64))
        .product();
    Ok(n / (m * m) as f64 * product)
}
