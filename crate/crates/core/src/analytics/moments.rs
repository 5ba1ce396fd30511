//! Exact normalized moments of the scaled halting time.
//!
//! `x / sinh x = sum_k c_k x^(2k)` with `c_k = -(2^(2k) - 2) B_(2k) / (2k)!`.
//! Substituting `x = pi sqrt(sigma)` gives `<tau^p> = p! (-1)^p c_p pi^(2p)`,
//! so `mu_p = <tau^p> / <tau>^p = p! (-1)^p c_p 6^p` is rational.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use super::AnalyticsError;

/// Largest supported moment order.
pub const MAX_MOMENT_ORDER: u32 = 12;

/// An exact normalized moment `mu_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMoment {
    pub order: u32,
    pub value: BigRational,
}

impl RationalMoment {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    /// `"numerator/denominator"`, or just the integer when the denominator is 1.
    pub fn ratio_string(&self) -> String {
        if self.value.denom().is_one() {
            self.value.numer().to_string()
        } else {
            format!("{}/{}", self.value.numer(), self.value.denom())
        }
    }
}

impl fmt::Display for RationalMoment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.ratio_string())
    }
}

impl Serialize for RationalMoment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("RationalMoment", 3)?;
        s.serialize_field("p", &self.order)?;
        s.serialize_field("rational", &self.ratio_string())?;
        s.serialize_field("float", &self.to_f64())?;
        s.end()
    }
}

fn rational(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Bernoulli numbers `B_0 ..= B_n` (convention `B_1 = -1/2`).
pub fn bernoulli_numbers(n: usize) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = Vec::with_capacity(n + 1);
    b.push(BigRational::one());
    for m in 1..=n {
        // sum_{k=0}^{m} C(m+1, k) B_k = 0
        let mut binom = BigInt::one();
        let mut acc = BigRational::zero();
        for (k, bk) in b.iter().enumerate() {
            acc += BigRational::from_integer(binom.clone()) * bk;
            binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
        }
        b.push(-acc / rational(m as i64 + 1));
    }
    b
}

/// Taylor coefficients of `x / sinh x` in powers of `x^2`, orders `0 ..= k_max`.
pub fn x_over_sinh_coefficients(k_max: usize) -> Vec<BigRational> {
    let b = bernoulli_numbers(2 * k_max);
    let mut factorial = BigInt::one();
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            factorial *= BigInt::from(2 * k - 1) * BigInt::from(2 * k);
        }
        let pow2 = BigInt::one() << (2 * k);
        let weight = BigRational::from_integer(BigInt::from(2) - pow2);
        out.push(weight * &b[2 * k] / BigRational::from_integer(factorial.clone()));
    }
    out
}

/// `mu_p = <tau^p> / <tau>^p` for the scaled halting time, as an exact rational.
pub fn normalized_moment(p: u32) -> Result<RationalMoment, AnalyticsError> {
    if p == 0 || p > MAX_MOMENT_ORDER {
        return Err(AnalyticsError::MomentOrder { p, max: MAX_MOMENT_ORDER });
    }
    let c = x_over_sinh_coefficients(p as usize);
    let factorial: BigInt = (1..=p).map(BigInt::from).product();
    let mut value = BigRational::from_integer(factorial * BigInt::from(6).pow(p)) * &c[p as usize];
    if p % 2 == 1 {
        value = -value;
    }
    debug_assert!(value.is_positive());
    Ok(RationalMoment { order: p, value })
}

/// Raw moment `<tau^p>` of the scaled halting time.
pub fn scaled_moment(p: u32) -> Result<f64, AnalyticsError> {
    let mean = std::f64::consts::PI.powi(2) / 6.0;
    Ok(normalized_moment(p)?.to_f64() * mean.powi(p as i32))
}
