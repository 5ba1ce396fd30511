//! Leading-order cumulant trajectories of `m` on `K_{N+1}`.
//!
//! Writing `<m> = N n`, `<m^2>_c = N v`, `<m^3>_c = N w`, the leading order of
//! the moment hierarchy is
//!
//! ```text
//! n' = -n^2
//! v' + 4 n v = n^2
//! w' + 6 n w = -n^2 + 6 v (n - v)
//! ```
//!
//! Dividing by `n'` turns these into polynomial equations in `n`, solved by
//!
//! ```text
//! n = n0 / (1 + n0 t)
//! v = n/3 + C n^4,                      C = (v0 - n0/3) / n0^4
//! w = n/15 + a n^4 + b n^6 + c n^7,     a = C, c = 6 C^2
//! ```
//!
//! with `b` set by `w0`. Fluctuations are `m = N n + sqrt(N) eta` with
//! `<eta^2> = v`, and in that frame `m` is Gaussian.

use std::f64::consts::{E, PI};

use super::AnalyticsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantSolution {
    pub n0: f64,
    pub v0: f64,
    pub w0: f64,
    /// Amplitude of the `n^4` term in `v`.
    pub c_var: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Solve the cumulant hierarchy for initial density `n0`, scaled variance
/// `v0` and scaled third cumulant `w0`.
pub fn cumulant_solution(n0: f64, v0: f64, w0: f64) -> Result<CumulantSolution, AnalyticsError> {
    if !(n0 > 0.0 && n0 <= 1.0) {
        return Err(AnalyticsError::Domain {
            name: "n0",
            value: n0,
            requirement: "0 < n0 <= 1",
        });
    }
    if !(v0 >= 0.0) {
        return Err(AnalyticsError::Domain {
            name: "v0",
            value: v0,
            requirement: "v0 >= 0",
        });
    }
    if !w0.is_finite() {
        return Err(AnalyticsError::Domain {
            name: "w0",
            value: w0,
            requirement: "finite",
        });
    }
    let c_var = (v0 - n0 / 3.0) / n0.powi(4);
    let a = c_var;
    let c = 6.0 * c_var * c_var;
    let b = (w0 - n0 / 15.0 - a * n0.powi(4) - c * n0.powi(7)) / n0.powi(6);
    Ok(CumulantSolution {
        n0,
        v0,
        w0,
        c_var,
        a,
        b,
        c,
    })
}

impl CumulantSolution {
    /// Uncorrelated start with independent (binomial) vacancy statistics:
    /// `n0 = 1/e`, `v0 = (1/e)(1 - 1/e)`, `w0 = v0 (1 - 2/e)`.
    pub fn uncorrelated_binomial() -> Self {
        let p = 1.0 / E;
        cumulant_solution(p, p * (1.0 - p), p * (1.0 - p) * (1.0 - 2.0 * p)).expect("valid constants")
    }

    /// Uncorrelated start with exactly `vertices` particles, scaled by `rate_scale`.
    ///
    /// Uses the exact cumulants of the number of empty vertices (see
    /// [`empty_vertex_cumulants`]) instead of the binomial approximation.
    pub fn uncorrelated_exact(vertices: usize, rate_scale: f64) -> Self {
        let [mean, var, k3] = empty_vertex_cumulants(vertices, vertices);
        cumulant_solution(mean / rate_scale, var / rate_scale, k3 / rate_scale).expect("valid occupancy")
    }

    /// All particles on one vertex: `n0 = 1`, `v0 = w0 = 0`.
    pub fn localized() -> Self {
        cumulant_solution(1.0, 0.0, 0.0).expect("valid constants")
    }

    pub fn n(&self, t: f64) -> f64 {
        self.n0 / (1.0 + self.n0 * t)
    }

    pub fn v(&self, t: f64) -> f64 {
        let n = self.n(t);
        n / 3.0 + self.c_var * n.powi(4)
    }

    pub fn w(&self, t: f64) -> f64 {
        let n = self.n(t);
        n / 15.0 + self.a * n.powi(4) + self.b * n.powi(6) + self.c * n.powi(7)
    }

    /// Variance Fano factor `v / n`, tending to 1/3.
    pub fn variance_fano(&self, t: f64) -> f64 {
        self.v(t) / self.n(t)
    }

    /// Third-cumulant Fano factor `w / n`, tending to 1/15.
    pub fn third_fano(&self, t: f64) -> f64 {
        self.w(t) / self.n(t)
    }
}

/// Gaussian approximation of `P_m(t)`: `(2 pi N v)^(-1/2) exp(-xi^2 / 2)`
/// with `xi = (m - N n) / sqrt(N v)`.
pub fn gaussian_scaling_pdf(m: f64, rate_scale: f64, t: f64, sol: &CumulantSolution) -> Result<f64, AnalyticsError> {
    let variance = rate_scale * sol.v(t);
    if !(variance > 0.0) {
        return Err(AnalyticsError::Domain {
            name: "N v(t)",
            value: variance,
            requirement: "N v(t) > 0",
        });
    }
    let xi = (m - rate_scale * sol.n(t)) / variance.sqrt();
    Ok((-0.5 * xi * xi).exp() / (2.0 * PI * variance).sqrt())
}

/// Mean, variance and third cumulant of the number of empty vertices when
/// `particles` land independently and uniformly on `vertices` vertices.
///
/// Uses the factorial moments `E[(X)_k] = (V)_k (1 - k/V)^P`.
pub fn empty_vertex_cumulants(vertices: usize, particles: usize) -> [f64; 3] {
    let v = vertices as f64;
    let p = particles as f64;
    let falling = |k: usize| -> f64 {
        let head: f64 = (0..k).map(|i| v - i as f64).product();
        let miss = if k as f64 >= v { 0.0 } else { (p * (-(k as f64) / v).ln_1p()).exp() };
        head * miss
    };
    let (f1, f2, f3) = (falling(1), falling(2), falling(3));
    let mean = f1;
    let var = f2 + f1 - f1 * f1;
    // third central moment from factorial moments, arranged to limit cancellation
    let k3 = f3 + 3.0 * f2 + f1 - 3.0 * f1 * (f2 + f1) + 2.0 * f1 * f1 * f1;
    [mean, var, k3]
}
