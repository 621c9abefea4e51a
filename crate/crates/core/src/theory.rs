//! Closed-form predictions for the one-dimensional model.
//!
//! For `alpha = 0` the tagged cluster rescaled by `sqrt(t)` converges to a
//! law with CDF
//!
//! ```text
//! F(x) = 2 Phi(a x) - (2 a x / sqrt(2 pi)) exp(-(a x)^2 / 2) - 1,   x > 0,
//! ```
//!
//! where `eta = 1/p` and `a = (eta - 1)/2`. Its density is
//! `2 gamma^(3/2) / sqrt(2 pi) * x^2 exp(-gamma x^2 / 2)` with `gamma = a^2`.
//!
//! Note on the density constant: the commonly quoted form
//! `gamma x^2 / sqrt(2 pi) * exp(-gamma x^2 / 2)` differs from the derivative
//! of `F` by the factor `2 sqrt(gamma)` and integrates to one only when
//! `gamma = 1/4`. The derivative of `F` is what is implemented here.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("limit law requires p in (0,1), got {0}")]
    InvalidParams(f64),
    #[error("growth exponent is undefined for alpha = {0} <= -2 (blow-up regime)")]
    Undefined(f64),
}

/// Parameters of the `alpha = 0` limit law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitLawParams {
    pub p: f64,
    pub eta: f64,
    pub a: f64,
    pub gamma: f64,
}

impl LimitLawParams {
    pub fn new(p: f64) -> Result<Self, TheoryError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(TheoryError::InvalidParams(p));
        }
        let eta = 1.0 / p;
        let a = (eta - 1.0) / 2.0;
        Ok(LimitLawParams {
            p,
            eta,
            a,
            gamma: a * a,
        })
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn limit_cdf(x: f64, params: &LimitLawParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = params.a * x;
    // 2 Phi(y) - 1 == erf(y / sqrt 2), which avoids cancellation near zero.
    let central = libm::erf(y / std::f64::consts::SQRT_2);
    let v = central - 2.0 * y / (2.0 * PI).sqrt() * (-0.5 * y * y).exp();
    v.clamp(0.0, 1.0)
}

pub fn limit_pdf(x: f64, params: &LimitLawParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let g = params.gamma;
    2.0 * g.powf(1.5) / (2.0 * PI).sqrt() * x * x * (-0.5 * g * x * x).exp()
}

/// Mean of the limit law, `8 / (sqrt(2 pi) (eta - 1))`.
pub fn limit_mean(params: &LimitLawParams) -> f64 {
    8.0 / ((2.0 * PI).sqrt() * (params.eta - 1.0))
}

/// Inverse of [`limit_cdf`] by bisection; `u` is clamped into `[0, 1)`.
pub fn limit_quantile(u: f64, params: &LimitLawParams) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0 / params.a;
    while limit_cdf(hi, params) < u && hi < 1e6 / params.a {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if limit_cdf(mid, params) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `gamma_1 = 1/2`, `gamma_{k+1} = (1 - alpha gamma_k) / 2`.
pub fn gamma_sequence(alpha: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut g = 0.5;
    for _ in 0..n {
        out.push(g);
        g = (1.0 - alpha * g) / 2.0;
    }
    out
}

/// Growth exponent `1/(alpha + 2)` of the tagged cluster.
pub fn growth_exponent(alpha: f64) -> Result<f64, TheoryError> {
    if alpha <= -2.0 {
        return Err(TheoryError::Undefined(alpha));
    }
    Ok(1.0 / (alpha + 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> LimitLawParams {
        LimitLawParams::new(0.5).unwrap()
    }

    #[test]
    fn params_reject_degenerate_p() {
        assert_eq!(LimitLawParams::new(1.0), Err(TheoryError::InvalidParams(1.0)));
        assert!(LimitLawParams::new(0.0).is_err());
        let p = LimitLawParams::new(0.25).unwrap();
        assert_eq!(p.eta, 4.0);
        assert_eq!(p.a, 1.5);
        assert_eq!(p.gamma, p.a * p.a);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
    }

    #[test]
    fn cdf_values() {
        let p = half();
        assert_eq!(limit_cdf(0.0, &p), 0.0);
        assert_eq!(limit_cdf(-1.0, &p), 0.0);
        // 2 Phi(1) - 2/sqrt(2 pi) e^{-1/2} - 1
        assert!((limit_cdf(2.0, &p) - 0.198_748_043_098_799).abs() < 1e-12);
        assert!(limit_cdf(20.0 / p.a, &p) > 1.0 - 1e-12);
    }

    #[test]
    fn pdf_mode_and_zero() {
        let p = half();
        assert_eq!(limit_pdf(0.0, &p), 0.0);
        let mode = (2.0 / p.gamma).sqrt();
        assert!((mode - 2.828_427_124_746_19).abs() < 1e-12);
        let h = 1e-4;
        assert!(limit_pdf(mode, &p) > limit_pdf(mode - h, &p));
        assert!(limit_pdf(mode, &p) > limit_pdf(mode + h, &p));
    }

    #[test]
    fn mean_closed_form() {
        assert!((limit_mean(&half()) - 3.191_538_243_211_462).abs() < 1e-12);
        let q = LimitLawParams::new(2.0 / 3.0).unwrap();
        assert!((limit_mean(&q) - 6.383_076_486_422_924).abs() < 1e-9);
        // eta - 1 doubles (eta 2 -> 3, p 1/2 -> 1/3): the mean halves.
        let third = LimitLawParams::new(1.0 / 3.0).unwrap();
        assert!((limit_mean(&third) * 2.0 - limit_mean(&half())).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let p = LimitLawParams::new(0.3).unwrap();
        for u in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.999_999] {
            let x = limit_quantile(u, &p);
            assert!((limit_cdf(x, &p) - u).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn gamma_recursion() {
        assert!(gamma_sequence(0.0, 20).iter().all(|&g| g == 0.5));
        let g = gamma_sequence(-1.0, 10);
        for (k, v) in g.iter().enumerate() {
            assert!((v - (1.0 - 0.5f64.powi(k as i32 + 1))).abs() < 1e-15);
        }
        assert!((g[9] - 0.999_023_437_5).abs() < 1e-15);
        assert_eq!(gamma_sequence(-4.0, 4), vec![0.5, 1.5, 3.5, 7.5]);
    }

    #[test]
    fn exponents() {
        assert_eq!(growth_exponent(0.0), Ok(0.5));
        assert!((growth_exponent(1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(growth_exponent(-1.0), Ok(1.0));
        assert_eq!(growth_exponent(-2.0), Err(TheoryError::Undefined(-2.0)));
        assert!(growth_exponent(-3.0).is_err());
        // The exponent is the fixed point of the gamma recursion.
        for alpha in [-1.5, -1.0, 0.0, 1.0] {
            let g = growth_exponent(alpha).unwrap();
            assert!((g - (1.0 - alpha * g) / 2.0).abs() < 1e-15);
        }
    }
}
