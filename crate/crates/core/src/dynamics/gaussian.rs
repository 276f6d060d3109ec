//! Closed forms for one-dimensional normal laws, used as an independent
//! oracle for the grid pipeline.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normal {
    pub mean: f64,
    pub variance: f64,
}

impl Normal {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!("need finite mean and variance > 0, got N({mean}, {variance})")));
        }
        Ok(Self { mean, variance })
    }

    /// `δ_x P_t` for the heat semigroup generated by `Δ`.
    pub fn heat(x: f64, t: f64) -> Result<Self> {
        Self::new(x, 2.0 * t)
    }

    /// `δ_x P_t` for the Ornstein–Uhlenbeck semigroup with rate `a`.
    pub fn ou(x: f64, t: f64, a: f64) -> Result<Self> {
        Self::new((-a * t).exp() * x, -(-2.0 * a * t).exp_m1() / a)
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `ln ∫ p₀^α p₁^{1−α}`; `+∞` when the integral diverges (`α ∉ [0, 1]` with
/// the wrong variance ordering).
pub fn ln_chernoff(alpha: f64, n0: Normal, n1: Normal) -> f64 {
    let s2 = (1.0 - alpha) * n0.variance + alpha * n1.variance;
    if !(s2 > 0.0) {
        return f64::INFINITY;
    }
    let dm = n0.mean - n1.mean;
    -alpha * (1.0 - alpha) * dm * dm / (2.0 * s2) - 0.5 * (s2.ln() - (1.0 - alpha) * n0.variance.ln() - alpha * n1.variance.ln())
}

/// `He₂² = 2 − 2·∫√(p₀p₁)`.
pub fn hellinger_sq(n0: Normal, n1: Normal) -> f64 {
    2.0 - 2.0 * ln_chernoff(0.5, n0, n1).exp()
}

/// `W₂² = (m₀ − m₁)² + (σ₀ − σ₁)²`.
pub fn wasserstein2_sq(n0: Normal, n1: Normal) -> f64 {
    (n0.mean - n1.mean).powi(2) + (n0.sd() - n1.sd()).powi(2)
}

/// `∫ (dμ₁/dμ₀)^q dμ₀`.
pub fn density_moment(q: f64, n0: Normal, n1: Normal) -> f64 {
    ln_chernoff(q, n1, n0).exp()
}

/// `(∫ (dμ₀/dμ₁)^{1/(p−1)} dμ₀)^{p−1}`.
pub fn renyi_functional(p: f64, n0: Normal, n1: Normal) -> f64 {
    let r = 1.0 / (p - 1.0);
    ((p - 1.0) * ln_chernoff(1.0 + r, n0, n1)).exp()
}

/// `T_{0,b}(μ₀, μ₁) = C_b ∫ϱ^q dμ₀`.
pub fn t0b(b: f64, n0: Normal, n1: Normal) -> Result<f64> {
    let (_, q, cb) = crate::divergence::c_b(b)?;
    Ok(cb * density_moment(q, n0, n1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_variance_shift() {
        let (t, d) = (0.5, 1.0);
        let n0 = Normal::new(0.0, t).unwrap();
        let n1 = Normal::new(d, t).unwrap();
        assert!((renyi_functional(2.0, n0, n1) - 2f64.exp()).abs() < 1e-12);
        for p in [1.5, 3.0] {
            let exact = (p / (p - 1.0) * d * d / (2.0 * t)).exp();
            assert!((renyi_functional(p, n0, n1) / exact - 1.0).abs() < 1e-12);
        }
        assert!((hellinger_sq(n0, n1) - (2.0 - 2.0 * (-d * d / (8.0 * t)).exp())).abs() < 1e-15);
        assert!((wasserstein2_sq(n0, n1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_laws() {
        let n = Normal::new(0.3, 2.0).unwrap();
        assert!(hellinger_sq(n, n).abs() < 1e-15);
        assert!((density_moment(3.0, n, n) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn divergent_moment() {
        let wide = Normal::new(0.0, 4.0).unwrap();
        let narrow = Normal::new(0.0, 1.0).unwrap();
        // The ratio wide/narrow grows like exp(3x²/8); its square against
        // the narrow law diverges.
        assert_eq!(density_moment(2.0, narrow, wide), f64::INFINITY);
        assert!(density_moment(2.0, wide, narrow).is_finite());
    }
}
