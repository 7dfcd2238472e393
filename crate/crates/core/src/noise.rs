//! Laplace noise and the CDF of Uniform(0,1) + Laplace(0,b).

use serde::{Deserialize, Serialize};

use crate::error::{DipError, Result};
use crate::rng::Randomness;

/// Scale `b` of a centred Laplace distribution.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub fn new(b: f64) -> Result<Self> {
        if b.is_finite() && b > 0.0 {
            Ok(Self(b))
        } else {
            Err(DipError::param(
                "laplace scale",
                format!("must be positive and finite, got {b}"),
            ))
        }
    }

    /// `b = 1/ε`.
    pub fn for_epsilon(epsilon: f64) -> Result<Self> {
        crate::error::check_epsilon(epsilon)?;
        Self::new(1.0 / epsilon)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Inverse-CDF transform of one open-unit draw into Laplace(0, b).
pub fn laplace_from_uniform(u: f64, scale: LaplaceScale) -> f64 {
    let d = u - 0.5;
    -scale.0 * d.signum() * (-2.0 * d.abs()).ln_1p()
}

pub fn sample_laplace<R: Randomness + ?Sized>(rng: &mut R, scale: LaplaceScale) -> f64 {
    rng.laplace(scale)
}

pub fn laplace_pdf(x: f64, scale: LaplaceScale) -> f64 {
    let b = scale.0;
    (-(x.abs()) / b).exp() / (2.0 * b)
}

pub fn laplace_cdf(x: f64, scale: LaplaceScale) -> f64 {
    let b = scale.0;
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

/// CDF `G` of `U + e` with `U ~ Uniform(0,1)` and `e ~ Laplace(0, b)`.
pub fn convolved_cdf(x: f64, scale: LaplaceScale) -> f64 {
    let b = scale.0;
    let half_b = 0.5 * b;
    // 1 - e^{-1/b}
    let spread = -(-1.0 / b).exp_m1();
    if x < 0.0 {
        half_b * (x / b).exp() * spread
    } else if x <= 0.5 {
        // (b/2)(e^{-x/b} - e^{(x-1)/b}) = -(b/2) e^{-x/b} expm1((2x-1)/b)
        x - half_b * (-x / b).exp() * ((2.0 * x - 1.0) / b).exp_m1()
    } else if x <= 1.0 {
        // mirror of the lower half, G(x) = 1 - G(1 - x)
        let y = 1.0 - x;
        1.0 - (y - half_b * (-y / b).exp() * ((2.0 * y - 1.0) / b).exp_m1())
    } else {
        1.0 - half_b * (-(x - 1.0) / b).exp() * spread
    }
}

/// Inverse of [`convolved_cdf`] on `(0, 1)`; the tails are solved in closed
/// form and the middle branch by bisection. `0` and `1` map to `∓∞`.
pub fn convolved_inverse(c: f64, scale: LaplaceScale) -> f64 {
    if c <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if c >= 1.0 {
        return f64::INFINITY;
    }
    let b = scale.0;
    let edge = 0.5 * b * -(-1.0 / b).exp_m1();
    if c < edge {
        b * (c / edge).ln()
    } else if c > 1.0 - edge {
        1.0 - b * ((1.0 - c) / edge).ln()
    } else {
        crate::special::bisect_increasing(|x| convolved_cdf(x, scale), c, 0.0, 1.0, 1e-15)
    }
}

/// Density of `U + e`, the derivative of [`convolved_cdf`].
pub fn convolved_pdf(x: f64, scale: LaplaceScale) -> f64 {
    laplace_cdf(x, scale) - laplace_cdf(x - 1.0, scale)
}
