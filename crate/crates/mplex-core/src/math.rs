//! Scalar type and transcendental functions.
//!
//! `Real` is `f64` by default; the `f32` feature switches the whole crate to
//! single precision. Transcendentals are routed through `libm` so that a
//! training run produces the same bits on every platform.

/// Element type of every matrix in this crate.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

/// Clamp probabilities into `[EPS_PROB, 1 - EPS_PROB]` before taking logs.
pub const EPS_PROB: Real = 1e-7;

pub const PI: Real = core::f64::consts::PI as Real;

#[cfg(not(feature = "f32"))]
mod imp {
    use super::Real;

    pub fn exp(x: Real) -> Real {
        libm::exp(x)
    }
    pub fn ln(x: Real) -> Real {
        libm::log(x)
    }
    pub fn sqrt(x: Real) -> Real {
        libm::sqrt(x)
    }
    pub fn abs(x: Real) -> Real {
        libm::fabs(x)
    }
    pub fn cos(x: Real) -> Real {
        libm::cos(x)
    }
    pub fn powf(x: Real, y: Real) -> Real {
        libm::pow(x, y)
    }
    pub fn floor(x: Real) -> Real {
        libm::floor(x)
    }
}

#[cfg(feature = "f32")]
mod imp {
    use super::Real;

    pub fn exp(x: Real) -> Real {
        libm::expf(x)
    }
    pub fn ln(x: Real) -> Real {
        libm::logf(x)
    }
    pub fn sqrt(x: Real) -> Real {
        libm::sqrtf(x)
    }
    pub fn abs(x: Real) -> Real {
        libm::fabsf(x)
    }
    pub fn cos(x: Real) -> Real {
        libm::cosf(x)
    }
    pub fn powf(x: Real, y: Real) -> Real {
        libm::powf(x, y)
    }
    pub fn floor(x: Real) -> Real {
        libm::floorf(x)
    }
}

pub use imp::{abs, cos, exp, floor, ln, powf, sqrt};

/// Numerically stable logistic function.
pub fn sigmoid(x: Real) -> Real {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_matches_definition() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        // Large negative inputs must not overflow.
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }
}
