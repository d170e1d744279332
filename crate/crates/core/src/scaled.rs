//! Extended-exponent numbers for quantities that contract far below the
//! `f64` normal range over a long run.
//!
//! The quantization range `L` shrinks by `2^R` at every successful
//! transmission, so with `R = 16` it leaves the representable range of an
//! `f64` after a few hundred successes. The estimation error is bounded by
//! `L/2`, so it needs the same treatment. Both are stored as an `f64`
//! mantissa times a power of two held in an `i64`.

use serde::{Deserialize, Serialize};

/// Multiply `x` by `2^k` for any `k`, saturating to `0` or `inf` only where the
/// true result is outside the `f64` range.
pub fn ldexp(x: f64, k: i64) -> f64 {
    let clamped = k.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
    libm::ldexp(x, clamped)
}

/// Split a finite nonzero `x` into `(m, e)` with `|m| ∈ [1, 2)` and `x = m·2^e`.
fn split(x: f64) -> (f64, i64) {
    let (m, e) = libm::frexp(x);
    // frexp yields |m| in [0.5, 1)
    (m * 2.0, e as i64 - 1)
}

/// A nonnegative magnitude `mantissa · 2^exp2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Magnitude {
    mantissa: f64,
    exp2: i64,
}

impl Magnitude {
    pub const ZERO: Magnitude = Magnitude {
        mantissa: 0.0,
        exp2: 0,
    };

    /// Build from a finite nonnegative value.
    pub fn from_f64(value: f64) -> Self {
        assert!(
            value.is_finite() && value >= 0.0,
            "magnitude must be finite and nonnegative, got {value}"
        );
        if value == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = split(value);
        Self {
            mantissa: m,
            exp2: e,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exp2(&self) -> i64 {
        self.exp2
    }

    /// Nearest `f64`; underflows to zero for very small magnitudes.
    pub fn to_f64(&self) -> f64 {
        ldexp(self.mantissa, self.exp2)
    }

    /// Natural logarithm, `-inf` for zero.
    pub fn ln(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.ln() + self.exp2 as f64 * std::f64::consts::LN_2
        }
    }

    /// Multiply by a finite nonnegative factor.
    pub fn scale(&self, factor: f64) -> Self {
        assert!(factor.is_finite() && factor >= 0.0);
        let m = self.mantissa * factor;
        if m == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = split(m);
        Self {
            mantissa: m,
            exp2: self.exp2 + e,
        }
    }

    /// Divide by `2^k` exactly.
    pub fn shift_down(&self, k: u32) -> Self {
        if self.is_zero() {
            return *self;
        }
        Self {
            mantissa: self.mantissa,
            exp2: self.exp2 - k as i64,
        }
    }

    /// `self / other` as an `f64`; both must be nonzero unless `self` is zero.
    pub fn ratio(&self, other: &Magnitude) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        ldexp(self.mantissa / other.mantissa, self.exp2 - other.exp2)
    }
}

/// A vector `mantissa · 2^exp2` sharing one exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledVec {
    mantissa: Vec<f64>,
    exp2: i64,
}

impl ScaledVec {
    pub fn zeros(n: usize) -> Self {
        Self {
            mantissa: vec![0.0; n],
            exp2: 0,
        }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Self::from_parts(values.to_vec(), 0)
    }

    /// Build from raw parts and renormalize so the largest mantissa entry
    /// lies in `[1, 2)`.
    pub fn from_parts(mantissa: Vec<f64>, exp2: i64) -> Self {
        let mut v = Self { mantissa, exp2 };
        v.normalize();
        v
    }

    fn normalize(&mut self) {
        let peak = self.mantissa.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if peak == 0.0 || !peak.is_finite() {
            if peak == 0.0 {
                self.exp2 = 0;
            }
            return;
        }
        let (_, e) = split(peak);
        if e != 0 {
            for m in &mut self.mantissa {
                *m = ldexp(*m, -e);
            }
            self.exp2 += e;
        }
    }

    pub fn len(&self) -> usize {
        self.mantissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mantissa.is_empty()
    }

    pub fn mantissa(&self) -> &[f64] {
        &self.mantissa
    }

    pub fn exp2(&self) -> i64 {
        self.exp2
    }

    pub fn is_finite(&self) -> bool {
        self.mantissa.iter().all(|m| m.is_finite())
    }

    /// Nearest `f64` vector (entries may underflow to zero).
    pub fn to_f64(&self) -> Vec<f64> {
        self.mantissa.iter().map(|m| ldexp(*m, self.exp2)).collect()
    }

    /// Infinity norm as a [`Magnitude`].
    pub fn norm_inf(&self) -> Magnitude {
        let peak = self.mantissa.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        Magnitude::from_f64(peak).scale_exp(self.exp2)
    }

    /// Entry `j` divided by a magnitude, as an `f64`.
    pub fn entry_ratio(&self, j: usize, denom: &Magnitude) -> f64 {
        let m = self.mantissa[j];
        if m == 0.0 {
            return 0.0;
        }
        ldexp(m / denom.mantissa, self.exp2 - denom.exp2)
    }

    /// `self - other`, computed at the larger of the two exponents.
    pub fn sub(&self, other: &ScaledVec) -> ScaledVec {
        assert_eq!(self.len(), other.len());
        let exp2 = self.exp2.max(other.exp2);
        let mantissa = self
            .mantissa
            .iter()
            .zip(&other.mantissa)
            .map(|(a, b)| ldexp(*a, self.exp2 - exp2) - ldexp(*b, other.exp2 - exp2))
            .collect();
        ScaledVec::from_parts(mantissa, exp2)
    }
}

impl Magnitude {
    fn scale_exp(mut self, k: i64) -> Self {
        if !self.is_zero() {
            self.exp2 += k;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magnitude_survives_deep_contraction() {
        let mut l = Magnitude::from_f64(1.6);
        for _ in 0..200 {
            l = l.shift_down(16).scale(2.0);
        }
        assert_eq!(l.to_f64(), 0.0);
        let expect = 1.6f64.ln() + 200.0 * (2.0f64.ln() - 16.0 * 2.0f64.ln());
        assert!((l.ln() - expect).abs() < 1e-9);
    }

    #[test]
    fn ratio_of_tiny_magnitudes_is_exact() {
        let a = Magnitude::from_f64(3.0).shift_down(3000);
        let b = Magnitude::from_f64(4.0).shift_down(3000);
        assert_eq!(a.ratio(&b), 0.75);
    }

    #[test]
    fn scaled_vec_round_trip_and_sub() {
        let v = ScaledVec::from_f64(&[0.25, -3.0]);
        assert_eq!(v.to_f64(), vec![0.25, -3.0]);
        assert_eq!(v.mantissa()[1].abs(), 1.5);
        let w = ScaledVec::from_f64(&[0.25, 1.0]);
        assert_eq!(v.sub(&w).to_f64(), vec![0.0, -4.0]);
        assert_eq!(v.norm_inf().to_f64(), 3.0);
    }

    #[test]
    fn zero_handling() {
        let z = ScaledVec::zeros(2);
        assert!(z.norm_inf().is_zero());
        assert_eq!(z.norm_inf().ln(), f64::NEG_INFINITY);
        assert_eq!(Magnitude::ZERO.ratio(&Magnitude::from_f64(1.0)), 0.0);
    }
}
