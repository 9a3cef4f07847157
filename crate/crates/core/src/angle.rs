//! Angles normalized to the half-open interval `[0, 2π)`.

use std::f64::consts::TAU;

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum AngleError {
    #[error("angle value is not finite: {0}")]
    NonFinite(f64),
}

/// An angle in radians, always normalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Normalizes an arbitrary finite value into `[0, 2π)`.
    pub fn from_radians(raw: f64) -> Result<Angle, AngleError> {
        if !raw.is_finite() {
            return Err(AngleError::NonFinite(raw));
        }
        Ok(Angle(normalize_radians(raw)))
    }

    pub fn from_degrees(deg: f64) -> Result<Angle, AngleError> {
        Angle::from_radians(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Adds a finite signed delta in radians and renormalizes.
    pub fn offset(self, delta: f64) -> Angle {
        debug_assert!(delta.is_finite());
        Angle(normalize_radians(self.0 + delta))
    }

    /// Smallest absolute angular separation from `other`, in `[0, π]`.
    pub fn separation(self, other: Angle) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(TAU - d)
    }

    pub fn cos(self) -> f64 {
        self.0.cos()
    }

    pub fn sin(self) -> f64 {
        self.0.sin()
    }
}

/// Maps any finite value into `[0, 2π)`. `rem_euclid` can round up to exactly
/// 2π for tiny negative inputs, so the result is folded once more.
pub fn normalize_radians(raw: f64) -> f64 {
    let r = raw.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}
