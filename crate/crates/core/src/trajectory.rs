//! Quintic polynomial trajectory segments.
//!
//! A segment describes the longitudinal position over local time
//! `t ∈ [0, duration]` as
//! `r(t) = c0·t⁵ + c1·t⁴ + c2·t³ + c3·t² + c4·t + c5`.

use serde::{Deserialize, Serialize};

use crate::error::{PaccError, Result};
use crate::types::VehicleState;

/// Slack allowed when checking that an evaluation time lies in the segment.
const RANGE_SLACK: f64 = 1e-9;

/// Anything that yields a longitudinal state over `[0, duration]`.
pub trait Profile {
    fn duration(&self) -> f64;

    /// State at local time `t`, which the caller keeps within the profile.
    fn state_at(&self, t: f64) -> VehicleState;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuinticSegment {
    /// `(c0, …, c5)`, highest power first.
    pub coefficients: [f64; 6],
    pub duration: f64,
}

impl QuinticSegment {
    pub fn new(coefficients: [f64; 6], duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(PaccError::invalid(format!(
                "segment duration must be > 0, got {duration}"
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(PaccError::invalid("segment coefficients must be finite"));
        }
        Ok(Self {
            coefficients,
            duration,
        })
    }

    /// Segment anchored at `initial` with the free coefficients `(c0, c1, c2)`.
    pub fn anchored(initial: &VehicleState, free: [f64; 3], duration: f64) -> Result<Self> {
        let (c5, c4, c3) = anchor(initial);
        Self::new([free[0], free[1], free[2], c3, c4, c5], duration)
    }

    pub fn free_coefficients(&self) -> [f64; 3] {
        [self.coefficients[0], self.coefficients[1], self.coefficients[2]]
    }

    /// Position, velocity and acceleration at local time `t`.
    pub fn eval(&self, t: f64) -> Result<VehicleState> {
        if !(t >= -RANGE_SLACK && t <= self.duration + RANGE_SLACK) {
            return Err(PaccError::OutOfRange {
                t,
                duration: self.duration,
            });
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64) -> VehicleState {
        let [c0, c1, c2, c3, c4, c5] = self.coefficients;
        let position = ((((c0 * t + c1) * t + c2) * t + c3) * t + c4) * t + c5;
        let velocity = (((5.0 * c0 * t + 4.0 * c1) * t + 3.0 * c2) * t + 2.0 * c3) * t + c4;
        let acceleration = ((20.0 * c0 * t + 12.0 * c1) * t + 6.0 * c2) * t + 2.0 * c3;
        VehicleState {
            position,
            velocity,
            acceleration,
        }
    }

    /// State at the end of the segment.
    pub fn terminal(&self) -> VehicleState {
        self.eval_unchecked(self.duration)
    }
}

impl Profile for QuinticSegment {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn state_at(&self, t: f64) -> VehicleState {
        self.eval_unchecked(t)
    }
}

/// Coefficients `(c5, c4, c3)` that reproduce `initial` at `t = 0`.
///
/// `r̈(0) = 2·c3`, so `c3` is half the initial acceleration.
pub fn anchor(initial: &VehicleState) -> (f64, f64, f64) {
    (initial.position, initial.velocity, initial.acceleration / 2.0)
}

/// Uniformly sampled states interpolated linearly between samples.
#[derive(Debug, Clone, Copy)]
pub struct SampledProfile<'a> {
    pub period: f64,
    pub samples: &'a [VehicleState],
}

impl Profile for SampledProfile<'_> {
    fn duration(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 * self.period
    }

    fn state_at(&self, t: f64) -> VehicleState {
        let last = self.samples.len() - 1;
        let x = (t / self.period).max(0.0);
        let i = (x.floor() as usize).min(last);
        if i == last {
            return self.samples[last];
        }
        let w = x - i as f64;
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        VehicleState {
            position: a.position + w * (b.position - a.position),
            velocity: a.velocity + w * (b.velocity - a.velocity),
            acceleration: a.acceleration + w * (b.acceleration - a.acceleration),
        }
    }
}
