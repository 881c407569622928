//! Shared domain types used across the learner and the simulator.
//!
//! All quantities are SI: metres, seconds, m/s, m/s², litres.

use serde::{Deserialize, Serialize};

use crate::error::{PaccError, Result};
use crate::numfmt::ser_sig;

/// Lower bound applied to every learned cost weight.
pub const WEIGHT_FLOOR: f64 = 1e-3;

/// Longitudinal kinematic state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl VehicleState {
    pub const fn new(position: f64, velocity: f64, acceleration: f64) -> Self {
        Self {
            position,
            velocity,
            acceleration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_state(self)
    }
}

/// Accepts a state iff every field is finite and the velocity is nonnegative.
pub fn validate_state(s: &VehicleState) -> Result<()> {
    let check = |field: &'static str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(PaccError::Validation {
                field,
                reason: format!("non-finite value {v}"),
            })
        }
    };
    check("position", s.position)?;
    check("velocity", s.velocity)?;
    check("acceleration", s.acceleration)?;
    if s.velocity < 0.0 {
        return Err(PaccError::Validation {
            field: "velocity",
            reason: format!("negative speed {}", s.velocity),
        });
    }
    Ok(())
}

/// The four driving-style features: acceleration, desired speed, relative
/// speed and relative distance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub a: f64,
    pub ds: f64,
    pub rs: f64,
    pub rd: f64,
}

impl FeatureVector {
    pub const ZERO: FeatureVector = FeatureVector::from_array([0.0; 4]);

    pub const fn from_array(v: [f64; 4]) -> Self {
        Self {
            a: v[0],
            ds: v[1],
            rs: v[2],
            rd: v[3],
        }
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.a, self.ds, self.rs, self.rd]
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Arithmetic mean; `None` for an empty input.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a FeatureVector>) -> Option<FeatureVector> {
        let mut acc = [0.0; 4];
        let mut n = 0usize;
        for f in items {
            for (a, v) in acc.iter_mut().zip(f.to_array()) {
                *a += v;
            }
            n += 1;
        }
        (n > 0).then(|| FeatureVector::from_array(acc.map(|a| a / n as f64)))
    }
}

/// Cost weights over [`FeatureVector`] components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    #[serde(serialize_with = "ser_sig")]
    pub a: f64,
    #[serde(serialize_with = "ser_sig")]
    pub ds: f64,
    #[serde(serialize_with = "ser_sig")]
    pub rs: f64,
    #[serde(serialize_with = "ser_sig")]
    pub rd: f64,
}

impl Weights {
    pub const ONES: Weights = Weights::from_array([1.0; 4]);

    pub const fn from_array(v: [f64; 4]) -> Self {
        Self {
            a: v[0],
            ds: v[1],
            rs: v[2],
            rd: v[3],
        }
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.a, self.ds, self.rs, self.rd]
    }

    /// Weighted cost `W · f`.
    pub fn cost(&self, f: &FeatureVector) -> f64 {
        self.to_array()
            .iter()
            .zip(f.to_array())
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in ["a", "ds", "rs", "rd"].iter().zip(self.to_array()) {
            if !w.is_finite() || w < WEIGHT_FLOOR {
                return Err(PaccError::invalid(format!(
                    "weight {name} = {w} is below the floor {WEIGHT_FLOOR}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights::ONES
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub epochs: usize,
    #[serde(serialize_with = "ser_sig")]
    pub residual: f64,
}

/// A learned driver: cost weights plus the constants of the
/// desired-distance term and the segment length used while learning.
///
/// This is the portable artifact passed from `pacc learn` to `pacc simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverModel {
    pub weights: Weights,
    /// Time headway in the desired-distance term (s).
    #[serde(rename = "tau_s", serialize_with = "ser_sig")]
    pub tau: f64,
    /// Minimum safety clearance (m).
    #[serde(rename = "d_s_m", serialize_with = "ser_sig")]
    pub d_s: f64,
    /// Trajectory segment length (s).
    #[serde(rename = "t_h_s", serialize_with = "ser_sig")]
    pub segment_length: f64,
    #[serde(default)]
    pub provenance: Provenance,
}

impl DriverModel {
    pub const DEFAULT_D_S: f64 = 5.0;
    pub const DEFAULT_SEGMENT_LENGTH: f64 = 3.0;

    pub fn new(weights: Weights, tau: f64) -> Self {
        Self {
            weights,
            tau,
            d_s: Self::DEFAULT_D_S,
            segment_length: Self::DEFAULT_SEGMENT_LENGTH,
            provenance: Provenance::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(PaccError::invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.d_s.is_finite() && self.d_s > 0.0) {
            return Err(PaccError::invalid(format!("d_s must be > 0, got {}", self.d_s)));
        }
        if !(self.segment_length.is_finite() && self.segment_length > 0.0) {
            return Err(PaccError::invalid(format!(
                "segment length must be > 0, got {}",
                self.segment_length
            )));
        }
        Ok(())
    }

    /// Desired gap `v·τ + d_s` at speed `v`.
    pub fn desired_gap(&self, v: f64) -> f64 {
        v * self.tau + self.d_s
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: DriverModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| PaccError::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| PaccError::io(path, e))
    }
}
