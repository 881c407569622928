//! Driving-style features.
//!
//! Over a trajectory segment of length `T_h`:
//!
//! * `f_a  = ∫ r̈²`
//! * `f_ds = ∫ (v_d − ṙ)²`
//! * `f_rs = ∫ (v_p − ṙ)²`
//! * `f_rd = ∫ (d − d_D)²` with `d = x_p − r` and `d_D = ṙ·τ + d_s`
//!
//! The integrals run on a composite trapezoid grid. The receding-horizon
//! controller uses the discrete sums in [`horizon_features`].

use crate::error::{PaccError, Result};
use crate::trajectory::{Profile, SampledProfile};
use crate::types::{DriverModel, FeatureVector};

/// Quadrature step for the segment integrals (s).
pub const DEFAULT_STEP: f64 = 0.01;

/// What a follower segment is measured against.
#[derive(Debug, Clone, Copy)]
pub struct FeatureContext<'a> {
    pub v_d: f64,
    /// Leader states over the segment, local time starting at 0.
    pub leader: SampledProfile<'a>,
    pub tau: f64,
    pub d_s: f64,
}

/// Leader data and trapezoid weights precomputed on the quadrature grid.
///
/// Building this once per segment makes repeated cost evaluations (inside the
/// trajectory optimizer) cheap.
#[derive(Debug, Clone)]
pub struct FeatureGrid {
    times: Vec<f64>,
    weights: Vec<f64>,
    leader_position: Vec<f64>,
    leader_speed: Vec<f64>,
    v_d: f64,
    tau: f64,
    d_s: f64,
}

impl FeatureGrid {
    pub fn new(ctx: &FeatureContext<'_>, duration: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(duration > 0.0) {
            return Err(PaccError::invalid("quadrature step and duration must be > 0"));
        }
        if !(ctx.v_d >= 0.0) {
            return Err(PaccError::invalid(format!("v_d must be >= 0, got {}", ctx.v_d)));
        }
        if ctx.leader.samples.len() < 2 || ctx.leader.duration() + 1e-9 < duration {
            return Err(PaccError::invalid(format!(
                "leader data covers {} s, segment needs {duration} s",
                if ctx.leader.samples.is_empty() { 0.0 } else { ctx.leader.duration() }
            )));
        }
        let n = ((duration / step).round() as usize).max(1);
        let h = duration / n as f64;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let weights = (0..=n)
            .map(|i| if i == 0 || i == n { 0.5 * h } else { h })
            .collect();
        let (leader_position, leader_speed) = times
            .iter()
            .map(|&t| {
                let s = ctx.leader.state_at(t);
                (s.position, s.velocity)
            })
            .unzip();
        Ok(Self {
            times,
            weights,
            leader_position,
            leader_speed,
            v_d: ctx.v_d,
            tau: ctx.tau,
            d_s: ctx.d_s,
        })
    }

    pub fn features(&self, follower: &impl Profile) -> FeatureVector {
        let mut f = [0.0; 4];
        for (i, (&t, &w)) in self.times.iter().zip(&self.weights).enumerate() {
            let s = follower.state_at(t);
            let gap = self.leader_position[i] - s.position;
            let gap_err = gap - (s.velocity * self.tau + self.d_s);
            let ds = self.v_d - s.velocity;
            let rs = self.leader_speed[i] - s.velocity;
            f[0] += w * s.acceleration * s.acceleration;
            f[1] += w * ds * ds;
            f[2] += w * rs * rs;
            f[3] += w * gap_err * gap_err;
        }
        FeatureVector::from_array(f)
    }
}

/// Features of `follower` over `[0, follower.duration()]` at the default step.
pub fn segment_features(follower: &impl Profile, ctx: &FeatureContext<'_>) -> Result<FeatureVector> {
    segment_features_with_step(follower, ctx, DEFAULT_STEP)
}

pub fn segment_features_with_step(
    follower: &impl Profile,
    ctx: &FeatureContext<'_>,
    step: f64,
) -> Result<FeatureVector> {
    Ok(FeatureGrid::new(ctx, follower.duration(), step)?.features(follower))
}

/// One predicted controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonStep {
    /// Gap to the preceding vehicle (m).
    pub gap: f64,
    /// SAV speed (m/s).
    pub speed: f64,
    /// SAV acceleration applied over the step (m/s²).
    pub accel: f64,
}

/// Discrete features over a prediction horizon, each term weighted by `t_s`.
pub fn horizon_features(
    steps: &[HorizonStep],
    preview: &[f64],
    model: &DriverModel,
    v_d: f64,
    t_s: f64,
) -> Result<FeatureVector> {
    if steps.is_empty() || steps.len() != preview.len() {
        return Err(PaccError::invalid(format!(
            "horizon has {} steps but {} preview speeds",
            steps.len(),
            preview.len()
        )));
    }
    let mut f = [0.0; 4];
    for (s, &v_pv) in steps.iter().zip(preview) {
        let gap_err = s.gap - model.desired_gap(s.speed);
        f[0] += s.accel * s.accel;
        f[1] += (v_d - s.speed).powi(2);
        f[2] += (v_pv - s.speed).powi(2);
        f[3] += gap_err * gap_err;
    }
    Ok(FeatureVector::from_array(f.map(|x| x * t_s)))
}
