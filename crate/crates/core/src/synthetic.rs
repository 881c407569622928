//! Synthetic demonstrations: a follower that drives exactly the most likely
//! motion of a known driver model behind a given leader.

use std::f64::consts::TAU;

use crate::cycle::DrivingCycle;
use crate::demo::{Demonstration, SampledTrajectory};
use crate::error::{PaccError, Result};
use crate::features::FeatureContext;
use crate::irl::most_likely_segment;
use crate::types::{DriverModel, VehicleState};

const VD_MAX_ITER: usize = 30;
const VD_TOL: f64 = 1e-9;
/// Backward creep (m/s) still treated as standing still.
const CREEP_TOL: f64 = 1e-3;

/// A smooth, deterministic speed trace without stops, useful for learning
/// experiments: three superposed sinusoids around 15 m/s.
pub fn smooth_cycle(duration: f64, period: f64) -> Result<DrivingCycle> {
    if !(duration > 0.0 && period > 0.0) {
        return Err(PaccError::invalid("duration and period must be > 0"));
    }
    let n = (duration / period).round() as usize;
    let speeds = (0..=n)
        .map(|i| {
            let t = i as f64 * period;
            15.0 + 4.0 * (TAU * t / 50.0).sin()
                + 2.5 * (TAU * t / 17.0 + 0.7).sin()
                + 0.8 * (TAU * t / 7.3 + 1.9).sin()
        })
        .collect();
    DrivingCycle::new(period, speeds)
}

/// Leader trajectory driving `cycle`, starting at `x0`.
pub fn leader_from_cycle(cycle: &DrivingCycle, x0: f64) -> SampledTrajectory {
    let states = cycle
        .positions(x0)
        .into_iter()
        .zip(cycle.speeds())
        .zip(cycle.accelerations())
        .map(|((x, &v), a)| VehicleState::new(x, v, a))
        .collect();
    SampledTrajectory {
        start_time: 0.0,
        period: cycle.sample_period(),
        states,
    }
}

/// Follower state at the model's desired gap behind `leader`.
pub fn equilibrium_follower(leader: &VehicleState, model: &DriverModel) -> VehicleState {
    VehicleState::new(
        leader.position - model.desired_gap(leader.velocity),
        leader.velocity,
        leader.acceleration,
    )
}

/// Drive a follower behind `leader` with `model`, segment by segment.
///
/// Each `T_h` window starts from the state the previous one ended in and
/// follows the most likely segment for that window. The desired speed of a
/// window is its own maximum sampled follower speed, found by fixed-point
/// iteration so that re-segmenting the output reproduces the same contexts.
/// Leader samples past the last full window are dropped.
pub fn generate_demonstration(
    leader: &SampledTrajectory,
    model: &DriverModel,
    initial: &VehicleState,
) -> Result<Demonstration> {
    model.validate()?;
    initial.validate()?;
    let period = leader.period;
    let step = (model.segment_length / period).round() as usize;
    if step == 0 || ((step as f64) * period - model.segment_length).abs() > 1e-9 * model.segment_length {
        return Err(PaccError::invalid(format!(
            "segment length {} s is not a multiple of the sample period {period} s",
            model.segment_length
        )));
    }
    if leader.states.len() < step + 1 {
        return Err(PaccError::invalid("leader is shorter than one segment"));
    }
    let windows = (leader.states.len() - 1) / step;
    let t_h = step as f64 * period;

    let mut follower = Vec::with_capacity(windows * step + 1);
    follower.push(*initial);
    for w in 0..windows {
        let start = follower[w * step];
        let leader_window = &leader.states[w * step..=(w + 1) * step];
        let mut ctx = FeatureContext {
            v_d: leader_window
                .iter()
                .map(|s| s.velocity)
                .fold(start.velocity, f64::max),
            leader: crate::trajectory::SampledProfile {
                period,
                samples: leader_window,
            },
            tau: model.tau,
            d_s: model.d_s,
        };
        let mut samples = Vec::new();
        for _ in 0..VD_MAX_ITER {
            let ml = most_likely_segment(&start, &ctx, &model.weights, t_h)?;
            samples = (1..=step)
                .map(|i| ml.segment.eval((i as f64 * period).min(t_h)))
                .collect::<Result<Vec<_>>>()?;
            let v_d = samples.iter().map(|s| s.velocity).fold(start.velocity, f64::max);
            let done = (v_d - ctx.v_d).abs() <= VD_TOL * v_d.max(1.0);
            ctx.v_d = v_d;
            if done {
                break;
            }
        }
        // Starting from rest the optimal segment can creep backwards by
        // round-off amounts; treat that as standing still.
        for s in samples.iter_mut().filter(|s| (-CREEP_TOL..0.0).contains(&s.velocity)) {
            s.velocity = 0.0;
            s.acceleration = s.acceleration.max(0.0);
        }
        if let Some(bad) = samples.iter().find(|s| s.velocity < 0.0) {
            return Err(PaccError::invalid(format!(
                "generated follower reverses (speed {} m/s) in window {w}",
                bad.velocity
            )));
        }
        follower.extend(samples);
    }

    let leader_states = leader.states[..=windows * step].to_vec();
    Ok(Demonstration {
        leader: SampledTrajectory {
            states: leader_states,
            ..leader.clone()
        },
        follower: SampledTrajectory {
            start_time: leader.start_time,
            period,
            states: follower,
        },
    })
}

/// Cut a demonstration into `parts` consecutive pieces holding the same
/// number of `t_h` windows each. Neighbouring pieces share a boundary sample;
/// windows that do not divide evenly are dropped from the end.
pub fn split_parts(demo: &Demonstration, t_h: f64, parts: usize) -> Result<Vec<Demonstration>> {
    let period = demo.leader.period;
    let step = (t_h / period).round() as usize;
    if parts == 0 || step == 0 {
        return Err(PaccError::invalid("parts and segment length must be > 0"));
    }
    let windows = demo.leader.states.len().saturating_sub(1) / step;
    let per_part = windows / parts;
    if per_part == 0 {
        return Err(PaccError::invalid(format!(
            "{windows} windows cannot be split into {parts} parts"
        )));
    }
    let len = per_part * step;
    Ok((0..parts)
        .map(|p| {
            let range = p * len..=(p + 1) * len;
            let cut = |tr: &SampledTrajectory| SampledTrajectory {
                start_time: tr.start_time + (p * len) as f64 * period,
                period,
                states: tr.states[range.clone()].to_vec(),
            };
            Demonstration {
                leader: cut(&demo.leader),
                follower: cut(&demo.follower),
            }
        })
        .collect())
}
