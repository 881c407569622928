//! Intelligent Driver Model fleet behind the SAV.

use serde::{Deserialize, Serialize};

use crate::error::{PaccError, Result};
use crate::types::VehicleState;

/// PV, SAV and three human-driven vehicles.
pub const FLEET_SIZE: usize = 5;
/// Consecutive vehicle pairs in the fleet.
pub const PAIRS: usize = FLEET_SIZE - 1;

pub const PV: usize = 0;
pub const SAV: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Maximum acceleration `a` (m/s²).
    pub a_max: f64,
    /// Comfortable deceleration `b` (m/s²).
    pub b_max: f64,
    pub delta: f64,
    /// Cruising speed (m/s).
    pub v_s: f64,
    /// Jam distance (m).
    pub s0: f64,
    /// Desired time headway (s).
    #[serde(rename = "t_headway")]
    pub time_headway: f64,
}

impl IdmParams {
    pub fn with_cruise_speed(v_s: f64) -> Self {
        Self {
            a_max: 2.0,
            b_max: 3.0,
            delta: 4.0,
            v_s,
            s0: 2.0,
            time_headway: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.a_max, self.b_max, self.v_s, self.s0, self.time_headway]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive || !(self.delta >= 1.0) {
            return Err(PaccError::invalid(format!("invalid IDM parameters {self:?}")));
        }
        Ok(())
    }

    /// Steady-state gap at speed `v`, where the IDM acceleration vanishes.
    ///
    /// Falls back to `s0 + T·v` at standstill or at and above `v_s`, where the
    /// free-road term no longer leaves room for a finite root.
    pub fn equilibrium_gap(&self, v: f64) -> f64 {
        let base = self.s0 + self.time_headway * v;
        if v <= 0.0 || v >= self.v_s {
            return base;
        }
        base / (1.0 - (v / self.v_s).powf(self.delta)).sqrt()
    }
}

/// IDM acceleration of a follower at speed `v` closing on its leader at
/// `dv = v_follower − v_leader` with gap `s`.
///
/// The desired gap is floored at `s0` and the result is clipped to
/// `[−2·b_max, a_max]`.
pub fn idm_accel(v: f64, dv: f64, s: f64, p: &IdmParams) -> Result<f64> {
    if !(s > 0.0) {
        return Err(PaccError::Collision { pair: None, gap: s });
    }
    let s_star = (p.s0 + p.time_headway * v + v * dv / (2.0 * (p.a_max * p.b_max).sqrt())).max(p.s0);
    let free = (v / p.v_s).powf(p.delta);
    let a = p.a_max * (1.0 - free - (s_star / s).powi(2));
    Ok(a.clamp(-2.0 * p.b_max, p.a_max))
}

/// Snapshot of the platoon, front to back `[PV, SAV, HV1, HV2, HV3]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetState {
    pub vehicles: [VehicleState; FLEET_SIZE],
    pub time: f64,
}

impl FleetState {
    pub fn gap(&self, pair: usize) -> f64 {
        self.vehicles[pair].position - self.vehicles[pair + 1].position
    }

    pub fn validate(&self) -> Result<()> {
        for v in &self.vehicles {
            v.validate()?;
        }
        check_gaps(&self.vehicles)
    }
}

fn check_gaps(vehicles: &[VehicleState; FLEET_SIZE]) -> Result<()> {
    for k in 0..PAIRS {
        let gap = vehicles[k].position - vehicles[k + 1].position;
        if !(gap > 0.0) {
            return Err(PaccError::Collision {
                pair: Some(k + 1),
                gap,
            });
        }
    }
    Ok(())
}

/// Advance the fleet by `dt` with semi-implicit Euler.
///
/// The PV takes `pv_speed` (its cycle speed at the new time); the SAV applies
/// `sav_accel`; every HV applies the IDM law relative to its predecessor at
/// the current state. Speeds are floored at zero and the recorded
/// acceleration is the one actually realised.
pub fn step_fleet(
    state: &FleetState,
    pv_speed: f64,
    sav_accel: f64,
    dt: f64,
    p: &IdmParams,
) -> Result<FleetState> {
    if !(dt > 0.0) {
        return Err(PaccError::invalid(format!("dt must be > 0, got {dt}")));
    }
    let cur = &state.vehicles;
    let mut commanded = [0.0; FLEET_SIZE];
    commanded[SAV] = sav_accel;
    for k in (SAV + 1)..FLEET_SIZE {
        let (lead, me) = (&cur[k - 1], &cur[k]);
        commanded[k] = idm_accel(me.velocity, me.velocity - lead.velocity, lead.position - me.position, p)
            .map_err(|e| match e {
                PaccError::Collision { gap, .. } => PaccError::Collision { pair: Some(k), gap },
                other => other,
            })?;
    }

    let mut next = *cur;
    for (k, v) in next.iter_mut().enumerate() {
        let old = cur[k].velocity;
        let new_speed = if k == PV {
            pv_speed.max(0.0)
        } else {
            (old + commanded[k] * dt).max(0.0)
        };
        v.acceleration = (new_speed - old) / dt;
        v.velocity = new_speed;
        v.position += new_speed * dt;
    }
    check_gaps(&next)?;
    Ok(FleetState {
        vehicles: next,
        time: state.time + dt,
    })
}
