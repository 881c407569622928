//! Personalized adaptive cruise control.
//!
//! At every controller tick the SAV minimizes the learned cost `W · f` over
//! a short prediction horizon, using the PV speed preview and the discrete
//! inter-vehicle model
//!
//! ```text
//! Δx(j+1) = Δx(j) + (V_PV(j) − V_0(j))·T_s
//! V_0(j+1) = V_0(j) + a_0(j)·T_s
//! ```
//!
//! subject to `Δx(j) ≥ Δx_min`, and applies only the first acceleration.

use serde::{Deserialize, Serialize};

use crate::error::{PaccError, Result};
use crate::features::{horizon_features, HorizonStep};
use crate::optim::{minimize_constrained, BoxedProblem, ConstrainedOptions};
use crate::types::DriverModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Prediction horizon `T_p` (s).
    pub prediction_horizon: f64,
    /// Control horizon `T_c` (s).
    pub control_horizon: f64,
    /// Controller sample time `T_s` (s).
    pub sample_time: f64,
    /// Minimum admissible gap (m).
    pub dx_min: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            prediction_horizon: 3.0,
            control_horizon: 3.0,
            sample_time: 1.0,
            dx_min: 5.0,
            a_min: -3.0,
            a_max: 2.0,
        }
    }
}

fn whole_steps(horizon: f64, t_s: f64) -> Option<usize> {
    let r = horizon / t_s;
    let n = r.round();
    ((r - n).abs() <= 1e-9 * r.max(1.0) && n >= 1.0).then_some(n as usize)
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_time > 0.0) {
            return Err(PaccError::invalid("controller sample time must be > 0"));
        }
        if whole_steps(self.prediction_horizon, self.sample_time).is_none()
            || whole_steps(self.control_horizon, self.sample_time).is_none()
        {
            return Err(PaccError::invalid(
                "horizons must be positive whole multiples of the sample time",
            ));
        }
        if self.control_horizon > self.prediction_horizon {
            return Err(PaccError::invalid("control horizon exceeds prediction horizon"));
        }
        if !(self.dx_min > 0.0) {
            return Err(PaccError::invalid("dx_min must be > 0"));
        }
        if !(self.a_min < 0.0 && 0.0 < self.a_max) {
            return Err(PaccError::invalid("acceleration bounds must straddle zero"));
        }
        Ok(())
    }

    pub fn prediction_steps(&self) -> usize {
        whole_steps(self.prediction_horizon, self.sample_time).unwrap_or(1)
    }

    pub fn control_steps(&self) -> usize {
        whole_steps(self.control_horizon, self.sample_time).unwrap_or(1)
    }
}

/// PV speeds at the current tick and each following tick of the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviewWindow {
    pub pv_speeds: Vec<f64>,
}

impl PreviewWindow {
    pub fn new(pv_speeds: Vec<f64>) -> Result<Self> {
        if pv_speeds.is_empty() || pv_speeds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(PaccError::invalid("preview speeds must be nonempty, finite, >= 0"));
        }
        Ok(Self { pv_speeds })
    }

    pub fn max_speed(&self) -> f64 {
        self.pv_speeds.iter().copied().fold(0.0, f64::max)
    }
}

/// Forward-Euler rollout of the inter-vehicle model.
///
/// Entry `j` holds the gap and speed after step `j` and the acceleration
/// actually applied during it: the SAV never reverses, so a deceleration
/// that would drive the speed negative is cut to stop exactly at zero.
pub fn predict(gap0: f64, v0: f64, accels: &[f64], preview: &[f64], t_s: f64) -> Vec<HorizonStep> {
    let mut gap = gap0;
    let mut v = v0;
    accels
        .iter()
        .zip(preview)
        .map(|(&a, &v_pv)| {
            gap += (v_pv - v) * t_s;
            let v_next = (v + a * t_s).max(0.0);
            let applied = (v_next - v) / t_s;
            v = v_next;
            HorizonStep {
                gap,
                speed: v,
                accel: applied,
            }
        })
        .collect()
}

/// Result of one controller tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub a_cmd: f64,
    /// Optimal acceleration per prediction step.
    pub plan: Vec<f64>,
    pub predicted: Vec<HorizonStep>,
    pub objective: f64,
    /// No plan kept the predicted gap above `dx_min`; full braking applied.
    pub safety_fallback: bool,
}

/// Expand the control-horizon decision vector to the prediction horizon by
/// holding the last control.
fn expand(decision: &[f64], steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|j| decision[j.min(decision.len() - 1)])
        .collect()
}

/// PV speed compared against the SAV speed after each predicted step.
fn feature_preview(preview: &[f64]) -> Vec<f64> {
    let n = preview.len();
    (0..n).map(|j| preview[(j + 1).min(n - 1)]).collect()
}

/// Objective value `W · f` of a decision vector.
pub fn plan_cost(
    decision: &[f64],
    gap0: f64,
    v0: f64,
    preview: &PreviewWindow,
    model: &DriverModel,
    cfg: &ControllerConfig,
) -> f64 {
    let steps = preview.pv_speeds.len();
    let accels = expand(decision, steps);
    let predicted = predict(gap0, v0, &accels, &preview.pv_speeds, cfg.sample_time);
    let f = horizon_features(
        &predicted,
        &feature_preview(&preview.pv_speeds),
        model,
        preview.max_speed(),
        cfg.sample_time,
    )
    .expect("predicted horizon matches preview length");
    model.weights.cost(&f)
}

/// Smallest predicted gap margin `min_j Δx(j) − dx_min` of a decision vector.
pub fn plan_margins(
    decision: &[f64],
    gap0: f64,
    v0: f64,
    preview: &PreviewWindow,
    cfg: &ControllerConfig,
) -> Vec<f64> {
    let accels = expand(decision, preview.pv_speeds.len());
    predict(gap0, v0, &accels, &preview.pv_speeds, cfg.sample_time)
        .iter()
        .map(|s| s.gap - cfg.dx_min)
        .collect()
}

/// Solve one receding-horizon problem warm-started at `warm`.
fn solve(
    gap0: f64,
    v0: f64,
    warm: &[f64],
    preview: &PreviewWindow,
    model: &DriverModel,
    cfg: &ControllerConfig,
) -> Result<StepOutcome> {
    cfg.validate()?;
    if !(gap0 > 0.0) {
        return Err(PaccError::invalid(format!("gap must be > 0, got {gap0}")));
    }
    if preview.pv_speeds.len() != cfg.prediction_steps() {
        return Err(PaccError::invalid(format!(
            "preview has {} speeds, horizon needs {}",
            preview.pv_speeds.len(),
            cfg.prediction_steps()
        )));
    }
    let nc = cfg.control_steps();
    let problem = BoxedProblem::new(
        |x: &[f64]| plan_cost(x, gap0, v0, preview, model, cfg),
        vec![cfg.a_min; nc],
        vec![cfg.a_max; nc],
    )
    .with_constraints(|x: &[f64]| plan_margins(x, gap0, v0, preview, cfg));
    let opts = ConstrainedOptions::default();

    // The warm start plus two fixed starts: the speed-floor kink makes the
    // problem mildly nonconvex near standstill.
    let starts = [warm.to_vec(), vec![0.0; nc], vec![cfg.a_min; nc]];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        if let Ok(m) = minimize_constrained(&problem, s, &opts) {
            if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
                best = Some((m.point, m.value));
            }
        }
    }

    let steps = cfg.prediction_steps();
    match best {
        Some((plan, objective)) => {
            let accels = expand(&plan, steps);
            let predicted = predict(gap0, v0, &accels, &preview.pv_speeds, cfg.sample_time);
            Ok(StepOutcome {
                a_cmd: plan[0],
                plan: accels,
                predicted,
                objective,
                safety_fallback: false,
            })
        }
        None => {
            let accels = vec![cfg.a_min; steps];
            let predicted = predict(gap0, v0, &accels, &preview.pv_speeds, cfg.sample_time);
            Ok(StepOutcome {
                a_cmd: cfg.a_min,
                objective: plan_cost(&accels[..nc], gap0, v0, preview, model, cfg),
                plan: accels,
                predicted,
                safety_fallback: true,
            })
        }
    }
}

/// One stateless controller tick, warm-started with `a_prev` repeated.
pub fn solve_step(
    gap0: f64,
    v0: f64,
    a_prev: f64,
    preview: &PreviewWindow,
    model: &DriverModel,
    cfg: &ControllerConfig,
) -> Result<StepOutcome> {
    let warm = vec![a_prev.clamp(cfg.a_min, cfg.a_max); cfg.control_steps()];
    solve(gap0, v0, &warm, preview, model, cfg)
}

/// Receding-horizon controller that warm-starts each tick from the previous
/// plan shifted by one step.
#[derive(Debug, Clone)]
pub struct Controller {
    model: DriverModel,
    cfg: ControllerConfig,
    previous: Option<Vec<f64>>,
}

impl Controller {
    pub fn new(model: DriverModel, cfg: ControllerConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        Ok(Self {
            model,
            cfg,
            previous: None,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn model(&self) -> &DriverModel {
        &self.model
    }

    pub fn step(&mut self, gap0: f64, v0: f64, a_prev: f64, preview: &PreviewWindow) -> Result<StepOutcome> {
        let nc = self.cfg.control_steps();
        let warm = match &self.previous {
            Some(prev) => (0..nc).map(|j| prev[(j + 1).min(prev.len() - 1)]).collect(),
            None => vec![a_prev.clamp(self.cfg.a_min, self.cfg.a_max); nc],
        };
        let out = solve(gap0, v0, &warm, preview, &self.model, &self.cfg)?;
        self.previous = Some(out.plan[..nc].to_vec());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Weights;

    #[test]
    fn predict_examples() {
        let p = predict(10.0, 8.0, &[1.0; 3], &[10.0; 3], 1.0);
        assert_eq!((p[0].gap, p[0].speed), (12.0, 9.0));

        let p = predict(20.0, 10.0, &[0.0; 5], &[10.0; 5], 1.0);
        assert!(p.iter().all(|s| s.gap == 20.0));

        let p = predict(20.0, 0.5, &[-2.0], &[0.0], 1.0);
        assert_eq!(p[0].speed, 0.0);
        assert_eq!(p[0].accel, -0.5);
    }

    #[test]
    fn config_validation() {
        let mut c = ControllerConfig::default();
        c.validate().unwrap();
        assert_eq!(c.prediction_steps(), 3);
        c.control_horizon = 4.0;
        assert!(c.validate().is_err());
        c = ControllerConfig {
            prediction_horizon: 2.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c = ControllerConfig {
            a_min: 0.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn shorter_control_horizon_holds_last_input() {
        let cfg = ControllerConfig {
            control_horizon: 1.0,
            ..Default::default()
        };
        let model = DriverModel::new(Weights::from_array([0.989, 0.064, 0.962, 0.112]), 1.5);
        let preview = PreviewWindow::new(vec![15.0, 14.0, 13.0]).unwrap();
        let out = solve_step(30.0, 15.0, 0.0, &preview, &model, &cfg).unwrap();
        assert_eq!(out.plan.len(), 3);
        assert!(out.plan.iter().all(|a| *a == out.plan[0]));
    }

    #[test]
    fn infeasible_falls_back_to_full_braking() {
        let cfg = ControllerConfig::default();
        let model = DriverModel::new(Weights::ONES, 1.0);
        // 6 m behind a stopped PV at 20 m/s: no admissible plan exists.
        let preview = PreviewWindow::new(vec![0.0; 3]).unwrap();
        let out = solve_step(6.0, 20.0, 0.0, &preview, &model, &cfg).unwrap();
        assert!(out.safety_fallback);
        assert_eq!(out.a_cmd, cfg.a_min);
    }

    #[test]
    fn bad_inputs() {
        let cfg = ControllerConfig::default();
        let model = DriverModel::new(Weights::ONES, 1.0);
        let preview = PreviewWindow::new(vec![10.0; 2]).unwrap();
        assert!(solve_step(20.0, 10.0, 0.0, &preview, &model, &cfg).is_err());
        let preview = PreviewWindow::new(vec![10.0; 3]).unwrap();
        assert!(solve_step(0.0, 10.0, 0.0, &preview, &model, &cfg).is_err());
        assert!(PreviewWindow::new(vec![-1.0]).is_err());
    }
}
