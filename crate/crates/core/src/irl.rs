//! Maximum-entropy inverse reinforcement learning of driver cost weights.
//!
//! The cost of a follower segment is `W · f`. Under the maximum-entropy
//! model the most likely segment is the cost minimizer, so the expected
//! features at `W` are approximated by the features of the per-segment
//! minimizers. Weights move along the normalized feature-matching gradient
//! `fᵉ − f̃` until the expected features match the observed ones.

use rayon::prelude::*;

use crate::demo::{split_demonstration, Demonstration, DemonstrationSegment, DemonstrationSet};
use crate::error::{PaccError, Result};
use crate::features::{segment_features, FeatureContext, FeatureGrid, DEFAULT_STEP};
use crate::optim::{minimize_unconstrained, Termination, UnconstrainedOptions};
use crate::trajectory::{QuinticSegment, SampledProfile};
use crate::types::{DriverModel, FeatureVector, Provenance, VehicleState, Weights, WEIGHT_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningConfig {
    /// Initial learning rate.
    pub eta0: f64,
    /// The rate halves after every this many epochs.
    pub eta_halving_epochs: usize,
    pub max_epochs: usize,
    /// Stop once `‖fᵉ − f̃‖ / ‖f̃‖` is at or below this.
    pub convergence_tol: f64,
    pub weight_floor: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            eta0: 0.2,
            eta_halving_epochs: 5,
            max_epochs: 50,
            convergence_tol: 0.02,
            weight_floor: WEIGHT_FLOOR,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) {
            return Err(PaccError::invalid("eta0 must be > 0"));
        }
        if self.max_epochs == 0 {
            return Err(PaccError::invalid("max_epochs must be >= 1"));
        }
        if self.eta_halving_epochs == 0 {
            return Err(PaccError::invalid("eta_halving_epochs must be >= 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(PaccError::invalid("convergence_tol must be > 0"));
        }
        if !(self.weight_floor > 0.0) {
            return Err(PaccError::invalid("weight_floor must be > 0"));
        }
        Ok(())
    }

    /// Learning rate for a 1-based epoch.
    pub fn eta(&self, epoch: usize) -> f64 {
        let halvings = (epoch.saturating_sub(1) / self.eta_halving_epochs) as i32;
        self.eta0 * 0.5f64.powi(halvings)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedResult {
    pub model: DriverModel,
    /// Most likely segment per demonstration segment under `model`.
    pub most_likely_segments: Vec<QuinticSegment>,
    pub epochs_run: usize,
    /// `‖fᵉ − f̃‖` at the returned weights.
    pub final_gradient_norm: f64,
    /// Relative residual `‖fᵉ − f̃‖ / ‖f̃‖` per epoch.
    pub residual_history: Vec<f64>,
    /// Weights evaluated in each epoch.
    pub weight_history: Vec<Weights>,
    pub observed: FeatureVector,
    pub expected: FeatureVector,
    pub converged: bool,
    /// Observed features were all zero; nothing could be learned.
    pub degenerate: bool,
    /// Segment fits in the last epoch that ran out of optimizer budget.
    pub budget_exhausted_fits: usize,
}

impl LearnedResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

fn context<'a>(seg: &'a DemonstrationSegment, tau: f64, d_s: f64) -> FeatureContext<'a> {
    FeatureContext {
        v_d: seg.v_d,
        leader: SampledProfile {
            period: seg.sample_period,
            samples: &seg.leader_samples,
        },
        tau,
        d_s,
    }
}

/// Mean features of the demonstrated segments, measured on the sampled
/// follower motion itself.
pub fn observed_features(set: &DemonstrationSet) -> Result<FeatureVector> {
    if set.segments.is_empty() {
        return Err(PaccError::invalid("no demonstration segments"));
    }
    let per_segment = set
        .segments
        .iter()
        .map(|s| segment_features(&s.follower_profile(), &context(s, set.tau, set.d_s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureVector::mean(&per_segment).expect("nonempty"))
}

/// The cost-minimizing segment from `init` together with its features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MostLikely {
    pub segment: QuinticSegment,
    pub features: FeatureVector,
    pub cost: f64,
    pub termination: Termination,
}

impl MostLikely {
    pub fn budget_exhausted(&self) -> bool {
        self.termination == Termination::BudgetExhausted
    }
}

/// Most likely segment under cost `W · f`: anchored at `init`, with the free
/// coefficients `(c0, c1, c2)` chosen by minimizing the cost from `(0, 0, 0)`.
pub fn most_likely_segment(
    init: &VehicleState,
    ctx: &FeatureContext<'_>,
    weights: &Weights,
    t_h: f64,
) -> Result<MostLikely> {
    weights.validate()?;
    let grid = FeatureGrid::new(ctx, t_h, DEFAULT_STEP)?;
    // Optimize over u_k = c_k · T^(5−k): every free term then contributes
    // metres of displacement at t = T, which keeps the problem well scaled.
    let scale = [t_h.powi(5), t_h.powi(4), t_h.powi(3)];
    let build = |u: &[f64]| {
        QuinticSegment::anchored(init, [u[0] / scale[0], u[1] / scale[1], u[2] / scale[2]], t_h)
    };
    let probe = build(&[0.0; 3])?;
    let cost = |u: &[f64]| {
        let mut seg = probe;
        for k in 0..3 {
            seg.coefficients[k] = u[k] / scale[k];
        }
        weights.cost(&grid.features(&seg))
    };
    let m = minimize_unconstrained(cost, &[0.0; 3], &UnconstrainedOptions::default())?;
    let segment = build(&m.point)?;
    Ok(MostLikely {
        features: grid.features(&segment),
        cost: m.value,
        segment,
        termination: m.termination,
    })
}

/// Feature-matching gradient `fᵉ − f̃`.
pub fn gradient(expected: &FeatureVector, observed: &FeatureVector) -> [f64; 4] {
    let (e, o) = (expected.to_array(), observed.to_array());
    std::array::from_fn(|i| e[i] - o[i])
}

/// Normalized-gradient step `W + η·∇/‖∇‖`, then a componentwise floor.
/// A zero gradient leaves the weights unchanged.
pub fn update_weights(w: &Weights, grad: &[f64; 4], eta: f64, floor: f64) -> Weights {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return *w;
    }
    let cur = w.to_array();
    Weights::from_array(std::array::from_fn(|i| (cur[i] + eta * grad[i] / norm).max(floor)))
}

fn fit_all(
    set: &DemonstrationSet,
    weights: &Weights,
    tau: f64,
) -> Result<Vec<MostLikely>> {
    set.segments
        .par_iter()
        .map(|s| most_likely_segment(&s.initial_state(), &context(s, tau, set.d_s), weights, s.duration))
        .collect()
}

/// Learn driver weights from a demonstration set.
pub fn learn(set: &DemonstrationSet, cfg: &LearningConfig) -> Result<LearnedResult> {
    cfg.validate()?;
    let observed = observed_features(set)?;
    let observed_norm = observed.norm();
    let mut weights = Weights::ONES;
    let make_model = |w: Weights, epochs: usize, residual: f64| DriverModel {
        weights: w,
        tau: set.tau,
        d_s: set.d_s,
        segment_length: set.segment_length,
        provenance: Provenance { epochs, residual },
    };

    if !(observed_norm > 0.0) {
        let fits = fit_all(set, &weights, set.tau)?;
        return Ok(LearnedResult {
            model: make_model(weights, 0, 0.0),
            most_likely_segments: fits.iter().map(|m| m.segment).collect(),
            epochs_run: 0,
            final_gradient_norm: 0.0,
            residual_history: Vec::new(),
            weight_history: Vec::new(),
            observed,
            expected: FeatureVector::mean(fits.iter().map(|m| &m.features)).unwrap_or(FeatureVector::ZERO),
            converged: false,
            degenerate: true,
            budget_exhausted_fits: 0,
        });
    }

    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut weight_history = Vec::with_capacity(cfg.max_epochs);
    for epoch in 1..=cfg.max_epochs {
        weight_history.push(weights);
        let fits = fit_all(set, &weights, set.tau)?;
        let expected = FeatureVector::mean(fits.iter().map(|m| &m.features)).expect("nonempty");
        let grad = gradient(&expected, &observed);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let residual = grad_norm / observed_norm;
        history.push(residual);
        log::debug!(
            "epoch {epoch}: residual {residual:.6} weights {:?}",
            weights.to_array()
        );
        let converged = residual <= cfg.convergence_tol;
        if converged || epoch == cfg.max_epochs {
            return Ok(LearnedResult {
                model: make_model(weights, epoch, residual),
                budget_exhausted_fits: fits.iter().filter(|m| m.budget_exhausted()).count(),
                most_likely_segments: fits.into_iter().map(|m| m.segment).collect(),
                epochs_run: epoch,
                final_gradient_norm: grad_norm,
                residual_history: history,
                weight_history,
                observed,
                expected,
                converged,
                degenerate: false,
            });
        }
        weights = update_weights(&weights, &grad, cfg.eta(epoch), cfg.weight_floor);
    }
    unreachable!("max_epochs >= 1 is validated")
}

/// Segment-wise replay of a demonstration with a learned model: each
/// segment restarts from the demonstrated state and follows the model's most
/// likely motion. Returns demonstrated and predicted follower states at every
/// sample after the first.
pub fn predict_demonstration(
    model: &DriverModel,
    demo: &Demonstration,
) -> Result<Vec<(VehicleState, VehicleState)>> {
    let segments = split_demonstration(&demo.leader, &demo.follower, model.segment_length)?;
    let mut out = Vec::new();
    for s in &segments {
        let ml = most_likely_segment(
            &s.initial_state(),
            &context(s, model.tau, model.d_s),
            &model.weights,
            s.duration,
        )?;
        for (i, actual) in s.follower_samples.iter().enumerate().skip(1) {
            let t = (i as f64 * s.sample_period).min(s.duration);
            out.push((*actual, ml.segment.eval(t)?));
        }
    }
    Ok(out)
}

/// `(position RMSE, speed RMSE)` of a segment-wise replay.
pub fn prediction_rmse(model: &DriverModel, demo: &Demonstration) -> Result<(f64, f64)> {
    let pairs = predict_demonstration(model, demo)?;
    let n = pairs.len() as f64;
    let (sp, sv) = pairs.iter().fold((0.0, 0.0), |(sp, sv), (a, p)| {
        (
            sp + (a.position - p.position).powi(2),
            sv + (a.velocity - p.velocity).powi(2),
        )
    });
    Ok(((sp / n).sqrt(), (sv / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steady_leader(n: usize, x0: f64, v: f64) -> Vec<VehicleState> {
        (0..n)
            .map(|i| VehicleState::new(x0 + v * i as f64 * 0.1, v, 0.0))
            .collect()
    }

    #[test]
    fn eta_schedule() {
        let c = LearningConfig::default();
        assert_eq!(c.eta(1), 0.2);
        assert_eq!(c.eta(5), 0.2);
        assert_eq!(c.eta(6), 0.1);
        assert_eq!(c.eta(11), 0.05);
    }

    #[test]
    fn gradient_examples() {
        let f = FeatureVector::from_array([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(gradient(&f, &f), [0.0; 4]);
        assert_eq!(
            gradient(
                &FeatureVector::from_array([2.0, 0.0, 0.0, 0.0]),
                &FeatureVector::from_array([1.0, 0.0, 0.0, 0.0])
            ),
            [1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn update_examples() {
        let w = update_weights(&Weights::ONES, &[2.0, 0.0, 0.0, 0.0], 0.2, WEIGHT_FLOOR);
        assert_eq!(w.to_array(), [1.2, 1.0, 1.0, 1.0]);

        let w0 = Weights::from_array([WEIGHT_FLOOR, 1.0, 1.0, 1.0]);
        let w = update_weights(&w0, &[-1.0, 0.0, 0.0, 0.0], 0.2, WEIGHT_FLOOR);
        assert_eq!(w.a, WEIGHT_FLOOR);

        assert_eq!(update_weights(&w0, &[0.0; 4], 0.2, WEIGHT_FLOOR), w0);

        let g = [0.3, -1.2, 4.0, 0.7];
        let w = update_weights(&Weights::from_array([5.0; 4]), &g, 0.2, WEIGHT_FLOOR);
        let step: f64 = w.to_array().iter().map(|x| (x - 5.0).powi(2)).sum::<f64>().sqrt();
        assert!((step - 0.2).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_segment_stays_put() {
        let (v, tau, d_s) = (15.0, 1.4, 5.0);
        let leader = steady_leader(31, v * tau + d_s, v);
        let ctx = FeatureContext {
            v_d: v,
            leader: SampledProfile {
                period: 0.1,
                samples: &leader,
            },
            tau,
            d_s,
        };
        let ml = most_likely_segment(&VehicleState::new(0.0, v, 0.0), &ctx, &Weights::ONES, 3.0).unwrap();
        assert!(ml.cost < 1e-6, "{ml:?}");
    }

    #[test]
    fn acceleration_dominated_cost_barely_accelerates() {
        let e = WEIGHT_FLOOR;
        let leader = steady_leader(31, 40.0, 12.0);
        let ctx = FeatureContext {
            v_d: 14.0,
            leader: SampledProfile {
                period: 0.1,
                samples: &leader,
            },
            tau: 1.2,
            d_s: 5.0,
        };
        let w = Weights::from_array([1.0, e, e, e]);
        let init = VehicleState::new(0.0, 10.0, 0.0);
        let ml = most_likely_segment(&init, &ctx, &w, 3.0).unwrap();
        let ones = most_likely_segment(&init, &ctx, &Weights::ONES, 3.0).unwrap();
        assert!(ml.features.a < 0.1 && ml.features.a < 0.01 * ones.features.a);
    }

    #[test]
    fn optimizer_never_worse_than_warm_start() {
        let leader = steady_leader(31, 30.0, 14.0);
        let ctx = FeatureContext {
            v_d: 16.0,
            leader: SampledProfile {
                period: 0.1,
                samples: &leader,
            },
            tau: 1.0,
            d_s: 5.0,
        };
        for (w, init) in [
            ([1.0, 0.06, 0.9, 0.12], VehicleState::new(0.0, 10.0, 1.0)),
            ([0.2, 2.0, 0.1, 1.0], VehicleState::new(3.0, 18.0, -1.5)),
            ([3.0, 0.001, 0.5, 0.01], VehicleState::new(-4.0, 0.0, 0.0)),
        ] {
            let w = Weights::from_array(w);
            let ml = most_likely_segment(&init, &ctx, &w, 3.0).unwrap();
            let seg0 = QuinticSegment::anchored(&init, [0.0; 3], 3.0).unwrap();
            let c0 = w.cost(&segment_features(&seg0, &ctx).unwrap());
            assert!(ml.cost <= c0 + 1e-12);
            assert_eq!(ml.segment.eval(0.0).unwrap(), init);
        }
    }

    #[test]
    fn weights_below_floor_rejected() {
        let leader = steady_leader(31, 30.0, 14.0);
        let ctx = FeatureContext {
            v_d: 16.0,
            leader: SampledProfile {
                period: 0.1,
                samples: &leader,
            },
            tau: 1.0,
            d_s: 5.0,
        };
        let w = Weights::from_array([0.0, 1.0, 1.0, 1.0]);
        assert!(most_likely_segment(&VehicleState::new(0.0, 10.0, 0.0), &ctx, &w, 3.0).is_err());
    }
}
