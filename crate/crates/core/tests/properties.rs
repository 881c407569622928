//! Property tests over randomized inputs.

use pacc::control::{plan_margins, solve_step, ControllerConfig, PreviewWindow};
use pacc::demo::{split_demonstration, DemonstrationSet, SampledTrajectory};
use pacc::evaluation::{average_metrics, read_trace, total_fuel, write_trace, FuelParams, TraceRow};
use pacc::features::{segment_features, segment_features_with_step, FeatureContext};
use pacc::irl::{learn, update_weights, LearningConfig};
use pacc::optim::{minimize_constrained, BoxedProblem, ConstrainedOptions};
use pacc::synthetic::{equilibrium_follower, generate_demonstration, leader_from_cycle, split_parts};
use pacc::traffic::{idm_accel, step_fleet, FleetState, IdmParams, FLEET_SIZE};
use pacc::trajectory::{QuinticSegment, SampledProfile};
use pacc::types::{DriverModel, VehicleState, Weights, WEIGHT_FLOOR};
use pacc::DrivingCycle;
use proptest::prelude::*;

fn linear_leader(x0: f64, v: f64, a: f64, n: usize, period: f64) -> Vec<VehicleState> {
    (0..n)
        .map(|i| {
            let t = i as f64 * period;
            let vt = v + a * t;
            VehicleState::new(x0 + v * t + 0.5 * a * t * t, vt, a)
        })
        .collect()
}

fn trajectory(states: Vec<VehicleState>) -> SampledTrajectory {
    SampledTrajectory {
        start_time: 0.0,
        period: 0.1,
        states,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segments_tile_the_demonstration(n in 31usize..400, steps in 1usize..6) {
        let t_h = steps as f64 * 0.5;
        let lead = trajectory(linear_leader(50.0, 10.0, 0.0, n, 0.1));
        let fol = trajectory(linear_leader(20.0, 10.0, 0.0, n, 0.1));
        let segs = split_demonstration(&lead, &fol, t_h).unwrap();
        let step = steps * 5;
        prop_assert_eq!(segs.len(), (n - 1) / step);
        for (k, s) in segs.iter().enumerate() {
            prop_assert_eq!(s.follower_samples.len(), step + 1);
            prop_assert_eq!(s.follower_samples[0], fol.states[k * step]);
        }
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].follower_samples.last(), w[1].follower_samples.first());
        }
        let covered = segs.len() * step + 1;
        prop_assert!(n - covered < step);
    }

    #[test]
    fn features_nonnegative_and_shift_invariant(
        free in prop::array::uniform3(-0.5f64..0.5),
        v0 in 0.0f64..30.0,
        a0 in -2.0f64..2.0,
        lv in 0.0f64..30.0,
        la in -1.0f64..1.0,
        gap in 5.0f64..60.0,
        v_d in 0.0f64..35.0,
        shift in -1e4f64..1e4,
    ) {
        let seg = QuinticSegment::anchored(&VehicleState::new(0.0, v0, a0), free, 3.0).unwrap();
        let leader = linear_leader(gap, lv, la, 31, 0.1);
        let ctx = FeatureContext {
            v_d,
            leader: SampledProfile { period: 0.1, samples: &leader },
            tau: 1.4,
            d_s: 5.0,
        };
        let f = segment_features(&seg, &ctx).unwrap();
        prop_assert!(f.to_array().iter().all(|x| *x >= 0.0));

        let mut shifted_seg = seg;
        shifted_seg.coefficients[5] += shift;
        let shifted_leader: Vec<_> = leader
            .iter()
            .map(|s| VehicleState::new(s.position + shift, s.velocity, s.acceleration))
            .collect();
        let ctx2 = FeatureContext {
            leader: SampledProfile { period: 0.1, samples: &shifted_leader },
            ..ctx
        };
        let g = segment_features(&shifted_seg, &ctx2).unwrap();
        for (x, y) in f.to_array().iter().zip(g.to_array()) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn quadrature_converges_when_halving_step(
        disp in prop::array::uniform3(-2.0f64..2.0),
        v0 in 1.0f64..30.0,
        a0 in -2.0f64..2.0,
        lv in 1.0f64..30.0,
        la in -1.0f64..1.0,
    ) {
        // Each free term moves the follower by at most 2 m over the segment, the
        // scale of comfortable car-following corrections.
        let free = [disp[0] / 3f64.powi(5), disp[1] / 3f64.powi(4), disp[2] / 3f64.powi(3)];
        let seg = QuinticSegment::anchored(&VehicleState::new(0.0, v0, a0), free, 3.0).unwrap();
        // A quadratic leader is exactly represented by its own evaluation, so
        // sample it densely enough that linear interpolation is not the
        // dominating error.
        let leader = linear_leader(30.0, lv, la, 3001, 0.001);
        let ctx = FeatureContext {
            v_d: 33.0,
            leader: SampledProfile { period: 0.001, samples: &leader },
            tau: 1.4,
            d_s: 5.0,
        };
        let f1 = segment_features_with_step(&seg, &ctx, 0.01).unwrap().to_array();
        let f2 = segment_features_with_step(&seg, &ctx, 0.005).unwrap().to_array();
        for (a, b) in f1.iter().zip(f2) {
            let scale = a.abs().max(b.abs());
            if scale > 1e-6 {
                prop_assert!((a - b).abs() / scale < 1e-4, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn constrained_solver_is_feasible_and_no_worse(
        center in prop::array::uniform3(-4.0f64..4.0),
        scale in prop::array::uniform3(0.1f64..10.0),
        cut in -2.0f64..2.0,
    ) {
        let obj = move |x: &[f64]| (0..3).map(|i| scale[i] * (x[i] - center[i]).powi(2)).sum::<f64>();
        let problem = BoxedProblem::new(obj, vec![-3.0; 3], vec![2.0; 3])
            .with_constraints(move |x: &[f64]| vec![x[0] + x[1] - cut, 1.0 - x[2]]);
        let start = [1.5, 1.5, 0.0]; // feasible for every `cut`
        let m = minimize_constrained(&problem, &start, &ConstrainedOptions::default()).unwrap();
        prop_assert!(problem.violation(&m.point) <= 1e-6);
        prop_assert!(m.point.iter().all(|v| (-3.0..=2.0).contains(v)));
        prop_assert!(m.value <= obj(&start) + 1e-12);
    }

    #[test]
    fn weight_update_respects_floor(
        w in prop::array::uniform4(WEIGHT_FLOOR..5.0),
        g in prop::array::uniform4(-100.0f64..100.0),
        eta in 0.0f64..2.0,
    ) {
        let out = update_weights(&Weights::from_array(w), &g, eta, WEIGHT_FLOOR);
        prop_assert!(out.to_array().iter().all(|x| *x >= WEIGHT_FLOOR));
    }

    #[test]
    fn controller_plan_is_safe_or_flagged(
        gap in 5.0f64..80.0,
        v0 in 0.0f64..35.0,
        a_prev in -3.0f64..2.0,
        pv in prop::array::uniform3(0.0f64..35.0),
        w in prop::array::uniform4(0.01f64..2.0),
        tau in 0.8f64..2.2,
    ) {
        let model = DriverModel::new(Weights::from_array(w), tau);
        let cfg = ControllerConfig::default();
        let preview = PreviewWindow::new(pv.to_vec()).unwrap();
        let out = solve_step(gap, v0, a_prev, &preview, &model, &cfg).unwrap();
        prop_assert!(out.a_cmd >= cfg.a_min && out.a_cmd <= cfg.a_max);
        if !out.safety_fallback {
            let margins = plan_margins(&out.plan, gap, v0, &preview, &cfg);
            prop_assert!(margins.iter().all(|m| *m >= -1e-6), "{:?}", margins);
        }
    }

    #[test]
    fn idm_bounded_and_monotone(
        v in 0.0f64..40.0,
        dv in -20.0f64..20.0,
        s in 0.1f64..200.0,
        ddv in 0.0f64..5.0,
        ds in 0.0f64..20.0,
    ) {
        let p = IdmParams::with_cruise_speed(30.0);
        let a = idm_accel(v, dv, s, &p).unwrap();
        prop_assert!(a <= p.a_max && a >= -2.0 * p.b_max);
        prop_assert!(idm_accel(v, dv + ddv, s, &p).unwrap() <= a + 1e-12);
        prop_assert!(idm_accel(v, dv, s + ds, &p).unwrap() >= a - 1e-12);
    }

    #[test]
    fn fleet_step_never_interleaves_silently(
        gaps in prop::array::uniform4(0.2f64..30.0),
        speeds in prop::array::uniform5(0.0f64..30.0),
        sav_accel in -3.0f64..2.0,
        pv_next in 0.0f64..30.0,
    ) {
        let mut vehicles = [VehicleState::default(); FLEET_SIZE];
        for k in 0..FLEET_SIZE {
            vehicles[k].velocity = speeds[k];
            if k > 0 {
                vehicles[k].position = vehicles[k - 1].position - gaps[k - 1];
            }
        }
        let state = FleetState { vehicles, time: 0.0 };
        if let Ok(next) = step_fleet(&state, pv_next, sav_accel, 0.1, &IdmParams::with_cruise_speed(30.0)) {
            for k in 1..FLEET_SIZE {
                prop_assert!(next.vehicles[k - 1].position > next.vehicles[k].position);
            }
        }
    }

    #[test]
    fn trace_metric_invariants(
        rows in prop::collection::vec(
            (prop::array::uniform5(0.0f64..30.0), prop::array::uniform5(-3.0f64..2.0), prop::array::uniform4(2.0f64..50.0)),
            2..40,
        ),
        offset in -1e5f64..1e5,
    ) {
        let fuel = FuelParams::default();
        let build = |off: f64| -> Vec<TraceRow> {
            rows.iter()
                .enumerate()
                .map(|(i, (v, a, g))| {
                    let mut veh = [VehicleState::default(); FLEET_SIZE];
                    let mut x = 1000.0 + off;
                    for k in 0..FLEET_SIZE {
                        if k > 0 {
                            x -= g[k - 1];
                        }
                        veh[k] = VehicleState::new(x, v[k], a[k]);
                    }
                    TraceRow::new(i as f64 * 0.1, veh, &fuel)
                })
                .collect()
        };
        let trace = build(0.0);
        let t_span = trace.last().unwrap().t - trace[0].t;
        prop_assert!(total_fuel(&trace, &fuel) >= 5.0 * fuel.alpha0 * t_span * (1.0 - 1e-12));

        let base = average_metrics(&trace);
        if let Ok((dx, tm)) = base {
            let (dx2, tm2) = average_metrics(&build(offset)).unwrap();
            prop_assert!((dx - dx2).abs() <= 1e-9 * dx.max(1.0) * (1.0 + offset.abs() / 1e3));
            prop_assert!((tm - tm2).abs() <= 1e-9 * tm.max(1.0) * (1.0 + offset.abs() / 1e3));

            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("trace.csv");
            write_trace(&trace, &path).unwrap();
            let back = read_trace(&path).unwrap();
            prop_assert_eq!(average_metrics(&back).unwrap(), (dx, tm));
            prop_assert_eq!(total_fuel(&back, &fuel), total_fuel(&trace, &fuel));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// Learning from demos that are exactly optimal for some weights:
    /// weights stay above the floor and the residual ends no worse than it
    /// started.
    #[test]
    fn learning_on_exact_demos(
        w in prop::array::uniform4(0.05f64..1.5),
        tau in 1.0f64..2.0,
    ) {
        let cycle = pacc::synthetic::smooth_cycle(60.0, 0.1).unwrap();
        let leader = leader_from_cycle(&cycle, 0.0);
        let truth = DriverModel::new(Weights::from_array(w), tau);
        let init = equilibrium_follower(&leader.states[0], &truth);
        let demo = generate_demonstration(&leader, &truth, &init).unwrap();
        let parts = split_parts(&demo, 3.0, 2).unwrap();
        let set = DemonstrationSet::from_demonstrations(&parts, 3.0, 5.0).unwrap();
        let cfg = LearningConfig { max_epochs: 15, ..LearningConfig::default() };
        let res = learn(&set, &cfg).unwrap();
        prop_assert!(!res.degenerate);
        prop_assert_eq!(res.most_likely_segments.len(), set.segments.len());
        for wh in &res.weight_history {
            prop_assert!(wh.to_array().iter().all(|x| *x >= WEIGHT_FLOOR));
        }
        prop_assert!(res.final_residual() <= res.residual_history[0] + 1e-12);
    }
}

#[test]
fn resample_same_period_is_identity() {
    let c = DrivingCycle::new(1.0, vec![0.0, 3.0, 7.5, 7.0, 2.0]).unwrap();
    assert_eq!(c.resample(1.0).unwrap(), c);
    assert_eq!(c.resample(1.0).unwrap().resample(1.0).unwrap(), c);
}
