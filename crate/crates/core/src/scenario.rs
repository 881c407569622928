//! Full platoon runs: the PV replays a driving cycle, the SAV is driven by
//! the personalized controller, three IDM vehicles follow.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{Controller, ControllerConfig, PreviewWindow};
use crate::cycle::DrivingCycle;
use crate::error::{PaccError, Result};
use crate::evaluation::{average_metrics, total_fuel, FuelParams, Trace, TraceRow};
use crate::numfmt::{ser_sig, ser_sig_opt};
use crate::traffic::{step_fleet, FleetState, IdmParams, FLEET_SIZE, PAIRS, PV, SAV};
use crate::types::{DriverModel, VehicleState};

pub const DEFAULT_SIM_DT: f64 = 0.1;

fn default_sim_dt() -> f64 {
    DEFAULT_SIM_DT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub path: PathBuf,
}

/// IDM section; `v_s` defaults to the cycle's maximum speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmSection {
    pub a_max: f64,
    pub b_max: f64,
    pub delta: f64,
    pub s0: f64,
    pub t_headway: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_s: Option<f64>,
}

impl Default for IdmSection {
    fn default() -> Self {
        let p = IdmParams::with_cruise_speed(1.0);
        Self {
            a_max: p.a_max,
            b_max: p.b_max,
            delta: p.delta,
            s0: p.s0,
            t_headway: p.time_headway,
            v_s: None,
        }
    }
}

impl IdmSection {
    fn resolve(&self, cycle: &DrivingCycle) -> IdmParams {
        IdmParams {
            a_max: self.a_max,
            b_max: self.b_max,
            delta: self.delta,
            v_s: self.v_s.unwrap_or_else(|| cycle.max_speed()),
            s0: self.s0,
            time_headway: self.t_headway,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitRule {
    /// SAV at its desired gap, HVs at their IDM equilibrium gap.
    #[default]
    Equilibrium,
    /// Gaps taken verbatim from `gaps`, front to back.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub rule: InitRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<f64>>,
}

/// On-disk scenario, as written in TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_sim_dt")]
    pub sim_dt: f64,
    pub cycle: PathSection,
    pub driver_model: PathSection,
    #[serde(default)]
    pub idm: IdmSection,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub fuel: Option<FuelParams>,
    #[serde(default)]
    pub init: InitSection,
}

impl ScenarioFile {
    /// A scenario with every default spelled out.
    pub fn with_defaults(cycle: impl Into<PathBuf>, driver_model: impl Into<PathBuf>) -> Self {
        Self {
            sim_dt: DEFAULT_SIM_DT,
            cycle: PathSection { path: cycle.into() },
            driver_model: PathSection {
                path: driver_model.into(),
            },
            idm: IdmSection::default(),
            controller: ControllerConfig::default(),
            fuel: Some(FuelParams::default()),
            init: InitSection::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| PaccError::Config(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| PaccError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    Equilibrium,
    Explicit([f64; PAIRS]),
}

/// A validated scenario with its referenced files loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub sim_dt: f64,
    pub cycle: DrivingCycle,
    pub model: DriverModel,
    pub idm: IdmParams,
    pub controller: ControllerConfig,
    pub fuel: FuelParams,
    pub init: Initialization,
    /// The file as given, with `idm.v_s` resolved; echoed in reports.
    pub source: ScenarioFile,
}

impl ScenarioConfig {
    pub fn new(
        cycle: DrivingCycle,
        model: DriverModel,
        source: ScenarioFile,
    ) -> Result<Self> {
        let idm = source.idm.resolve(&cycle);
        let init = match source.init.rule {
            InitRule::Equilibrium => Initialization::Equilibrium,
            InitRule::Explicit => {
                let gaps = source.init.gaps.as_deref().ok_or_else(|| {
                    PaccError::Config("init.rule = \"explicit\" needs init.gaps".into())
                })?;
                let gaps: [f64; PAIRS] = gaps.try_into().map_err(|_| {
                    PaccError::Config(format!("init.gaps needs {PAIRS} entries, got {}", gaps.len()))
                })?;
                if gaps.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
                    return Err(PaccError::Config("init.gaps must all be > 0".into()));
                }
                Initialization::Explicit(gaps)
            }
        };
        let mut source = source;
        source.idm.v_s = Some(idm.v_s);
        let fuel = source.fuel.unwrap_or_default();
        let cfg = Self {
            sim_dt: source.sim_dt,
            cycle,
            model,
            idm,
            controller: source.controller,
            fuel,
            init,
            source,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.idm.validate()?;
        self.controller.validate()?;
        self.fuel.validate()?;
        if !(self.sim_dt > 0.0) {
            return Err(PaccError::Config("sim_dt must be > 0".into()));
        }
        let r = self.controller.sample_time / self.sim_dt;
        if (r - r.round()).abs() > 1e-9 * r || r.round() < 1.0 {
            return Err(PaccError::Config(format!(
                "sim_dt {} does not divide the controller sample time {}",
                self.sim_dt, self.controller.sample_time
            )));
        }
        Ok(())
    }

    /// Load a scenario TOML; referenced paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PaccError::io(path, e))?;
        let file = ScenarioFile::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cycle = DrivingCycle::from_csv(base.join(&file.cycle.path))?;
        let model = DriverModel::load(base.join(&file.driver_model.path))?;
        Self::new(cycle, model, file)
    }

    fn ticks_per_control(&self) -> usize {
        (self.controller.sample_time / self.sim_dt).round() as usize
    }
}

/// Initial platoon: every vehicle at the cycle's first speed.
pub fn initialize(cfg: &ScenarioConfig) -> FleetState {
    let v0 = cfg.cycle.speeds()[0];
    let gaps = match &cfg.init {
        Initialization::Explicit(g) => *g,
        Initialization::Equilibrium => {
            let mut g = [cfg.idm.equilibrium_gap(v0); PAIRS];
            g[0] = cfg.model.desired_gap(v0);
            g
        }
    };
    let mut vehicles = [VehicleState::new(0.0, v0, 0.0); FLEET_SIZE];
    for k in 1..FLEET_SIZE {
        vehicles[k].position = vehicles[k - 1].position - gaps[k - 1];
    }
    FleetState { vehicles, time: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionInfo {
    #[serde(serialize_with = "ser_sig")]
    pub t: f64,
    /// 1-based pair index, as in the trace columns.
    pub pair: usize,
    #[serde(serialize_with = "ser_sig")]
    pub gap: f64,
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionInfo>,
    /// Average gap over the four pairs (m).
    #[serde(serialize_with = "ser_sig_opt")]
    pub dx_m: Option<f64>,
    /// Average time headway over the four pairs (s).
    #[serde(serialize_with = "ser_sig_opt")]
    pub t_m: Option<f64>,
    /// Total fuel of all vehicles (L).
    #[serde(serialize_with = "ser_sig_opt")]
    pub f_c: Option<f64>,
    #[serde(serialize_with = "ser_sig")]
    pub duration_s: f64,
    /// Controller ticks that found no plan satisfying the gap constraint.
    pub safety_fallback_count: usize,
    /// Recorded steps with the PV–SAV gap below `dx_min`.
    pub steps_below_dx_min: usize,
    #[serde(serialize_with = "ser_sig")]
    pub min_sav_gap_m: f64,
    pub initialization: InitRule,
    pub config: ScenarioFile,
}

impl TrafficReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// The controller's gap guarantee held, or every lapse is flagged.
    pub fn safety_ok(&self) -> bool {
        self.status == RunStatus::Completed
            && (self.steps_below_dx_min == 0 || self.safety_fallback_count > 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Complete trace, or the partial trace up to a collision.
    pub trace: Trace,
    pub report: TrafficReport,
}

impl RunOutcome {
    pub fn collided(&self) -> bool {
        self.report.status == RunStatus::Collision
    }
}

/// Preview of PV speeds at ticks `t, t + T_s, …`; past the cycle end the
/// last speed is held.
fn preview_at(cfg: &ScenarioConfig, t: f64) -> Result<PreviewWindow> {
    let c = &cfg.controller;
    PreviewWindow::new(
        (0..c.prediction_steps())
            .map(|j| cfg.cycle.speed_at(t + j as f64 * c.sample_time))
            .collect(),
    )
}

/// Run a scenario to completion or to the first collision.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut state = initialize(cfg);
    state.validate()?;
    let mut controller = Controller::new(cfg.model, cfg.controller)?;
    let steps = (cfg.cycle.duration() / cfg.sim_dt).round() as usize;
    let every = cfg.ticks_per_control();

    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(TraceRow::new(0.0, state.vehicles, &cfg.fuel));
    let mut a_cmd = 0.0;
    let mut fallbacks = 0usize;
    let mut collision = None;
    for i in 0..steps {
        let t = i as f64 * cfg.sim_dt;
        if i % every == 0 {
            let sav = &state.vehicles[SAV];
            let out = controller.step(state.gap(PV), sav.velocity, a_cmd, &preview_at(cfg, t)?)?;
            if out.safety_fallback {
                fallbacks += 1;
                log::info!("t = {t:.1} s: no feasible plan, braking at a_min");
            }
            a_cmd = out.a_cmd;
        }
        let t_next = (i + 1) as f64 * cfg.sim_dt;
        match step_fleet(&state, cfg.cycle.speed_at(t_next), a_cmd, cfg.sim_dt, &cfg.idm) {
            Ok(next) => {
                state = FleetState {
                    time: t_next,
                    ..next
                };
                trace.push(TraceRow::new(t_next, state.vehicles, &cfg.fuel));
            }
            Err(PaccError::Collision { pair, gap }) => {
                log::warn!("collision at t = {t_next:.1} s in pair {pair:?}");
                collision = Some(CollisionInfo {
                    t: t_next,
                    pair: pair.unwrap_or(0),
                    gap,
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let metrics = average_metrics(&trace).ok();
    let dx_min = cfg.controller.dx_min;
    let report = TrafficReport {
        status: if collision.is_some() {
            RunStatus::Collision
        } else {
            RunStatus::Completed
        },
        collision,
        dx_m: metrics.map(|m| m.0),
        t_m: metrics.map(|m| m.1),
        f_c: (trace.len() >= 2).then(|| total_fuel(&trace, &cfg.fuel)),
        duration_s: trace.last().map_or(0.0, |r| r.t),
        safety_fallback_count: fallbacks,
        steps_below_dx_min: trace.iter().filter(|r| r.gaps[0] < dx_min).count(),
        min_sav_gap_m: trace.iter().map(|r| r.gaps[0]).fold(f64::INFINITY, f64::min),
        initialization: cfg.source.init.rule,
        config: cfg.source.clone(),
    };
    Ok(RunOutcome { trace, report })
}

/// Percent differences with scenario A as the baseline: positive gap and
/// headway values mean B keeps shorter spacing; a negative fuel value means
/// B burns more.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonReport {
    #[serde(serialize_with = "ser_sig_opt")]
    pub gap_pct: Option<f64>,
    #[serde(serialize_with = "ser_sig_opt")]
    pub headway_pct: Option<f64>,
    #[serde(serialize_with = "ser_sig_opt")]
    pub fuel_pct: Option<f64>,
}

impl ComparisonReport {
    pub fn is_complete(&self) -> bool {
        self.gap_pct.is_some() && self.headway_pct.is_some() && self.fuel_pct.is_some()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// `(a − b) / a · 100`.
pub fn percent_difference(a: f64, b: f64) -> Option<f64> {
    (a != 0.0).then(|| (a - b) / a * 100.0)
}

pub fn compare_reports(a: &TrafficReport, b: &TrafficReport) -> ComparisonReport {
    let ok = a.status == RunStatus::Completed && b.status == RunStatus::Completed;
    let pct = |x: Option<f64>, y: Option<f64>| match (ok, x, y) {
        (true, Some(x), Some(y)) => percent_difference(x, y),
        _ => None,
    };
    ComparisonReport {
        gap_pct: pct(a.dx_m, b.dx_m),
        headway_pct: pct(a.t_m, b.t_m),
        fuel_pct: pct(a.f_c, b.f_c),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: RunOutcome,
    pub b: RunOutcome,
    pub report: ComparisonReport,
}

/// Run two scenarios that differ only in the driver (and controller) and
/// compare them. The runs execute in parallel.
pub fn compare(cfg_a: &ScenarioConfig, cfg_b: &ScenarioConfig) -> Result<Comparison> {
    if cfg_a.cycle != cfg_b.cycle {
        return Err(PaccError::invalid("compared scenarios use different cycles"));
    }
    if cfg_a.idm != cfg_b.idm {
        return Err(PaccError::invalid("compared scenarios use different IDM parameters"));
    }
    if cfg_a.fuel != cfg_b.fuel {
        return Err(PaccError::invalid("compared scenarios use different fuel parameters"));
    }
    let (a, b) = rayon::join(|| run(cfg_a), || run(cfg_b));
    let (a, b) = (a?, b?);
    let report = compare_reports(&a.report, &b.report);
    Ok(Comparison { a, b, report })
}

/// Text of a scenario file with every default written out.
pub fn default_config_text(cycle: &str, driver_model: &str) -> Result<String> {
    let body = ScenarioFile::with_defaults(cycle, driver_model).to_toml()?;
    Ok(format!(
        "# Platoon scenario. Paths are relative to this file.\n\
         # idm.v_s (cruise speed) defaults to the cycle's maximum speed when omitted.\n\
         # init.rule = \"explicit\" takes init.gaps = [pv-sav, sav-hv1, hv1-hv2, hv2-hv3].\n\n\
         {body}"
    ))
}
