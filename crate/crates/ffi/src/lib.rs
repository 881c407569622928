//! C ABI over `pacc`.
//!
//! Objects cross the boundary as opaque heap handles created by a
//! `pacc_*_new`/`_load` call and released by the matching `_free`. Every
//! fallible function returns a [`PaccStatus`]; on failure a message is
//! available from [`pacc_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pacc::control::{Controller, ControllerConfig, PreviewWindow};
use pacc::scenario::{run, ScenarioConfig, TrafficReport};
use pacc::traffic::IdmParams;
use pacc::{DriverModel, PaccError, Weights};

/// Result codes. Nonzero values match the `pacc` CLI exit codes where one
/// exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Degenerate = 3,
    Collision = 4,
    Io = 5,
    Panic = 6,
}

/// A driver model (cost weights, headway, clearance, segment length).
pub struct PaccModel {
    inner: DriverModel,
}

/// A receding-horizon controller bound to one driver model.
pub struct PaccController {
    inner: Controller,
}

/// The outcome of a scenario run.
pub struct PaccReport {
    inner: TrafficReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PaccIdmParams {
    pub a_max: f64,
    pub b_max: f64,
    pub delta: f64,
    pub v_s: f64,
    pub s0: f64,
    pub t_headway: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PaccControllerConfig {
    pub prediction_horizon: f64,
    pub control_horizon: f64,
    pub sample_time: f64,
    pub dx_min: f64,
    pub a_min: f64,
    pub a_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PaccStepResult {
    pub a_cmd: f64,
    pub objective: f64,
    /// No plan met the gap constraint; `a_cmd` is full braking.
    pub safety_fallback: bool,
}

/// Run metrics. `*_valid` is false when the metric is undefined (e.g. a run
/// aborted before two steps).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PaccMetrics {
    pub dx_m: f64,
    pub dx_m_valid: bool,
    pub t_m: f64,
    pub t_m_valid: bool,
    pub f_c: f64,
    pub f_c_valid: bool,
    pub duration_s: f64,
    pub safety_fallback_count: usize,
    pub collided: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &PaccError) -> PaccStatus {
    match e {
        PaccError::Degenerate(_) => PaccStatus::Degenerate,
        PaccError::Collision { .. } => PaccStatus::Collision,
        PaccError::Io { .. } => PaccStatus::Io,
        _ => PaccStatus::InvalidInput,
    }
}

enum Fail {
    Null(&'static str),
    Core(PaccError),
}

impl From<PaccError> for Fail {
    fn from(e: PaccError) -> Self {
        Fail::Core(e)
    }
}

/// Run `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PaccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PaccStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PaccStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            PaccStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(PaccError::InvalidInput(format!("{what} is not UTF-8"))))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pacc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from a `pacc_*_to_json` call, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pacc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build a model with the default clearance (5 m) and segment length (3 s).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn pacc_model_new(
    w_a: f64,
    w_ds: f64,
    w_rs: f64,
    w_rd: f64,
    tau: f64,
    out: *mut *mut PaccModel,
) -> PaccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = DriverModel::new(Weights::from_array([w_a, w_ds, w_rs, w_rd]), tau);
        inner.validate()?;
        *out = Box::into_raw(Box::new(PaccModel { inner }));
        Ok(())
    })
}

/// Parse a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_model_from_json(json: *const c_char, out: *mut *mut PaccModel) -> PaccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = DriverModel::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(PaccModel { inner }));
        Ok(())
    })
}

/// Load a model JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_model_load(path: *const c_char, out: *mut *mut PaccModel) -> PaccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = DriverModel::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(PaccModel { inner }));
        Ok(())
    })
}

/// Serialize a model; release the result with [`pacc_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_model_to_json(model: *const PaccModel, out: *mut *mut c_char) -> PaccStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let out = out_arg(out, "out")?;
        *out = into_c_string(m.inner.to_json()?);
        Ok(())
    })
}

/// Copy the weights `(a, ds, rs, rd)` and `tau` out of a model.
///
/// # Safety
/// `model` must be a live handle; `weights` must point to 4 writable doubles;
/// `tau` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_model_params(
    model: *const PaccModel,
    weights: *mut f64,
    tau: *mut f64,
) -> PaccStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        if weights.is_null() {
            return Err(Fail::Null("weights"));
        }
        let tau = out_arg(tau, "tau")?;
        std::slice::from_raw_parts_mut(weights, 4).copy_from_slice(&m.inner.weights.to_array());
        *tau = m.inner.tau;
        Ok(())
    })
}

/// # Safety
/// `model` must be a handle from this library (or NULL) and not used again.
#[no_mangle]
pub unsafe extern "C" fn pacc_model_free(model: *mut PaccModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Default IDM parameters for cruise speed `v_s`.
#[no_mangle]
pub extern "C" fn pacc_idm_default(v_s: f64) -> PaccIdmParams {
    let p = IdmParams::with_cruise_speed(v_s);
    PaccIdmParams {
        a_max: p.a_max,
        b_max: p.b_max,
        delta: p.delta,
        v_s: p.v_s,
        s0: p.s0,
        t_headway: p.time_headway,
    }
}

/// IDM acceleration at speed `v`, closing speed `dv` and gap `s`.
///
/// # Safety
/// `params` must point to valid parameters; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_idm_accel(
    v: f64,
    dv: f64,
    s: f64,
    params: *const PaccIdmParams,
    out: *mut f64,
) -> PaccStatus {
    guard(|| {
        let p = ref_arg(params, "params")?;
        let out = out_arg(out, "out")?;
        let p = IdmParams {
            a_max: p.a_max,
            b_max: p.b_max,
            delta: p.delta,
            v_s: p.v_s,
            s0: p.s0,
            time_headway: p.t_headway,
        };
        p.validate()?;
        *out = pacc::idm_accel(v, dv, s, &p)?;
        Ok(())
    })
}

/// Default controller settings.
#[no_mangle]
pub extern "C" fn pacc_controller_config_default() -> PaccControllerConfig {
    let c = ControllerConfig::default();
    PaccControllerConfig {
        prediction_horizon: c.prediction_horizon,
        control_horizon: c.control_horizon,
        sample_time: c.sample_time,
        dx_min: c.dx_min,
        a_min: c.a_min,
        a_max: c.a_max,
    }
}

/// Create a controller for `model`. `config` may be NULL for defaults.
///
/// # Safety
/// `model` must be a live handle; `config` valid or NULL; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_controller_new(
    model: *const PaccModel,
    config: *const PaccControllerConfig,
    out: *mut *mut PaccController,
) -> PaccStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let out = out_arg(out, "out")?;
        let cfg = match config.as_ref() {
            None => ControllerConfig::default(),
            Some(c) => ControllerConfig {
                prediction_horizon: c.prediction_horizon,
                control_horizon: c.control_horizon,
                sample_time: c.sample_time,
                dx_min: c.dx_min,
                a_min: c.a_min,
                a_max: c.a_max,
            },
        };
        let inner = Controller::new(m.inner, cfg)?;
        *out = Box::into_raw(Box::new(PaccController { inner }));
        Ok(())
    })
}

/// One controller tick. `preview` holds the PV speed at the current tick and
/// each following tick of the prediction horizon.
///
/// # Safety
/// `controller` must be live; `preview` must point to `preview_len` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_controller_step(
    controller: *mut PaccController,
    gap: f64,
    speed: f64,
    a_prev: f64,
    preview: *const f64,
    preview_len: usize,
    out: *mut PaccStepResult,
) -> PaccStatus {
    guard(|| {
        let c = controller.as_mut().ok_or(Fail::Null("controller"))?;
        let out = out_arg(out, "out")?;
        if preview.is_null() {
            return Err(Fail::Null("preview"));
        }
        let window = PreviewWindow::new(std::slice::from_raw_parts(preview, preview_len).to_vec())?;
        let r = c.inner.step(gap, speed, a_prev, &window)?;
        *out = PaccStepResult {
            a_cmd: r.a_cmd,
            objective: r.objective,
            safety_fallback: r.safety_fallback,
        };
        Ok(())
    })
}

/// # Safety
/// `controller` must be a handle from this library (or NULL) and not used again.
#[no_mangle]
pub unsafe extern "C" fn pacc_controller_free(controller: *mut PaccController) {
    if !controller.is_null() {
        drop(Box::from_raw(controller));
    }
}

/// Run the scenario TOML at `config_path`. A collision still yields a report
/// (with `collided` set) and returns `PACC_STATUS_COLLISION`.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_scenario_run(config_path: *const c_char, out: *mut *mut PaccReport) -> PaccStatus {
    let mut collided = false;
    let status = guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = ScenarioConfig::load(str_arg(config_path, "config_path")?)?;
        let outcome = run(&cfg)?;
        collided = outcome.collided();
        *out = Box::into_raw(Box::new(PaccReport {
            inner: outcome.report,
        }));
        Ok(())
    });
    if status == PaccStatus::Ok && collided {
        set_error("run aborted by a collision".into());
        return PaccStatus::Collision;
    }
    status
}

/// # Safety
/// `report` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_report_metrics(report: *const PaccReport, out: *mut PaccMetrics) -> PaccStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.inner;
        let out = out_arg(out, "out")?;
        *out = PaccMetrics {
            dx_m: r.dx_m.unwrap_or(f64::NAN),
            dx_m_valid: r.dx_m.is_some(),
            t_m: r.t_m.unwrap_or(f64::NAN),
            t_m_valid: r.t_m.is_some(),
            f_c: r.f_c.unwrap_or(f64::NAN),
            f_c_valid: r.f_c.is_some(),
            duration_s: r.duration_s,
            safety_fallback_count: r.safety_fallback_count,
            collided: r.collision.is_some(),
        };
        Ok(())
    })
}

/// Report JSON as written by `pacc simulate`; release with [`pacc_string_free`].
///
/// # Safety
/// `report` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacc_report_to_json(report: *const PaccReport, out: *mut *mut c_char) -> PaccStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let out = out_arg(out, "out")?;
        *out = into_c_string(r.inner.to_json()?);
        Ok(())
    })
}

/// # Safety
/// `report` must be a handle from this library (or NULL) and not used again.
#[no_mangle]
pub unsafe extern "C" fn pacc_report_free(report: *mut PaccReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
