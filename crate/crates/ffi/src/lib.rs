//! C ABI for `riskspot`.
//!
//! Every function returns a [`RiskspotStatus`]; results go through out
//! pointers. On failure `riskspot_last_error()` describes the problem until
//! the next call on the same thread. Handles are opaque and owned by the
//! caller, who releases them with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use riskspot::analysis::{evaluate_dataset, Evaluation, Metric};
use riskspot::baselines::{time_headway, time_to_collision};
use riskspot::collision::{gaussian_2d_overlap, Cov2};
use riskspot::ingest::TrajectoryDataset;
use riskspot::survival::{integrated_risk, EscapeRate, RateProfile};
use riskspot::{run, Error, RunConfig, Vec2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskspotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Numerical = 5,
    /// The metric does not apply, e.g. TTC of a receding leader.
    Undefined = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RiskspotVec2 {
    pub x: f64,
    pub y: f64,
}

/// Symmetric 2x2 covariance, m².
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RiskspotCov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RiskspotEvent {
    pub ego: i64,
    pub frame: i64,
    pub t: f64,
    /// Relative to the dataset origin, m.
    pub position: RiskspotVec2,
    pub ego_velocity: f64,
    /// Larger is more critical.
    pub metric_value: f64,
}

pub struct RiskspotConfig(RunConfig);
pub struct RiskspotDataset(TrajectoryDataset);
pub struct RiskspotEvaluation(Evaluation);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

struct Failure(RiskspotStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parameter { .. } | Error::Config(_) | Error::InvalidPath(_) => RiskspotStatus::InvalidArgument,
            Error::Io(_) => RiskspotStatus::Io,
            Error::Degenerate(_) => RiskspotStatus::Numerical,
            _ => RiskspotStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: RiskspotStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Runs `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RiskspotStatus {
    let status = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RiskspotStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            RiskspotStatus::Panic
        }
    };
    if status == RiskspotStatus::Ok {
        set_error(String::new());
    }
    status
}

fn out<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller promises a valid, writable pointer or null.
    unsafe { ptr.as_mut() }.ok_or_else(|| fail(RiskspotStatus::NullPointer, format!("`{name}` is null")))
}

fn input<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller promises a valid pointer or null.
    unsafe { ptr.as_ref() }.ok_or_else(|| fail(RiskspotStatus::NullPointer, format!("`{name}` is null")))
}

fn string<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(fail(RiskspotStatus::NullPointer, format!("`{name}` is null")));
    }
    // SAFETY: non-null and NUL-terminated per the contract.
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(RiskspotStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after success.
/// Valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn riskspot_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn riskspot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// ∫ N(x; μa, Σa) N(x; μb, Σb) dx.
#[no_mangle]
pub extern "C" fn riskspot_gaussian_2d_overlap(
    mean_a: RiskspotVec2,
    cov_a: RiskspotCov2,
    mean_b: RiskspotVec2,
    cov_b: RiskspotCov2,
    result: *mut f64,
) -> RiskspotStatus {
    guard(|| {
        let result = out(result, "result")?;
        let cov = |c: RiskspotCov2| Cov2 { xx: c.xx, xy: c.xy, yy: c.yy };
        *result = gaussian_2d_overlap(Vec2::new(mean_a.x, mean_a.y), &cov(cov_a), Vec2::new(mean_b.x, mean_b.y), &cov(cov_b))?;
        Ok(())
    })
}

/// `delta_l` is the signed longitudinal offset of the leader (negative
/// when it is ahead), m. Returns `RISKSPOT_STATUS_UNDEFINED` when TH does
/// not apply.
#[no_mangle]
pub extern "C" fn riskspot_time_headway(
    delta_l: f64,
    v_follower: f64,
    size_correction: f64,
    result: *mut f64,
) -> RiskspotStatus {
    guard(|| {
        let result = out(result, "result")?;
        match time_headway(delta_l, v_follower, size_correction).value {
            Some(v) => {
                *result = v;
                Ok(())
            }
            None => Err(fail(RiskspotStatus::Undefined, "time headway undefined: follower stands still")),
        }
    })
}

/// `delta_v` is follower minus leader speed, m/s.
#[no_mangle]
pub extern "C" fn riskspot_time_to_collision(
    delta_l: f64,
    delta_v: f64,
    size_correction: f64,
    result: *mut f64,
) -> RiskspotStatus {
    guard(|| {
        let result = out(result, "result")?;
        match time_to_collision(delta_l, delta_v, size_correction).value {
            Some(v) => {
                *result = v;
                Ok(())
            }
            None => Err(fail(RiskspotStatus::Undefined, "time to collision undefined: gap is not closing")),
        }
    })
}

/// Integrated collision risk of a critical-rate profile sampled every
/// `ds` seconds, with escape time constant `tau0` and horizon `s_max`.
#[no_mangle]
pub extern "C" fn riskspot_integrated_risk(
    rates: *const f64,
    len: usize,
    ds: f64,
    tau0: f64,
    s_max: f64,
    result: *mut f64,
) -> RiskspotStatus {
    guard(|| {
        let result = out(result, "result")?;
        if rates.is_null() {
            return Err(fail(RiskspotStatus::NullPointer, "`rates` is null"));
        }
        // SAFETY: `rates` points to `len` readable doubles.
        let rates = unsafe { std::slice::from_raw_parts(rates, len) }.to_vec();
        let profile = RateProfile::from_critical(rates, ds)?;
        *result = integrated_risk(&profile, EscapeRate::from_time_constant(tau0)?, s_max)?;
        Ok(())
    })
}

/// Default configuration.
#[no_mangle]
pub extern "C" fn riskspot_config_default(config: *mut *mut RiskspotConfig) -> RiskspotStatus {
    guard(|| {
        *out(config, "config")? = Box::into_raw(Box::new(RiskspotConfig(RunConfig::default())));
        Ok(())
    })
}

/// Configuration from TOML text; missing keys keep their defaults.
#[no_mangle]
pub extern "C" fn riskspot_config_from_toml(toml: *const c_char, config: *mut *mut RiskspotConfig) -> RiskspotStatus {
    guard(|| {
        let slot = out(config, "config")?;
        let parsed = RunConfig::from_toml_str(string(toml, "toml")?)?;
        *slot = Box::into_raw(Box::new(RiskspotConfig(parsed)));
        Ok(())
    })
}

/// Selects the metric by name: RSD_front, RSD_all, TH or TTC.
#[no_mangle]
pub extern "C" fn riskspot_config_set_metric(config: *mut RiskspotConfig, metric: *const c_char) -> RiskspotStatus {
    guard(|| {
        let config = out(config, "config")?;
        config.0.metric = string(metric, "metric")?.parse::<Metric>()?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn riskspot_config_free(config: *mut RiskspotConfig) {
    if !config.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Reads and smooths a trajectory CSV.
#[no_mangle]
pub extern "C" fn riskspot_dataset_load(
    path: *const c_char,
    config: *const RiskspotConfig,
    dataset: *mut *mut RiskspotDataset,
) -> RiskspotStatus {
    guard(|| {
        let slot = out(dataset, "dataset")?;
        let config = input(config, "config")?;
        let loaded = run::load_dataset(Path::new(string(path, "path")?), &config.0)?;
        *slot = Box::into_raw(Box::new(RiskspotDataset(loaded)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn riskspot_dataset_vehicle_count(dataset: *const RiskspotDataset, count: *mut usize) -> RiskspotStatus {
    guard(|| {
        *out(count, "count")? = input(dataset, "dataset")?.0.tracks.len();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn riskspot_dataset_free(dataset: *mut RiskspotDataset) {
    if !dataset.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Evaluates the configured metric at every (ego, frame) sample, using
/// the configured number of worker threads.
#[no_mangle]
pub extern "C" fn riskspot_evaluate(
    dataset: *const RiskspotDataset,
    config: *const RiskspotConfig,
    evaluation: *mut *mut RiskspotEvaluation,
) -> RiskspotStatus {
    guard(|| {
        let slot = out(evaluation, "evaluation")?;
        let dataset = input(dataset, "dataset")?;
        let config = &input(config, "config")?.0;
        let analysis = config.analysis()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| fail(RiskspotStatus::Io, format!("cannot start worker threads: {e}")))?;
        let result = pool.install(|| evaluate_dataset(&dataset.0, config.metric, &analysis))?;
        *slot = Box::into_raw(Box::new(RiskspotEvaluation(result)));
        Ok(())
    })
}

/// Number of defined events.
#[no_mangle]
pub extern "C" fn riskspot_evaluation_len(evaluation: *const RiskspotEvaluation, len: *mut usize) -> RiskspotStatus {
    guard(|| {
        *out(len, "len")? = input(evaluation, "evaluation")?.0.events.len();
        Ok(())
    })
}

/// Copies event `index`; events are ordered by frame, then ego id.
#[no_mangle]
pub extern "C" fn riskspot_evaluation_event(
    evaluation: *const RiskspotEvaluation,
    index: usize,
    event: *mut RiskspotEvent,
) -> RiskspotStatus {
    guard(|| {
        let slot = out(event, "event")?;
        let events = &input(evaluation, "evaluation")?.0.events;
        let e = events.get(index).ok_or_else(|| {
            fail(RiskspotStatus::OutOfRange, format!("event {index} out of range ({} events)", events.len()))
        })?;
        *slot = RiskspotEvent {
            ego: e.ego.0,
            frame: e.frame,
            t: e.t,
            position: RiskspotVec2 { x: e.position.x, y: e.position.y },
            ego_velocity: e.ego_velocity,
            metric_value: e.metric_value,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn riskspot_evaluation_free(evaluation: *mut RiskspotEvaluation) {
    if !evaluation.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(evaluation) });
    }
}
