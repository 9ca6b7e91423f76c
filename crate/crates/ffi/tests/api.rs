use std::ffi::{c_char, CStr, CString};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use riskspot::analysis::{evaluate_dataset, Metric};
use riskspot::{run, RunConfig};
use riskspot_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(riskspot_last_error()) }.to_string_lossy().into_owned()
}

/// Follower 20 m behind a leader, both at 10 m/s, 10 s at 10 Hz.
fn write_pair(dir: &Path) -> PathBuf {
    let mut s = String::from("Vehicle_ID,Frame_ID,Local_X,Local_Y\n");
    for id in [1, 2] {
        for k in 0..100 {
            let x = 10.0 * k as f64 * 0.1 + if id == 2 { 20.0 } else { 0.0 };
            writeln!(s, "{id},{k},{x},0").unwrap();
        }
    }
    let path = dir.join("pair.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn scalar_functions() {
    let mut r = 0.0;
    assert_eq!(riskspot_time_headway(-24.0, 10.0, 4.0, &mut r), RiskspotStatus::Ok);
    assert_eq!(r, 2.0);
    assert_eq!(last_error(), "");
    assert_eq!(riskspot_time_to_collision(-24.0, 5.0, 4.0, &mut r), RiskspotStatus::Ok);
    assert_eq!(r, 4.0);
    assert_eq!(riskspot_time_headway(-24.0, 0.0, 4.0, &mut r), RiskspotStatus::Undefined);
    assert!(!last_error().is_empty());

    let m = RiskspotVec2 { x: 0.0, y: 0.0 };
    let c = RiskspotCov2 { xx: 1.0, xy: 0.0, yy: 1.0 };
    assert_eq!(riskspot_gaussian_2d_overlap(m, c, m, c, &mut r), RiskspotStatus::Ok);
    assert!((r - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
    let singular = RiskspotCov2 { xx: 1.0, xy: 1.0, yy: 1.0 };
    assert_eq!(riskspot_gaussian_2d_overlap(m, singular, m, singular, &mut r), RiskspotStatus::Numerical);

    // constant rate 1, escape time constant 1: R = (1 - e^-2s) / 2
    let rates = vec![1.0; 41];
    assert_eq!(riskspot_integrated_risk(rates.as_ptr(), rates.len(), 0.1, 1.0, 4.0, &mut r), RiskspotStatus::Ok);
    assert!((r - 0.5 * (1.0 - (-8.0f64).exp())).abs() < 1e-12);
    assert_eq!(riskspot_integrated_risk(rates.as_ptr(), rates.len(), -0.1, 1.0, 4.0, &mut r), RiskspotStatus::InvalidArgument);
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(riskspot_time_headway(-24.0, 10.0, 4.0, ptr::null_mut()), RiskspotStatus::NullPointer);
    assert!(last_error().contains("result"));
    let mut r = 0.0;
    assert_eq!(riskspot_integrated_risk(ptr::null(), 3, 0.1, 1.0, 1.0, &mut r), RiskspotStatus::NullPointer);
    let mut config = ptr::null_mut();
    assert_eq!(riskspot_config_from_toml(ptr::null(), &mut config), RiskspotStatus::NullPointer);
    let mut n = 0;
    assert_eq!(riskspot_dataset_vehicle_count(ptr::null(), &mut n), RiskspotStatus::NullPointer);
    riskspot_config_free(ptr::null_mut());
    riskspot_dataset_free(ptr::null_mut());
    riskspot_evaluation_free(ptr::null_mut());
}

#[test]
fn bad_config_and_input() {
    let mut config = ptr::null_mut();
    let text = cstr("no_such_key = 1\n");
    assert_eq!(riskspot_config_from_toml(text.as_ptr(), &mut config), RiskspotStatus::InvalidArgument);
    assert!(config.is_null());
    assert!(last_error().contains("no_such_key"));

    assert_eq!(riskspot_config_default(&mut config), RiskspotStatus::Ok);
    let dir = tempfile::tempdir().unwrap();
    let missing = cstr(dir.path().join("missing.csv").to_str().unwrap());
    let mut dataset = ptr::null_mut();
    assert_eq!(riskspot_dataset_load(missing.as_ptr(), config, &mut dataset), RiskspotStatus::Io);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "Vehicle_ID,Frame_ID,Local_X\n1,1,0\n").unwrap();
    let bad = cstr(bad.to_str().unwrap());
    assert_eq!(riskspot_dataset_load(bad.as_ptr(), config, &mut dataset), RiskspotStatus::Data);
    assert!(last_error().contains("Local_Y"));
    riskspot_config_free(config);
}

#[test]
fn evaluation_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_pair(dir.path());
    let mut config = ptr::null_mut();
    let text = cstr("feet_to_meters = false\nthreads = 2\n");
    assert_eq!(riskspot_config_from_toml(text.as_ptr(), &mut config), RiskspotStatus::Ok);
    let metric = cstr("RSD_front");
    assert_eq!(riskspot_config_set_metric(config, metric.as_ptr()), RiskspotStatus::Ok);

    let path = cstr(input.to_str().unwrap());
    let mut dataset = ptr::null_mut();
    assert_eq!(riskspot_dataset_load(path.as_ptr(), config, &mut dataset), RiskspotStatus::Ok);
    let mut vehicles = 0;
    assert_eq!(riskspot_dataset_vehicle_count(dataset, &mut vehicles), RiskspotStatus::Ok);
    assert_eq!(vehicles, 2);

    let mut evaluation = ptr::null_mut();
    assert_eq!(riskspot_evaluate(dataset, config, &mut evaluation), RiskspotStatus::Ok);
    let mut len = 0;
    assert_eq!(riskspot_evaluation_len(evaluation, &mut len), RiskspotStatus::Ok);

    let rc = RunConfig { feet_to_meters: false, metric: Metric::RsdFront, ..RunConfig::default() };
    let ds = run::load_dataset(&input, &rc).unwrap();
    let expected = evaluate_dataset(&ds, Metric::RsdFront, &rc.analysis().unwrap()).unwrap();
    assert_eq!(len, expected.events.len());
    assert!(len > 0);
    for (i, want) in expected.events.iter().enumerate() {
        let mut e = std::mem::MaybeUninit::<RiskspotEvent>::uninit();
        assert_eq!(riskspot_evaluation_event(evaluation, i, e.as_mut_ptr()), RiskspotStatus::Ok);
        let e = unsafe { e.assume_init() };
        assert_eq!((e.ego, e.frame), (want.ego.0, want.frame));
        assert_eq!(e.metric_value, want.metric_value);
        assert_eq!((e.position.x, e.position.y), (want.position.x, want.position.y));
    }
    let mut e = std::mem::MaybeUninit::<RiskspotEvent>::uninit();
    assert_eq!(riskspot_evaluation_event(evaluation, len, e.as_mut_ptr()), RiskspotStatus::OutOfRange);

    riskspot_evaluation_free(evaluation);
    riskspot_dataset_free(dataset);
    riskspot_config_free(config);
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(riskspot_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn last_error_is_thread_local() {
    let mut r = 0.0;
    assert_eq!(riskspot_time_headway(-1.0, 0.0, 4.0, &mut r), RiskspotStatus::Undefined);
    let other = std::thread::spawn(|| {
        let p: *const c_char = riskspot_last_error();
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    })
    .join()
    .unwrap();
    assert_eq!(other, "");
    assert!(!last_error().is_empty());
}

/// Compiles the C smoke program against the generated header and the
/// static library. Skipped when no C compiler is on PATH.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libriskspot_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c11")
        .arg("-D_GNU_SOURCE")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let input = write_pair(dir.path());
    let out = Command::new(&exe).arg(&input).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("2 "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
