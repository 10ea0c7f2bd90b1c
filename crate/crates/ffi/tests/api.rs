use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dynasep_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dynasep_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn process_lifecycle_and_rates() {
    let caps = [1u32, 2, 1];
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(
            dynasep_process_new(DynasepProcessKind::AsepR, 0.6, 0.4, caps.as_ptr(), 3, &mut p),
            DynasepStatus::Ok
        );
        let mut r = f64::NAN;
        assert_eq!(dynasep_process_reversibility_residual(p, &mut r), DynasepStatus::Ok);
        assert!(r < 1e-12);
        assert_eq!(dynasep_process_generator_residual(p, &mut r), DynasepStatus::Ok);
        assert!(r < 1e-12);
        let occ = [1u32, 0, 1];
        assert_eq!(
            dynasep_process_jump_rate(p, occ.as_ptr(), 3, 1, DynasepDirection::Right, &mut r),
            DynasepStatus::Ok
        );
        assert!(r > 0.0);
        let bad = [2u32, 0, 1];
        assert_eq!(
            dynasep_process_jump_rate(p, bad.as_ptr(), 3, 1, DynasepDirection::Right, &mut r),
            DynasepStatus::OutOfRange
        );
        assert!(!last_error().is_empty());
        dynasep_process_free(p);
        dynasep_process_free(ptr::null_mut());
    }
}

#[test]
fn invalid_inputs_report_status_and_message() {
    let caps = [1u32];
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(
            dynasep_process_new(DynasepProcessKind::Asep, -1.0, 0.0, caps.as_ptr(), 1, &mut p),
            DynasepStatus::InvalidArgument
        );
        assert!(last_error().contains("q"));
        assert!(p.is_null());
        assert_eq!(
            dynasep_process_new(DynasepProcessKind::Asep, 0.5, 0.0, ptr::null(), 1, &mut p),
            DynasepStatus::NullPointer
        );
        assert_eq!(
            dynasep_process_new(DynasepProcessKind::Asep, 0.5, 0.0, caps.as_ptr(), 1, &mut p),
            DynasepStatus::Ok
        );
        assert!(last_error().is_empty());
        dynasep_process_free(p);
        let (mut a, mut b) = (0, 0);
        assert_eq!(dynasep_run_criterion(11, &mut a, &mut b), DynasepStatus::OutOfRange);
    }
}

#[test]
fn duality_eval_and_residual() {
    let caps = [1u32, 2];
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(
            dynasep_duality_new(DynasepFamily::RV, 0.7, 0.3, -0.4, 1.3, caps.as_ptr(), 2, &mut d),
            DynasepStatus::Ok
        );
        let mut r = f64::NAN;
        assert_eq!(dynasep_duality_residual(d, &mut r), DynasepStatus::Ok);
        assert!(r < 1e-9, "{r}");
        let zero = [0u32, 0];
        assert_eq!(dynasep_duality_eval(d, zero.as_ptr(), zero.as_ptr(), 2, &mut r), DynasepStatus::Ok);
        assert!(r.is_finite());
        let over = [0u32, 3];
        assert_eq!(dynasep_duality_eval(d, over.as_ptr(), zero.as_ptr(), 2, &mut r), DynasepStatus::OutOfRange);
        dynasep_duality_free(d);
    }
}

#[test]
fn simulation_is_reproducible() {
    let caps = [2u32, 2, 2, 2];
    let init = [1u32, 1, 1, 1];
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(
            dynasep_process_new(DynasepProcessKind::AsepR, 0.8, 1.0, caps.as_ptr(), 4, &mut p),
            DynasepStatus::Ok
        );
        let run = || {
            let mut t = ptr::null_mut();
            assert_eq!(dynasep_simulate(p, init.as_ptr(), 4, 10.0, 7, &mut t), DynasepStatus::Ok);
            let n = dynasep_trajectory_len(t);
            let mut rows = Vec::new();
            for i in 0..n {
                let mut time = 0.0;
                let mut occ = [0u32; 4];
                assert_eq!(dynasep_trajectory_state(t, i, &mut time, occ.as_mut_ptr(), 4), DynasepStatus::Ok);
                assert_eq!(occ.iter().sum::<u32>(), 4);
                rows.push((time, occ));
            }
            let mut small = [0u32; 2];
            let mut time = 0.0;
            assert_eq!(dynasep_trajectory_state(t, 0, &mut time, small.as_mut_ptr(), 2), DynasepStatus::BufferTooSmall);
            dynasep_trajectory_free(t);
            rows
        };
        assert_eq!(run(), run());
        dynasep_process_free(p);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/dynasep.h")).unwrap();
    for f in ["dynasep_process_new", "dynasep_duality_eval", "dynasep_simulate", "dynasep_last_error_message"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    // target/<profile>/deps/<test exe> -> target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libdynasep_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link test: static library or C compiler unavailable");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
