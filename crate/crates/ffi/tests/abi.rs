use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use arcm_ffi::*;

fn last_error() -> String {
    let p = arcm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn logistic_run_through_handles() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(arcm_dataset_synthetic(100, 5, true, 0.05, 3, &mut ds), ArcmStatus::Ok);
        assert_eq!((arcm_dataset_len(ds), arcm_dataset_dim(ds)), (100, 5));
        let mut obj = ptr::null_mut();
        assert_eq!(arcm_objective_logistic(ds, 0.1, &mut obj), ArcmStatus::Ok);
        // The objective holds its own reference to the data.
        arcm_dataset_free(ds);
        assert_eq!(arcm_objective_dim(obj), 5);

        let x0 = [0.5; 5];
        let mut f0 = 0.0;
        assert_eq!(arcm_objective_value(obj, x0.as_ptr(), 5, &mut f0), ArcmStatus::Ok);
        let mut t = ptr::null_mut();
        let status = arcm_run(
            obj,
            ArcmOptimizer::Arcm,
            ArcmSolver::Krylov,
            x0.as_ptr(),
            5,
            ptr::null(),
            ptr::null(),
            &mut t,
        );
        assert_eq!(status, ArcmStatus::Ok);
        let mut why = ArcmStopReason::Error;
        assert_eq!(arcm_trace_stop_reason(t, &mut why), ArcmStatus::Ok);
        assert_eq!(why, ArcmStopReason::GradTol);
        let (mut f, mut g) = (0.0, 0.0);
        assert_eq!(arcm_trace_final(t, &mut f, &mut g), ArcmStatus::Ok);
        assert!(f < f0 && g <= 1e-6);

        let mut x = [0.0; 5];
        assert_eq!(arcm_trace_final_x(t, x.as_mut_ptr(), 5), ArcmStatus::Ok);
        let mut grad = [1.0; 5];
        assert_eq!(arcm_objective_gradient(obj, x.as_ptr(), 5, grad.as_mut_ptr()), ArcmStatus::Ok);
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_eq!(norm, g);

        let n = arcm_trace_len(t);
        assert!(n > 0 && arcm_trace_successful(t) <= n);
        let mut rec = std::mem::zeroed::<ArcmRecord>();
        for i in 0..n {
            assert_eq!(arcm_trace_record(t, i, &mut rec), ArcmStatus::Ok);
            assert_eq!(rec.k, i);
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(arcm_trace_write_csv(t, cpath.as_ptr()), ArcmStatus::Ok);
        assert_eq!(arcm::cli::read_trace_csv(&path).unwrap().len(), n);

        arcm_trace_free(t);
        arcm_objective_free(obj);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut obj = ptr::null_mut();
        assert_eq!(arcm_objective_rosenbrock(1, &mut obj), ArcmStatus::InvalidArgument);
        assert!(last_error().contains("rosenbrock"));
        assert!(obj.is_null());

        assert_eq!(arcm_objective_quadratic(3, 1, &mut obj), ArcmStatus::Ok);
        let mut t = ptr::null_mut();
        let x0 = [0.0; 2];
        let s = arcm_run(obj, ArcmOptimizer::Arc, ArcmSolver::Exact, x0.as_ptr(), 2, ptr::null(), ptr::null(), &mut t);
        assert_eq!(s, ArcmStatus::InvalidArgument);
        assert!(last_error().contains("length 2"));

        let mut p = arcm_params_default();
        p.gamma2 = 1.5;
        let x0 = [0.0; 3];
        let s = arcm_run(obj, ArcmOptimizer::Arcm, ArcmSolver::Exact, x0.as_ptr(), 3, &p, ptr::null(), &mut t);
        assert_eq!(s, ArcmStatus::InvalidArgument);
        assert!(last_error().contains("gamma2 must satisfy"));

        let nan = [f64::NAN, 0.0, 0.0];
        let s = arcm_run(obj, ArcmOptimizer::Arcm, ArcmSolver::Exact, nan.as_ptr(), 3, ptr::null(), ptr::null(), &mut t);
        assert_eq!(s, ArcmStatus::Numeric);
        assert!(t.is_null());

        let mut out = 0.0;
        assert_eq!(arcm_objective_value(ptr::null(), x0.as_ptr(), 3, &mut out), ArcmStatus::NullPointer);

        let missing = CString::new("/nonexistent/data.svm").unwrap();
        let mut ds = ptr::null_mut();
        assert_eq!(arcm_dataset_load_libsvm(missing.as_ptr(), &mut ds), ArcmStatus::Io);
        assert_eq!(arcm_dataset_synthetic(0, 3, true, 0.0, 1, &mut ds), ArcmStatus::InvalidArgument);

        arcm_objective_free(obj);
        arcm_objective_free(ptr::null_mut());
        arcm_trace_free(ptr::null_mut());
        arcm_dataset_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(arcm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(manifest_dir().join("include/arcm.h")).unwrap();
    for name in [
        "ArcmStatus arcm_run(",
        "void arcm_trace_free(",
        "const char *arcm_last_error(void)",
        "typedef struct ArcmTrace ArcmTrace;",
        "ARCM_STATUS_NULL_POINTER = 1",
        "ArcmParams arcm_params_default(void)",
    ] {
        assert!(header.contains(name), "header lacks `{name}`");
    }
}

/// Compiles tests/c/smoke.c against the static library when a C compiler is present.
#[test]
fn c_program_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else { return };
    // target/<profile>/deps/<test> -> target/<profile>
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libarcm_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest_dir().join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "smoke test failed: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
