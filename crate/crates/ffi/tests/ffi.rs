use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mkdv_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mkdv_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn field_round_trip() {
    let re = [0.1, 0.2, 0.3, 0.4, 0.5];
    let im = [0.0, -0.1, 0.0, 0.1, 0.0];
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(mkdv_field_new(2, re.as_ptr(), im.as_ptr(), 5, &mut f), MkdvStatus::Ok);
        assert_eq!(mkdv_field_max_freq(f), 2);
        let (mut r, mut i) = ([0.0; 5], [0.0; 5]);
        assert_eq!(mkdv_field_coeffs(f, r.as_mut_ptr(), i.as_mut_ptr(), 5), MkdvStatus::Ok);
        assert_eq!(r, re);
        assert_eq!(i, im);
        let mut short = [0.0; 3];
        assert_eq!(
            mkdv_field_coeffs(f, short.as_mut_ptr(), short.as_mut_ptr(), 3),
            MkdvStatus::InvalidArgument
        );
        mkdv_field_free(f);
    }
}

#[test]
fn wrong_length_and_nulls_are_reported() {
    let re = [0.0; 4];
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(mkdv_field_new(2, re.as_ptr(), re.as_ptr(), 4, &mut f), MkdvStatus::InvalidArgument);
        assert!(f.is_null());
        assert!(last_error().contains("expected 5"));
        assert_eq!(mkdv_field_new(2, ptr::null(), re.as_ptr(), 4, &mut f), MkdvStatus::NullPointer);
        let mut e = MkdvEnergies::default();
        assert_eq!(mkdv_field_energies(ptr::null(), 0, &mut e), MkdvStatus::NullPointer);
        assert_eq!(mkdv_field_max_freq(ptr::null()), 0);
        mkdv_field_free(ptr::null_mut());
        mkdv_flow_free(ptr::null_mut());
    }
}

#[test]
fn invalid_enums_rejected() {
    let mut flow = ptr::null_mut();
    let mut x = 0.0;
    unsafe {
        assert_eq!(mkdv_flow_new(8, 5, 0, 1e-2, 1e-9, &mut flow), MkdvStatus::InvalidArgument);
        assert_eq!(mkdv_flow_new(8, 0, 9, 1e-2, 1e-9, &mut flow), MkdvStatus::InvalidArgument);
        assert_eq!(mkdv_flow_new(8, 0, 0, -1.0, 1e-9, &mut flow), MkdvStatus::InvalidArgument);
        assert_eq!(mkdv_lemma_sum(-1, 16, &mut x), MkdvStatus::InvalidArgument);
        assert_eq!(mkdv_lemma_sum(7, 16, &mut x), MkdvStatus::InvalidArgument);
        assert_eq!(mkdv_lemma_sum(MkdvLemma::L53 as i32, 0, &mut x), MkdvStatus::InvalidArgument);
    }
    let name = unsafe { CStr::from_ptr(mkdv_status_name(42)) };
    assert_eq!(name.to_str().unwrap(), "unknown status");
}

#[test]
fn single_mode_matches_closed_form() {
    // c e^{imx} rotates at m^3 - 6 m |c|^2 in the defocusing case.
    let (m, c, t) = (3i64, 0.5f64, 1.0f64);
    let n = 8usize;
    let mut re = vec![0.0; 2 * n + 1];
    let im = vec![0.0; 2 * n + 1];
    re[(m + n as i64) as usize] = c;
    let (mut u, mut v, mut flow) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(mkdv_field_new(n, re.as_ptr(), im.as_ptr(), re.len(), &mut u), MkdvStatus::Ok);
        assert_eq!(mkdv_flow_new(n, 0, 0, 1e-2, 1e-11, &mut flow), MkdvStatus::Ok);
        assert_eq!(mkdv_evolve(flow, u, t, &mut v), MkdvStatus::Ok);
        let (mut r, mut i) = (vec![0.0; re.len()], vec![0.0; re.len()]);
        assert_eq!(mkdv_field_coeffs(v, r.as_mut_ptr(), i.as_mut_ptr(), r.len()), MkdvStatus::Ok);
        let omega = (m.pow(3) as f64 - 6.0 * m as f64 * c * c) * t;
        let k = (m + n as i64) as usize;
        let err = ((r[k] - c * omega.cos()).powi(2) + (i[k] - c * omega.sin()).powi(2)).sqrt();
        assert!(err < 1e-8 * c, "error {err}");
        mkdv_field_free(u);
        mkdv_field_free(v);
        mkdv_flow_free(flow);
    }
}

#[test]
fn sampled_energies_and_drift() {
    let mut u = ptr::null_mut();
    let mut e = MkdvEnergies::default();
    let mut d = f64::NAN;
    unsafe {
        assert_eq!(mkdv_field_sample(6, 1, 3, &mut u), MkdvStatus::Ok);
        assert_eq!(mkdv_field_energies(u, 1, &mut e), MkdvStatus::Ok);
        assert!(e.e1 > e.mass && e.mass > 0.0);
        assert_eq!(mkdv_e3_drift(u, 6, &mut d), MkdvStatus::Ok);
        assert!(d.is_finite());
        // a field band-limited to N has no drift at truncation >= 3N
        assert_eq!(mkdv_e3_drift(u, 18, &mut d), MkdvStatus::Ok);
        assert_eq!(d, 0.0);
        mkdv_field_free(u);
    }
}

#[test]
fn lemma_sums_exposed() {
    let mut x = 0.0;
    for lemma in 0..5 {
        assert_eq!(unsafe { mkdv_lemma_sum(lemma, 32, &mut x) }, MkdvStatus::Ok);
        assert!(x > 0.0);
    }
}

#[test]
fn run_json_writes_outputs() {
    let dir = tempfile_dir();
    let cfg = CString::new(r#"{"experiment": "conservation", "N": 8, "samples": 4, "seed": 1}"#).unwrap();
    let root = CString::new(dir.to_str().unwrap()).unwrap();
    let mut passed = -1;
    let status = unsafe { mkdv_run_json(cfg.as_ptr(), root.as_ptr(), &mut passed) };
    assert_eq!(status, MkdvStatus::Ok, "{}", last_error());
    assert_eq!(passed, 1);
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);

    let bad = CString::new(r#"{"experiment": "conservation", "bogus": true}"#).unwrap();
    let status = unsafe { mkdv_run_json(bad.as_ptr(), root.as_ptr(), &mut passed) };
    assert_eq!(status, MkdvStatus::Config);
    assert!(last_error().contains("bogus"));
    std::fs::remove_dir_all(&dir).unwrap();
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("mkdv-ffi-test-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mkdv.h")).unwrap();
    for name in [
        "mkdv_last_error",
        "mkdv_status_name",
        "mkdv_field_new",
        "mkdv_field_sample",
        "mkdv_field_free",
        "mkdv_field_max_freq",
        "mkdv_field_coeffs",
        "mkdv_field_energies",
        "mkdv_e3_drift",
        "mkdv_flow_new",
        "mkdv_flow_free",
        "mkdv_evolve",
        "mkdv_lemma_sum",
        "mkdv_run_json",
        "typedef struct MkdvField MkdvField",
        "MKDV_STATUS_NULL_POINTER = 1",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the static library, when a C compiler exists.
#[test]
fn c_program_links_and_runs() {
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib_dir = deps.parent().unwrap();
    let lib = lib_dir.join("libmkdv_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::temp_dir().join(format!("mkdv-smoke-{}", std::process::id()));
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    let _ = std::fs::remove_file(&exe);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
