use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use dtnlab_ffi::*;

fn last_error() -> String {
    let p = dtnlab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cube(m: usize) -> *mut DtnlabMesh {
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { dtnlab_mesh_cube(m, &mut mesh) }, DtnlabStatus::Ok);
    mesh
}

fn conductivity(mesh: *const DtnlabMesh, json: &str) -> *mut DtnlabConductivity {
    let json = CString::new(json).unwrap();
    let mut cond = ptr::null_mut();
    assert_eq!(unsafe { dtnlab_conductivity_from_json(mesh, json.as_ptr(), &mut cond) }, DtnlabStatus::Ok);
    cond
}

#[test]
fn operator_round_trip() {
    let mesh = cube(4);
    let (mut nv, mut nb, mut h) = (0usize, 0usize, 0.0);
    assert_eq!(unsafe { dtnlab_mesh_info(mesh, &mut nv, &mut nb, &mut h) }, DtnlabStatus::Ok);
    assert_eq!(nv, 125);
    assert_eq!(nb, 98);
    assert!(h > 0.0);

    let cond = conductivity(mesh, r#"{"family":"affine","gradient":[1.0,0.0,0.0],"offset":1.0}"#);
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { dtnlab_operator_assemble(mesh, cond, &mut op) }, DtnlabStatus::Ok);
    let n = unsafe { dtnlab_operator_dim(op) };
    assert_eq!(n, nb);

    // Constants lie in the kernel.
    let ones = vec![1.0; n];
    let mut y = vec![f64::NAN; n];
    assert_eq!(unsafe { dtnlab_operator_apply(op, ones.as_ptr(), y.as_mut_ptr(), n) }, DtnlabStatus::Ok);
    assert!(y.iter().all(|v| v.abs() < 1e-9));

    let g: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut pg = 0.0;
    assert_eq!(unsafe { dtnlab_operator_pairing(op, g.as_ptr(), g.as_ptr(), n, &mut pg) }, DtnlabStatus::Ok);
    assert!(pg > 0.0);
    let mut asym = 1.0;
    assert_eq!(unsafe { dtnlab_operator_asymmetry(op, &mut asym) }, DtnlabStatus::Ok);
    assert!(asym < 1e-12);

    let mut ev = [0.0; 4];
    let mut count = 0;
    assert_eq!(
        unsafe { dtnlab_operator_steklov(op, mesh, ev.as_mut_ptr(), ev.len(), &mut count) },
        DtnlabStatus::Ok
    );
    assert_eq!(count, n);
    assert!(ev[0].abs() < 1e-8 && ev[1] > 0.1 && ev.windows(2).all(|w| w[0] <= w[1]));

    unsafe {
        dtnlab_operator_free(op);
        dtnlab_conductivity_free(cond);
        dtnlab_mesh_free(mesh);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { dtnlab_mesh_cube(0, &mut mesh) }, DtnlabStatus::InvalidArgument);
    assert!(mesh.is_null());
    assert!(last_error().contains("resolution"));

    assert_eq!(unsafe { dtnlab_mesh_cube(2, ptr::null_mut()) }, DtnlabStatus::NullPointer);
    assert_eq!(last_error(), "out is null");

    let mesh = cube(2);
    let bad = CString::new(r#"{"family":"constant","value":-1.0}"#).unwrap();
    let mut cond = ptr::null_mut();
    assert_eq!(
        unsafe { dtnlab_conductivity_from_json(mesh, bad.as_ptr(), &mut cond) },
        DtnlabStatus::Conductivity
    );
    let junk = CString::new("{").unwrap();
    assert_eq!(unsafe { dtnlab_conductivity_from_json(mesh, junk.as_ptr(), &mut cond) }, DtnlabStatus::Config);

    let cond = conductivity(mesh, r#"{"family":"constant","value":2.0}"#);
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { dtnlab_operator_assemble(mesh, cond, &mut op) }, DtnlabStatus::Ok);
    let g = [0.0; 3];
    let mut y = [0.0; 3];
    assert_eq!(unsafe { dtnlab_operator_apply(op, g.as_ptr(), y.as_mut_ptr(), 3) }, DtnlabStatus::InvalidArgument);
    assert!(last_error().contains("length 3"));

    let other = cube(3);
    let mut count = 0;
    assert_eq!(
        unsafe { dtnlab_operator_steklov(op, other, ptr::null_mut(), 0, &mut count) },
        DtnlabStatus::InvalidArgument
    );
    assert_eq!(unsafe { dtnlab_operator_dim(ptr::null()) }, 0);
    unsafe {
        dtnlab_operator_free(op);
        dtnlab_conductivity_free(cond);
        dtnlab_mesh_free(mesh);
        dtnlab_mesh_free(other);
        dtnlab_mesh_free(ptr::null_mut());
    }
}

#[test]
fn scenario_runs_return_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let kind = CString::new("dtn-validate").unwrap();
    let toml = CString::new("seed = 5\n[domain]\nshape = \"cube\"\nm = 3\n").unwrap();
    let out = CString::new(tmp.path().to_str().unwrap()).unwrap();
    let mut summary = ptr::null_mut();
    let status = unsafe { dtnlab_run_scenario(kind.as_ptr(), toml.as_ptr(), out.as_ptr(), &mut summary) };
    assert_eq!(status, DtnlabStatus::Ok);
    let text = unsafe { CStr::from_ptr(summary) }.to_str().unwrap().to_owned();
    unsafe { dtnlab_string_free(summary) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["seed"], 5);
    assert!(tmp.path().join("summary.json").exists());

    let kind = CString::new("no-such-kind").unwrap();
    let mut summary = ptr::null_mut();
    let status = unsafe { dtnlab_run_scenario(kind.as_ptr(), toml.as_ptr(), out.as_ptr(), &mut summary) };
    assert_eq!(status, DtnlabStatus::InvalidArgument);
    assert!(summary.is_null());
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dtnlab.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["dtnlab_mesh_cube", "dtnlab_operator_steklov", "dtnlab_run_scenario", "DTNLAB_STATUS_PANIC"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(run) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"]).arg(&header).output()
    else {
        eprintln!("no C compiler on PATH; syntax check skipped");
        return;
    };
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}
