//! C ABI over `dtnlab`.
//!
//! Objects cross the boundary as opaque handles returned through out pointers
//! and released with the matching `*_free`. Every call returns a
//! [`DtnlabStatus`]; on failure the message is available from
//! [`dtnlab_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dtnlab::dtn::{steklov_eigenvalues, DtnOperator};
use dtnlab::experiments::{run_scenario, ExperimentKind, Overrides, ScenarioConfig};
use dtnlab::fem::{Conductivity, Family};
use dtnlab::geometry::{build_ball_mesh, build_cube_mesh, Mesh};
use dtnlab::trace::boundary_forms;
use dtnlab::LabError;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtnlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Mesh = 4,
    Conductivity = 5,
    Solver = 6,
    Spectral = 7,
    Config = 8,
    Io = 9,
    Numerical = 10,
    Panic = 11,
}

impl From<&LabError> for DtnlabStatus {
    fn from(e: &LabError) -> Self {
        use LabError::*;
        match e.root() {
            InvalidResolution { .. } | Range { .. } | Shape { .. } | Usage(_) => DtnlabStatus::InvalidArgument,
            AmbiguousProjection { .. }
            | OutsideDomain { .. }
            | ConeViolation { .. }
            | InvalidProbe(_)
            | PolePlacement { .. }
            | Domain(_) => DtnlabStatus::Geometry,
            DegenerateMesh { .. } | InvalidMesh(_) => DtnlabStatus::Mesh,
            InvalidConductivity(_) | Ellipticity(_) => DtnlabStatus::Conductivity,
            SolverFailure(_) | Resonance { .. } => DtnlabStatus::Solver,
            SpectralFailure(_) => DtnlabStatus::Spectral,
            Parse { .. } | Config(_) | Json(_) => DtnlabStatus::Config,
            Io(_) => DtnlabStatus::Io,
            Singularity | UnresolvableScale { .. } | DegenerateDatum(_) | NonConvergence(_) => {
                DtnlabStatus::Numerical
            }
            Stage { .. } => unreachable!("root strips stage wrappers"),
        }
    }
}

/// Tetrahedral mesh of the cube or the ball.
pub struct DtnlabMesh {
    mesh: Mesh,
}

/// Conductivity bound to the domain of the mesh it was created for.
pub struct DtnlabConductivity {
    cond: Conductivity,
}

/// Assembled Dirichlet-to-Neumann matrix on the boundary vertices of a mesh.
pub struct DtnlabOperator {
    op: DtnOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DtnlabStatus, String);

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DtnlabStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DtnlabStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DtnlabStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DtnlabStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DtnlabStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_len(expected: usize, found: usize, what: &str) -> Result<(), Failure> {
    if expected == found {
        Ok(())
    } else {
        Err(Failure(DtnlabStatus::InvalidArgument, format!("{what} has length {found}, expected {expected}")))
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next `dtnlab_*` call on the same thread.
#[no_mangle]
pub extern "C" fn dtnlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Structured mesh of the unit cube with `m` cells per edge.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_mesh_cube(m: usize, out: *mut *mut DtnlabMesh) -> DtnlabStatus {
    guard(|| emit(out, DtnlabMesh { mesh: build_cube_mesh(m)? }))
}

/// Mesh of the unit ball at refinement `level`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_mesh_ball(level: usize, out: *mut *mut DtnlabMesh) -> DtnlabStatus {
    guard(|| emit(out, DtnlabMesh { mesh: build_ball_mesh(level)? }))
}

/// Vertex counts and mesh size. Any of the out pointers may be null.
///
/// # Safety
/// `mesh` must come from a mesh constructor; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_mesh_info(
    mesh: *const DtnlabMesh,
    n_vertices: *mut usize,
    n_boundary: *mut usize,
    h: *mut f64,
) -> DtnlabStatus {
    guard(|| {
        let m = &borrow(mesh, "mesh")?.mesh;
        if !n_vertices.is_null() {
            *n_vertices = m.n_vertices();
        }
        if !n_boundary.is_null() {
            *n_boundary = m.n_boundary();
        }
        if !h.is_null() {
            *h = m.h();
        }
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_mesh_free(mesh: *mut DtnlabMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Conductivity from a JSON family description such as
/// `{"family":"affine","gradient":[1,0,0],"offset":1}`, on the domain of `mesh`.
///
/// # Safety
/// `mesh` must be a live handle, `json` a nul-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_conductivity_from_json(
    mesh: *const DtnlabMesh,
    json: *const c_char,
    out: *mut *mut DtnlabConductivity,
) -> DtnlabStatus {
    guard(|| {
        let domain = borrow(mesh, "mesh")?.mesh.domain();
        let family: Family = serde_json::from_str(text(json, "json")?).map_err(LabError::from)?;
        emit(out, DtnlabConductivity { cond: Conductivity::from_family(family, domain)? })
    })
}

/// # Safety
/// `cond` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_conductivity_free(cond: *mut DtnlabConductivity) {
    if !cond.is_null() {
        drop(Box::from_raw(cond));
    }
}

/// Assembles the DtN matrix of `cond` on `mesh`.
///
/// # Safety
/// `mesh` and `cond` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_operator_assemble(
    mesh: *const DtnlabMesh,
    cond: *const DtnlabConductivity,
    out: *mut *mut DtnlabOperator,
) -> DtnlabStatus {
    guard(|| {
        let mesh = &borrow(mesh, "mesh")?.mesh;
        let cond = &borrow(cond, "cond")?.cond;
        emit(out, DtnlabOperator { op: DtnOperator::assemble(mesh, cond)? })
    })
}

/// Number of boundary degrees of freedom, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_operator_dim(op: *const DtnlabOperator) -> usize {
    op.as_ref().map_or(0, |o| o.op.dim())
}

/// `out = Λ g`; both buffers have length `dim`.
///
/// # Safety
/// `g` must hold `len` readable doubles and `out` `len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_operator_apply(
    op: *const DtnlabOperator,
    g: *const f64,
    out: *mut f64,
    len: usize,
) -> DtnlabStatus {
    guard(|| {
        let op = &borrow(op, "op")?.op;
        check_len(op.dim(), len, "g")?;
        let g = slice(g, len, "g")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let y = op.apply(g);
        ptr::copy_nonoverlapping(y.as_ptr(), out, len);
        Ok(())
    })
}

/// `⟨Λ g, h⟩`.
///
/// # Safety
/// `g` and `h` must hold `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_operator_pairing(
    op: *const DtnlabOperator,
    g: *const f64,
    h: *const f64,
    len: usize,
    out: *mut f64,
) -> DtnlabStatus {
    guard(|| {
        let op = &borrow(op, "op")?.op;
        check_len(op.dim(), len, "g")?;
        let (g, h) = (slice(g, len, "g")?, slice(h, len, "h")?);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = op.pairing(g, h);
        Ok(())
    })
}

/// Relative asymmetry of the assembled matrix.
///
/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_operator_asymmetry(op: *const DtnlabOperator, out: *mut f64) -> DtnlabStatus {
    guard(|| {
        let op = &borrow(op, "op")?.op;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = op.asymmetry();
        Ok(())
    })
}

/// Steklov eigenvalues in ascending order, with the boundary mass of `mesh`.
/// Writes `min(cap, dim)` values and stores the full count in `written`.
///
/// # Safety
/// `mesh` must be the mesh the operator was assembled on; `out` must hold `cap`
/// writable doubles and `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_operator_steklov(
    op: *const DtnlabOperator,
    mesh: *const DtnlabMesh,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> DtnlabStatus {
    guard(|| {
        let op = &borrow(op, "op")?.op;
        let mesh = &borrow(mesh, "mesh")?.mesh;
        if op.mesh_id() != mesh.id() {
            return Err(Failure(
                DtnlabStatus::InvalidArgument,
                format!("operator was assembled on mesh {}, not {}", op.mesh_id(), mesh.id()),
            ));
        }
        if written.is_null() || (cap > 0 && out.is_null()) {
            return Err(null("out"));
        }
        let ev = steklov_eigenvalues(op.matrix(), &boundary_forms(mesh).0)?;
        let n = cap.min(ev.len());
        ptr::copy_nonoverlapping(ev.as_ptr(), out, n);
        *written = ev.len();
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_operator_free(op: *mut DtnlabOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Runs experiment `kind` (for example `"dtn-validate"`) from TOML text.
/// `out_dir` may be null to use the config value or the default. On success
/// `summary` receives the JSON summary, to be released with [`dtnlab_string_free`].
///
/// # Safety
/// `kind` and `toml` must be nul-terminated strings, `out_dir` null or one, and
/// `summary` writable.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_run_scenario(
    kind: *const c_char,
    toml: *const c_char,
    out_dir: *const c_char,
    summary: *mut *mut c_char,
) -> DtnlabStatus {
    guard(|| {
        if summary.is_null() {
            return Err(null("summary"));
        }
        let kind: ExperimentKind = text(kind, "kind")?.parse()?;
        let out = if out_dir.is_null() { None } else { Some(PathBuf::from(text(out_dir, "out_dir")?)) };
        let cfg = ScenarioConfig::from_toml(text(toml, "toml")?)?.resolve(kind, &Overrides { out, seed: None })?;
        let bundle = run_scenario(&cfg)?;
        let json = serde_json::to_string(&bundle.summary).map_err(LabError::from)?;
        *summary = CString::new(json).expect("json has no nuls").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtnlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_maps_through_stage_wrappers() {
        let e = LabError::Stage { stage: "x", source: Box::new(LabError::InvalidMesh("bad".into())) };
        assert_eq!(DtnlabStatus::from(&e), DtnlabStatus::Mesh);
    }

    #[test]
    fn panics_become_status_codes() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, DtnlabStatus::Panic);
        let msg = unsafe { CStr::from_ptr(dtnlab_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(guard(|| Ok(())), DtnlabStatus::Ok);
        assert!(dtnlab_last_error().is_null());
    }
}
