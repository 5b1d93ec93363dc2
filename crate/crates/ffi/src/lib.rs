//! C interface to splinekit.
//!
//! Meshes, spline spaces and splines are opaque heap handles created by
//! `sk_*_new`-style calls and released with the matching `sk_*_free`.
//! Every fallible call returns an [`SkStatus`]; on failure a message is
//! available from [`sk_last_error`] on the same thread. Panics are caught
//! at the boundary and reported as `SK_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use splinekit::constraints::{ConstraintError, SplineSpace};
use splinekit::dimension::{dim_via_rank, schumaker_bounds, DimensionError, DEFAULT_SLOPE_TOL};
use splinekit::fit::{fit_penalized, interpolate_min_energy, FitError, Spline};
use splinekit::functions::manufactured;
use splinekit::lsq::{LsqConfig, LsqError};
use splinekit::mesh::{load_mesh, square_grid, MeshError, Point2, Triangulation};
use splinekit::pde::{solve_elliptic, EllipticOptions, EllipticProblem, PdeError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Mesh = 3,
    Space = 4,
    Numerical = 5,
    OutsideDomain = 6,
    Io = 7,
    Panic = 8,
}

/// A validated triangulation.
pub struct SkMesh(Triangulation);

/// A spline space `S^r_d` over a mesh.
pub struct SkSpace(SplineSpace);

/// A spline with its coefficients.
pub struct SkSpline(Spline);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SkStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(SkStatus::NullPointer, format!("{what} is null"))
    }
    fn arg(msg: impl Into<String>) -> Self {
        Failure(SkStatus::InvalidArgument, msg.into())
    }
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        let code = if matches!(e, MeshError::Io(_)) { SkStatus::Io } else { SkStatus::Mesh };
        Failure(code, e.to_string())
    }
}

impl From<ConstraintError> for Failure {
    fn from(e: ConstraintError) -> Self {
        let code = match e {
            ConstraintError::Outside { .. } => SkStatus::OutsideDomain,
            ConstraintError::Length { .. } | ConstraintError::TooFewSamples { .. } => SkStatus::InvalidArgument,
            _ => SkStatus::Space,
        };
        Failure(code, e.to_string())
    }
}

impl From<DimensionError> for Failure {
    fn from(e: DimensionError) -> Self {
        Failure(SkStatus::Space, e.to_string())
    }
}

impl From<LsqError> for Failure {
    fn from(e: LsqError) -> Self {
        Failure(SkStatus::Numerical, e.to_string())
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Lsq(e) => e.into(),
            FitError::Constraint(e) => e.into(),
            FitError::Io(e) => Failure(SkStatus::Io, e.to_string()),
            e => Failure(SkStatus::InvalidArgument, e.to_string()),
        }
    }
}

impl From<PdeError> for Failure {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::Lsq(e) => e.into(),
            PdeError::Constraint(e) => e.into(),
            e => Failure(SkStatus::InvalidArgument, e.to_string()),
        }
    }
}

/// Runs `f`, records any failure or panic, and returns its status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SkStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            SkStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| Failure::null(what))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(v)) };
    Ok(())
}

unsafe fn points(xy: *const f64, n: usize) -> Result<Vec<Point2>, Failure> {
    let v = unsafe { slice(xy, 2 * n, "xy") }?;
    Ok(v.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect())
}

unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::null(what));
    }
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Failure::arg(format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null after a
/// successful call. Valid until the next `sk_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a mesh from `nv` vertices (`xy` holds `x0, y0, x1, y1, ...`) and
/// `nt` triangles (`tris` holds three vertex indices each).
///
/// # Safety
/// `xy` must point to `2 * nv` doubles, `tris` to `3 * nt` indices and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sk_mesh_new(
    xy: *const f64,
    nv: usize,
    tris: *const u32,
    nt: usize,
    out: *mut *mut SkMesh,
) -> SkStatus {
    guard(|| {
        let verts = unsafe { points(xy, nv) }?;
        let t = unsafe { slice(tris, 3 * nt, "tris") }?;
        let tris = t.chunks_exact(3).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize]).collect();
        unsafe { put(out, SkMesh(Triangulation::new(verts, tris)?)) }
    })
}

/// `k x k` squares on the unit square, each cut into two triangles.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sk_mesh_square_grid(k: usize, out: *mut *mut SkMesh) -> SkStatus {
    guard(|| {
        if k == 0 {
            return Err(Failure::arg("grid needs k >= 1"));
        }
        unsafe { put(out, SkMesh(square_grid(k))) }
    })
}

/// Reads a mesh file (vertex and triangle sections).
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_mesh_load(path: *const c_char, out: *mut *mut SkMesh) -> SkStatus {
    guard(|| {
        let p = unsafe { string(path, "path") }?;
        unsafe { put(out, SkMesh(load_mesh(Path::new(p))?)) }
    })
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sk_mesh_num_vertices(mesh: *const SkMesh) -> usize {
    unsafe { mesh.as_ref() }.map_or(0, |m| m.0.num_vertices())
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sk_mesh_num_triangles(mesh: *const SkMesh) -> usize {
    unsafe { mesh.as_ref() }.map_or(0, |m| m.0.num_triangles())
}

/// # Safety
/// `mesh` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sk_mesh_free(mesh: *mut SkMesh) {
    if !mesh.is_null() {
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// `S^r_d` over `mesh`; `r = -1` gives discontinuous splines. The mesh is
/// copied, so it may be freed afterwards.
///
/// # Safety
/// `mesh` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_space_new(mesh: *const SkMesh, d: usize, r: i32, out: *mut *mut SkSpace) -> SkStatus {
    guard(|| {
        let m = unsafe { deref(mesh, "mesh") }?;
        unsafe { put(out, SkSpace(SplineSpace::new(m.0.clone(), d, r)?)) }
    })
}

/// # Safety
/// `space` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sk_space_num_coeffs(space: *const SkSpace) -> usize {
    unsafe { space.as_ref() }.map_or(0, |s| s.0.num_coeffs())
}

/// Lower and upper dimension bounds from the mesh combinatorics.
///
/// # Safety
/// `space` must be a live handle; `lower` and `upper` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_space_dimension_bounds(space: *const SkSpace, lower: *mut i64, upper: *mut i64) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(space, "space") }?;
        if lower.is_null() || upper.is_null() {
            return Err(Failure::null("bound output"));
        }
        let rep = schumaker_bounds(&s.0, DEFAULT_SLOPE_TOL)?;
        unsafe {
            *lower = rep.lower;
            *upper = rep.upper;
        }
        Ok(())
    })
}

/// Exact dimension from the rank of the smoothness matrix.
///
/// # Safety
/// `space` must be a live handle and `dim` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_space_dimension(space: *const SkSpace, dim: *mut usize) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(space, "space") }?;
        if dim.is_null() {
            return Err(Failure::null("dim"));
        }
        let n = dim_via_rank(&s.0)?;
        unsafe { *dim = n };
        Ok(())
    })
}

/// # Safety
/// `space` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sk_space_free(space: *mut SkSpace) {
    if !space.is_null() {
        drop(unsafe { Box::from_raw(space) });
    }
}

/// Penalized least-squares fit of `n` scattered values with energy weight
/// `lambda`.
///
/// # Safety
/// `xy` must point to `2 * n` doubles, `z` to `n`, and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_fit_penalized(
    space: *const SkSpace,
    xy: *const f64,
    z: *const f64,
    n: usize,
    lambda: f64,
    out: *mut *mut SkSpline,
) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(space, "space") }?;
        let pts = unsafe { points(xy, n) }?;
        let z = unsafe { slice(z, n, "z") }?;
        let (spline, _) = fit_penalized(&s.0, &pts, z, lambda, &LsqConfig::default())?;
        unsafe { put(out, SkSpline(spline)) }
    })
}

/// Minimal-energy interpolant of `n` values.
///
/// # Safety
/// As for [`sk_fit_penalized`].
#[no_mangle]
pub unsafe extern "C" fn sk_interpolate(
    space: *const SkSpace,
    xy: *const f64,
    z: *const f64,
    n: usize,
    out: *mut *mut SkSpline,
) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(space, "space") }?;
        let pts = unsafe { points(xy, n) }?;
        let z = unsafe { slice(z, n, "z") }?;
        let (spline, _) = interpolate_min_energy(&s.0, &pts, z, &LsqConfig::default())?;
        unsafe { put(out, SkSpline(spline)) }
    })
}

/// Collocation solve of `-Δu = f` with the built-in solution `exact`
/// (`linear`, `quadratic`, `sinpi`, `sin2pi`, `exp`, `cubic`) supplying
/// `f` and the boundary values.
///
/// # Safety
/// `exact` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_solve_poisson(
    space: *const SkSpace,
    exact: *const c_char,
    out: *mut *mut SkSpline,
) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(space, "space") }?;
        let name = unsafe { string(exact, "exact") }?;
        let m = manufactured(name).ok_or_else(|| Failure::arg(format!("unknown solution `{name}`")))?;
        let (spline, _) = solve_elliptic(&s.0, &EllipticProblem::poisson_for(m), &EllipticOptions::default())?;
        unsafe { put(out, SkSpline(spline)) }
    })
}

/// Wraps a coefficient vector of length `sk_space_num_coeffs(space)`.
///
/// # Safety
/// `c` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_spline_from_coeffs(
    space: *const SkSpace,
    c: *const f64,
    n: usize,
    out: *mut *mut SkSpline,
) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(space, "space") }?;
        if n != s.0.num_coeffs() {
            return Err(Failure::arg(format!("expected {} coefficients, got {n}", s.0.num_coeffs())));
        }
        let c = unsafe { slice(c, n, "c") }?;
        unsafe { put(out, SkSpline(Spline::new(s.0.clone(), c.to_vec()))) }
    })
}

/// # Safety
/// `spline` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sk_spline_num_coeffs(spline: *const SkSpline) -> usize {
    unsafe { spline.as_ref() }.map_or(0, |s| s.0.c.len())
}

/// Copies the coefficients into `buf`, which must hold at least
/// `sk_spline_num_coeffs(spline)` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sk_spline_coeffs(spline: *const SkSpline, buf: *mut f64, len: usize) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(spline, "spline") }?;
        let c = &s.0.c;
        if len < c.len() {
            return Err(Failure::arg(format!("buffer holds {len} values, need {}", c.len())));
        }
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        unsafe { ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len()) };
        Ok(())
    })
}

/// Value at `(x, y)`; `SK_STATUS_OUTSIDE_DOMAIN` off the mesh.
///
/// # Safety
/// `spline` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_spline_eval(spline: *const SkSpline, x: f64, y: f64, value: *mut f64) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(spline, "spline") }?;
        if value.is_null() {
            return Err(Failure::null("value"));
        }
        let v = s.0.eval(Point2::new(x, y)).ok_or_else(|| {
            Failure(SkStatus::OutsideDomain, format!("point ({x}, {y}) lies outside the mesh"))
        })?;
        unsafe { *value = v };
        Ok(())
    })
}

/// Values at `n` points; points off the mesh give NaN.
///
/// # Safety
/// `xy` must point to `2 * n` doubles and `values` to `n` writable ones.
#[no_mangle]
pub unsafe extern "C" fn sk_spline_eval_many(
    spline: *const SkSpline,
    xy: *const f64,
    n: usize,
    values: *mut f64,
) -> SkStatus {
    guard(|| {
        let s = unsafe { deref(spline, "spline") }?;
        let pts = unsafe { points(xy, n) }?;
        if n > 0 && values.is_null() {
            return Err(Failure::null("values"));
        }
        let v = s.0.eval_many(&pts);
        unsafe { ptr::copy_nonoverlapping(v.as_ptr(), values, n) };
        Ok(())
    })
}

/// # Safety
/// `spline` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sk_spline_free(spline: *mut SkSpline) {
    if !spline.is_null() {
        drop(unsafe { Box::from_raw(spline) });
    }
}
