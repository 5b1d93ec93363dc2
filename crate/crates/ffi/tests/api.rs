use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use splinekit_ffi::*;

fn last_error() -> String {
    let p = sk_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn unit_square() -> *mut SkMesh {
    let xy = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let tris = [0u32, 1, 2, 0, 2, 3];
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { sk_mesh_new(xy.as_ptr(), 4, tris.as_ptr(), 2, &mut mesh) }, SkStatus::Ok);
    mesh
}

#[test]
fn mesh_and_space_queries() {
    let mesh = unit_square();
    unsafe {
        assert_eq!(sk_mesh_num_vertices(mesh), 4);
        assert_eq!(sk_mesh_num_triangles(mesh), 2);
        let mut space = ptr::null_mut();
        assert_eq!(sk_space_new(mesh, 1, 1, &mut space), SkStatus::Ok);
        sk_mesh_free(mesh);
        assert_eq!(sk_space_num_coeffs(space), 6);
        let (mut lo, mut hi, mut dim) = (0i64, 0i64, 0usize);
        assert_eq!(sk_space_dimension_bounds(space, &mut lo, &mut hi), SkStatus::Ok);
        assert_eq!(sk_space_dimension(space, &mut dim), SkStatus::Ok);
        assert_eq!((lo, hi, dim), (3, 3, 3));
        sk_space_free(space);
    }
}

#[test]
fn fit_evaluate_and_copy_coefficients() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(sk_mesh_square_grid(2, &mut mesh), SkStatus::Ok);
        let mut space = ptr::null_mut();
        assert_eq!(sk_space_new(mesh, 3, 1, &mut space), SkStatus::Ok);
        let mut xy = Vec::new();
        let mut z = Vec::new();
        for j in 0..11 {
            for i in 0..11 {
                let (x, y) = (i as f64 / 10.0, j as f64 / 10.0);
                xy.extend([x, y]);
                z.push(x * x - y + 0.5);
            }
        }
        let mut s = ptr::null_mut();
        assert_eq!(sk_fit_penalized(space, xy.as_ptr(), z.as_ptr(), z.len(), 0.0, &mut s), SkStatus::Ok);
        let mut v = 0.0;
        assert_eq!(sk_spline_eval(s, 0.3, 0.8, &mut v), SkStatus::Ok);
        assert!((v - (0.09 - 0.8 + 0.5)).abs() < 1e-10);

        assert_eq!(sk_spline_eval(s, 2.0, 0.5, &mut v), SkStatus::OutsideDomain);
        assert!(last_error().contains("outside"));

        let q = [0.25, 0.25, 5.0, 5.0];
        let mut out = [0.0; 2];
        assert_eq!(sk_spline_eval_many(s, q.as_ptr(), 2, out.as_mut_ptr()), SkStatus::Ok);
        assert!((out[0] - (0.0625 - 0.25 + 0.5)).abs() < 1e-10);
        assert!(out[1].is_nan());
        assert!(sk_last_error().is_null());

        let n = sk_spline_num_coeffs(s);
        assert_eq!(n, sk_space_num_coeffs(space));
        let mut c = vec![0.0; n];
        assert_eq!(sk_spline_coeffs(s, c.as_mut_ptr(), n - 1), SkStatus::InvalidArgument);
        assert_eq!(sk_spline_coeffs(s, c.as_mut_ptr(), n), SkStatus::Ok);
        let mut copy = ptr::null_mut();
        assert_eq!(sk_spline_from_coeffs(space, c.as_ptr(), n, &mut copy), SkStatus::Ok);
        let mut w = 0.0;
        sk_spline_eval(copy, 0.3, 0.8, &mut w);
        sk_spline_eval(s, 0.3, 0.8, &mut v);
        assert_eq!(v, w);

        sk_spline_free(copy);
        sk_spline_free(s);
        sk_space_free(space);
        sk_mesh_free(mesh);
    }
}

#[test]
fn interpolation_and_poisson() {
    unsafe {
        let mut mesh = ptr::null_mut();
        sk_mesh_square_grid(4, &mut mesh);
        let mut space = ptr::null_mut();
        assert_eq!(sk_space_new(mesh, 8, 1, &mut space), SkStatus::Ok);
        let name = CString::new("quadratic").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(sk_solve_poisson(space, name.as_ptr(), &mut s), SkStatus::Ok);
        let mut v = 0.0;
        sk_spline_eval(s, 0.4, 0.7, &mut v);
        assert!((v - 0.65).abs() < 1e-8);
        sk_spline_free(s);

        let bad = CString::new("nope").unwrap();
        assert_eq!(sk_solve_poisson(space, bad.as_ptr(), &mut s), SkStatus::InvalidArgument);

        let xy = [0.2, 0.2, 0.8, 0.3, 0.5, 0.9];
        let z = [1.0, -1.0, 0.5];
        assert_eq!(sk_interpolate(space, xy.as_ptr(), z.as_ptr(), 3, &mut s), SkStatus::Ok);
        for k in 0..3 {
            sk_spline_eval(s, xy[2 * k], xy[2 * k + 1], &mut v);
            assert!((v - z[k]).abs() < 1e-8);
        }
        sk_spline_free(s);
        sk_space_free(space);
        sk_mesh_free(mesh);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut mesh = ptr::null_mut();
        // collinear triangle
        let xy = [0.0, 0.0, 1.0, 0.0, 2.0, 0.0];
        let tris = [0u32, 1, 2];
        assert_eq!(sk_mesh_new(xy.as_ptr(), 3, tris.as_ptr(), 1, &mut mesh), SkStatus::Mesh);
        assert!(last_error().contains("degenerate"));
        assert!(mesh.is_null());

        let bad_tris = [0u32, 1, 7];
        assert_eq!(sk_mesh_new(xy.as_ptr(), 3, bad_tris.as_ptr(), 1, &mut mesh), SkStatus::Mesh);
        assert_eq!(sk_mesh_new(ptr::null(), 3, tris.as_ptr(), 1, &mut mesh), SkStatus::NullPointer);
        assert_eq!(sk_mesh_square_grid(0, &mut mesh), SkStatus::InvalidArgument);

        let path = CString::new("/nonexistent/mesh.txt").unwrap();
        assert_eq!(sk_mesh_load(path.as_ptr(), &mut mesh), SkStatus::Io);

        let mesh = unit_square();
        let mut space = ptr::null_mut();
        assert_eq!(sk_space_new(mesh, 2, 5, &mut space), SkStatus::Space);
        assert_eq!(sk_space_new(ptr::null(), 2, 1, &mut space), SkStatus::NullPointer);
        assert_eq!(sk_space_new(mesh, 2, 1, ptr::null_mut()), SkStatus::NullPointer);
        assert_eq!(sk_space_new(mesh, 2, 1, &mut space), SkStatus::Ok);

        let mut s = ptr::null_mut();
        let xy = [0.5, 0.5, 3.0, 3.0];
        let z = [1.0, 2.0];
        assert_eq!(sk_fit_penalized(space, xy.as_ptr(), z.as_ptr(), 2, 1.0, &mut s), SkStatus::OutsideDomain);

        // two different values at one point cannot be interpolated
        let xy = [0.5, 0.25, 0.5, 0.25];
        assert_eq!(sk_interpolate(space, xy.as_ptr(), z.as_ptr(), 2, &mut s), SkStatus::Numerical);

        assert_eq!(sk_space_num_coeffs(ptr::null()), 0);
        sk_space_free(ptr::null_mut());
        sk_space_free(space);
        sk_mesh_free(mesh);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(sk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_declares_every_entry_point() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/splinekit.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "sk_last_error",
        "sk_mesh_new",
        "sk_space_new",
        "sk_fit_penalized",
        "sk_spline_eval_many",
        "sk_spline_free",
        "SK_STATUS_OUTSIDE_DOMAIN",
    ] {
        assert!(text.contains(name), "{name}");
    }
    let dir = tempfile_dir();
    let src = dir.join("check.c");
    std::fs::write(&src, "#include \"splinekit.h\"\nint main(void) { return sk_version() == 0; }\n").unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success()),
        Err(e) => eprintln!("skipping C compile check: {e}"),
    }
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ffi-header");
    std::fs::create_dir_all(&d).unwrap();
    d
}
