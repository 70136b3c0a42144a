//! Drives the C entry points the way a foreign caller would: through raw
//! pointers and status codes only.

use std::ffi::CStr;
use std::os::raw::c_char;
use std::ptr;

use hmhd_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { hmhd_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n >= 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn make_grid(dim: u32, n: u32, band: u32) -> *mut HmhdGrid {
    let mut g = ptr::null_mut();
    let rc = unsafe { hmhd_grid_new(dim, n, band, &mut g) };
    assert_eq!(rc, HMHD_OK, "{}", last_error());
    assert!(!g.is_null());
    g
}

fn make_field(g: *const HmhdGrid, seed: u64, k_max: u32) -> *mut HmhdField {
    let mut f = ptr::null_mut();
    let rc = unsafe { hmhd_field_random(g, seed, k_max, 1.5, &mut f) };
    assert_eq!(rc, HMHD_OK, "{}", last_error());
    f
}

#[test]
fn version_is_a_c_string() {
    let v = hmhd_version();
    assert!(!v.is_null());
    let s = unsafe { CStr::from_ptr(v) }.to_str().unwrap();
    assert!(s.split('.').count() >= 2);
}

#[test]
fn grid_lifecycle_and_queries() {
    let g = make_grid(2, 32, 9);
    let mut v = 0u32;
    unsafe {
        assert_eq!(hmhd_grid_dim(g, &mut v), HMHD_OK);
        assert_eq!(v, 2);
        assert_eq!(hmhd_grid_size(g, 1, &mut v), HMHD_OK);
        assert_eq!(v, 32);
        assert_eq!(hmhd_grid_band(g, 0, &mut v), HMHD_OK);
        assert_eq!(v, 9);
        assert_eq!(hmhd_grid_band(g, 7, &mut v), HMHD_ERR_INVALID);
        hmhd_grid_free(g);
        hmhd_grid_free(ptr::null_mut());
    }
}

#[test]
fn invalid_grids_are_rejected_with_messages() {
    let mut g = ptr::null_mut();
    let rc = unsafe { hmhd_grid_new(4, 16, 4, &mut g) };
    assert_eq!(rc, HMHD_ERR_INVALID);
    assert!(!last_error().is_empty());

    let rc = unsafe { hmhd_grid_new(2, 16, 4, ptr::null_mut()) };
    assert_eq!(rc, HMHD_ERR_NULL);
}

#[test]
fn field_norms_divergence_and_scaling() {
    let g = make_grid(2, 32, 9);
    let f = make_field(g, 7, 6);
    let mut l2 = 0.0;
    let mut div = 0.0;
    unsafe {
        assert_eq!(hmhd_field_l2_norm(f, &mut l2), HMHD_OK);
        assert!(l2 > 0.0);
        assert_eq!(hmhd_field_div_residual(f, &mut div), HMHD_OK);
        assert!(div <= 1e-12, "div {div:.3e}");

        assert_eq!(hmhd_field_scale(f, 2.0), HMHD_OK);
        let mut l2b = 0.0;
        assert_eq!(hmhd_field_l2_norm(f, &mut l2b), HMHD_OK);
        assert!((l2b - 2.0 * l2).abs() <= 1e-12 * l2);

        let mut s3 = 0.0;
        assert_eq!(hmhd_field_sobolev_seminorm(f, 3.0, &mut s3), HMHD_OK);
        assert!(s3.is_finite() && s3 > 0.0);

        hmhd_field_free(f);
        hmhd_grid_free(g);
    }
}

#[test]
fn coefficients_come_back_hermitian() {
    let g = make_grid(2, 32, 9);
    let f = make_field(g, 11, 6);
    let (mut re_p, mut im_p, mut re_m, mut im_m) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        let plus = [2i64, 3];
        let minus = [-2i64, -3];
        assert_eq!(
            hmhd_field_coefficient(f, 1, plus.as_ptr(), &mut re_p, &mut im_p),
            HMHD_OK
        );
        assert_eq!(
            hmhd_field_coefficient(f, 1, minus.as_ptr(), &mut re_m, &mut im_m),
            HMHD_OK
        );
        assert!((re_p - re_m).abs() <= 1e-15 && (im_p + im_m).abs() <= 1e-15);
        assert_eq!(
            hmhd_field_coefficient(f, 5, plus.as_ptr(), &mut re_p, &mut im_p),
            HMHD_ERR_INVALID
        );
        hmhd_field_free(f);
        hmhd_grid_free(g);
    }
}

#[test]
fn identity_ledger_clears_through_the_boundary() {
    for (dim, n, band, k_max) in [(2u32, 48u32, 10u32, 8u32), (3, 24, 4, 4)] {
        let g = make_grid(dim, n, band);
        let f = make_field(g, 21, k_max);
        let mut worst = f64::NAN;
        let (mut checks, mut failed) = (0u32, 0u32);
        unsafe {
            let rc = hmhd_field_check_identities(f, &mut worst, &mut checks, &mut failed);
            assert_eq!(rc, HMHD_OK, "{}", last_error());
            let expect = if dim == 2 { 23 } else { 17 };
            assert_eq!(checks, expect);
            assert_eq!(failed, 0, "worst rel {worst:.3e}");
            assert!(worst <= 1e-11, "worst rel {worst:.3e}");

            let mut rel = f64::NAN;
            assert_eq!(hmhd_field_hall_neutrality(f, &mut rel), HMHD_OK);
            assert!(rel <= 1e-12, "neutrality rel {rel:.3e}");

            hmhd_field_free(f);
            hmhd_grid_free(g);
        }
    }
}

#[test]
fn simulation_runs_and_reports_through_handles() {
    let g = make_grid(2, 32, 9);
    let f = make_field(g, 5, 6);
    let mut cfg = unsafe { std::mem::zeroed::<HmhdSimConfig>() };
    unsafe {
        assert_eq!(hmhd_sim_config_default(0, &mut cfg), HMHD_OK);
    }
    assert_eq!(cfg.system, 0);
    assert!(cfg.alpha > 0.5 && cfg.alpha < 1.0);
    cfg.dt = 1e-3;
    cfg.t_end = 0.02;

    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(hmhd_sim_new(&cfg, f, ptr::null(), &mut sim), HMHD_OK, "{}", last_error());

        let mut dt = 0.0;
        assert_eq!(hmhd_sim_step(sim, &mut dt), HMHD_OK);
        assert!((dt - 1e-3).abs() < 1e-15);

        assert_eq!(hmhd_sim_run(sim), HMHD_OK, "{}", last_error());
        let (mut t, mut e, mut defect, mut h3) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(hmhd_sim_time(sim, &mut t), HMHD_OK);
        assert!((t - 0.02).abs() <= 1e-12);
        assert_eq!(hmhd_sim_energy(sim, &mut e), HMHD_OK);
        assert!(e > 0.0);
        assert_eq!(hmhd_sim_energy_defect(sim, &mut defect), HMHD_OK);
        assert!(defect <= 1e-6, "defect {defect:.3e}");
        assert_eq!(hmhd_sim_h3(sim, &mut h3), HMHD_OK);
        assert!(h3.is_finite());

        let mut b_now = ptr::null_mut();
        assert_eq!(hmhd_sim_field(sim, &mut b_now), HMHD_OK);
        let mut div = 0.0;
        assert_eq!(hmhd_field_div_residual(b_now, &mut div), HMHD_OK);
        assert!(div <= 1e-11, "div {div:.3e}");

        hmhd_field_free(b_now);
        hmhd_sim_free(sim);
        hmhd_field_free(f);
        hmhd_grid_free(g);
    }
}

#[test]
fn blowup_surfaces_as_its_own_code() {
    let g = make_grid(2, 32, 9);
    let f = make_field(g, 5, 6);
    let mut cfg = unsafe { std::mem::zeroed::<HmhdSimConfig>() };
    unsafe {
        assert_eq!(hmhd_sim_config_default(0, &mut cfg), HMHD_OK);
    }
    cfg.dt = 1e-3;
    cfg.t_end = 0.05;
    cfg.h3_ceiling = 1e-9;

    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(hmhd_sim_new(&cfg, f, ptr::null(), &mut sim), HMHD_OK);
        assert_eq!(hmhd_sim_run(sim), HMHD_ERR_BLOWUP);
        assert!(last_error().contains("regularity"), "{}", last_error());
        hmhd_sim_free(sim);
        hmhd_field_free(f);
        hmhd_grid_free(g);
    }
}

#[test]
fn tag_and_argument_validation() {
    let g = make_grid(2, 32, 9);
    let f = make_field(g, 5, 6);
    let mut cfg = unsafe { std::mem::zeroed::<HmhdSimConfig>() };
    unsafe {
        assert_eq!(hmhd_sim_config_default(9, &mut cfg), HMHD_ERR_UNSUPPORTED);
        assert!(last_error().contains('9'));

        assert_eq!(hmhd_sim_config_default(0, &mut cfg), HMHD_OK);
        cfg.dt = 1e-3;

        // a velocity handle for a model without one
        let mut sim = ptr::null_mut();
        assert_eq!(hmhd_sim_new(&cfg, f, f, &mut sim), HMHD_ERR_INVALID);
        assert!(last_error().contains("NULL"));

        // a velocity-carrying model without the handle
        cfg.system = 2;
        assert_eq!(hmhd_sim_new(&cfg, f, ptr::null(), &mut sim), HMHD_ERR_INVALID);

        // bad scheme tag
        cfg.system = 0;
        cfg.scheme = 7;
        assert_eq!(hmhd_sim_new(&cfg, f, ptr::null(), &mut sim), HMHD_ERR_UNSUPPORTED);

        // null pointers never crash
        assert_eq!(hmhd_sim_run(ptr::null_mut()), HMHD_ERR_NULL);
        assert_eq!(hmhd_field_l2_norm(ptr::null(), &mut 0.0), HMHD_ERR_NULL);
        assert_eq!(hmhd_field_random(ptr::null(), 1, 2, 1.0, &mut ptr::null_mut()), HMHD_ERR_NULL);

        hmhd_field_free(f);
        hmhd_grid_free(g);
    }
}

#[test]
fn error_message_truncation_contract() {
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(hmhd_grid_new(4, 16, 4, &mut g), HMHD_ERR_INVALID);
        let full = hmhd_last_error(ptr::null_mut(), 0);
        assert!(full > 4);
        let mut tiny = [0 as c_char; 5];
        assert_eq!(hmhd_last_error(tiny.as_mut_ptr(), tiny.len()), full);
        let s = CStr::from_ptr(tiny.as_ptr()).to_bytes();
        assert_eq!(s.len(), 4);
    }
}
