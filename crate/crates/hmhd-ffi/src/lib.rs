//! C ABI over the spectral laboratory: opaque handles, integer status
//! codes, out-pointer results, and a generated header (include/hmhd.h).
//!
//! Conventions: every fallible call returns a status code from the
//! `HMHD_*` constants and writes results through out-pointers only on
//! `HMHD_OK`.  Unwinds are caught at the boundary and surface as
//! `HMHD_ERR_INTERNAL`.  A per-thread message for the most recent failure
//! is available through `hmhd_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hmhd_core::evolve::{
    DtMode, ModelSpec, Scheme, SimState, Stepper, StepperConfig, System,
};
use hmhd_core::fields::{random_divfree, vector_l2_inner, VectorField};
use hmhd_core::ledger::{
    build_ledger, check_25d_vi_cancellations, check_cancellations, check_master_identity,
    ledger_internal_checks, CheckResult,
};
use hmhd_core::nonlinear::hall_term;
use hmhd_core::spectral::Grid;
use hmhd_core::HmhdError;

/// Success.
pub const HMHD_OK: i32 = 0;
/// A required pointer argument was null.
pub const HMHD_ERR_NULL: i32 = -1;
/// An argument or configuration value was rejected.
pub const HMHD_ERR_INVALID: i32 = -2;
/// A tag (system, scheme) outside the supported set.
pub const HMHD_ERR_UNSUPPORTED: i32 = -3;
/// An internal failure; inspect hmhd_last_error.
pub const HMHD_ERR_INTERNAL: i32 = -4;
/// The solution lost regularity before reaching the requested time.
pub const HMHD_ERR_BLOWUP: i32 = -5;

/// Opaque periodic-grid handle.
pub struct HmhdGrid(Grid);

/// Opaque three-component field handle.
pub struct HmhdField(VectorField);

/// Opaque simulation handle: one field (plus optional velocity) marching
/// in time under a fixed model.
pub struct HmhdSim {
    stepper: Stepper,
    state: SimState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap());
}

fn error_code(e: &HmhdError) -> i32 {
    match e {
        HmhdError::Invalid(_) | HmhdError::Config(_) => HMHD_ERR_INVALID,
        HmhdError::Blowup { .. } => HMHD_ERR_BLOWUP,
        _ => HMHD_ERR_INTERNAL,
    }
}

fn fail(e: HmhdError) -> i32 {
    set_error(&e.to_string());
    error_code(&e)
}

fn fail_null() -> i32 {
    set_error("null pointer argument");
    HMHD_ERR_NULL
}

/// Runs the body behind a panic barrier.
fn guarded(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic across the C boundary".to_string());
            set_error(&msg);
            HMHD_ERR_INTERNAL
        }
    }
}

macro_rules! deref {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return fail_null(),
        }
    };
}

macro_rules! deref_mut {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => return fail_null(),
        }
    };
}

/// Writes `v` to the out-pointer, failing on null.
fn put<T>(out: *mut T, v: T) -> i32 {
    if out.is_null() {
        return fail_null();
    }
    unsafe { out.write(v) };
    HMHD_OK
}

/// Library version as a static NUL-terminated string; never null.
#[no_mangle]
pub extern "C" fn hmhd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the most recent error message on this thread into `buf`
/// (truncated to `cap` bytes including the NUL) and returns the full
/// message length in bytes.  With a null or zero-capacity buffer only the
/// length is reported.
///
/// # Safety
/// `buf`, when non-null, must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hmhd_last_error(buf: *mut c_char, cap: usize) -> i32 {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                buf.add(n).write(0);
            }
        }
        bytes.len() as i32
    })
}

/// Creates a square periodic grid: `dim` axes (2 or 3), `n` points per
/// axis, coefficients kept for |mode| <= `band`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle that
/// must be released with `hmhd_grid_free`.
#[no_mangle]
pub unsafe extern "C" fn hmhd_grid_new(
    dim: u32,
    n: u32,
    band: u32,
    out: *mut *mut HmhdGrid,
) -> i32 {
    guarded(|| match Grid::new_square(dim as usize, n as usize, band as usize) {
        Ok(g) => put(out, Box::into_raw(Box::new(HmhdGrid(g)))),
        Err(e) => fail(e),
    })
}

/// Releases a grid handle; a null handle is a no-op.
///
/// # Safety
/// `g` must be null or a handle obtained from this library that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn hmhd_grid_free(g: *mut HmhdGrid) {
    if !g.is_null() {
        drop(unsafe { Box::from_raw(g) });
    }
}

/// Reports the number of axes.
///
/// # Safety
/// `g` must be a live grid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_grid_dim(g: *const HmhdGrid, out: *mut u32) -> i32 {
    let g = deref!(g);
    put(out, g.0.dim() as u32)
}

/// Reports the number of points along `axis` (0-based).
///
/// # Safety
/// `g` must be a live grid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_grid_size(g: *const HmhdGrid, axis: u32, out: *mut u32) -> i32 {
    let g = deref!(g);
    match g.0.dims().get(axis as usize) {
        Some(&n) => put(out, n as u32),
        None => fail(HmhdError::invalid(format!("axis {axis} out of range"))),
    }
}

/// Reports the band limit along `axis` (0-based).
///
/// # Safety
/// `g` must be a live grid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_grid_band(g: *const HmhdGrid, axis: u32, out: *mut u32) -> i32 {
    let g = deref!(g);
    match g.0.band().get(axis as usize) {
        Some(&b) => put(out, b as u32),
        None => fail(HmhdError::invalid(format!("axis {axis} out of range"))),
    }
}

/// Draws a reproducible divergence-free random field on `g`: complex
/// Gaussian modes with amplitude |mode|^(-slope) up to `k_max`, projected
/// and zero-mean.  The same seed yields bit-identical fields.
///
/// # Safety
/// `g` must be a live grid handle; `out` receives a handle to release
/// with `hmhd_field_free`.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_random(
    g: *const HmhdGrid,
    seed: u64,
    k_max: u32,
    slope: f64,
    out: *mut *mut HmhdField,
) -> i32 {
    let g = deref!(g);
    guarded(|| match random_divfree(&g.0, seed, k_max as usize, slope) {
        Ok(f) => put(out, Box::into_raw(Box::new(HmhdField(f)))),
        Err(e) => fail(e),
    })
}

/// Deep-copies a field.
///
/// # Safety
/// `f` must be a live field handle; `out` receives an independent handle.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_clone(f: *const HmhdField, out: *mut *mut HmhdField) -> i32 {
    let f = deref!(f);
    guarded(|| put(out, Box::into_raw(Box::new(HmhdField(f.0.clone())))))
}

/// Releases a field handle; a null handle is a no-op.
///
/// # Safety
/// `f` must be null or a handle obtained from this library that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_free(f: *mut HmhdField) {
    if !f.is_null() {
        drop(unsafe { Box::from_raw(f) });
    }
}

/// Multiplies the field by `s` in place.
///
/// # Safety
/// `f` must be a live field handle.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_scale(f: *mut HmhdField, s: f64) -> i32 {
    let f = deref_mut!(f);
    guarded(|| {
        f.0 = f.0.scaled(s);
        HMHD_OK
    })
}

/// L2 norm of the field.
///
/// # Safety
/// `f` must be a live field handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_l2_norm(f: *const HmhdField, out: *mut f64) -> i32 {
    let f = deref!(f);
    guarded(|| put(out, f.0.l2_norm()))
}

/// Homogeneous Sobolev seminorm of the given order.
///
/// # Safety
/// `f` must be a live field handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_sobolev_seminorm(
    f: *const HmhdField,
    order: f64,
    out: *mut f64,
) -> i32 {
    let f = deref!(f);
    guarded(|| put(out, f.0.sobolev_seminorm(order)))
}

/// Relative divergence residual (0 for a solenoidal field).
///
/// # Safety
/// `f` must be a live field handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_div_residual(f: *const HmhdField, out: *mut f64) -> i32 {
    let f = deref!(f);
    guarded(|| put(out, f.0.div_residual_rel()))
}

/// Reads one spectral coefficient: component `comp` in 1..=3, signed mode
/// vector `mode` of length equal to the grid dimension.
///
/// # Safety
/// `f` must be a live field handle; `mode` must point to `dim` readable
/// integers; `out_re`/`out_im` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_coefficient(
    f: *const HmhdField,
    comp: u32,
    mode: *const i64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> i32 {
    let f = deref!(f);
    if mode.is_null() {
        return fail_null();
    }
    if !(1..=3).contains(&comp) {
        return fail(HmhdError::invalid("component index must be 1, 2, or 3"));
    }
    let dim = f.0.grid().dim();
    let modes = unsafe { std::slice::from_raw_parts(mode, dim) };
    guarded(|| {
        let c = f.0.comp(comp as usize).coeff(modes);
        let rc = put(out_re, c.re);
        if rc != HMHD_OK {
            return rc;
        }
        put(out_im, c.im)
    })
}

/// Evaluates the full identity ledger on the field: term additivity, the
/// pairwise cancellations, the master identity, and on planar grids the
/// two extra families.  Reports the number of checks, how many failed,
/// and the worst residual relative to each check's scale.
///
/// # Safety
/// `f` must be a live field handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_check_identities(
    f: *const HmhdField,
    worst_rel: *mut f64,
    n_checks: *mut u32,
    n_failed: *mut u32,
) -> i32 {
    let f = deref!(f);
    guarded(|| {
        let ledger = build_ledger(&f.0);
        let mut checks: Vec<CheckResult> = ledger_internal_checks(&f.0, &ledger);
        checks.extend(check_cancellations(&ledger).checks);
        checks.push(check_master_identity(&f.0, &ledger));
        if f.0.grid().dim() == 2 {
            match check_25d_vi_cancellations(&f.0, &ledger) {
                Ok(rep) => checks.extend(rep.checks),
                Err(e) => return fail(e),
            }
        }
        let worst = checks
            .iter()
            .map(|c| c.residual / c.scale.max(1e-300))
            .fold(0.0f64, f64::max);
        let failed = checks.iter().filter(|c| !c.pass).count() as u32;
        let rc = put(worst_rel, worst);
        if rc != HMHD_OK {
            return rc;
        }
        let rc = put(n_checks, checks.len() as u32);
        if rc != HMHD_OK {
            return rc;
        }
        put(n_failed, failed)
    })
}

/// Energy neutrality of the Hall force: |<curl(j x b), b>| scaled by
/// ||j|| ||grad b|| ||b||; exactly zero in exact arithmetic.
///
/// # Safety
/// `f` must be a live field handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_field_hall_neutrality(f: *const HmhdField, out: *mut f64) -> i32 {
    let f = deref!(f);
    guarded(|| {
        let b = &f.0;
        let scale = b.current_density().l2_norm() * b.sobolev_seminorm(1.0) * b.l2_norm();
        let rel = vector_l2_inner(&hall_term(b), b).abs() / scale.max(1e-300);
        put(out, rel)
    })
}

/// Simulation parameters; obtain defaults from `hmhd_sim_config_default`
/// and adjust before `hmhd_sim_new`.  `dt > 0` fixes the step; `dt <= 0`
/// selects adaptive stepping under the `cfl` number.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct HmhdSimConfig {
    /// Model tag: 0 anisotropic electron, 1 uniform-exponent electron,
    /// 2 mixed-dissipation hall, 3 classical hall.
    pub system: u32,
    /// Scheme tag: 0 fourth-order, 1 second-order integrating factor.
    pub scheme: u32,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub nu: f64,
    pub eta: f64,
    pub dt: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub h3_ceiling: f64,
}

fn system_of(tag: u32) -> Option<System> {
    match tag {
        0 => Some(System::ElectronAniso),
        1 => Some(System::ElectronGeneral),
        2 => Some(System::HallmhdMixed),
        3 => Some(System::HallmhdClassical),
        _ => None,
    }
}

fn unsupported(what: &str, tag: u32) -> i32 {
    set_error(&format!("unsupported {what} tag {tag}"));
    HMHD_ERR_UNSUPPORTED
}

/// Fills `out` with the default parameters of the given model tag.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_config_default(system: u32, out: *mut HmhdSimConfig) -> i32 {
    let Some(sys) = system_of(system) else {
        return unsupported("system", system);
    };
    let spec = ModelSpec::new(sys);
    let step = StepperConfig::new(1.0);
    put(
        out,
        HmhdSimConfig {
            system,
            scheme: 0,
            alpha: spec.alpha,
            beta: spec.beta,
            eps: spec.eps,
            nu: spec.nu,
            eta: spec.eta,
            dt: 1e-3,
            cfl: step.cfl,
            t_end: step.t_end,
            h3_ceiling: step.h3_ceiling,
        },
    )
}

/// Starts a simulation from magnetic data `b` and, for the models that
/// carry one, velocity data `u` (pass null otherwise).  The initial
/// fields are copied; the handles remain owned by the caller.
///
/// # Safety
/// `cfg` and `b` must be valid; `u` must be null or a live field handle
/// on the same grid; `out` receives a handle to release with
/// `hmhd_sim_free`.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_new(
    cfg: *const HmhdSimConfig,
    b: *const HmhdField,
    u: *const HmhdField,
    out: *mut *mut HmhdSim,
) -> i32 {
    let cfg = deref!(cfg);
    let b = deref!(b);
    let u = if u.is_null() {
        None
    } else {
        Some(deref!(u))
    };
    guarded(|| {
        let Some(sys) = system_of(cfg.system) else {
            return unsupported("system", cfg.system);
        };
        let scheme = match cfg.scheme {
            0 => Scheme::IfRk4,
            1 => Scheme::IfRk2,
            t => return unsupported("scheme", t),
        };
        if sys.has_velocity() != u.is_some() {
            return fail(HmhdError::invalid(if u.is_some() {
                "this model carries no velocity field; pass u = NULL"
            } else {
                "this model needs a velocity field; u must not be NULL"
            }));
        }
        let mut spec = ModelSpec::new(sys);
        spec.alpha = cfg.alpha;
        spec.beta = cfg.beta;
        spec.eps = cfg.eps;
        spec.nu = cfg.nu;
        spec.eta = cfg.eta;
        if let Err(e) = spec.validate() {
            return fail(e);
        }
        let mut sc = StepperConfig::new(cfg.t_end);
        sc.scheme = scheme;
        sc.h3_ceiling = cfg.h3_ceiling;
        if cfg.dt > 0.0 {
            sc.dt = DtMode::Fixed(cfg.dt);
        } else {
            if !(cfg.cfl > 0.0) {
                return fail(HmhdError::invalid("adaptive stepping needs cfl > 0"));
            }
            sc.dt = DtMode::Adaptive;
            sc.cfl = cfg.cfl;
        }
        let stepper = match Stepper::new(spec, sc, b.0.grid()) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let state = SimState::new(b.0.clone(), u.map(|uu| uu.0.clone()));
        put(
            out,
            Box::into_raw(Box::new(HmhdSim { stepper, state })),
        )
    })
}

/// Releases a simulation handle; a null handle is a no-op.
///
/// # Safety
/// `s` must be null or a handle obtained from this library that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_free(s: *mut HmhdSim) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Takes one time step and reports the dt actually used.
///
/// # Safety
/// `s` must be a live simulation handle and `dt_taken` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_step(s: *mut HmhdSim, dt_taken: *mut f64) -> i32 {
    let s = deref_mut!(s);
    guarded(|| match s.stepper.step(&mut s.state) {
        Ok(dt) => put(dt_taken, dt),
        Err(e) => fail(e),
    })
}

/// Advances to the configured end time; returns `HMHD_ERR_BLOWUP` when
/// the solution loses regularity first.
///
/// # Safety
/// `s` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_run(s: *mut HmhdSim) -> i32 {
    let s = deref_mut!(s);
    guarded(|| match s.stepper.run(&mut s.state, |_| Ok(())) {
        Ok(()) => HMHD_OK,
        Err(e) => fail(e),
    })
}

/// Current simulation time.
///
/// # Safety
/// `s` must be a live simulation handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_time(s: *const HmhdSim, out: *mut f64) -> i32 {
    let s = deref!(s);
    put(out, s.state.t)
}

/// Total quadratic energy of the evolved fields.
///
/// # Safety
/// `s` must be a live simulation handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_energy(s: *const HmhdSim, out: *mut f64) -> i32 {
    let s = deref!(s);
    guarded(|| put(out, s.state.energy()))
}

/// Relative defect of the energy balance (energy plus accumulated
/// dissipation against the initial energy).
///
/// # Safety
/// `s` must be a live simulation handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_energy_defect(s: *const HmhdSim, out: *mut f64) -> i32 {
    let s = deref!(s);
    guarded(|| put(out, s.state.energy_defect()))
}

/// Homogeneous H^3 seminorm of the magnetic field.
///
/// # Safety
/// `s` must be a live simulation handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_h3(s: *const HmhdSim, out: *mut f64) -> i32 {
    let s = deref!(s);
    guarded(|| put(out, s.state.b.sobolev_seminorm(3.0)))
}

/// Copies the current magnetic field into a fresh field handle.
///
/// # Safety
/// `s` must be a live simulation handle; `out` receives a handle to
/// release with `hmhd_field_free`.
#[no_mangle]
pub unsafe extern "C" fn hmhd_sim_field(s: *const HmhdSim, out: *mut *mut HmhdField) -> i32 {
    let s = deref!(s);
    guarded(|| put(out, Box::into_raw(Box::new(HmhdField(s.state.b.clone())))))
}
