//! C ABI for the homoglab library: opaque handles, status codes, and
//! plain-buffer data exchange. The generated header lives in
//! `include/homoglab.h`.
//!
//! Conventions: constructors write a handle through an out-pointer and
//! return a status; every handle has exactly one matching `_free`;
//! array arguments are caller-allocated. All functions are safe to
//! call from multiple threads as long as each handle is used by one
//! thread at a time.

use homoglab::ergodics::{cat_map_step, orbit, TorusPoint};
use homoglab::fields::{
    make_realization, Checkerboard1DSpec, Checkerboard2DSpec, FieldRealization, FieldSpec, Seed,
};
use homoglab::homog::{effective_tensor_ensemble, harmonic_mean_tiles};
use homoglab::solve1d::{solve_exact, Interval, ScaledField, Solution1D, Source1D};
use std::ffi::{c_char, c_void};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    /// A spec or argument failed validation.
    InvalidArgument = 1,
    /// An iterative solve failed or a coefficient left its bounds.
    NumericalFailure = 2,
    /// A required pointer was null.
    NullPointer = 3,
    /// An unexpected internal error (a bug; please report).
    InternalError = 4,
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn hl_status_message(status: HlStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        HlStatus::Ok => b"ok\0",
        HlStatus::InvalidArgument => b"invalid argument\0",
        HlStatus::NumericalFailure => b"numerical failure\0",
        HlStatus::NullPointer => b"null pointer\0",
        HlStatus::InternalError => b"internal error\0",
    };
    msg.as_ptr() as *const c_char
}

fn status_of(e: &homoglab::Error) -> HlStatus {
    use homoglab::Error::*;
    match e {
        InvalidSpec(_) | Config(_) | Io(_) => HlStatus::InvalidArgument,
        CoefficientOutOfRange { .. } | NotConverged { .. } | QuorumNotMet { .. } => {
            HlStatus::NumericalFailure
        }
    }
}

fn guarded<F: FnOnce() -> HlStatus>(f: F) -> HlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => HlStatus::InternalError,
    }
}

/// Opaque coefficient-field realization.
pub struct FieldHandle {
    inner: FieldRealization,
}

/// Opaque 1D solution (grid, u, flux).
pub struct Solution1dHandle {
    inner: Solution1D,
}

unsafe fn slice_args<'a>(
    kappas: *const f64,
    probs: *const f64,
    n_phases: usize,
) -> Option<(&'a [f64], &'a [f64])> {
    if kappas.is_null() || probs.is_null() || n_phases == 0 {
        return None;
    }
    Some((
        std::slice::from_raw_parts(kappas, n_phases),
        std::slice::from_raw_parts(probs, n_phases),
    ))
}

fn emit_field(spec: FieldSpec, seed: u64, out_field: *mut *mut FieldHandle) -> HlStatus {
    if out_field.is_null() {
        return HlStatus::NullPointer;
    }
    match make_realization(&spec, Seed(seed)) {
        Ok(inner) => {
            let handle = Box::into_raw(Box::new(FieldHandle { inner }));
            unsafe { *out_field = handle };
            HlStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Constant coefficient field `a ≡ value`.
///
/// # Safety
/// `out_field` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hl_field_constant(
    value: f64,
    out_field: *mut *mut FieldHandle,
) -> HlStatus {
    guarded(|| emit_field(FieldSpec::Constant { value }, 0, out_field))
}

/// The periodic 1D profile `a(x) = 2 + sin(2πx)`.
///
/// # Safety
/// `out_field` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hl_field_periodic_1d(out_field: *mut *mut FieldHandle) -> HlStatus {
    guarded(|| emit_field(FieldSpec::Periodic1d, 0, out_field))
}

/// Seeded 1D random checkerboard with unit tiles. `probs` must sum
/// to 1; `offset_enabled` draws the stationarizing global offset.
///
/// # Safety
/// `kappas` and `probs` must point to `n_phases` doubles; `out_field`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hl_field_checkerboard_1d(
    kappas: *const f64,
    probs: *const f64,
    n_phases: usize,
    offset_enabled: bool,
    seed: u64,
    out_field: *mut *mut FieldHandle,
) -> HlStatus {
    guarded(|| {
        let Some((k, p)) = (unsafe { slice_args(kappas, probs, n_phases) }) else {
            return HlStatus::NullPointer;
        };
        match Checkerboard1DSpec::new(k.to_vec(), p.to_vec(), offset_enabled) {
            Ok(spec) => emit_field(FieldSpec::Checkerboard1d(spec), seed, out_field),
            Err(e) => status_of(&e),
        }
    })
}

/// Seeded 2D random checkerboard with scalar-isotropic unit tiles.
///
/// # Safety
/// As for [`hl_field_checkerboard_1d`].
#[no_mangle]
pub unsafe extern "C" fn hl_field_checkerboard_2d(
    kappas: *const f64,
    probs: *const f64,
    n_phases: usize,
    offset_enabled: bool,
    seed: u64,
    out_field: *mut *mut FieldHandle,
) -> HlStatus {
    guarded(|| {
        let Some((k, p)) = (unsafe { slice_args(kappas, probs, n_phases) }) else {
            return HlStatus::NullPointer;
        };
        match Checkerboard2DSpec::new(k.to_vec(), p.to_vec(), offset_enabled) {
            Ok(spec) => emit_field(FieldSpec::Checkerboard2d(spec), seed, out_field),
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a field handle. Passing NULL is a no-op.
///
/// # Safety
/// `field` must have been produced by a `hl_field_*` constructor and
/// not freed before.
#[no_mangle]
pub unsafe extern "C" fn hl_field_free(field: *mut FieldHandle) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

/// Evaluates the ε-scaled field `a(x/ε)` at a 1D point.
///
/// # Safety
/// `field` and `out_value` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hl_field_eval_1d(
    field: *const FieldHandle,
    eps: f64,
    x: f64,
    out_value: *mut f64,
) -> HlStatus {
    guarded(|| {
        if field.is_null() || out_value.is_null() {
            return HlStatus::NullPointer;
        }
        let field = unsafe { &*field };
        if !eps.is_finite() || eps <= 0.0 || field.inner.dim() != 1 {
            return HlStatus::InvalidArgument;
        }
        unsafe { *out_value = field.inner.eval_scaled_1d(eps, x) };
        HlStatus::Ok
    })
}

/// Evaluates the ε-scaled field `A(x/ε)` at a 2D point (1D fields are
/// constant along the second axis).
///
/// # Safety
/// `field` and `out_value` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hl_field_eval_2d(
    field: *const FieldHandle,
    eps: f64,
    x1: f64,
    x2: f64,
    out_value: *mut f64,
) -> HlStatus {
    guarded(|| {
        if field.is_null() || out_value.is_null() {
            return HlStatus::NullPointer;
        }
        if !eps.is_finite() || eps <= 0.0 {
            return HlStatus::InvalidArgument;
        }
        let field = unsafe { &*field };
        unsafe { *out_value = field.inner.eval_scaled_2d(eps, x1, x2) };
        HlStatus::Ok
    })
}

/// Closed-form 1D homogenized coefficient `(Σ pᵢ/κᵢ)⁻¹`.
///
/// # Safety
/// `kappas`/`probs` must point to `n_phases` doubles; `out_value` must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn hl_harmonic_mean_tiles(
    kappas: *const f64,
    probs: *const f64,
    n_phases: usize,
    out_value: *mut f64,
) -> HlStatus {
    guarded(|| {
        if out_value.is_null() {
            return HlStatus::NullPointer;
        }
        let Some((k, p)) = (unsafe { slice_args(kappas, probs, n_phases) }) else {
            return HlStatus::NullPointer;
        };
        match Checkerboard1DSpec::new(k.to_vec(), p.to_vec(), false) {
            Ok(_) => {
                unsafe { *out_value = harmonic_mean_tiles(k, p) };
                HlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Source-term callback: `f(x, user_data)`.
pub type HlSource1D = Option<unsafe extern "C" fn(x: f64, user_data: *mut c_void) -> f64>;

struct CallbackSource {
    f: unsafe extern "C" fn(f64, *mut c_void) -> f64,
    user_data: *mut c_void,
}

// The solver invokes the callback from the calling thread only.
unsafe impl Send for CallbackSource {}
unsafe impl Sync for CallbackSource {}

/// Solves `−(a(x/ε) u′)′ = f` on `(s, t)` with homogeneous Dirichlet
/// data. A NULL `source` selects the built-in bench source
/// `f(x) = −3(2x − 1)`.
///
/// # Safety
/// `field` and `out_solution` must be valid; a non-NULL `source` must
/// remain callable for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn hl_solve_1d(
    field: *const FieldHandle,
    eps: f64,
    s: f64,
    t: f64,
    n_cells: usize,
    source: HlSource1D,
    user_data: *mut c_void,
    out_solution: *mut *mut Solution1dHandle,
) -> HlStatus {
    guarded(|| {
        if field.is_null() || out_solution.is_null() {
            return HlStatus::NullPointer;
        }
        let field = unsafe { &*field };
        if field.inner.dim() != 1 || !eps.is_finite() || eps <= 0.0 {
            return HlStatus::InvalidArgument;
        }
        let Ok(domain) = Interval::new(s, t) else {
            return HlStatus::InvalidArgument;
        };
        let src = match source {
            Some(f) => {
                let cb = CallbackSource { f, user_data };
                Source1D::new(move |x| {
                    // Capture the wrapper as a whole so its Send/Sync
                    // impls apply (disjoint capture would grab the raw
                    // pointer field directly).
                    let cb = &cb;
                    unsafe { (cb.f)(x, cb.user_data) }
                })
            }
            None => Source1D::cubic_bench(),
        };
        let coeff = ScaledField {
            realization: &field.inner,
            eps,
        };
        match solve_exact(&coeff, &src, domain, n_cells) {
            Ok(inner) => {
                let handle = Box::into_raw(Box::new(Solution1dHandle { inner }));
                unsafe { *out_solution = handle };
                HlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Number of sample points in a 1D solution.
///
/// # Safety
/// `solution` must be a live handle (NULL returns 0).
#[no_mangle]
pub unsafe extern "C" fn hl_solution_1d_len(solution: *const Solution1dHandle) -> usize {
    if solution.is_null() {
        return 0;
    }
    unsafe { &*solution }.inner.grid.len()
}

/// Copies the sample points, solution values, and flux values into
/// caller buffers of length `hl_solution_1d_len`. Any destination may
/// be NULL to skip that column.
///
/// # Safety
/// Non-NULL buffers must hold at least `hl_solution_1d_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_solution_1d_copy(
    solution: *const Solution1dHandle,
    out_x: *mut f64,
    out_u: *mut f64,
    out_sigma: *mut f64,
) -> HlStatus {
    guarded(|| {
        if solution.is_null() {
            return HlStatus::NullPointer;
        }
        let sol = &unsafe { &*solution }.inner;
        let n = sol.grid.len();
        unsafe {
            if !out_x.is_null() {
                std::ptr::copy_nonoverlapping(sol.grid.as_ptr(), out_x, n);
            }
            if !out_u.is_null() {
                std::ptr::copy_nonoverlapping(sol.u.as_ptr(), out_u, n);
            }
            if !out_sigma.is_null() {
                std::ptr::copy_nonoverlapping(sol.flux.as_ptr(), out_sigma, n);
            }
        }
        HlStatus::Ok
    })
}

/// Releases a 1D solution handle. Passing NULL is a no-op.
///
/// # Safety
/// `solution` must come from [`hl_solve_1d`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hl_solution_1d_free(solution: *mut Solution1dHandle) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Ensemble periodization estimate of the 2D effective tensor for a
/// checkerboard law. Writes the entry means and standard errors
/// row-major into 4-double buffers.
///
/// # Safety
/// `kappas`/`probs` must point to `n_phases` doubles; `out_mean` and
/// `out_stderr` must each hold 4 doubles (`out_stderr` may be NULL).
#[no_mangle]
pub unsafe extern "C" fn hl_effective_tensor_2d(
    kappas: *const f64,
    probs: *const f64,
    n_phases: usize,
    offset_enabled: bool,
    torus_side: u32,
    ensemble: u32,
    seed: u64,
    elements_per_tile: u32,
    tol: f64,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> HlStatus {
    guarded(|| {
        if out_mean.is_null() {
            return HlStatus::NullPointer;
        }
        let Some((k, p)) = (unsafe { slice_args(kappas, probs, n_phases) }) else {
            return HlStatus::NullPointer;
        };
        let spec = match Checkerboard2DSpec::new(k.to_vec(), p.to_vec(), offset_enabled) {
            Ok(s) => FieldSpec::Checkerboard2d(s),
            Err(e) => return status_of(&e),
        };
        if torus_side < 2
            || ensemble < 2
            || elements_per_tile == 0
            || !tol.is_finite()
            || tol <= 0.0
        {
            return HlStatus::InvalidArgument;
        }
        match effective_tensor_ensemble(
            &spec,
            torus_side as usize,
            ensemble as usize,
            Seed(seed),
            elements_per_tile as usize,
            tol,
        ) {
            Ok(t) => {
                for i in 0..2 {
                    for j in 0..2 {
                        unsafe {
                            *out_mean.add(2 * i + j) = t.entries[i][j];
                            if !out_stderr.is_null() {
                                *out_stderr.add(2 * i + j) = t.stderr[i][j];
                            }
                        }
                    }
                }
                HlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Writes the cat-map orbit `T(x), …, T^n(x)` as interleaved pairs
/// into a `2n`-double buffer.
///
/// # Safety
/// `out_xy` must hold `2 * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_cat_map_orbit(
    x1: f64,
    x2: f64,
    n: usize,
    out_xy: *mut f64,
) -> HlStatus {
    guarded(|| {
        if out_xy.is_null() {
            return HlStatus::NullPointer;
        }
        if n == 0 {
            return HlStatus::InvalidArgument;
        }
        let orb = orbit(TorusPoint::new(x1, x2), n);
        for (i, p) in orb.iter().enumerate() {
            unsafe {
                *out_xy.add(2 * i) = p.x1;
                *out_xy.add(2 * i + 1) = p.x2;
            }
        }
        HlStatus::Ok
    })
}

/// One cat-map step, written through out-pointers.
///
/// # Safety
/// `out_x1` and `out_x2` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hl_cat_map_step(
    x1: f64,
    x2: f64,
    out_x1: *mut f64,
    out_x2: *mut f64,
) -> HlStatus {
    guarded(|| {
        if out_x1.is_null() || out_x2.is_null() {
            return HlStatus::NullPointer;
        }
        let p = cat_map_step(TorusPoint::new(x1, x2));
        unsafe {
            *out_x1 = p.x1;
            *out_x2 = p.x2;
        }
        HlStatus::Ok
    })
}
