//! C ABI for the vortexkin workbench.
//!
//! Opaque handles wrap the long-lived objects (torus kernels, mean-field
//! equilibria); functions return a `VkStatus` code and write results through
//! out-pointers. The last error message is kept in thread-local storage and
//! can be copied out with [`vk_last_error_message`]. The generated header
//! lives at `include/vortexkin.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::path::Path;
use std::ptr;

use vortexkin::effective::{diffusion_matrix_torus, next_order_b, wave_evolve};
use vortexkin::grid::RadialGrid;
use vortexkin::kernels::{ExternalPotential, PlaneKernel, TorusDensity, TorusKernel};
use vortexkin::meanfield::{
    classify_equilibrium, solve_mu_beta, EquilibriumClass, EquilibriumProfile,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    Io = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn classify(err: &vortexkin::Error) -> VkStatus {
    match err {
        vortexkin::Error::Config(_) | vortexkin::Error::Kernel(_) => VkStatus::InvalidArgument,
        vortexkin::Error::Io(_) => VkStatus::Io,
        _ => VkStatus::NumericalFailure,
    }
}

/// Copy the last error message into `buf` (truncated to `len` bytes,
/// always NUL-terminated). Returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes (or be NULL with `len` 0).
#[no_mangle]
pub unsafe extern "C" fn vk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let guard = e.borrow();
        let msg = guard.as_ref().map(|c| c.as_bytes()).unwrap_or(b"");
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque torus kernel handle.
pub struct VkTorusKernel(TorusKernel);

/// Build a torus kernel from `n` cosine entries (k1[i], k2[i], amp[i]).
///
/// # Safety
/// `k1`, `k2`, `amp` must point to `n` readable elements; `out` must be a
/// valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vk_torus_kernel_new(
    k1: *const i64,
    k2: *const i64,
    amp: *const f64,
    n: usize,
    out: *mut *mut VkTorusKernel,
) -> VkStatus {
    if out.is_null() || (n > 0 && (k1.is_null() || k2.is_null() || amp.is_null())) {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    let mut table = Vec::with_capacity(n);
    for i in 0..n {
        table.push(([*k1.add(i), *k2.add(i)], *amp.add(i)));
    }
    match TorusKernel::new(&table) {
        Ok(k) => {
            *out = Box::into_raw(Box::new(VkTorusKernel(k)));
            VkStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            classify(&e)
        }
    }
}

/// # Safety
/// `k` must be a pointer from [`vk_torus_kernel_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vk_torus_kernel_free(k: *mut VkTorusKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Force K(x) of a torus kernel; writes 2 components.
///
/// # Safety
/// `k` must be a live kernel handle; `force_out` must point to 2 writable f64.
#[no_mangle]
pub unsafe extern "C" fn vk_torus_kernel_force(
    k: *const VkTorusKernel,
    x0: f64,
    x1: f64,
    force_out: *mut f64,
) -> VkStatus {
    if k.is_null() || force_out.is_null() {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    let f = (*k).0.eval_force([x0, x1]);
    *force_out = f[0];
    *force_out.add(1) = f[1];
    VkStatus::Ok
}

/// Diffusion matrix A = ∫K⊗K (row-major 2×2) of a torus kernel.
///
/// # Safety
/// `k` must be a live kernel handle; `a_out` must point to 4 writable f64.
#[no_mangle]
pub unsafe extern "C" fn vk_torus_diffusion_matrix(
    k: *const VkTorusKernel,
    a_out: *mut f64,
) -> VkStatus {
    if k.is_null() || a_out.is_null() {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    let a = diffusion_matrix_torus(&(*k).0);
    for i in 0..2 {
        for j in 0..2 {
            *a_out.add(2 * i + j) = a.m[i][j];
        }
    }
    VkStatus::Ok
}

/// Next-order wave correction matrix B (row-major 2×2).
///
/// # Safety
/// `k` must be a live kernel handle; `b_out` must point to 4 writable f64.
#[no_mangle]
pub unsafe extern "C" fn vk_torus_next_order_b(
    k: *const VkTorusKernel,
    b_out: *mut f64,
) -> VkStatus {
    if k.is_null() || b_out.is_null() {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    let b = next_order_b(&(*k).0);
    for i in 0..2 {
        for j in 0..2 {
            *b_out.add(2 * i + j) = b.m[i][j];
        }
    }
    VkStatus::Ok
}

/// Modal wave evolution for the density 1 + amp·cos(x₁): writes the
/// (1,0)-mode coefficient f̂°·cos(√(kᵀAk)·τ) at each tau.
///
/// # Safety
/// `k` must be a live kernel handle; `taus` must point to `n_tau` readable
/// f64 and `coeff_out` to `n_tau` writable f64.
#[no_mangle]
pub unsafe extern "C" fn vk_wave_mode_series(
    k: *const VkTorusKernel,
    amp: f64,
    taus: *const f64,
    n_tau: usize,
    coeff_out: *mut f64,
) -> VkStatus {
    if k.is_null() || taus.is_null() || coeff_out.is_null() {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    let f0 = match TorusDensity::new(&[([1, 0], amp)]) {
        Ok(f) => f,
        Err(e) => {
            set_error(&e.to_string());
            return VkStatus::InvalidArgument;
        }
    };
    let a = diffusion_matrix_torus(&(*k).0);
    let tau_grid: Vec<f64> = (0..n_tau).map(|i| *taus.add(i)).collect();
    match wave_evolve(&f0, &a, &tau_grid) {
        Ok(sol) => {
            let pos = sol.modes.iter().position(|&m| m == [1, 0]).unwrap();
            for (i, row) in sol.coeffs.iter().enumerate() {
                *coeff_out.add(i) = row[pos];
            }
            VkStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            classify(&e)
        }
    }
}

/// Opaque mean-field equilibrium handle.
pub struct VkEquilibrium(EquilibriumProfile);

/// Solve the mean-field fixed point for V = c2·r²/2 + c4·r⁴/4 and a
/// Gaussian interaction W = w_amp·exp(-r²/(2·w_width²)).
///
/// # Safety
/// `out` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vk_equilibrium_solve(
    beta: f64,
    c2: f64,
    c4: f64,
    w_amp: f64,
    w_width: f64,
    r_max: f64,
    n_panels: usize,
    out: *mut *mut VkEquilibrium,
) -> VkStatus {
    if out.is_null() {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    let run = || -> vortexkin::Result<EquilibriumProfile> {
        let grid = RadialGrid::gauss_legendre(r_max, n_panels.max(1), 8);
        let v = ExternalPotential::Quartic { c2, c4 };
        let w = PlaneKernel::gaussian(w_amp, w_width)?;
        solve_mu_beta(&v, Some(&w), beta, &grid, 1e-11, 400)
    };
    match run() {
        Ok(p) => {
            *out = Box::into_raw(Box::new(VkEquilibrium(p)));
            VkStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            classify(&e)
        }
    }
}

/// # Safety
/// `p` must be a pointer from [`vk_equilibrium_solve`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vk_equilibrium_free(p: *mut VkEquilibrium) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// μ_β(r) by interpolation.
///
/// # Safety
/// `p` must be a live equilibrium handle; `mu_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vk_equilibrium_mu(
    p: *const VkEquilibrium,
    r: f64,
    mu_out: *mut f64,
) -> VkStatus {
    if p.is_null() || mu_out.is_null() {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    *mu_out = (*p).0.interp_mu(r);
    VkStatus::Ok
}

/// Equilibrium classification: 0 = Gaussian, 1 = non-degenerate, 2 = other;
/// the reported constant R is written to `r_out`.
///
/// # Safety
/// `p` must be a live equilibrium handle; `class_out`/`r_out` writable.
#[no_mangle]
pub unsafe extern "C" fn vk_equilibrium_classify(
    p: *const VkEquilibrium,
    tol: f64,
    class_out: *mut c_int,
    r_out: *mut f64,
) -> VkStatus {
    if p.is_null() || class_out.is_null() || r_out.is_null() {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    let (class, _) = classify_equilibrium(&(*p).0, tol);
    let (code, rc) = match class {
        EquilibriumClass::Gaussian { r_const } => (0, r_const),
        EquilibriumClass::NonDegenerate { r_const } => (1, r_const),
        EquilibriumClass::Other => (2, f64::NAN),
    };
    *class_out = code;
    *r_out = rc;
    VkStatus::Ok
}

/// Run an experiment config file end-to-end (same pipeline as the CLI `run`
/// subcommand); Ok when every stage and check passed.
///
/// # Safety
/// `config_path` must be a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn vk_run_experiment(config_path: *const c_char) -> VkStatus {
    if config_path.is_null() {
        set_error("null pointer");
        return VkStatus::NullPointer;
    }
    let path = match CStr::from_ptr(config_path).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("config path is not valid UTF-8");
            return VkStatus::InvalidArgument;
        }
    };
    match vortexkin::cli::run_experiment(Path::new(path)) {
        Ok(m) if m.all_green() => VkStatus::Ok,
        Ok(_) => {
            set_error("run finished with failed checks");
            VkStatus::NumericalFailure
        }
        Err(e) => {
            set_error(&e.to_string());
            classify(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_roundtrip_through_c_abi() {
        let k1 = [1i64, 0];
        let k2 = [0i64, 1];
        let amp = [1.0f64, 1.0];
        let mut handle: *mut VkTorusKernel = ptr::null_mut();
        unsafe {
            assert_eq!(
                vk_torus_kernel_new(k1.as_ptr(), k2.as_ptr(), amp.as_ptr(), 2, &mut handle),
                VkStatus::Ok
            );
            let mut f = [0.0f64; 2];
            assert_eq!(
                vk_torus_kernel_force(handle, std::f64::consts::FRAC_PI_2, 0.0, f.as_mut_ptr()),
                VkStatus::Ok
            );
            assert!((f[0]).abs() < 1e-14 && (f[1] - 1.0).abs() < 1e-14);
            let mut a = [0.0f64; 4];
            assert_eq!(vk_torus_diffusion_matrix(handle, a.as_mut_ptr()), VkStatus::Ok);
            assert!((a[0] - 0.5).abs() < 1e-14 && (a[3] - 0.5).abs() < 1e-14);
            vk_torus_kernel_free(handle);
        }
    }

    #[test]
    fn invalid_kernel_reports_error_message() {
        let k1 = [0i64];
        let k2 = [0i64];
        let amp = [1.0f64];
        let mut handle: *mut VkTorusKernel = ptr::null_mut();
        unsafe {
            let st = vk_torus_kernel_new(k1.as_ptr(), k2.as_ptr(), amp.as_ptr(), 1, &mut handle);
            assert_eq!(st, VkStatus::InvalidArgument);
            let mut buf = [0 as c_char; 256];
            let n = vk_last_error_message(buf.as_mut_ptr(), buf.len());
            assert!(n > 0);
            let msg = CStr::from_ptr(buf.as_ptr()).to_string_lossy();
            assert!(msg.contains("zero mode"), "{msg}");
        }
    }

    #[test]
    fn equilibrium_through_c_abi() {
        let mut handle: *mut VkEquilibrium = ptr::null_mut();
        unsafe {
            let st = vk_equilibrium_solve(0.7, 1.0, 1.0, 0.0, 1.0, 4.5, 18, &mut handle);
            assert_eq!(st, VkStatus::Ok);
            let mut mu = 0.0;
            assert_eq!(vk_equilibrium_mu(handle, 0.5, &mut mu), VkStatus::Ok);
            assert!(mu > 0.0);
            let (mut class, mut r) = (-1 as c_int, 0.0f64);
            assert_eq!(vk_equilibrium_classify(handle, 1e-3, &mut class, &mut r), VkStatus::Ok);
            assert_eq!(class, 1); // quartic potential → non-degenerate
            vk_equilibrium_free(handle);
        }
    }

    #[test]
    fn wave_series_through_c_abi() {
        let k1 = [1i64, 0];
        let k2 = [0i64, 1];
        let amp = [1.0f64, 1.0];
        let mut handle: *mut VkTorusKernel = ptr::null_mut();
        unsafe {
            vk_torus_kernel_new(k1.as_ptr(), k2.as_ptr(), amp.as_ptr(), 2, &mut handle);
            let taus = [0.0f64, 1.0];
            let mut out = [0.0f64; 2];
            assert_eq!(
                vk_wave_mode_series(handle, 0.5, taus.as_ptr(), 2, out.as_mut_ptr()),
                VkStatus::Ok
            );
            assert!((out[0] - 0.25).abs() < 1e-14);
            // f̂(τ) = 0.25·cos(τ/√2)
            assert!((out[1] - 0.25 * (1.0f64 / 2.0f64.sqrt()).cos()).abs() < 1e-14);
            vk_torus_kernel_free(handle);
        }
    }
}
