//! C ABI for cuntzlab.
//!
//! Families and states live behind opaque handles returned by the
//! `cuntzlab_family_*` and `cuntzlab_state_*` constructors and released with
//! the matching `*_free`. Every fallible call returns a
//! [`CuntzStatus`]; on failure a message is kept per thread and can be copied
//! out with [`cuntzlab_last_error`]. Vectors cross the boundary as arrays of
//! [`CuntzComplex`] holding coordinates in the orthonormal cylinder basis,
//! index big-endian in the digits.

use cuntzlab::cli::{self, RunOptions};
use cuntzlab::cuntz_rep::IsometryFamily;
use cuntzlab::invariants::eigen_residual;
use cuntzlab::lattice::{CylinderVector, Word};
use cuntzlab::states::{self, ProductState, SequenceFamily, StateSpec};
use cuntzlab::{c64, Error};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuntzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Budget = 3,
    LevelTooLow = 4,
    NotUnitary = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CuntzComplex {
    pub re: f64,
    pub im: f64,
}

impl From<c64> for CuntzComplex {
    fn from(z: c64) -> Self {
        CuntzComplex { re: z.re, im: z.im }
    }
}

impl From<CuntzComplex> for c64 {
    fn from(z: CuntzComplex) -> Self {
        c64::new(z.re, z.im)
    }
}

/// A family of n isometries satisfying the Cuntz relations.
pub struct CuntzFamily(IsometryFamily);

/// A state on the UHF algebra.
pub struct CuntzState(StateSpec);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> CuntzStatus {
    match e {
        Error::Budget { .. } => CuntzStatus::Budget,
        Error::LevelTooLow { .. } => CuntzStatus::LevelTooLow,
        Error::NotUnitary(_) | Error::NotIsometric(_) => CuntzStatus::NotUnitary,
        _ => CuntzStatus::InvalidArgument,
    }
}

struct Fail(CuntzStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CuntzStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CuntzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CuntzStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            CuntzStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn family<'a>(p: *const CuntzFamily) -> Result<&'a IsometryFamily, Fail> {
    p.as_ref().map(|f| &f.0).ok_or_else(|| null("family"))
}

unsafe fn state<'a>(p: *const CuntzState) -> Result<&'a StateSpec, Fail> {
    p.as_ref().map(|s| &s.0).ok_or_else(|| null("state"))
}

fn complex_vec(v: &[CuntzComplex]) -> Vec<c64> {
    v.iter().map(|&z| z.into()).collect()
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(CuntzStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn copy_out<T: Copy>(data: &[T], buf: *mut T, capacity: usize, written: *mut usize) -> Result<(), Fail> {
    out(written, "written")?;
    *written = data.len();
    if data.len() > capacity {
        return Err(Fail(CuntzStatus::BufferTooSmall, format!("need {} entries, capacity {capacity}", data.len())));
    }
    if !data.is_empty() {
        if buf.is_null() {
            return Err(null("buffer"));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
    }
    Ok(())
}

/// Copies the calling thread's last error message, NUL terminated and
/// truncated to `capacity` bytes. Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_last_error(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cuntzlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn put_family(outp: *mut *mut CuntzFamily, f: IsometryFamily) -> Result<(), Fail> {
    unsafe { *out(outp, "out")? = Box::into_raw(Box::new(CuntzFamily(f))) };
    Ok(())
}

/// The Haar family on n letters.
///
/// # Safety
/// `outp` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_haar(n: usize, outp: *mut *mut CuntzFamily) -> CuntzStatus {
    guard(|| put_family(outp, IsometryFamily::haar(n)?))
}

/// The weighted Haar family for a unit vector η of length n.
///
/// # Safety
/// `eta` must be valid for `n` reads and `outp` for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_weighted_haar(
    eta: *const CuntzComplex,
    n: usize,
    outp: *mut *mut CuntzFamily,
) -> CuntzStatus {
    guard(|| put_family(outp, IsometryFamily::weighted_haar(complex_vec(slice(eta, n, "eta")?))?))
}

/// The nearest-neighbor family on n letters.
///
/// # Safety
/// `outp` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_nearest_neighbor(n: usize, outp: *mut *mut CuntzFamily) -> CuntzStatus {
    guard(|| put_family(outp, IsometryFamily::nearest_neighbor(n)?))
}

/// Haar family twisted by the gauge unitaries of the theta-harmonic
/// sequence, truncated after `horizon` slots.
///
/// # Safety
/// `outp` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_theta_gauge(n: usize, horizon: usize, outp: *mut *mut CuntzFamily) -> CuntzStatus {
    guard(|| {
        let u = SequenceFamily::theta_harmonic(n)?.unitary_sequence(horizon)?;
        put_family(outp, IsometryFamily::gauge(u)?)
    })
}

/// # Safety
/// `f` must be null or a handle from a `cuntzlab_family_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_free(f: *mut CuntzFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live family handle; `n` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_base(f: *const CuntzFamily, n: *mut usize) -> CuntzStatus {
    guard(|| {
        *out(n, "n")? = family(f)?.base();
        Ok(())
    })
}

/// Isometry and completeness defects of the Cuntz relations at level m.
///
/// # Safety
/// `f` must be a live family handle; the outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_cuntz_defect(
    f: *const CuntzFamily,
    m: usize,
    isometry: *mut f64,
    completeness: *mut f64,
) -> CuntzStatus {
    guard(|| {
        let (a, b) = family(f)?.cuntz_defect(m)?;
        *out(isometry, "isometry")? = a;
        *out(completeness, "completeness")? = b;
        Ok(())
    })
}

#[allow(clippy::too_many_arguments)]
unsafe fn apply(
    f: *const CuntzFamily,
    star: bool,
    i: usize,
    level: usize,
    input: *const CuntzComplex,
    len: usize,
    buf: *mut CuntzComplex,
    capacity: usize,
    written: *mut usize,
    out_level: *mut usize,
) -> Result<(), Fail> {
    let fam = family(f)?;
    if i >= fam.base() {
        return Err(Fail(CuntzStatus::InvalidArgument, format!("letter {i} out of range for base {}", fam.base())));
    }
    let v = CylinderVector::new(fam.measure().clone(), level, complex_vec(slice(input, len, "input")?))?;
    let w = if star { fam.apply_s_star(i, &v)? } else { fam.apply_s(i, &v)? };
    let lvl = out(out_level, "out_level")?;
    let data: Vec<CuntzComplex> = w.amps().iter().map(|&z| z.into()).collect();
    copy_out(&data, buf, capacity, written)?;
    *lvl = w.level();
    Ok(())
}

/// Applies S_i to a vector of n^level coordinates. The image level is
/// written to `out_level` and its n^out_level coordinates to `buf`; when the
/// buffer is too small `written` still reports the required length.
///
/// # Safety
/// `f` must be a live family handle, `input` valid for `len` reads, `buf`
/// valid for `capacity` writes and `written`, `out_level` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_apply_s(
    f: *const CuntzFamily,
    i: usize,
    level: usize,
    input: *const CuntzComplex,
    len: usize,
    buf: *mut CuntzComplex,
    capacity: usize,
    written: *mut usize,
    out_level: *mut usize,
) -> CuntzStatus {
    guard(|| apply(f, false, i, level, input, len, buf, capacity, written, out_level))
}

/// Applies S_i^*; arguments as for [`cuntzlab_family_apply_s`].
///
/// # Safety
/// As for [`cuntzlab_family_apply_s`].
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_family_apply_s_star(
    f: *const CuntzFamily,
    i: usize,
    level: usize,
    input: *const CuntzComplex,
    len: usize,
    buf: *mut CuntzComplex,
    capacity: usize,
    written: *mut usize,
    out_level: *mut usize,
) -> CuntzStatus {
    guard(|| apply(f, true, i, level, input, len, buf, capacity, written, out_level))
}

/// min over unit ξ at level m of Σ_j ‖S_j^*ξ − λ_j ξ‖², λ of length n.
///
/// # Safety
/// `f` must be a live family handle, `lambda` valid for `n` reads and
/// `residual` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_eigen_residual(
    f: *const CuntzFamily,
    lambda: *const CuntzComplex,
    n: usize,
    m: usize,
    residual: *mut f64,
) -> CuntzStatus {
    guard(|| {
        let fam = family(f)?;
        let r = eigen_residual(fam, &complex_vec(slice(lambda, n, "lambda")?), m)?;
        *out(residual, "residual")? = r.residual;
        Ok(())
    })
}

fn put_state(outp: *mut *mut CuntzState, s: StateSpec) -> Result<(), Fail> {
    unsafe { *out(outp, "out")? = Box::into_raw(Box::new(CuntzState(s))) };
    Ok(())
}

/// The vector state of the weighted Haar family for η.
///
/// # Safety
/// `eta` must be valid for `n` reads and `outp` for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_state_cuntz(eta: *const CuntzComplex, n: usize, outp: *mut *mut CuntzState) -> CuntzStatus {
    guard(|| put_state(outp, StateSpec::cuntz(complex_vec(slice(eta, n, "eta")?))?))
}

/// The nearest-neighbor state on n letters.
///
/// # Safety
/// `outp` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_state_nearest_neighbor(n: usize, outp: *mut *mut CuntzState) -> CuntzStatus {
    guard(|| put_state(outp, StateSpec::nearest_neighbor(n)?))
}

/// Product state over `count` unit site vectors of length n stored back to
/// back; the last vector repeats on all later sites.
///
/// # Safety
/// `vectors` must be valid for `n * count` reads and `outp` for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_state_product(
    vectors: *const CuntzComplex,
    n: usize,
    count: usize,
    outp: *mut *mut CuntzState,
) -> CuntzStatus {
    guard(|| {
        if n == 0 || count == 0 {
            return Err(Fail(CuntzStatus::InvalidArgument, "empty site list".into()));
        }
        let len = n.checked_mul(count).ok_or_else(|| Fail(CuntzStatus::InvalidArgument, "size overflow".into()))?;
        let flat = complex_vec(slice(vectors, len, "vectors")?);
        let fam = SequenceFamily::explicit(flat.chunks(n).map(<[c64]>::to_vec).collect())?;
        put_state(outp, StateSpec::product(ProductState::from_family(fam)))
    })
}

/// # Safety
/// `s` must be null or a live state handle.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_state_free(s: *mut CuntzState) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// ω(s_I s_J^*) for words I, J of length `len`.
///
/// # Safety
/// `s` must be a live state handle, `i` and `j` valid for `len` reads and
/// `value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_state_eval(
    s: *const CuntzState,
    i: *const usize,
    j: *const usize,
    len: usize,
    value: *mut CuntzComplex,
) -> CuntzStatus {
    guard(|| {
        let spec = state(s)?;
        let n = spec.base();
        let wi = Word::new(slice(i, len, "i")?.to_vec(), n)?;
        let wj = Word::new(slice(j, len, "j")?.to_vec(), n)?;
        *out(value, "value")? = states::eval_state(spec, &wi, &wj)?.into();
        Ok(())
    })
}

/// Density matrix on the first k sites, n^k × n^k in row-major order.
///
/// # Safety
/// `s` must be a live state handle, `buf` valid for `capacity` writes and
/// `written` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_state_density(
    s: *const CuntzState,
    k: usize,
    buf: *mut CuntzComplex,
    capacity: usize,
    written: *mut usize,
) -> CuntzStatus {
    guard(|| {
        let rho = states::density_matrix(state(s)?, k)?;
        let m = rho.matrix();
        let data: Vec<CuntzComplex> = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)].into())).collect();
        copy_out(&data, buf, capacity, written)
    })
}

/// Per-site Hellinger affinity Σ √(p_i q_i) of two probability vectors.
///
/// # Safety
/// `p` and `q` must be valid for `n` reads and `affinity` for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_hellinger_affinity(p: *const f64, q: *const f64, n: usize, affinity: *mut f64) -> CuntzStatus {
    guard(|| {
        let r = states::hellinger_singularity(slice(p, n, "p")?, slice(q, n, "q")?, &[])?;
        *out(affinity, "affinity")? = r.affinity;
        Ok(())
    })
}

/// Runs an experiment config as the command line tool does. `out_dir` may
/// be null to use the configured directory. The tool's exit code (0 passed,
/// 1 invariant failure, 2 schema error, 3 budget overflow) goes to
/// `exit_code`; the return value reports only FFI-level failures.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out_dir` null or one, and
/// `exit_code` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cuntzlab_run_config(path: *const c_char, out_dir: *const c_char, exit_code: *mut i32) -> CuntzStatus {
    guard(|| {
        let path = PathBuf::from(string(path, "path")?);
        let dir = if out_dir.is_null() { None } else { Some(PathBuf::from(string(out_dir, "out_dir")?)) };
        let code = out(exit_code, "exit_code")?;
        let outcome = cli::run_file(&path, &RunOptions { out: dir, ..RunOptions::default() });
        *code = outcome.status.code() as i32;
        if outcome.execution.is_none() {
            return Err(Fail(CuntzStatus::Io, outcome.messages.join("; ")));
        }
        Ok(())
    })
}
