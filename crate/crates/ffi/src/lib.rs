//! C ABI for `ma-toolkit`.
//!
//! Every function returns an [`MaStatus`]. On failure the message is available
//! from [`ma_last_error_message`] on the same thread until the next call.
//! Handles are opaque and must be released with their `*_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use ma_toolkit::field_channel::{channel_response, PathSet};
use ma_toolkit::geometry::{PathAngles, Position3D};
use ma_toolkit::sensing::{single_target_crb, ArrayGeometry};
use ma_toolkit::spatial_corr::{jakes_correlation, PortGrid};
use ma_toolkit::{special, Complex64, Error, ErrorKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid argument or configuration.
    InvalidArgument = 2,
    /// Numerical or feasibility failure.
    Numerical = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Path set handle.
pub struct MaPathSet {
    inner: PathSet,
}

/// Array geometry handle.
pub struct MaArray {
    inner: ArrayGeometry,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(e: Error) -> MaStatus {
    set_error(&e.to_string());
    match e.kind() {
        ErrorKind::Config => MaStatus::InvalidArgument,
        ErrorKind::Numerical => MaStatus::Numerical,
        ErrorKind::Io => MaStatus::Io,
    }
}

fn null(what: &str) -> MaStatus {
    set_error(&format!("null pointer: {what}"));
    MaStatus::NullPointer
}

fn guard(f: impl FnOnce() -> MaStatus) -> MaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == MaStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => {
            set_error("internal panic");
            MaStatus::Internal
        }
    }
}

unsafe fn slice_or_empty<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(ptr, len))
    }
}

unsafe fn position(p: *const f64) -> Position3D {
    let s = slice::from_raw_parts(p, 3);
    Position3D::new(s[0], s[1], s[2])
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ma_version() -> *const c_char {
    static V: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(c) => c,
            Err(_) => c"",
        };
    V.as_ptr()
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ma_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a path set. Angles are in radians; the PRM is `n_rx × n_tx`, row-major,
/// given as separate real and imaginary arrays.
#[no_mangle]
pub unsafe extern "C" fn ma_pathset_new(
    n_tx: usize,
    tx_elevation: *const f64,
    tx_azimuth: *const f64,
    n_rx: usize,
    rx_elevation: *const f64,
    rx_azimuth: *const f64,
    prm_re: *const f64,
    prm_im: *const f64,
    wavelength: f64,
    out: *mut *mut MaPathSet,
) -> MaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let (Some(te), Some(ta), Some(re), Some(ra), Some(pr), Some(pi)) = (
            slice_or_empty(tx_elevation, n_tx),
            slice_or_empty(tx_azimuth, n_tx),
            slice_or_empty(rx_elevation, n_rx),
            slice_or_empty(rx_azimuth, n_rx),
            slice_or_empty(prm_re, n_rx * n_tx),
            slice_or_empty(prm_im, n_rx * n_tx),
        ) else {
            return null("input array");
        };
        let angles = |e: &[f64], a: &[f64]| -> Result<Vec<PathAngles>, Error> {
            e.iter()
                .zip(a)
                .map(|(e, a)| PathAngles::new(*e, *a))
                .collect()
        };
        let built = angles(te, ta).and_then(|tx| {
            let rx = angles(re, ra)?;
            let prm = nalgebra::DMatrix::from_fn(n_rx, n_tx, |i, j| {
                Complex64::new(pr[i * n_tx + j], pi[i * n_tx + j])
            });
            PathSet::new(tx, rx, prm, wavelength)
        });
        match built {
            Ok(ps) => {
                *out = Box::into_raw(Box::new(MaPathSet { inner: ps }));
                MaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a path set; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ma_pathset_free(ps: *mut MaPathSet) {
    if !ps.is_null() {
        drop(Box::from_raw(ps));
    }
}

/// Channel between Tx position `t[3]` and Rx position `r[3]` (metres).
#[no_mangle]
pub unsafe extern "C" fn ma_channel_response(
    ps: *const MaPathSet,
    t: *const f64,
    r: *const f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> MaStatus {
    guard(|| {
        if ps.is_null() || t.is_null() || r.is_null() || out_re.is_null() || out_im.is_null() {
            return null("argument");
        }
        let (t, r) = (position(t), position(r));
        if !(t.is_finite() && r.is_finite()) {
            return fail(Error::Domain("positions must be finite".into()));
        }
        let h = channel_response(&(*ps).inner, t, r);
        *out_re = h.re;
        *out_im = h.im;
        MaStatus::Ok
    })
}

/// Bessel function of the first kind, order zero.
#[no_mangle]
pub unsafe extern "C" fn ma_bessel_j0(x: f64, out: *mut f64) -> MaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        if !x.is_finite() {
            return fail(Error::Domain("argument must be finite".into()));
        }
        *out = special::bessel_j0(x);
        MaStatus::Ok
    })
}

/// Jakes correlation of `n` ports over a normalized length `w`, written
/// row-major into `out[n*n]`.
#[no_mangle]
pub unsafe extern "C" fn ma_jakes_correlation(
    n: usize,
    w: f64,
    sigma2: f64,
    out: *mut f64,
) -> MaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let grid = match PortGrid::new(n, w, sigma2) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        let m = jakes_correlation(&grid);
        let dst = slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = m.matrix()[(i, j)];
            }
        }
        MaStatus::Ok
    })
}

/// Array from `n` positions given as `xyz[3*n]` (metres).
#[no_mangle]
pub unsafe extern "C" fn ma_array_new(
    n: usize,
    xyz: *const f64,
    wavelength: f64,
    out: *mut *mut MaArray,
) -> MaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let Some(c) = slice_or_empty(xyz, 3 * n) else {
            return null("xyz");
        };
        let pos = c
            .chunks_exact(3)
            .map(|p| Position3D::new(p[0], p[1], p[2]))
            .collect();
        match ArrayGeometry::new(pos, wavelength) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(MaArray { inner: g }));
                MaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases an array; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ma_array_free(a: *mut MaArray) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Single-target CRB of the x direction cosine and of the azimuth.
#[no_mangle]
pub unsafe extern "C" fn ma_single_target_crb(
    array: *const MaArray,
    elevation: f64,
    azimuth: f64,
    snr: f64,
    snapshots: usize,
    out_spatial_frequency: *mut f64,
    out_angle: *mut f64,
) -> MaStatus {
    guard(|| {
        if array.is_null() || out_spatial_frequency.is_null() || out_angle.is_null() {
            return null("argument");
        }
        let report = PathAngles::new(elevation, azimuth)
            .and_then(|a| single_target_crb(&(*array).inner, a, snr, snapshots));
        match report {
            Ok(r) => {
                *out_spatial_frequency = r.spatial_frequency[0];
                *out_angle = r.angle[0];
                MaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
