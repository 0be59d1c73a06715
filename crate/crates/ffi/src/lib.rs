//! C ABI for `tsed-core`.
//!
//! Every function returns a [`TsedStatus`]. On failure a message is kept per thread and can
//! be read with [`tsed_last_error_message`]. Handles are opaque; free them with the matching
//! `*_free` function. Arrays are row-major `double`s; matches are packed as `u1 v1 u2 v2`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::os::raw::c_double;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::Point2;
use tsed_core::camera::{project_point, ray_direction, Camera, Extrinsics, Intrinsics, Projection};
use tsed_core::epipolar::{sed, DEFAULT_BASELINE_EPSILON};
use tsed_core::matching::{Correspondence, MatchSet, Provenance};
use tsed_core::metric::{
    pair_consistency, ConsistencyReport, PairGeometry, PairVerdict, Status, Thresholds,
};
use tsed_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsedStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidRotation = 3,
    DegenerateBaseline = 4,
    DegenerateLine = 5,
    EmptyInput = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsedPairStatus {
    Consistent = 0,
    InsufficientMatches = 1,
    ExceedsError = 2,
    DegenerateBaseline = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsedPairResult {
    pub status: TsedPairStatus,
    /// Correspondences with a finite distance.
    pub n_matches: usize,
    /// NaN when no distance was computed.
    pub median_sed: c_double,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TsedCounts {
    pub consistent: usize,
    pub insufficient_matches: usize,
    pub exceeds_error: usize,
    pub degenerate_baseline: usize,
}

/// Opaque pinhole camera.
pub struct TsedCamera {
    inner: Camera,
}

/// Opaque accumulator of pair verdicts under fixed thresholds.
pub struct TsedEvaluator {
    thresholds: Thresholds,
    verdicts: Vec<PairVerdict>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(TsedStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidRotation { .. } | Error::NonRotation { .. } => {
                TsedStatus::InvalidRotation
            }
            Error::DegenerateBaseline { .. } => TsedStatus::DegenerateBaseline,
            Error::DegenerateLine => TsedStatus::DegenerateLine,
            Error::EmptyInput | Error::EmptyImage => TsedStatus::EmptyInput,
            e if e.is_io() => TsedStatus::Io,
            _ => TsedStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TsedStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TsedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsedStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            TsedStatus::Panic
        }
    }
}

unsafe fn array<'a, const N: usize>(
    p: *const c_double,
    what: &str,
) -> Result<&'a [f64; N], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(&*(p as *const [f64; N]))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn camera<'a>(p: *const TsedCamera, what: &str) -> Result<&'a Camera, Failure> {
    p.as_ref().map(|c| &c.inner).ok_or_else(|| null(what))
}

unsafe fn match_set(matches: *const c_double, n: usize) -> Result<MatchSet, Failure> {
    if n == 0 {
        return Ok(MatchSet::empty((0, 1), Provenance::Ingested));
    }
    if matches.is_null() {
        return Err(null("matches"));
    }
    let values = std::slice::from_raw_parts(matches, 4 * n);
    let correspondences = values
        .chunks_exact(4)
        .map(|m| Correspondence::new(Point2::new(m[0], m[1]), Point2::new(m[2], m[3]), 1.0))
        .collect();
    Ok(MatchSet::new(
        (0, 1),
        correspondences,
        Provenance::Ingested,
    )?)
}

fn pair_result(v: &PairVerdict) -> TsedPairResult {
    TsedPairResult {
        status: match v.status {
            Status::Consistent => TsedPairStatus::Consistent,
            Status::InsufficientMatches => TsedPairStatus::InsufficientMatches,
            Status::ExceedsError => TsedPairStatus::ExceedsError,
            Status::DegenerateBaseline => TsedPairStatus::DegenerateBaseline,
        },
        n_matches: v.n_matches,
        median_sed: v.median_sed.unwrap_or(f64::NAN),
    }
}

unsafe fn verdict(
    cam1: *const TsedCamera,
    cam2: *const TsedCamera,
    matches: *const c_double,
    n_matches: usize,
    thresholds: &Thresholds,
) -> Result<PairVerdict, Failure> {
    let c1 = camera(cam1, "cam1")?;
    let c2 = camera(cam2, "cam2")?;
    let set = match_set(matches, n_matches)?;
    let geometry = PairGeometry::from_cameras(c1, c2, DEFAULT_BASELINE_EPSILON)?;
    Ok(pair_consistency(&set, &geometry, thresholds))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tsed_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf` (truncated, always
/// NUL-terminated when `len > 0`). Returns the buffer size needed for the full message,
/// or 0 when there is no message.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tsed_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(message) = slot.as_ref() else {
            return 0;
        };
        let bytes = message.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len) - 1;
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a camera from intrinsics and a world-to-camera pose `x_cam = R x_world + t`.
///
/// # Safety
/// `rotation` must point to 9 doubles, `translation` to 3, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsed_camera_new(
    fx: c_double,
    fy: c_double,
    cx: c_double,
    cy: c_double,
    width: u32,
    height: u32,
    rotation: *const c_double,
    translation: *const c_double,
    out: *mut *mut TsedCamera,
) -> TsedStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = ptr::null_mut();
        let r = array::<9>(rotation, "rotation")?;
        let t = array::<3>(translation, "translation")?;
        let intrinsics = Intrinsics::new(fx, fy, cx, cy, width, height)?;
        let inner = Camera::new(intrinsics, Extrinsics::from_row_major(r, t)?)?;
        *out = Box::into_raw(Box::new(TsedCamera { inner }));
        Ok(())
    })
}

/// # Safety
/// `camera` must be null or a handle from [`tsed_camera_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsed_camera_free(camera: *mut TsedCamera) {
    if !camera.is_null() {
        drop(Box::from_raw(camera));
    }
}

/// World position of the camera center.
///
/// # Safety
/// `camera` must be a live handle and `out` must point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tsed_camera_center(
    camera: *const TsedCamera,
    out: *mut c_double,
) -> TsedStatus {
    guard(|| {
        let c = self::camera(camera, "camera")?.center();
        let out = self::out(out as *mut [f64; 3], "out")?;
        *out = [c.x, c.y, c.z];
        Ok(())
    })
}

/// Projects a world point. `visible` is set to 0 and `out` left untouched when the point
/// is behind the camera.
///
/// # Safety
/// `point` must point to 3 doubles, `out` to 2 writable doubles, `visible` to an int.
#[no_mangle]
pub unsafe extern "C" fn tsed_camera_project(
    camera: *const TsedCamera,
    point: *const c_double,
    out: *mut c_double,
    visible: *mut i32,
) -> TsedStatus {
    guard(|| {
        let cam = self::camera(camera, "camera")?;
        let x = array::<3>(point, "point")?;
        let out = self::out(out as *mut [f64; 2], "out")?;
        let visible = self::out(visible, "visible")?;
        match project_point(cam, &nalgebra::Point3::new(x[0], x[1], x[2])) {
            Projection::Visible(p) => {
                *out = [p.x, p.y];
                *visible = 1;
            }
            Projection::BehindCamera => *visible = 0,
        }
        Ok(())
    })
}

/// Unit world-space direction of the ray through pixel `(u, v)`.
///
/// # Safety
/// `camera` must be a live handle and `out` must point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tsed_camera_ray_direction(
    camera: *const TsedCamera,
    u: c_double,
    v: c_double,
    out: *mut c_double,
) -> TsedStatus {
    guard(|| {
        let d = ray_direction(self::camera(camera, "camera")?, u, v);
        let out = self::out(out as *mut [f64; 3], "out")?;
        *out = [d.x, d.y, d.z];
        Ok(())
    })
}

/// Fundamental matrix mapping pixels of `cam1` to epipolar lines in `cam2`, row-major and
/// scaled so its largest-magnitude entry is +1.
///
/// # Safety
/// Both handles must be live and `out` must point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tsed_fundamental(
    cam1: *const TsedCamera,
    cam2: *const TsedCamera,
    out: *mut c_double,
) -> TsedStatus {
    guard(|| {
        let c1 = camera(cam1, "cam1")?;
        let c2 = camera(cam2, "cam2")?;
        let out = self::out(out as *mut [f64; 9], "out")?;
        *out = tsed_core::epipolar::fundamental_from_cameras(c1, c2)?.row_major();
        Ok(())
    })
}

/// Symmetric epipolar distance of `p` (image 1) and `q` (image 2) under row-major `f`.
///
/// # Safety
/// `f` must point to 9 doubles, `p` and `q` to 2 each, `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn tsed_sed(
    f: *const c_double,
    p: *const c_double,
    q: *const c_double,
    out: *mut c_double,
) -> TsedStatus {
    guard(|| {
        let f = array::<9>(f, "f")?;
        let p = array::<2>(p, "p")?;
        let q = array::<2>(q, "q")?;
        let out = self::out(out, "out")?;
        let fm = tsed_core::epipolar::FundamentalMatrix::from_matrix(
            nalgebra::Matrix3::from_row_slice(f),
            (0, 0),
            (0, 0),
        )?;
        *out = sed(&Point2::new(p[0], p[1]), &Point2::new(q[0], q[1]), &fm)?;
        Ok(())
    })
}

/// Verdict for one frame pair given `n_matches` packed correspondences.
///
/// # Safety
/// Both handles must be live, `matches` must hold `4 * n_matches` doubles (or be null when
/// `n_matches` is 0) and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsed_pair_consistency(
    cam1: *const TsedCamera,
    cam2: *const TsedCamera,
    matches: *const c_double,
    n_matches: usize,
    t_matches: usize,
    t_error: c_double,
    out: *mut TsedPairResult,
) -> TsedStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let th = Thresholds::new(t_matches, t_error)?;
        *out = pair_result(&verdict(cam1, cam2, matches, n_matches, &th)?);
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsed_evaluator_new(
    t_matches: usize,
    t_error: c_double,
    out: *mut *mut TsedEvaluator,
) -> TsedStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = ptr::null_mut();
        let thresholds = Thresholds::new(t_matches, t_error)?;
        *out = Box::into_raw(Box::new(TsedEvaluator {
            thresholds,
            verdicts: Vec::new(),
        }));
        Ok(())
    })
}

/// # Safety
/// `evaluator` must be null or a handle from [`tsed_evaluator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsed_evaluator_free(evaluator: *mut TsedEvaluator) {
    if !evaluator.is_null() {
        drop(Box::from_raw(evaluator));
    }
}

/// Scores one pair and adds it to the running totals. `out` may be null.
///
/// # Safety
/// As for [`tsed_pair_consistency`]; `evaluator` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tsed_evaluator_push_pair(
    evaluator: *mut TsedEvaluator,
    cam1: *const TsedCamera,
    cam2: *const TsedCamera,
    matches: *const c_double,
    n_matches: usize,
    out: *mut TsedPairResult,
) -> TsedStatus {
    guard(|| {
        let ev = self::out(evaluator, "evaluator")?;
        let v = verdict(cam1, cam2, matches, n_matches, &ev.thresholds)?;
        if let Some(out) = out.as_mut() {
            *out = pair_result(&v);
        }
        ev.verdicts.push(v);
        Ok(())
    })
}

/// Consistent pairs over pairs with a usable baseline; 0 when there are none.
///
/// # Safety
/// `evaluator` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsed_evaluator_fraction(
    evaluator: *const TsedEvaluator,
    out: *mut c_double,
) -> TsedStatus {
    guard(|| {
        let ev = evaluator.as_ref().ok_or_else(|| null("evaluator"))?;
        *self::out(out, "out")? = report(ev).fraction;
        Ok(())
    })
}

/// # Safety
/// `evaluator` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsed_evaluator_counts(
    evaluator: *const TsedEvaluator,
    out: *mut TsedCounts,
) -> TsedStatus {
    guard(|| {
        let ev = evaluator.as_ref().ok_or_else(|| null("evaluator"))?;
        let c = report(ev).counts;
        *self::out(out, "out")? = TsedCounts {
            consistent: c.consistent,
            insufficient_matches: c.insufficient_matches,
            exceeds_error: c.exceeds_error,
            degenerate_baseline: c.degenerate_baseline,
        };
        Ok(())
    })
}

fn report(ev: &TsedEvaluator) -> ConsistencyReport {
    ConsistencyReport::from_verdicts(ev.verdicts.clone(), ev.thresholds)
}
