//! C ABI over `cca-core`.
//!
//! Engines are exposed through opaque handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns a
//! [`CcaStatus`] and writes results through out-pointers; panics are caught
//! at the boundary and reported as [`CcaStatus::Internal`].

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cca_core::lattice1d::{self, Config1D, World1D};
use cca_core::theory::{self, LimitLawParams};
use cca_core::{rng_from_seed, EngineError, SimRng};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    EmptyWorld = 3,
    QueueEmpty = 4,
    InvalidArgument = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

impl From<&EngineError> for CcaStatus {
    fn from(e: &EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(_) | EngineError::TooLarge { .. } => CcaStatus::InvalidConfig,
            EngineError::EmptyWorld => CcaStatus::EmptyWorld,
            EngineError::QueueEmpty => CcaStatus::QueueEmpty,
            _ => CcaStatus::Internal,
        }
    }
}

/// Static, NUL-terminated description of a status code.
#[no_mangle]
pub extern "C" fn cca_status_message(status: CcaStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        CcaStatus::Ok => b"ok\0",
        CcaStatus::NullPointer => b"null pointer argument\0",
        CcaStatus::InvalidConfig => b"invalid configuration\0",
        CcaStatus::EmptyWorld => b"no occupied site in the initial configuration\0",
        CcaStatus::QueueEmpty => b"event queue is empty\0",
        CcaStatus::InvalidArgument => b"invalid argument\0",
        CcaStatus::BufferTooSmall => b"output buffer too small\0",
        CcaStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}

/// Parameters of a one-dimensional run. A non-positive `rate_cap` means no
/// cap.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcaConfig1D {
    pub alpha: f64,
    pub p: f64,
    pub length: usize,
    pub t_max: f64,
    pub guard_fraction: f64,
    pub rate_cap: f64,
    pub seed: u64,
}

impl CcaConfig1D {
    fn to_core(self) -> Config1D {
        let mut c = Config1D::new(self.alpha, self.p, self.length, self.t_max);
        c.seed = self.seed;
        c.guard_fraction = self.guard_fraction;
        c.rate_cap = (self.rate_cap > 0.0).then_some(self.rate_cap);
        c
    }
}

/// Default parameters: `alpha = 0`, `p = 1/2`, `L = 1024`, `t_max = 1`,
/// guard fraction 1/4, no rate cap, seed 0.
#[no_mangle]
pub extern "C" fn cca_config1d_default() -> CcaConfig1D {
    CcaConfig1D {
        alpha: 0.0,
        p: 0.5,
        length: 1024,
        t_max: 1.0,
        guard_fraction: 0.25,
        rate_cap: 0.0,
        seed: 0,
    }
}

fn guarded<F: FnOnce() -> CcaStatus>(f: F) -> CcaStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(CcaStatus::Internal)
}

/// Opaque one-dimensional world together with its random stream.
pub struct CcaWorld1D {
    world: World1D,
    rng: SimRng,
}

/// Builds a world from `config`, seeded with `config.seed`.
///
/// # Safety
/// `config` must point to a valid `CcaConfig1D`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cca_world1d_new(
    config: *const CcaConfig1D,
    out: *mut *mut CcaWorld1D,
) -> CcaStatus {
    if config.is_null() || out.is_null() {
        return CcaStatus::NullPointer;
    }
    guarded(|| {
        let config = (*config).to_core();
        let mut rng = rng_from_seed(config.seed);
        match World1D::init(&config, &mut rng) {
            Ok(world) => {
                *out = Box::into_raw(Box::new(CcaWorld1D { world, rng }));
                CcaStatus::Ok
            }
            Err(e) => {
                *out = ptr::null_mut();
                CcaStatus::from(&e)
            }
        }
    })
}

/// Releases a world; null is ignored.
///
/// # Safety
/// `world` must be null or a handle from [`cca_world1d_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cca_world1d_free(world: *mut CcaWorld1D) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Processes one queued event. `out_applied` (optional) receives 0 when
/// the event was stale and nothing changed.
///
/// # Safety
/// `world` must be a live handle; `out_applied` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cca_world1d_step(world: *mut CcaWorld1D, out_applied: *mut i32) -> CcaStatus {
    let Some(w) = world.as_mut() else {
        return CcaStatus::NullPointer;
    };
    guarded(|| match w.world.step(&mut w.rng) {
        Ok(report) => {
            if !out_applied.is_null() {
                *out_applied = i32::from(!report.is_stale());
            }
            CcaStatus::Ok
        }
        Err(e) => CcaStatus::from(&e),
    })
}

/// Processes every event up to time `t_end`. `out_events` (optional)
/// receives the number of non-stale events.
///
/// # Safety
/// `world` must be a live handle; `out_events` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cca_world1d_advance(
    world: *mut CcaWorld1D,
    t_end: f64,
    out_events: *mut u64,
) -> CcaStatus {
    let Some(w) = world.as_mut() else {
        return CcaStatus::NullPointer;
    };
    if t_end.is_nan() {
        return CcaStatus::InvalidArgument;
    }
    guarded(|| match w.world.advance_to(t_end, &mut w.rng) {
        Ok(n) => {
            if !out_events.is_null() {
                *out_events = n;
            }
            CcaStatus::Ok
        }
        Err(e) => CcaStatus::from(&e),
    })
}

/// Current simulation time; NaN for a null handle.
///
/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cca_world1d_time(world: *const CcaWorld1D) -> f64 {
    world.as_ref().map_or(f64::NAN, |w| w.world.now())
}

/// Size of the cluster holding the tagged particle; 0 for a null handle.
///
/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cca_world1d_tagged_size(world: *const CcaWorld1D) -> usize {
    world.as_ref().map_or(0, |w| w.world.tagged_size())
}

/// Number of live clusters; 0 for a null handle.
///
/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cca_world1d_cluster_count(world: *const CcaWorld1D) -> usize {
    world.as_ref().map_or(0, |w| w.world.n_clusters())
}

/// Largest cluster size seen so far; 0 for a null handle.
///
/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cca_world1d_max_size(world: *const CcaWorld1D) -> usize {
    world.as_ref().map_or(0, |w| w.world.max_size())
}

/// Observation series of a complete run.
pub struct CcaSeries {
    times: Vec<f64>,
    c0_size: Vec<usize>,
    n_clusters: Vec<usize>,
    contaminated: bool,
}

/// Runs one replica to `config.t_max`, observing at the `n_obs` ascending
/// times in `obs_times`.
///
/// # Safety
/// `config` must be valid; `obs_times` must hold `n_obs` values (or be null
/// with `n_obs == 0`); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cca_run1d(
    config: *const CcaConfig1D,
    obs_times: *const f64,
    n_obs: usize,
    out: *mut *mut CcaSeries,
) -> CcaStatus {
    if config.is_null() || out.is_null() || (obs_times.is_null() && n_obs > 0) {
        return CcaStatus::NullPointer;
    }
    guarded(|| {
        let mut c = (*config).to_core();
        c.obs_times = if n_obs == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(obs_times, n_obs).to_vec()
        };
        *out = ptr::null_mut();
        match lattice1d::run(&c, &mut rng_from_seed(c.seed)) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(CcaSeries {
                    times: r.series.times,
                    c0_size: r.series.c0_size,
                    n_clusters: r.series.n_clusters,
                    contaminated: r.series.contaminated,
                }));
                CcaStatus::Ok
            }
            Err(e) => CcaStatus::from(&e),
        }
    })
}

/// Number of observations in a series; 0 for null.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cca_series_len(series: *const CcaSeries) -> usize {
    series.as_ref().map_or(0, |s| s.times.len())
}

/// 1 if the run tripped the size guard, 0 otherwise (and for null).
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cca_series_contaminated(series: *const CcaSeries) -> i32 {
    series.as_ref().map_or(0, |s| i32::from(s.contaminated))
}

/// Copies tagged-cluster sizes into `buf` (capacity `len`).
///
/// # Safety
/// `series` must be a live handle; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cca_series_c0_size(series: *const CcaSeries, buf: *mut usize, len: usize) -> CcaStatus {
    copy_out(series, buf, len, |s| &s.c0_size)
}

/// Copies cluster counts into `buf` (capacity `len`).
///
/// # Safety
/// `series` must be a live handle; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cca_series_cluster_count(
    series: *const CcaSeries,
    buf: *mut usize,
    len: usize,
) -> CcaStatus {
    copy_out(series, buf, len, |s| &s.n_clusters)
}

/// Copies observation times into `buf` (capacity `len`).
///
/// # Safety
/// `series` must be a live handle; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cca_series_times(series: *const CcaSeries, buf: *mut f64, len: usize) -> CcaStatus {
    copy_out(series, buf, len, |s| &s.times)
}

unsafe fn copy_out<T: Copy>(
    series: *const CcaSeries,
    buf: *mut T,
    len: usize,
    field: impl Fn(&CcaSeries) -> &Vec<T>,
) -> CcaStatus {
    let Some(s) = series.as_ref() else {
        return CcaStatus::NullPointer;
    };
    let src = field(s);
    if src.is_empty() {
        return CcaStatus::Ok;
    }
    if buf.is_null() {
        return CcaStatus::NullPointer;
    }
    if len < src.len() {
        return CcaStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    CcaStatus::Ok
}

/// Releases a series; null is ignored.
///
/// # Safety
/// `series` must be null or a handle from [`cca_run1d`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cca_series_free(series: *mut CcaSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

unsafe fn theory_call(p: f64, out: *mut f64, f: impl FnOnce(&LimitLawParams) -> f64) -> CcaStatus {
    if out.is_null() {
        return CcaStatus::NullPointer;
    }
    match LimitLawParams::new(p) {
        Ok(params) => {
            *out = f(&params);
            CcaStatus::Ok
        }
        Err(_) => CcaStatus::InvalidArgument,
    }
}

/// CDF of the rescaled `alpha = 0` limit law at `x`, for `p` in (0,1).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cca_limit_cdf(x: f64, p: f64, out: *mut f64) -> CcaStatus {
    theory_call(p, out, |params| theory::limit_cdf(x, params))
}

/// Density of the limit law at `x`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cca_limit_pdf(x: f64, p: f64, out: *mut f64) -> CcaStatus {
    theory_call(p, out, |params| theory::limit_pdf(x, params))
}

/// Mean of the limit law.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cca_limit_mean(p: f64, out: *mut f64) -> CcaStatus {
    theory_call(p, out, theory::limit_mean)
}

/// Writes `gamma_1 .. gamma_len` for the given `alpha` into `buf`.
///
/// # Safety
/// `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cca_gamma_sequence(alpha: f64, buf: *mut f64, len: usize) -> CcaStatus {
    if len == 0 {
        return CcaStatus::Ok;
    }
    if buf.is_null() {
        return CcaStatus::NullPointer;
    }
    let seq = theory::gamma_sequence(alpha, len);
    ptr::copy_nonoverlapping(seq.as_ptr(), buf, len);
    CcaStatus::Ok
}

/// Growth exponent `1/(alpha+2)`; `InvalidArgument` for `alpha <= -2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cca_growth_exponent(alpha: f64, out: *mut f64) -> CcaStatus {
    if out.is_null() {
        return CcaStatus::NullPointer;
    }
    match theory::growth_exponent(alpha) {
        Ok(g) => {
            *out = g;
            CcaStatus::Ok
        }
        Err(_) => CcaStatus::InvalidArgument,
    }
}
