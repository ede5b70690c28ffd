//! C interface to rdsnet. Networks and samples are opaque handles owned by the
//! caller and released with the matching `_free` function. Every fallible call
//! returns an `RdsnetStatus`; on failure `rdsnet_last_error` describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rdsnet::bootstrap::BootstrapPlan;
use rdsnet::estimators::{total_from_known, EstimationSettings};
use rdsnet::pipeline::estimate_total;
use rdsnet::rds::{simulate_rds, RdsDesign, RdsSample};
use rdsnet::{AttributedNetwork, Error};

/// Status codes; validation and undefined match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdsnetStatus {
    Ok = 0,
    Internal = 1,
    Validation = 2,
    Undefined = 3,
    NullPointer = 4,
    Panic = 5,
}

pub struct RdsnetNetwork(AttributedNetwork);

pub struct RdsnetSample(RdsSample);

/// Total estimate with its bootstrap and delta-method intervals.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RdsnetTotal {
    pub mu: f64,
    pub total: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub delta_ci_low: f64,
    pub delta_ci_high: f64,
    pub level: f64,
    pub n: usize,
    pub dropped_replicates: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RdsnetStatus {
    match e {
        Error::Undefined(_) => RdsnetStatus::Undefined,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => RdsnetStatus::Validation,
        e if e.is_validation() => RdsnetStatus::Validation,
        _ => RdsnetStatus::Internal,
    }
}

/// Runs `f`, turning errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (RdsnetStatus, String)>) -> RdsnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RdsnetStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            RdsnetStatus::Panic
        }
    }
}

fn lib<T>(r: rdsnet::Result<T>) -> Result<T, (RdsnetStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RdsnetStatus, String) {
    (RdsnetStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (RdsnetStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RdsnetStatus::Validation, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn rdsnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rdsnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// N_B·mu/(1 − mu).
///
/// # Safety
/// `out` must be null or point to writable memory for one double.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_total_from_known(mu: f64, n_b: u64, out: *mut f64) -> RdsnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(total_from_known(mu, n_b))?;
        Ok(())
    })
}

/// Simulates the reference network (597 unsheltered, 1,438 sheltered) from `seed`.
///
/// # Safety
/// `out` must be null or point to writable memory for one handle.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_network_reference(seed: u64, out: *mut *mut RdsnetNetwork) -> RdsnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = lib(rdsnet::reference::reference_network(seed))?;
        *out = Box::into_raw(Box::new(RdsnetNetwork(net)));
        Ok(())
    })
}

/// Reads a network from an edge list and a node attribute table.
///
/// # Safety
/// Paths must be null or NUL-terminated strings; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_network_read_csv(
    edges_path: *const c_char,
    nodes_path: *const c_char,
    out: *mut *mut RdsnetNetwork,
) -> RdsnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let e = path_arg(edges_path, "edges_path")?;
        let n = path_arg(nodes_path, "nodes_path")?;
        let net = lib(AttributedNetwork::read_csv(&e, &n))?;
        *out = Box::into_raw(Box::new(RdsnetNetwork(net)));
        Ok(())
    })
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_network_node_count(net: *const RdsnetNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.node_count())
}

/// Edge count, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_network_edge_count(net: *const RdsnetNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.edge_count())
}

/// Writes the unsheltered and sheltered node counts to `out[0]` and `out[1]`.
///
/// # Safety
/// `net` must be null or a live handle; `out` must be null or hold two elements.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_network_group_sizes(net: *const RdsnetNetwork, out: *mut usize) -> RdsnetStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let [a, b] = net.0.group_sizes();
        *out = a;
        *out.add(1) = b;
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_network_free(net: *mut RdsnetNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Coupon-limited recruitment from `n_seeds` degree-proportional seeds.
///
/// # Safety
/// `net` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_simulate_rds(
    net: *const RdsnetNetwork,
    n_seeds: usize,
    target_n: usize,
    coupon_limit: u32,
    seed: u64,
    out: *mut *mut RdsnetSample,
) -> RdsnetStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut design = RdsDesign::new(n_seeds, target_n, seed);
        design.coupon_limit = coupon_limit;
        let sample = lib(simulate_rds(&net.0, &design))?;
        *out = Box::into_raw(Box::new(RdsnetSample(sample)));
        Ok(())
    })
}

/// Reads an RDS sample table.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_sample_read_csv(
    path: *const c_char,
    coupon_limit: u32,
    out: *mut *mut RdsnetSample,
) -> RdsnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = path_arg(path, "path")?;
        let sample = lib(RdsSample::read_csv(&p, coupon_limit))?;
        *out = Box::into_raw(Box::new(RdsnetSample(sample)));
        Ok(())
    })
}

/// # Safety
/// `sample` must be null or a live handle; `path` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_sample_write_csv(sample: *const RdsnetSample, path: *const c_char) -> RdsnetStatus {
    guard(|| {
        let sample = sample.as_ref().ok_or_else(|| null("sample"))?;
        let p = path_arg(path, "path")?;
        lib(sample.0.write_csv(&p))
    })
}

/// Respondent count, or 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_sample_len(sample: *const RdsnetSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

/// Deepest recruitment wave, or 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_sample_max_wave(sample: *const RdsnetSample) -> u32 {
    sample.as_ref().map_or(0, |s| s.0.max_wave())
}

/// # Safety
/// `sample` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_sample_free(sample: *mut RdsnetSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Unsheltered total given `n_b` sheltered, with a tree-bootstrap interval.
///
/// # Safety
/// `sample` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rdsnet_estimate_total(
    sample: *const RdsnetSample,
    n_b: u64,
    replicates: usize,
    level: f64,
    seed: u64,
    out: *mut RdsnetTotal,
) -> RdsnetStatus {
    guard(|| {
        let sample = sample.as_ref().ok_or_else(|| null("sample"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut plan = BootstrapPlan::new(seed);
        plan.replicates = replicates;
        plan.level = level;
        let est = lib(estimate_total(&sample.0, n_b, &plan, EstimationSettings::default()))?;
        *out = RdsnetTotal {
            mu: est.mu.point,
            total: est.total.point,
            se: est.total.se,
            ci_low: est.total.ci_low,
            ci_high: est.total.ci_high,
            delta_ci_low: est.total_delta.ci_low,
            delta_ci_high: est.total_delta.ci_high,
            level: est.total.level,
            n: est.n,
            dropped_replicates: est.dropped_replicates,
        };
        Ok(())
    })
}
