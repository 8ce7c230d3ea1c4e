//! C ABI over `xcdtl-core`.
//!
//! Every function returns an [`XcdtlStatus`]; on failure the message is
//! available from [`xcdtl_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::path::Path;
use std::ptr;

use xcdtl_core::anomaly::{self, IsolationForest};
use xcdtl_core::error::Error;
use xcdtl_core::features::{compute_features, Feature, NUM_FEATURES};
use xcdtl_core::graph::{load_edge_list, Domain, Graph};
use xcdtl_core::iit;
use xcdtl_core::linalg::Matrix;
use xcdtl_core::louvain;
use xcdtl_core::stats;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XcdtlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Io = 4,
    Parse = 5,
    Panic = 6,
}

/// Graph handle.
pub struct XcdtlGraph(Graph);

/// Fitted isolation forest handle.
pub struct XcdtlIForest(IsolationForest);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct XcdtlDetectionMetrics {
    pub roc_auc: f64,
    pub average_precision: f64,
    pub f1: f64,
    pub threshold: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(XcdtlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) => XcdtlStatus::InvalidInput,
            Error::Numerical(_) => XcdtlStatus::Numerical,
            Error::Io { .. } | Error::MissingFiles(_) => XcdtlStatus::Io,
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => XcdtlStatus::Parse,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(XcdtlStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(XcdtlStatus::InvalidInput, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail> + UnwindSafe) -> XcdtlStatus {
    clear_error();
    match catch_unwind(f) {
        Ok(Ok(())) => XcdtlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            XcdtlStatus::Panic
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

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn xcdtl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn xcdtl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn xcdtl_num_features() -> usize {
    NUM_FEATURES
}

/// Static name of descriptor `index`, or null when out of range.
#[no_mangle]
pub extern "C" fn xcdtl_feature_name(index: usize) -> *const c_char {
    const NAMES: [&CStr; NUM_FEATURES] = [
        c"n_nodes",
        c"n_edges",
        c"density",
        c"avg_clustering",
        c"transitivity",
        c"assortativity",
        c"efficiency",
        c"avg_shortest_path",
        c"diameter",
        c"spectral_radius",
        c"lambda_2",
        c"modularity",
    ];
    debug_assert!(Feature::ALL.iter().zip(NAMES).all(|(f, n)| n.to_str() == Ok(f.name())));
    NAMES.get(index).map_or(ptr::null(), |s| s.as_ptr())
}

fn domain_of(domain: u32) -> Result<Domain, Fail> {
    Domain::ALL
        .get(domain as usize)
        .copied()
        .ok_or_else(|| invalid(format!("domain index {domain} out of range")))
}

/// Builds a graph on `n` nodes from `n_edges` pairs stored flat in `edges`
/// (`2 * n_edges` entries). `domain` is 0..=3 (Social, Molecular, Proteins,
/// Linguistic).
///
/// # Safety
/// `edges` must point to `2 * n_edges` readable values; `out_graph` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_graph_new(
    n: usize,
    edges: *const u32,
    n_edges: usize,
    domain: u32,
    out_graph: *mut *mut XcdtlGraph,
) -> XcdtlStatus {
    guard(|| {
        let out_graph = out(out_graph, "out_graph")?;
        let flat = slice(edges, n_edges.checked_mul(2).ok_or_else(|| invalid("edge count overflow"))?, "edges")?;
        let g = Graph::new("ffi", domain_of(domain)?, n, flat.chunks_exact(2).map(|e| (e[0] as usize, e[1] as usize)))?;
        *out_graph = Box::into_raw(Box::new(XcdtlGraph(g)));
        Ok(())
    })
}

/// Reads a whitespace-separated edge list. Duplicates and self-loops are
/// dropped and their count written to `dropped` when it is non-null.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_graph` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_graph_load_edge_list(
    path: *const c_char,
    domain: u32,
    out_graph: *mut *mut XcdtlGraph,
    dropped: *mut usize,
) -> XcdtlStatus {
    guard(|| {
        let out_graph = out(out_graph, "out_graph")?;
        let path = string(path, "path")?;
        let (g, d) = load_edge_list(Path::new(path), domain_of(domain)?)?;
        if let Some(dropped) = dropped.as_mut() {
            *dropped = d;
        }
        *out_graph = Box::into_raw(Box::new(XcdtlGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_graph_free(graph: *mut XcdtlGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn xcdtl_graph_node_count(graph: *const XcdtlGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n)
}

/// # Safety
/// `graph` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn xcdtl_graph_edge_count(graph: *const XcdtlGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_edges())
}

/// Writes the twelve descriptors into `values`. `mask[j]` is 1 when the
/// descriptor is defined, else 0 and `values[j]` is NaN.
///
/// # Safety
/// `values` and `mask` must each hold `xcdtl_num_features()` entries.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_graph_features(
    graph: *const XcdtlGraph,
    values: *mut f64,
    mask: *mut u8,
) -> XcdtlStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let values = slice_mut(values, NUM_FEATURES, "values")?;
        let mask = slice_mut(mask, NUM_FEATURES, "mask")?;
        let fv = compute_features(&g.0)?;
        values.copy_from_slice(&fv.values);
        for (m, &b) in mask.iter_mut().zip(&fv.mask) {
            *m = b as u8;
        }
        Ok(())
    })
}

/// Modularity of the deterministic Louvain partition.
///
/// # Safety
/// `graph` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_graph_modularity(graph: *const XcdtlGraph, out_value: *mut f64) -> XcdtlStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        *out(out_value, "out_value")? = louvain::louvain_modularity(&g.0);
        Ok(())
    })
}

unsafe fn matrix(data: *const f64, rows: usize, cols: usize) -> Result<Matrix, Fail> {
    let len = rows.checked_mul(cols).ok_or_else(|| invalid("matrix size overflow"))?;
    Ok(Matrix::from_vec(rows, cols, slice(data, len, "data")?.to_vec()))
}

/// Fits an isolation forest on a row-major `rows × cols` matrix.
///
/// # Safety
/// `data` must hold `rows * cols` values; `out_forest` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_iforest_fit(
    data: *const f64,
    rows: usize,
    cols: usize,
    seed: u64,
    out_forest: *mut *mut XcdtlIForest,
) -> XcdtlStatus {
    guard(|| {
        let out_forest = out(out_forest, "out_forest")?;
        let x = matrix(data, rows, cols)?;
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(invalid("isolation forest input contains non-finite values"));
        }
        *out_forest = Box::into_raw(Box::new(XcdtlIForest(IsolationForest::fit(&x, seed)?)));
        Ok(())
    })
}

/// Anomaly scores in (0, 1) for each of `rows` rows; larger is more
/// anomalous.
///
/// # Safety
/// `data` must hold `rows * cols` values and `scores` `rows` entries.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_iforest_score(
    forest: *const XcdtlIForest,
    data: *const f64,
    rows: usize,
    cols: usize,
    scores: *mut f64,
) -> XcdtlStatus {
    guard(|| {
        let f = forest.as_ref().ok_or_else(|| null("forest"))?;
        let x = matrix(data, rows, cols)?;
        let dst = slice_mut(scores, rows, "scores")?;
        dst.copy_from_slice(&f.0.score(&x)?);
        Ok(())
    })
}

/// # Safety
/// `forest` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_iforest_free(forest: *mut XcdtlIForest) {
    if !forest.is_null() {
        drop(Box::from_raw(forest));
    }
}

/// ROC-AUC, average precision and F1 at `threshold` (`score > threshold`
/// is a detection). `labels[i]` is nonzero for anomalies.
///
/// # Safety
/// `scores` and `labels` must hold `n` entries; `out_metrics` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_detection_metrics(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    threshold: f64,
    out_metrics: *mut XcdtlDetectionMetrics,
) -> XcdtlStatus {
    guard(|| {
        let dst = out(out_metrics, "out_metrics")?;
        let scores = slice(scores, n, "scores")?;
        let labels: Vec<bool> = slice(labels, n, "labels")?.iter().map(|&l| l != 0).collect();
        let m = anomaly::detection_metrics(scores, &labels, threshold)?;
        *dst = XcdtlDetectionMetrics {
            roc_auc: m.roc_auc,
            average_precision: m.average_precision,
            f1: m.f1,
            threshold: m.threshold,
        };
        Ok(())
    })
}

/// Relative gain of a transfer metric over its non-transfer baseline.
#[no_mangle]
pub extern "C" fn xcdtl_transfer_gain(m_transfer: f64, m_baseline: f64) -> f64 {
    anomaly::transfer_gain(m_transfer, m_baseline)
}

/// Invariance score from a Borda weight, a consistency `rho` and a shift
/// `delta >= 0`.
#[no_mangle]
pub extern "C" fn xcdtl_iit_score(borda: f64, rho: f64, delta: f64) -> f64 {
    iit::iit_score(borda, rho, delta)
}

/// Kruskal–Wallis H test. `values` holds the groups back to back;
/// `group_sizes` gives the length of each of the `k` groups.
///
/// # Safety
/// `group_sizes` must hold `k` entries and `values` their sum; the output
/// pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn xcdtl_kruskal_wallis(
    values: *const f64,
    group_sizes: *const usize,
    k: usize,
    out_statistic: *mut f64,
    out_p_value: *mut f64,
) -> XcdtlStatus {
    guard(|| {
        let stat = out(out_statistic, "out_statistic")?;
        let p = out(out_p_value, "out_p_value")?;
        let sizes = slice(group_sizes, k, "group_sizes")?;
        let total = sizes
            .iter()
            .try_fold(0usize, |a, &s| a.checked_add(s))
            .ok_or_else(|| invalid("group size overflow"))?;
        let all = slice(values, total, "values")?;
        if all.iter().any(|v| v.is_nan()) {
            return Err(invalid("values contain NaN"));
        }
        let mut groups = Vec::with_capacity(k);
        let mut at = 0;
        for &s in sizes {
            groups.push(&all[at..at + s]);
            at += s;
        }
        let r = stats::kruskal_wallis(&groups)?;
        *stat = r.statistic;
        *p = r.p_value;
        Ok(())
    })
}
