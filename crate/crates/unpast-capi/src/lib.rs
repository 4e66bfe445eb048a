//! C ABI over the biclustering pipeline.
//!
//! All types cross the boundary as opaque handles or plain C structs,
//! every fallible call returns a status code, and the message behind the
//! most recent failure is kept per thread (`unpast_last_error`). Handles
//! are freed with their matching `_free` function and must not be used
//! afterwards; passing NULL anywhere is reported, never dereferenced.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use unpast::bicluster::Bicluster;
use unpast::dataio;
use unpast::modules::Clustering;
use unpast::pipeline::{run_unpast, run_unpast_multi, DeParams, UnpastParams};
use unpast::{BiclusterDirection, BinarizationMethod, DirectionMode, ExpressionMatrix, UnpastError};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnpastStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ParseError = 3,
    IoError = 4,
    Panic = 5,
}

/// 1-D split method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnpastMethod {
    Kmeans = 0,
    Ward = 1,
    Gmm = 2,
}

/// Whether up- and down-regulated features form separate graphs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnpastDirections {
    Separate = 0,
    Joint = 1,
}

/// Feature grouping algorithm.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnpastClustering {
    Louvain = 0,
    Tom = 1,
}

/// Direction of a bicluster relative to the background.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnpastDirection {
    Up = 0,
    Down = 1,
    Mixed = 2,
}

/// Pipeline options; initialize with `unpast_options_default` and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UnpastOptions {
    pub binarization: UnpastMethod,
    pub clustering: UnpastClustering,
    pub directions: UnpastDirections,
    /// Empirical null p-value cutoff for binarized features.
    pub pval: f64,
    /// Smallest admissible sample group.
    pub min_n_samples: usize,
    /// Jaccard threshold for feature-graph edges.
    pub edge_threshold: f64,
    /// Louvain resolution.
    pub resolution: f64,
    /// Nonzero runs the differential-expression verification pass.
    pub run_de: i32,
    pub de_lfc: f64,
    pub de_pval: f64,
    pub seed: u64,
    /// Independent runs with stepped seeds; more than one reduces the
    /// result to consensus biclusters.
    pub n_runs: usize,
}

/// An expression matrix handle.
pub struct UnpastMatrix {
    inner: ExpressionMatrix,
    feature_ids: Vec<CString>,
    sample_ids: Vec<CString>,
}

/// A list of biclusters produced by `unpast_run`.
pub struct UnpastResult {
    biclusters: Vec<Bicluster>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("interior NULs removed");
    });
}

fn status_of(err: &UnpastError) -> UnpastStatus {
    match err {
        UnpastError::Io { .. } => UnpastStatus::IoError,
        UnpastError::Parse { .. } => UnpastStatus::ParseError,
        UnpastError::Invalid(_) => UnpastStatus::InvalidArgument,
    }
}

fn fail(err: &UnpastError) -> UnpastStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn invalid(message: &str) -> UnpastStatus {
    set_error(message);
    UnpastStatus::InvalidArgument
}

fn null_arg(name: &str) -> UnpastStatus {
    set_error(&format!("{name} must not be NULL"));
    UnpastStatus::NullArgument
}

/// Runs `f` with panics converted to `UNPAST_STATUS_PANIC`.
fn guarded(f: impl FnOnce() -> UnpastStatus) -> UnpastStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in library call".into());
            set_error(&msg);
            UnpastStatus::Panic
        }
    }
}

fn utf8_arg(ptr: *const c_char, name: &str) -> Result<String, UnpastStatus> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    let bytes = unsafe { CStr::from_ptr(ptr) };
    bytes
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(&format!("{name} is not valid UTF-8")))
}

fn wrap_matrix(inner: ExpressionMatrix) -> Result<Box<UnpastMatrix>, UnpastStatus> {
    let to_c = |ids: &[String], what: &str| -> Result<Vec<CString>, UnpastStatus> {
        ids.iter()
            .map(|id| {
                CString::new(id.as_str())
                    .map_err(|_| invalid(&format!("{what} id {id:?} contains a NUL byte")))
            })
            .collect()
    };
    let feature_ids = to_c(inner.feature_ids(), "feature")?;
    let sample_ids = to_c(inner.sample_ids(), "sample")?;
    Ok(Box::new(UnpastMatrix { inner, feature_ids, sample_ids }))
}

/// Message describing the most recent failure on the calling thread.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn unpast_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn unpast_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Reads a features-by-samples TSV matrix into a new handle.
#[no_mangle]
pub extern "C" fn unpast_matrix_read_tsv(
    path: *const c_char,
    out: *mut *mut UnpastMatrix,
) -> UnpastStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let path = match utf8_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match dataio::read_matrix(&path).map_err(|e| fail(&e)).and_then(|m| wrap_matrix(m)) {
            Ok(handle) => {
                unsafe { *out = Box::into_raw(handle) };
                UnpastStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Builds a matrix from row-major values and NUL-terminated id arrays.
/// All data is copied; the caller keeps ownership of its buffers.
#[no_mangle]
pub extern "C" fn unpast_matrix_new(
    feature_ids: *const *const c_char,
    n_features: usize,
    sample_ids: *const *const c_char,
    n_samples: usize,
    values: *const f64,
    out: *mut *mut UnpastMatrix,
) -> UnpastStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        if feature_ids.is_null() || sample_ids.is_null() || values.is_null() {
            return null_arg("feature_ids, sample_ids and values");
        }
        let collect = |ptrs: *const *const c_char, n: usize, what: &str| {
            let mut ids = Vec::with_capacity(n);
            for i in 0..n {
                let ptr = unsafe { *ptrs.add(i) };
                ids.push(utf8_arg(ptr, &format!("{what} id {i}"))?);
            }
            Ok::<Vec<String>, UnpastStatus>(ids)
        };
        let features = match collect(feature_ids, n_features, "feature") {
            Ok(ids) => ids,
            Err(status) => return status,
        };
        let samples = match collect(sample_ids, n_samples, "sample") {
            Ok(ids) => ids,
            Err(status) => return status,
        };
        let values = unsafe { slice::from_raw_parts(values, n_features * n_samples) }.to_vec();
        match ExpressionMatrix::new(features, samples, values)
            .map_err(|e| fail(&e))
            .and_then(|m| wrap_matrix(m))
        {
            Ok(handle) => {
                unsafe { *out = Box::into_raw(handle) };
                UnpastStatus::Ok
            }
            Err(status) => status,
        }
    })
}

#[no_mangle]
pub extern "C" fn unpast_matrix_n_features(matrix: *const UnpastMatrix) -> usize {
    if matrix.is_null() {
        return 0;
    }
    unsafe { &*matrix }.inner.n_features()
}

#[no_mangle]
pub extern "C" fn unpast_matrix_n_samples(matrix: *const UnpastMatrix) -> usize {
    if matrix.is_null() {
        return 0;
    }
    unsafe { &*matrix }.inner.n_samples()
}

/// Feature id at `index`; NULL when out of range. The pointer stays valid
/// while the matrix handle lives.
#[no_mangle]
pub extern "C" fn unpast_matrix_feature_id(
    matrix: *const UnpastMatrix,
    index: usize,
) -> *const c_char {
    if matrix.is_null() {
        return std::ptr::null();
    }
    let m = unsafe { &*matrix };
    m.feature_ids.get(index).map_or(std::ptr::null(), |id| id.as_ptr())
}

/// Sample id at `index`; NULL when out of range. The pointer stays valid
/// while the matrix handle lives.
#[no_mangle]
pub extern "C" fn unpast_matrix_sample_id(
    matrix: *const UnpastMatrix,
    index: usize,
) -> *const c_char {
    if matrix.is_null() {
        return std::ptr::null();
    }
    let m = unsafe { &*matrix };
    m.sample_ids.get(index).map_or(std::ptr::null(), |id| id.as_ptr())
}

#[no_mangle]
pub extern "C" fn unpast_matrix_free(matrix: *mut UnpastMatrix) {
    if !matrix.is_null() {
        drop(unsafe { Box::from_raw(matrix) });
    }
}

/// The pipeline defaults: kmeans binarization, Louvain grouping at
/// resolution 1, separate directions, p 0.01, groups of at least 5,
/// edge threshold 1/3, verification pass on, seed 0, one run.
#[no_mangle]
pub extern "C" fn unpast_options_default(options: *mut UnpastOptions) -> UnpastStatus {
    if options.is_null() {
        return null_arg("options");
    }
    let defaults = UnpastOptions {
        binarization: UnpastMethod::Kmeans,
        clustering: UnpastClustering::Louvain,
        directions: UnpastDirections::Separate,
        pval: 0.01,
        min_n_samples: 5,
        edge_threshold: 1.0 / 3.0,
        resolution: 1.0,
        run_de: 1,
        de_lfc: 1.0,
        de_pval: 0.05,
        seed: 0,
        n_runs: 1,
    };
    unsafe { *options = defaults };
    UnpastStatus::Ok
}

fn to_params(options: &UnpastOptions) -> UnpastParams {
    UnpastParams {
        method: match options.binarization {
            UnpastMethod::Kmeans => BinarizationMethod::KMeans,
            UnpastMethod::Ward => BinarizationMethod::Ward,
            UnpastMethod::Gmm => BinarizationMethod::Gmm,
        },
        p_threshold: options.pval,
        min_n_samples: options.min_n_samples,
        direction_mode: match options.directions {
            UnpastDirections::Separate => DirectionMode::Separate,
            UnpastDirections::Joint => DirectionMode::Joint,
        },
        clustering: match options.clustering {
            UnpastClustering::Louvain => Clustering::Louvain { resolution: options.resolution },
            UnpastClustering::Tom => Clustering::default_tom(),
        },
        edge_threshold: options.edge_threshold,
        de: (options.run_de != 0)
            .then(|| DeParams { lfc_min: options.de_lfc, p_max: options.de_pval }),
        seed: options.seed,
        null_cache: None,
    }
}

/// Runs the pipeline on `matrix`. With `n_runs > 1` the result holds the
/// consensus biclusters of the stepped-seed runs.
#[no_mangle]
pub extern "C" fn unpast_run(
    matrix: *const UnpastMatrix,
    options: *const UnpastOptions,
    out: *mut *mut UnpastResult,
) -> UnpastStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        if matrix.is_null() {
            return null_arg("matrix");
        }
        if options.is_null() {
            return null_arg("options");
        }
        let m = unsafe { &*matrix };
        let options = unsafe { &*options };
        let params = to_params(options);
        let biclusters = if options.n_runs <= 1 {
            run_unpast(&m.inner, &params).map(|run| run.biclusters)
        } else {
            run_unpast_multi(&m.inner, &params, options.n_runs)
                .map(|multi| multi.consensus.expect("consensus of more than one run").biclusters)
        };
        match biclusters {
            Ok(biclusters) => {
                let handle = Box::new(UnpastResult { biclusters });
                unsafe { *out = Box::into_raw(handle) };
                UnpastStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn unpast_result_len(result: *const UnpastResult) -> usize {
    if result.is_null() {
        return 0;
    }
    unsafe { &*result }.biclusters.len()
}

fn bicluster_at(result: *const UnpastResult, index: usize) -> Result<&'static Bicluster, UnpastStatus> {
    if result.is_null() {
        return Err(null_arg("result"));
    }
    let r = unsafe { &*result };
    r.biclusters
        .get(index)
        .ok_or_else(|| invalid(&format!("bicluster index {index} out of range ({} present)", r.biclusters.len())))
}

/// Signal-to-noise ratio of bicluster `index`; NaN on a bad handle/index.
#[no_mangle]
pub extern "C" fn unpast_bicluster_snr(result: *const UnpastResult, index: usize) -> f64 {
    bicluster_at(result, index).map_or(f64::NAN, |b| b.snr)
}

#[no_mangle]
pub extern "C" fn unpast_bicluster_n_features(result: *const UnpastResult, index: usize) -> usize {
    bicluster_at(result, index).map_or(0, |b| b.features.len())
}

#[no_mangle]
pub extern "C" fn unpast_bicluster_n_samples(result: *const UnpastResult, index: usize) -> usize {
    bicluster_at(result, index).map_or(0, |b| b.samples.len())
}

/// Direction of bicluster `index`; up on a bad handle/index (check first).
#[no_mangle]
pub extern "C" fn unpast_bicluster_direction(
    result: *const UnpastResult,
    index: usize,
) -> UnpastDirection {
    bicluster_at(result, index).map_or(UnpastDirection::Up, |b| match b.direction {
        BiclusterDirection::Up => UnpastDirection::Up,
        BiclusterDirection::Down => UnpastDirection::Down,
        BiclusterDirection::Mixed => UnpastDirection::Mixed,
    })
}

/// Copies the feature row indices of bicluster `index` into `out`
/// (capacity `cap`, must be at least `unpast_bicluster_n_features`).
#[no_mangle]
pub extern "C" fn unpast_bicluster_features(
    result: *const UnpastResult,
    index: usize,
    out: *mut usize,
    cap: usize,
) -> UnpastStatus {
    copy_out(result, index, out, cap, |b| &b.features)
}

/// Copies the per-feature signs (+1 or -1) of bicluster `index` into
/// `out`, aligned with `unpast_bicluster_features`.
#[no_mangle]
pub extern "C" fn unpast_bicluster_feature_signs(
    result: *const UnpastResult,
    index: usize,
    out: *mut i8,
    cap: usize,
) -> UnpastStatus {
    copy_out(result, index, out, cap, |b| &b.signs)
}

/// Copies the sample column indices of bicluster `index` into `out`
/// (capacity `cap`, must be at least `unpast_bicluster_n_samples`).
#[no_mangle]
pub extern "C" fn unpast_bicluster_samples(
    result: *const UnpastResult,
    index: usize,
    out: *mut u32,
    cap: usize,
) -> UnpastStatus {
    copy_out(result, index, out, cap, |b| &b.samples)
}

fn copy_out<T: Copy>(
    result: *const UnpastResult,
    index: usize,
    out: *mut T,
    cap: usize,
    select: impl Fn(&Bicluster) -> &Vec<T>,
) -> UnpastStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let b = match bicluster_at(result, index) {
            Ok(b) => b,
            Err(status) => return status,
        };
        let data = select(b);
        if cap < data.len() {
            return invalid(&format!("buffer holds {cap} entries, {} needed", data.len()));
        }
        unsafe { std::ptr::copy_nonoverlapping(data.as_ptr(), out, data.len()) };
        UnpastStatus::Ok
    })
}

/// Writes the result as TSV with ids resolved against `matrix`.
#[no_mangle]
pub extern "C" fn unpast_result_write_tsv(
    result: *const UnpastResult,
    matrix: *const UnpastMatrix,
    path: *const c_char,
) -> UnpastStatus {
    guarded(|| {
        if result.is_null() {
            return null_arg("result");
        }
        if matrix.is_null() {
            return null_arg("matrix");
        }
        let path = match utf8_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let r = unsafe { &*result };
        let m = unsafe { &*matrix };
        match dataio::write_biclusters(
            &path,
            &r.biclusters,
            m.inner.feature_ids(),
            m.inner.sample_ids(),
        ) {
            Ok(()) => UnpastStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn unpast_result_free(result: *mut UnpastResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}
