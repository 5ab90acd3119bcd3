//! C ABI over the `promptseg` pipeline.
//!
//! Every function returns a [`PsStatus`]; on failure the message is available
//! from [`ps_last_error_message`] on the same thread. Objects are opaque
//! handles created by `*_new`/`*_load` and released by the matching `*_free`.
//! Undefined metrics are reported as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use promptseg::clip_filter::softmax;
use promptseg::geometry::{iou, nms, BBox, Detection};
use promptseg::metrics::{compute_report, ConfusionMatrix, EvalReport};
use promptseg::prompts::canonicalize;
use promptseg::runner::{self, RunConfig, RunOptions};
use promptseg::{Error, LabelMask, PromptSet};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Backend = 6,
    Dimension = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsDetection {
    pub bbox: PsBox,
    /// Canonical class id, `>= 1`.
    pub class_id: u8,
    pub confidence: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsReport {
    pub miou: f64,
    pub pixel_accuracy: f64,
    pub pixel_precision: f64,
    pub pixel_recall: f64,
    pub dice: f64,
    pub image_count: usize,
    pub pixel_count: u64,
}

/// Opaque prompt set.
pub struct PsPromptSet(PromptSet);

/// Opaque confusion-matrix accumulator.
pub struct PsConfusion(ConfusionMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::Io { .. } | Error::Codec { .. } => PsStatus::Io,
        Error::Parse { .. } => PsStatus::Parse,
        Error::Config(_) | Error::PromptSet(_) => PsStatus::Config,
        Error::Backend { .. } | Error::Segmenter { .. } => PsStatus::Backend,
        Error::Dimension(_) => PsStatus::Dimension,
        _ => PsStatus::InvalidArgument,
    }
}

struct Fail(PsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PsStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(PsStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PsStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_bbox(b: &PsBox) -> Result<BBox, Fail> {
    Ok(BBox::new(b.x_min, b.y_min, b.x_max, b.y_max)?)
}

fn to_report(r: &EvalReport) -> PsReport {
    let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
    PsReport {
        miou: v(r.miou),
        pixel_accuracy: r.pixel_accuracy,
        pixel_precision: v(r.pixel_precision),
        pixel_recall: v(r.pixel_recall),
        dice: v(r.dice),
        image_count: r.image_count,
        pixel_count: r.pixel_count,
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Intersection over union of two boxes.
///
/// # Safety
/// `a`, `b` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_box_iou(a: *const PsBox, b: *const PsBox, out: *mut f64) -> PsStatus {
    guard(|| {
        let a = to_bbox(a.as_ref().ok_or_else(|| null("a"))?)?;
        let b = to_bbox(b.as_ref().ok_or_else(|| null("b"))?)?;
        *out_arg(out, "out")? = iou(&a, &b);
        Ok(())
    })
}

/// Per-class greedy NMS. Writes the indices of kept detections, in
/// acceptance order, to `kept` (capacity `len`) and their number to `kept_len`.
///
/// # Safety
/// `dets` must point to `len` detections and `kept` to room for `len` indices.
#[no_mangle]
pub unsafe extern "C" fn ps_nms(
    dets: *const PsDetection,
    len: usize,
    overlap_threshold: f64,
    kept: *mut usize,
    kept_len: *mut usize,
) -> PsStatus {
    guard(|| {
        let input = slice_arg(dets, len, "dets")?;
        let kept_len = out_arg(kept_len, "kept_len")?;
        if !(0.0..=1.0).contains(&overlap_threshold) {
            return Err(invalid(format!(
                "threshold {overlap_threshold} outside [0, 1]"
            )));
        }
        let converted = input
            .iter()
            .enumerate()
            .map(|(i, d)| {
                Ok(Detection::new(
                    to_bbox(&d.bbox)?,
                    i.to_string(),
                    d.class_id,
                    d.confidence,
                    1.0,
                )?)
            })
            .collect::<Result<Vec<_>, Fail>>()?;
        let result = nms(&converted, overlap_threshold);
        if !result.is_empty() && kept.is_null() {
            return Err(null("kept"));
        }
        for (slot, d) in result.iter().enumerate() {
            *kept.add(slot) = d.raw_label.parse().expect("index label");
        }
        *kept_len = result.len();
        Ok(())
    })
}

/// Numerically stable softmax of `len` scores into `out`.
///
/// # Safety
/// `scores` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_softmax(scores: *const f64, len: usize, out: *mut f64) -> PsStatus {
    guard(|| {
        let s = slice_arg(scores, len, "scores")?;
        let p = softmax(s)?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(p.as_ptr(), out, len);
        Ok(())
    })
}

/// Load and validate a TOML prompt file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_prompt_set_load(
    path: *const c_char,
    out: *mut *mut PsPromptSet,
) -> PsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ps = PromptSet::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(PsPromptSet(ps)));
        Ok(())
    })
}

/// Number of task classes `K`.
///
/// # Safety
/// `ps` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_prompt_set_class_number(
    ps: *const PsPromptSet,
    out: *mut u8,
) -> PsStatus {
    guard(|| {
        let ps = ps.as_ref().ok_or_else(|| null("ps"))?;
        *out_arg(out, "out")? = ps.0.class_number();
        Ok(())
    })
}

/// Class id for a raw detector label, or 0 when it names no class.
///
/// # Safety
/// `ps` must be a live handle and `label` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ps_prompt_set_canonicalize(
    ps: *const PsPromptSet,
    label: *const c_char,
    out_class: *mut u8,
) -> PsStatus {
    guard(|| {
        let ps = ps.as_ref().ok_or_else(|| null("ps"))?;
        let label = str_arg(label, "label")?;
        *out_arg(out_class, "out_class")? = canonicalize(label, &ps.0).unwrap_or(0);
        Ok(())
    })
}

/// # Safety
/// `ps` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_prompt_set_free(ps: *mut PsPromptSet) {
    if !ps.is_null() {
        drop(Box::from_raw(ps));
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_confusion_new(
    class_number: u8,
    out: *mut *mut PsConfusion,
) -> PsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if class_number == 0 {
            return Err(invalid("class_number must be >= 1"));
        }
        *out = Box::into_raw(Box::new(PsConfusion(ConfusionMatrix::new(class_number))));
        Ok(())
    })
}

/// Add one row-major `width x height` pair of label maps.
///
/// # Safety
/// `cm` must be a live handle; `pred` and `gt` must each point to
/// `width * height` bytes.
#[no_mangle]
pub unsafe extern "C" fn ps_confusion_accumulate(
    cm: *mut PsConfusion,
    pred: *const u8,
    gt: *const u8,
    width: u32,
    height: u32,
) -> PsStatus {
    guard(|| {
        let cm = cm.as_mut().ok_or_else(|| null("cm"))?;
        let n = width as usize * height as usize;
        let k = cm.0.class_number();
        let p = LabelMask::from_vec(width, height, k, slice_arg(pred, n, "pred")?.to_vec())?;
        let g = LabelMask::from_vec(width, height, k, slice_arg(gt, n, "gt")?.to_vec())?;
        cm.0.accumulate(&p, &g)?;
        Ok(())
    })
}

/// # Safety
/// `cm` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_confusion_report(
    cm: *const PsConfusion,
    out: *mut PsReport,
) -> PsStatus {
    guard(|| {
        let cm = cm.as_ref().ok_or_else(|| null("cm"))?;
        *out_arg(out, "out")? = to_report(&compute_report(&cm.0)?);
        Ok(())
    })
}

/// # Safety
/// `cm` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_confusion_free(cm: *mut PsConfusion) {
    if !cm.is_null() {
        drop(Box::from_raw(cm));
    }
}

/// Run the pipeline configured by `config_path` over `images_dir`, writing
/// label maps and the manifest to `out_dir`. Per-image failures do not fail
/// the call; their number is written to `failures`.
///
/// # Safety
/// Strings must be NUL-terminated; `failures` may be null.
#[no_mangle]
pub unsafe extern "C" fn ps_run(
    config_path: *const c_char,
    images_dir: *const c_char,
    out_dir: *const c_char,
    failures: *mut usize,
) -> PsStatus {
    guard(|| {
        let cfg = RunConfig::load(str_arg(config_path, "config_path")?)?;
        let images = PathBuf::from(str_arg(images_dir, "images_dir")?);
        let out = PathBuf::from(str_arg(out_dir, "out_dir")?);
        let summary = runner::run(&cfg, &images, &out, &RunOptions::default())?;
        if let Some(f) = failures.as_mut() {
            *f = summary.failures();
        }
        Ok(())
    })
}

/// Score `<stem>.png` label maps in `pred_dir` against `gt_dir`.
///
/// # Safety
/// Strings must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_evaluate(
    pred_dir: *const c_char,
    gt_dir: *const c_char,
    class_number: u8,
    out: *mut PsReport,
) -> PsStatus {
    guard(|| {
        let pred = PathBuf::from(str_arg(pred_dir, "pred_dir")?);
        let gt = PathBuf::from(str_arg(gt_dir, "gt_dir")?);
        let out = out_arg(out, "out")?;
        *out = to_report(&runner::evaluate(&pred, &gt, class_number)?);
        Ok(())
    })
}
