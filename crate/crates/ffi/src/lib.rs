//! C ABI over the `harnet` crate.
//!
//! Images and models are opaque handles created and freed by this library.
//! Every fallible function returns a [`HarnetStatus`]; on failure the message
//! is available from [`harnet_last_error_message`] on the same thread.
//! Panics are caught at the boundary and reported as `HARNET_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use harnet::image::{load_image, save_image};
use harnet::metrics::{MetricsReport, RegionSpec};
use harnet::model::{load_checkpoint, save_checkpoint, TrainingMeta};
use harnet::{Angiogram, Error, IntensityScale, Model, ModelSpec};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Checkpoint = 5,
    Numerical = 6,
    Metric = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarnetScale {
    /// Pixels in [0, 255]
    Raw255 = 0,
    /// Pixels in [0, 1]
    Unit = 1,
}

/// Network shape. See `harnet_spec_paper` and `harnet_spec_desk`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarnetModelSpec {
    pub low_level_channels: usize,
    pub block_count: usize,
    pub layers_per_block: usize,
    pub block_channels: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnetMetrics {
    pub noise_intensity: f64,
    pub contrast_rms: f64,
    pub connectivity: f64,
}

/// Opaque grayscale angiogram.
pub struct HarnetImage {
    inner: Angiogram,
}

/// Opaque reconstruction network.
pub struct HarnetModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HarnetStatus {
    match e {
        Error::InvalidArgument(_) | Error::ShapeMismatch { .. } => HarnetStatus::InvalidArgument,
        Error::RegionOutOfBounds(_) | Error::EmptyRegion | Error::ConstantImage(_) => HarnetStatus::Metric,
        Error::NonFinite(_) | Error::Numerical(_) => HarnetStatus::Numerical,
        Error::Io { .. } => HarnetStatus::Io,
        Error::MultiChannel { .. }
        | Error::NonSquare { .. }
        | Error::MissingMetadata { .. }
        | Error::Format { .. }
        | Error::Image { .. } => HarnetStatus::Format,
        Error::BadMagic { .. } | Error::UnsupportedVersion { .. } | Error::Truncated(_) | Error::CrcMismatch { .. } => {
            HarnetStatus::Checkpoint
        }
    }
}

struct Fail(HarnetStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HarnetStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HarnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HarnetStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("panic: {msg}"));
            HarnetStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Fail(HarnetStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

impl From<HarnetModelSpec> for ModelSpec {
    fn from(s: HarnetModelSpec) -> Self {
        ModelSpec::new(s.low_level_channels, s.block_count, s.layers_per_block, s.block_channels)
    }
}

impl From<ModelSpec> for HarnetModelSpec {
    fn from(s: ModelSpec) -> Self {
        HarnetModelSpec {
            low_level_channels: s.low_level_channels,
            block_count: s.block_count,
            layers_per_block: s.layers_per_block,
            block_channels: s.block_channels,
        }
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn harnet_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn harnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `width * height` row-major pixels into a new image.
///
/// # Safety
/// `pixels` must point to `width * height` floats; `id` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn harnet_image_new(
    id: *const c_char,
    width: usize,
    height: usize,
    pixels: *const f32,
    scale: HarnetScale,
    fov_mm: f64,
    out: *mut *mut HarnetImage,
) -> HarnetStatus {
    guard(|| {
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Fail(HarnetStatus::InvalidArgument, "image size overflows".into()))?;
        let id = if id.is_null() {
            String::new()
        } else {
            CStr::from_ptr(id).to_string_lossy().into_owned()
        };
        let data = std::slice::from_raw_parts(pixels, n).to_vec();
        let scale = match scale {
            HarnetScale::Raw255 => IntensityScale::Raw255,
            HarnetScale::Unit => IntensityScale::Unit,
        };
        let inner = Angiogram::new(id, width, height, data, scale, fov_mm)?;
        put(out, HarnetImage { inner })
    })
}

/// Loads a PNG or PGM image together with its `.meta` sidecar.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn harnet_image_load(path: *const c_char, out: *mut *mut HarnetImage) -> HarnetStatus {
    guard(|| {
        let path = path_arg(path)?;
        let inner = load_image(&path)?;
        put(out, HarnetImage { inner })
    })
}

/// # Safety
/// `image` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn harnet_image_save(image: *const HarnetImage, path: *const c_char) -> HarnetStatus {
    guard(|| {
        let image = deref(image, "image")?;
        let path = path_arg(path)?;
        save_image(&image.inner, &path)?;
        Ok(())
    })
}

/// Width in pixels; 0 for NULL.
///
/// # Safety
/// `image` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn harnet_image_width(image: *const HarnetImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.width())
}

/// Height in pixels; 0 for NULL.
///
/// # Safety
/// `image` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn harnet_image_height(image: *const HarnetImage) -> usize {
    image.as_ref().map_or(0, |i| i.inner.height())
}

/// # Safety
/// `image` must come from this library; `scale` must be writable.
#[no_mangle]
pub unsafe extern "C" fn harnet_image_scale(image: *const HarnetImage, scale: *mut HarnetScale) -> HarnetStatus {
    guard(|| {
        let image = deref(image, "image")?;
        if scale.is_null() {
            return Err(null("scale"));
        }
        *scale = match image.inner.scale() {
            IntensityScale::Raw255 => HarnetScale::Raw255,
            IntensityScale::Unit => HarnetScale::Unit,
        };
        Ok(())
    })
}

/// Copies the pixels into `buffer`, which must hold `len >= width * height`
/// floats.
///
/// # Safety
/// `buffer` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn harnet_image_pixels(image: *const HarnetImage, buffer: *mut f32, len: usize) -> HarnetStatus {
    guard(|| {
        let image = deref(image, "image")?;
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        let px = image.inner.pixels();
        if len < px.len() {
            return Err(Fail(
                HarnetStatus::InvalidArgument,
                format!("buffer holds {len} values, image has {}", px.len()),
            ));
        }
        ptr::copy_nonoverlapping(px.as_ptr(), buffer, px.len());
        Ok(())
    })
}

/// # Safety
/// `image` must be NULL or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn harnet_image_free(image: *mut HarnetImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

#[no_mangle]
pub extern "C" fn harnet_spec_paper() -> HarnetModelSpec {
    ModelSpec::paper().into()
}

#[no_mangle]
pub extern "C" fn harnet_spec_desk() -> HarnetModelSpec {
    ModelSpec::desk().into()
}

/// Builds a freshly initialized network. An untrained network is the
/// identity map.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn harnet_model_build(spec: HarnetModelSpec, seed: u64, out: *mut *mut HarnetModel) -> HarnetStatus {
    guard(|| {
        let inner = Model::build(spec.into(), seed)?;
        put(out, HarnetModel { inner })
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn harnet_model_load(path: *const c_char, out: *mut *mut HarnetModel) -> HarnetStatus {
    guard(|| {
        let path = path_arg(path)?;
        let inner = load_checkpoint(&path)?.model;
        put(out, HarnetModel { inner })
    })
}

/// Writes a checkpoint with empty training metadata.
///
/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn harnet_model_save(model: *const HarnetModel, path: *const c_char) -> HarnetStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let path = path_arg(path)?;
        save_checkpoint(&model.inner, &TrainingMeta::default(), &path)?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `spec` must be writable.
#[no_mangle]
pub unsafe extern "C" fn harnet_model_spec(model: *const HarnetModel, spec: *mut HarnetModelSpec) -> HarnetStatus {
    guard(|| {
        let model = deref(model, "model")?;
        if spec.is_null() {
            return Err(null("spec"));
        }
        *spec = (*model.inner.spec()).into();
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn harnet_model_free(model: *mut HarnetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Whole-image inference. The output keeps the input's size, scale, field
/// of view and id.
///
/// # Safety
/// `model` and `image` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn harnet_reconstruct(
    model: *const HarnetModel,
    image: *const HarnetImage,
    out: *mut *mut HarnetImage,
) -> HarnetStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let image = deref(image, "image")?;
        let rebuilt = model.inner.reconstruct(&image.inner.to_unit())?;
        let inner = match image.inner.scale() {
            IntensityScale::Raw255 => rebuilt.to_raw255(),
            IntensityScale::Unit => rebuilt,
        };
        put(out, HarnetImage { inner })
    })
}

/// Noise intensity in a centered circle of `diameter_mm`, RMS contrast and
/// connectivity, all on the 0-255 scale.
///
/// # Safety
/// `image` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn harnet_metrics(
    image: *const HarnetImage,
    diameter_mm: f64,
    out: *mut HarnetMetrics,
) -> HarnetStatus {
    guard(|| {
        let image = deref(image, "image")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let region = RegionSpec::centered(&image.inner, diameter_mm);
        let r = MetricsReport::measure(&image.inner, region, false)?.value;
        *out = HarnetMetrics {
            noise_intensity: r.noise_intensity,
            contrast_rms: r.contrast_rms,
            connectivity: r.connectivity,
        };
        Ok(())
    })
}
