//! C ABI for slot-machine networks.
//!
//! Every function returns an [`SlmStatus`]; results come back through out
//! pointers. Networks are opaque [`SlmNetwork`] handles owned by the caller
//! and released with [`slm_network_free`]. After a non-OK status,
//! [`slm_last_error_message`] describes the failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slotmachine::kernels::Exec;
use slotmachine::model::SlotOptions;
use slotmachine::slot::SlotInit;
use slotmachine::{analysis, train, Arch, Checkpoint, Error, Network, Tensor, TrainConfig};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Training = 6,
    BufferTooSmall = 7,
    Internal = 8,
    Panic = 9,
}

/// Opaque network handle.
pub struct SlmNetwork {
    net: Network,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> SlmStatus {
    match err {
        Error::InvalidArgument(_) => SlmStatus::InvalidArgument,
        Error::Io { .. } => SlmStatus::Io,
        Error::Format { .. } | Error::Checkpoint(_) => SlmStatus::Format,
        Error::ShapeMismatch { .. } | Error::LabelOutOfRange { .. } | Error::SelectionOutOfRange { .. } => SlmStatus::Shape,
        Error::NonFiniteGradient(_) | Error::Diverged { .. } => SlmStatus::Training,
        Error::MissingCache(_) => SlmStatus::Internal,
    }
}

struct Failure(SlmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: SlmStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SlmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SlmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(msg);
            SlmStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SlmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SlmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` is null or points to a live handle.
unsafe fn net_arg<'a>(p: *const SlmNetwork) -> Result<&'a Network, Failure> {
    p.as_ref()
        .map(|h| &h.net)
        .ok_or_else(|| fail(SlmStatus::NullPointer, "network handle is null"))
}

fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes null or a writable pointer.
    unsafe { p.as_mut() }.ok_or_else(|| fail(SlmStatus::NullPointer, "output pointer is null"))
}

fn into_handle(net: Network) -> *mut SlmNetwork {
    Box::into_raw(Box::new(SlmNetwork { net }))
}

/// Copies `s` plus a NUL into `buf` when it fits. Returns the required size
/// including the NUL.
///
/// # Safety
/// `buf` is null or writable for `len` bytes.
unsafe fn copy_cstr(s: &str, buf: *mut c_char, len: usize) -> usize {
    let needed = s.len() + 1;
    if !buf.is_null() && len >= needed {
        ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
        *buf.add(s.len()) = 0;
    }
    needed
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn slm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Static NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn slm_status_name(status: SlmStatus) -> *const c_char {
    let s: &'static str = match status {
        SlmStatus::Ok => "ok\0",
        SlmStatus::NullPointer => "null pointer\0",
        SlmStatus::InvalidArgument => "invalid argument\0",
        SlmStatus::Io => "i/o error\0",
        SlmStatus::Format => "malformed data\0",
        SlmStatus::Shape => "shape mismatch\0",
        SlmStatus::Training => "training failure\0",
        SlmStatus::BufferTooSmall => "buffer too small\0",
        SlmStatus::Internal => "internal error\0",
        SlmStatus::Panic => "panic\0",
    };
    s.as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, when `len` suffices) and returns the size it needs.
///
/// # Safety
/// `buf` is null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn slm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_cstr(&e.borrow(), buf, len))
}

/// New slot network with `k` options per connection. `arch` is one of
/// `lenet`, `conv2`, `conv4`, `conv6`.
///
/// # Safety
/// `arch` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn slm_network_new_slot(
    arch: *const c_char,
    k: usize,
    seed: u64,
    sparse: bool,
    out: *mut *mut SlmNetwork,
) -> SlmStatus {
    guard(|| {
        let out = out_arg(out)?;
        let arch: Arch = str_arg(arch, "arch")?.parse()?;
        let opts = SlotOptions {
            init: SlotInit::new(k),
            sparse,
        };
        let net = Network::slot(arch, &opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
        *out = into_handle(net);
        Ok(())
    })
}

/// Network stored in a training checkpoint.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn slm_network_load_checkpoint(path: *const c_char, out: *mut *mut SlmNetwork) -> SlmStatus {
    guard(|| {
        let out = out_arg(out)?;
        let ckpt = Checkpoint::load(&PathBuf::from(str_arg(path, "path")?))?;
        *out = into_handle(ckpt.network);
        Ok(())
    })
}

/// Plain network made of the highest-score options of `net`.
///
/// # Safety
/// `net` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn slm_network_export(net: *const SlmNetwork, out: *mut *mut SlmNetwork) -> SlmStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = into_handle(net_arg(net)?.exported()?);
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `net` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slm_network_free(net: *mut SlmNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of connections (weights without biases).
///
/// # Safety
/// `net` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn slm_network_connections(net: *const SlmNetwork, out: *mut usize) -> SlmStatus {
    guard(|| {
        *out_arg(out)? = net_arg(net)?.connections();
        Ok(())
    })
}

/// Floats per input example (`C * H * W`).
///
/// # Safety
/// `net` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn slm_network_input_len(net: *const SlmNetwork, out: *mut usize) -> SlmStatus {
    guard(|| {
        *out_arg(out)? = net_arg(net)?.arch().input_shape().iter().product();
        Ok(())
    })
}

/// Whether the network still holds options and scores.
///
/// # Safety
/// `net` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn slm_network_is_slot(net: *const SlmNetwork, out: *mut bool) -> SlmStatus {
    guard(|| {
        *out_arg(out)? = net_arg(net)?.is_slot();
        Ok(())
    })
}

/// Evaluation-mode logits for `batch` examples laid out `[batch, C, H, W]`.
/// Slot networks use their highest-score options. `logits` receives
/// `batch * 10` floats.
///
/// # Safety
/// `input` is readable for `input_len` floats and `logits` writable for
/// `logits_len` floats.
#[no_mangle]
pub unsafe extern "C" fn slm_network_predict(
    net: *const SlmNetwork,
    input: *const f32,
    input_len: usize,
    batch: usize,
    logits: *mut f32,
    logits_len: usize,
) -> SlmStatus {
    guard(|| {
        let net = net_arg(net)?;
        if input.is_null() || logits.is_null() {
            return Err(fail(SlmStatus::NullPointer, "input or logits buffer is null"));
        }
        let [c, h, w] = net.arch().input_shape();
        if batch == 0 || input_len != batch * c * h * w {
            return Err(fail(
                SlmStatus::Shape,
                format!("{input_len} input floats for batch {batch} of {c}x{h}x{w}"),
            ));
        }
        let classes = 10;
        if logits_len < batch * classes {
            return Err(fail(SlmStatus::BufferTooSmall, format!("logits buffer needs {} floats", batch * classes)));
        }
        let data = std::slice::from_raw_parts(input, input_len).to_vec();
        let x = Tensor::new(vec![batch, c, h, w], data)?;
        let masks = net.select_gs();
        let eff = net.effective(Some(&masks))?;
        let y = net.logits(&x, &eff, Exec::Serial)?;
        std::slice::from_raw_parts_mut(logits, y.len()).copy_from_slice(y.data());
        Ok(())
    })
}

/// Hex SHA-256 of all option tensors. `buf` needs 65 bytes.
///
/// # Safety
/// `net` is a live handle; `buf` is writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn slm_network_options_digest(net: *const SlmNetwork, buf: *mut c_char, len: usize) -> SlmStatus {
    guard(|| {
        let net = net_arg(net)?;
        if buf.is_null() {
            return Err(fail(SlmStatus::NullPointer, "digest buffer is null"));
        }
        if !net.is_slot() {
            return Err(fail(SlmStatus::InvalidArgument, "only slot networks have options"));
        }
        let digest = analysis::options_digest(net);
        let needed = copy_cstr(&digest, buf, len);
        if needed > len {
            return Err(fail(SlmStatus::BufferTooSmall, format!("digest needs {needed} bytes")));
        }
        Ok(())
    })
}

/// Fraction of connections of a sparse slot network that select the pinned
/// zero option.
///
/// # Safety
/// `net` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn slm_network_sparsity(net: *const SlmNetwork, out: *mut f32) -> SlmStatus {
    guard(|| {
        *out_arg(out)? = analysis::network_sparsity(net_arg(net)?)?;
        Ok(())
    })
}

/// Trains from a JSON-encoded training configuration and reports the test
/// accuracy of the best-validation snapshot. When `out` is non-null it
/// receives the trained network.
///
/// # Safety
/// `config_json` is a NUL-terminated string; `test_acc` is writable; `out`
/// is null or writable.
#[no_mangle]
pub unsafe extern "C" fn slm_train_json(
    config_json: *const c_char,
    test_acc: *mut f32,
    out: *mut *mut SlmNetwork,
) -> SlmStatus {
    guard(|| {
        let acc = out_arg(test_acc)?;
        let config: TrainConfig = serde_json::from_str(str_arg(config_json, "config")?)
            .map_err(|e| fail(SlmStatus::InvalidArgument, format!("config JSON: {e}")))?;
        let outcome = train::train(&config, |_| {})?;
        *acc = outcome.test_acc;
        if !out.is_null() {
            *out = into_handle(outcome.checkpoint.network);
        }
        Ok(())
    })
}
