//! C ABI over `esr-core`.
//!
//! Objects are handed out as opaque heap handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`EsrStatus`]; on failure a description is available from
//! [`esr_last_error_message`] on the same thread until the next failing call.
//! Results are written through out-pointers only when the call succeeds.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use esr_core::detection::DetectionEntry;
use esr_core::experiment::spin_scenario;
use esr_core::linalg::default_tol;
use esr_core::probability::composite_overall_prob;
use esr_core::{
    conditional_prob, detect_prob_property, make_improper_from_composite, make_proper_mixture, overall_prob,
    quantum_prob, run_ensemble, ComplexOperator, DetectionModel, DetectionTable, EsrError, GeneralizedObservable,
    McOptions, MixtureComponent, OutcomeSet, Property, PureState, State, StateVector,
};
use num_complex::Complex64;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    DimensionMismatch = 4,
    MissingDetectionEntry = 5,
    UndefinedProbability = 6,
    NumericalIntegrity = 7,
    WrongStateKind = 8,
    Internal = 9,
}

/// Generalized observable handle.
pub struct EsrObservable(GeneralizedObservable);

/// Pure state, proper mixture or improper mixture.
pub struct EsrState(State);

/// Detection model handle.
pub struct EsrDetection(DetectionModel);

/// Analytic (and optionally sampled) probabilities for one sweep point.
/// The Monte Carlo fields are NaN when no sampling was done.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EsrResultRow {
    pub sweep_value: f64,
    pub p_conditional: f64,
    pub p_overall: f64,
    pub p_quantum: f64,
    pub p_detect: f64,
    pub mc_frequency: f64,
    pub mc_halfwidth: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EsrEnsembleSummary {
    pub n_total: u64,
    pub n_detected: u64,
    pub n_yes: u64,
    pub yes_frequency: f64,
    pub confidence_halfwidth: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: EsrStatus,
    message: String,
}

impl From<EsrError> for Failure {
    fn from(e: EsrError) -> Self {
        let status = match &e {
            EsrError::DimensionMismatch { .. } => EsrStatus::DimensionMismatch,
            EsrError::MissingDetectionEntry { .. } => EsrStatus::MissingDetectionEntry,
            EsrError::UndefinedDetection
            | EsrError::ZeroTotalDetection
            | EsrError::ZeroProbabilityOutcome
            | EsrError::NoRegistrationInOutcomes => EsrStatus::UndefinedProbability,
            EsrError::NumericalIntegrity { .. } => EsrStatus::NumericalIntegrity,
            EsrError::Config(_) | EsrError::UnresolvedReference(_) | EsrError::Io(_) => EsrStatus::Internal,
            _ => EsrStatus::InvalidArgument,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: EsrStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EsrStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(&e.message);
            e.status
        }
        Err(_) => {
            set_last_error("panic inside esr");
            EsrStatus::Internal
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(EsrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(EsrStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(EsrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EsrStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(EsrStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Complex numbers from split real/imaginary arrays; a null `im` means zero.
unsafe fn complex_arg(re: *const f64, im: *const f64, len: usize) -> Result<Vec<Complex64>, Failure> {
    let re = slice_arg(re, len, "real part")?;
    let im = if im.is_null() {
        None
    } else {
        Some(slice_arg(im, len, "imaginary part")?)
    };
    Ok((0..len)
        .map(|i| Complex64::new(re[i], im.map_or(0.0, |v| v[i])))
        .collect())
}

unsafe fn property_arg(
    observable: *const EsrObservable,
    eigenvalues: *const f64,
    n_eigenvalues: usize,
    include_no_registration: bool,
) -> Result<Property, Failure> {
    let obs = &as_ref(observable, "observable")?.0;
    let values = slice_arg(eigenvalues, n_eigenvalues, "eigenvalues")?;
    let x = OutcomeSet::from_eigenvalues(obs, values, include_no_registration, default_tol())?;
    Ok(Property::new(obs.clone(), x)?)
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn esr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn esr_status_name(status: EsrStatus) -> *const c_char {
    let s: &'static CStr = match status {
        EsrStatus::Ok => c"ok",
        EsrStatus::NullPointer => c"null pointer",
        EsrStatus::InvalidUtf8 => c"invalid utf-8",
        EsrStatus::InvalidArgument => c"invalid argument",
        EsrStatus::DimensionMismatch => c"dimension mismatch",
        EsrStatus::MissingDetectionEntry => c"missing detection entry",
        EsrStatus::UndefinedProbability => c"undefined probability",
        EsrStatus::NumericalIntegrity => c"numerical integrity violation",
        EsrStatus::WrongStateKind => c"wrong state kind",
        EsrStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

// ---- observables ----

/// Spin-1/2 observable along (theta, phi).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_observable_spin(
    name: *const c_char,
    theta: f64,
    phi: f64,
    out: *mut *mut EsrObservable,
) -> EsrStatus {
    guard(|| {
        let obs = GeneralizedObservable::spin(str_arg(name, "name")?, theta, phi)?;
        write_out(out, boxed(EsrObservable(obs)))
    })
}

/// Observable from a row-major `dim x dim` Hermitian matrix. `im` may be
/// null for a real matrix.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `dim * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_observable_from_matrix(
    name: *const c_char,
    re: *const f64,
    im: *const f64,
    dim: usize,
    out: *mut *mut EsrObservable,
) -> EsrStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let n = dim
            .checked_mul(dim)
            .ok_or_else(|| fail(EsrStatus::InvalidArgument, "dimension overflows"))?;
        let entries = complex_arg(re, im, n)?;
        let op = ComplexOperator::from_row_major(dim, &entries)?;
        let obs = GeneralizedObservable::new(name, op, default_tol())?;
        write_out(out, boxed(EsrObservable(obs)))
    })
}

/// Number of distinct eigenvalues.
///
/// # Safety
/// `observable` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn esr_observable_spectrum_len(observable: *const EsrObservable) -> usize {
    observable.as_ref().map_or(0, |o| o.0.eigenvalues().len())
}

/// Copies the ascending eigenvalues into `buf` (up to `capacity`).
///
/// # Safety
/// `buf` must have room for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_observable_eigenvalues(
    observable: *const EsrObservable,
    buf: *mut f64,
    capacity: usize,
) -> EsrStatus {
    guard(|| {
        let obs = &as_ref(observable, "observable")?.0;
        let values = obs.eigenvalues();
        if capacity < values.len() {
            return Err(fail(
                EsrStatus::InvalidArgument,
                format!("buffer needs {} slots", values.len()),
            ));
        }
        if buf.is_null() {
            return Err(fail(EsrStatus::NullPointer, "buffer is null"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        Ok(())
    })
}

/// # Safety
/// `observable` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn esr_observable_free(observable: *mut EsrObservable) {
    if !observable.is_null() {
        drop(Box::from_raw(observable));
    }
}

// ---- states ----

/// Pure state from normalized amplitudes; `label` keys detection tables
/// and may be null.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_state_pure(
    re: *const f64,
    im: *const f64,
    dim: usize,
    label: *const c_char,
    out: *mut *mut EsrState,
) -> EsrStatus {
    guard(|| {
        let amps = complex_arg(re, im, dim)?;
        let label = opt_str_arg(label, "label")?.unwrap_or("");
        let v = StateVector::new(&amps, default_tol())?;
        write_out(out, boxed(EsrState(State::Pure(PureState::new(v, label)))))
    })
}

/// Proper mixture of `n` pure-state handles. `devices` may be null, in
/// which case each component's device id is its state label. The component
/// states are copied; the caller keeps ownership of the handles.
///
/// # Safety
/// `components` and `weights` must hold `n` entries; `devices` is null or
/// holds `n` strings (individual entries may be null).
#[no_mangle]
pub unsafe extern "C" fn esr_state_proper(
    components: *const *const EsrState,
    weights: *const f64,
    devices: *const *const c_char,
    n: usize,
    out: *mut *mut EsrState,
) -> EsrStatus {
    guard(|| {
        let states = slice_arg(components, n, "components")?;
        let weights = slice_arg(weights, n, "weights")?;
        let devices = if devices.is_null() {
            None
        } else {
            Some(slice_arg(devices, n, "devices")?)
        };
        let mut parts = Vec::with_capacity(n);
        for (i, (&s, &w)) in states.iter().zip(weights).enumerate() {
            let pure = match &as_ref(s, "component")?.0 {
                State::Pure(p) => p.clone(),
                _ => {
                    return Err(fail(
                        EsrStatus::WrongStateKind,
                        format!("component {i} is not a pure state"),
                    ))
                }
            };
            let device = match devices {
                Some(d) => opt_str_arg(d[i], "device")?.map(str::to_owned),
                None => None,
            }
            .unwrap_or_else(|| pure.label().to_owned());
            parts.push(MixtureComponent::new(pure, w, device));
        }
        write_out(out, boxed(EsrState(State::Proper(make_proper_mixture(parts)?))))
    })
}

/// Improper mixture: reduced state of the first factor of a composite pure
/// state on a `dim_first * dim_second` space. Its detection key is "N".
///
/// # Safety
/// `re` (and `im` when non-null) must point to `dim_first * dim_second` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_state_improper_from_composite(
    re: *const f64,
    im: *const f64,
    dim_first: usize,
    dim_second: usize,
    out: *mut *mut EsrState,
) -> EsrStatus {
    guard(|| {
        let n = dim_first
            .checked_mul(dim_second)
            .ok_or_else(|| fail(EsrStatus::InvalidArgument, "dimension overflows"))?;
        let psi = StateVector::new(&complex_arg(re, im, n)?, default_tol())?;
        let mixture = make_improper_from_composite(&psi, dim_first, dim_second)?;
        write_out(out, boxed(EsrState(State::Improper(mixture))))
    })
}

/// # Safety
/// `state` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn esr_state_dim(state: *const EsrState) -> usize {
    state.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the row-major quantum density matrix into `re`/`im`.
///
/// # Safety
/// Both buffers must have room for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_state_density(
    state: *const EsrState,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
) -> EsrStatus {
    guard(|| {
        let rho = as_ref(state, "state")?.0.qm_density();
        let d = rho.dim();
        if capacity < d * d {
            return Err(fail(
                EsrStatus::InvalidArgument,
                format!("buffers need {} slots", d * d),
            ));
        }
        if re.is_null() || im.is_null() {
            return Err(fail(EsrStatus::NullPointer, "density buffer is null"));
        }
        for i in 0..d {
            for j in 0..d {
                let z = rho.get(i, j);
                re.add(i * d + j).write(z.re);
                im.add(i * d + j).write(z.im);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `state` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn esr_state_free(state: *mut EsrState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

// ---- detection ----

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_detection_ideal(out: *mut *mut EsrDetection) -> EsrStatus {
    guard(|| write_out(out, boxed(EsrDetection(DetectionModel::Ideal))))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_detection_constant(probability: f64, out: *mut *mut EsrDetection) -> EsrStatus {
    guard(|| write_out(out, boxed(EsrDetection(DetectionModel::constant(probability)?))))
}

/// Empty per-eigenvalue table. A NaN `default_probability` means no default.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_detection_table(default_probability: f64, out: *mut *mut EsrDetection) -> EsrStatus {
    guard(|| {
        let mut table = DetectionTable::new();
        if !default_probability.is_nan() {
            table = table.with_default(default_probability)?;
        }
        write_out(out, boxed(EsrDetection(DetectionModel::PerEigenvalue(table))))
    })
}

/// Adds or replaces a table entry. A null `key` applies to every state
/// without a more specific entry.
///
/// # Safety
/// `detection` must be a live table handle; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn esr_detection_table_set(
    detection: *mut EsrDetection,
    key: *const c_char,
    observable: *const c_char,
    eigenvalue: f64,
    probability: f64,
) -> EsrStatus {
    guard(|| {
        let model = detection
            .as_mut()
            .ok_or_else(|| fail(EsrStatus::NullPointer, "detection is null"))?;
        let DetectionModel::PerEigenvalue(table) = &mut model.0 else {
            return Err(fail(EsrStatus::InvalidArgument, "detection model is not a table"));
        };
        table.insert(DetectionEntry {
            key: opt_str_arg(key, "key")?.map(str::to_owned),
            observable: str_arg(observable, "observable")?.to_owned(),
            eigenvalue,
            probability,
        })?;
        Ok(())
    })
}

/// # Safety
/// `detection` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn esr_detection_free(detection: *mut EsrDetection) {
    if !detection.is_null() {
        drop(Box::from_raw(detection));
    }
}

// ---- probabilities ----
//
// The property is given as an observable plus a list of its eigenvalues
// and a flag for the no-registration outcome.

/// Probability of the property given that the detector registered.
///
/// # Safety
/// Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_conditional_prob(
    state: *const EsrState,
    observable: *const EsrObservable,
    eigenvalues: *const f64,
    n_eigenvalues: usize,
    include_no_registration: bool,
    detection: *const EsrDetection,
    out: *mut f64,
) -> EsrStatus {
    guard(|| {
        let prop = property_arg(observable, eigenvalues, n_eigenvalues, include_no_registration)?;
        let p = conditional_prob(&as_ref(state, "state")?.0, &prop, &as_ref(detection, "detection")?.0)?;
        write_out(out, p)
    })
}

/// Unconditional probability of the property.
///
/// # Safety
/// Same as [`esr_conditional_prob`].
#[no_mangle]
pub unsafe extern "C" fn esr_overall_prob(
    state: *const EsrState,
    observable: *const EsrObservable,
    eigenvalues: *const f64,
    n_eigenvalues: usize,
    include_no_registration: bool,
    detection: *const EsrDetection,
    out: *mut f64,
) -> EsrStatus {
    guard(|| {
        let prop = property_arg(observable, eigenvalues, n_eigenvalues, include_no_registration)?;
        let p = overall_prob(&as_ref(state, "state")?.0, &prop, &as_ref(detection, "detection")?.0)?;
        write_out(out, p)
    })
}

/// Standard quantum prediction, ignoring detection.
///
/// # Safety
/// Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_quantum_prob(
    state: *const EsrState,
    observable: *const EsrObservable,
    eigenvalues: *const f64,
    n_eigenvalues: usize,
    out: *mut f64,
) -> EsrStatus {
    guard(|| {
        let prop = property_arg(observable, eigenvalues, n_eigenvalues, false)?;
        write_out(out, quantum_prob(&as_ref(state, "state")?.0, &prop)?)
    })
}

/// Detection probability of the property.
///
/// # Safety
/// Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_detect_prob(
    state: *const EsrState,
    observable: *const EsrObservable,
    eigenvalues: *const f64,
    n_eigenvalues: usize,
    detection: *const EsrDetection,
    out: *mut f64,
) -> EsrStatus {
    guard(|| {
        let prop = property_arg(observable, eigenvalues, n_eigenvalues, false)?;
        let d = detect_prob_property(&as_ref(detection, "detection")?.0, &as_ref(state, "state")?.0, &prop)?;
        write_out(out, d)
    })
}

/// Overall probability computed on the composite space with the effect
/// lifted to `T(X) (x) I`. Only valid for improper states that remember
/// their composite origin.
///
/// # Safety
/// Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_composite_overall_prob(
    state: *const EsrState,
    observable: *const EsrObservable,
    eigenvalues: *const f64,
    n_eigenvalues: usize,
    detection: *const EsrDetection,
    out: *mut f64,
) -> EsrStatus {
    guard(|| {
        let State::Improper(n) = &as_ref(state, "state")?.0 else {
            return Err(fail(EsrStatus::WrongStateKind, "state is not an improper mixture"));
        };
        let prov = n
            .provenance()
            .ok_or_else(|| fail(EsrStatus::WrongStateKind, "improper mixture has no composite origin"))?;
        let prop = property_arg(observable, eigenvalues, n_eigenvalues, false)?;
        let p = composite_overall_prob(
            &prov.psi,
            prov.dim_first,
            prov.dim_second,
            &prop,
            &as_ref(detection, "detection")?.0,
            Some(n.label()),
        )?;
        write_out(out, p)
    })
}

// ---- scenarios and sampling ----

/// Spin-1/2 mixture `p_plus |+z><+z| + (1 - p_plus) |-z><-z|` with
/// per-component detection, measured for spin up at polar angle `theta`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_spin_scenario(
    p_plus: f64,
    d_plus: f64,
    d_minus: f64,
    theta: f64,
    out: *mut EsrResultRow,
) -> EsrStatus {
    guard(|| {
        let row = spin_scenario(p_plus, d_plus, d_minus, theta)?;
        write_out(
            out,
            EsrResultRow {
                sweep_value: row.sweep_value,
                p_conditional: row.p_conditional,
                p_overall: row.p_overall,
                p_quantum: row.p_quantum,
                p_detect: row.p_detect,
                mc_frequency: row.mc_frequency.unwrap_or(f64::NAN),
                mc_halfwidth: row.mc_halfwidth.unwrap_or(f64::NAN),
            },
        )
    })
}

/// Samples `n` preparations and measurements. Deterministic in `seed`.
///
/// # Safety
/// Handles must be live; `eigenvalues` must hold `n_eigenvalues` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_run_ensemble(
    state: *const EsrState,
    observable: *const EsrObservable,
    eigenvalues: *const f64,
    n_eigenvalues: usize,
    detection: *const EsrDetection,
    n: u64,
    seed: u64,
    z: f64,
    out: *mut EsrEnsembleSummary,
) -> EsrStatus {
    guard(|| {
        let prop = property_arg(observable, eigenvalues, n_eigenvalues, false)?;
        let opts = McOptions { n, seed, z };
        let report = run_ensemble(
            &as_ref(state, "state")?.0,
            &prop,
            &as_ref(detection, "detection")?.0,
            &opts,
        )?;
        write_out(
            out,
            EsrEnsembleSummary {
                n_total: report.n_total,
                n_detected: report.n_detected,
                n_yes: report.n_yes,
                yes_frequency: report.yes_frequency,
                confidence_halfwidth: report.confidence_halfwidth,
            },
        )
    })
}
