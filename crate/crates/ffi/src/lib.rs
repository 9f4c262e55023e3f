//! C ABI over `memento-core`.
//!
//! Every function returns a [`MementoStatus`]. Strings handed out are
//! NUL-terminated and owned by the caller, who releases them with
//! [`memento_string_free`]; byte buffers go back through
//! [`memento_bytes_free`]. After a failure [`memento_last_error`] describes
//! it until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use memento_core::media::MediaType;
use memento_core::service::{MementoService, Method, Request};
use memento_core::store::{Archive, StoreError, UriLayout};
use memento_core::time::{ResourceUri, Timestamp};
use memento_core::timegate::{negotiate, NegotiationDecision, NegotiationRequest};
use memento_core::timemap::{build_timemap, serialize_rdfxml, TimeMapError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MementoStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    MalformedDate = 3,
    MalformedUri = 4,
    Io = 5,
    CorruptArchive = 6,
    UnknownSubject = 7,
    NoMementos = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MementoDecisionKind {
    RedirectToMemento = 0,
    RedirectToOriginal = 1,
    MultipleChoices = 2,
    NotAcceptable = 3,
}

/// An opened archive and the HTTP service over it.
pub struct MementoArchive {
    archive: Arc<Archive>,
    service: MementoService,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MementoStatus, String);

type FfiResult = Result<(), Failure>;

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn guard(body: impl FnOnce() -> FfiResult) -> MementoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MementoStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            MementoStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(MementoStatus::NullArgument, format!("{name} is null"))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(MementoStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn uri(raw: &str) -> Result<ResourceUri, Failure> {
    ResourceUri::parse(raw).map_err(|e| Failure(MementoStatus::MalformedUri, e.to_string()))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

fn store_failure(e: StoreError) -> Failure {
    let status = match &e {
        StoreError::UnknownSubject(_) => MementoStatus::UnknownSubject,
        StoreError::Corrupt(_) => MementoStatus::CorruptArchive,
        _ => MementoStatus::Io,
    };
    Failure(status, e.to_string())
}

/// Parses an HTTP-date into seconds since the Unix epoch.
///
/// # Safety
/// `raw` is a NUL-terminated string; `out_unix` is writable.
#[no_mangle]
pub unsafe extern "C" fn memento_parse_http_date(raw: *const c_char, out_unix: *mut i64) -> MementoStatus {
    guard(|| {
        let raw = text(raw, "raw")?;
        if out_unix.is_null() {
            return Err(null("out_unix"));
        }
        let t = Timestamp::parse_http_date(raw).map_err(|e| Failure(MementoStatus::MalformedDate, e.to_string()))?;
        *out_unix = t.unix();
        Ok(())
    })
}

/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn memento_format_http_date(unix_seconds: i64, out: *mut *mut c_char) -> MementoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = Timestamp::from_unix(unix_seconds)
            .ok_or_else(|| Failure(MementoStatus::MalformedDate, format!("{unix_seconds} is out of range")))?;
        *out = owned_string(t.http_date());
        Ok(())
    })
}

/// Opens an ingested archive. Resource URIs are minted under `base_url`.
///
/// # Safety
/// `dir` and `base_url` are NUL-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn memento_archive_open(
    dir: *const c_char,
    base_url: *const c_char,
    out: *mut *mut MementoArchive,
) -> MementoStatus {
    guard(|| {
        let dir = text(dir, "dir")?;
        let base = uri(text(base_url, "base_url")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let archive = Arc::new(Archive::open(Path::new(dir), UriLayout::new(base.as_str())).map_err(store_failure)?);
        let service = MementoService::new(archive.clone(), MediaType::RdfXml);
        *out = Box::into_raw(Box::new(MementoArchive { archive, service }));
        Ok(())
    })
}

/// # Safety
/// `archive` is null or a handle from [`memento_archive_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn memento_archive_free(archive: *mut MementoArchive) {
    if !archive.is_null() {
        drop(Box::from_raw(archive));
    }
}

/// Runs datetime negotiation for `subject`. `accept_datetime` may be null
/// for a request without `Accept-Datetime`. `out_location` receives the
/// redirect target, or null for the other decisions.
///
/// # Safety
/// `archive` is a live handle; `subject` a NUL-terminated string;
/// `accept_datetime` null or readable; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn memento_negotiate(
    archive: *const MementoArchive,
    subject: *const c_char,
    accept_datetime: *const i64,
    out_kind: *mut MementoDecisionKind,
    out_location: *mut *mut c_char,
) -> MementoStatus {
    guard(|| {
        let handle = archive.as_ref().ok_or_else(|| null("archive"))?;
        let subject = uri(text(subject, "subject")?)?;
        if out_kind.is_null() || out_location.is_null() {
            return Err(null("out"));
        }
        let mut req = NegotiationRequest::new(subject);
        if let Some(&t) = accept_datetime.as_ref() {
            req = req.at(Timestamp::from_unix(t)
                .ok_or_else(|| Failure(MementoStatus::MalformedDate, format!("{t} is out of range")))?);
        }
        let decision = negotiate(&handle.archive, &req).map_err(store_failure)?;
        let (kind, location) = match decision {
            NegotiationDecision::RedirectToMemento { record, .. } => {
                (MementoDecisionKind::RedirectToMemento, Some(record.memento_uri))
            }
            NegotiationDecision::RedirectToOriginal { uri, .. } => (MementoDecisionKind::RedirectToOriginal, Some(uri)),
            NegotiationDecision::MultipleChoices { .. } => (MementoDecisionKind::MultipleChoices, None),
            NegotiationDecision::NotAcceptable { .. } => (MementoDecisionKind::NotAcceptable, None),
        };
        *out_kind = kind;
        *out_location = location.map_or(ptr::null_mut(), |u| owned_string(u.into_string()));
        Ok(())
    })
}

/// The RDF/XML TimeMap of `subject`.
///
/// # Safety
/// `archive` is a live handle; `subject` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn memento_timemap(
    archive: *const MementoArchive,
    subject: *const c_char,
    out: *mut *mut c_char,
) -> MementoStatus {
    guard(|| {
        let handle = archive.as_ref().ok_or_else(|| null("archive"))?;
        let subject = uri(text(subject, "subject")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = build_timemap(&handle.archive, &subject).map_err(|e| match e {
            TimeMapError::UnknownSubject(_) => Failure(MementoStatus::UnknownSubject, e.to_string()),
            TimeMapError::NoMementos(_) => Failure(MementoStatus::NoMementos, e.to_string()),
            other => Failure(MementoStatus::Io, other.to_string()),
        })?;
        *out = owned_string(String::from_utf8_lossy(&serialize_rdfxml(&doc)).into_owned());
        Ok(())
    })
}

/// Answers one HTTP request in-process. `headers` holds `Name: value`
/// lines and may be null. Response headers come back in the same form.
///
/// # Safety
/// String arguments are NUL-terminated (or null where allowed); out
/// pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn memento_service_request(
    archive: *const MementoArchive,
    method: *const c_char,
    target: *const c_char,
    headers: *const c_char,
    out_status: *mut u16,
    out_headers: *mut *mut c_char,
    out_body: *mut *mut u8,
    out_body_len: *mut usize,
) -> MementoStatus {
    guard(|| {
        let handle = archive.as_ref().ok_or_else(|| null("archive"))?;
        let method = Method::parse(text(method, "method")?);
        let target = text(target, "target")?.to_string();
        let headers = if headers.is_null() { "" } else { text(headers, "headers")? };
        if out_status.is_null() || out_headers.is_null() || out_body.is_null() || out_body_len.is_null() {
            return Err(null("out"));
        }
        let headers = headers
            .lines()
            .filter_map(|l| l.split_once(':'))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        let resp = handle.service.handle(&Request { method, target, headers });
        *out_status = resp.status;
        *out_headers = owned_string(resp.headers.iter().map(|(k, v)| format!("{k}: {v}\n")).collect());
        let body = resp.body.into_boxed_slice();
        *out_body_len = body.len();
        *out_body = Box::into_raw(body) as *mut u8;
        Ok(())
    })
}

/// # Safety
/// `s` is null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn memento_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `ptr`/`len` came from [`memento_service_request`] and are not yet freed.
#[no_mangle]
pub unsafe extern "C" fn memento_bytes_free(ptr: *mut u8, len: usize) {
    if !ptr.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(ptr, len)));
    }
}

/// Message for the last failure on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn memento_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
