//! The wire layer, independent of any HTTP server: maps a request on one of
//! the archive routes to a status, headers and body.
//!
//! Routes, relative to the base URL's path:
//!
//! | route                           | answer                                   |
//! |---------------------------------|------------------------------------------|
//! | `/resource/<uri>`               | 200, current state, `timegate` Link      |
//! | `/timegate/<uri>`               | 302 / 300 / 406 by `Accept-Datetime`     |
//! | `/memento/<YYYYMMDD>/<uri>`     | 200, archived state, `Content-Datetime`  |
//! | `/timemap/rdf/<uri>`            | 200, RDF/XML TimeMap                     |
//! | `/timebundle/<uri>`             | 303 to the TimeMap                       |

use std::path::PathBuf;
use std::sync::Arc;

use percent_encoding::percent_decode_str;

use crate::link::{format_link_header, LinkEntry, LinkRelation};
use crate::media::{negotiate_media, render_html, render_rdfxml, MediaType};
use crate::rdf;
use crate::store::{Archive, KnownRange, MementoRecord, StoreError};
use crate::time::{ResourceUri, Timestamp};
use crate::timegate::{self, NegotiationDecision, NegotiationRequest};
use crate::timemap::{self, TimeMapError};

pub const VARY_TIMEGATE: &str = "negotiate, accept-datetime";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: std::net::SocketAddr,
    pub base_url: ResourceUri,
    pub archive_path: PathBuf,
    pub default_media: MediaType,
    /// Redirect to the subject URIs themselves instead of `/resource/…`.
    pub external_originals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Head,
    Other,
}

impl Method {
    pub fn parse(raw: &str) -> Self {
        match raw {
            "GET" => Method::Get,
            "HEAD" => Method::Head,
            _ => Method::Other,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Request {
    pub method: Method,
    /// Path and query as received, e.g. `/timegate/http://e.x/r?a=1`.
    pub target: String,
    pub headers: Vec<(String, String)>,
}

impl Request {
    pub fn get(target: impl Into<String>) -> Self {
        Request { method: Method::Get, target: target.into(), headers: Vec::new() }
    }

    pub fn head(target: impl Into<String>) -> Self {
        Request { method: Method::Head, target: target.into(), headers: Vec::new() }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_string(), value.into()));
        self
    }

    /// Values of `name` joined with `, `, or `None` when absent.
    pub fn header_value(&self, name: &str) -> Option<String> {
        let values: Vec<&str> =
            self.headers.iter().filter(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str()).collect();
        (!values.is_empty()).then(|| values.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Response {
    fn new(status: u16) -> Self {
        Response { status, headers: Vec::new(), body: Vec::new() }
    }

    fn text(status: u16, body: impl Into<String>) -> Self {
        Response::new(status)
            .with_header("Content-Type", "text/plain; charset=utf-8")
            .with_body(body.into().into_bytes())
    }

    fn with_header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_string(), value.into()));
        self
    }

    fn with_links(self, links: &[LinkEntry]) -> Self {
        if links.is_empty() {
            self
        } else {
            self.with_header("Link", format_link_header(links))
        }
    }

    fn with_body(mut self, body: Vec<u8>) -> Self {
        self.body = body;
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

/// Stateless request handler over a read-only archive.
#[derive(Debug, Clone)]
pub struct MementoService {
    archive: Arc<Archive>,
    default_media: MediaType,
    base_path: String,
}

enum Route<'a> {
    Original(&'a str),
    TimeGate(&'a str),
    Memento(&'a str, &'a str),
    TimeMap(&'a str, &'a str),
    TimeBundle(&'a str),
}

fn route(path: &str) -> Option<Route<'_>> {
    let (head, rest) = path.strip_prefix('/')?.split_once('/')?;
    match head {
        "resource" => Some(Route::Original(rest)),
        "timegate" => Some(Route::TimeGate(rest)),
        "timebundle" => Some(Route::TimeBundle(rest)),
        "memento" => rest.split_once('/').map(|(date, uri)| Route::Memento(date, uri)),
        "timemap" => rest.split_once('/').map(|(fmt, uri)| Route::TimeMap(fmt, uri)),
        _ => None,
    }
}

/// The embedded URI, percent-decoded when a client escaped it whole.
fn embedded_subject(raw: &str) -> Option<ResourceUri> {
    let decoded;
    let raw = if !raw.contains("://") && raw.contains('%') {
        decoded = percent_decode_str(raw).decode_utf8().ok()?;
        decoded.as_ref()
    } else {
        raw
    };
    ResourceUri::parse(raw).ok()
}

fn not_found(what: &str) -> Response {
    Response::text(404, format!("not found: {what}\n"))
}

fn media_for(req: &Request, default: MediaType) -> Option<MediaType> {
    negotiate_media(req.header_value("Accept").as_deref(), default)
}

fn not_acceptable_media() -> Response {
    let offered: Vec<&str> = MediaType::ALL.iter().map(MediaType::essence).collect();
    Response::text(406, format!("no acceptable representation; available: {}\n", offered.join(", ")))
}

impl MementoService {
    pub fn new(archive: Arc<Archive>, default_media: MediaType) -> Self {
        let base = archive.layout().base();
        let after_scheme = base.split_once("://").map_or(base, |(_, rest)| rest);
        let base_path = after_scheme.find('/').map_or("", |i| &after_scheme[i..]).to_string();
        MementoService { archive, default_media, base_path }
    }

    pub fn archive(&self) -> &Arc<Archive> {
        &self.archive
    }

    pub fn handle(&self, req: &Request) -> Response {
        let mut resp = self.dispatch(req);
        resp.headers.push(("Content-Length".into(), resp.body.len().to_string()));
        if req.method == Method::Head {
            resp.body.clear();
        }
        resp
    }

    fn dispatch(&self, req: &Request) -> Response {
        if req.method == Method::Other {
            return Response::text(405, "method not allowed\n").with_header("Allow", "GET, HEAD");
        }
        let Some(path) = req.target.strip_prefix(self.base_path.as_str()) else {
            return not_found(&req.target);
        };
        let Some(route) = route(path) else {
            return not_found(path);
        };
        let subject_raw = match &route {
            Route::Original(u) | Route::TimeGate(u) | Route::TimeBundle(u) => *u,
            Route::Memento(_, u) | Route::TimeMap(_, u) => *u,
        };
        let Some(subject) = embedded_subject(subject_raw) else {
            return not_found(subject_raw);
        };
        match route {
            Route::Original(_) => self.route_original(req, &subject),
            Route::TimeGate(_) => self.route_timegate(req, &subject),
            Route::Memento(date, _) => self.route_memento(req, date, &subject),
            Route::TimeMap(format, _) => self.route_timemap(format, &subject),
            Route::TimeBundle(_) => self.route_timebundle(&subject),
        }
    }

    fn render(&self, media: MediaType, repr: &[u8], title: &str, note: Option<&str>) -> Result<Vec<u8>, Response> {
        if media == MediaType::NTriples {
            return Ok(repr.to_vec());
        }
        let triples = rdf::parse_document(repr).map_err(|e| Response::text(500, format!("archive damage: {e}\n")))?;
        match media {
            MediaType::RdfXml => {
                render_rdfxml(&triples).map(String::into_bytes).map_err(|e| Response::text(406, format!("{e}\n")))
            }
            MediaType::Html => Ok(render_html(title, &triples, note).into_bytes()),
            MediaType::NTriples => unreachable!(),
        }
    }

    pub fn route_original(&self, req: &Request, subject: &ResourceUri) -> Response {
        let repr = match self.archive.current_representation(subject) {
            Ok(Some(r)) => r,
            Ok(None) => return not_found(subject.as_str()),
            Err(e) => return Response::text(500, format!("{e}\n")),
        };
        let Some(media) = media_for(req, self.default_media) else {
            return not_acceptable_media();
        };
        let body = match self.render(media, &repr, subject.as_str(), None) {
            Ok(b) => b,
            Err(resp) => return resp,
        };
        Response::new(200)
            .with_header("Content-Type", media.content_type())
            .with_header("Vary", "accept")
            .with_links(&timegate::original_links(&self.archive, subject))
            .with_body(body)
    }

    pub fn route_timegate(&self, req: &Request, subject: &ResourceUri) -> Response {
        let accept_datetime = match req.header_value("Accept-Datetime") {
            None => None,
            Some(raw) => match Timestamp::parse_http_date(raw.trim()) {
                Ok(t) => Some(t),
                Err(e) => {
                    return Response::text(400, format!("{e}\n")).with_header("Vary", VARY_TIMEGATE);
                }
            },
        };
        let explicit_negotiate =
            req.header_value("Negotiate").is_some_and(|v| v.split(',').any(|tok| tok.trim() == "1.0"));
        let accept_media: Vec<String> = req
            .header_value("Accept")
            .map(|a| a.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default();
        let neg =
            NegotiationRequest { accept_datetime, explicit_negotiate, ..NegotiationRequest::new(subject.clone()) }
                .with_media(accept_media);
        match timegate::negotiate(&self.archive, &neg) {
            Ok(decision) => self.decision_response(subject, &decision),
            Err(StoreError::UnknownSubject(_)) => not_found(subject.as_str()).with_header("Vary", VARY_TIMEGATE),
            Err(e) => Response::text(500, format!("{e}\n")),
        }
    }

    /// Status, headers and body for a TimeGate decision.
    pub fn decision_response(&self, subject: &ResourceUri, decision: &NegotiationDecision) -> Response {
        let links = timegate::decision_links(&self.archive, decision);
        let resp = match decision {
            NegotiationDecision::RedirectToMemento { record, .. } => {
                Response::new(302).with_header("Location", record.memento_uri.as_str()).with_links(&links)
            }
            NegotiationDecision::RedirectToOriginal { uri, .. } => {
                Response::new(302).with_header("Location", uri.as_str()).with_links(&links)
            }
            NegotiationDecision::MultipleChoices { candidates } => self.multiple_choices(subject, candidates),
            NegotiationDecision::NotAcceptable { range } => self.out_of_range(subject, range),
        };
        resp.with_header("Vary", VARY_TIMEGATE)
    }

    fn multiple_choices(&self, subject: &ResourceUri, candidates: &[MementoRecord]) -> Response {
        let layout = self.archive.layout();
        let mut links = vec![LinkEntry::new(layout.original_uri(subject), LinkRelation::Original)];
        let mut body = String::new();
        for rec in candidates {
            let date = rec.interval.start().http_date();
            body.push_str(&format!("{} {date}\n", rec.memento_uri));
            links.push(
                LinkEntry::new(rec.memento_uri.clone(), LinkRelation::Other("memento".into()))
                    .with_param("datetime", date),
            );
        }
        Response::new(300)
            .with_header("Content-Type", "text/plain; charset=utf-8")
            .with_links(&links)
            .with_body(body.into_bytes())
    }

    fn out_of_range(&self, subject: &ResourceUri, range: &KnownRange) -> Response {
        let latest = if range.has_current { "now".to_string() } else { range.latest.http_date() };
        let body = format!(
            "Accept-Datetime is outside the range of known Mementos\nearliest: {}\nlatest: {latest}\n",
            range.earliest.http_date()
        );
        let layout = self.archive.layout();
        Response::text(406, body).with_links(&[
            LinkEntry::new(layout.original_uri(subject), LinkRelation::Original),
            LinkEntry::new(layout.timebundle_uri(subject), LinkRelation::TimeBundle),
        ])
    }

    pub fn route_memento(&self, req: &Request, date: &str, subject: &ResourceUri) -> Response {
        let Some(start) = Timestamp::parse_compact_date(date) else {
            return not_found(date);
        };
        let Some(record) = self.archive.memento_at(subject, start) else {
            return not_found(&format!("{date}/{subject}"));
        };
        let Some(media) = media_for(req, self.default_media) else {
            return not_acceptable_media();
        };
        let repr = match self.archive.representation(&record) {
            Ok(r) => r,
            Err(e) => return Response::text(500, format!("{e}\n")),
        };
        let note = format!("Memento of {subject} as of {}", record.interval.start().http_date());
        let body = match self.render(media, &repr, subject.as_str(), Some(&note)) {
            Ok(b) => b,
            Err(resp) => return resp,
        };
        Response::new(200)
            .with_header("Content-Type", media.content_type())
            .with_header("Content-Datetime", record.interval.start().http_date())
            .with_header("Vary", "accept")
            .with_links(&timegate::memento_links(&self.archive, &record))
            .with_body(body)
    }

    pub fn route_timemap(&self, format: &str, subject: &ResourceUri) -> Response {
        if format != "rdf" {
            return Response::text(406, format!("unsupported TimeMap format {format:?}; available: rdf\n"));
        }
        match timemap::build_timemap(&self.archive, subject) {
            Ok(doc) => Response::new(200)
                .with_header("Content-Type", timemap::MEDIA_TYPE)
                .with_body(timemap::serialize_rdfxml(&doc)),
            Err(TimeMapError::UnknownSubject(_) | TimeMapError::NoMementos(_)) => not_found(subject.as_str()),
            Err(e) => Response::text(500, format!("{e}\n")),
        }
    }

    pub fn route_timebundle(&self, subject: &ResourceUri) -> Response {
        if !self.archive.has_subject(subject) {
            return not_found(subject.as_str());
        }
        Response::new(303).with_header("Location", self.archive.layout().timemap_uri(subject).as_str())
    }
}
