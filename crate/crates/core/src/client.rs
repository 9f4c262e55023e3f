//! Follow-your-nose Memento client: finds a resource's TimeGate from its
//! Link header, negotiates in the datetime dimension, and moves between
//! Mementos through their `original` links.

use std::time::Duration;

use reqwest::Url;
use thiserror::Error;

use crate::link::{find_rel, parse_link_header, LinkEntry, LinkRelation};
use crate::service::{MementoService, Method, Request, Response};
use crate::time::{ResourceUri, Timestamp};

pub const DEFAULT_MAX_REDIRECTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("no timegate link advertised by {0}")]
    NoTimeGate(ResourceUri),
    #[error("requested datetime is outside the archived range ({range})")]
    OutOfRange { range: String },
    #[error("gave up after {0} redirects")]
    TooManyRedirects(usize),
    #[error("no original link on {0}")]
    NoOriginalLink(ResourceUri),
    #[error("server offered {} alternatives", .0.len())]
    MultipleChoices(Vec<ResourceUri>),
    #[error("{uri} answered {status}")]
    HttpStatus { uri: ResourceUri, status: u16 },
    #[error("malformed response from {uri}: {reason}")]
    MalformedResponse { uri: ResourceUri, reason: String },
    #[error("transport error: {0}")]
    Transport(String),
}

/// Moves one request and response. Redirects are never followed here.
pub trait Transport {
    fn send(&self, method: Method, uri: &ResourceUri, headers: &[(String, String)]) -> Result<Response, ClientError>;
}

/// Real HTTP via a blocking reqwest client.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, ClientError> {
        let client = reqwest::blocking::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(timeout)
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn send(&self, method: Method, uri: &ResourceUri, headers: &[(String, String)]) -> Result<Response, ClientError> {
        let mut req = match method {
            Method::Head => self.client.head(uri.as_str()),
            _ => self.client.get(uri.as_str()),
        };
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let resp = req.send().map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_string(), v.to_string())))
            .collect();
        let body = resp.bytes().map_err(|e| ClientError::Transport(e.to_string()))?.to_vec();
        Ok(Response { status, headers, body })
    }
}

/// Calls a service in-process. Only URIs under the service's base URL are
/// reachable.
#[derive(Debug, Clone)]
pub struct LocalTransport {
    service: MementoService,
    origin: String,
}

impl LocalTransport {
    pub fn new(service: MementoService) -> Self {
        let base = service.archive().layout().base().to_string();
        let origin = match base.split_once("://") {
            Some((scheme, rest)) => format!("{scheme}://{}", rest.split('/').next().unwrap_or(rest)),
            None => base,
        };
        LocalTransport { service, origin }
    }
}

impl Transport for LocalTransport {
    fn send(&self, method: Method, uri: &ResourceUri, headers: &[(String, String)]) -> Result<Response, ClientError> {
        let target = uri
            .as_str()
            .strip_prefix(self.origin.as_str())
            .filter(|rest| rest.starts_with('/'))
            .ok_or_else(|| ClientError::Transport(format!("{uri} is not served locally")))?;
        let request = Request { method, target: target.to_string(), headers: headers.to_vec() };
        Ok(self.service.handle(&request))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MementoResponse {
    pub final_uri: ResourceUri,
    pub body: Vec<u8>,
    pub media_type: String,
    /// Present exactly when the final response was a Memento.
    pub content_datetime: Option<Timestamp>,
    pub links: Vec<LinkEntry>,
    pub hops: usize,
    /// Set when the returned Memento's links show it does not cover the
    /// requested datetime.
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MementoClient<T> {
    transport: T,
    max_redirects: usize,
}

fn header<'a>(resp: &'a Response, name: &str) -> Option<&'a str> {
    resp.header(name)
}

fn links_of(uri: &ResourceUri, resp: &Response) -> Result<Vec<LinkEntry>, ClientError> {
    let mut out = Vec::new();
    for (k, v) in &resp.headers {
        if k.eq_ignore_ascii_case("link") {
            out.extend(
                parse_link_header(v)
                    .map_err(|e| ClientError::MalformedResponse { uri: uri.clone(), reason: e.to_string() })?,
            );
        }
    }
    Ok(out)
}

fn is_redirect(status: u16) -> bool {
    matches!(status, 301 | 302 | 303 | 307 | 308)
}

fn resolve(base: &ResourceUri, location: &str) -> Result<ResourceUri, ClientError> {
    let malformed = |reason: String| ClientError::MalformedResponse { uri: base.clone(), reason };
    if let Ok(abs) = ResourceUri::parse(location) {
        return Ok(abs);
    }
    let joined = Url::parse(base.as_str())
        .and_then(|b| b.join(location))
        .map_err(|e| malformed(format!("bad Location {location:?}: {e}")))?;
    ResourceUri::parse(joined.as_str()).map_err(|e| malformed(e.to_string()))
}

impl<T: Transport> MementoClient<T> {
    pub fn new(transport: T) -> Self {
        MementoClient { transport, max_redirects: DEFAULT_MAX_REDIRECTS }
    }

    pub fn with_max_redirects(mut self, max: usize) -> Self {
        self.max_redirects = max;
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// The TimeGate for `uri`. A URI that itself negotiates on
    /// `Accept-Datetime` is its own TimeGate; a Memento is resolved through
    /// its original resource.
    pub fn discover_timegate(&self, uri: &ResourceUri) -> Result<ResourceUri, ClientError> {
        self.discover(uri, true)
    }

    fn discover(&self, uri: &ResourceUri, may_hop: bool) -> Result<ResourceUri, ClientError> {
        let mut last_status = None;
        for method in [Method::Head, Method::Get] {
            let resp = self.transport.send(method, uri, &[])?;
            let vary = header(&resp, "vary").unwrap_or("").to_ascii_lowercase();
            if is_redirect(resp.status) && vary.contains("accept-datetime") {
                return Ok(uri.clone());
            }
            if !(200..400).contains(&resp.status) {
                last_status = Some(resp.status);
                continue;
            }
            let links = links_of(uri, &resp)?;
            if let Some(gate) = find_rel(&links, &LinkRelation::TimeGate) {
                return Ok(gate.clone());
            }
            if let Some(original) = find_rel(&links, &LinkRelation::Original).filter(|o| *o != uri) {
                if may_hop {
                    return self.discover(original, false);
                }
            }
            last_status = None;
        }
        match last_status {
            Some(status) => Err(ClientError::HttpStatus { uri: uri.clone(), status }),
            None => Err(ClientError::NoTimeGate(uri.clone())),
        }
    }

    /// Plain retrieval, following redirects.
    pub fn fetch(&self, uri: &ResourceUri, media: &str) -> Result<MementoResponse, ClientError> {
        self.follow(uri.clone(), vec![("Accept".into(), media.to_string())], None)
    }

    /// The state of `uri` as of `t`.
    pub fn fetch_at(&self, uri: &ResourceUri, t: Timestamp, media: &str) -> Result<MementoResponse, ClientError> {
        let gate = self.discover_timegate(uri)?;
        let headers = vec![("Accept".into(), media.to_string()), ("Accept-Datetime".into(), t.http_date())];
        self.follow(gate, headers, Some(t))
    }

    /// From any version of a resource to its state as of `t`. An original
    /// resource counts as its own original.
    pub fn renavigate(&self, uri: &ResourceUri, t: Timestamp, media: &str) -> Result<MementoResponse, ClientError> {
        let mut resp = self.transport.send(Method::Head, uri, &[])?;
        if !(200..300).contains(&resp.status) {
            resp = self.transport.send(Method::Get, uri, &[])?;
        }
        if !(200..300).contains(&resp.status) {
            return Err(ClientError::HttpStatus { uri: uri.clone(), status: resp.status });
        }
        let links = links_of(uri, &resp)?;
        let original = match find_rel(&links, &LinkRelation::Original) {
            Some(o) => o.clone(),
            None if find_rel(&links, &LinkRelation::TimeGate).is_some() => uri.clone(),
            None => return Err(ClientError::NoOriginalLink(uri.clone())),
        };
        self.fetch_at(&original, t, media)
    }

    fn follow(
        &self,
        start: ResourceUri,
        headers: Vec<(String, String)>,
        requested: Option<Timestamp>,
    ) -> Result<MementoResponse, ClientError> {
        let mut uri = start;
        let mut hops = 0;
        loop {
            let resp = self.transport.send(Method::Get, &uri, &headers)?;
            match resp.status {
                s if is_redirect(s) => {
                    if hops == self.max_redirects {
                        return Err(ClientError::TooManyRedirects(hops));
                    }
                    let location = header(&resp, "location").ok_or_else(|| ClientError::MalformedResponse {
                        uri: uri.clone(),
                        reason: "redirect without Location".into(),
                    })?;
                    uri = resolve(&uri, location)?;
                    hops += 1;
                }
                300 => {
                    let links = links_of(&uri, &resp)?;
                    let choices = links
                        .into_iter()
                        .filter(|l| l.has_rel(&LinkRelation::Other("memento".into())))
                        .map(|l| l.target)
                        .collect();
                    return Err(ClientError::MultipleChoices(choices));
                }
                406 if requested.is_some() && hops == 0 => {
                    let range = String::from_utf8_lossy(&resp.body)
                        .lines()
                        .filter(|l| l.starts_with("earliest:") || l.starts_with("latest:"))
                        .collect::<Vec<_>>()
                        .join(", ");
                    return Err(ClientError::OutOfRange { range });
                }
                200..=299 => return self.finish(uri, resp, hops, requested),
                status => return Err(ClientError::HttpStatus { uri, status }),
            }
        }
    }

    fn finish(
        &self,
        uri: ResourceUri,
        resp: Response,
        hops: usize,
        requested: Option<Timestamp>,
    ) -> Result<MementoResponse, ClientError> {
        let links = links_of(&uri, &resp)?;
        let content_datetime = match header(&resp, "content-datetime") {
            Some(raw) => Some(
                Timestamp::parse_http_date(raw.trim())
                    .map_err(|e| ClientError::MalformedResponse { uri: uri.clone(), reason: e.to_string() })?,
            ),
            None => None,
        };
        let warning = match (requested, content_datetime) {
            (Some(t), Some(start)) => coverage_warning(t, start, &links),
            _ => None,
        };
        Ok(MementoResponse {
            final_uri: uri,
            media_type: header(&resp, "content-type").unwrap_or("").to_string(),
            body: resp.body,
            content_datetime,
            links,
            hops,
            warning,
        })
    }
}

fn coverage_warning(t: Timestamp, start: Timestamp, links: &[LinkEntry]) -> Option<String> {
    if t < start {
        return Some(format!("requested {} precedes the returned version ({})", t.http_date(), start.http_date()));
    }
    let next = links
        .iter()
        .find(|l| l.has_rel(&LinkRelation::NextMemento))
        .and_then(|l| l.param("datetime"))
        .and_then(|d| Timestamp::parse_http_date(d).ok())?;
    (t >= next)
        .then(|| format!("requested {} is not covered; a later version starts {}", t.http_date(), next.http_date()))
}

impl MementoClient<HttpTransport> {
    pub fn http() -> Result<Self, ClientError> {
        Ok(MementoClient::new(HttpTransport::new(Duration::from_secs(30))?))
    }
}

impl MementoClient<LocalTransport> {
    pub fn local(service: MementoService) -> Self {
        MementoClient::new(LocalTransport::new(service))
    }
}
