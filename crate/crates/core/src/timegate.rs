//! Datetime content negotiation: the decision a TimeGate makes for a
//! request, independent of any wire format.

use crate::link::{LinkEntry, LinkRelation};
use crate::media::MediaType;
use crate::store::{Archive, KnownRange, LookupResult, MementoRecord, StoreError};
use crate::time::{ResourceUri, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegotiationRequest {
    pub subject: ResourceUri,
    pub accept_datetime: Option<Timestamp>,
    /// `Negotiate: 1.0` was sent.
    pub explicit_negotiate: bool,
    /// Media-type preferences in header order; never empty.
    pub accept_media: Vec<String>,
}

impl NegotiationRequest {
    pub fn new(subject: ResourceUri) -> Self {
        NegotiationRequest {
            subject,
            accept_datetime: None,
            explicit_negotiate: false,
            accept_media: vec![MediaType::RdfXml.essence().to_string()],
        }
    }

    pub fn at(mut self, t: Timestamp) -> Self {
        self.accept_datetime = Some(t);
        self
    }

    pub fn negotiate_explicitly(mut self) -> Self {
        self.explicit_negotiate = true;
        self
    }

    pub fn with_media(mut self, media: Vec<String>) -> Self {
        if !media.is_empty() {
            self.accept_media = media;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NegotiationDecision {
    RedirectToMemento {
        record: MementoRecord,
        links: Vec<LinkEntry>,
    },
    RedirectToOriginal {
        uri: ResourceUri,
        links: Vec<LinkEntry>,
    },
    /// Candidates ascending by interval start.
    MultipleChoices {
        candidates: Vec<MementoRecord>,
    },
    NotAcceptable {
        range: KnownRange,
    },
}

impl NegotiationDecision {
    pub fn kind(&self) -> &'static str {
        match self {
            NegotiationDecision::RedirectToMemento { .. } => "redirect-to-memento",
            NegotiationDecision::RedirectToOriginal { .. } => "redirect-to-original",
            NegotiationDecision::MultipleChoices { .. } => "multiple-choices",
            NegotiationDecision::NotAcceptable { .. } => "not-acceptable",
        }
    }

    /// The Memento this decision redirects to, if any.
    pub fn selected(&self) -> Option<&MementoRecord> {
        match self {
            NegotiationDecision::RedirectToMemento { record, .. } => Some(record),
            _ => None,
        }
    }
}

pub fn negotiate(archive: &Archive, req: &NegotiationRequest) -> Result<NegotiationDecision, StoreError> {
    let subject = &req.subject;
    let range = archive.known_range(subject)?;
    let versions = archive.list_versions(subject);

    if req.explicit_negotiate {
        return Ok(NegotiationDecision::MultipleChoices { candidates: versions });
    }

    let Some(t) = req.accept_datetime else {
        return Ok(match versions.last() {
            Some(latest) => redirect_to_memento(archive, latest.clone()),
            None => redirect_to_original(archive, subject),
        });
    };

    Ok(match archive.lookup(subject, t)? {
        LookupResult::OutOfRange => NegotiationDecision::NotAcceptable { range },
        LookupResult::Current => redirect_to_original(archive, subject),
        LookupResult::Memento(record) => {
            let same_time: Vec<_> =
                versions.iter().filter(|r| r.interval.start() == record.interval.start()).cloned().collect();
            if same_time.len() > 1 {
                NegotiationDecision::MultipleChoices { candidates: same_time }
            } else {
                redirect_to_memento(archive, record)
            }
        }
    })
}

fn redirect_to_memento(archive: &Archive, record: MementoRecord) -> NegotiationDecision {
    let links = memento_links(archive, &record);
    NegotiationDecision::RedirectToMemento { record, links }
}

fn redirect_to_original(archive: &Archive, subject: &ResourceUri) -> NegotiationDecision {
    NegotiationDecision::RedirectToOriginal {
        uri: archive.layout().original_uri(subject),
        links: original_links(archive, subject),
    }
}

fn memento_link(record: &MementoRecord, rel: LinkRelation) -> LinkEntry {
    LinkEntry::new(record.memento_uri.clone(), rel).with_param("datetime", record.interval.start().http_date())
}

/// `original`, `first-memento` and `last-memento` always; `prev-memento`
/// and `next-memento` when those neighbors exist.
pub fn memento_links(archive: &Archive, record: &MementoRecord) -> Vec<LinkEntry> {
    let subject = &record.subject;
    let mut links = vec![LinkEntry::new(archive.layout().original_uri(subject), LinkRelation::Original)];
    if let Some(n) = archive.neighbors(subject, record) {
        links.push(memento_link(&n.first, LinkRelation::FirstMemento));
        links.push(memento_link(&n.last, LinkRelation::LastMemento));
        if let Some(prev) = &n.prev {
            links.push(memento_link(prev, LinkRelation::PrevMemento));
        }
        if let Some(next) = &n.next {
            links.push(memento_link(next, LinkRelation::NextMemento));
        }
    }
    links
}

/// Links advertised by an original resource.
pub fn original_links(archive: &Archive, subject: &ResourceUri) -> Vec<LinkEntry> {
    let layout = archive.layout();
    vec![
        LinkEntry::new(layout.timegate_uri(subject), LinkRelation::TimeGate),
        LinkEntry::new(layout.timebundle_uri(subject), LinkRelation::TimeBundle),
    ]
}

/// Link set accompanying a redirect decision; empty for the others.
pub fn decision_links(archive: &Archive, decision: &NegotiationDecision) -> Vec<LinkEntry> {
    match decision {
        NegotiationDecision::RedirectToMemento { record, .. } => memento_links(archive, record),
        NegotiationDecision::RedirectToOriginal { links, .. } => links.clone(),
        _ => Vec::new(),
    }
}
