//! Media-type negotiation and the renderings of an archived triple set.

use std::fmt::Write as _;

use quick_xml::escape::escape;

use crate::rdf::{Term, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MediaType {
    RdfXml,
    NTriples,
    Html,
}

impl MediaType {
    pub const ALL: [MediaType; 3] = [MediaType::RdfXml, MediaType::NTriples, MediaType::Html];

    pub fn essence(&self) -> &'static str {
        match self {
            MediaType::RdfXml => "application/rdf+xml",
            MediaType::NTriples => "application/n-triples",
            MediaType::Html => "text/html",
        }
    }

    pub fn content_type(&self) -> &'static str {
        match self {
            MediaType::RdfXml => "application/rdf+xml",
            MediaType::NTriples => "application/n-triples; charset=utf-8",
            MediaType::Html => "text/html; charset=utf-8",
        }
    }

    /// Short names used on the command line, plus full media types.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "rdf" | "rdfxml" | "rdf+xml" | "application/rdf+xml" => Some(MediaType::RdfXml),
            "nt" | "ntriples" | "n-triples" | "application/n-triples" => Some(MediaType::NTriples),
            "html" | "text/html" => Some(MediaType::Html),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct MediaRange {
    kind: String,
    subtype: String,
    q: f32,
}

fn parse_accept(raw: &str) -> Vec<MediaRange> {
    raw.split(',')
        .filter_map(|part| {
            let mut pieces = part.split(';');
            let range = pieces.next()?.trim().to_ascii_lowercase();
            let (kind, subtype) = range.split_once('/')?;
            let mut q = 1.0;
            for p in pieces {
                if let Some((k, v)) = p.split_once('=') {
                    if k.trim().eq_ignore_ascii_case("q") {
                        q = v.trim().parse::<f32>().ok().filter(|q| (0.0..=1.0).contains(q))?;
                    }
                }
            }
            Some(MediaRange { kind: kind.trim().to_string(), subtype: subtype.trim().to_string(), q })
        })
        .collect()
}

/// Quality the header assigns to `media`, taken from the most specific
/// matching range.
fn quality(ranges: &[MediaRange], media: MediaType) -> f32 {
    let (kind, subtype) = media.essence().split_once('/').expect("type/subtype");
    let mut best: Option<(u8, f32)> = None;
    for r in ranges {
        let specificity = if r.kind == kind && r.subtype == subtype {
            2
        } else if r.kind == kind && r.subtype == "*" {
            1
        } else if r.kind == "*" && r.subtype == "*" {
            0
        } else if media == MediaType::NTriples && r.kind == "text" && r.subtype == "plain" {
            2
        } else {
            continue;
        };
        if best.is_none_or(|(s, _)| specificity > s) {
            best = Some((specificity, r.q));
        }
    }
    best.map_or(0.0, |(_, q)| q)
}

/// Picks the representation for an `Accept` header. A missing or blank
/// header selects `default`; `None` means nothing acceptable is available.
pub fn negotiate_media(accept: Option<&str>, default: MediaType) -> Option<MediaType> {
    let Some(raw) = accept.filter(|a| !a.trim().is_empty()) else {
        return Some(default);
    };
    let ranges = parse_accept(raw);
    let mut candidates = vec![default];
    candidates.extend(MediaType::ALL.iter().copied().filter(|m| *m != default));
    let mut chosen: Option<(MediaType, f32)> = None;
    for m in candidates {
        let q = quality(&ranges, m);
        if q > 0.0 && chosen.is_none_or(|(_, best)| q > best) {
            chosen = Some((m, q));
        }
    }
    chosen.map(|(m, _)| m)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("predicate {0} cannot be written as an XML qualified name")]
pub struct UnsplittablePredicate(pub String);

const KNOWN_PREFIXES: &[(&str, &str)] = &[
    ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
    ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
    ("owl", "http://www.w3.org/2002/07/owl#"),
    ("xsd", "http://www.w3.org/2001/XMLSchema#"),
    ("foaf", "http://xmlns.com/foaf/0.1/"),
    ("dc", "http://purl.org/dc/elements/1.1/"),
    ("dcterms", "http://purl.org/dc/terms/"),
    ("dbpprop", "http://dbpedia.org/property/"),
    ("dbpedia-owl", "http://dbpedia.org/ontology/"),
];

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

/// Splits an IRI into namespace and the longest valid local name suffix.
fn split_iri(iri: &str) -> Option<(&str, &str)> {
    let mut split = None;
    for (i, c) in iri.char_indices().rev() {
        if !is_name_char(c) {
            break;
        }
        if is_name_start(c) {
            split = Some(i);
        }
    }
    let i = split?;
    (i > 0).then(|| (&iri[..i], &iri[i..]))
}

/// RDF/XML with one `rdf:Description` per subject, in order of first
/// appearance.
pub fn render_rdfxml(triples: &[Triple]) -> Result<String, UnsplittablePredicate> {
    let mut namespaces: Vec<(String, String)> = Vec::new();
    let mut qnames = Vec::with_capacity(triples.len());
    for t in triples {
        let (ns, local) =
            split_iri(t.predicate.as_str()).ok_or_else(|| UnsplittablePredicate(t.predicate.to_string()))?;
        let prefix = match namespaces.iter().find(|(_, uri)| uri == ns) {
            Some((p, _)) => p.clone(),
            None => {
                let p = KNOWN_PREFIXES
                    .iter()
                    .find(|(_, uri)| *uri == ns)
                    .map(|(p, _)| p.to_string())
                    .unwrap_or_else(|| format!("ns{}", namespaces.len() + 1));
                namespaces.push((p.clone(), ns.to_string()));
                p
            }
        };
        qnames.push(format!("{prefix}:{local}"));
    }

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<rdf:RDF\n");
    out.push_str("  xmlns:rdf=\"http://www.w3.org/1999/02/22-rdf-syntax-ns#\"");
    for (prefix, uri) in namespaces.iter().filter(|(p, _)| p != "rdf") {
        write!(out, "\n  xmlns:{prefix}=\"{}\"", escape(uri.as_str())).unwrap();
    }
    out.push_str(">\n");

    let mut order: Vec<&str> = Vec::new();
    for t in triples {
        if !order.contains(&t.subject.as_str()) {
            order.push(t.subject.as_str());
        }
    }
    for subject in order {
        writeln!(out, "  <rdf:Description rdf:about=\"{}\">", escape(subject)).unwrap();
        for (t, qname) in triples.iter().zip(&qnames).filter(|(t, _)| t.subject.as_str() == subject) {
            match &t.object {
                Term::Iri(iri) => writeln!(out, "    <{qname} rdf:resource=\"{}\"/>", escape(iri.as_str())),
                Term::Blank(label) => writeln!(out, "    <{qname} rdf:nodeID=\"{}\"/>", escape(label.as_str())),
                Term::Literal(lit) => {
                    let attr = match (&lit.language, &lit.datatype) {
                        (Some(lang), _) => format!(" xml:lang=\"{}\"", escape(lang.as_str())),
                        (None, Some(dt)) => format!(" rdf:datatype=\"{}\"", escape(dt.as_str())),
                        _ => String::new(),
                    };
                    writeln!(out, "    <{qname}{attr}>{}</{qname}>", escape(lit.lexical.as_str()))
                }
            }
            .unwrap();
        }
        out.push_str("  </rdf:Description>\n");
    }
    out.push_str("</rdf:RDF>\n");
    Ok(out)
}

/// A property/value table.
pub fn render_html(title: &str, triples: &[Triple], subtitle: Option<&str>) -> String {
    let mut out = String::from("<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>");
    out.push_str(&escape(title));
    out.push_str("</title></head>\n<body>\n");
    writeln!(out, "<h1>{}</h1>", escape(title)).unwrap();
    if let Some(sub) = subtitle {
        writeln!(out, "<p>{}</p>", escape(sub)).unwrap();
    }
    out.push_str("<table>\n<tr><th>Property</th><th>Value</th></tr>\n");
    for t in triples {
        let value = match &t.object {
            Term::Iri(iri) => format!("<a href=\"{0}\">{0}</a>", escape(iri.as_str())),
            Term::Blank(label) => format!("_:{}", escape(label.as_str())),
            Term::Literal(lit) => escape(lit.lexical.as_str()).into_owned(),
        };
        writeln!(out, "<tr><td>{}</td><td>{value}</td></tr>", escape(t.predicate.as_str())).unwrap();
    }
    out.push_str("</table>\n</body>\n</html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::parse_document;

    #[test]
    fn accept_defaults_and_wildcards() {
        assert_eq!(negotiate_media(None, MediaType::RdfXml), Some(MediaType::RdfXml));
        assert_eq!(negotiate_media(Some(""), MediaType::Html), Some(MediaType::Html));
        assert_eq!(negotiate_media(Some("*/*"), MediaType::RdfXml), Some(MediaType::RdfXml));
        assert_eq!(negotiate_media(Some("text/html"), MediaType::RdfXml), Some(MediaType::Html));
        assert_eq!(negotiate_media(Some("text/*"), MediaType::RdfXml), Some(MediaType::Html));
        assert_eq!(negotiate_media(Some("text/plain"), MediaType::RdfXml), Some(MediaType::NTriples));
        assert_eq!(
            negotiate_media(Some("text/html;q=0.5, application/rdf+xml"), MediaType::Html),
            Some(MediaType::RdfXml)
        );
        assert_eq!(negotiate_media(Some("image/png"), MediaType::RdfXml), None);
        assert_eq!(
            negotiate_media(Some("application/rdf+xml;q=0, */*;q=0.1"), MediaType::RdfXml),
            Some(MediaType::NTriples)
        );
    }

    #[test]
    fn rdfxml_rendering() {
        let doc = br#"<http://dbpedia.org/resource/France> <http://dbpedia.org/property/gdpPppPerCapita> "33188" .
<http://dbpedia.org/resource/France> <http://dbpedia.org/property/capital> <http://dbpedia.org/resource/Paris> .
<http://dbpedia.org/resource/France> <http://www.w3.org/2000/01/rdf-schema#label> "France & co"@en .
"#;
        let xml = render_rdfxml(&parse_document(doc).unwrap()).unwrap();
        assert!(xml.contains(r#"<rdf:Description rdf:about="http://dbpedia.org/resource/France">"#));
        assert!(xml.contains("<dbpprop:gdpPppPerCapita>33188</dbpprop:gdpPppPerCapita>"));
        assert!(xml.contains(r#"<dbpprop:capital rdf:resource="http://dbpedia.org/resource/Paris"/>"#));
        assert!(xml.contains(r#"<rdfs:label xml:lang="en">France &amp; co</rdfs:label>"#));
    }

    #[test]
    fn predicate_splitting() {
        assert_eq!(split_iri("http://e.x/ns#name"), Some(("http://e.x/ns#", "name")));
        assert_eq!(split_iri("http://e.x/p/1abc"), Some(("http://e.x/p/1", "abc")));
        assert_eq!(split_iri("http://e.x/p/123"), None);
    }
}
