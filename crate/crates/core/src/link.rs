//! The `Link` response header with the Memento relation types.

use std::fmt;

use thiserror::Error;

use crate::time::ResourceUri;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("malformed Link header at byte {offset}: {reason}")]
    MalformedLink { offset: usize, reason: &'static str },
    #[error("link target is not an absolute URI: {0:?}")]
    RelativeTarget(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LinkRelation {
    TimeGate,
    TimeBundle,
    Original,
    FirstMemento,
    LastMemento,
    PrevMemento,
    NextMemento,
    /// Any other relation type, lowercased.
    Other(String),
}

impl LinkRelation {
    pub fn from_token(token: &str) -> Self {
        match token.to_ascii_lowercase().as_str() {
            "timegate" => LinkRelation::TimeGate,
            "timebundle" => LinkRelation::TimeBundle,
            "original" => LinkRelation::Original,
            "first-memento" => LinkRelation::FirstMemento,
            "last-memento" => LinkRelation::LastMemento,
            "prev-memento" => LinkRelation::PrevMemento,
            "next-memento" => LinkRelation::NextMemento,
            other => LinkRelation::Other(other.to_string()),
        }
    }

    pub fn token(&self) -> &str {
        match self {
            LinkRelation::TimeGate => "timegate",
            LinkRelation::TimeBundle => "timebundle",
            LinkRelation::Original => "original",
            LinkRelation::FirstMemento => "first-memento",
            LinkRelation::LastMemento => "last-memento",
            LinkRelation::PrevMemento => "prev-memento",
            LinkRelation::NextMemento => "next-memento",
            LinkRelation::Other(s) => s,
        }
    }
}

impl fmt::Display for LinkRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One link of a `Link` header: a target, one or more relation types and
/// any further target attributes in header order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkEntry {
    pub target: ResourceUri,
    pub rels: Vec<LinkRelation>,
    pub params: Vec<(String, String)>,
}

impl LinkEntry {
    pub fn new(target: ResourceUri, rel: LinkRelation) -> Self {
        LinkEntry { target, rels: vec![rel], params: Vec::new() }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.push((name.into(), value.into()));
        self
    }

    pub fn has_rel(&self, rel: &LinkRelation) -> bool {
        self.rels.contains(rel)
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for LinkEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>; rel=", self.target)?;
        let rels: Vec<&str> = self.rels.iter().map(LinkRelation::token).collect();
        write_quoted(f, &rels.join(" "))?;
        for (name, value) in &self.params {
            write!(f, "; {name}=")?;
            write_quoted(f, value)?;
        }
        Ok(())
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, value: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in value.chars() {
        if c == '"' || c == '\\' {
            f.write_str("\\")?;
        }
        write!(f, "{c}")?;
    }
    f.write_str("\"")
}

pub fn format_link_header(entries: &[LinkEntry]) -> String {
    entries.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

pub fn find_rel<'a>(entries: &'a [LinkEntry], rel: &LinkRelation) -> Option<&'a ResourceUri> {
    entries.iter().find(|e| e.has_rel(rel)).map(|e| &e.target)
}

/// Parses a full header value, possibly holding several comma-separated
/// links. An empty value yields no links.
pub fn parse_link_header(raw: &str) -> Result<Vec<LinkEntry>, LinkError> {
    let mut cursor = Cursor { src: raw.as_bytes(), pos: 0 };
    let mut entries = Vec::new();
    loop {
        cursor.skip_ws();
        if cursor.at_end() {
            break;
        }
        if cursor.eat(b',') {
            continue;
        }
        entries.push(parse_link_value(&mut cursor)?);
        cursor.skip_ws();
        if !cursor.at_end() && !cursor.eat(b',') {
            return Err(cursor.error("expected ',' between links"));
        }
    }
    Ok(entries)
}

fn parse_link_value(cursor: &mut Cursor<'_>) -> Result<LinkEntry, LinkError> {
    if !cursor.eat(b'<') {
        return Err(cursor.error("expected '<'"));
    }
    let start = cursor.pos;
    while let Some(b) = cursor.peek() {
        match b {
            b'>' => break,
            b'<' => return Err(cursor.error("nested '<' in link target")),
            _ => cursor.pos += 1,
        }
    }
    if cursor.at_end() {
        return Err(cursor.error("unbalanced '<'"));
    }
    let target_raw = cursor.slice(start, cursor.pos).trim().to_string();
    cursor.pos += 1;
    let target = ResourceUri::parse(&target_raw).map_err(|_| LinkError::RelativeTarget(target_raw))?;

    let mut rels: Option<Vec<LinkRelation>> = None;
    let mut params = Vec::new();
    loop {
        cursor.skip_ws();
        if !cursor.eat(b';') {
            break;
        }
        cursor.skip_ws();
        let name = cursor.token();
        if name.is_empty() {
            return Err(cursor.error("expected parameter name"));
        }
        cursor.skip_ws();
        let value = if cursor.eat(b'=') {
            cursor.skip_ws();
            if cursor.peek() == Some(b'"') {
                cursor.quoted()?
            } else {
                cursor.token()
            }
        } else {
            String::new()
        };
        if name.eq_ignore_ascii_case("rel") {
            // Only the first rel parameter counts.
            if rels.is_none() {
                rels = Some(value.split_ascii_whitespace().map(LinkRelation::from_token).collect());
            }
        } else {
            params.push((name, value));
        }
    }
    match cursor.peek() {
        None | Some(b',') => {}
        Some(_) => return Err(cursor.error("unexpected character after link")),
    }
    let rels = rels.filter(|r| !r.is_empty()).ok_or_else(|| cursor.error("missing rel"))?;
    Ok(LinkEntry { target, rels, params })
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t')) {
            self.pos += 1;
        }
    }

    fn slice(&self, from: usize, to: usize) -> &str {
        // Boundaries always sit on ASCII delimiters.
        std::str::from_utf8(&self.src[from..to]).unwrap_or("")
    }

    fn token(&mut self) -> String {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_alphanumeric() || b"!#$%&'*+-.^_`|~/:".contains(&b) || b >= 0x80 {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.slice(start, self.pos).to_string()
    }

    fn quoted(&mut self) -> Result<String, LinkError> {
        let open = self.pos;
        self.pos += 1;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return Err(LinkError::MalformedLink { offset: open, reason: "unterminated quoted string" }),
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    let Some(b) = self.peek() else {
                        return Err(self.error("dangling escape"));
                    };
                    out.push(b);
                    self.pos += 1;
                }
                Some(b) => {
                    out.push(b);
                    self.pos += 1;
                }
            }
        }
        String::from_utf8(out).map_err(|_| self.error("invalid UTF-8 in quoted string"))
    }

    fn error(&self, reason: &'static str) -> LinkError {
        LinkError::MalformedLink { offset: self.pos, reason }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uri(s: &str) -> ResourceUri {
        ResourceUri::parse(s).unwrap()
    }

    #[test]
    fn single_timegate() {
        let entries =
            parse_link_header(r#"<http://a.example/tg/http://dbpedia.org/resource/France>; rel="timegate""#).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].rels, vec![LinkRelation::TimeGate]);
        assert_eq!(entries[0].target.as_str(), "http://a.example/tg/http://dbpedia.org/resource/France");
    }

    #[test]
    fn two_links() {
        let entries =
            parse_link_header(r#"<http://r.example/x>; rel="original", <http://r.example/m1>; rel="prev-memento""#)
                .unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(find_rel(&entries, &LinkRelation::Original), Some(&uri("http://r.example/x")));
        assert_eq!(find_rel(&entries, &LinkRelation::PrevMemento), Some(&uri("http://r.example/m1")));
    }

    #[test]
    fn malformed_inputs() {
        for raw in [
            r#"<no-close; rel="x""#,
            r#"<http://a.example/>; title="no rel""#,
            r#"<http://a.example/>; rel="""#,
            r#"http://a.example/; rel="x""#,
            r#"<http://a.example/>; rel="unterminated"#,
        ] {
            assert!(parse_link_header(raw).is_err(), "{raw:?} accepted");
        }
        assert!(matches!(parse_link_header(r#"</relative>; rel="original""#), Err(LinkError::RelativeTarget(_))));
    }

    #[test]
    fn token_params_and_case() {
        let entries = parse_link_header("<http://a.example/m>;REL=Prev-Memento;datetime=x").unwrap();
        assert_eq!(entries[0].rels, vec![LinkRelation::PrevMemento]);
        assert_eq!(entries[0].param("datetime"), Some("x"));
        assert_eq!(entries[0].to_string(), r#"<http://a.example/m>; rel="prev-memento"; datetime="x""#);
    }

    #[test]
    fn multi_valued_rel_and_unknown_tokens() {
        let entries = parse_link_header(r#"<http://a.example/m>; rel="first-memento Memento""#).unwrap();
        assert_eq!(entries[0].rels, vec![LinkRelation::FirstMemento, LinkRelation::Other("memento".into())]);
        assert_eq!(entries[0].to_string(), r#"<http://a.example/m>; rel="first-memento memento""#);
    }

    #[test]
    fn format_single_timegate() {
        let e = LinkEntry::new(uri("http://a.example/tg"), LinkRelation::TimeGate);
        assert_eq!(format_link_header(&[e]), r#"<http://a.example/tg>; rel="timegate""#);
    }

    #[test]
    fn datetime_param_survives_roundtrip() {
        let raw = r#"<http://a.example/m/20080201/x>; rel="prev-memento"; datetime="Fri, 01 Feb 2008 00:00:00 GMT""#;
        let entries = parse_link_header(raw).unwrap();
        assert_eq!(entries[0].param("datetime"), Some("Fri, 01 Feb 2008 00:00:00 GMT"));
        assert_eq!(format_link_header(&entries), raw);
    }

    #[test]
    fn four_entry_roundtrip() {
        let entries = vec![
            LinkEntry::new(uri("http://r.example/x"), LinkRelation::Original),
            LinkEntry::new(uri("http://r.example/m/1"), LinkRelation::FirstMemento),
            LinkEntry::new(uri("http://r.example/m/2"), LinkRelation::PrevMemento),
            LinkEntry::new(uri("http://r.example/m/4"), LinkRelation::NextMemento),
        ];
        assert_eq!(parse_link_header(&format_link_header(&entries)).unwrap(), entries);
    }

    #[test]
    fn first_duplicate_wins() {
        let entries =
            parse_link_header(r#"<http://a.example/1>; rel="timegate", <http://a.example/2>; rel="timegate""#).unwrap();
        assert_eq!(find_rel(&entries, &LinkRelation::TimeGate), Some(&uri("http://a.example/1")));
        assert_eq!(find_rel(&entries, &LinkRelation::Original), None);
    }

    #[test]
    fn quoted_values_with_commas_and_escapes() {
        let raw = r#"<http://a.example/>; rel="original"; title="a, \"b\"", <http://b.example/>; rel="timegate""#;
        let entries = parse_link_header(raw).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].param("title"), Some(r#"a, "b""#));
        assert_eq!(format_link_header(&entries), raw);
    }
}
