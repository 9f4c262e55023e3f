//! Streaming N-Triples reader and a subject/predicate value query.

use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::time::ResourceUri;

#[derive(Debug, Error)]
pub enum RdfError {
    #[error("line {line}: {message}")]
    Syntax { line: u64, message: String },
    #[error("read failed after line {line}: {source}")]
    Io {
        line: u64,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Iri(String),
    Blank(String),
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub lexical: String,
    pub datatype: Option<String>,
    pub language: Option<String>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), datatype: None, language: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: ResourceUri,
    pub predicate: ResourceUri,
    pub object: Term,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write_iri(f, iri),
            Term::Blank(label) => write!(f, "_:{label}"),
            Term::Literal(lit) => {
                f.write_str("\"")?;
                for c in lit.lexical.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                if let Some(lang) = &lit.language {
                    write!(f, "@{lang}")
                } else if let Some(dt) = &lit.datatype {
                    f.write_str("^^")?;
                    write_iri(f, dt)
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn write_iri(f: &mut fmt::Formatter<'_>, iri: &str) -> fmt::Result {
    f.write_str("<")?;
    for c in iri.chars() {
        if c == '>' || c == '\\' || c.is_control() {
            write!(f, "\\u{:04X}", c as u32)?;
        } else {
            write!(f, "{c}")?;
        }
    }
    f.write_str(">")
}

impl fmt::Display for Triple {
    /// One N-Triples statement without the trailing newline.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_iri(f, self.subject.as_str())?;
        f.write_str(" ")?;
        write_iri(f, self.predicate.as_str())?;
        write!(f, " {} .", self.object)
    }
}

/// Lazily parses N-Triples from a buffered reader, one line at a time. Memory
/// use is bounded by the longest line.
pub struct NTriplesReader<R> {
    input: R,
    buf: Vec<u8>,
    line: u64,
    done: bool,
}

impl<R: BufRead> NTriplesReader<R> {
    pub fn new(input: R) -> Self {
        NTriplesReader { input, buf: Vec::with_capacity(256), line: 0, done: false }
    }

    /// Number of lines consumed so far.
    pub fn line(&self) -> u64 {
        self.line
    }
}

impl<R: BufRead> Iterator for NTriplesReader<R> {
    type Item = Result<Triple, RdfError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.input.read_until(b'\n', &mut self.buf) {
                Ok(0) => self.done = true,
                Ok(_) => {
                    self.line += 1;
                    let line = self.line;
                    let text = match std::str::from_utf8(&self.buf) {
                        Ok(t) => t,
                        Err(_) => return Some(Err(syntax(line, "invalid UTF-8"))),
                    };
                    match parse_line(text) {
                        Ok(Some(triple)) => return Some(Ok(triple)),
                        Ok(None) => continue,
                        Err(message) => return Some(Err(RdfError::Syntax { line, message })),
                    }
                }
                Err(source) => {
                    self.done = true;
                    return Some(Err(RdfError::Io { line: self.line, source }));
                }
            }
        }
        None
    }
}

fn syntax(line: u64, message: &str) -> RdfError {
    RdfError::Syntax { line, message: message.to_string() }
}

pub fn parse_ntriples<R: BufRead>(input: R) -> NTriplesReader<R> {
    NTriplesReader::new(input)
}

/// Parses one line. Blank lines and comments yield `None`.
pub fn parse_line(text: &str) -> Result<Option<Triple>, String> {
    let mut p = LineParser { src: text, pos: 0 };
    p.skip_ws();
    if p.at_end() || p.peek() == Some('#') {
        return Ok(None);
    }
    let subject = match p.peek() {
        Some('<') => p.iri()?,
        Some('_') => return Err("blank node subjects are not supported".into()),
        _ => return Err("expected subject IRI".into()),
    };
    let subject = ResourceUri::parse(&subject).map_err(|_| format!("subject is not an absolute IRI: {subject}"))?;
    p.skip_ws();
    if p.peek() != Some('<') {
        return Err("expected predicate IRI".into());
    }
    let predicate = p.iri()?;
    let predicate =
        ResourceUri::parse(&predicate).map_err(|_| format!("predicate is not an absolute IRI: {predicate}"))?;
    p.skip_ws();
    let object = match p.peek() {
        Some('<') => Term::Iri(p.iri()?),
        Some('_') => Term::Blank(p.blank()?),
        Some('"') => Term::Literal(p.literal()?),
        _ => return Err("expected object".into()),
    };
    p.skip_ws();
    if p.peek() != Some('.') {
        return Err("expected '.'".into());
    }
    p.pos += 1;
    p.skip_ws();
    if !p.at_end() && p.peek() != Some('#') {
        return Err("trailing content after '.'".into());
    }
    Ok(Some(Triple { subject, predicate, object }))
}

struct LineParser<'a> {
    src: &'a str,
    pos: usize,
}

impl LineParser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r' | '\n')) {
            self.pos += 1;
        }
    }

    fn iri(&mut self) -> Result<String, String> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err("unterminated IRI".into()),
                Some('>') => break,
                Some('\\') => match self.bump() {
                    Some('u') => out.push(self.hex(4)?),
                    Some('U') => out.push(self.hex(8)?),
                    _ => return Err("bad escape in IRI".into()),
                },
                Some(c) if c == ' ' || c == '<' || c == '"' || c.is_control() => {
                    return Err(format!("illegal character {c:?} in IRI"))
                }
                Some(c) => out.push(c),
            }
        }
        if out.is_empty() {
            return Err("empty IRI".into());
        }
        Ok(out)
    }

    fn blank(&mut self) -> Result<String, String> {
        self.bump();
        if self.bump() != Some(':') {
            return Err("expected ':' in blank node".into());
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | '.') {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        // A label cannot end with '.', which belongs to the statement.
        while self.src[start..self.pos].ends_with('.') {
            self.pos -= 1;
        }
        if self.pos == start {
            return Err("empty blank node label".into());
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn literal(&mut self) -> Result<Literal, String> {
        self.bump();
        let mut lexical = String::new();
        loop {
            match self.bump() {
                None => return Err("unterminated literal".into()),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.bump() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') => self.hex(4)?,
                        Some('U') => self.hex(8)?,
                        _ => return Err("bad escape in literal".into()),
                    };
                    lexical.push(c);
                }
                Some(c) => lexical.push(c),
            }
        }
        let mut lit = Literal { lexical, datatype: None, language: None };
        match self.peek() {
            Some('@') => {
                self.bump();
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let tag = &self.src[start..self.pos];
                if tag.is_empty() || !tag.starts_with(|c: char| c.is_ascii_alphabetic()) {
                    return Err("bad language tag".into());
                }
                lit.language = Some(tag.to_string());
            }
            Some('^') => {
                self.bump();
                if self.bump() != Some('^') || self.peek() != Some('<') {
                    return Err("expected ^^<datatype>".into());
                }
                lit.datatype = Some(self.iri()?);
            }
            _ => {}
        }
        Ok(lit)
    }

    fn hex(&mut self, digits: usize) -> Result<char, String> {
        let end = self.pos + digits;
        let code =
            self.src.get(self.pos..end).and_then(|h| u32::from_str_radix(h, 16).ok()).ok_or("bad unicode escape")?;
        self.pos = end;
        char::from_u32(code).ok_or_else(|| "escape is not a scalar value".into())
    }
}

/// Lexical forms of every literal object of `(subject, predicate, ?val)`,
/// in document order.
pub fn select_values<'a, I>(triples: I, subject: &ResourceUri, predicate: &ResourceUri) -> Vec<String>
where
    I: IntoIterator<Item = &'a Triple>,
{
    triples
        .into_iter()
        .filter(|t| &t.subject == subject && &t.predicate == predicate)
        .filter_map(|t| match &t.object {
            Term::Literal(lit) => Some(lit.lexical.clone()),
            _ => None,
        })
        .collect()
}

/// Parses a whole in-memory document strictly.
pub fn parse_document(bytes: &[u8]) -> Result<Vec<Triple>, RdfError> {
    parse_ntriples(bytes).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uri(s: &str) -> ResourceUri {
        ResourceUri::parse(s).unwrap()
    }

    #[test]
    fn base_case() {
        let t = parse_line(r#"<http://e.x/s> <http://e.x/p> "42" ."#).unwrap().unwrap();
        assert_eq!(t.subject, uri("http://e.x/s"));
        assert_eq!(t.object, Term::Literal(Literal::plain("42")));
    }

    #[test]
    fn comments_and_blank_lines() {
        assert_eq!(parse_line("# comment").unwrap(), None);
        assert_eq!(parse_line("   \n").unwrap(), None);
        let doc = b"# header\n\n<http://e.x/s> <http://e.x/p> <http://e.x/o> .\n";
        assert_eq!(parse_document(doc).unwrap().len(), 1);
    }

    #[test]
    fn missing_object_reports_line() {
        let doc = b"<http://e.x/s> <http://e.x/p> \"1\" .\n<http://e.x/s> <http://e.x/p> .\n";
        let results: Vec<_> = parse_ntriples(&doc[..]).collect();
        assert!(results[0].is_ok());
        assert!(matches!(results[1], Err(RdfError::Syntax { line: 2, .. })));
    }

    #[test]
    fn rejects_blank_subject_but_keeps_blank_object() {
        assert!(parse_line("_:b0 <http://e.x/p> \"x\" .").is_err());
        let t = parse_line("<http://e.x/s> <http://e.x/p> _:b0.").unwrap().unwrap();
        assert_eq!(t.object, Term::Blank("b0".into()));
    }

    #[test]
    fn typed_and_tagged_literals() {
        let t = parse_line(r#"<http://e.x/s> <http://e.x/p> "33188"^^<http://www.w3.org/2001/XMLSchema#integer> ."#)
            .unwrap()
            .unwrap();
        let Term::Literal(lit) = &t.object else { panic!() };
        assert_eq!(lit.datatype.as_deref(), Some("http://www.w3.org/2001/XMLSchema#integer"));
        let t = parse_line(r#"<http://e.x/s> <http://e.x/p> "Françe \"x\""@fr-FR ."#).unwrap().unwrap();
        let Term::Literal(lit) = &t.object else { panic!() };
        assert_eq!(lit.lexical, "Françe \"x\"");
        assert_eq!(lit.language.as_deref(), Some("fr-FR"));
        assert_eq!(parse_line(&t.to_string()).unwrap().unwrap(), t);
    }

    #[test]
    fn select_values_cases() {
        let gdp = uri("http://dbpedia.org/property/gdpPppPerCapita");
        let france = uri("http://dbpedia.org/resource/France");
        let doc = br#"<http://dbpedia.org/resource/France> <http://dbpedia.org/property/gdpPppPerCapita> "33188" .
<http://dbpedia.org/resource/France> <http://dbpedia.org/property/capital> <http://dbpedia.org/resource/Paris> .
<http://dbpedia.org/resource/Spain> <http://dbpedia.org/property/gdpPppPerCapita> "30000" .
"#;
        let graph = parse_document(doc).unwrap();
        assert_eq!(select_values(&graph, &france, &gdp), vec!["33188"]);
        assert!(select_values(&graph, &uri("http://dbpedia.org/resource/Peru"), &gdp).is_empty());
        let mut two = graph.clone();
        two.push(Triple {
            subject: france.clone(),
            predicate: gdp.clone(),
            object: Term::Literal(Literal::plain("$34,000")),
        });
        assert_eq!(select_values(&two, &france, &gdp), vec!["33188", "$34,000"]);
    }

    fn arb_triple() -> impl Strategy<Value = Triple> {
        let iri = "[a-c]{1,2}".prop_map(|s| uri(&format!("http://e.x/{s}")));
        let object = prop_oneof![
            "[a-c]{1,2}".prop_map(|s| Term::Iri(format!("http://e.x/{s}"))),
            "[ -~\u{e9}\n\"\\\\]{0,8}".prop_map(|s| Term::Literal(Literal::plain(s))),
        ];
        (iri.clone(), iri, object).prop_map(|(subject, predicate, object)| Triple { subject, predicate, object })
    }

    proptest! {
        #[test]
        fn select_matches_full_scan(graph in prop::collection::vec(arb_triple(), 0..40), s in "[a-c]{1,2}", p in "[a-c]{1,2}") {
            let s = uri(&format!("http://e.x/{s}"));
            let p = uri(&format!("http://e.x/{p}"));
            let mut naive = Vec::new();
            for t in &graph {
                if t.subject.as_str() == s.as_str() && t.predicate.as_str() == p.as_str() {
                    if let Term::Literal(l) = &t.object {
                        naive.push(l.lexical.clone());
                    }
                }
            }
            prop_assert_eq!(select_values(&graph, &s, &p), naive);
        }

        #[test]
        fn serialization_reparses(graph in prop::collection::vec(arb_triple(), 0..20)) {
            let doc: String = graph.iter().map(|t| format!("{t}\n")).collect();
            prop_assert_eq!(parse_document(doc.as_bytes()).unwrap(), graph);
        }

        #[test]
        fn corruption_is_line_local(graph in prop::collection::vec(arb_triple(), 1..20), k in any::<prop::sample::Index>()) {
            let k = k.index(graph.len());
            let mut lines: Vec<String> = graph.iter().map(ToString::to_string).collect();
            lines[k] = format!("{} garbage <", lines[k]);
            let doc = lines.join("\n");
            let results: Vec<_> = parse_ntriples(doc.as_bytes()).collect();
            prop_assert_eq!(results.len(), graph.len());
            for (i, r) in results.iter().enumerate() {
                if i == k {
                    prop_assert!(r.is_err());
                } else {
                    prop_assert_eq!(r.as_ref().unwrap(), &graph[i]);
                }
            }
        }
    }
}
