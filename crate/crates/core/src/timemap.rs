//! TimeMaps: the RDF/XML description of a TimeBundle.
//!
//! The reader is a recognizer for the TimeMap vocabulary, not a general
//! RDF/XML parser. It understands typed node elements, `rdf:about`,
//! `rdf:resource`, `rdf:nodeID` indirection, nested node elements and
//! literal property values; anything else is carried along and ignored.

use std::collections::HashMap;
use std::fmt::Write as _;

use quick_xml::escape::{escape, resolve_predefined_entity};
use quick_xml::events::{BytesStart, Event};
use quick_xml::name::ResolveResult;
use quick_xml::reader::NsReader;
use quick_xml::XmlVersion;
use thiserror::Error;

use crate::store::{Archive, StoreError};
use crate::time::{ResourceUri, Timestamp, VersionInterval};

pub const NS_RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const NS_ORE: &str = "http://www.openarchives.org/ore/terms/";
pub const NS_MEM: &str = "http://www.mementoweb.org/terms/tb/";
pub const NS_DCTERMS: &str = "http://purl.org/dc/terms/";
pub const NS_DC: &str = "http://purl.org/dc/elements/1.1/";
const XSD_DATETIME: &str = "http://www.w3.org/2001/XMLSchema#dateTime";
pub const MEDIA_TYPE: &str = "application/rdf+xml";

#[derive(Debug, Error)]
pub enum TimeMapError {
    #[error("unknown subject {0}")]
    UnknownSubject(ResourceUri),
    #[error("{0} has no Mementos")]
    NoMementos(ResourceUri),
    #[error("malformed TimeMap at {path}: {message}")]
    Malformed { path: String, message: String },
}

impl From<StoreError> for TimeMapError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSubject(s) => TimeMapError::UnknownSubject(s),
            other => TimeMapError::Malformed { path: "archive".into(), message: other.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeMapMemento {
    pub uri: ResourceUri,
    pub interval: VersionInterval,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeMapDoc {
    pub timemap_uri: ResourceUri,
    pub timebundle_uri: ResourceUri,
    pub original: ResourceUri,
    pub timegate: ResourceUri,
    pub covers: VersionInterval,
    /// Ascending by start, non-overlapping.
    pub mementos: Vec<TimeMapMemento>,
    pub created: Timestamp,
    pub modified: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeMapWarning {
    /// A Period whose start followed its end; the two were swapped.
    InvertedPeriod { node: String, start: Timestamp, end: Timestamp },
    /// Two Memento periods overlap after normalization.
    OverlappingPeriods { earlier: ResourceUri, later: ResourceUri },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTimeMap {
    pub doc: TimeMapDoc,
    pub warnings: Vec<TimeMapWarning>,
}

/// Assembles the TimeMap of `subject` from the archive. `covers` runs from
/// the first Memento to the current snapshot date.
pub fn build_timemap(archive: &Archive, subject: &ResourceUri) -> Result<TimeMapDoc, TimeMapError> {
    if !archive.has_subject(subject) {
        return Err(TimeMapError::UnknownSubject(subject.clone()));
    }
    let versions = archive.list_versions(subject);
    let first = versions.first().ok_or_else(|| TimeMapError::NoMementos(subject.clone()))?;
    let covers = VersionInterval::closed(first.interval.start(), archive.current_date())
        .expect("mementos start before the current snapshot");
    let layout = archive.layout();
    Ok(TimeMapDoc {
        timemap_uri: layout.timemap_uri(subject),
        timebundle_uri: layout.timebundle_uri(subject),
        original: layout.original_uri(subject),
        timegate: layout.timegate_uri(subject),
        covers,
        mementos: versions
            .iter()
            .map(|r| TimeMapMemento { uri: r.memento_uri.clone(), interval: r.interval })
            .collect(),
        created: archive.built_at(),
        modified: archive.built_at(),
    })
}

fn write_period(out: &mut String, indent: &str, iv: &VersionInterval) {
    writeln!(out, "{indent}<mem:Period>").unwrap();
    writeln!(out, "{indent}  <mem:start rdf:datatype=\"{XSD_DATETIME}\">{}</mem:start>", iv.start().iso()).unwrap();
    if let Some(end) = iv.end() {
        writeln!(out, "{indent}  <mem:end rdf:datatype=\"{XSD_DATETIME}\">{}</mem:end>", end.iso()).unwrap();
    }
    writeln!(out, "{indent}</mem:Period>").unwrap();
}

/// Deterministic RDF/XML: identical documents give identical bytes.
pub fn serialize_rdfxml(doc: &TimeMapDoc) -> Vec<u8> {
    let e = |u: &ResourceUri| escape(u.as_str()).into_owned();
    let original = e(&doc.original);
    let timegate = e(&doc.timegate);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<rdf:RDF\n");
    writeln!(out, "  xmlns:dcterms='{NS_DCTERMS}'").unwrap();
    writeln!(out, "  xmlns:mem='{NS_MEM}'").unwrap();
    writeln!(out, "  xmlns:dc='{NS_DC}'").unwrap();
    writeln!(out, "  xmlns:rdf='{NS_RDF}'").unwrap();
    writeln!(out, "  xmlns:ore='{NS_ORE}'>").unwrap();
    writeln!(out, "<ore:ResourceMap rdf:about=\"{}\">", e(&doc.timemap_uri)).unwrap();
    writeln!(out, "<rdf:type rdf:resource=\"{NS_MEM}TimeMap\"/>").unwrap();
    writeln!(out, "<dcterms:modified>{}</dcterms:modified>", doc.modified.iso()).unwrap();
    writeln!(out, "<dcterms:created>{}</dcterms:created>", doc.created.iso()).unwrap();
    writeln!(out, "<dc:format>{MEDIA_TYPE}</dc:format>").unwrap();
    out.push_str("<ore:describes>\n");
    writeln!(out, "<ore:Aggregation rdf:about=\"{}\">", e(&doc.timebundle_uri)).unwrap();
    for m in &doc.mementos {
        writeln!(out, "<ore:aggregates rdf:resource=\"{}\"/>", e(&m.uri)).unwrap();
    }
    writeln!(out, "<ore:aggregates rdf:resource=\"{timegate}\"/>").unwrap();
    writeln!(out, "<ore:aggregates rdf:resource=\"{original}\"/>").unwrap();
    writeln!(out, "<dc:title>Memento Time Bundle for {original}</dc:title>").unwrap();
    writeln!(out, "<rdf:type rdf:resource=\"{NS_MEM}TimeBundle\"/>").unwrap();
    out.push_str("</ore:Aggregation>\n</ore:describes>\n</ore:ResourceMap>\n");
    writeln!(out, "  <mem:TimeGate rdf:about=\"{timegate}\">").unwrap();
    writeln!(out, "    <mem:timeGateFor rdf:resource=\"{original}\"/>").unwrap();
    out.push_str("    <mem:covers>\n");
    write_period(&mut out, "      ", &doc.covers);
    out.push_str("    </mem:covers>\n  </mem:TimeGate>\n");
    writeln!(out, "  <mem:OriginalResource rdf:about=\"{original}\"/>").unwrap();
    for m in &doc.mementos {
        writeln!(out, "  <mem:Memento rdf:about=\"{}\">", e(&m.uri)).unwrap();
        out.push_str("    <mem:validOver>\n");
        write_period(&mut out, "      ", &m.interval);
        out.push_str("    </mem:validOver>\n");
        writeln!(out, "    <mem:mementoFor rdf:resource=\"{original}\"/>").unwrap();
        out.push_str("  </mem:Memento>\n");
    }
    out.push_str("</rdf:RDF>\n");
    out.into_bytes()
}

// ---- reading ----

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Name {
    ns: String,
    local: String,
}

impl Name {
    fn is(&self, ns: &str, local: &str) -> bool {
        self.ns == ns && self.local == local
    }
}

#[derive(Debug)]
struct Element {
    name: Name,
    attrs: Vec<(Name, String)>,
    children: Vec<Element>,
    text: String,
    /// Element path for diagnostics, e.g. `rdf:RDF/mem:Memento[2]`.
    path: String,
}

impl Element {
    fn attr(&self, ns: &str, local: &str) -> Option<&str> {
        self.attrs.iter().find(|(n, _)| n.is(ns, local)).map(|(_, v)| v.as_str())
    }
}

fn malformed(path: &str, message: impl Into<String>) -> TimeMapError {
    TimeMapError::Malformed { path: path.to_string(), message: message.into() }
}

/// Namespace of a name: bound, unbound, or an unknown prefix.
type OwnedResolution = Result<Option<String>, String>;

fn own(result: ResolveResult<'_>) -> OwnedResolution {
    match result {
        ResolveResult::Bound(ns) => Ok(Some(ns.into_inner().to_string())),
        ResolveResult::Unbound => Ok(None),
        ResolveResult::Unknown(prefix) => Err(prefix),
    }
}

fn resolve_name(result: OwnedResolution, local: &str, qname: &str, path: &str) -> Result<Name, TimeMapError> {
    match result {
        Ok(ns) => Ok(Name { ns: ns.unwrap_or_default(), local: local.to_string() }),
        Err(prefix) => Err(malformed(path, format!("unbound prefix {prefix:?} in {qname}"))),
    }
}

fn open_element(
    reader: &NsReader<&[u8]>,
    start: &BytesStart<'_>,
    resolved: OwnedResolution,
    path: String,
) -> Result<Element, TimeMapError> {
    let qname = start.name();
    let name = resolve_name(resolved, start.local_name().into_inner(), qname.as_ref(), &path)?;
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| malformed(&path, e.to_string()))?;
        let key = attr.key.as_ref();
        if key == "xmlns" || key.starts_with("xmlns:") {
            continue;
        }
        let (res, local) = reader.resolver().resolve_attribute(attr.key);
        let attr_name = match own(res) {
            // Unprefixed attributes on RDF elements are read as rdf: ones.
            Ok(None) => Name { ns: NS_RDF.to_string(), local: local.into_inner().to_string() },
            other => resolve_name(other, local.into_inner(), key, &path)?,
        };
        let value =
            attr.normalized_value(XmlVersion::Implicit1_0).map_err(|e| malformed(&path, e.to_string()))?.into_owned();
        attrs.push((attr_name, value));
    }
    Ok(Element { name, attrs, children: Vec::new(), text: String::new(), path })
}

fn child_path(parent: Option<&Element>, qname: &str) -> String {
    match parent {
        Some(p) => format!("{}/{qname}[{}]", p.path, p.children.len() + 1),
        None => qname.to_string(),
    }
}

fn read_tree(bytes: &[u8]) -> Result<Element, TimeMapError> {
    let mut reader = NsReader::from_reader(bytes);
    let mut stack: Vec<Element> = Vec::new();
    let mut root = None;
    loop {
        let here = stack.last().map_or_else(|| "/".to_string(), |e| e.path.clone());
        let (resolved, event) = match reader.read_resolved_event() {
            Ok((res, event)) => (own(res), event),
            Err(e) => return Err(malformed(&here, format!("XML error at byte {}: {e}", reader.error_position()))),
        };
        match event {
            Event::Start(start) | Event::Empty(start) if root.is_some() => {
                return Err(malformed(start.name().as_ref(), "content after root"));
            }
            Event::Start(ref start) => {
                let path = child_path(stack.last(), start.name().as_ref());
                let el = open_element(&reader, start, resolved, path)?;
                stack.push(el);
            }
            Event::Empty(ref start) => {
                let path = child_path(stack.last(), start.name().as_ref());
                let el = open_element(&reader, start, resolved, path)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::End(_) => {
                let el = stack.pop().ok_or_else(|| malformed("/", "unbalanced end tag"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::Text(t) => {
                if let Some(el) = stack.last_mut() {
                    el.text.push_str(&t.xml10_content());
                }
            }
            Event::CData(c) => {
                if let Some(el) = stack.last_mut() {
                    el.text.push_str(&c.into_inner());
                }
            }
            Event::GeneralRef(r) => {
                let Some(el) = stack.last_mut() else { continue };
                let resolved = match r.resolve_char_ref().map_err(|e| malformed(&el.path, e.to_string()))? {
                    Some(c) => c.to_string(),
                    None => resolve_predefined_entity(r.xml10_content().as_ref())
                        .ok_or_else(|| malformed(&el.path, format!("unknown entity &{};", r.xml10_content())))?
                        .to_string(),
                };
                el.text.push_str(&resolved);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(malformed(&stack.last().unwrap().path, "unclosed element"));
    }
    root.ok_or_else(|| malformed("/", "empty document"))
}

/// Object of a property element.
#[derive(Debug, Clone, PartialEq)]
enum Value {
    Resource(String),
    Node(NodeId),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum NodeId {
    Uri(String),
    Blank(String),
}

#[derive(Debug, Default)]
struct Node {
    types: Vec<Name>,
    props: Vec<(Name, Value)>,
    path: String,
}

#[derive(Default)]
struct Graph {
    nodes: HashMap<NodeId, Node>,
    order: Vec<NodeId>,
    generated: usize,
}

impl Graph {
    fn node_mut(&mut self, id: &NodeId, path: &str) -> &mut Node {
        if !self.nodes.contains_key(id) {
            self.order.push(id.clone());
            self.nodes.insert(id.clone(), Node { path: path.to_string(), ..Default::default() });
        }
        self.nodes.get_mut(id).expect("inserted")
    }

    /// Adds a node element and its properties; returns its identity.
    fn add_node(&mut self, el: &Element) -> Result<NodeId, TimeMapError> {
        let id = if let Some(about) = el.attr(NS_RDF, "about") {
            NodeId::Uri(about.to_string())
        } else if let Some(node_id) = el.attr(NS_RDF, "nodeID") {
            NodeId::Blank(node_id.to_string())
        } else {
            self.generated += 1;
            NodeId::Blank(format!("#anon{}", self.generated))
        };
        let is_description = el.name.is(NS_RDF, "Description");
        {
            let node = self.node_mut(&id, &el.path);
            if !is_description {
                node.types.push(el.name.clone());
            }
        }
        for prop in &el.children {
            let value = if let Some(res) = prop.attr(NS_RDF, "resource") {
                Value::Resource(res.to_string())
            } else if let Some(node_id) = prop.attr(NS_RDF, "nodeID") {
                Value::Node(NodeId::Blank(node_id.to_string()))
            } else if let Some(child) = prop.children.first() {
                if prop.children.len() > 1 {
                    return Err(malformed(&prop.path, "more than one node in a property element"));
                }
                Value::Node(self.add_node(child)?)
            } else {
                Value::Literal(prop.text.trim().to_string())
            };
            if prop.name.is(NS_RDF, "type") {
                if let Value::Resource(t) = &value {
                    let name = split_type(t);
                    self.node_mut(&id, &el.path).types.push(name);
                    continue;
                }
            }
            self.node_mut(&id, &el.path).props.push((prop.name.clone(), value));
        }
        Ok(id)
    }

    fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    fn typed<'a>(&'a self, ns: &'a str, local: &'a str) -> impl Iterator<Item = (&'a NodeId, &'a Node)> + 'a {
        self.order
            .iter()
            .map(move |id| (id, &self.nodes[id]))
            .filter(move |(_, n)| n.types.iter().any(|t| t.is(ns, local)))
    }
}

fn split_type(uri: &str) -> Name {
    for ns in [NS_MEM, NS_ORE, NS_RDF] {
        if let Some(local) = uri.strip_prefix(ns) {
            return Name { ns: ns.to_string(), local: local.to_string() };
        }
    }
    Name { ns: uri.to_string(), local: String::new() }
}

impl Node {
    fn get(&self, ns: &str, local: &str) -> Option<&Value> {
        self.props.iter().find(|(n, _)| n.is(ns, local)).map(|(_, v)| v)
    }

    fn id_uri(id: &NodeId, path: &str) -> Result<ResourceUri, TimeMapError> {
        match id {
            NodeId::Uri(u) => ResourceUri::parse(u).map_err(|e| malformed(path, e.to_string())),
            NodeId::Blank(_) => Err(malformed(path, "expected a node with rdf:about")),
        }
    }

    fn uri_prop(&self, ns: &str, local: &str, qname: &str) -> Result<ResourceUri, TimeMapError> {
        let path = format!("{}/{qname}", self.path);
        match self.get(ns, local) {
            Some(Value::Resource(r)) => ResourceUri::parse(r).map_err(|e| malformed(&path, e.to_string())),
            Some(Value::Node(id)) => Node::id_uri(id, &path),
            Some(Value::Literal(_)) => Err(malformed(&path, "expected a resource, found a literal")),
            None => Err(malformed(&path, "required property missing")),
        }
    }

    fn time_prop(&self, ns: &str, local: &str, qname: &str) -> Result<Timestamp, TimeMapError> {
        let path = format!("{}/{qname}", self.path);
        match self.get(ns, local) {
            Some(Value::Literal(text)) => Timestamp::parse_iso(text).map_err(|e| malformed(&path, e.to_string())),
            Some(_) => Err(malformed(&path, "expected a datetime literal")),
            None => Err(malformed(&path, "required property missing")),
        }
    }
}

fn read_period(
    graph: &Graph,
    owner: &Node,
    prop_local: &str,
    qname: &str,
    warnings: &mut Vec<TimeMapWarning>,
) -> Result<VersionInterval, TimeMapError> {
    let path = format!("{}/{qname}", owner.path);
    let id = match owner.get(NS_MEM, prop_local) {
        Some(Value::Node(id)) => id,
        Some(_) => return Err(malformed(&path, "expected a mem:Period node")),
        None => return Err(malformed(&path, "required property missing")),
    };
    let period = graph.node(id).ok_or_else(|| malformed(&path, format!("dangling node reference {id:?}")))?;
    let start = period.time_prop(NS_MEM, "start", "mem:start")?;
    let end = period.time_prop(NS_MEM, "end", "mem:end")?;
    let label = match id {
        NodeId::Blank(b) if !b.starts_with('#') => b.clone(),
        _ => path.clone(),
    };
    if start > end {
        warnings.push(TimeMapWarning::InvertedPeriod { node: label, start, end });
        return VersionInterval::closed(end, start).map_err(|e| malformed(&period.path, e.to_string()));
    }
    VersionInterval::closed(start, end).map_err(|e| malformed(&period.path, e.to_string()))
}

/// Reads a TimeMap. Inverted Periods are swapped and reported as warnings.
pub fn parse_rdfxml(bytes: &[u8]) -> Result<ParsedTimeMap, TimeMapError> {
    let root = read_tree(bytes)?;
    if !root.name.is(NS_RDF, "RDF") {
        return Err(malformed(&root.path, "root element is not rdf:RDF"));
    }
    let mut graph = Graph::default();
    for el in &root.children {
        graph.add_node(el)?;
    }
    let mut warnings = Vec::new();

    let (map_id, map) = graph
        .typed(NS_ORE, "ResourceMap")
        .next()
        .or_else(|| graph.typed(NS_MEM, "TimeMap").next())
        .ok_or_else(|| malformed("rdf:RDF", "no ore:ResourceMap"))?;
    let timemap_uri = Node::id_uri(map_id, &map.path)?;
    let created = map.time_prop(NS_DCTERMS, "created", "dcterms:created")?;
    let modified = map.time_prop(NS_DCTERMS, "modified", "dcterms:modified")?;
    let timebundle_uri = map.uri_prop(NS_ORE, "describes", "ore:describes")?;

    let (gate_id, gate) =
        graph.typed(NS_MEM, "TimeGate").next().ok_or_else(|| malformed("rdf:RDF", "no mem:TimeGate"))?;
    let timegate = Node::id_uri(gate_id, &gate.path)?;
    let original = gate.uri_prop(NS_MEM, "timeGateFor", "mem:timeGateFor")?;

    let mut mementos = Vec::new();
    for (id, node) in graph.typed(NS_MEM, "Memento") {
        let uri = Node::id_uri(id, &node.path)?;
        let target = node.uri_prop(NS_MEM, "mementoFor", "mem:mementoFor")?;
        if target != original {
            return Err(malformed(
                &format!("{}/mem:mementoFor", node.path),
                format!("Memento of {target}, expected {original}"),
            ));
        }
        let interval = read_period(&graph, node, "validOver", "mem:validOver", &mut warnings)?;
        mementos.push(TimeMapMemento { uri, interval });
    }
    mementos.sort_by_key(|m| m.interval.start());
    for pair in mementos.windows(2) {
        if pair[0].interval.end().is_some_and(|end| end > pair[1].interval.start()) {
            warnings
                .push(TimeMapWarning::OverlappingPeriods { earlier: pair[0].uri.clone(), later: pair[1].uri.clone() });
        }
    }

    let covers = if gate.get(NS_MEM, "covers").is_some() {
        read_period(&graph, gate, "covers", "mem:covers", &mut warnings)?
    } else {
        let start = mementos.first().map(|m| m.interval.start());
        let end = mementos.iter().filter_map(|m| m.interval.end()).max();
        match (start, end) {
            (Some(s), Some(e)) => VersionInterval::closed(s, e).map_err(|e| malformed(&gate.path, e.to_string()))?,
            _ => return Err(malformed(&format!("{}/mem:covers", gate.path), "no covers period and no Mementos")),
        }
    };

    Ok(ParsedTimeMap {
        doc: TimeMapDoc { timemap_uri, timebundle_uri, original, timegate, covers, mementos, created, modified },
        warnings,
    })
}
