#![allow(dead_code)]

use std::net::TcpListener;
use std::path::Path;
use std::sync::Arc;

use memento_core::fixtures;
use memento_core::media::MediaType;
use memento_core::server::ServerHandle;
use memento_core::service::MementoService;
use memento_core::store::{ingest, Archive, IngestOptions, SnapshotManifest, UriLayout};
use memento_core::time::{Clock, ResourceUri, Timestamp};

pub const BASE: &str = "http://archive.test/dbpedia";

pub fn built_at() -> Timestamp {
    Timestamp::from_ymd(2010, 1, 1).unwrap()
}

pub fn uri(s: &str) -> ResourceUri {
    ResourceUri::parse(s).unwrap()
}

pub fn ymd(y: i32, m: u32, d: u32) -> Timestamp {
    Timestamp::from_ymd(y, m, d).unwrap()
}

pub fn fixture_archive(dir: &Path, layout: UriLayout) -> Archive {
    let manifest = fixtures::write_corpus(&dir.join("corpus")).unwrap();
    let manifest = SnapshotManifest::load(&manifest).unwrap();
    let options = IngestOptions { strict: true, clock: Clock::Fixed(built_at()) };
    ingest(&manifest, &dir.join("archive"), layout, options).unwrap().0
}

pub fn fixture_service(dir: &Path) -> MementoService {
    MementoService::new(Arc::new(fixture_archive(dir, UriLayout::new(BASE))), MediaType::RdfXml)
}

/// The fixture archive served over loopback HTTP.
pub fn fixture_server(dir: &Path) -> ServerHandle {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let archive = fixture_archive(dir, UriLayout::new(&base));
    ServerHandle::start(listener, MementoService::new(Arc::new(archive), MediaType::RdfXml)).unwrap()
}

/// Raw literal and the number it should normalize to, computed by hand.
pub const NORMALIZATION_TABLE: &[(&str, Option<f64>)] = &[
    ("29000", Some(29000.0)),
    ("$29,000", Some(29000.0)),
    ("29,900", Some(29900.0)),
    ("$30,100", Some(30100.0)),
    ("33188 (2008 est.)", Some(33188.0)),
    ("$ 33,434", Some(33434.0)),
    ("3.2678e4", Some(32678.0)),
    ("1.5E3", Some(1500.0)),
    ("€34,181", Some(34181.0)),
    ("£1,234.50", Some(1234.5)),
    ("35,432.5", Some(35432.5)),
    ("  42  ", Some(42.0)),
    ("-12.5", Some(-12.5)),
    (".5", Some(0.5)),
    ("30,100 (2007)", Some(30100.0)),
    ("1,000,000", Some(1000000.0)),
    ("unknown", None),
    ("", None),
    ("n/a", None),
    ("inf", None),
    ("NaN", None),
    ("12 345", None),
    ("USD 100", None),
    ("1e400", None),
    ("(est.)", None),
    ("1.2.3", None),
    ("30100$", None),
];
