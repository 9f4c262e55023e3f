//! Datetime content negotiation for versioned linked data.
//!
//! An archive of dated N-Triples snapshots is exposed through the Memento
//! resource layout: original resources that advertise a TimeGate, TimeGates
//! that redirect by `Accept-Datetime`, immutable Mementos stamped with
//! `Content-Datetime`, and RDF/XML TimeMaps listing every Memento. A
//! follow-your-nose client and a time-series sweep sit on top.

pub mod client;
pub mod fixtures;
pub mod link;
pub mod media;
pub mod rdf;
pub mod server;
pub mod service;
pub mod store;
pub mod time;
pub mod timegate;
pub mod timemap;
pub mod timeseries;

pub use link::{LinkEntry, LinkRelation};
pub use store::{Archive, MementoRecord, UriLayout};
pub use time::{ResourceUri, Timestamp, VersionInterval};
pub use timegate::{NegotiationDecision, NegotiationRequest};
