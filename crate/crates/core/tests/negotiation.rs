mod common;

use common::*;
use memento_core::fixtures::{ATLANTIS, FRANCE, NEWLAND};
use memento_core::link::LinkRelation;
use memento_core::store::{StoreError, UriLayout};
use memento_core::timegate::{negotiate, NegotiationDecision, NegotiationRequest};

fn decide(archive: &memento_core::Archive, subject: &str, t: Option<memento_core::Timestamp>) -> NegotiationDecision {
    let mut req = NegotiationRequest::new(uri(subject));
    if let Some(t) = t {
        req = req.at(t);
    }
    negotiate(archive, &req).unwrap()
}

fn selected_start(d: &NegotiationDecision) -> memento_core::Timestamp {
    d.selected().unwrap_or_else(|| panic!("expected a memento, got {}", d.kind())).interval.start()
}

#[test]
fn france_march_2008_selects_february_version() {
    let dir = tempfile::tempdir().unwrap();
    let archive = fixture_archive(dir.path(), UriLayout::new(BASE));
    let d = decide(&archive, FRANCE, Some(ymd(2008, 3, 20)));
    assert_eq!(selected_start(&d), ymd(2008, 2, 1));
    assert_eq!(
        d.selected().unwrap().memento_uri.as_str(),
        "http://archive.test/dbpedia/memento/20080201/http://dbpedia.org/resource/France"
    );
}

#[test]
fn boundaries_are_half_open() {
    let dir = tempfile::tempdir().unwrap();
    let archive = fixture_archive(dir.path(), UriLayout::new(BASE));
    assert_eq!(selected_start(&decide(&archive, FRANCE, Some(ymd(2008, 2, 1)))), ymd(2008, 2, 1));
    assert_eq!(selected_start(&decide(&archive, FRANCE, Some(ymd(2008, 2, 1).plus_seconds(-1)))), ymd(2007, 9, 1));
    assert_eq!(selected_start(&decide(&archive, FRANCE, Some(ymd(2007, 9, 1)))), ymd(2007, 9, 1));
    assert_eq!(
        decide(&archive, FRANCE, Some(ymd(2009, 11, 1).plus_seconds(-1))).selected().unwrap().interval.start(),
        ymd(2009, 7, 1)
    );
}

#[test]
fn rule_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let archive = fixture_archive(dir.path(), UriLayout::new(BASE));

    assert_eq!(selected_start(&decide(&archive, FRANCE, None)), ymd(2009, 7, 1));

    let all =
        negotiate(&archive, &NegotiationRequest::new(uri(FRANCE)).at(ymd(2008, 3, 20)).negotiate_explicitly()).unwrap();
    match all {
        NegotiationDecision::MultipleChoices { candidates } => assert_eq!(candidates.len(), 5),
        other => panic!("expected 300, got {}", other.kind()),
    }

    match decide(&archive, FRANCE, Some(ymd(2005, 1, 1))) {
        NegotiationDecision::NotAcceptable { range } => {
            assert_eq!(range.earliest, ymd(2007, 9, 1));
            assert_eq!(range.latest, ymd(2009, 11, 1));
            assert!(range.has_current);
        }
        other => panic!("expected 406, got {}", other.kind()),
    }

    for t in [ymd(2009, 11, 1), ymd(2026, 1, 1)] {
        match decide(&archive, FRANCE, Some(t)) {
            NegotiationDecision::RedirectToOriginal { uri, links } => {
                assert_eq!(uri.as_str(), "http://archive.test/dbpedia/resource/http://dbpedia.org/resource/France");
                let rels: Vec<_> = links.iter().map(|l| l.rels[0].clone()).collect();
                assert_eq!(rels, vec![LinkRelation::TimeGate, LinkRelation::TimeBundle]);
            }
            other => panic!("expected redirect to original, got {}", other.kind()),
        }
    }
}

#[test]
fn vanished_subject_keeps_last_known_state() {
    let dir = tempfile::tempdir().unwrap();
    let archive = fixture_archive(dir.path(), UriLayout::new(BASE));
    assert_eq!(selected_start(&decide(&archive, ATLANTIS, Some(ymd(2008, 3, 1)))), ymd(2008, 2, 1));
    assert_eq!(selected_start(&decide(&archive, ATLANTIS, Some(ymd(2009, 1, 1)))), ymd(2008, 2, 1));
    assert_eq!(selected_start(&decide(&archive, ATLANTIS, Some(ymd(2012, 1, 1)))), ymd(2008, 2, 1));
    assert_eq!(selected_start(&decide(&archive, ATLANTIS, None)), ymd(2008, 2, 1));
    match decide(&archive, ATLANTIS, Some(ymd(2007, 1, 1))) {
        NegotiationDecision::NotAcceptable { range } => assert!(!range.has_current),
        other => panic!("expected 406, got {}", other.kind()),
    }
}

#[test]
fn subject_with_only_a_current_state() {
    let dir = tempfile::tempdir().unwrap();
    let archive = fixture_archive(dir.path(), UriLayout::new(BASE));
    assert_eq!(decide(&archive, NEWLAND, None).kind(), "redirect-to-original");
    assert_eq!(decide(&archive, NEWLAND, Some(ymd(2010, 1, 1))).kind(), "redirect-to-original");
    assert_eq!(decide(&archive, NEWLAND, Some(ymd(2008, 1, 1))).kind(), "not-acceptable");
}

#[test]
fn unknown_subject_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let archive = fixture_archive(dir.path(), UriLayout::new(BASE));
    let err = negotiate(&archive, &NegotiationRequest::new(uri("http://dbpedia.org/resource/Nowhere"))).unwrap_err();
    assert!(matches!(err, StoreError::UnknownSubject(_)));
}

#[test]
fn memento_links_name_neighbors() {
    let dir = tempfile::tempdir().unwrap();
    let archive = fixture_archive(dir.path(), UriLayout::new(BASE));
    let rels_at = |t| match decide(&archive, FRANCE, Some(t)) {
        NegotiationDecision::RedirectToMemento { links, .. } => {
            links.iter().map(|l| l.rels[0].token().to_string()).collect::<Vec<_>>()
        }
        other => panic!("{}", other.kind()),
    };
    assert_eq!(
        rels_at(ymd(2008, 3, 20)),
        ["original", "first-memento", "last-memento", "prev-memento", "next-memento"]
    );
    assert_eq!(rels_at(ymd(2007, 10, 1)), ["original", "first-memento", "last-memento", "next-memento"]);
    assert_eq!(rels_at(ymd(2009, 8, 1)), ["original", "first-memento", "last-memento", "prev-memento"]);
}

#[test]
fn external_originals_redirect_to_the_subject() {
    let dir = tempfile::tempdir().unwrap();
    let archive = fixture_archive(dir.path(), UriLayout::new(BASE).with_external_originals(true));
    match decide(&archive, FRANCE, Some(ymd(2010, 1, 1))) {
        NegotiationDecision::RedirectToOriginal { uri, .. } => assert_eq!(uri.as_str(), FRANCE),
        other => panic!("{}", other.kind()),
    }
}
