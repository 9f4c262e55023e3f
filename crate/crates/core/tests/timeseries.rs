mod common;

use common::*;
use memento_core::client::MementoClient;
use memento_core::fixtures::{self, FRANCE, GDP_PPP_PER_CAPITA, GERMANY};
use memento_core::store::{Archive, LookupResult};
use memento_core::time::Timestamp;
use memento_core::timeseries::{emit, extract, normalize, run_series, Anomaly, OutputFormat, SeriesSpec};
use proptest::prelude::*;

#[test]
fn normalization_table() {
    for (raw, want) in NORMALIZATION_TABLE {
        assert_eq!(normalize(raw).ok(), *want, "{raw:?}");
    }
}

proptest! {
    #[test]
    fn normalize_is_idempotent_on_its_output(raw in "[$€£ ]{0,2}[0-9]{1,3}(,[0-9]{3}){0,3}(\\.[0-9]{1,4})?( \\(est\\.\\))?") {
        let v = normalize(&raw).unwrap();
        prop_assert_eq!(normalize(&v.to_string()).unwrap(), v);
    }
}

fn sweep_times() -> Vec<Timestamp> {
    fixtures::snapshot_dates().iter().map(|d| d.plus_days(10)).collect()
}

/// The same sweep computed straight from the store.
fn oracle(archive: &Archive, spec: &SeriesSpec) -> Vec<Vec<Option<f64>>> {
    spec.resources
        .iter()
        .map(|r| {
            spec.times
                .iter()
                .map(|&t| {
                    let body = match archive.lookup(r, t).unwrap() {
                        LookupResult::Memento(rec) => archive.representation(&rec).unwrap(),
                        LookupResult::Current => archive.current_representation(r).unwrap().unwrap(),
                        LookupResult::OutOfRange => return None,
                    };
                    extract(&body, r, &spec.property).0
                })
                .collect()
        })
        .collect()
}

#[test]
fn http_pipeline_matches_store() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let archive = fixture_archive(&dir.path().join("oracle"), memento_core::store::UriLayout::new(&server.base_url()));
    let spec = SeriesSpec::new(vec![uri(FRANCE), uri(GERMANY)], sweep_times(), uri(GDP_PPP_PER_CAPITA))
        .unwrap()
        .with_timegate_prefix(format!("{}/timegate/", server.base_url()));
    let result = run_series(&spec, &MementoClient::http().unwrap()).unwrap();
    assert_eq!(result.values(), oracle(&archive, &spec));
    assert_eq!(result.values()[0], [29900.0, 30100.0, 30693.0, 33188.0, 33434.0, 32678.0].map(Some).to_vec());
    let provenance = result.cells[0][1].provenance.as_ref().unwrap();
    assert_eq!(provenance.content_datetime, Some(ymd(2008, 2, 1)));
    assert_eq!(result.cells[0][5].provenance.as_ref().unwrap().content_datetime, None);

    let csv = String::from_utf8(emit(&result, OutputFormat::Csv).unwrap()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "resource,2007-09-11,2008-02-11,2008-08-11,2008-11-11,2009-07-11,2009-11-11");
    assert_eq!(lines.next().unwrap(), format!("{FRANCE},29900,30100,30693,33188,33434,32678"));
    assert_eq!(lines.next().unwrap(), format!("{GERMANY},31400,31900,32322,34212,34181,35432.5"));
}

#[test]
fn out_of_range_cells_are_absent() {
    let dir = tempfile::tempdir().unwrap();
    let client = MementoClient::local(fixture_service(dir.path()));
    let spec = SeriesSpec::new(vec![uri(FRANCE)], vec![ymd(2005, 1, 1), ymd(2008, 3, 1)], uri(GDP_PPP_PER_CAPITA))
        .unwrap()
        .with_timegate_prefix(format!("{BASE}/timegate/"));
    let result = run_series(&spec, &client).unwrap();
    assert_eq!(result.values(), vec![vec![None, Some(30100.0)]]);
    assert_eq!(result.cells[0][0].anomalies, vec![Anomaly::OutOfRange]);

    let missing =
        SeriesSpec::new(vec![uri(FRANCE)], vec![ymd(2008, 3, 1)], uri("http://dbpedia.org/property/population"))
            .unwrap()
            .with_timegate_prefix(format!("{BASE}/timegate/"));
    let result = run_series(&missing, &client).unwrap();
    assert_eq!(result.cells[0][0].anomalies, vec![Anomaly::MissingProperty]);
}

#[test]
fn unreachable_service_is_an_error() {
    let spec = SeriesSpec::new(vec![uri(FRANCE)], vec![ymd(2008, 3, 1)], uri(GDP_PPP_PER_CAPITA))
        .unwrap()
        .with_timegate_prefix("http://127.0.0.1:9/timegate/");
    assert!(run_series(&spec, &MementoClient::http().unwrap()).is_err());
}
