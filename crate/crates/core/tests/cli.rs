mod common;

use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::*;
use memento_core::fixtures::{self, FRANCE, GDP_PPP_PER_CAPITA, GERMANY};
use memento_core::timemap::parse_rdfxml;

const BIN: &str = env!("CARGO_BIN_EXE_memento");

fn memento(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MEMENTO_ARCHIVE").env("RUST_LOG", "info").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ingest_fixture(dir: &Path) -> String {
    let manifest = fixtures::write_corpus(&dir.join("corpus")).unwrap();
    let archive = dir.join("archive");
    let out = memento(&[
        "ingest",
        manifest.to_str().unwrap(),
        "--archive",
        archive.to_str().unwrap(),
        "--fixed-now",
        "2010-01-01",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    assert!(line.starts_with("subjects=4 records=12 elapsed="), "{line}");
    archive.to_str().unwrap().to_string()
}

#[test]
fn ingest_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    ingest_fixture(dir.path());
}

#[test]
fn ingest_rejects_unordered_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.nt"), "").unwrap();
    std::fs::write(dir.path().join("m.txt"), "2009-01-01 a.nt\n2008-01-01 a.nt\n").unwrap();
    let out = memento(&[
        "ingest",
        dir.path().join("m.txt").to_str().unwrap(),
        "--archive",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("DateOrderError"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(memento(&["ingest", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(memento(&[]).status.code(), Some(1));
    assert_eq!(memento(&["--help"]).status.code(), Some(0));
}

#[test]
fn timemap_is_deterministic_and_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let a = memento(&["timemap", FRANCE, "--archive", &archive]);
    assert!(a.status.success(), "{}", stderr(&a));
    let doc = parse_rdfxml(&a.stdout).unwrap().doc;
    assert_eq!(doc.mementos.len(), 5);
    assert_eq!(doc.created, built_at());
    let b = Command::new(BIN).args(["timemap", FRANCE]).env("MEMENTO_ARCHIVE", &archive).output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(memento(&["timemap", "http://e.x/none", "--archive", &archive]).status.code(), Some(1));
}

struct Serve(Child);

impl Drop for Serve {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(archive: &str) -> (Serve, String) {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let listen = format!("127.0.0.1:{port}");
    let child = Command::new(BIN)
        .args(["serve", "--archive", archive, "--listen", &listen])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    while std::net::TcpStream::connect(&listen).is_err() {
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(20));
    }
    (Serve(child), format!("http://{listen}"))
}

#[test]
fn get_and_timeseries_against_served_archive() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let (_server, base) = serve(&archive);

    let out = memento(&["get", FRANCE, "--server", &base, "--datetime", "2008-03-20"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains(&format!("final-uri: {base}/memento/20080201/{FRANCE}\n")), "{text}");
    assert!(text.contains("content-datetime: Fri, 01 Feb 2008 00:00:00 GMT\n"), "{text}");
    assert!(text.contains(&format!("link: prev-memento {base}/memento/20070901/{FRANCE}\n")), "{text}");

    let current = memento(&["get", FRANCE, "--server", &base, "--accept", "nt"]);
    assert!(current.status.success());
    let text = stdout(&current);
    assert!(text.contains("content-datetime: -\n"));
    assert!(text.contains("\"3.2678e4\""), "{text}");

    let early = memento(&["get", FRANCE, "--server", &base, "--datetime", "2005-01-01"]);
    assert_eq!(early.status.code(), Some(2));
    assert!(stdout(&early).contains("earliest: Sat, 01 Sep 2007 00:00:00 GMT"));

    let spec = dir.path().join("spec.txt");
    let mut body =
        format!("resource {FRANCE}\nresource {GERMANY}\nproperty {GDP_PPP_PER_CAPITA}\ntimegate {base}/timegate/\n");
    for d in fixtures::snapshot_dates() {
        body.push_str(&format!("time {}\n", d.plus_days(10).iso()));
    }
    std::fs::write(&spec, body).unwrap();
    let csv = memento(&["timeseries", spec.to_str().unwrap(), "--format", "csv"]);
    assert!(csv.status.success(), "{}", stderr(&csv));
    assert_eq!(
        stdout(&csv),
        format!(
            "resource,2007-09-11,2008-02-11,2008-08-11,2008-11-11,2009-07-11,2009-11-11\n\
             {FRANCE},29900,30100,30693,33188,33434,32678\n{GERMANY},31400,31900,32322,34212,34181,35432.5\n"
        )
    );
    let chart = memento(&["timeseries", spec.to_str().unwrap(), "--format", "chart-params"]);
    assert!(stdout(&chart).starts_with("cht=lc&"));
}

#[test]
fn get_without_server_is_an_operational_error() {
    let out = memento(&["get", "http://127.0.0.1:9/resource/x", "--datetime", "2008-01-01"]);
    assert_eq!(out.status.code(), Some(1));
}
