//! A small DBpedia-shaped corpus: six dated snapshots of country
//! descriptions, used by tests, examples and the FFI smoke tests.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::time::Timestamp;

pub const FRANCE: &str = "http://dbpedia.org/resource/France";
pub const GERMANY: &str = "http://dbpedia.org/resource/Germany";
/// Present in the first two snapshots only.
pub const ATLANTIS: &str = "http://dbpedia.org/resource/Atlantis";
/// Present in the current snapshot only.
pub const NEWLAND: &str = "http://dbpedia.org/resource/Newland";
pub const GDP_PPP_PER_CAPITA: &str = "http://dbpedia.org/property/gdpPppPerCapita";

/// Version dates of the six snapshots; the last is current.
pub const SNAPSHOT_DATES: [(i32, u32, u32); 6] =
    [(2007, 9, 1), (2008, 2, 1), (2008, 8, 1), (2008, 11, 1), (2009, 7, 1), (2009, 11, 1)];

/// Raw GDP literals per snapshot, in the varying shapes real dumps use.
pub const FRANCE_GDP: [&str; 6] = ["29,900", "$30,100", "30693", "33188 (2008 est.)", "$ 33,434", "3.2678e4"];
pub const GERMANY_GDP: [&str; 6] = ["31,400", "$31,900", "32,322", "34212", "€34,181", "35,432.5"];

pub fn snapshot_dates() -> Vec<Timestamp> {
    SNAPSHOT_DATES.iter().map(|&(y, m, d)| Timestamp::from_ymd(y, m, d).expect("valid date")).collect()
}

fn nt_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// N-Triples body of snapshot `idx`.
pub fn snapshot_body(idx: usize) -> String {
    let label = format!("DBpedia snapshot {}", idx + 1);
    let mut out = format!("# {label}\n");
    let mut country = |subject: &str, name: &str, gdp: &str, capital: &str| {
        out.push_str(&format!("<{subject}> <http://www.w3.org/2000/01/rdf-schema#label> \"{name}\"@en .\n"));
        out.push_str(&format!("<{subject}> <{GDP_PPP_PER_CAPITA}> \"{}\" .\n", nt_escape(gdp)));
        out.push_str(&format!(
            "<{subject}> <http://dbpedia.org/property/capital> <http://dbpedia.org/resource/{capital}> .\n"
        ));
        out.push_str(&format!(
            "<{subject}> <http://dbpedia.org/property/revision> \"{}\"^^<http://www.w3.org/2001/XMLSchema#integer> .\n",
            idx + 1
        ));
    };
    country(FRANCE, "France", FRANCE_GDP[idx], "Paris");
    country(GERMANY, "Germany", GERMANY_GDP[idx], if idx == 0 { "Bonn" } else { "Berlin" });
    if idx < 2 {
        out.push_str(&format!("<{ATLANTIS}> <http://www.w3.org/2000/01/rdf-schema#label> \"Atlantis\"@en .\n"));
    }
    if idx == SNAPSHOT_DATES.len() - 1 {
        out.push_str(&format!("<{NEWLAND}> <http://www.w3.org/2000/01/rdf-schema#label> \"Newland\"@en .\n"));
    }
    out
}

/// Writes the six snapshots and a manifest into `dir`; returns the manifest
/// path.
pub fn write_corpus(dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (idx, date) in snapshot_dates().iter().enumerate() {
        let name = format!("dbpedia-{}.nt", date.compact_date());
        fs::write(dir.join(&name), snapshot_body(idx))?;
        manifest.push_str(&format!("{} {name}\n", date.iso_date()));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest)?;
    Ok(path)
}
