//! Time series over archived linked data: one property of several
//! resources, sampled at a list of datetimes through the Memento client.

use std::fmt;
use std::path::Path;

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use thiserror::Error;

use crate::client::{ClientError, MementoClient, Transport};
use crate::media::MediaType;
use crate::rdf::{self, select_values};
use crate::time::{ResourceUri, Timestamp};

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("spec line {line}: {message}")]
    Spec { line: usize, message: String },
    #[error("cannot read spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("every fetch failed; first error: {0}")]
    AllFailed(ClientError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesSpec {
    pub resources: Vec<ResourceUri>,
    /// Strictly increasing.
    pub times: Vec<Timestamp>,
    pub property: ResourceUri,
    /// When set, resource `r` is fetched through `<prefix><r>`.
    pub timegate_prefix: Option<String>,
}

impl SeriesSpec {
    pub fn new(resources: Vec<ResourceUri>, times: Vec<Timestamp>, property: ResourceUri) -> Result<Self, SeriesError> {
        let invalid = |message: &str| SeriesError::Spec { line: 0, message: message.to_string() };
        if resources.is_empty() {
            return Err(invalid("no resources"));
        }
        if times.is_empty() {
            return Err(invalid("no times"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("times must be strictly increasing"));
        }
        Ok(SeriesSpec { resources, times, property, timegate_prefix: None })
    }

    pub fn with_timegate_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.timegate_prefix = Some(prefix.into());
        self
    }

    /// Line format: `resource <uri>`, `time <ISO-8601>`, `property <uri>`,
    /// optionally `timegate <prefix>`. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, SeriesError> {
        let mut resources = Vec::new();
        let mut times = Vec::new();
        let mut property = None;
        let mut prefix = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| SeriesError::Spec { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once(char::is_whitespace)
                .ok_or_else(|| err(format!("expected `<key> <value>`, got {trimmed:?}")))?;
            let value = value.trim();
            let uri = || ResourceUri::parse(value).map_err(|e| err(e.to_string()));
            match key {
                "resource" => resources.push(uri()?),
                "time" => times.push(Timestamp::parse_iso(value).map_err(|e| err(e.to_string()))?),
                "property" if property.is_some() => return Err(err("property given twice".into())),
                "property" => property = Some(uri()?),
                "timegate" => {
                    uri()?;
                    prefix = Some(value.to_string());
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let property = property.ok_or(SeriesError::Spec { line: 0, message: "no property".into() })?;
        let spec = SeriesSpec::new(resources, times, property)?;
        Ok(match prefix {
            Some(p) => spec.with_timegate_prefix(p),
            None => spec,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SeriesError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The URI negotiated for `resource`.
    pub fn entry_point(&self, resource: &ResourceUri) -> Result<ResourceUri, ClientError> {
        match &self.timegate_prefix {
            None => Ok(resource.clone()),
            Some(prefix) => ResourceUri::parse(&format!("{prefix}{resource}"))
                .map_err(|e| ClientError::Transport(format!("bad timegate prefix: {e}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anomaly {
    OutOfRange,
    MissingProperty,
    NonNumeric(String),
    MultipleValues(usize),
    Fetch(String),
    NotCovered(String),
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anomaly::OutOfRange => f.write_str("out-of-range"),
            Anomaly::MissingProperty => f.write_str("missing-property"),
            Anomaly::NonNumeric(raw) => write!(f, "non-numeric: {raw:?}"),
            Anomaly::MultipleValues(n) => write!(f, "multiple values ({n})"),
            Anomaly::Fetch(e) => write!(f, "fetch failed: {e}"),
            Anomaly::NotCovered(w) => write!(f, "not covered: {w}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub uri: ResourceUri,
    /// Absent when the value came from the current state.
    pub content_datetime: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cell {
    pub value: Option<f64>,
    pub provenance: Option<Provenance>,
    pub anomalies: Vec<Anomaly>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub resources: Vec<ResourceUri>,
    pub times: Vec<Timestamp>,
    /// `cells[r][t]`.
    pub cells: Vec<Vec<Cell>>,
}

impl SeriesResult {
    pub fn values(&self) -> Vec<Vec<Option<f64>>> {
        self.cells.iter().map(|row| row.iter().map(|c| c.value).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason}")]
pub struct NonNumeric {
    pub reason: &'static str,
}

/// Reads a number out of a loosely formatted literal: surrounding space,
/// a trailing parenthesized note, leading currency symbols and thousands
/// commas are dropped; what remains must be a plain decimal or scientific
/// number.
pub fn normalize(raw: &str) -> Result<f64, NonNumeric> {
    let mut s = raw.trim();
    if let Some(i) = s.find('(') {
        s = s[..i].trim_end();
    }
    s = s.trim_start_matches(|c: char| matches!(c, '$' | '€' | '£') || c.is_whitespace());
    let cleaned: String = s.chars().filter(|&c| c != ',').collect();
    if cleaned.is_empty() {
        return Err(NonNumeric { reason: "empty" });
    }
    if !cleaned.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'))
        || !cleaned.bytes().any(|b| b.is_ascii_digit())
    {
        return Err(NonNumeric { reason: "non-numeric" });
    }
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(NonNumeric { reason: "not finite" }),
        Err(_) => Err(NonNumeric { reason: "non-numeric" }),
    }
}

/// Value and anomalies for one archived representation.
pub fn extract(body: &[u8], subject: &ResourceUri, property: &ResourceUri) -> (Option<f64>, Vec<Anomaly>) {
    let triples: Vec<_> = rdf::parse_ntriples(body).filter_map(Result::ok).collect();
    let raw = select_values(&triples, subject, property);
    let mut anomalies = Vec::new();
    if raw.is_empty() {
        anomalies.push(Anomaly::MissingProperty);
        return (None, anomalies);
    }
    if raw.len() > 1 {
        anomalies.push(Anomaly::MultipleValues(raw.len()));
    }
    let value = raw.iter().find_map(|r| normalize(r).ok());
    if value.is_none() {
        anomalies.push(Anomaly::NonNumeric(raw[0].clone()));
    }
    (value, anomalies)
}

fn fetch_cell<T: Transport>(
    client: &MementoClient<T>,
    spec: &SeriesSpec,
    resource: &ResourceUri,
    t: Timestamp,
) -> Result<Cell, ClientError> {
    let entry = spec.entry_point(resource)?;
    let resp = match client.fetch_at(&entry, t, MediaType::NTriples.essence()) {
        Ok(r) => r,
        Err(ClientError::OutOfRange { .. }) => {
            return Ok(Cell { anomalies: vec![Anomaly::OutOfRange], ..Cell::default() })
        }
        Err(e @ (ClientError::Transport(_) | ClientError::NoTimeGate(_))) => return Err(e),
        Err(e) => return Ok(Cell { anomalies: vec![Anomaly::Fetch(e.to_string())], ..Cell::default() }),
    };
    let (value, mut anomalies) = extract(&resp.body, resource, &spec.property);
    if let Some(w) = resp.warning {
        anomalies.push(Anomaly::NotCovered(w));
    }
    Ok(Cell {
        value,
        provenance: Some(Provenance { uri: resp.final_uri, content_datetime: resp.content_datetime }),
        anomalies,
    })
}

/// Samples every (resource, time) cell, one worker thread per resource.
/// Per-cell failures become anomalies; only a transport failure on every
/// cell is an error.
pub fn run_series<T: Transport + Sync>(
    spec: &SeriesSpec,
    client: &MementoClient<T>,
) -> Result<SeriesResult, SeriesError> {
    let rows: Vec<Vec<Result<Cell, ClientError>>> = std::thread::scope(|scope| {
        let workers: Vec<_> = spec
            .resources
            .iter()
            .map(|r| scope.spawn(move || spec.times.iter().map(|&t| fetch_cell(client, spec, r, t)).collect()))
            .collect();
        workers.into_iter().map(|w| w.join().expect("series worker panicked")).collect()
    });

    let mut first_error = None;
    let mut any_ok = false;
    let cells = rows
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|cell| match cell {
                    Ok(c) => {
                        any_ok = true;
                        c
                    }
                    Err(e) => {
                        let anomaly = Anomaly::Fetch(e.to_string());
                        first_error.get_or_insert(e);
                        Cell { anomalies: vec![anomaly], ..Cell::default() }
                    }
                })
                .collect()
        })
        .collect();
    if !any_ok {
        if let Some(e) = first_error {
            return Err(SeriesError::AllFailed(e));
        }
    }
    Ok(SeriesResult { resources: spec.resources.clone(), times: spec.times.clone(), cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    ChartParams,
}

impl OutputFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "csv" => Some(OutputFormat::Csv),
            "chart-params" | "chart" => Some(OutputFormat::ChartParams),
            _ => None,
        }
    }
}

fn number(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn emit(result: &SeriesResult, format: OutputFormat) -> Result<Vec<u8>, SeriesError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["resource".to_string()];
            header.extend(result.times.iter().map(Timestamp::iso_date));
            w.write_record(&header)?;
            for (r, row) in result.resources.iter().zip(&result.cells) {
                let mut record = vec![r.to_string()];
                record.extend(row.iter().map(|c| number(c.value)));
                w.write_record(&record)?;
            }
            w.into_inner().map_err(|e| SeriesError::Io(e.into_error()))
        }
        OutputFormat::ChartParams => {
            let series: Vec<String> = result
                .cells
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| c.value.map_or_else(|| "_".to_string(), |v| v.to_string()))
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect();
            let labels: Vec<String> = result.times.iter().map(Timestamp::iso_date).collect();
            let legend: Vec<&str> = result.resources.iter().map(ResourceUri::as_str).collect();
            let enc = |s: &str| utf8_percent_encode(s, NON_ALPHANUMERIC).to_string();
            let params = format!(
                "cht=lc&chds=a&chd={}&chdl={}&chxt=x&chxl={}",
                enc(&format!("t:{}", series.join("|"))),
                enc(&legend.join("|")),
                enc(&format!("0:|{}", labels.join("|"))),
            );
            Ok(params.into_bytes())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        let spec = SeriesSpec::parse(
            "# gdp\nresource http://dbpedia.org/resource/France\ntime 2008-01-01\ntime 2009-01-01T00:00:00Z\n\
             property http://dbpedia.org/property/gdpPppPerCapita\ntimegate http://localhost:1/timegate/\n",
        )
        .unwrap();
        assert_eq!(spec.resources.len(), 1);
        assert_eq!(spec.times.len(), 2);
        assert_eq!(
            spec.entry_point(&spec.resources[0]).unwrap().as_str(),
            "http://localhost:1/timegate/http://dbpedia.org/resource/France"
        );
        assert!(SeriesSpec::parse("resource http://a.b/c\ntime 2009-01-01\ntime 2008-01-01\nproperty http://a.b/p\n")
            .is_err());
        assert!(SeriesSpec::parse("time 2009-01-01\nproperty http://a.b/p\n").is_err());
        assert!(SeriesSpec::parse("resource http://a.b/c\ntime 2009-01-01\n").is_err());
        assert!(SeriesSpec::parse("colour blue\n").is_err());
    }

    #[test]
    fn extraction_notes() {
        let s = ResourceUri::parse("http://e.x/s").unwrap();
        let p = ResourceUri::parse("http://e.x/p").unwrap();
        let body = b"<http://e.x/s> <http://e.x/p> \"n/a\" .\n<http://e.x/s> <http://e.x/p> \"$12\" .\n";
        let (v, notes) = extract(body, &s, &p);
        assert_eq!(v, Some(12.0));
        assert_eq!(notes, vec![Anomaly::MultipleValues(2)]);
        let (v, notes) = extract(b"<http://e.x/s> <http://e.x/q> \"1\" .\n", &s, &p);
        assert_eq!(v, None);
        assert_eq!(notes, vec![Anomaly::MissingProperty]);
    }

    fn result_1x3() -> SeriesResult {
        let cell = |v| Cell { value: v, ..Cell::default() };
        SeriesResult {
            resources: vec![ResourceUri::parse("http://e.x/a").unwrap()],
            times: (1..=3).map(|m| Timestamp::from_ymd(2008, m, 1).unwrap()).collect(),
            cells: vec![vec![cell(Some(1.5)), cell(None), cell(Some(30100.0))]],
        }
    }

    #[test]
    fn csv_shape() {
        let out = String::from_utf8(emit(&result_1x3(), OutputFormat::Csv).unwrap()).unwrap();
        assert_eq!(out, "resource,2008-01-01,2008-02-01,2008-03-01\nhttp://e.x/a,1.5,,30100\n");
    }

    #[test]
    fn chart_params_match_csv_numbers() {
        let out = String::from_utf8(emit(&result_1x3(), OutputFormat::ChartParams).unwrap()).unwrap();
        let chd = out.split('&').find_map(|kv| kv.strip_prefix("chd=")).unwrap();
        let decoded = percent_encoding::percent_decode_str(chd).decode_utf8().unwrap();
        assert_eq!(decoded, "t:1.5,_,30100");
    }
}
