//! Instants, resource identifiers and validity intervals.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use thiserror::Error;

/// Fixed-length HTTP-date layout, e.g. `Sun, 06 Nov 1994 08:49:37 GMT`.
const HTTP_DATE_FORMAT: &str = "%a, %d %b %Y %H:%M:%S GMT";
const HTTP_DATE_LEN: usize = 29;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("malformed HTTP-date: {0:?}")]
    MalformedDate(String),
    #[error("malformed ISO-8601 datetime: {0:?}")]
    MalformedIso(String),
    #[error("interval start {start} is not before end {end}")]
    EmptyInterval { start: Timestamp, end: Timestamp },
    #[error("not an absolute URI: {0:?}")]
    NotAbsolute(String),
}

/// A UTC instant with second granularity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub const UNIX_EPOCH: Timestamp = Timestamp(DateTime::<Utc>::UNIX_EPOCH);

    /// Truncates any sub-second component.
    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Timestamp(dt.with_nanosecond(0).unwrap_or(dt))
    }

    pub fn from_unix(secs: i64) -> Option<Self> {
        Utc.timestamp_opt(secs, 0).single().map(Timestamp)
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|ndt| Timestamp(Utc.from_utc_datetime(&ndt)))
    }

    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    pub fn unix(&self) -> i64 {
        self.0.timestamp()
    }

    pub fn as_datetime(&self) -> DateTime<Utc> {
        self.0
    }

    pub fn plus_seconds(&self, secs: i64) -> Self {
        Timestamp(self.0 + chrono::Duration::seconds(secs))
    }

    pub fn plus_days(&self, days: i64) -> Self {
        Timestamp(self.0 + chrono::Duration::days(days))
    }

    /// Strict parse of the fixed-length HTTP-date form. Obsolete RFC 850 and
    /// asctime forms, other zones and lowercase variants are rejected.
    pub fn parse_http_date(raw: &str) -> Result<Self, TimeError> {
        let malformed = || TimeError::MalformedDate(raw.to_string());
        if raw.len() != HTTP_DATE_LEN || !raw.is_ascii() || !raw.ends_with(" GMT") {
            return Err(malformed());
        }
        let ndt = NaiveDateTime::parse_from_str(raw, HTTP_DATE_FORMAT).map_err(|_| malformed())?;
        let ts = Timestamp(Utc.from_utc_datetime(&ndt));
        // chrono accepts case variants of day and month names; only the
        // canonical spelling is a valid HTTP-date.
        if ts.http_date() != raw {
            return Err(malformed());
        }
        Ok(ts)
    }

    pub fn http_date(&self) -> String {
        self.0.format(HTTP_DATE_FORMAT).to_string()
    }

    /// Accepts a bare date (`2008-03-20`), an RFC 3339 datetime with any
    /// offset, or a zone-less datetime taken as UTC.
    pub fn parse_iso(raw: &str) -> Result<Self, TimeError> {
        let raw = raw.trim();
        if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
            if raw.len() == 10 {
                return Ok(Timestamp(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap())));
            }
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
            return Ok(Self::from_datetime(dt.with_timezone(&Utc)));
        }
        if let Ok(ndt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S") {
            return Ok(Timestamp(Utc.from_utc_datetime(&ndt)));
        }
        Err(TimeError::MalformedIso(raw.to_string()))
    }

    /// ISO-8601 with a `Z` suffix, the form used for `xsd:dateTime` literals.
    pub fn iso(&self) -> String {
        self.0.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    }

    pub fn iso_date(&self) -> String {
        self.0.format("%Y-%m-%d").to_string()
    }

    /// `YYYYMMDD`, the Memento URI date segment.
    pub fn compact_date(&self) -> String {
        self.0.format("%Y%m%d").to_string()
    }

    pub fn parse_compact_date(raw: &str) -> Option<Self> {
        if raw.len() != 8 || !raw.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        NaiveDate::parse_from_str(raw, "%Y%m%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|ndt| Timestamp(Utc.from_utc_datetime(&ndt)))
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.iso())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.iso())
    }
}

pub fn parse_http_date(raw: &str) -> Result<Timestamp, TimeError> {
    Timestamp::parse_http_date(raw)
}

pub fn format_http_date(t: Timestamp) -> String {
    t.http_date()
}

/// Source of "now". Pinned in tests and by `--fixed-now` so that TimeMap
/// timestamps and the current-range boundary are reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    Fixed(Timestamp),
}

impl Clock {
    pub fn now(&self) -> Timestamp {
        match self {
            Clock::System => Timestamp::now(),
            Clock::Fixed(t) => *t,
        }
    }
}

/// An absolute URI (scheme and authority present).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourceUri(String);

impl ResourceUri {
    pub fn parse(raw: &str) -> Result<Self, TimeError> {
        if is_absolute_uri(raw) {
            Ok(ResourceUri(raw.to_string()))
        } else {
            Err(TimeError::NotAbsolute(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

fn is_absolute_uri(raw: &str) -> bool {
    let Some((scheme, rest)) = raw.split_once("://") else {
        return false;
    };
    let mut chars = scheme.chars();
    let scheme_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    let authority = rest.split(['/', '?', '#']).next().unwrap_or("");
    scheme_ok
        && !authority.is_empty()
        && !raw.chars().any(|c| {
            c.is_whitespace() || c.is_control() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '\\' | '^' | '`')
        })
}

impl FromStr for ResourceUri {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ResourceUri::parse(s)
    }
}

impl fmt::Debug for ResourceUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl fmt::Display for ResourceUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ResourceUri {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Half-open validity span `[start, end)`. An absent end means the span is
/// still open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VersionInterval {
    start: Timestamp,
    end: Option<Timestamp>,
}

impl VersionInterval {
    pub fn new(start: Timestamp, end: Option<Timestamp>) -> Result<Self, TimeError> {
        match end {
            Some(end) if end <= start => Err(TimeError::EmptyInterval { start, end }),
            _ => Ok(VersionInterval { start, end }),
        }
    }

    pub fn closed(start: Timestamp, end: Timestamp) -> Result<Self, TimeError> {
        Self::new(start, Some(end))
    }

    pub fn open(start: Timestamp) -> Self {
        VersionInterval { start, end: None }
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Option<Timestamp> {
        self.end
    }

    pub fn covers(&self, t: Timestamp) -> bool {
        self.start <= t && self.end.is_none_or(|end| t < end)
    }
}

pub fn interval_covers(iv: &VersionInterval, t: Timestamp) -> bool {
    iv.covers(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ymd(y: i32, m: u32, d: u32) -> Timestamp {
        Timestamp::from_ymd(y, m, d).unwrap()
    }

    /// Zeller's congruence, kept apart from chrono. 0 = Saturday.
    fn zeller_weekday(y: i32, m: u32, d: u32) -> &'static str {
        let (y, m) = if m < 3 { (y - 1, m + 12) } else { (y, m) };
        let k = y.rem_euclid(100);
        let j = y.div_euclid(100);
        let h = (d as i32 + (13 * (m as i32 + 1)) / 5 + k + k / 4 + j / 4 + 5 * j).rem_euclid(7);
        ["Sat", "Sun", "Mon", "Tue", "Wed", "Thu", "Fri"][h as usize]
    }

    #[test]
    fn parses_known_dates() {
        assert_eq!(parse_http_date("Thu, 20 Mar 2008 00:00:00 GMT").unwrap(), ymd(2008, 3, 20));
        assert_eq!(parse_http_date("Sun, 08 Nov 2009 00:00:00 GMT").unwrap(), ymd(2009, 11, 8));
    }

    #[test]
    fn rejects_non_http_dates() {
        for raw in [
            "2008-03-20",
            "Thu, 20 Mar 2008 00:00:00 UTC",
            "Thu, 20 Mar 2008 00:00:00 +0000",
            "Thursday, 20-Mar-08 00:00:00 GMT",
            "Thu Mar 20 00:00:00 2008",
            "Thu, 20 Mar 2008 0:00:00 GMT",
            "thu, 20 mar 2008 00:00:00 GMT",
            "Fri, 20 Mar 2008 00:00:00 GMT",
            " Thu, 20 Mar 2008 00:00:00 GMT",
            "",
        ] {
            assert!(matches!(parse_http_date(raw), Err(TimeError::MalformedDate(_))), "{raw:?} accepted");
        }
    }

    #[test]
    fn formats_with_independent_weekday() {
        assert_eq!(zeller_weekday(2008, 2, 1), "Fri");
        assert_eq!(format_http_date(ymd(2008, 2, 1)), "Fri, 01 Feb 2008 00:00:00 GMT");
        assert_eq!(format_http_date(Timestamp::UNIX_EPOCH), "Thu, 01 Jan 1970 00:00:00 GMT");
    }

    #[test]
    fn interval_boundaries() {
        let iv = VersionInterval::closed(ymd(2008, 2, 1), ymd(2008, 8, 1)).unwrap();
        assert!(interval_covers(&iv, ymd(2008, 3, 20)));
        assert!(interval_covers(&iv, ymd(2008, 2, 1)));
        assert!(!interval_covers(&iv, ymd(2008, 8, 1)));
        assert!(!interval_covers(&iv, ymd(2008, 1, 31)));
        let open = VersionInterval::open(ymd(2009, 11, 1));
        assert!(interval_covers(&open, ymd(2009, 12, 1)));
        assert!(VersionInterval::closed(ymd(2008, 2, 1), ymd(2008, 2, 1)).is_err());
    }

    #[test]
    fn iso_forms() {
        let t = ymd(2007, 9, 1);
        assert_eq!(Timestamp::parse_iso("2007-09-01T00:00:00+00:00").unwrap(), t);
        assert_eq!(Timestamp::parse_iso("2007-09-01T02:00:00+02:00").unwrap(), t);
        assert_eq!(Timestamp::parse_iso("2007-09-01").unwrap(), t);
        assert_eq!(t.iso(), "2007-09-01T00:00:00Z");
        assert_eq!(t.compact_date(), "20070901");
        assert_eq!(Timestamp::parse_compact_date("20070901"), Some(t));
        assert_eq!(Timestamp::parse_compact_date("2007091"), None);
        assert_eq!(Timestamp::parse_compact_date("20071301"), None);
    }

    #[test]
    fn uri_validation() {
        assert!(ResourceUri::parse("http://dbpedia.org/resource/France").is_ok());
        assert!(ResourceUri::parse("urn:isbn:123").is_err());
        assert!(ResourceUri::parse("http:///x").is_err());
        assert!(ResourceUri::parse("France").is_err());
        assert!(ResourceUri::parse("").is_err());
        assert!(ResourceUri::parse("http://a.example/x y").is_err());
    }

    proptest! {
        #[test]
        fn http_date_roundtrip(secs in -2_208_988_800i64..253_402_300_799i64) {
            let t = Timestamp::from_unix(secs).unwrap();
            let s = format_http_date(t);
            prop_assert_eq!(s.len(), HTTP_DATE_LEN);
            prop_assert_eq!(parse_http_date(&s).unwrap(), t);
            prop_assert_eq!(&s[..3], {
                let d = t.as_datetime().date_naive();
                use chrono::Datelike;
                zeller_weekday(d.year(), d.month(), d.day())
            });
        }

        #[test]
        fn covers_is_monotone(start in 0i64..1_000_000, len in 1i64..1_000_000, t in -1_000_000i64..3_000_000) {
            let s = Timestamp::from_unix(start).unwrap();
            let e = Timestamp::from_unix(start + len).unwrap();
            let iv = VersionInterval::closed(s, e).unwrap();
            let tt = Timestamp::from_unix(t).unwrap();
            prop_assert_eq!(iv.covers(tt), start <= t && t < start + len);
        }
    }
}
