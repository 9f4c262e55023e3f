//! The versioned archive.
//!
//! Ingestion streams each dated N-Triples snapshot once and appends the
//! triples of every subject to an append-only record log as fragments
//! (`records.log`). Opening an archive scans fragment headers only and
//! rebuilds the per-subject interval index in memory; representations are
//! read from the log on demand.
//!
//! Every snapshot but the last yields one Memento per subject it mentions,
//! valid from its own date up to the next snapshot's date. The last snapshot
//! is the current state, served by the original resource.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::hash::{Hash, Hasher};
use std::io::{self, BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::rdf::{self, RdfError};
use crate::time::{Clock, ResourceUri, Timestamp, VersionInterval};

const LOG_FILE: &str = "records.log";
const META_FILE: &str = "archive.meta";
const META_MAGIC: &str = "memento-archive 1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read snapshot {path}: {source}")]
    Ingest {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("snapshot {path}: {source}")]
    Syntax {
        path: PathBuf,
        #[source]
        source: RdfError,
    },
    #[error("DateOrderError: snapshot dated {next} does not follow {prev}")]
    DateOrder { prev: Timestamp, next: Timestamp },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("manifest lists no snapshots")]
    EmptyManifest,
    #[error("unknown subject {0}")]
    UnknownSubject(ResourceUri),
    #[error("corrupt archive: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotEntry {
    pub version_date: Timestamp,
    pub source: PathBuf,
}

/// Dated snapshot sources, strictly increasing by date. The last entry is
/// the current version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotManifest {
    entries: Vec<SnapshotEntry>,
}

impl SnapshotManifest {
    pub fn new(entries: Vec<SnapshotEntry>) -> Result<Self, StoreError> {
        if entries.is_empty() {
            return Err(StoreError::EmptyManifest);
        }
        for pair in entries.windows(2) {
            if pair[1].version_date <= pair[0].version_date {
                return Err(StoreError::DateOrder { prev: pair[0].version_date, next: pair[1].version_date });
            }
        }
        Ok(SnapshotManifest { entries })
    }

    /// Reads `<ISO-8601 date> <path>` lines. Relative paths resolve against
    /// `base_dir`; `#` starts a comment line.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, StoreError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (date, path) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| StoreError::Manifest { line: i + 1, message: "expected `<date> <path>`".into() })?;
            let version_date =
                Timestamp::parse_iso(date).map_err(|e| StoreError::Manifest { line: i + 1, message: e.to_string() })?;
            let path = PathBuf::from(path.trim());
            let source = if path.is_absolute() { path } else { base_dir.join(path) };
            entries.push(SnapshotEntry { version_date, source });
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn entries(&self) -> &[SnapshotEntry] {
        &self.entries
    }
}

/// How archive resources are named.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UriLayout {
    base: String,
    external_originals: bool,
}

impl UriLayout {
    /// Originals are emulated under `<base>/resource/<subject>`.
    pub fn new(base_url: &str) -> Self {
        UriLayout { base: base_url.trim_end_matches('/').to_string(), external_originals: false }
    }

    /// Original resources are the subject URIs themselves.
    pub fn with_external_originals(mut self, external: bool) -> Self {
        self.external_originals = external;
        self
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn external_originals(&self) -> bool {
        self.external_originals
    }

    fn mint(&self, path: String) -> ResourceUri {
        ResourceUri::parse(&format!("{}{path}", self.base)).expect("base URL is absolute")
    }

    pub fn original_uri(&self, subject: &ResourceUri) -> ResourceUri {
        if self.external_originals {
            subject.clone()
        } else {
            self.mint(format!("/resource/{subject}"))
        }
    }

    pub fn timegate_uri(&self, subject: &ResourceUri) -> ResourceUri {
        self.mint(format!("/timegate/{subject}"))
    }

    pub fn timemap_uri(&self, subject: &ResourceUri) -> ResourceUri {
        self.mint(format!("/timemap/rdf/{subject}"))
    }

    pub fn timebundle_uri(&self, subject: &ResourceUri) -> ResourceUri {
        self.mint(format!("/timebundle/{subject}"))
    }

    pub fn memento_uri(&self, subject: &ResourceUri, start: Timestamp) -> ResourceUri {
        self.mint(format!("/memento/{}/{subject}", start.compact_date()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Fragment {
    offset: u64,
    len: u32,
}

/// One archived version of a subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MementoRecord {
    pub id: u64,
    pub subject: ResourceUri,
    pub interval: VersionInterval,
    pub memento_uri: ResourceUri,
    pub created_at: Timestamp,
    fragments: Vec<Fragment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LookupResult {
    Memento(MementoRecord),
    Current,
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbors {
    pub first: MementoRecord,
    pub last: MementoRecord,
    pub prev: Option<MementoRecord>,
    pub next: Option<MementoRecord>,
}

/// The datetime span a subject is known over. `latest` is the date of the
/// current snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnownRange {
    pub earliest: Timestamp,
    pub latest: Timestamp,
    pub has_current: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestReport {
    pub subjects: u64,
    pub records: u64,
    pub current: u64,
    pub triples: u64,
    pub skipped_lines: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
    pub clock: Clock,
}

#[derive(Debug, Default)]
struct SubjectIndex {
    /// (snapshot index, fragments), ascending by snapshot.
    versions: Vec<(usize, Vec<Fragment>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ArchiveMeta {
    built_at: Timestamp,
    snapshots: Vec<Timestamp>,
    report: IngestReport,
}

/// A read-only, ingested archive.
#[derive(Debug)]
pub struct Archive {
    log: File,
    meta: ArchiveMeta,
    layout: UriLayout,
    index: HashMap<ResourceUri, SubjectIndex>,
}

/// Streams every snapshot into `dir` (created or overwritten), then opens it.
pub fn ingest(
    manifest: &SnapshotManifest,
    dir: &Path,
    layout: UriLayout,
    options: IngestOptions,
) -> Result<(Archive, IngestReport), StoreError> {
    let report = write_archive(manifest, dir, options)?;
    let archive = Archive::open(dir, layout)?;
    Ok((archive, report))
}

fn subject_key(subject: &ResourceUri) -> u64 {
    let mut h = DefaultHasher::new();
    subject.hash(&mut h);
    h.finish()
}

/// Writes the record log and metadata without building the index.
pub fn write_archive(
    manifest: &SnapshotManifest,
    dir: &Path,
    options: IngestOptions,
) -> Result<IngestReport, StoreError> {
    fs::create_dir_all(dir)?;
    let built_at = options.clock.now();
    let mut log = BufWriter::new(File::create(dir.join(LOG_FILE))?);
    let mut report = IngestReport::default();
    // Distinct subjects are tracked by 64-bit key, not by name.
    let mut all_subjects: HashSet<u64> = HashSet::new();
    let last = manifest.entries.len() - 1;

    for (idx, entry) in manifest.entries.iter().enumerate() {
        let file =
            File::open(&entry.source).map_err(|source| StoreError::Ingest { path: entry.source.clone(), source })?;
        let mut in_snapshot: HashSet<u64> = HashSet::new();
        let mut run: Option<(ResourceUri, Vec<u8>)> = None;
        let mut flush = |run: &mut Option<(ResourceUri, Vec<u8>)>, log: &mut BufWriter<File>| -> io::Result<()> {
            if let Some((subject, bytes)) = run.take() {
                writeln!(log, "F {idx} {} {subject}", bytes.len())?;
                log.write_all(&bytes)?;
                let key = subject_key(&subject);
                all_subjects.insert(key);
                in_snapshot.insert(key);
            }
            Ok(())
        };
        for item in rdf::parse_ntriples(BufReader::with_capacity(1 << 16, file)) {
            let triple = match item {
                Ok(t) => t,
                Err(RdfError::Io { source, .. }) => {
                    return Err(StoreError::Ingest { path: entry.source.clone(), source })
                }
                Err(e) if options.strict => return Err(StoreError::Syntax { path: entry.source.clone(), source: e }),
                Err(_) => {
                    report.skipped_lines += 1;
                    continue;
                }
            };
            report.triples += 1;
            let same = run.as_ref().is_some_and(|(s, _)| *s == triple.subject);
            if !same {
                flush(&mut run, &mut log)?;
                run = Some((triple.subject.clone(), Vec::new()));
            }
            let (_, bytes) = run.as_mut().expect("run started");
            writeln!(bytes, "{triple}")?;
            if bytes.len() > u32::MAX as usize / 2 {
                flush(&mut run, &mut log)?;
            }
        }
        flush(&mut run, &mut log)?;
        if idx < last {
            report.records += in_snapshot.len() as u64;
        } else {
            report.current = in_snapshot.len() as u64;
        }
    }
    log.flush()?;
    log.get_ref().sync_all()?;
    report.subjects = all_subjects.len() as u64;

    let meta = ArchiveMeta { built_at, snapshots: manifest.entries.iter().map(|e| e.version_date).collect(), report };
    fs::write(dir.join(META_FILE), render_meta(&meta))?;
    Ok(report)
}

fn render_meta(meta: &ArchiveMeta) -> String {
    let mut out = format!("{META_MAGIC}\nbuilt_at {}\n", meta.built_at.iso());
    for s in &meta.snapshots {
        out.push_str(&format!("snapshot {}\n", s.iso()));
    }
    let r = &meta.report;
    out.push_str(&format!(
        "subjects {}\nrecords {}\ncurrent {}\ntriples {}\nskipped {}\n",
        r.subjects, r.records, r.current, r.triples, r.skipped_lines
    ));
    out
}

fn parse_meta(text: &str) -> Result<ArchiveMeta, StoreError> {
    let corrupt = |m: &str| StoreError::Corrupt(format!("{META_FILE}: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some(META_MAGIC) {
        return Err(corrupt("bad header"));
    }
    let mut built_at = None;
    let mut snapshots = Vec::new();
    let mut report = IngestReport::default();
    for line in lines {
        let (key, value) = line.split_once(' ').ok_or_else(|| corrupt(line))?;
        let number = || value.parse::<u64>().map_err(|_| corrupt(line));
        match key {
            "built_at" => built_at = Some(Timestamp::parse_iso(value).map_err(|_| corrupt(line))?),
            "snapshot" => snapshots.push(Timestamp::parse_iso(value).map_err(|_| corrupt(line))?),
            "subjects" => report.subjects = number()?,
            "records" => report.records = number()?,
            "current" => report.current = number()?,
            "triples" => report.triples = number()?,
            "skipped" => report.skipped_lines = number()?,
            _ => return Err(corrupt(line)),
        }
    }
    if snapshots.is_empty() {
        return Err(corrupt("no snapshots"));
    }
    Ok(ArchiveMeta { built_at: built_at.ok_or_else(|| corrupt("missing built_at"))?, snapshots, report })
}

impl Archive {
    pub fn open(dir: &Path, layout: UriLayout) -> Result<Self, StoreError> {
        let meta = parse_meta(&fs::read_to_string(dir.join(META_FILE))?)?;
        let log = File::open(dir.join(LOG_FILE))?;
        let index = build_index(&log, meta.snapshots.len())?;
        Ok(Archive { log, meta, layout, index })
    }

    pub fn layout(&self) -> &UriLayout {
        &self.layout
    }

    pub fn built_at(&self) -> Timestamp {
        self.meta.built_at
    }

    pub fn snapshot_dates(&self) -> &[Timestamp] {
        &self.meta.snapshots
    }

    /// Date of the current (last) snapshot.
    pub fn current_date(&self) -> Timestamp {
        *self.meta.snapshots.last().expect("non-empty")
    }

    pub fn report(&self) -> IngestReport {
        self.meta.report
    }

    /// All subjects, sorted.
    pub fn subjects(&self) -> Vec<ResourceUri> {
        let mut out: Vec<_> = self.index.keys().cloned().collect();
        out.sort();
        out
    }

    fn current_index(&self) -> usize {
        self.meta.snapshots.len() - 1
    }

    fn make_record(&self, subject: &ResourceUri, snapshot: usize, fragments: &[Fragment]) -> MementoRecord {
        let start = self.meta.snapshots[snapshot];
        let end = self.meta.snapshots[snapshot + 1];
        MementoRecord {
            id: fragments.first().map_or(0, |f| f.offset),
            subject: subject.clone(),
            interval: VersionInterval::closed(start, end).expect("snapshot dates strictly increase"),
            memento_uri: self.layout.memento_uri(subject, start),
            created_at: self.meta.built_at.max(start),
            fragments: fragments.to_vec(),
        }
    }

    /// Every Memento of `subject`, ascending by interval start. Unknown
    /// subjects have none.
    pub fn list_versions(&self, subject: &ResourceUri) -> Vec<MementoRecord> {
        let current = self.current_index();
        self.index
            .get(subject)
            .map(|entry| {
                entry
                    .versions
                    .iter()
                    .filter(|(snap, _)| *snap < current)
                    .map(|(snap, frags)| self.make_record(subject, *snap, frags))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn has_subject(&self, subject: &ResourceUri) -> bool {
        self.index.contains_key(subject)
    }

    pub fn has_current(&self, subject: &ResourceUri) -> bool {
        let current = self.current_index();
        self.index.get(subject).is_some_and(|e| e.versions.last().is_some_and(|(snap, _)| *snap == current))
    }

    pub fn known_range(&self, subject: &ResourceUri) -> Result<KnownRange, StoreError> {
        let entry = self.index.get(subject).ok_or_else(|| StoreError::UnknownSubject(subject.clone()))?;
        let (first_snap, _) = entry.versions.first().expect("indexed subjects have a version");
        Ok(KnownRange {
            earliest: self.meta.snapshots[*first_snap],
            latest: self.current_date(),
            has_current: self.has_current(subject),
        })
    }

    /// Point-in-time selection. A datetime in a gap where the subject was
    /// absent resolves to the last known state before it.
    pub fn lookup(&self, subject: &ResourceUri, t: Timestamp) -> Result<LookupResult, StoreError> {
        let range = self.known_range(subject)?;
        if t < range.earliest {
            return Ok(LookupResult::OutOfRange);
        }
        if t >= range.latest && range.has_current {
            return Ok(LookupResult::Current);
        }
        let entry = &self.index[subject];
        let current = self.current_index();
        let snaps = &self.meta.snapshots;
        let mementos: Vec<_> = entry.versions.iter().filter(|(s, _)| *s < current).collect();
        let pos = mementos.partition_point(|(s, _)| snaps[*s] <= t);
        // pos > 0: t >= earliest and the subject's first version is a memento here.
        let (snap, frags) = mementos[pos - 1];
        Ok(LookupResult::Memento(self.make_record(subject, *snap, frags)))
    }

    pub fn neighbors(&self, subject: &ResourceUri, record: &MementoRecord) -> Option<Neighbors> {
        let versions = self.list_versions(subject);
        let pos = versions.iter().position(|r| r.interval.start() == record.interval.start())?;
        Some(Neighbors {
            first: versions[0].clone(),
            last: versions[versions.len() - 1].clone(),
            prev: pos.checked_sub(1).map(|p| versions[p].clone()),
            next: versions.get(pos + 1).cloned(),
        })
    }

    /// The Memento starting at exactly `start`, if any.
    pub fn memento_at(&self, subject: &ResourceUri, start: Timestamp) -> Option<MementoRecord> {
        self.list_versions(subject).into_iter().find(|r| r.interval.start() == start)
    }

    /// Archived N-Triples of a Memento. Identical on every call.
    pub fn representation(&self, record: &MementoRecord) -> io::Result<Vec<u8>> {
        self.read_fragments(&record.fragments)
    }

    /// N-Triples of the subject in the current snapshot.
    pub fn current_representation(&self, subject: &ResourceUri) -> io::Result<Option<Vec<u8>>> {
        if !self.has_current(subject) {
            return Ok(None);
        }
        let (_, frags) = self.index[subject].versions.last().expect("has current");
        self.read_fragments(frags).map(Some)
    }

    fn read_fragments(&self, fragments: &[Fragment]) -> io::Result<Vec<u8>> {
        let total = fragments.iter().map(|f| f.len as usize).sum();
        let mut out = vec![0u8; total];
        let mut at = 0;
        for f in fragments {
            let len = f.len as usize;
            self.log.read_exact_at(&mut out[at..at + len], f.offset)?;
            at += len;
        }
        Ok(out)
    }
}

fn build_index(log: &File, snapshot_count: usize) -> Result<HashMap<ResourceUri, SubjectIndex>, StoreError> {
    let mut index: HashMap<ResourceUri, SubjectIndex> = HashMap::new();
    let mut reader = BufReader::with_capacity(1 << 16, log.try_clone()?);
    reader.seek(SeekFrom::Start(0))?;
    let mut offset = 0u64;
    let mut header = String::new();
    loop {
        header.clear();
        let n = reader.read_line(&mut header)?;
        if n == 0 {
            break;
        }
        let corrupt = || StoreError::Corrupt(format!("bad fragment header at offset {offset}"));
        let mut parts = header.trim_end_matches('\n').splitn(4, ' ');
        if parts.next() != Some("F") {
            return Err(corrupt());
        }
        let snapshot: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(corrupt)?;
        let len: u32 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(corrupt)?;
        let subject = parts.next().and_then(|s| ResourceUri::parse(s).ok()).ok_or_else(corrupt)?;
        if snapshot >= snapshot_count {
            return Err(corrupt());
        }
        let body_offset = offset + n as u64;
        let fragment = Fragment { offset: body_offset, len };
        let entry = index.entry(subject).or_default();
        match entry.versions.last_mut() {
            Some((snap, frags)) if *snap == snapshot => frags.push(fragment),
            Some((snap, _)) if *snap > snapshot => return Err(corrupt()),
            _ => entry.versions.push((snapshot, vec![fragment])),
        }
        reader.seek_relative(len as i64)?;
        offset = body_offset + len as u64;
    }
    let file_len = log.metadata()?.len();
    if offset != file_len {
        return Err(StoreError::Corrupt(format!("log truncated: expected {offset} bytes, found {file_len}")));
    }
    Ok(index)
}
