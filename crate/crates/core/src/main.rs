use std::fs;
use std::io::{self, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use memento_core::client::{ClientError, MementoClient};
use memento_core::media::MediaType;
use memento_core::server::serve_forever;
use memento_core::service::{MementoService, ServiceConfig};
use memento_core::store::{write_archive, Archive, IngestOptions, SnapshotManifest, UriLayout};
use memento_core::time::{Clock, ResourceUri, Timestamp};
use memento_core::timemap::{build_timemap, serialize_rdfxml};
use memento_core::timeseries::{emit, run_series, OutputFormat, SeriesSpec};

const DEFAULT_LISTEN: &str = "127.0.0.1:8085";

#[derive(Parser)]
#[command(name = "memento", version, about = "Datetime content negotiation over an archive of linked-data snapshots")]
struct Cli {
    /// Pin the clock (ISO-8601) for reproducible output.
    #[arg(long, global = true, value_parser = parse_time)]
    fixed_now: Option<Timestamp>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ArchiveArgs {
    /// Archive directory.
    #[arg(long, env = "MEMENTO_ARCHIVE")]
    archive: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build an archive from a snapshot manifest (`<date> <n-triples path>` per line).
    Ingest {
        manifest: PathBuf,
        #[command(flatten)]
        archive: ArchiveArgs,
        /// Fail on the first malformed line instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Serve an archive over HTTP until interrupted.
    Serve {
        #[command(flatten)]
        archive: ArchiveArgs,
        #[arg(long, default_value = DEFAULT_LISTEN)]
        listen: SocketAddr,
        /// Public base URL; defaults to http://<listen>.
        #[arg(long)]
        base_url: Option<String>,
        #[arg(long, default_value = "rdf", value_parser = parse_media)]
        default_media: MediaType,
        /// Redirect to the subject URIs themselves rather than the local copies.
        #[arg(long)]
        external_originals: bool,
    },
    /// Fetch a resource, optionally as of a datetime.
    Get {
        uri: String,
        /// ISO-8601 date or datetime, or an HTTP-date.
        #[arg(long, value_parser = parse_time)]
        datetime: Option<Timestamp>,
        #[arg(long, default_value = "rdf", value_parser = parse_media)]
        accept: MediaType,
        /// Treat URI as a subject of the archive served at this base URL.
        #[arg(long)]
        server: Option<String>,
    },
    /// Print the RDF/XML TimeMap of a subject.
    Timemap {
        subject: String,
        #[command(flatten)]
        archive: ArchiveArgs,
        #[arg(long, default_value = "http://127.0.0.1:8085")]
        base_url: String,
        #[arg(long)]
        external_originals: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a property over resources and datetimes.
    Timeseries {
        spec: PathBuf,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_time(raw: &str) -> Result<Timestamp, String> {
    Timestamp::parse_http_date(raw).or_else(|_| Timestamp::parse_iso(raw)).map_err(|e| e.to_string())
}

fn parse_media(raw: &str) -> Result<MediaType, String> {
    MediaType::from_name(raw).ok_or_else(|| format!("unknown media type {raw:?} (rdf, nt, html)"))
}

fn parse_format(raw: &str) -> Result<OutputFormat, String> {
    OutputFormat::from_name(raw).ok_or_else(|| format!("unknown format {raw:?} (csv, chart-params)"))
}

fn parse_uri(raw: &str) -> Result<ResourceUri, String> {
    ResourceUri::parse(raw).map_err(|e| e.to_string())
}

enum Failure {
    Operational(String),
    OutOfRange(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Operational(e.to_string())
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes),
        None => io::stdout().lock().write_all(bytes),
    }
}

/// Peak resident set size of this process, where the platform reports it.
fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn run(cli: Cli) -> Result<(), Failure> {
    let clock = cli.fixed_now.map_or(Clock::System, Clock::Fixed);
    match cli.command {
        Command::Ingest { manifest, archive, strict } => {
            let started = Instant::now();
            let manifest = SnapshotManifest::load(&manifest)?;
            let report = write_archive(&manifest, &archive.archive, IngestOptions { strict, clock })?;
            if report.skipped_lines > 0 {
                log::warn!("skipped {} malformed lines", report.skipped_lines);
            }
            if let Some(kib) = peak_rss_kib() {
                info!("peak_rss_kib={kib}");
            }
            println!(
                "subjects={} records={} elapsed={:.3}",
                report.subjects,
                report.records,
                started.elapsed().as_secs_f64()
            );
        }
        Command::Serve { archive, listen, base_url, default_media, external_originals } => {
            let base_url = parse_uri(base_url.as_deref().unwrap_or(&format!("http://{listen}")))?;
            let config =
                ServiceConfig { listen, base_url, archive_path: archive.archive, default_media, external_originals };
            if !config.archive_path.is_dir() {
                return Err(Failure::Operational(format!("archive {} does not exist", config.archive_path.display())));
            }
            let layout = UriLayout::new(config.base_url.as_str()).with_external_originals(config.external_originals);
            let archive = Archive::open(&config.archive_path, layout)?;
            let listener = TcpListener::bind(config.listen)?;
            info!(
                "serving {} at {} ({} subjects)",
                config.archive_path.display(),
                config.base_url,
                archive.report().subjects
            );
            serve_forever(listener, MementoService::new(Arc::new(archive), config.default_media))?;
        }
        Command::Get { uri, datetime, accept, server } => {
            let target = match server {
                Some(base) => format!("{}/resource/{uri}", base.trim_end_matches('/')),
                None => uri,
            };
            let target = parse_uri(&target)?;
            let client = MementoClient::http()?;
            let result = match datetime {
                Some(t) => client.fetch_at(&target, t, accept.essence()),
                None => client.fetch(&target, accept.essence()),
            };
            let resp = match result {
                Ok(r) => r,
                Err(ClientError::OutOfRange { range }) => return Err(Failure::OutOfRange(range)),
                Err(e) => return Err(e.into()),
            };
            let mut out = format!("final-uri: {}\n", resp.final_uri);
            match resp.content_datetime {
                Some(t) => out.push_str(&format!("content-datetime: {}\n", t.http_date())),
                None => out.push_str("content-datetime: -\n"),
            }
            for link in &resp.links {
                for rel in &link.rels {
                    out.push_str(&format!("link: {rel} {}\n", link.target));
                }
            }
            if let Some(w) = &resp.warning {
                log::warn!("{w}");
            }
            out.push('\n');
            let mut bytes = out.into_bytes();
            bytes.extend_from_slice(&resp.body);
            write_output(None, &bytes)?;
        }
        Command::Timemap { subject, archive, base_url, external_originals, out } => {
            let subject = parse_uri(&subject)?;
            let layout = UriLayout::new(parse_uri(&base_url)?.as_str()).with_external_originals(external_originals);
            let archive = Archive::open(&archive.archive, layout)?;
            let doc = build_timemap(&archive, &subject)?;
            write_output(out.as_deref(), &serialize_rdfxml(&doc))?;
        }
        Command::Timeseries { spec, format, out } => {
            let spec = SeriesSpec::load(&spec)?;
            let result = run_series(&spec, &MementoClient::http()?)?;
            for (r, row) in result.resources.iter().zip(&result.cells) {
                for (t, cell) in result.times.iter().zip(row) {
                    for a in &cell.anomalies {
                        log::warn!("{r} @ {}: {a}", t.iso_date());
                    }
                }
            }
            write_output(out.as_deref(), &emit(&result, format)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit status 2 is reserved for out-of-range.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Operational(message)) => {
            error!("{message}");
            ExitCode::from(1)
        }
        Err(Failure::OutOfRange(range)) => {
            println!("out of range: {range}");
            ExitCode::from(2)
        }
    }
}
