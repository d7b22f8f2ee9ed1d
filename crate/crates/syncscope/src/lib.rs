//! Command-line front end. [`run`] takes the argument list and output
//! streams so the whole tool can be driven from tests.

use std::ffi::OsString;
use std::fs;
use std::io::{self, IsTerminal, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use syncscope_core::casereport::{correlate, render_report, ReportFormat};
use syncscope_core::diskarts::collect_artifacts;
use syncscope_core::wiredissect::{analyse_capture, CaptureAnalysis, DissectorConfig};
use syncscope_core::{classify_secret, parse_bencode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Disables ANSI styling when set to any value.
pub const NO_COLOR_ENV: &str = "SYNCSCOPE_NO_COLOR";

#[derive(Debug, Parser)]
#[command(name = "syncscope", version, about = "Forensic analysis of BitTorrent Sync artifacts and traffic")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Write data output here instead of standard output.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Report progress on standard error (repeat for more detail).
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode a bencoded file and print it as JSON.
    Bencode { file: PathBuf },
    /// Classify a share secret and derive its ShareId.
    Key { secret: String },
    /// Collect and parse every recognised artifact under a directory.
    Artifacts {
        dir: PathBuf,
        /// A `.reg` export to match against the registry catalogue.
        #[arg(long)]
        reg: Option<PathBuf>,
    },
    /// Dissect a classic pcap capture.
    Pcap {
        file: PathBuf,
        #[command(flatten)]
        hosts: HostArgs,
    },
    /// Correlate artifacts, captures and registry findings into a case report.
    Report {
        #[arg(long)]
        artifacts: PathBuf,
        /// May be given more than once.
        #[arg(long)]
        pcap: Vec<PathBuf>,
        #[arg(long)]
        reg: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        hosts: HostArgs,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct HostArgs {
    /// Tracker address; replaces the built-in list when given.
    #[arg(long = "tracker-ip")]
    pub tracker_ip: Vec<Ipv4Addr>,
    /// Relay address; replaces the built-in list when given.
    #[arg(long = "relay-ip")]
    pub relay_ip: Vec<Ipv4Addr>,
    /// Header marker that identifies client datagrams.
    #[arg(long, default_value = "BSYNC")]
    pub marker: String,
}

impl HostArgs {
    pub fn config(&self) -> DissectorConfig {
        let mut cfg = DissectorConfig { marker: self.marker.as_bytes().to_vec(), ..DissectorConfig::default() };
        if !self.tracker_ip.is_empty() {
            cfg.tracker_hosts = self.tracker_ip.iter().copied().collect();
        }
        if !self.relay_ip.is_empty() {
            cfg.relay_hosts = self.relay_ip.iter().copied().collect();
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

struct Diag<'a> {
    err: &'a mut dyn Write,
    color: bool,
    verbose: u8,
}

impl Diag<'_> {
    fn error(&mut self, msg: impl std::fmt::Display) {
        let tag = if self.color { "\x1b[31merror\x1b[0m" } else { "error" };
        let _ = writeln!(self.err, "{tag}: {msg}");
    }

    fn warn(&mut self, msg: impl std::fmt::Display) {
        let tag = if self.color { "\x1b[33mwarning\x1b[0m" } else { "warning" };
        let _ = writeln!(self.err, "{tag}: {msg}");
    }

    fn info(&mut self, msg: impl std::fmt::Display) {
        if self.verbose > 0 {
            let _ = writeln!(self.err, "{msg}");
        }
    }
}

fn color_enabled() -> bool {
    std::env::var_os(NO_COLOR_ENV).is_none() && io::stderr().is_terminal()
}

/// Runs the tool and returns the process exit code: 0 on success, 1 on I/O
/// or parse failures, 2 on usage errors.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let color = color_enabled();
    let cmd = Cli::command().color(if color { ColorChoice::Auto } else { ColorChoice::Never });
    let cli = match cmd.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", if color { e.render().ansi().to_string() } else { e.render().to_string() });
                    EXIT_USAGE
                }
            };
        }
    };
    let mut diag = Diag { err, color, verbose: cli.verbose };
    match execute(&cli, &mut diag) {
        Ok(data) => match emit(&cli.out, &data, out) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                diag.error(e);
                EXIT_FAILURE
            }
        },
        Err(msg) => {
            diag.error(msg);
            EXIT_FAILURE
        }
    }
}

fn emit(path: &Option<PathBuf>, data: &[u8], out: &mut dyn Write) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, data).map_err(|e| format!("{}: {e}", p.display())),
        None => out.write_all(data).and_then(|_| out.flush()).map_err(|e| e.to_string()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("values serialise");
    v.push(b'\n');
    v
}

fn capture(path: &Path, hosts: &HostArgs, diag: &mut Diag) -> Result<CaptureAnalysis, String> {
    let bytes = read(path)?;
    let analysis = analyse_capture(path.display().to_string(), &bytes, &hosts.config())
        .map_err(|e| format!("{}: {e}", path.display()))?;
    diag.info(format_args!(
        "{}: {} message(s), {} unclassified, {} skipped",
        path.display(),
        analysis.messages.len(),
        analysis.unclassified,
        analysis.skipped
    ));
    Ok(analysis)
}

fn execute(cli: &Cli, diag: &mut Diag) -> Result<Vec<u8>, String> {
    match &cli.command {
        Command::Bencode { file } => {
            let bytes = read(file)?;
            let (value, used) =
                parse_bencode(&bytes).map_err(|e| format!("{}: {e}", file.display()))?;
            if used < bytes.len() {
                diag.warn(format_args!(
                    "{}: {} trailing byte(s) after offset {used}",
                    file.display(),
                    bytes.len() - used
                ));
            }
            Ok(json(&value))
        }
        Command::Key { secret } => {
            let key = classify_secret(secret).map_err(|e| e.to_string())?;
            Ok(format!("{}\nShareId: {}\n", key.class(), key.share_id()).into_bytes())
        }
        Command::Artifacts { dir, reg } => {
            let bundle = collect_artifacts(dir, reg.as_deref())
                .map_err(|e| format!("{}: {e}", dir.display()))?;
            for w in &bundle.warnings {
                diag.warn(w);
            }
            Ok(json(&bundle))
        }
        Command::Pcap { file, hosts } => Ok(json(&capture(file, hosts, diag)?)),
        Command::Report { artifacts, pcap, reg, format, hosts } => {
            let bundle = collect_artifacts(artifacts, reg.as_deref())
                .map_err(|e| format!("{}: {e}", artifacts.display()))?;
            let captures =
                pcap.iter().map(|p| capture(p, hosts, diag)).collect::<Result<Vec<_>, _>>()?;
            let report = correlate(&bundle, &captures);
            diag.info(format_args!(
                "{} share(s), {} peer(s), {} warning(s)",
                report.shares.len(),
                report.peers.len(),
                report.warnings.len()
            ));
            let format = match format {
                Format::Json => ReportFormat::Json,
                Format::Text => ReportFormat::Text,
            };
            Ok(render_report(&report, format))
        }
    }
}
