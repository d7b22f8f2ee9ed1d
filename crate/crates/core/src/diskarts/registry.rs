//! Windows `.reg` export parsing and matching against the catalogue of
//! keys the client leaves behind at install time and after uninstall.

use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};
use serde::Serialize;

use super::DiskError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RegistryPhase {
    /// Present after installation only.
    Install,
    /// Listed among the keys that survive uninstallation only.
    UninstallRemnant,
    /// Present both after install and after uninstall.
    Either,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegistryFinding {
    pub key_path: String,
    pub matched_pattern: String,
    pub phase: RegistryPhase,
    pub value: Option<String>,
    /// 1-based line of the key header in the export.
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegistryVerdict {
    Installed,
    UninstalledRemnants,
    NotPresent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegValue {
    pub name: String,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegKey {
    pub path: String,
    pub line: usize,
    pub deleted: bool,
    pub values: Vec<RegValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ValueRule {
    /// The key alone is evidence.
    KeyOnly,
    /// Generic Windows key; only evidence when a value mentions the client.
    MentionsClient,
    /// UserAssist `Count` key: value names are ROT-13 encoded.
    Rot13Names,
}

struct Pattern {
    display: &'static str,
    phase: RegistryPhase,
    rule: ValueRule,
    regex: Regex,
}

const SID: &str = r"S-1-5-21(?:-\d+)+";
const USERASSIST: &str =
    r"Software\\Microsoft\\Windows\\CurrentVersion\\Explorer\\UserAssist\\\{75048700-EF1F-11D0-9888-006097DEACF9\}\\Count";

// (display, regex template, phase, rule); `{SID}` and `{UA}` are substituted.
const TABLE: [(&str, &str, RegistryPhase, ValueRule); 14] = {
    use RegistryPhase::*;
    use ValueRule::*;
    [
        (
            r"HKCR\Applications\BTSync.exe\shell\open\command",
            r"HKCR\\Applications\\BTSync\.exe\\shell\\open\\command",
            Either,
            KeyOnly,
        ),
        (
            r"HKCU\Software\Classes\Applications\BTSync.exe\shell\open\command",
            r"HKCU\\Software\\Classes\\Applications\\BTSync\.exe\\shell\\open\\command",
            Either,
            KeyOnly,
        ),
        (
            r"HKCU\Software\Microsoft\Windows\CurrentVersion\Run",
            r"HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Run",
            Either,
            MentionsClient,
        ),
        (
            r"HKCU\Software\Microsoft\Windows\ShellNoRoam\MUICache",
            r"HKCU\\Software\\Microsoft\\Windows\\ShellNoRoam\\MUICache",
            Either,
            MentionsClient,
        ),
        (
            r"HKLM\SOFTWARE\Microsoft\ESENT\Process\BTSync\DEBUG",
            r"HKLM\\SOFTWARE\\Microsoft\\ESENT\\Process\\BTSync\\DEBUG",
            Either,
            KeyOnly,
        ),
        (
            r"HKLM\SOFTWARE\Microsoft\Windows\CurrentVersion\Uninstall\BitTorrent Sync",
            r"HKLM\\SOFTWARE\\Microsoft\\Windows\\CurrentVersion\\Uninstall\\BitTorrent Sync",
            Install,
            KeyOnly,
        ),
        (
            r"HKLM\SYSTEM\ControlSet001\Services\SharedAccess\Parameters\FirewallPolicy\StandardProfile\AuthorizedApplications\List",
            r"HKLM\\SYSTEM\\(?:ControlSet\d{3}|CurrentControlSet)\\Services\\SharedAccess\\Parameters\\FirewallPolicy\\StandardProfile\\AuthorizedApplications\\List",
            Install,
            MentionsClient,
        ),
        (
            r"HKU\S-1-5-21...\Software\Classes\Applications\BTSync.exe",
            r"HKU\\{SID}\\Software\\Classes\\Applications\\BTSync\.exe",
            Install,
            KeyOnly,
        ),
        (
            r"HKU\S-1-5-21...\Software\Classes\Applications\BTSync.exe\shell\open\command",
            r"HKU\\{SID}\\Software\\Classes\\Applications\\BTSync\.exe\\shell\\open\\command",
            Install,
            KeyOnly,
        ),
        (
            r"HKU\S-1-5-21...\Software\Microsoft\Windows\CurrentVersion\Run",
            r"HKU\\{SID}\\Software\\Microsoft\\Windows\\CurrentVersion\\Run",
            Install,
            MentionsClient,
        ),
        (
            r"HKU\S-1-5-21...\Software\Microsoft\Windows\ShellNoRoam\MUICache",
            r"HKU\\{SID}\\Software\\Microsoft\\Windows\\ShellNoRoam\\MUICache",
            Install,
            MentionsClient,
        ),
        (
            r"HKU\S-1-5-21..._Classes\Applications\BTSync.exe\shell\open\command",
            r"HKU\\{SID}_Classes\\Applications\\BTSync\.exe\\shell\\open\\command",
            Install,
            KeyOnly,
        ),
        (
            r"HKCU\Software\Microsoft\Windows\CurrentVersion\Explorer\UserAssist\{75048700-EF1F-11D0-9888-006097DEACF9}\Count",
            r"HKCU\\{UA}",
            UninstallRemnant,
            Rot13Names,
        ),
        (
            r"HKU\S-1-5-21...\Software\Microsoft\Windows\CurrentVersion\Explorer\UserAssist\{75048700-EF1F-11D0-9888-006097DEACF9}\Count",
            r"HKU\\{SID}\\{UA}",
            UninstallRemnant,
            Rot13Names,
        ),
    ]
};

fn catalogue() -> &'static [Pattern] {
    static CAT: OnceLock<Vec<Pattern>> = OnceLock::new();
    CAT.get_or_init(|| {
        TABLE
            .iter()
            .map(|&(display, template, phase, rule)| {
                let source = template.replace("{SID}", SID).replace("{UA}", USERASSIST);
                let regex = RegexBuilder::new(&format!("^{source}$"))
                    .case_insensitive(true)
                    .build()
                    .expect("catalogue regex");
                Pattern { display, phase, rule, regex }
            })
            .collect()
    })
}

/// Display strings of every catalogued pattern.
pub fn catalogued_patterns() -> Vec<(&'static str, RegistryPhase)> {
    catalogue().iter().map(|p| (p.display, p.phase)).collect()
}

pub fn rot13(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            'a'..='z' => (((c as u8 - b'a') + 13) % 26 + b'a') as char,
            'A'..='Z' => (((c as u8 - b'A') + 13) % 26 + b'A') as char,
            _ => c,
        })
        .collect()
}

/// Rewrites the long hive names used in exports to their abbreviations.
pub fn abbreviate_hive(path: &str) -> String {
    const HIVES: [(&str, &str); 5] = [
        ("HKEY_CLASSES_ROOT", "HKCR"),
        ("HKEY_CURRENT_USER", "HKCU"),
        ("HKEY_LOCAL_MACHINE", "HKLM"),
        ("HKEY_USERS", "HKU"),
        ("HKEY_CURRENT_CONFIG", "HKCC"),
    ];
    let (hive, rest) = path.split_once('\\').unwrap_or((path, ""));
    let short = HIVES
        .iter()
        .find(|(long, _)| long.eq_ignore_ascii_case(hive))
        .map_or(hive, |(_, s)| s);
    if rest.is_empty() {
        short.to_owned()
    } else {
        format!("{short}\\{rest}")
    }
}

fn mentions_client(s: &str) -> bool {
    let l = s.to_ascii_lowercase();
    l.contains("btsync") || l.contains("bittorrent sync")
}

/// Decodes a `.reg` file's bytes: UTF-16LE when it carries the BOM that
/// regedit writes, UTF-8 otherwise.
pub fn decode_reg_bytes(bytes: &[u8]) -> String {
    if let Some(body) = bytes.strip_prefix(&[0xFF, 0xFE]) {
        let units: Vec<u16> = body
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        String::from_utf16_lossy(&units)
    } else {
        let body = bytes.strip_prefix(&[0xEF, 0xBB, 0xBF]).unwrap_or(bytes);
        String::from_utf8_lossy(body).into_owned()
    }
}

/// Parses the export into keys and values.
pub fn parse_reg_keys(input: &str) -> Result<Vec<RegKey>, DiskError> {
    let input = input.strip_prefix('\u{feff}').unwrap_or(input);
    let mut logical: Vec<(usize, String)> = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (i, raw) in input.lines().enumerate() {
        let line_no = i + 1;
        let piece = if pending.is_some() { raw.trim_start() } else { raw };
        let (start, mut acc) = pending.take().unwrap_or((line_no, String::new()));
        if let Some(cont) = piece.strip_suffix('\\').filter(|_| !piece.trim_start().starts_with('[')) {
            acc.push_str(cont);
            pending = Some((start, acc));
        } else {
            acc.push_str(piece);
            logical.push((start, acc));
        }
    }
    if let Some(p) = pending {
        logical.push(p);
    }

    let mut lines = logical.into_iter().filter(|(_, l)| !l.trim().is_empty());
    let Some((first_no, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header = header.trim();
    if header != "Windows Registry Editor Version 5.00" && header != "REGEDIT4" {
        return Err(DiskError::MalformedRegExport(first_no));
    }

    let mut keys: Vec<RegKey> = Vec::new();
    for (line_no, line) in lines {
        let line = line.trim();
        if line.starts_with(';') {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or(DiskError::MalformedRegExport(line_no))?;
            let (deleted, path) = match inner.strip_prefix('-') {
                Some(p) => (true, p),
                None => (false, inner),
            };
            if path.is_empty() {
                return Err(DiskError::MalformedRegExport(line_no));
            }
            keys.push(RegKey { path: path.to_owned(), line: line_no, deleted, values: Vec::new() });
            continue;
        }
        let key = keys.last_mut().ok_or(DiskError::MalformedRegExport(line_no))?;
        let value = parse_value_line(line).ok_or(DiskError::MalformedRegExport(line_no))?;
        key.values.push(value);
    }
    Ok(keys)
}

fn parse_quoted(s: &str) -> Option<(String, &str)> {
    let mut out = String::new();
    let mut chars = s.strip_prefix('"')?.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => out.push(chars.next()?.1),
            '"' => return Some((out, &s[i + 2..])),
            _ => out.push(c),
        }
    }
    None
}

fn parse_value_line(line: &str) -> Option<RegValue> {
    let (name, rest) = if let Some(rest) = line.strip_prefix('@') {
        (String::new(), rest)
    } else {
        parse_quoted(line)?
    };
    let data = rest.trim_start().strip_prefix('=')?.trim();
    let data = if data.starts_with('"') {
        parse_quoted(data)?.0
    } else if let Some(d) = data.strip_prefix("dword:") {
        u32::from_str_radix(d.trim(), 16).ok()?.to_string()
    } else if data == "-" {
        String::from("(deleted)")
    } else if let Some((kind, hexdata)) = data.split_once(':').filter(|(k, _)| k.starts_with("hex")) {
        decode_hex_value(kind, hexdata)?
    } else {
        return None;
    };
    Some(RegValue { name, data })
}

fn decode_hex_value(kind: &str, hexdata: &str) -> Option<String> {
    let bytes = hexdata
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|b| u8::from_str_radix(b, 16).ok())
        .collect::<Option<Vec<u8>>>()?;
    match kind {
        // REG_SZ, REG_EXPAND_SZ, REG_MULTI_SZ
        "hex(1)" | "hex(2)" | "hex(7)" => {
            let units: Vec<u16> = bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            let text = String::from_utf16_lossy(&units);
            Some(
                text.trim_end_matches('\0')
                    .split('\0')
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        }
        k if k == "hex" || (k.starts_with("hex(") && k.ends_with(')')) => {
            Some(hex::encode_upper(bytes))
        }
        _ => None,
    }
}

/// Matches every key in the export against the catalogue.
pub fn parse_registry_export(input: &str) -> Result<Vec<RegistryFinding>, DiskError> {
    let keys = parse_reg_keys(input)?;
    Ok(match_keys(&keys))
}

pub fn match_keys(keys: &[RegKey]) -> Vec<RegistryFinding> {
    let mut out = Vec::new();
    for key in keys.iter().filter(|k| !k.deleted) {
        let short = abbreviate_hive(&key.path);
        for pattern in catalogue() {
            if !pattern.regex.is_match(&short) {
                continue;
            }
            let finding = |value: Option<String>| RegistryFinding {
                key_path: key.path.clone(),
                matched_pattern: pattern.display.to_owned(),
                phase: pattern.phase,
                value,
                line: key.line,
            };
            match pattern.rule {
                ValueRule::KeyOnly => out.push(finding(None)),
                ValueRule::MentionsClient => out.extend(
                    key.values
                        .iter()
                        .filter(|v| mentions_client(&v.name) || mentions_client(&v.data))
                        .map(|v| finding(Some(format!("{} = {}", v.name, v.data)))),
                ),
                ValueRule::Rot13Names => out.extend(
                    key.values
                        .iter()
                        .map(|v| rot13(&v.name))
                        .filter(|decoded| mentions_client(decoded))
                        .map(|decoded| finding(Some(decoded))),
                ),
            }
        }
    }
    out
}

/// Installed when any install-only key is present, remnants when only keys
/// that survive uninstallation are present.
pub fn registry_verdict(findings: &[RegistryFinding]) -> RegistryVerdict {
    if findings.iter().any(|f| f.phase == RegistryPhase::Install) {
        RegistryVerdict::Installed
    } else if findings.is_empty() {
        RegistryVerdict::NotPresent
    } else {
        RegistryVerdict::UninstalledRemnants
    }
}
