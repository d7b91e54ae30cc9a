//! Run directories, error records and replay comparison.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{hash8, ExperimentConfig};
use crate::experiment::{artifacts, summary, Report};

pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

/// Writes `config.json`, `report.json`, the tables and plots, and
/// `summary.txt` into the config's run directory, replacing an earlier
/// `error.json` there.
pub fn write_run(cfg: &ExperimentConfig, report: &Report) -> std::io::Result<PathBuf> {
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(dir.join("error.json"));
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg).expect("configs serialize") + "\n")?;
    fs::write(dir.join("report.json"), report.to_json())?;
    for a in artifacts(report) {
        fs::write(dir.join(&a.name), a.contents)?;
    }
    fs::write(dir.join("summary.txt"), summary(report))?;
    Ok(dir)
}

/// Where the error record of a failed run goes: the run directory when the
/// config is valid; otherwise `<output_dir>/<name>-<hash of the raw text>`
/// when at least those two keys can be read.
pub fn error_dir(cfg: Option<&ExperimentConfig>, raw: &str) -> Option<PathBuf> {
    if let Some(c) = cfg {
        return Some(c.run_dir());
    }
    let (name, out) = sniff_name_and_dir(raw)?;
    Some(out.join(format!("{name}-{}", hash8(raw.as_bytes()))))
}

fn sniff_name_and_dir(raw: &str) -> Option<(String, PathBuf)> {
    let valid = |n: &str| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c));
    if raw.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(raw).ok()?;
        let e = v.get("experiment")?;
        let name = e.get("name")?.as_str()?.to_string();
        let out = e.get("output_dir").and_then(Value::as_str).unwrap_or("runs");
        return valid(&name).then(|| (name, PathBuf::from(out)));
    }
    let ini = ini::Ini::load_from_str(raw).ok()?;
    let sec = ini.section(Some("experiment"))?;
    let name = sec.get("name")?.trim().to_string();
    let out = sec.get("output_dir").map_or("runs", str::trim);
    valid(&name).then(|| (name, PathBuf::from(out)))
}

pub fn write_error(dir: &Path, rec: &ErrorRecord) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("error.json"), serde_json::to_string_pretty(rec).expect("records serialize") + "\n")
}

/// First place where two JSON documents differ, as a path like
/// `result.reports[1].eigvec_errors[2]`, with both values.
pub fn first_difference(expected: &Value, actual: &Value) -> Option<(String, String, String)> {
    fn walk(path: &str, a: &Value, b: &Value) -> Option<(String, String, String)> {
        let at = |p: &str| if p.is_empty() { "<root>".to_string() } else { p.to_string() };
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                for (k, va) in x {
                    let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    match y.get(k) {
                        Some(vb) => {
                            if let Some(d) = walk(&p, va, vb) {
                                return Some(d);
                            }
                        }
                        None => return Some((p, va.to_string(), "<missing>".into())),
                    }
                }
                y.keys()
                    .find(|k| !x.contains_key(*k))
                    .map(|k| (if path.is_empty() { k.clone() } else { format!("{path}.{k}") }, "<missing>".into(), y[k].to_string()))
            }
            (Value::Array(x), Value::Array(y)) => {
                for (i, (va, vb)) in x.iter().zip(y).enumerate() {
                    if let Some(d) = walk(&format!("{path}[{i}]"), va, vb) {
                        return Some(d);
                    }
                }
                (x.len() != y.len()).then(|| (format!("{}.length", at(path)), x.len().to_string(), y.len().to_string()))
            }
            _ => (a != b).then(|| (at(path), a.to_string(), b.to_string())),
        }
    }
    walk("", expected, actual)
}

pub enum ReplayOutcome {
    Match,
    /// Field path, value on disk, value from the rerun.
    Mismatch { path: String, stored: String, rerun: String },
}

/// Compares the stored report text with a fresh rendering byte for byte and
/// locates the first differing field when they disagree.
pub fn compare_reports(stored: &str, rerun: &str) -> ReplayOutcome {
    if stored == rerun {
        return ReplayOutcome::Match;
    }
    let parsed = (serde_json::from_str::<Value>(stored), serde_json::from_str::<Value>(rerun));
    if let (Ok(a), Ok(b)) = parsed {
        if let Some((path, stored, rerun)) = first_difference(&a, &b) {
            return ReplayOutcome::Mismatch { path, stored, rerun };
        }
    }
    // same values, different bytes (formatting or an unparsable file)
    let at = stored.bytes().zip(rerun.bytes()).position(|(x, y)| x != y).unwrap_or(stored.len().min(rerun.len()));
    ReplayOutcome::Mismatch { path: format!("<byte {at}>"), stored: String::new(), rerun: String::new() }
}
