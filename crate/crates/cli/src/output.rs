//! Report files: `report.json`, one CSV per table and binary artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde_json::Value;

use crate::run::RunReport;

/// CSV files keyed by file name; duplicate table names get the report name as prefix.
pub fn csv_files(r: &RunReport) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for (name, t) in &r.tables {
        files.insert(format!("{name}.csv"), t.to_csv());
    }
    for (report, er) in &r.reports {
        for (name, t) in &er.tables {
            let plain = format!("{name}.csv");
            let file = if files.contains_key(&plain) { format!("{report}_{name}.csv") } else { plain };
            files.insert(file, t.to_csv());
        }
    }
    files
}

pub fn report_json(r: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

/// Writes the report into `dir`, creating it if needed.
pub fn write_report(dir: &Path, r: &RunReport) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report_json(r))?;
    for (file, body) in csv_files(r) {
        fs::write(dir.join(file), body)?;
    }
    for (file, bytes) in &r.artifacts {
        fs::write(dir.join(file), bytes)?;
    }
    Ok(())
}

/// Human-readable summary of a `report.json`.
pub fn summarize(v: &Value) -> String {
    let mut s = String::new();
    let field = |k: &str| v.get(k).map(|x| x.to_string()).unwrap_or_default();
    s.push_str(&format!("scenario {} (kind {}, seed {})\n", field("scenario"), field("kind"), field("seed")));
    s.push_str(&format!("  config sha256 {}\n", field("config_digest")));
    if let Some(verdict) = v.get("verdict") {
        let passed = verdict.get("passed").and_then(Value::as_bool).unwrap_or(false);
        let witness = verdict.get("witness").and_then(Value::as_str).unwrap_or("");
        s.push_str(&format!("  verdict: {} ({witness})\n", if passed { "PASS" } else { "FAIL" }));
    }
    if let Some(err) = v.get("error").and_then(Value::as_str) {
        s.push_str(&format!("  error: {err}\n"));
    }
    if let Some(reports) = v.get("reports").and_then(Value::as_object) {
        for (name, r) in reports {
            s.push_str(&format!("  [{name}]\n"));
            if let Some(fitted) = r.get("fitted").and_then(Value::as_object) {
                for (k, x) in fitted {
                    s.push_str(&format!("    {k:<24} {x}\n"));
                }
            }
            if let Some(trace) = r.get("refinement_trace").and_then(Value::as_array) {
                for t in trace.iter().filter(|_| trace.len() > 1) {
                    s.push_str(&format!("    level {} nx={} nt={} h={}\n", t["level"], t["nx"], t["nt"], t["h"]));
                }
            }
            if let Some(flags) = r.get("flags").and_then(Value::as_array) {
                for f in flags {
                    s.push_str(&format!("    flag: {}\n", f.as_str().unwrap_or("")));
                }
            }
        }
    }
    if let Some(details) = v.get("details").and_then(Value::as_object) {
        for (k, x) in details {
            let text = x.to_string();
            if text.len() <= 120 {
                s.push_str(&format!("  {k}: {text}\n"));
            } else {
                s.push_str(&format!("  {k}: ({} bytes of JSON)\n", text.len()));
            }
        }
    }
    s
}
