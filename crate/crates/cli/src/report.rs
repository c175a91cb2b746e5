use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use serde_json::Value;

use crate::run::{sha256_hex, RunManifest, TaskStatus};

/// Verifies every listed checksum; errors on the first mismatch or missing file.
pub fn verify(manifest: &RunManifest, dir: &Path) -> anyhow::Result<()> {
    for f in &manifest.files {
        let path = dir.join(&f.path);
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let got = sha256_hex(&bytes);
        if got != f.sha256 {
            bail!("checksum mismatch for {}: manifest {}, file {}", f.path, f.sha256, got);
        }
    }
    Ok(())
}

fn num(v: &Value) -> String {
    match v {
        Value::Null => "none".into(),
        _ => match v.as_f64() {
            Some(x) => format!("{x:.6e}"),
            None => v.to_string(),
        },
    }
}

fn pass(v: &Value) -> &'static str {
    match v.as_bool() {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "n/a",
    }
}

pub fn summarize(manifest: &RunManifest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {} (sha256 {})", manifest.scenario_name, &manifest.scenario_hash[..16.min(manifest.scenario_hash.len())]);
    let _ = writeln!(s, "tool {}  started {}  finished {}", manifest.tool_version, manifest.started, manifest.finished);
    let _ = writeln!(s, "{} tasks, {} failed, {} files verified", manifest.tasks.len(), manifest.failed_tasks(), manifest.files.len());
    let _ = writeln!(s);
    for t in &manifest.tasks {
        let head = format!("[{:02}] {:<11}", t.index, t.kind);
        if t.status == TaskStatus::Failed {
            let _ = writeln!(s, "{head} FAILED: {}", t.error.as_deref().unwrap_or("unknown error"));
            continue;
        }
        let v = &t.summary;
        let line = match t.kind.as_str() {
            "flow" => format!(
                "termination {}, T_est {}, {} samples",
                v["termination"]["kind"].as_str().unwrap_or("?"),
                num(&v["t_est"]),
                v["samples"]
            ),
            "pinching" => format!("epsilon {}, min normalized margin {}: {}", num(&v["epsilon"]), num(&v["min_normalized_margin"]), pass(&v["pass"])),
            "decay" => format!(
                "sigma {}, decay ratio {:.6}, f-inequality violation {}: {}",
                num(&v["sigma"]),
                v["decay_ratio"].as_f64().unwrap_or(f64::NAN),
                num(&v["f_inequality"]),
                pass(&v["pass"])
            ),
            "classify" => format!("verdict {}, statistic {}", v["kind"].as_str().unwrap_or("?"), num(&v["statistic"])),
            "blowup" => format!("{} base times ({})", v["base_times"].as_array().map_or(0, |a| a.len()), v["quantity"]),
            "noncollapse" => format!(
                "kappa-noncollapsed {}{}",
                pass(&v["pass"]),
                v["diagnosis"].as_str().map(|d| format!(" ({d})")).unwrap_or_default()
            ),
            "ballvolume" => format!("conjugate radius {}, volume at r_max {}", num(&v["conjugate_radius"]), num(&v["volume_at_r_max"])),
            "collapse" => format!("collapse radius {}", num(&v["collapse_radius"])),
            "rvol" => {
                let values: Vec<String> = v["values"].as_array().map(|a| a.iter().map(num).collect()).unwrap_or_default();
                let mut l = format!(
                    "values [{}], monotonicity {}, spread {}",
                    values.join(", "),
                    pass(&v["monotone_non_increasing"]),
                    num(&v["constancy_spread"])
                );
                if !v["constancy_pass"].is_null() {
                    let _ = write!(l, ", constancy {}", pass(&v["constancy_pass"]));
                }
                l
            }
            "limitcheck" => format!("monotone and limit {}", pass(&v["pass"])),
            _ => v.to_string(),
        };
        let _ = writeln!(s, "{head} {line}");
    }
    s
}
