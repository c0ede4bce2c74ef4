//! Output plumbing: provenance comment blocks, JSON envelopes with the
//! resolved config echo, and atomic file writes.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::Resolved;
use crate::AppError;

/// `# key=value` provenance comments shared by the CSV outputs. The angle
/// is printed to 15 digits so the canonical token stays auditable.
pub fn comment_block(resolved: &Resolved, extra: &[(&str, String)]) -> String {
    let p = &resolved.params;
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(&format!("# {key}={value}\n"));
    };
    push("lambda_l", p.lambda_l.to_string());
    push("lambda_r", p.lambda_r.to_string());
    push("kappa", p.kappa.to_string());
    push("gamma_l", p.gamma_l.to_string());
    push("gamma_r", p.gamma_r.to_string());
    push("theta", format!("{:.15}", resolved.angle.theta()));
    push("seed", resolved.config.seed.to_string());
    for (key, value) in extra {
        push(key, value.clone());
    }
    out
}

/// Wraps command data with the resolved configuration; the `config` field
/// re-parses to the exact `RunConfig` used for the run.
pub fn json_envelope(resolved: &Resolved, data: Value) -> Result<String, AppError> {
    let envelope = json!({
        "config": resolved.config,
        "data": data,
    });
    let mut text = serde_json::to_string_pretty(&envelope)
        .map_err(|e| AppError::domain(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes to the configured path via a temp file and rename, or to
/// standard output when no path is set.
pub fn emit(resolved: &Resolved, text: &str) -> Result<(), AppError> {
    match &resolved.config.output.path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(parent) if !parent.as_os_str().is_empty() => parent,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| AppError::domain(format!("cannot create temp file: {e}")))?;
            tmp.write_all(text.as_bytes())
                .map_err(|e| AppError::domain(format!("write failed: {e}")))?;
            tmp.persist(path)
                .map_err(|e| AppError::domain(format!("cannot move output into place: {e}")))?;
            Ok(())
        }
    }
}
