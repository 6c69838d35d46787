use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Zeroes every `wall_ms` field, recursively.
fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            for (k, x) in m.iter_mut() {
                if k == "wall_ms" {
                    *x = Value::from(0.0);
                } else {
                    strip_timing(x);
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

/// Pretty JSON with a trailing newline. Unless `stable`, a `metadata`
/// object with the generation time is added to the top level.
pub fn json_text<T: Serialize>(value: &T, stable: bool) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value).map_err(CliError::failed)?;
    if stable {
        strip_timing(&mut v);
    } else if let Value::Object(m) = &mut v {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        m.insert(
            "metadata".into(),
            serde_json::json!({ "generated_at_ms": now, "version": env!("CARGO_PKG_VERSION") }),
        );
    }
    let mut s = serde_json::to_string_pretty(&v).map_err(CliError::failed)?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when there is none.
pub fn write(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Failed(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(CliError::failed)?;
            out.flush().map_err(CliError::failed)
        }
    }
}

/// The CSV companion of a JSON output file.
pub fn companion_csv(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

/// Writes JSON to `out` (or stdout) and, when writing to a file, `csv` next to it.
pub fn write_json_and_csv<T: Serialize>(
    out: Option<&Path>,
    value: &T,
    csv: &str,
    stable: bool,
) -> Result<(), CliError> {
    write(out, &json_text(value, stable)?)?;
    if let Some(p) = out {
        let csv_path = companion_csv(p);
        if csv_path != p {
            write(Some(&csv_path), csv)?;
        }
    }
    Ok(())
}
