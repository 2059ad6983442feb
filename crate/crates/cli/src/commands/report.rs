use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::output::{sha256_hex, MANIFEST};

#[derive(Deserialize)]
struct ManifestFile {
    path: String,
    sha256: String,
}

#[derive(Deserialize)]
struct Manifest {
    command: String,
    files: Vec<ManifestFile>,
}

/// Lines of a table shown before it is elided.
const MAX_LINES: usize = 21;

fn head(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() <= MAX_LINES {
        return text.to_string();
    }
    format!("{}\n... ({} more rows)\n", lines[..MAX_LINES].join("\n"), lines.len() - MAX_LINES)
}

/// Verifies every checksum in a run directory's manifest and renders its
/// CSV tables.
pub fn cmd_report(dir: &Path) -> CliResult<String> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = format!("run: {} ({} files)\n", manifest.command, manifest.files.len());
    let mut bad = Vec::new();
    for f in &manifest.files {
        match std::fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {
                if f.path.ends_with(".csv") && !f.path.contains('/') {
                    out.push_str(&format!("\n== {} ==\n{}", f.path, head(&String::from_utf8_lossy(&bytes))));
                }
            }
            Ok(_) => bad.push(format!("{}: checksum mismatch", f.path)),
            Err(e) => bad.push(format!("{}: {e}", f.path)),
        }
    }
    if bad.is_empty() {
        out.push_str("\nall checksums verified\n");
        Ok(out)
    } else {
        Err(CliError::Failed(bad.join("\n")))
    }
}
