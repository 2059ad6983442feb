use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const MANIFEST: &str = "manifest.json";
/// Wall-clock stage times; the only output that is not reproducible, so it
/// is kept out of the manifest.
pub const TIMINGS: &str = "timings.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
struct StageTime {
    stage: String,
    seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files of one run. Everything written is removed again
/// unless the run is finished.
pub struct RunOutput {
    dir: PathBuf,
    files: Vec<FileEntry>,
    stages: Vec<StageTime>,
    created_dir: bool,
    finished: bool,
}

impl RunOutput {
    pub fn create(dir: &Path) -> CliResult<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            stages: Vec::new(),
            created_dir,
            finished: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.stages.push(StageTime {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    /// Writes the manifest (config echo, seeds, versions and a checksum for
    /// every produced file) and the stage timings.
    pub fn finish(mut self, command: &str, config: Value, seeds: Value) -> CliResult<Vec<FileEntry>> {
        let mut files = self.files.clone();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = serde_json::json!({
            "command": command,
            "config": config,
            "seeds": seeds,
            "versions": {
                "causens-core": causens_core::VERSION,
                "causens-cli": env!("CARGO_PKG_VERSION"),
            },
            "files": files,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        text.push('\n');
        std::fs::write(self.dir.join(MANIFEST), text)?;
        let mut timings = serde_json::to_string_pretty(&self.stages).expect("serializable timings");
        timings.push('\n');
        std::fs::write(self.dir.join(TIMINGS), timings)?;
        self.finished = true;
        Ok(files)
    }
}

impl Drop for RunOutput {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(self.dir.join(&f.path));
        }
        if self.created_dir {
            let _ = std::fs::remove_dir_all(&self.dir);
        }
    }
}

/// CSV field quoting for values that contain separators or quotes.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_line(fields: &[String]) -> String {
    let mut line = fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// Reported number format: three decimals.
pub fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

/// `[a, b, c]`, as conditioning sets are printed in tables.
pub fn set_label(names: &[String]) -> String {
    format!("[{}]", names.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfinished_runs_leave_nothing_behind() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("run");
        {
            let mut out = RunOutput::create(&dir).unwrap();
            out.write("a.csv", b"x\n").unwrap();
            assert!(dir.join("a.csv").exists());
        }
        assert!(!dir.exists());
    }

    #[test]
    fn finished_runs_list_checksums() {
        let root = tempfile::tempdir().unwrap();
        let mut out = RunOutput::create(root.path()).unwrap();
        out.write("sub/a.csv", b"abc").unwrap();
        let files = out.finish("test", Value::Null, Value::Null).unwrap();
        assert_eq!(
            files[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(root.path().join(MANIFEST).exists());
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_line(&["[a, b]".into(), "x".into()]), "\"[a, b]\",x\n");
        assert_eq!(fmt3(0.8526), "0.853");
    }
}
