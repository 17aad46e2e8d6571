use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Timing {
    stage: String,
    seconds: f64,
}

#[derive(Serialize)]
struct Document<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a [String],
    parameters: &'a serde_json::Value,
    threads: usize,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    timings: &'a [Timing],
}

/// Inputs, outputs and timings of one run.
pub struct Manifest {
    start: Instant,
    last: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    timings: Vec<Timing>,
    pub parameters: serde_json::Value,
}

fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok((digest.iter().map(|b| format!("{b:02x}")).collect(), bytes.len() as u64))
}

fn entries(paths: &[PathBuf]) -> std::io::Result<Vec<FileEntry>> {
    paths
        .iter()
        .map(|p| {
            let (sha256, bytes) = sha256_file(p)?;
            Ok(FileEntry { path: p.display().to_string(), sha256, bytes })
        })
        .collect()
}

impl Manifest {
    pub fn new() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            last: now,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            parameters: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    /// Records the time since the previous stage.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push(Timing { stage: name.into(), seconds: (now - self.last).as_secs_f64() });
        self.last = now;
    }

    pub fn write(mut self, dir: &Path) -> std::io::Result<PathBuf> {
        let total = self.start.elapsed().as_secs_f64();
        self.timings.push(Timing { stage: "total".into(), seconds: total });
        let command: Vec<String> = std::env::args().collect();
        let doc = Document {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: &command,
            parameters: &self.parameters,
            threads: threads(),
            inputs: entries(&self.inputs)?,
            outputs: entries(&self.outputs)?,
            timings: &self.timings,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        fs::write(&p, "abc").unwrap();
        let (h, n) = sha256_file(&p).unwrap();
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(n, 3);
        let mut m = Manifest::new();
        m.input(&p);
        m.stage("read");
        let out = m.write(dir.path()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        assert_eq!(v["inputs"][0]["sha256"], h);
        assert_eq!(v["timings"].as_array().unwrap().len(), 2);
    }
}
