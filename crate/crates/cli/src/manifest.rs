use crate::CmdResult;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_VERSION: &str = "lob-tactics/manifest-v1";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub seeds: Vec<u64>,
    /// sha256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> CmdResult<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// An output directory that records what goes into it and finishes with
/// a single `manifest.json`.
pub struct OutDir {
    dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl OutDir {
    pub fn create(dir: &Path, command: &str) -> CmdResult<OutDir> {
        fs::create_dir_all(dir)?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                format: MANIFEST_VERSION,
                tool_version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config_hash: None,
                seeds: Vec::new(),
                inputs: BTreeMap::new(),
                wall_clock_seconds: 0.0,
                outputs: Vec::new(),
            },
        })
    }

    pub fn config_hash(&mut self, hash: String) {
        self.manifest.config_hash = Some(hash);
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    pub fn input(&mut self, path: &Path) -> CmdResult {
        let digest = sha256_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Opens `name` for writing and lists it as an output.
    pub fn file(&mut self, name: &str) -> CmdResult<std::io::BufWriter<fs::File>> {
        self.manifest.outputs.push(name.to_string());
        Ok(std::io::BufWriter::new(fs::File::create(self.dir.join(name))?))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CmdResult {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.manifest.outputs.push(name.to_string());
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }

    pub fn finish(mut self) -> CmdResult {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}
